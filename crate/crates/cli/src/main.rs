mod args;

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::Parser;
use rere::detector::{ReRe, ReReConfig};
use rere::eval::{self, EvalConfig, LabelSet, Metrics, TraceStats};
use rere::ingest::{self, Series, Timestamp};
use rere::synth::{self, Sine, SynthKind, SynthSpec};
use rere::trace::{self, TraceRecord};

use args::{BenchArgs, Cli, Command, DetectArgs, EvaluateArgs, SynthArgs, SynthKindArg};

/// Failure classes, each with its own exit code.
enum Failure {
    Input(anyhow::Error),
    Config(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Config(_) => 3,
        }
    }
}

trait Classify<T> {
    fn input(self) -> Result<T, Failure>;
    fn config(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    let result = match cli.command {
        Command::Detect(a) => detect(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Synth(a) => run_synth(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Input(e) | Failure::Config(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}

fn read_text(path: Option<&Path>) -> anyhow::Result<String> {
    let mut text = String::new();
    match path {
        Some(p) if p != Path::new("-") => {
            File::open(p)
                .and_then(|mut f| f.read_to_string(&mut text))
                .with_context(|| format!("cannot read {}", p.display()))?;
        }
        _ => {
            io::stdin().read_to_string(&mut text).context("cannot read standard input")?;
        }
    }
    Ok(text)
}

fn load_label_file(path: &Path, series: &Series) -> anyhow::Result<LabelSet> {
    let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    ingest::load_labels(file, series).with_context(|| format!("bad label file {}", path.display()))
}

fn engine(cfg: ReReConfig) -> Result<ReRe, Failure> {
    ReRe::new(cfg).config()
}

fn detect(a: DetectArgs) -> Result<(), Failure> {
    let cfg = a.engine.config();
    let mut engine = engine(cfg.clone())?;
    let eval_cfg = a.scoring.config(false);

    let text = read_text(a.input.as_deref()).input()?;
    let format = a.format.resolve(&text);
    let parsed = ingest::parse_series(text.as_bytes(), format).context("cannot parse input").input()?;
    let series = parsed.series;
    for gap in series.gaps().iter().take(5) {
        eprintln!("warning: irregular spacing {} before point {}", gap.spacing, gap.index);
    }
    if series.gaps().len() > 5 {
        eprintln!("warning: {} irregular spacings in total", series.gaps().len());
    }
    let labels = match &a.labels {
        Some(p) => Some(load_label_file(p, &series).input()?),
        None => parsed.labels,
    };

    let out: Box<dyn Write> = match &a.output {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display())).input()?),
        None => Box::new(io::stdout().lock()),
    };
    let mut out = BufWriter::new(out);
    let dual = cfg.mode == rere::detector::DetectionMode::Dual;
    let mut records = Vec::with_capacity(series.len());
    for (t, ts, v) in series.replay() {
        let step = engine.step(t, v).input()?;
        let record = TraceRecord::from_step(&step, Some(*ts), dual);
        trace::write_record(&mut out, &record).input()?;
        records.push(record);
    }
    out.flush().context("cannot write trace").input()?;

    let anomalies = records.iter().filter(|r| r.is_detection()).count();
    eprintln!("points: {}  anomalies: {anomalies}", records.len());
    match eval::trace_stats(&records) {
        Ok(stats) => eprint!("{}", summary(&stats)),
        Err(_) => eprintln!("no point left probation, nothing to summarise"),
    }
    if let Some(labels) = labels {
        match eval::evaluate(&records, &labels, &eval_cfg) {
            Ok(m) => eprint!("{}", m.to_table()),
            Err(e) => eprintln!("warning: not scored: {e}"),
        }
    }
    Ok(())
}

fn summary(s: &TraceStats) -> String {
    let r = &s.retraining;
    let mut out = format!("retraining ratio 1: {:.2}%\n", 100.0 * r.detector1);
    if let Some(d2) = r.detector2 {
        out += &format!("retraining ratio 2: {:.2}%\n", 100.0 * d2);
    }
    out += &format!("retraining ratio: {:.2}%\n", 100.0 * r.combined);
    out += &format!(
        "step time: mean {:.6} s, std {:.6} s\n",
        s.mean_detection_secs, s.std_detection_secs
    );
    out
}

/// A series whose indices line up with the trace, so labels given as
/// timestamps resolve against the recorded points.
fn trace_series(records: &[TraceRecord]) -> Series {
    let values = records.iter().map(|r| r.value).collect();
    let timestamps: Option<Vec<Timestamp>> = records.iter().map(|r| r.timestamp).collect();
    match timestamps {
        Some(ts) => Series::with_timestamps(ts, values).expect("one timestamp per record"),
        None => Series::from_values(values),
    }
}

fn evaluate(a: EvaluateArgs) -> Result<(), Failure> {
    let eval_cfg: EvalConfig = a.scoring.config(a.allow_empty_labels);
    let file = File::open(&a.trace)
        .with_context(|| format!("cannot read {}", a.trace.display()))
        .input()?;
    let records = trace::read_trace(file)
        .with_context(|| format!("bad trace {}", a.trace.display()))
        .input()?;
    let labels = load_label_file(&a.labels, &trace_series(&records)).input()?;
    let metrics: Metrics = eval::evaluate(&records, &labels, &eval_cfg)
        .with_context(|| format!("cannot score against {}", a.labels.display()))
        .input()?;
    let json = serde_json::to_string_pretty(&metrics).input()?;
    println!("{json}");
    print!("{}", metrics.to_table());
    Ok(())
}

fn run_synth(a: SynthArgs) -> Result<(), Failure> {
    let base = Sine {
        offset: a.offset,
        amplitude: a.amplitude,
        period: a.period,
    };
    let at = || a.at.ok_or_else(|| anyhow!("--at is required for this kind"));
    let kind = match a.kind {
        SynthKindArg::Constant => SynthKind::Constant { value: a.value },
        SynthKindArg::Sine => SynthKind::Sine(base),
        SynthKindArg::LevelShift => SynthKind::LevelShift {
            from: a.from,
            to: a.to,
            at: at().config()?,
            ramp: a.ramp,
        },
        SynthKindArg::Spike => SynthKind::Spike {
            base,
            at: at().config()?,
            magnitude: a.magnitude,
        },
    };
    let spec = SynthSpec {
        kind,
        n: a.n,
        noise: a.noise,
        seed: a.seed,
    };
    let values = synth::generate(&spec, a.lookback).config()?;
    let mut out = BufWriter::new(io::stdout().lock());
    ingest::write_series(&mut out, &Series::from_values(values), ingest::DatasetFormat::Plain, None)
        .and_then(|()| out.flush())
        .input()?;
    Ok(())
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    let cfg = ReReConfig {
        measure_time: true,
        ..a.engine.config()
    };
    let mut engine = engine(cfg.clone())?;
    let dual = cfg.mode == rere::detector::DetectionMode::Dual;
    let started = std::time::Instant::now();
    let mut records = Vec::with_capacity(a.n);
    for v in synth::benchmark_stream(a.n, a.data_seed) {
        let step = engine.push(v).input()?;
        records.push(TraceRecord::from_step(&step, None, dual));
    }
    let total = started.elapsed().as_secs_f64();
    let stats = eval::trace_stats(&records)
        .context("stream too short for a verdict")
        .config()?;
    let anomalies = records.iter().filter(|r| r.is_detection()).count();
    let report = serde_json::json!({
        "points": records.len(),
        "anomalies": anomalies,
        "total_secs": total,
        "stats": stats,
    });
    println!("{}", serde_json::to_string_pretty(&report).input()?);
    Ok(())
}
