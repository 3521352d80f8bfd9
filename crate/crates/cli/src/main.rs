//! `mflscan`: generate synthetic records, detect flaws, evaluate and inspect.
//!
//! Exit codes: 0 success, 2 usage error, 3 input parse error, 4 internal failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfl_core::evaluate::{format_table, match_detections, run_ablation, Counts, EvalReport, LabeledRecord};
use mfl_core::formats::{
    display_scaled, method_label, read_record, to_json, write_binary, write_pgm, DetectionsFile, EvalFile,
    InspectReport, TruthFile, SCHEMA_VERSION,
};
use mfl_core::ingest::preprocess;
use mfl_core::pipeline::SegmentStages;
use mfl_core::synth::{generate, scenario_spec, SynthSpec, SCENARIOS};
use mfl_core::{Method, MflError, Pipeline, RunConfig};

#[derive(Parser)]
#[command(name = "mflscan", version, about = "Flaw localization in wire-rope MFL records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic record (`<out>.mfl`) and its ground truth (`<out>.truth.json`).
    Generate {
        /// Preset name (low_ssr, optimal_ssr, high_ssr) or path to a JSON spec.
        spec: String,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the pipeline on a record and write detections JSON.
    Detect {
        record: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score detections against ground truth, or run the three-method ablation.
    Evaluate(EvaluateArgs),
    /// Report the SSR-derived quantities of a record.
    Inspect {
        record: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["single", "unweighted", "adaptive"])]
    method: Option<String>,
    #[arg(long, value_parser = ["recursive", "flat"])]
    fusion_mode: Option<String>,
    /// Directory for per-segment PGM dumps of every stage.
    #[arg(long)]
    dump_stages: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Detection JSON files written by `detect`.
    #[arg(long, num_args = 1..)]
    detections: Vec<PathBuf>,
    /// Ground-truth JSON files, paired with detections or records by record name.
    #[arg(long, num_args = 1..)]
    truths: Vec<PathBuf>,
    /// Records to run all three methods on.
    #[arg(long, num_args = 1.., requires = "truths")]
    records: Vec<PathBuf>,
    /// Run single-scale, unweighted and adaptive on `--records`.
    #[arg(long, requires = "records")]
    ablation: bool,
    /// Score raw counts `tp,fp,fn` without any files.
    #[arg(long, value_name = "TP,FP,FN", conflicts_with_all = ["detections", "records"])]
    counts: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report JSON destination; the table always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Input(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Input(_) => 3,
            Failure::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Input(m) | Failure::Internal(m) => m,
        }
    }
}

type Outcome<T> = Result<T, Failure>;

/// Tags a library error with the exit class that fits where it happened.
trait Classify<T> {
    fn usage(self) -> Outcome<T>;
    fn input(self, what: &Path) -> Outcome<T>;
    fn internal(self) -> Outcome<T>;
}

impl<T> Classify<T> for Result<T, MflError> {
    fn usage(self) -> Outcome<T> {
        self.map_err(|e| Failure::Usage(e.to_string()))
    }

    fn input(self, what: &Path) -> Outcome<T> {
        self.map_err(|e| Failure::Input(format!("{}: {e}", what.display())))
    }

    fn internal(self) -> Outcome<T> {
        self.map_err(|e| Failure::Internal(e.to_string()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { spec, out, seed } => cmd_generate(&spec, &out, seed),
        Command::Detect { record, run } => cmd_detect(&record, &run),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Inspect { record, run } => cmd_inspect(&record, &run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mflscan: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn write_output(path: &Path, text: &str) -> Outcome<()> {
    fs::write(path, text).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Outcome<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
            RunConfig::parse(&text).input(p)
        }
    }
}

/// Config file first, then command-line flags on top.
fn run_config(run: &RunArgs) -> Outcome<RunConfig> {
    let mut cfg = load_config(run.config.as_deref())?;
    let overrides = [
        ("method", run.method.clone()),
        ("fusion_mode", run.fusion_mode.clone()),
        ("seed", run.seed.map(|s| s.to_string())),
        ("dump_stages", run.dump_stages.as_ref().map(|p| p.display().to_string())),
        ("out", run.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v).usage()?;
        }
    }
    cfg.validate().usage()?;
    Ok(cfg)
}

fn cmd_generate(spec: &str, out: &Path, seed: Option<u64>) -> Outcome<()> {
    let spec = if SCENARIOS.contains(&spec) {
        scenario_spec(spec, seed.unwrap_or(0)).expect("known scenario")
    } else {
        let path = Path::new(spec);
        let text = fs::read_to_string(path).map_err(|e| {
            Failure::Input(format!("{spec}: not a preset ({}) and not readable: {e}", SCENARIOS.join(", ")))
        })?;
        let mut parsed: SynthSpec = serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{spec}: {e}")))?;
        if let Some(s) = seed {
            parsed.rng_seed = s;
        }
        parsed
    };
    let (mut record, flaws) = generate(&spec).map_err(|e| Failure::Input(e.to_string()))?;
    let name = out.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    record.label = name.clone();
    let record_path = with_suffix(out, ".mfl");
    write_binary(&record_path, &record).internal()?;
    write_output(&with_suffix(out, ".truth.json"), &to_json(&TruthFile::new(name, flaws)).internal()?)?;
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_detect(record_path: &Path, run: &RunArgs) -> Outcome<()> {
    let cfg = run_config(run)?;
    let record = read_record(record_path).input(record_path)?;
    let pipeline = Pipeline::new(cfg.pipeline.clone());
    let (found, stages) = if cfg.dump_stages.is_some() {
        pipeline.detect_with_stages(&record, cfg.method).input(record_path)?
    } else {
        (pipeline.detect(&record, cfg.method).input(record_path)?, Vec::new())
    };
    if let Some(dir) = &cfg.dump_stages {
        dump_stages(dir, &stages)?;
    }
    let json = to_json(&DetectionsFile::from(&found)).internal()?;
    match &cfg.out {
        Some(p) => write_output(p, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn dump_stages(dir: &Path, stages: &[SegmentStages<f64>]) -> Outcome<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::Internal(format!("{}: {e}", dir.display())))?;
    for s in stages {
        let i = s.segment_index;
        for (j, layer) in s.layers.iter().enumerate() {
            let level = j + 1;
            write_pgm(&dir.join(format!("seg{i}_L{level}_raw.pgm")), layer).internal()?;
            write_pgm(&dir.join(format!("seg{i}_L{level}_resp.pgm")), &display_scaled(&s.responses[j])).internal()?;
            write_pgm(&dir.join(format!("seg{i}_L{level}_env.pgm")), &display_scaled(&s.envelopes[j])).internal()?;
        }
        write_pgm(&dir.join(format!("seg{i}_fused.pgm")), &display_scaled(&s.fused.pixels)).internal()?;
    }
    Ok(())
}

fn cmd_inspect(record_path: &Path, run: &RunArgs) -> Outcome<()> {
    let cfg = run_config(run)?;
    let record = read_record(record_path).input(record_path)?;
    let pipeline = Pipeline::new(cfg.pipeline.clone());
    let ssr = pipeline.context(&record).input(record_path)?;
    let segments = preprocess(&record, &cfg.pipeline.preprocess).input(record_path)?.len();
    if let Some(dir) = &cfg.dump_stages {
        let (_, stages) = pipeline.detect_with_stages(&record, cfg.method).input(record_path)?;
        dump_stages(dir, &stages)?;
    }
    let report = InspectReport {
        schema_version: SCHEMA_VERSION,
        record: record.label.clone(),
        samples: record.sample_count(),
        channels: record.channel_count(),
        segments,
        ssr,
    };
    let json = to_json(&report).internal()?;
    match &cfg.out {
        Some(p) => write_output(p, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Outcome<T> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn truths_by_record(paths: &[PathBuf]) -> Outcome<BTreeMap<String, TruthFile>> {
    let mut out = BTreeMap::new();
    for p in paths {
        let t: TruthFile = read_json(p)?;
        if t.schema_version != SCHEMA_VERSION {
            return Err(Failure::Input(format!("{}: unsupported schema_version {}", p.display(), t.schema_version)));
        }
        if out.insert(t.record.clone(), t).is_some() {
            return Err(Failure::Input(format!("{}: duplicate truth for one record", p.display())));
        }
    }
    Ok(out)
}

fn parse_counts(text: &str) -> Outcome<Counts> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("--counts expects three integers `tp,fp,fn`, got `{text}`")))?;
    match parts[..] {
        [tp, fp, fn_] => Ok(Counts::new(tp, fp, fn_)),
        _ => Err(Failure::Usage(format!("--counts expects three integers `tp,fp,fn`, got `{text}`"))),
    }
}

fn cmd_evaluate(args: &EvaluateArgs) -> Outcome<()> {
    let reports = if let Some(text) = &args.counts {
        let counts = parse_counts(text)?;
        vec![EvalReport::from_counts(Method::Adaptive, BTreeMap::from([("counts".to_string(), counts)]))]
    } else if args.ablation {
        ablation_reports(args)?
    } else if !args.detections.is_empty() {
        detection_reports(args)?
    } else {
        return Err(Failure::Usage(
            "give --counts, --detections with --truths, or --ablation with --records and --truths".into(),
        ));
    };
    for r in &reports {
        let mut columns: Vec<(String, Counts)> =
            r.per_scenario.iter().map(|(name, s)| (name.clone(), s.counts)).collect();
        if columns.len() > 1 {
            columns.push(("total".to_string(), r.total.counts));
        }
        println!("{}", format_table(method_label(r.method), &columns));
    }
    if let Some(p) = &args.out {
        let file = EvalFile {
            schema_version: SCHEMA_VERSION,
            reports,
        };
        write_output(p, &to_json(&file).internal()?)?;
    }
    Ok(())
}

fn detection_reports(args: &EvaluateArgs) -> Outcome<Vec<EvalReport>> {
    let mut truths = truths_by_record(&args.truths)?;
    let mut per_method: BTreeMap<Method, BTreeMap<String, Counts>> = BTreeMap::new();
    for p in &args.detections {
        let d: DetectionsFile = read_json(p)?;
        let method: Method = d.method.parse().map_err(|e: MflError| Failure::Input(format!("{}: {e}", p.display())))?;
        let truth = truths.get(&d.record).ok_or_else(|| {
            Failure::Input(format!("{}: no ground truth for record `{}`", p.display(), d.record))
        })?;
        let counts = match_detections(&d.detections, &truth.flaws, d.f_spatial, d.kernel_size);
        *per_method.entry(method).or_default().entry(d.record.clone()).or_default() += counts;
    }
    let used: Vec<String> = per_method.values().flat_map(|m| m.keys().cloned()).collect();
    truths.retain(|k, _| !used.contains(k));
    if let Some(unpaired) = truths.keys().next() {
        return Err(Failure::Input(format!("ground truth for `{unpaired}` has no detections file")));
    }
    Ok(per_method
        .into_iter()
        .map(|(m, counts)| EvalReport::from_counts(m, counts))
        .collect())
}

fn ablation_reports(args: &EvaluateArgs) -> Outcome<Vec<EvalReport>> {
    let cfg = load_config(args.config.as_deref())?;
    let mut truths = truths_by_record(&args.truths)?;
    let mut dataset = Vec::new();
    for p in &args.records {
        let record = read_record(p).input(p)?;
        let truth = truths.remove(&record.label).ok_or_else(|| {
            Failure::Input(format!("{}: no ground truth for record `{}`", p.display(), record.label))
        })?;
        dataset.push(LabeledRecord {
            scenario: record.label.clone(),
            record,
            truths: truth.flaws,
        });
    }
    if let Some(unpaired) = truths.keys().next() {
        return Err(Failure::Input(format!("ground truth for `{unpaired}` has no record")));
    }
    let pipeline = Pipeline::new(cfg.pipeline);
    Method::ALL
        .iter()
        .map(|&m| run_ablation(&pipeline, &dataset, m).internal())
        .collect()
}
