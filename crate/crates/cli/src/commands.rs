//! Command-line front end.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use svq_core::analysis::{sweep_csv, torus_run, SweepCell};
use svq_core::datagen::{interdigitate, stream_rng, to_csv};
use svq_core::gradcheck::{check_gradients, GradCheckConfig, DEFAULT_STEP, DEFAULT_TOLERANCE};
use svq_core::trainer::{LrSchedule, TrainConfig, DATA_STREAM};
use svq_core::SvqError;

use crate::artifacts::Artifacts;
use crate::bundled;
use crate::error::{CliError, CliResult, Invalid};
use crate::experiment::{execute, Mode, Report};
use crate::scene::{self, SCENE_STREAM};
use crate::spec::{parse_generator, Document, ExperimentSpec, Generator};

#[derive(Debug, Parser)]
#[command(name = "svq", version, about = "Train and analyse stochastic vector quantisers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment spec end to end: data, training, analyses.
    Run(RunArgs),
    /// Train the models of a spec without running its analyses.
    Train(SpecArgs),
    /// Run the analyses of a spec on models saved by `train` or `run`.
    Analyze(AnalyzeArgs),
    /// Write samples from a data generator as CSV (or an image as PGM).
    Datagen(DatagenArgs),
    /// Train torus models over a grid of (M, n) cells and report the
    /// fraction classified factorial in each.
    Sweep(SweepArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// List the bundled experiment specs.
    List,
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// Spec file path or bundled spec name (see `svq list`).
    #[arg(long)]
    pub spec: String,
    /// Override the spec's base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: the spec's output.dir, else runs/<name>].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Spec file path or bundled spec name.
    #[arg(value_name = "SPEC", required_unless_present = "spec", conflicts_with = "spec")]
    pub positional: Option<String>,
    /// Spec file path or bundled spec name.
    #[arg(long)]
    pub spec: Option<String>,
    /// Override the spec's base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: the spec's output.dir, else runs/<name>].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Run directory holding the trained models.
    #[arg(long)]
    pub model: PathBuf,
    /// Spec file path or bundled name [default: <model>/spec.txt].
    #[arg(long)]
    pub spec: Option<String>,
    /// Override the spec's base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: <model>_analysis].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DatagenArgs {
    /// Generator: circle, torus, multi_targets, correlated_pair, waveforms,
    /// ecg_synth, texture or interdigitated.
    #[arg(long, required_unless_present = "spec")]
    pub kind: Option<String>,
    /// Number of vectors (time steps for ecg_synth).
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file [default: standard output].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Take the generator from this spec instead of --kind/--set.
    #[arg(long, conflicts_with = "kind")]
    pub spec: Option<String>,
    /// Generator parameter, e.g. --set dim=32 (the `generator.` prefix is
    /// implied). Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// For texture and interdigitated: write the whole image as PGM instead
    /// of patch vectors.
    #[arg(long)]
    pub image: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated code counts.
    #[arg(long = "M", value_delimiter = ',', required = true)]
    pub m: Vec<usize>,
    /// Comma-separated sample counts.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Seeds per cell.
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    /// Base seed; cell seeds are seed, seed+1, ...
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ring radius of each normalisation context, or "global".
    #[arg(long, default_value = "2")]
    pub neighbourhood: String,
    #[arg(long, default_value_t = 20_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    /// Rate reached at the last step (linear decay).
    #[arg(long, default_value_t = 0.0)]
    pub final_rate: f64,
    /// Torus grid resolution used by the classifier.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Output CSV [default: standard output].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Number of random instances.
    #[arg(long, default_value_t = 24)]
    pub instances: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Central-difference step.
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// Output CSV [default: standard output].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Reads a spec from a file, or from the bundled set when no such file
/// exists.
pub fn load_spec(arg: &str) -> CliResult<(ExperimentSpec, String)> {
    let path = Path::new(arg);
    let (label, text) = if path.is_file() {
        (arg.to_string(), std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?)
    } else if let Some(text) = bundled::lookup(arg) {
        (format!("bundled:{arg}"), text.to_string())
    } else if arg.contains(['/', '\\', '.']) {
        return Err(CliError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "spec file not found"),
        ));
    } else {
        let names: Vec<&str> = bundled::names().collect();
        return Err(CliError::Usage(format!(
            "no spec file or bundled spec named `{arg}` (bundled: {})",
            names.join(", ")
        )));
    };
    Ok((ExperimentSpec::parse(&label, &text)?, text))
}

fn with_seed(mut spec: ExperimentSpec, seed: Option<u64>) -> ExperimentSpec {
    if let Some(s) = seed {
        spec.seed = s;
        spec.train.seed = s;
    }
    spec
}

fn default_out(spec: &ExperimentSpec) -> PathBuf {
    spec.output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(&spec.name))
}

fn print_report(dir: &Path, report: &Report) {
    println!("wrote {}", dir.display());
    for m in &report.metrics {
        println!("  seed {:>3}  {:<26} {}", m.seed, m.name, m.value);
    }
    if !report.labels.is_empty() {
        println!(
            "  majority label: {}",
            report.majority().map_or("none".to_string(), |c| c.to_string())
        );
    }
}

/// Runs a spec in `mode` and commits the artifact directory.
pub fn run_experiment(
    spec: &ExperimentSpec,
    text: &str,
    mode: Mode,
    models_from: Option<&Path>,
    target: &Path,
) -> CliResult<Report> {
    let mut out = Artifacts::create(target)?;
    out.write("spec.txt", text)?;
    let report = execute(spec, mode, models_from, &mut out)?;
    out.commit()?;
    Ok(report)
}

fn cmd_run(args: RunArgs) -> CliResult<i32> {
    let name = args.positional.or(args.spec).expect("clap requires a spec");
    let (spec, text) = load_spec(&name)?;
    let spec = with_seed(spec, args.seed);
    let target = args.out.unwrap_or_else(|| default_out(&spec));
    let report = run_experiment(&spec, &text, Mode::Full, None, &target)?;
    print_report(&target, &report);
    Ok(0)
}

fn cmd_train(args: SpecArgs) -> CliResult<i32> {
    let (spec, text) = load_spec(&args.spec)?;
    let spec = with_seed(spec, args.seed);
    let target = args.out.unwrap_or_else(|| default_out(&spec));
    let report = run_experiment(&spec, &text, Mode::TrainOnly, None, &target)?;
    print_report(&target, &report);
    Ok(0)
}

fn cmd_analyze(args: AnalyzeArgs) -> CliResult<i32> {
    let spec_arg = args
        .spec
        .unwrap_or_else(|| args.model.join("spec.txt").display().to_string());
    let (spec, text) = load_spec(&spec_arg)?;
    let spec = with_seed(spec, args.seed);
    if spec.analyses.is_empty() {
        return Err(CliError::Usage(format!("{spec_arg}: the spec lists no analyses")));
    }
    let target = args.out.unwrap_or_else(|| {
        let mut name = args.model.file_name().unwrap_or_default().to_os_string();
        name.push("_analysis");
        args.model.with_file_name(name)
    });
    let report = run_experiment(&spec, &text, Mode::AnalyzeOnly, Some(&args.model), &target)?;
    print_report(&target, &report);
    Ok(0)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn datagen_generator(args: &DatagenArgs) -> CliResult<Generator> {
    if let Some(s) = &args.spec {
        return Ok(load_spec(s)?.0.generator);
    }
    let kind = args.kind.clone().expect("clap requires --kind");
    let mut pairs = vec![("generator.kind".to_string(), kind)];
    for s in &args.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{s}`")))?;
        let k = k.trim();
        let key = if k.starts_with("generator.") { k.to_string() } else { format!("generator.{k}") };
        pairs.push((key, v.trim().to_string()));
    }
    if !pairs.iter().any(|(k, _)| k == "generator.length") && args.kind.as_deref() == Some("ecg_synth") {
        pairs.push(("generator.length".into(), args.count.to_string()));
    }
    let doc = Document::from_pairs("datagen", pairs.iter().map(|(k, v)| (k.as_str(), v.clone())))
        .map_err(flag_error)?;
    let generator = parse_generator(&doc).map_err(flag_error)?;
    if let Some((key, _)) = doc.unused().into_iter().next() {
        return Err(CliError::Usage(format!(
            "--set {}: does not apply to generator {}",
            key.trim_start_matches("generator."),
            generator.kind()
        )));
    }
    Ok(generator)
}

/// Flag-derived documents have no meaningful line numbers.
fn flag_error(e: Invalid) -> CliError {
    CliError::Usage(format!("datagen: {}", e.msg))
}

fn cmd_datagen(args: DatagenArgs) -> CliResult<i32> {
    let generator = datagen_generator(&args)?;
    let out = args.out.as_deref();
    if args.image {
        let Some(p) = generator.image() else {
            return Err(CliError::Usage(format!("--image needs an image generator, not {}", generator.kind())));
        };
        let mut rng = stream_rng(args.seed, SCENE_STREAM);
        let img = match generator {
            Generator::Texture(_) => scene::training_texture(p, &mut rng)?.rescaled(),
            _ => {
                let (a, b) = scene::texture_pair(p, &mut rng)?;
                interdigitate(&a, &b)?
            }
        };
        emit(out, &img.to_pgm())?;
        return Ok(0);
    }
    let built = scene::build(&generator, args.seed)?;
    let rows = match &built.ecg {
        Some(ecg) => ecg.inputs.iter().take(args.count).cloned().collect(),
        None => built.source.batch(args.count, &mut stream_rng(args.seed, DATA_STREAM)),
    };
    let header: Vec<String> = (1..=generator.dim()).map(|k| format!("x{k}")).collect();
    emit(out, to_csv(Some(&header), &rows).as_bytes())?;
    Ok(0)
}

/// Worker count: SVQ_THREADS when set, else the available parallelism.
pub fn thread_cap() -> usize {
    std::env::var("SVQ_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn sweep(args: &SweepArgs) -> CliResult<Vec<SweepCell>> {
    let neighbourhood = match args.neighbourhood.as_str() {
        "global" => None,
        r => Some(r.parse::<usize>().map_err(|_| {
            CliError::Usage(format!("--neighbourhood expects an integer or `global`, got `{r}`"))
        })?),
    };
    let config = TrainConfig {
        steps: args.steps,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        schedule: LrSchedule::Linear {
            final_rate: args.final_rate,
        },
        seed: args.seed,
        ..TrainConfig::default()
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let jobs: Vec<(usize, usize, u64)> = args
        .m
        .iter()
        .flat_map(|&m| args.n.iter().map(move |&n| (m, n)))
        .flat_map(|(m, n)| (0..args.seeds as u64).map(move |s| (m, n, args.seed + s)))
        .collect();
    let results: Mutex<Vec<Option<CliResult<Option<svq_core::analysis::EncodingClass>>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..thread_cap().min(jobs.len()).max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(m, n, seed)) = jobs.get(i) else { break };
                let cfg = TrainConfig { seed, ..config.clone() };
                let r = match torus_run(m, n, neighbourhood, &cfg, args.grid) {
                    Ok((_, l)) => Ok(Some(l.label)),
                    Err(SvqError::Diverged { .. }) | Err(SvqError::DegenerateResponse { .. }) => Ok(None),
                    Err(e) => Err(CliError::from(e)),
                };
                results.lock().expect("results lock")[i] = Some(r);
            });
        }
    });
    let results = results.into_inner().expect("results lock");
    let mut cells: Vec<SweepCell> = Vec::new();
    for (&(m, n, _), r) in jobs.iter().zip(results) {
        let label = r.expect("every job ran")?;
        match cells.last_mut() {
            Some(c) if c.num_codes == m && c.n == n => c.labels.push(label),
            _ => cells.push(SweepCell {
                num_codes: m,
                n,
                labels: vec![label],
            }),
        }
    }
    Ok(cells)
}

fn cmd_sweep(args: SweepArgs) -> CliResult<i32> {
    let cells = sweep(&args)?;
    emit(args.out.as_deref(), sweep_csv(&cells).as_bytes())?;
    Ok(0)
}

fn cmd_gradcheck(args: GradcheckArgs) -> CliResult<i32> {
    let report = check_gradients(&GradCheckConfig {
        instances: args.instances,
        seed: args.seed,
        step: args.step,
        tolerance: args.tolerance,
        single: None,
    })?;
    emit(args.out.as_deref(), report.to_csv().as_bytes())?;
    Ok(if report.all_pass() { 0 } else { 1 })
}

pub fn dispatch(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Train(a) => cmd_train(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Datagen(a) => cmd_datagen(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::List => {
            for (name, text) in bundled::BUNDLED {
                let about = text.lines().next().unwrap_or("").trim_start_matches('#').trim();
                println!("{name:<24} {about}");
            }
            Ok(0)
        }
    }
}
