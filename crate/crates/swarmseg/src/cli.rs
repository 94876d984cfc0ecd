//! Command-line surface. Every subcommand reads flags, an optional
//! `key = value` config file (flags win), runs the corresponding library
//! call, and writes artifacts. Failures exit nonzero with one
//! machine-parsable line on stderr: `error: kind=<tag> msg="..."`.

use crate::data::{generate_synthetic, load_dataset, save_dataset, split_labeled, Dataset, SyntheticConfig};
use crate::error::{Error, Result};
use crate::models::{load_checkpoint, save_checkpoint};
use crate::pso::{sphere_case, PsoConfig};
use crate::tensor::Real;
use crate::train::{
    ablation, ablation_csv, evaluate, history_csv, initial_state, pso_tune,
    segmenter_from_checkpoint, state_checkpoint, state_from_checkpoint, train_from, TrainConfig,
    TuneConfig,
};
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "swarmseg",
    version,
    about = "Semi-supervised adversarial segmentation with swarm-tuned loss weights"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic curvilinear dataset as a manifest directory.
    GenData(GenDataArgs),
    /// Train the segmenter/discriminator pair.
    Train(TrainArgs),
    /// Search the self-training loss weights with the particle swarm.
    Tune(TuneArgs),
    /// Score a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Train baseline, +adv, and +adv+semi per label fraction.
    Ablate(AblateArgs),
    /// Calibrate the swarm optimizer on the shifted-sphere problem.
    BenchPso(BenchPsoArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Directory that will receive images, masks, and manifest.tsv.
    #[arg(long)]
    out: PathBuf,
    /// Optional `key = value` defaults file; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of image/mask pairs.
    #[arg(long)]
    count: Option<usize>,
    /// Square image edge in pixels.
    #[arg(long)]
    size: Option<usize>,
    /// Additive Gaussian pixel noise.
    #[arg(long)]
    noise_std: Option<f64>,
    /// Root of the generator's random streams.
    #[arg(long)]
    seed: Option<u64>,
    /// If set, mark this fraction of items labeled and the rest unlabeled.
    #[arg(long)]
    label_fraction: Option<f64>,
}

/// Training-run flags shared by train, tune, and ablate. Anything not
/// given falls back to the config file, then to the toy defaults.
#[derive(Args, Default)]
struct TrainFlags {
    /// Segmenter update steps.
    #[arg(long)]
    iterations: Option<u64>,
    /// Images per labeled and per unlabeled batch.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Segmenter Adam learning rate.
    #[arg(long)]
    lr_seg: Option<f64>,
    /// Discriminator Adam learning rate.
    #[arg(long)]
    lr_disc: Option<f64>,
    /// Adam first-moment decay for both optimizers.
    #[arg(long)]
    beta1: Option<f64>,
    /// Adam second-moment decay for both optimizers.
    #[arg(long)]
    beta2: Option<f64>,
    /// Weight of the adversarial term on labeled images.
    #[arg(long)]
    lambda_adv: Option<f64>,
    /// Weight of the adversarial term on unlabeled images.
    #[arg(long)]
    lambda_semi_adv: Option<f64>,
    /// Weight of the confidence-masked self-training term.
    #[arg(long)]
    lambda_semi_bce: Option<f64>,
    /// Confidence threshold for the self-training mask.
    #[arg(long)]
    t_semi_mask: Option<f64>,
    /// Iterations before the self-training term activates.
    #[arg(long)]
    warmup_iters: Option<u64>,
    /// Also hold the unlabeled adversarial term during warmup.
    #[arg(long)]
    gate_semi_adv_in_warmup: Option<bool>,
    /// Re-split the manifest, keeping this fraction labeled.
    #[arg(long)]
    label_fraction: Option<f64>,
    /// Square crop edge sampled from each training image.
    #[arg(long)]
    crop_size: Option<usize>,
    /// Score eval-data every this many iterations.
    #[arg(long)]
    eval_every: Option<u64>,
    /// Root of every random stream in the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Segmenter channels at full resolution; doubles per level.
    #[arg(long)]
    seg_base: Option<usize>,
    /// Segmenter downsampling levels.
    #[arg(long)]
    seg_depth: Option<usize>,
    /// Discriminator channels after the first convolution.
    #[arg(long)]
    disc_base: Option<usize>,
    /// Discriminator convolution count.
    #[arg(long)]
    disc_layers: Option<usize>,
    /// Working precision: f32 or f64.
    #[arg(long)]
    precision: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    /// Training manifest (gen-data output).
    #[arg(long)]
    data: PathBuf,
    /// Output directory for model.ckpt and history.csv.
    #[arg(long)]
    out: PathBuf,
    /// Held-out manifest scored every eval_every iterations.
    #[arg(long)]
    eval_data: Option<PathBuf>,
    /// Optional `key = value` defaults file; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Continue from a checkpoint written with these training dynamics;
    /// only the iteration count and eval cadence may differ.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct TuneArgs {
    /// Training manifest; fitness runs draw from it.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for pso_trace.csv.
    #[arg(long)]
    out: PathBuf,
    /// Optional `key = value` defaults file; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Swarm generations after the initial evaluation.
    #[arg(long)]
    generations: Option<u32>,
    /// Particles per generation.
    #[arg(long)]
    swarm_size: Option<u32>,
    /// Length of each fitness training run.
    #[arg(long)]
    fitness_iters: Option<u64>,
    /// Images held out of fitness runs for scoring.
    #[arg(long)]
    holdout: Option<usize>,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint written by train.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Manifest to score, pooled over every pixel.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    /// Fully labeled training manifest; each fraction applies its own split.
    #[arg(long)]
    data: PathBuf,
    /// Held-out manifest every variant is scored on.
    #[arg(long)]
    eval_data: PathBuf,
    /// Output directory for ablation.csv.
    #[arg(long)]
    out: PathBuf,
    /// Optional `key = value` defaults file; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated label fractions, e.g. 0.1,0.5.
    #[arg(long, default_value = "0.1,0.5")]
    fractions: String,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct BenchPsoArgs {
    /// Number of independent seeds to run.
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    /// Write the first seed's generation trace here.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

/// Parses `key = value` lines; `#` starts a comment, blank lines skipped.
fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!(
                "{}:{}: expected `key = value`, got `{line}`",
                path.display(),
                i + 1
            ))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_from<T: FromStr>(map: &BTreeMap<String, String>, key: &str, target: &mut T) -> Result<()>
where
    T::Err: Display,
{
    if let Some(v) = map.get(key) {
        *target = v
            .parse()
            .map_err(|e| Error::InvalidArgument(format!("bad value for {key}: {e}")))?;
    }
    Ok(())
}

fn put<T: Display>(map: &mut BTreeMap<String, String>, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        map.insert(key.to_string(), v.to_string());
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Precision {
    F32,
    F64,
}

const TRAIN_KEYS: [&str; 21] = [
    "iterations",
    "batch_size",
    "lr_seg",
    "lr_disc",
    "beta1",
    "beta2",
    "lambda_adv",
    "lambda_semi_adv",
    "lambda_semi_bce",
    "t_semi_mask",
    "warmup_iters",
    "gate_semi_adv_in_warmup",
    "label_fraction",
    "crop_size",
    "eval_every",
    "seed",
    "seg_base",
    "seg_depth",
    "disc_base",
    "disc_layers",
    "precision",
];

impl TrainFlags {
    fn overlay(&self, map: &mut BTreeMap<String, String>) {
        put(map, "iterations", &self.iterations);
        put(map, "batch_size", &self.batch_size);
        put(map, "lr_seg", &self.lr_seg);
        put(map, "lr_disc", &self.lr_disc);
        put(map, "beta1", &self.beta1);
        put(map, "beta2", &self.beta2);
        put(map, "lambda_adv", &self.lambda_adv);
        put(map, "lambda_semi_adv", &self.lambda_semi_adv);
        put(map, "lambda_semi_bce", &self.lambda_semi_bce);
        put(map, "t_semi_mask", &self.t_semi_mask);
        put(map, "warmup_iters", &self.warmup_iters);
        put(map, "gate_semi_adv_in_warmup", &self.gate_semi_adv_in_warmup);
        put(map, "label_fraction", &self.label_fraction);
        put(map, "crop_size", &self.crop_size);
        put(map, "eval_every", &self.eval_every);
        put(map, "seed", &self.seed);
        put(map, "seg_base", &self.seg_base);
        put(map, "seg_depth", &self.seg_depth);
        put(map, "disc_base", &self.disc_base);
        put(map, "disc_layers", &self.disc_layers);
        put(map, "precision", &self.precision);
    }
}

/// Merges config file and flags onto the toy defaults. Warm-up tracks a
/// quarter of the iteration count unless set explicitly.
fn resolve_train_config(
    config_file: Option<&Path>,
    flags: &TrainFlags,
    allowed_extra: &[&str],
) -> Result<(TrainConfig, Precision, BTreeMap<String, String>)> {
    let mut kv = match config_file {
        Some(p) => parse_config_file(p)?,
        None => BTreeMap::new(),
    };
    for key in kv.keys() {
        if !TRAIN_KEYS.contains(&key.as_str()) && !allowed_extra.contains(&key.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "unknown config key `{key}`"
            )));
        }
    }
    flags.overlay(&mut kv);

    let mut c = TrainConfig::toy(42);
    parse_from(&kv, "seed", &mut c.seed)?;
    parse_from(&kv, "iterations", &mut c.iterations)?;
    parse_from(&kv, "batch_size", &mut c.batch_size)?;
    parse_from(&kv, "lr_seg", &mut c.lr_seg)?;
    parse_from(&kv, "lr_disc", &mut c.lr_disc)?;
    parse_from(&kv, "beta1", &mut c.beta1)?;
    parse_from(&kv, "beta2", &mut c.beta2)?;
    parse_from(&kv, "lambda_adv", &mut c.weights.lambda_adv)?;
    parse_from(&kv, "lambda_semi_adv", &mut c.weights.lambda_semi_adv)?;
    parse_from(&kv, "lambda_semi_bce", &mut c.weights.lambda_semi_bce)?;
    parse_from(&kv, "t_semi_mask", &mut c.weights.t_semi_mask)?;
    c.weights.warmup_iters = c.iterations / 4;
    parse_from(&kv, "warmup_iters", &mut c.weights.warmup_iters)?;
    parse_from(&kv, "gate_semi_adv_in_warmup", &mut c.gate_semi_adv_in_warmup)?;
    parse_from(&kv, "label_fraction", &mut c.label_fraction)?;
    parse_from(&kv, "crop_size", &mut c.crop_size)?;
    parse_from(&kv, "eval_every", &mut c.eval_every)?;
    parse_from(&kv, "seg_base", &mut c.segmenter.base_channels)?;
    parse_from(&kv, "seg_depth", &mut c.segmenter.depth)?;
    parse_from(&kv, "disc_base", &mut c.discriminator.base_channels)?;
    parse_from(&kv, "disc_layers", &mut c.discriminator.layers)?;

    let mut precision_name = "f32".to_string();
    parse_from(&kv, "precision", &mut precision_name)?;
    let precision = match precision_name.as_str() {
        "f32" => Precision::F32,
        "f64" => Precision::F64,
        other => {
            return Err(Error::InvalidArgument(format!(
                "precision must be f32 or f64, got {other}"
            )))
        }
    };
    c.validate()?;
    Ok((c, precision, kv))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Loads a manifest; a fully labeled set is split by the configured label
/// fraction (a pre-split manifest is used as-is).
fn load_training_data<T: Real>(manifest: &Path, c: &TrainConfig) -> Result<Dataset<T>> {
    let data = load_dataset::<T>(manifest)?;
    if data.unlabeled_indices.is_empty() && c.label_fraction < 1.0 && data.items.len() > 1 {
        split_labeled(data, c.label_fraction, c.seed)
    } else {
        Ok(data)
    }
}

fn report_line(report: &crate::metrics::MetricReport) -> String {
    format!(
        "roc_auc={} pr_auc={} score={}",
        report.roc_auc, report.pr_auc, report.score
    )
}

fn cmd_gen_data(args: &GenDataArgs) -> Result<()> {
    let mut kv = match &args.config {
        Some(p) => parse_config_file(p)?,
        None => BTreeMap::new(),
    };
    for key in kv.keys() {
        if !["count", "size", "noise_std", "seed", "label_fraction"].contains(&key.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "unknown config key `{key}`"
            )));
        }
    }
    put(&mut kv, "count", &args.count);
    put(&mut kv, "size", &args.size);
    put(&mut kv, "noise_std", &args.noise_std);
    put(&mut kv, "seed", &args.seed);
    put(&mut kv, "label_fraction", &args.label_fraction);

    let mut sc = SyntheticConfig::default();
    parse_from(&kv, "count", &mut sc.image_count)?;
    parse_from(&kv, "size", &mut sc.image_size)?;
    parse_from(&kv, "noise_std", &mut sc.noise_std)?;
    parse_from(&kv, "seed", &mut sc.seed)?;

    let mut data = generate_synthetic::<f32>(&sc)?;
    if kv.contains_key("label_fraction") {
        let mut fraction = 1.0f64;
        parse_from(&kv, "label_fraction", &mut fraction)?;
        data = split_labeled(data, fraction, sc.seed)?;
    }
    ensure_dir(&args.out)?;
    let manifest = save_dataset(&args.out, &data)?;
    println!(
        "wrote {} images ({} labeled) to {}",
        data.items.len(),
        data.labeled_indices.len(),
        manifest.display()
    );
    Ok(())
}

fn run_train<T: Real>(args: &TrainArgs, c: &TrainConfig) -> Result<()> {
    let data = load_training_data::<T>(&args.data, c)?;
    let eval_data = match &args.eval_data {
        Some(p) => Some(load_dataset::<T>(p)?),
        None => None,
    };
    let state = match &args.resume {
        Some(p) => state_from_checkpoint(c, load_checkpoint::<T>(p)?)?,
        None => initial_state::<T>(c)?,
    };
    let out = train_from(c, &data, eval_data.as_ref(), state)?;

    ensure_dir(&args.out)?;
    let history_path = args.out.join("history.csv");
    write_file(&history_path, &history_csv(&out.history))?;
    let ckpt_path = args.out.join("model.ckpt");
    save_checkpoint(&ckpt_path, &state_checkpoint(c, &out.state))?;
    for (iteration, report) in &out.evals {
        println!("iteration={} {}", iteration, report_line(report));
    }
    println!("checkpoint={}", ckpt_path.display());
    println!("history={}", history_path.display());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let (c, precision, _) = resolve_train_config(args.config.as_deref(), &args.flags, &[])?;
    match precision {
        Precision::F32 => run_train::<f32>(args, &c),
        Precision::F64 => run_train::<f64>(args, &c),
    }
}

fn run_tune<T: Real>(args: &TuneArgs, tc: &TuneConfig) -> Result<()> {
    let data = load_training_data::<T>(&args.data, &tc.base)?;
    let outcome = pso_tune::<T>(tc, &data)?;
    ensure_dir(&args.out)?;
    let trace_path = args.out.join("pso_trace.csv");
    write_file(&trace_path, &outcome.run.trace.to_csv())?;
    println!(
        "best lambda_semi_adv={} lambda_semi_bce={} t_semi_mask={} fitness={}",
        outcome.best_weights.lambda_semi_adv,
        outcome.best_weights.lambda_semi_bce,
        outcome.best_weights.t_semi_mask,
        outcome.run.best_fitness
    );
    println!("trace={}", trace_path.display());
    Ok(())
}

fn cmd_tune(args: &TuneArgs) -> Result<()> {
    let extra = ["generations", "swarm_size", "fitness_iters", "holdout"];
    let (base, precision, kv) =
        resolve_train_config(args.config.as_deref(), &args.flags, &extra)?;
    let mut tc = TuneConfig::new(base);
    tc.pso = PsoConfig::loss_weight_search(base.seed);
    parse_from(&kv, "generations", &mut tc.pso.generations)?;
    parse_from(&kv, "swarm_size", &mut tc.pso.swarm_size)?;
    parse_from(&kv, "fitness_iters", &mut tc.fitness_iterations)?;
    parse_from(&kv, "holdout", &mut tc.holdout)?;
    if let Some(v) = args.generations {
        tc.pso.generations = v;
    }
    if let Some(v) = args.swarm_size {
        tc.pso.swarm_size = v;
    }
    if let Some(v) = args.fitness_iters {
        tc.fitness_iterations = v;
    }
    if let Some(v) = args.holdout {
        tc.holdout = v;
    }
    match precision {
        Precision::F32 => run_tune::<f32>(args, &tc),
        Precision::F64 => run_tune::<f64>(args, &tc),
    }
}

fn run_eval<T: Real>(args: &EvalArgs) -> Result<()> {
    let ckpt = load_checkpoint::<T>(&args.checkpoint)?;
    let seg = segmenter_from_checkpoint(ckpt)?;
    let data = load_dataset::<T>(&args.data)?;
    let report = evaluate(&seg, &data)?;
    println!("{}", report_line(&report));
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    // The stored scalar width decides the precision.
    match load_checkpoint::<f32>(&args.checkpoint) {
        Ok(_) => run_eval::<f32>(args),
        Err(Error::Checkpoint { detail, .. }) if detail.contains("scalar width") => {
            run_eval::<f64>(args)
        }
        Err(e) => Err(e),
    }
}

fn parse_fractions(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("bad fraction `{p}`: {e}")))
        })
        .collect()
}

fn run_ablate<T: Real>(args: &AblateArgs, c: &TrainConfig, fractions: &[f64]) -> Result<()> {
    let data = load_dataset::<T>(&args.data)?;
    let eval_data = load_dataset::<T>(&args.eval_data)?;
    let rows = ablation::<T>(c, &data, &eval_data, fractions)?;
    ensure_dir(&args.out)?;
    let csv_path = args.out.join("ablation.csv");
    let csv = ablation_csv(&rows);
    write_file(&csv_path, &csv)?;
    print!("{csv}");
    println!("table={}", csv_path.display());
    Ok(())
}

fn cmd_ablate(args: &AblateArgs) -> Result<()> {
    let (c, precision, _) = resolve_train_config(args.config.as_deref(), &args.flags, &[])?;
    let fractions = parse_fractions(&args.fractions)?;
    match precision {
        Precision::F32 => run_ablate::<f32>(args, &c, &fractions),
        Precision::F64 => run_ablate::<f64>(args, &c, &fractions),
    }
}

fn cmd_bench_pso(args: &BenchPsoArgs) -> Result<()> {
    if args.seeds == 0 {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    let mut hits = 0u64;
    let mut monotone = 0u64;
    let mut budget_ok = true;
    let mut worst = 0.0f64;
    for seed in 0..args.seeds {
        let out = sphere_case(seed)?;
        if out.distance < 1e-2 {
            hits += 1;
        }
        if out.nondecreasing {
            monotone += 1;
        }
        budget_ok &= out.evaluations == 10 * 101;
        worst = worst.max(out.distance);
        if seed == 0 {
            if let Some(p) = &args.trace_out {
                write_file(p, &out.trace.to_csv())?;
            }
        }
    }
    println!(
        "seeds={} hits={} monotone={} budget_exact={} worst_distance={}",
        args.seeds, hits, monotone, budget_ok, worst
    );
    Ok(())
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::GenData(a) => cmd_gen_data(a),
        Command::Train(a) => cmd_train(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::BenchPso(a) => cmd_bench_pso(a),
    }
}

fn one_line(text: &str) -> String {
    text.replace('"', "'")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Entry point for the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                print!("{e}");
                return 0;
            }
            eprintln!("error: kind=cli msg=\"{}\"", one_line(&e.to_string()));
            return 2;
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: kind={} msg=\"{}\"", e.kind(), one_line(&e.to_string()));
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_fills_and_flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(
            &path,
            "# defaults\niterations = 100\nlr_seg = 0.001\nseed = 7\n\nlambda_adv = 0.2\n",
        )
        .unwrap();
        let flags = TrainFlags {
            lr_seg: Some(0.01),
            ..TrainFlags::default()
        };
        let (c, precision, _) = resolve_train_config(Some(&path), &flags, &[]).unwrap();
        assert_eq!(c.iterations, 100);
        assert_eq!(c.lr_seg, 0.01, "flag must beat the file");
        assert_eq!(c.seed, 7);
        assert_eq!(c.weights.lambda_adv, 0.2);
        assert_eq!(c.weights.warmup_iters, 25, "warm-up tracks iterations");
        assert_eq!(precision, Precision::F32);
    }

    #[test]
    fn explicit_warmup_is_not_overridden() {
        let flags = TrainFlags {
            iterations: Some(1000),
            warmup_iters: Some(10),
            ..TrainFlags::default()
        };
        let (c, _, _) = resolve_train_config(None, &flags, &[]).unwrap();
        assert_eq!(c.weights.warmup_iters, 10);
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "iterationz = 100\n").unwrap();
        let err =
            resolve_train_config(Some(&path), &TrainFlags::default(), &[]).unwrap_err();
        assert!(err.to_string().contains("iterationz"));
    }

    #[test]
    fn malformed_config_line_names_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "iterations\n").unwrap();
        let err = parse_config_file(&path).unwrap_err();
        assert!(err.to_string().contains(":1:"), "{err}");
    }

    #[test]
    fn fraction_list_parses() {
        assert_eq!(parse_fractions("0.1,0.5").unwrap(), vec![0.1, 0.5]);
        assert_eq!(parse_fractions(" 0.1 , 0.5 ").unwrap(), vec![0.1, 0.5]);
        assert!(parse_fractions("0.1,x").is_err());
    }

    #[test]
    fn error_lines_are_single_line() {
        let s = one_line("bad \"thing\"\n  happened\n");
        assert_eq!(s, "bad 'thing'; happened");
    }
}
