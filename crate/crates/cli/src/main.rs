//! Command-line front end for the gabor-keca library.
//!
//! Subcommands cover the whole workflow: `gabor-dump` for visual filter
//! inspection, `extract` for feature CSVs, `fit` / `eval` / `predict` for
//! model training and use, and `orl-manifest` for building a manifest from
//! a directory of per-subject image folders.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gabor_keca::config::{MeasureChoice, PipelineConfig};
use gabor_keca::eval::render_table;
use gabor_keca::gabor::GaborTransform;
use gabor_keca::image::{Dataset, GrayImage};
use gabor_keca::pipeline::{FittedPipeline, Pipeline};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type CliResult = Result<(), Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "gabor-keca", version, about = "Gabor + KECA image classification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write every filter response of one image as a PGM, rescaled to
    /// [0,255], for visual inspection. The image keeps its native size.
    GaborDump {
        /// Input image (binary or ASCII PGM).
        image: PathBuf,
        /// Directory for the response images (created if missing).
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        #[command(flatten)]
        cfg: CfgArgs,
    },
    /// Extract feature vectors for every manifest entry and emit them as
    /// CSV (`label,v1,...,vD`), one row per image in manifest order.
    Extract {
        /// Manifest CSV (`path,label,role`).
        manifest: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: CfgArgs,
    },
    /// Fit the subspace model and class statistics on the manifest's
    /// training entries and save them as one model file.
    Fit {
        manifest: PathBuf,
        /// Model file to write.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[command(flatten)]
        cfg: CfgArgs,
    },
    /// Score the manifest's probe entries against a fitted model and
    /// report confusion counts and rates per measure and threshold.
    Eval {
        manifest: PathBuf,
        /// Model file produced by `fit`.
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Also write the report as CSV to this file.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: CfgArgs,
    },
    /// Classify one image and print the predicted label and its distance.
    Predict {
        image: PathBuf,
        /// Model file produced by `fit`.
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[command(flatten)]
        cfg: CfgArgs,
    },
    /// Build a manifest from a directory of per-subject folders (s1, s2,
    /// ...), each holding numbered images. A seeded shuffle holds some
    /// subjects out as impostors; the rest are enrolled.
    OrlManifest {
        /// Dataset root containing the subject folders.
        root: PathBuf,
        /// Manifest file to write.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Leading images of each enrolled subject used for training; the
        /// rest become positive probes.
        #[arg(long, default_value_t = 5)]
        train_count: usize,
        /// Number of held-out subjects whose images become negative probes.
        #[arg(long, default_value_t = 5)]
        impostor_subjects: usize,
        /// Shuffle seed for the impostor draw.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Configuration source shared by the processing subcommands: an optional
/// config file plus one flag per config key. Flags override the file.
#[derive(Args)]
struct CfgArgs {
    /// Config file of `key = value` lines.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Working image width.
    #[arg(long, value_name = "PX")]
    width: Option<String>,
    /// Working image height.
    #[arg(long, value_name = "PX")]
    height: Option<String>,
    /// Filter bank scale count.
    #[arg(long, value_name = "N")]
    scales: Option<String>,
    /// Filter bank orientation count.
    #[arg(long, value_name = "N")]
    orientations: Option<String>,
    /// Peak spatial frequency.
    #[arg(long, value_name = "F")]
    k_max: Option<String>,
    /// Frequency ratio between adjacent scales.
    #[arg(long, value_name = "F")]
    spacing: Option<String>,
    /// Gaussian envelope width.
    #[arg(long, value_name = "F")]
    sigma: Option<String>,
    /// Filter window side length (odd).
    #[arg(long, value_name = "PX")]
    window: Option<String>,
    /// Feature block side length.
    #[arg(long, value_name = "PX")]
    block: Option<String>,
    /// Kernel family: cosine, gaussian or polynomial.
    #[arg(long, value_name = "NAME")]
    kernel: Option<String>,
    /// Gaussian kernel width.
    #[arg(long, value_name = "F")]
    kernel_width: Option<String>,
    /// Polynomial kernel degree.
    #[arg(long, value_name = "N")]
    kernel_degree: Option<String>,
    /// Polynomial kernel offset.
    #[arg(long, value_name = "F")]
    kernel_offset: Option<String>,
    /// Unit-normalize feature vectors: true or false.
    #[arg(long, value_name = "BOOL")]
    normalize: Option<String>,
    /// Retained axis count, or `auto` to select by energy.
    #[arg(long, value_name = "N")]
    k: Option<String>,
    /// Cumulative entropy fraction for automatic axis selection.
    #[arg(long, value_name = "F")]
    energy: Option<String>,
    /// Distance measure: l1, l2, mahalanobis, cosine or all.
    #[arg(long, value_name = "NAME")]
    measure: Option<String>,
    /// Acceptance threshold; `inf` accepts everything.
    #[arg(long, value_name = "T", allow_hyphen_values = true)]
    tau: Option<String>,
    /// Threshold sweep as start:stop:steps; overrides --tau.
    #[arg(long, value_name = "RANGE", allow_hyphen_values = true)]
    tau_sweep: Option<String>,
    /// Seed for randomized helpers.
    #[arg(long, value_name = "N")]
    seed: Option<String>,
    /// Worker thread cap; 0 means one per core.
    #[arg(long, value_name = "N")]
    threads: Option<String>,
}

impl CfgArgs {
    fn resolve(&self) -> Result<PipelineConfig, Box<dyn std::error::Error>> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        let overrides: [(&str, &Option<String>); 21] = [
            ("width", &self.width),
            ("height", &self.height),
            ("scales", &self.scales),
            ("orientations", &self.orientations),
            ("k_max", &self.k_max),
            ("spacing", &self.spacing),
            ("sigma", &self.sigma),
            ("window", &self.window),
            ("block", &self.block),
            ("kernel", &self.kernel),
            ("kernel_width", &self.kernel_width),
            ("kernel_degree", &self.kernel_degree),
            ("kernel_offset", &self.kernel_offset),
            ("normalize", &self.normalize),
            ("k", &self.k),
            ("energy", &self.energy),
            ("measure", &self.measure),
            ("tau", &self.tau),
            ("tau_sweep", &self.tau_sweep),
            ("seed", &self.seed),
            ("threads", &self.threads),
        ];
        for (key, value) in overrides {
            if let Some(value) = value {
                cfg.apply(key, value)
                    .map_err(|e| format!("--{}: {e}", key.replace('_', "-")))?;
            }
        }
        cfg.validate()?;
        if cfg.threads > 0 {
            // A second build_global in the same process is harmless; the
            // first pool stays in effect.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build_global();
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::GaborDump { image, out_dir, cfg } => gabor_dump(&image, &out_dir, &cfg),
        Command::Extract { manifest, out, cfg } => extract(&manifest, out.as_deref(), &cfg),
        Command::Fit { manifest, out, cfg } => fit(&manifest, &out, &cfg),
        Command::Eval { manifest, model, out, cfg } => {
            eval(&manifest, &model, out.as_deref(), &cfg)
        }
        Command::Predict { image, model, cfg } => predict(&image, &model, &cfg),
        Command::OrlManifest { root, out, train_count, impostor_subjects, seed } => {
            orl_manifest(&root, &out, train_count, impostor_subjects, seed)
        }
    }
}

fn write_out(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(())
}

fn gabor_dump(image: &Path, out_dir: &Path, cfg: &CfgArgs) -> CliResult {
    let cfg = cfg.resolve()?;
    let image = GrayImage::load_pgm(image)?;
    let params = cfg.gabor_params();
    let transform = GaborTransform::new(&params, image.width(), image.height())?;
    fs::create_dir_all(out_dir).map_err(|e| format!("{}: {e}", out_dir.display()))?;
    let fields = transform.apply(&image)?;
    for (i, field) in fields.iter().enumerate() {
        let (scale, orient) = (i / params.orientations, i % params.orientations);
        let lo = field.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = field.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let rescale = |v: f64| if hi > lo { (v - lo) * 255.0 / (hi - lo) } else { 0.0 };
        let pixels = field.values.iter().map(|&v| rescale(v)).collect();
        GrayImage::new(field.width, field.height, pixels)?
            .save_pgm(out_dir.join(format!("scale{scale}_orient{orient}.pgm")))?;
    }
    println!("wrote {} response images to {}", fields.len(), out_dir.display());
    Ok(())
}

fn extract(manifest: &Path, out: Option<&Path>, cfg: &CfgArgs) -> CliResult {
    let cfg = cfg.resolve()?;
    let dataset = Dataset::load_manifest(manifest, cfg.width, cfg.height)?;
    let pipeline = Pipeline::new(cfg.clone())?;
    let dims =
        cfg.scales * cfg.orientations * (cfg.width / cfg.block) * (cfg.height / cfg.block);
    let mut csv = String::from("label");
    for i in 1..=dims {
        let _ = write!(csv, ",v{i}");
    }
    csv.push('\n');
    for entry in dataset.entries() {
        let features = pipeline.features(&entry.image)?;
        csv.push_str(&entry.label);
        for v in &features.values {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
    }
    match out {
        Some(path) => write_out(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn fit(manifest: &Path, out: &Path, cfg: &CfgArgs) -> CliResult {
    let cfg = cfg.resolve()?;
    let requested = cfg.k;
    let dataset = Dataset::load_manifest(manifest, cfg.width, cfg.height)?;
    let fitted = Pipeline::new(cfg)?.fit(&dataset)?;
    let k = fitted.model().k();
    if let Some(requested) = requested {
        if k < requested {
            eprintln!("warning: only {k} usable axes; requested k = {requested}");
        }
    }
    fitted.save(out)?;
    println!(
        "model: {} (k = {k}, {} training images)",
        out.display(),
        fitted.labels().len()
    );
    Ok(())
}

fn eval(manifest: &Path, model: &Path, out: Option<&Path>, cfg: &CfgArgs) -> CliResult {
    let cfg = cfg.resolve()?;
    let fitted = FittedPipeline::load(Pipeline::new(cfg.clone())?, model)?;
    let dataset = Dataset::load_manifest(manifest, cfg.width, cfg.height)?;
    let rows = fitted.evaluate(&dataset, &cfg.measure.measures(), &cfg.taus())?;
    if let Some(path) = out {
        write_out(path, &gabor_keca::eval::render_csv(&rows))?;
    }
    println!(
        "model: {} (k = {}, {} training images)",
        model.display(),
        fitted.model().k(),
        fitted.labels().len()
    );
    print!("{}", render_table(&rows));
    Ok(())
}

fn predict(image: &Path, model: &Path, cfg: &CfgArgs) -> CliResult {
    let cfg = cfg.resolve()?;
    let measure = match cfg.measure {
        MeasureChoice::Single(m) => m,
        MeasureChoice::All => {
            return Err("predict needs a single measure, not `all`".into());
        }
    };
    let fitted = FittedPipeline::load(Pipeline::new(cfg)?, model)?;
    let image = GrayImage::load_pgm(image)?;
    let (label, distance) = fitted.predict(&image, measure)?;
    println!("{label}\t{distance}");
    Ok(())
}

fn orl_manifest(
    root: &Path,
    out: &Path,
    train_count: usize,
    impostor_subjects: usize,
    seed: u64,
) -> CliResult {
    if train_count == 0 {
        return Err("--train-count must be at least 1".into());
    }
    let root = fs::canonicalize(root).map_err(|e| format!("{}: {e}", root.display()))?;
    let mut subjects = Vec::new();
    for dir_entry in fs::read_dir(&root).map_err(|e| format!("{}: {e}", root.display()))? {
        let path = dir_entry.map_err(|e| format!("{}: {e}", root.display()))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("").to_string();
        if !path.is_dir() {
            continue;
        }
        if let Some(num) = name.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
            subjects.push((num, name, path));
        }
    }
    if subjects.is_empty() {
        return Err(format!("{}: no subject folders (s1, s2, ...) found", root.display()).into());
    }
    subjects.sort_by_key(|(num, ..)| *num);
    if impostor_subjects >= subjects.len() {
        return Err(format!(
            "--impostor-subjects {} would leave no enrolled subjects (found {})",
            impostor_subjects,
            subjects.len()
        )
        .into());
    }

    let mut order: Vec<usize> = (0..subjects.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let impostors: std::collections::HashSet<usize> =
        order[..impostor_subjects].iter().copied().collect();

    let mut manifest = String::from("path,label,role\n");
    for (idx, (_, name, dir)) in subjects.iter().enumerate() {
        let mut images = Vec::new();
        for dir_entry in fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))? {
            let path = dir_entry.map_err(|e| format!("{}: {e}", dir.display()))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("pgm") {
                continue;
            }
            let stem_num = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse::<u64>().ok());
            images.push((stem_num.is_none(), stem_num.unwrap_or(0), path));
        }
        if images.is_empty() {
            return Err(format!("{}: no .pgm images", dir.display()).into());
        }
        images.sort();
        for (i, (.., path)) in images.iter().enumerate() {
            let role = if impostors.contains(&idx) {
                "negative-test"
            } else if i < train_count {
                "train"
            } else {
                "positive-test"
            };
            let _ = writeln!(manifest, "{},{name},{role}", path.display());
        }
    }
    write_out(out, &manifest)?;
    println!(
        "manifest: {} ({} enrolled, {} impostor subjects)",
        out.display(),
        subjects.len() - impostor_subjects,
        impostor_subjects
    );
    Ok(())
}
