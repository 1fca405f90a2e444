//! Command-line surface: `train`, `detect`, `eval`, `sweep`, `synth`, and
//! `inspect` subcommands over the library.
//!
//! Exit codes: 0 ok, 2 config/usage error, 3 i/o error, 4 data/model
//! mismatch or corrupt file.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::dataset::{load_dataset, Dataset};
use crate::detector::{self, DetectOptions};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, PrCurves, SynthParams};
use crate::forest::{train_forest, Forest};
use crate::model;
use crate::plane::{load_image, load_raw, save_gray_png, save_raw, FloatPlane, Image};

#[derive(Parser, Debug)]
#[command(
    name = "sedge",
    version,
    about = "Structured-forest edge detection: train, detect, evaluate, sweep"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a structured edge forest on a dataset.
    Train(TrainArgs),
    /// Run edge detection on images with a trained model.
    Detect(DetectArgs),
    /// Benchmark predictions against ground truth (ODS/OIS/AP/R50).
    Eval(EvalArgs),
    /// Sweep one parameter, retraining and re-evaluating per value.
    Sweep(SweepArgs),
    /// Generate a synthetic labeled dataset.
    Synth(SynthArgs),
    /// Print a model file's parameters and tree statistics.
    Inspect(InspectArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct TrainArgs {
    /// JSON run configuration; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory (images/ + groundtruth/).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training patches per tree.
    #[arg(long)]
    pub patches: Option<usize>,
    /// Trees evaluated per location (T); 2T are trained.
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct DetectArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Input image file or directory of PNGs.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub output: PathBuf,
    /// Sharpening steps (0 disables; default 2).
    #[arg(long)]
    pub sharpen: Option<usize>,
    /// Average detections over half/original/double scales.
    #[arg(long)]
    pub multiscale: bool,
    /// Also write non-maximal-suppressed (thinned) maps.
    #[arg(long)]
    pub nms: bool,
    /// Also write red-on-gray overlay PNGs.
    #[arg(long)]
    pub overlay: bool,
    /// Write 16-bit instead of 8-bit PNGs.
    #[arg(long)]
    pub deep_png: bool,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Trees evaluated per location (defaults to the model's T).
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    /// Directory of predictions (<id>.bin raw float maps or <id>.png).
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// PR thresholds (default 99).
    #[arg(long)]
    pub thresholds: Option<usize>,
    /// Match tolerance as a fraction of the image diagonal.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Where to write report.json / pr_curve.csv / report.txt
    /// (default: the prediction directory).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training dataset directory.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Held-out dataset used for scoring.
    #[arg(long)]
    pub test_dataset: PathBuf,
    /// Parameter to sweep (see `sweep --help` error text for names).
    #[arg(long)]
    pub param: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<String>,
    /// Trials averaged per value.
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    /// Output CSV path (default sweep_<param>.csv in the cwd).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub images: usize,
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub min_segments: usize,
    #[arg(long, default_value_t = 8)]
    pub max_segments: usize,
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
}

#[derive(Args, Debug, Clone)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
}

/// Parse argv and run; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train(args) => cmd_train(&args),
        Command::Detect(args) => cmd_detect(&args),
        Command::Eval(args) => cmd_eval(&args).map(|_| ()),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Synth(args) => cmd_synth(&args),
        Command::Inspect(args) => cmd_inspect(&args),
    }
}

/// Thread resolution: flag beats `SEDGE_THREADS` beats config; 0 = one per
/// core.
fn thread_pool(flag: Option<usize>, config: usize) -> Result<rayon::ThreadPool> {
    let env = std::env::var("SEDGE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let n = flag.or(env).unwrap_or(config);
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    if let Some(d) = &args.dataset {
        cfg.dataset = Some(d.clone());
    }
    if let Some(o) = &args.output {
        cfg.output = Some(o.clone());
    }
    if let Some(s) = args.seed {
        cfg.forest.seed = s;
    }
    if let Some(n) = args.patches {
        cfg.forest.n_patches = n;
    }
    if let Some(t) = args.trees {
        cfg.forest.n_trees_eval = t;
    }
    cfg.validate()?;
    let dataset_dir = cfg
        .dataset
        .clone()
        .ok_or_else(|| Error::Config("train needs --dataset (or dataset in the config)".into()))?;
    let output = cfg
        .output
        .clone()
        .ok_or_else(|| Error::Config("train needs --output (or output in the config)".into()))?;

    let pool = thread_pool(args.threads, cfg.threads)?;
    let dataset = load_dataset(&dataset_dir)?;
    println!(
        "training {} trees on {} images ({} patches/tree, seed {})",
        cfg.forest.n_trees_trained(),
        dataset.len(),
        cfg.forest.n_patches,
        cfg.forest.seed
    );
    let start = Instant::now();
    let (forest, stats) = pool.install(|| train_forest(&dataset, &cfg.forest, &cfg.channels))?;
    for (t, s) in stats.per_tree.iter().enumerate() {
        println!(
            "tree {t:2}: depth {:2}  leaves {:5}  nodes {:5}  samples {}",
            s.depth, s.n_leaves, s.n_nodes, s.n_samples
        );
    }
    model::save_model(&forest, &output)?;
    println!(
        "wrote {} ({} trees, {:.1}s)",
        output.display(),
        forest.trees.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn png_inputs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|entry| {
                let p = entry.ok()?.path();
                (p.extension().is_some_and(|e| e == "png")).then_some(p)
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Config(format!("no PNGs in {}", path.display())));
        }
        Ok(files)
    } else if path.exists() {
        Ok(vec![path.to_path_buf()])
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ))
    }
}

fn variant_label(opts: &DetectOptions) -> String {
    let mut label = String::from("SE");
    if opts.multiscale {
        label.push_str("+MS");
    }
    if opts.sharpen_steps > 0 {
        label.push_str("+SH");
    }
    label
}

pub fn cmd_detect(args: &DetectArgs) -> Result<()> {
    let forest = model::load_model(&args.model)?;
    let mut opts = DetectOptions {
        n_trees_eval: forest.params.n_trees_eval,
        stride: forest.params.stride,
        ..DetectOptions::default()
    };
    if let Some(s) = args.sharpen {
        opts.sharpen_steps = s;
    }
    if let Some(s) = args.stride {
        opts.stride = s;
    }
    if let Some(t) = args.trees {
        opts.n_trees_eval = t;
    }
    opts.multiscale = args.multiscale;

    let inputs = png_inputs(&args.input)?;
    std::fs::create_dir_all(&args.output).map_err(|e| Error::io(&args.output, e))?;
    let pool = thread_pool(args.threads, 0)?;
    let label = variant_label(&opts);

    for input in &inputs {
        let img = load_image(input)?;
        let start = Instant::now();
        let edges = pool.install(|| detector::run(&img, &forest, &opts))?;
        let secs = start.elapsed().as_secs_f64();
        let stem = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        save_gray_png(
            &edges,
            &args.output.join(format!("{stem}.png")),
            args.deep_png,
        )?;
        save_raw(&edges, &args.output.join(format!("{stem}.bin")))?;
        if args.nms {
            let thin = detector::nms(&edges);
            save_gray_png(
                &thin,
                &args.output.join(format!("{stem}_nms.png")),
                args.deep_png,
            )?;
        }
        if args.overlay {
            save_overlay(
                &img,
                &edges,
                &args.output.join(format!("{stem}_overlay.png")),
            )?;
        }
        let mp = (img.width() * img.height()) as f64 / 1e6;
        println!(
            "{stem}: {label} {}x{} in {:.3}s ({:.2} MP/s)",
            img.width(),
            img.height(),
            secs,
            mp / secs
        );
    }
    Ok(())
}

fn save_overlay(img: &Image, edges: &FloatPlane, path: &Path) -> Result<()> {
    let (w, h) = (img.width(), img.height());
    let mut buf = Vec::with_capacity(w * h * 3);
    for r in 0..h {
        for c in 0..w {
            let gray = img.plane(0).get(r, c).clamp(0.0, 1.0) * 255.0;
            let e = edges.get(r, c).clamp(0.0, 1.0);
            buf.push((gray * (1.0 - e) + 255.0 * e) as u8);
            buf.push((gray * (1.0 - e)) as u8);
            buf.push((gray * (1.0 - e)) as u8);
        }
    }
    image::ImageBuffer::<image::Rgb<u8>, _>::from_raw(w as u32, h as u32, buf)
        .expect("sized buffer")
        .save(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Load the prediction map for an id: `<id>.bin` (raw floats) wins over
/// `<id>.png`.
fn load_prediction(dir: &Path, id: &str) -> Option<Result<FloatPlane>> {
    let bin = dir.join(format!("{id}.bin"));
    if bin.exists() {
        return Some(load_raw(&bin));
    }
    let png = dir.join(format!("{id}.png"));
    if png.exists() {
        return Some(load_image(&png).map(|img| img.plane(0).clone()));
    }
    None
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(EvalReport, PrCurves)> {
    let dataset = load_dataset(&args.dataset)?;
    let mut preds = Vec::with_capacity(dataset.len());
    let mut missing = Vec::new();
    for id in &dataset.ids {
        match load_prediction(&args.pred, id) {
            Some(p) => preds.push(p?),
            None => missing.push(id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Mismatch(format!(
            "missing predictions for {} image(s): {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    let n_thresholds = args.thresholds.unwrap_or(eval::DEFAULT_THRESHOLDS);
    let tolerance = args.tolerance.unwrap_or(eval::DEFAULT_TOLERANCE);
    let pool = thread_pool(args.threads, 0)?;
    let (report, curves) =
        pool.install(|| eval::evaluate(&preds, &dataset.gts, n_thresholds, tolerance))?;

    let out_dir = args.output.clone().unwrap_or_else(|| args.pred.clone());
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let json_path = out_dir.join("report.json");
    std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    write_pr_csv(&curves, &out_dir.join("pr_curve.csv"))?;
    let table = report_table(&report, &curves);
    let txt_path = out_dir.join("report.txt");
    std::fs::write(&txt_path, &table).map_err(|e| Error::io(&txt_path, e))?;
    print!("{table}");
    Ok((report, curves))
}

fn write_pr_csv(curves: &PrCurves, path: &Path) -> Result<()> {
    let mut csv = String::from("threshold,tp_pred,fp_pred,tp_gt,fn_gt,precision,recall\n");
    for p in &curves.pooled {
        csv.push_str(&format!(
            "{:.6},{},{},{},{},{:.9},{:.9}\n",
            p.threshold, p.tp_pred, p.fp_pred, p.tp_gt, p.fn_gt, p.precision, p.recall
        ));
    }
    std::fs::write(path, csv).map_err(|e| Error::io(path, e))
}

fn report_table(report: &EvalReport, curves: &PrCurves) -> String {
    let mut s = String::new();
    s.push_str("  thr     P        R        F\n");
    let n = curves.pooled.len();
    let step = (n / 10).max(1);
    for p in curves.pooled.iter().step_by(step) {
        s.push_str(&format!(
            "  {:.3}   {:.4}   {:.4}   {:.4}\n",
            p.threshold,
            p.precision,
            p.recall,
            p.f_measure()
        ));
    }
    s.push_str(&format!(
        "ODS {:.4} (thr {:.3})  OIS {:.4}  AP {:.4}  R50 {:.4}\n",
        report.ods, report.ods_threshold, report.ois, report.ap, report.r50
    ));
    s
}

/// Sweepable parameter names.
pub const SWEEP_PARAMS: &[&str] = &[
    "m",
    "k_classes",
    "discretizer",
    "gain",
    "d_in",
    "d_out",
    "n_patches",
    "n_images",
    "positive_fraction",
    "frac_features",
    "n_trees",
    "max_depth",
    "min_samples",
    "sharpen_steps",
    "norm_radius",
    "grid_cells",
    "n_orients",
    "chn_smooth",
    "sim_smooth",
];

fn apply_sweep_value(cfg: &mut RunConfig, param: &str, value: &str) -> Result<usize> {
    let parse_usize = || -> Result<usize> {
        value
            .parse()
            .map_err(|_| Error::Config(format!("value {value:?} is not an integer")))
    };
    let parse_f32 = || -> Result<f32> {
        value
            .parse()
            .map_err(|_| Error::Config(format!("value {value:?} is not a number")))
    };
    let mut n_images = usize::MAX;
    match param {
        "m" => cfg.forest.m_pairs = parse_usize()?,
        "k_classes" => cfg.forest.k_classes = parse_usize()?,
        "discretizer" => {
            cfg.forest.discretizer = serde_json::from_value(serde_json::json!(value))
                .map_err(|_| Error::Config(format!("unknown discretizer {value:?}")))?
        }
        "gain" => {
            cfg.forest.gain = serde_json::from_value(serde_json::json!(value))
                .map_err(|_| Error::Config(format!("unknown gain {value:?}")))?
        }
        "d_in" => cfg.forest.d_in = parse_usize()?,
        "d_out" => cfg.forest.d_out = parse_usize()?,
        "n_patches" => cfg.forest.n_patches = parse_usize()?,
        "n_images" => n_images = parse_usize()?,
        "positive_fraction" => cfg.forest.positive_fraction = parse_f32()?,
        "frac_features" => cfg.forest.frac_features = parse_f32()?,
        "n_trees" => cfg.forest.n_trees_eval = parse_usize()?,
        "max_depth" => cfg.forest.max_depth = parse_usize()?,
        "min_samples" => cfg.forest.min_samples = parse_usize()?,
        "sharpen_steps" => cfg.detect.sharpen_steps = parse_usize()?,
        "norm_radius" => cfg.channels.norm_radius = parse_usize()?,
        "grid_cells" => cfg.channels.grid_cells = parse_usize()?,
        "n_orients" => cfg.channels.n_orients = parse_usize()?,
        "chn_smooth" => cfg.channels.chn_smooth = parse_usize()?,
        "sim_smooth" => cfg.channels.sim_smooth = parse_usize()?,
        other => {
            return Err(Error::Config(format!(
                "unknown sweep parameter {other:?}; valid names: {}",
                SWEEP_PARAMS.join(", ")
            )))
        }
    }
    Ok(n_images)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let base_cfg = load_config(&args.config)?;
    let dataset_dir = args
        .dataset
        .clone()
        .or_else(|| base_cfg.dataset.clone())
        .ok_or_else(|| Error::Config("sweep needs --dataset (or dataset in the config)".into()))?;
    if args.values.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one --values entry".into(),
        ));
    }
    let train_set = load_dataset(&dataset_dir)?;
    let test_set = load_dataset(&args.test_dataset)?;
    let pool = thread_pool(args.threads, base_cfg.threads)?;

    let mut rows = Vec::new();
    for value in &args.values {
        let mut ods_sum = 0.0f64;
        for trial in 0..args.trials.max(1) {
            let mut cfg = base_cfg.clone();
            let n_images = apply_sweep_value(&mut cfg, &args.param, value)?;
            cfg.forest.seed = base_cfg.forest.seed.wrapping_add(trial as u64);
            cfg.validate()?;
            let train_subset = subset_dataset(&train_set, n_images);
            let ods = pool.install(|| run_trial(&cfg, &train_subset, &test_set))?;
            ods_sum += ods;
        }
        let mean = ods_sum / args.trials.max(1) as f64;
        println!("{} = {value}: ODS {mean:.4}", args.param);
        rows.push((value.clone(), mean));
    }

    let out = args
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("sweep_{}.csv", args.param)));
    let mut csv = String::from("value,ods\n");
    for (v, ods) in &rows {
        csv.push_str(&format!("{v},{ods:.6}\n"));
    }
    std::fs::write(&out, csv).map_err(|e| Error::io(&out, e))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn subset_dataset(ds: &Dataset, n: usize) -> Dataset {
    if n >= ds.len() {
        return ds.clone();
    }
    Dataset {
        ids: ds.ids[..n].to_vec(),
        images: ds.images[..n].to_vec(),
        gts: ds.gts[..n].to_vec(),
    }
}

fn run_trial(cfg: &RunConfig, train_set: &Dataset, test_set: &Dataset) -> Result<f64> {
    let (forest, _) = train_forest(train_set, &cfg.forest, &cfg.channels)?;
    let opts = DetectOptions {
        sharpen_steps: cfg.detect.sharpen_steps,
        multiscale: cfg.detect.multiscale,
        stride: cfg.forest.stride,
        n_trees_eval: cfg.forest.n_trees_eval,
        tree_pattern: cfg.detect.tree_pattern,
    };
    let preds: Vec<FloatPlane> = test_set
        .images
        .iter()
        .map(|img| detector::run(img, &forest, &opts))
        .collect::<Result<_>>()?;
    let (report, _) = eval::evaluate(
        &preds,
        &test_set.gts,
        cfg.eval.n_thresholds,
        cfg.eval.tolerance,
    )?;
    Ok(report.ods)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    if args.min_segments == 0 || args.min_segments > args.max_segments {
        return Err(Error::Config(
            "need 1 <= min_segments <= max_segments".into(),
        ));
    }
    let corpus = eval::synth_corpus_with(&SynthParams {
        n_images: args.images,
        width: args.size,
        height: args.size,
        min_segments: args.min_segments,
        max_segments: args.max_segments,
        noise_sigma: args.noise,
        seed: args.seed,
        ..SynthParams::default()
    });
    let dataset = eval::corpus_to_dataset(corpus);
    crate::dataset::save_dataset(&dataset, &args.output)?;
    println!(
        "wrote {} synthetic images ({}x{}) to {}",
        args.images,
        args.size,
        args.size,
        args.output.display()
    );
    Ok(())
}

pub fn cmd_inspect(args: &InspectArgs) -> Result<()> {
    let forest = model::load_model(&args.model)?;
    print!("{}", describe_model(&forest));
    Ok(())
}

fn describe_model(forest: &Forest) -> String {
    let p = &forest.params;
    let c = &forest.channels;
    let mut s = String::new();
    s.push_str(&format!(
        "model: {} trees (T={} evaluated), {} input planes, {} channels, {} candidate features\n",
        forest.trees.len(),
        p.n_trees_eval,
        forest.n_input_planes,
        forest.n_channels,
        forest.feature_count
    ));
    s.push_str(&format!(
        "forest: m={} k={} {:?}/{:?} depth<={} min_samples={} frac_features={} patches={} pos={} stride={} d_in={} d_out={} seed={}\n",
        p.m_pairs, p.k_classes, p.discretizer, p.gain, p.max_depth, p.min_samples,
        p.frac_features, p.n_patches, p.positive_fraction, p.stride, p.d_in, p.d_out, p.seed
    ));
    s.push_str(&format!(
        "channels: shrink={} n_orients={} norm_radius={} chn_smooth={} sim_smooth={} grid_cells={}\n",
        c.shrink, c.n_orients, c.norm_radius, c.chn_smooth, c.sim_smooth, c.grid_cells
    ));
    for (t, tree) in forest.trees.iter().enumerate() {
        let max_count = tree.leaves.iter().map(|l| l.count).max().unwrap_or(0);
        s.push_str(&format!(
            "tree {t:2}: depth {:2}  leaves {:5}  internal {:5}  largest leaf {}\n",
            tree.depth(),
            tree.n_leaves(),
            tree.n_internal(),
            max_count
        ));
    }
    s
}
