use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use afif4::convnet::{gradient_check_params, kink_margin, NetworkSpec, NetworkState, GRADCHECK_MAX_PARAMS};
use afif4::datagen::{augment_10x, augment_landmarks_10x, degrade, DegradeKind, DegradeParams, DegradeSpec, Difficulty};
use afif4::facepatch::FaceDetection;
use afif4::foggy::{fog_in_place, foggy_face, SolveMethod};
use afif4::harness::synth::{write_synthetic_dataset, SynthConfig};
use afif4::harness::{
    detection_metrics, evaluate_indices, f_measure, fold_plan_from_manifest, make_folds, parse_csv, render_report, run_cross_dataset,
    run_crossval, train_bundle, CrossCell, DetectionCounts, DetectionMetrics, FoldPlan, ModelBundle, PipelineConfig, ReportFormat,
    RunReport, PRESETS,
};
use afif4::illum::{ssr_with, SsrConfig};
use afif4::imagecore::{load_image, parse_manifest, save_image, DatasetManifest, Gender, ImageBuffer, LandmarkSet, SampleRecord};
use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DEFAULT_PRESET: &str = "afif4-tiny";
const IMAGE_EXTENSIONS: [&str; 8] = ["png", "jpg", "jpeg", "bmp", "ppm", "pgm", "tif", "tiff"];

#[derive(Parser)]
#[command(name = "afif4", version, about = "Gender classification from fused facial features")]
struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// File of `key = value` settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Network preset; overrides a preset line in the config file.
    #[arg(long, global = true, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model bundle on a manifest (all samples, or the training part of one fold).
    Train(TrainArgs),
    /// Accuracy of a bundle on a manifest (all samples, or the test part of one fold).
    Eval(EvalArgs),
    /// k-fold cross-validation, optionally with cross-dataset cells.
    Crossval(CrossvalArgs),
    /// Class-balanced fold assignment.
    Folds(FoldsArgs),
    /// Recall, precision and F-measure from detection counts or rates.
    Metrics(MetricsArgs),
    /// Membrane in-fill of the face region.
    Foggy(FoggyArgs),
    /// Single scale retinex enhancement.
    Ssr(SsrArgs),
    /// Tenfold translation/flip augmentation.
    Augment(AugmentArgs),
    /// Synthetic degradation at a difficulty level.
    Degrade(DegradeArgs),
    /// Finite-difference check of the network gradients.
    Gradcheck(GradcheckArgs),
    /// Convert a saved report between json, csv and markdown.
    Report(ReportArgs),
    /// Write a procedural two-class face dataset.
    Synth(SynthArgs),
    /// Print the effective configuration.
    Config,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Bundle directory to create.
    #[arg(long)]
    out: PathBuf,
    /// Train on every fold except this one.
    #[arg(long)]
    fold: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Evaluate only this fold's test samples (folds rebuilt from the bundle's seed).
    #[arg(long)]
    fold: Option<usize>,
    /// Write per-sample predictions as tab-separated lines.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Swap the classes of the final stage.
    #[arg(long)]
    invert: bool,
}

#[derive(Args)]
struct CrossvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Also train on the whole manifest and test on each of these.
    #[arg(long = "cross")]
    cross: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "markdown")]
    format: String,
}

#[derive(Args)]
struct FoldsArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Fold count; defaults to the configured value.
    #[arg(long)]
    k: Option<usize>,
    /// Write a copy of the manifest with the fold ids filled in.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long, requires_all = ["fp", "fn_"])]
    tp: Option<u64>,
    #[arg(long)]
    fp: Option<u64>,
    #[arg(long = "fn")]
    fn_: Option<u64>,
    /// Recall in percent, used with --precision instead of counts.
    #[arg(long, requires = "precision", conflicts_with = "tp")]
    recall: Option<f64>,
    #[arg(long)]
    precision: Option<f64>,
}

#[derive(Args)]
struct FoggyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// 34 numbers (17 x y pairs) separated by whitespace or commas.
    #[arg(long)]
    landmarks: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    method: Option<SolveMethod>,
    #[arg(long)]
    tol: Option<f64>,
    /// Write the face region resized to size x size instead of the full image.
    #[arg(long)]
    size: Option<usize>,
}

#[derive(Args)]
struct SsrArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Surround scale in pixels; defaults to a quarter of the larger side.
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args)]
struct AugmentArgs {
    /// Image directory or manifest file.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Translation in pixels; defaults to the configured value.
    #[arg(long)]
    shift: Option<usize>,
}

#[derive(Args)]
struct DegradeArgs {
    /// Image directory or manifest file.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// gaussian-noise, gaussian-smooth, posterize, occlude-nose or occlude-mouth.
    #[arg(long)]
    kind: DegradeKind,
    /// easy, medium or hard.
    #[arg(long)]
    difficulty: Difficulty,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Network spec string; defaults to the preset's network.
    #[arg(long)]
    network: Option<String>,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Largest acceptable relative error; exit status 1 above it.
    #[arg(long, default_value_t = 1e-3)]
    threshold: f64,
    /// Probe this many random parameters instead of all of them.
    #[arg(long)]
    sample: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Report saved as .json or .csv.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "markdown")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 400)]
    count: usize,
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value = "synth")]
    name: String,
    /// Draw each sample with the other class's pattern.
    #[arg(long)]
    invert: bool,
    #[arg(long, default_value_t = 0.03)]
    noise: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let base = cli.preset.as_deref().unwrap_or(DEFAULT_PRESET);
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path, base).with_context(|| format!("reading {}", path.display()))?,
        None => PipelineConfig::preset(base)?,
    };
    if let Some(p) = &cli.preset {
        if *p != cfg.preset {
            cfg.set("preset", p)?;
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Train(a) => train(&cfg, a),
        Command::Eval(a) => eval(a),
        Command::Crossval(a) => crossval(&cfg, a),
        Command::Folds(a) => folds(&cfg, a),
        Command::Metrics(a) => metrics(a),
        Command::Foggy(a) => foggy(&cfg, a),
        Command::Ssr(a) => ssr(&cfg, a),
        Command::Augment(a) => augment(&cfg, a),
        Command::Degrade(a) => degrade_cmd(&cfg, cli.seed.unwrap_or(cfg.seed), a),
        Command::Gradcheck(a) => gradcheck(&cfg, a),
        Command::Report(a) => report(a),
        Command::Synth(a) => synth(&cfg, a),
        Command::Config => {
            print!("{}", cfg.to_text());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn read_manifest(path: &Path) -> Result<DatasetManifest<f64>> {
    parse_manifest(path).with_context(|| format!("reading manifest {}", path.display()))
}

/// Stored fold ids when the manifest has them, otherwise a fresh seeded plan.
fn fold_plan(manifest: &DatasetManifest<f64>, k: usize, seed: u64) -> Result<FoldPlan> {
    Ok(match fold_plan_from_manifest(manifest, k)? {
        Some(plan) => plan,
        None => make_folds(manifest, k, seed)?,
    })
}

fn train(cfg: &PipelineConfig, a: TrainArgs) -> Result<ExitCode> {
    let manifest = read_manifest(&a.manifest)?;
    let indices = match a.fold {
        Some(f) => {
            let plan = fold_plan(&manifest, cfg.folds, cfg.seed)?;
            plan.check_fold(f)?;
            plan.train_indices(f)
        }
        None => (0..manifest.len()).collect(),
    };
    eprintln!("training on {} samples with preset {} and seed {}", indices.len(), cfg.preset, cfg.seed);
    let bundle = train_bundle(&manifest, &indices, cfg)?;
    bundle.save(&a.out)?;
    println!("bundle written to {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn eval(a: EvalArgs) -> Result<ExitCode> {
    let mut bundle = ModelBundle::load(&a.bundle).with_context(|| format!("loading bundle {}", a.bundle.display()))?;
    if a.invert {
        bundle = bundle.inverted();
    }
    let manifest = read_manifest(&a.manifest)?;
    let indices = match a.fold {
        Some(f) => {
            let plan = fold_plan(&manifest, bundle.config.folds, bundle.config.seed)?;
            plan.check_fold(f)?;
            plan.test_indices(f)
        }
        None => (0..manifest.len()).collect(),
    };
    ensure!(!indices.is_empty(), "no samples to evaluate");
    let ev = evaluate_indices(&bundle, &manifest, &indices)?;
    if let Some(path) = &a.predictions {
        let mut text = String::from("# path\tlabel\tpredicted\n");
        for (i, pred, label) in &ev.predictions {
            text.push_str(&format!("{}\t{}\t{}\n", manifest.records[*i].image_path, label.token(), pred.token()));
        }
        fs::write(path, text)?;
    }
    println!("accuracy {:.2}% ({}/{})", ev.accuracy(), ev.correct(), ev.predictions.len());
    Ok(ExitCode::SUCCESS)
}

fn write_or_print(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn crossval(cfg: &PipelineConfig, a: CrossvalArgs) -> Result<ExitCode> {
    let format: ReportFormat = a.format.parse()?;
    let manifest = read_manifest(&a.manifest)?;
    let mut report = run_crossval(&manifest, cfg)?;
    for path in &a.cross {
        let test = read_manifest(path)?;
        let accuracy = run_cross_dataset(&manifest, &test, cfg)?;
        report.cross.push(CrossCell { train: manifest.name.clone(), test: test.name.clone(), accuracy });
    }
    write_or_print(&render_report(&report, format)?, a.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn folds(cfg: &PipelineConfig, a: FoldsArgs) -> Result<ExitCode> {
    let manifest = read_manifest(&a.manifest)?;
    let k = a.k.unwrap_or(cfg.folds);
    let plan = make_folds(&manifest, k, cfg.seed)?;
    for f in 0..k {
        let test = plan.test_indices(f);
        let males = test.iter().filter(|&&i| manifest.records[i].gender == Gender::Male).count();
        println!("fold {f}: {} samples ({males} M, {} F)", test.len(), test.len() - males);
    }
    println!("discarded: {}", plan.discarded.len());
    if let Some(out) = &a.out {
        plan.apply_to(&manifest)?.write(out)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn metrics(a: MetricsArgs) -> Result<ExitCode> {
    let m = match (a.tp, a.fp, a.fn_, a.recall, a.precision) {
        (Some(tp), Some(fp), Some(fnn), None, None) => {
            detection_metrics(&DetectionCounts { true_positives: tp, false_positives: fp, false_negatives: fnn })?
        }
        (None, None, None, Some(recall), Some(precision)) => {
            ensure!((0.0..=100.0).contains(&recall) && (0.0..=100.0).contains(&precision), "rates are percentages in [0, 100]");
            DetectionMetrics { recall, precision, f_measure: f_measure(recall, precision) }
        }
        _ => bail!("give either --tp --fp --fn or --recall --precision"),
    };
    println!("recall {:.2}%\nprecision {:.2}%\nf-measure {:.2}%", m.recall, m.precision, m.f_measure);
    Ok(ExitCode::SUCCESS)
}

fn read_landmarks(path: &Path) -> Result<LandmarkSet<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let values = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().with_context(|| format!("bad landmark value {s:?}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(LandmarkSet::from_flat(&values)?)
}

fn foggy(cfg: &PipelineConfig, a: FoggyArgs) -> Result<ExitCode> {
    let img: ImageBuffer<f64> = load_image(&a.input)?;
    let lm = read_landmarks(&a.landmarks)?;
    ensure!(lm.within(img.width(), img.height()), "landmarks fall outside the {}x{} image", img.width(), img.height());
    let mut solve = cfg.membrane_config();
    if let Some(m) = a.method {
        solve.method = m;
    }
    if let Some(t) = a.tol {
        solve.tolerance = t;
    }
    let out = match a.size {
        Some(s) => foggy_face(&img, &FaceDetection::from_landmarks(lm), &solve, s)?,
        None => fog_in_place(&img, &lm, &solve)?,
    };
    save_image(&out, &a.out)?;
    Ok(ExitCode::SUCCESS)
}

fn ssr(cfg: &PipelineConfig, a: SsrArgs) -> Result<ExitCode> {
    let img: ImageBuffer<f64> = load_image(&a.input)?;
    let base = cfg.ssr_config();
    let ssr_cfg = SsrConfig { scale: a.g.or(base.scale), eps: a.eps.unwrap_or(base.eps) };
    save_image(&ssr_with(&img, &ssr_cfg)?, &a.out)?;
    Ok(ExitCode::SUCCESS)
}

/// Samples to process: a manifest's records, or every image in a directory.
fn collect_inputs(input: &Path) -> Result<(Option<DatasetManifest<f64>>, Vec<PathBuf>)> {
    if input.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(input)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            })
            .collect();
        files.sort();
        Ok((None, files))
    } else {
        let m = read_manifest(input)?;
        let files = m.records.iter().map(|r| m.resolve(r)).collect();
        Ok((Some(m), files))
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "image".into())
}

fn write_derived(source: Option<DatasetManifest<f64>>, records: Vec<SampleRecord<f64>>, out: &Path, suffix: &str) -> Result<()> {
    if let Some(m) = source {
        let derived = DatasetManifest::new(format!("{}-{suffix}", m.name), out, records)?;
        let path = out.join(format!("{}.tsv", derived.name));
        derived.write(&path)?;
        println!("manifest written to {}", path.display());
    }
    Ok(())
}

fn augment(cfg: &PipelineConfig, a: AugmentArgs) -> Result<ExitCode> {
    let mut aug = cfg.augment_config();
    if let Some(s) = a.shift {
        aug.shift = s;
    }
    let (manifest, files) = collect_inputs(&a.input)?;
    fs::create_dir_all(&a.out)?;
    let mut records = Vec::new();
    for (i, path) in files.iter().enumerate() {
        let img: ImageBuffer<f64> = load_image(path).with_context(|| format!("loading {}", path.display()))?;
        let copies = augment_10x(&img, &aug).with_context(|| format!("augmenting {}", path.display()))?;
        let marks = manifest
            .as_ref()
            .and_then(|m| m.records[i].landmarks.as_ref())
            .map(|lm| augment_landmarks_10x(lm, img.width(), &aug));
        for (j, copy) in copies.iter().enumerate() {
            let name = format!("{}_aug{j}.png", stem(path));
            save_image(copy, a.out.join(&name))?;
            if let Some(m) = &manifest {
                let r = &m.records[i];
                records.push(SampleRecord {
                    image_path: name,
                    gender: r.gender,
                    subject_id: r.subject_id.clone(),
                    fold: r.fold,
                    landmarks: marks.as_ref().map(|l| l[j].clone()),
                });
            }
        }
    }
    println!("{} images written", files.len() * 10);
    write_derived(manifest, records, &a.out, "augmented")?;
    Ok(ExitCode::SUCCESS)
}

fn degrade_cmd(cfg: &PipelineConfig, seed: u64, a: DegradeArgs) -> Result<ExitCode> {
    let mut spec = DegradeSpec::preset(a.kind, a.difficulty, seed);
    if a.kind.needs_landmarks() {
        spec.params = DegradeParams::Occlude { fill: cfg.occlusion_fill, margin: cfg.occlusion_margin };
    }
    let (manifest, files) = collect_inputs(&a.input)?;
    fs::create_dir_all(&a.out)?;
    let mut records = Vec::new();
    for (i, path) in files.iter().enumerate() {
        let img: ImageBuffer<f64> = load_image(path).with_context(|| format!("loading {}", path.display()))?;
        let lm = manifest.as_ref().and_then(|m| m.records[i].landmarks.as_ref());
        // one noise stream per image
        let per_image = DegradeSpec { seed: seed.wrapping_add(i as u64), ..spec };
        let out = degrade(&img, &per_image, lm).with_context(|| format!("degrading {}", path.display()))?;
        let name = format!("{}_{}_{}.png", stem(path), a.kind, a.difficulty);
        save_image(&out, a.out.join(&name))?;
        if let Some(m) = &manifest {
            records.push(SampleRecord { image_path: name, ..m.records[i].clone() });
        }
    }
    println!("{} images written", files.len());
    write_derived(manifest, records, &a.out, &format!("{}-{}", a.kind, a.difficulty))?;
    Ok(ExitCode::SUCCESS)
}

fn gradcheck(cfg: &PipelineConfig, a: GradcheckArgs) -> Result<ExitCode> {
    let spec: NetworkSpec = match &a.network {
        Some(s) => s.parse()?,
        None => cfg.network.clone(),
    };
    let mut net = NetworkState::<f64>::random(spec.clone(), cfg.init_scale, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
    // small random biases so no unit starts exactly at a ReLU kink
    for p in net.params_mut() {
        *p += rng.random_range(-0.01..0.01);
    }
    let n = spec.input_size * spec.input_size * spec.input_channels;
    let input = ImageBuffer::new(spec.input_size, spec.input_size, spec.input_channels, (0..n).map(|_| rng.random()).collect())?;
    let label = if rng.random_bool(0.5) { Gender::Male } else { Gender::Female };
    let count = net.parameter_count();
    let params: Vec<usize> = match a.sample {
        Some(s) if s < count => (0..s).map(|_| rng.random_range(0..count)).collect(),
        _ => (0..count).collect(),
    };
    let mut worst = (0.0f64, 0usize);
    for chunk in params.chunks(GRADCHECK_MAX_PARAMS) {
        let r = gradient_check_params(&net, &input, label, a.eps, chunk)?;
        if r.max_relative_error > worst.0 || r.max_relative_error.is_nan() {
            worst = (r.max_relative_error, r.worst_parameter);
        }
    }
    let margin = kink_margin(&net, &input)?;
    println!("network: {spec}");
    println!("parameters checked: {} of {count}", params.len());
    println!("max relative error: {:.3e} (parameter {})", worst.0, worst.1);
    println!("kink margin: {margin:.3e}");
    if margin < 10.0 * a.eps {
        println!("note: an activation lies within 10 eps of a kink; large errors may be finite-difference artifacts");
    }
    Ok(if worst.0 < a.threshold { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn report(a: ReportArgs) -> Result<ExitCode> {
    let format: ReportFormat = a.format.parse()?;
    let text = fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let parsed: RunReport = match a.input.extension().and_then(|e| e.to_str()) {
        Some("csv") => parse_csv(&text)?,
        Some("json") => RunReport::from_json(&text)?,
        _ => bail!("report input must end in .json or .csv"),
    };
    write_or_print(&render_report(&parsed, format)?, a.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn synth(cfg: &PipelineConfig, a: SynthArgs) -> Result<ExitCode> {
    let sc = SynthConfig { count: a.count, size: a.size, seed: cfg.seed, invert_labels: a.invert, noise: a.noise };
    let manifest = write_synthetic_dataset(&a.out, &a.name, &sc)?;
    let path = a.out.join(format!("{}.tsv", a.name));
    manifest.write(&path)?;
    println!("{} samples, manifest written to {}", manifest.len(), path.display());
    Ok(ExitCode::SUCCESS)
}
