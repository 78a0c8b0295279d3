use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use s2dl::baselines::{run_baseline, BaselineConfig, BaselineMethod};
use s2dl::cluster::{Prepared, S2dlConfig, Sigma0};
use s2dl::eval::{evaluate, sweep, SweepGrid};
use s2dl::hsi::{load_cube, load_labels_for, save_cube, synth_cube, CubeFormat, GroundTruth, HsiCube, SceneSpec};
use s2dl::raster;

const VERSION: &str = "0.1.0 (pipeline rev 1)";

#[derive(Parser)]
#[command(name = "s2dl", version = VERSION, about = "Unsupervised hyperspectral image clustering")]
struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Superpixel segmentation only.
    Segment(SegmentArgs),
    /// Full clustering run (or a baseline).
    Cluster(ClusterArgs),
    /// Score saved label maps against ground truth.
    Eval(EvalArgs),
    /// Grid search scored against ground truth.
    Sweep(SweepArgs),
    /// Colorize a label map.
    Render(RenderArgs),
    /// Write a synthetic patch scene and its labels.
    Synth(SynthArgs),
}

#[derive(Args, Clone, Default)]
struct Knobs {
    /// Flat `key = value` file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    superpixels: Option<String>,
    /// Representatives per superpixel.
    #[arg(long)]
    k: Option<String>,
    /// Neighbors for density and graph.
    #[arg(long)]
    kn: Option<String>,
    /// Fixed kernel bandwidth.
    #[arg(long, conflicts_with = "sigma0_percentile")]
    sigma0: Option<String>,
    /// Bandwidth as a percentile of neighbor distances.
    #[arg(long)]
    sigma0_percentile: Option<String>,
    /// Spatial window half-width.
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    clusters: Option<String>,
    /// Diffusion time, or `auto` (needs --labels).
    #[arg(long)]
    t: Option<String>,
    /// Superpixel balance weight, or `auto`.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    ers_sigma: Option<String>,
    /// Eigenpairs kept, or `auto`.
    #[arg(long)]
    eigenpairs: Option<String>,
    #[arg(long)]
    pca_components: Option<String>,
    /// Skip the local-backbone step.
    #[arg(long)]
    no_lbb: bool,
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    cube: Option<PathBuf>,
    /// Cube format (`raw-bsq` or `csv`); guessed from the extension if absent.
    #[arg(long)]
    format: Option<String>,
    /// Ground-truth label map (CSV or PGM, 0 = unlabeled).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    #[command(flatten)]
    io: Inputs,
    #[command(flatten)]
    knobs: Knobs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    S2dl,
    Kmeans,
    Dpc,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    io: Inputs,
    #[command(flatten)]
    knobs: Knobs,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// K-Means start point.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    labels: PathBuf,
    /// Predicted label maps; repeat to compare several.
    #[arg(long, required = true)]
    pred: Vec<PathBuf>,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Single,
    Coarse,
    Full,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    io: Inputs,
    #[command(flatten)]
    knobs: Knobs,
    /// Starting grid; `single` is just the configured point.
    #[arg(long, value_enum, default_value = "coarse")]
    preset: Preset,
    /// Grid file of `key = v1, v2, ...` lines applied on top of the preset.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Result cache; reruns skip finished points.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    /// Label map (CSV or PGM).
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Where to write the cube.
    #[arg(long)]
    cube: PathBuf,
    /// Where to write the labels (CSV).
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    format: Option<String>,
    #[arg(long, default_value_t = 20)]
    height: usize,
    #[arg(long, default_value_t = 20)]
    width: usize,
    /// Patch grid as `ROWSxCOLS`.
    #[arg(long, default_value = "1x2")]
    layout: String,
    #[arg(long, default_value_t = 4)]
    bands: usize,
    /// Gaussian noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

/// Usage errors exit with 2, everything else with 1.
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<s2dl::Error> for Failure {
    fn from(e: s2dl::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let outcome = match cli.command {
        Command::Segment(a) => cmd_segment(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Render(a) => cmd_render(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::from(1)
        }
    }
}

/// The error chain on one line. Library errors already print their causes,
/// so a cause whose text ends the previous message is skipped.
fn one_line(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if prev.ends_with(&msg) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&msg);
        prev = msg;
    }
    out
}

/// Settings a config file may carry besides pipeline knobs.
#[derive(Default)]
struct FileExtras {
    cube: Option<PathBuf>,
    labels: Option<PathBuf>,
    out: Option<PathBuf>,
    method: Option<String>,
    seed: Option<String>,
}

/// Defaults, then the config file, then flags; validated before any work.
fn resolve(knobs: &Knobs) -> CliResult<(S2dlConfig, FileExtras)> {
    let mut config = S2dlConfig::default();
    let mut extras = FileExtras::default();
    if let Some(path) = &knobs.config {
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let rest = config
            .apply_kv(&text)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        for (k, v) in rest {
            match k.as_str() {
                "cube" => extras.cube = Some(v.into()),
                "labels" => extras.labels = Some(v.into()),
                "out" => extras.out = Some(v.into()),
                "method" => extras.method = Some(v),
                "seed" => extras.seed = Some(v),
                other => {
                    return Err(usage(format!(
                        "{}: unknown key {other:?} (known: {}, cube, labels, out, method, seed)",
                        path.display(),
                        S2dlConfig::KEYS.join(", ")
                    )))
                }
            }
        }
    }
    let flags = [
        ("superpixels", &knobs.superpixels),
        ("k", &knobs.k),
        ("kn", &knobs.kn),
        ("sigma0", &knobs.sigma0),
        ("sigma0_percentile", &knobs.sigma0_percentile),
        ("radius", &knobs.radius),
        ("clusters", &knobs.clusters),
        ("t", &knobs.t),
        ("alpha", &knobs.alpha),
        ("ers_sigma", &knobs.ers_sigma),
        ("eigenpairs", &knobs.eigenpairs),
        ("pca_components", &knobs.pca_components),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            config
                .set(key, v)
                .map_err(|e| usage(format!("--{}: {e}", key.replace('_', "-"))))?;
        }
    }
    if knobs.no_lbb {
        config.use_lbb = false;
    }
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok((config, extras))
}

fn cube_format(flag: &Option<String>, path: &Path) -> CliResult<CubeFormat> {
    match flag {
        Some(f) => f.parse().map_err(|e: s2dl::Error| usage(e.to_string())),
        None => Ok(CubeFormat::from_path(path)),
    }
}

fn read_cube(path: &Path, format: CubeFormat) -> CliResult<HsiCube> {
    Ok(load_cube(path, format).with_context(|| format!("loading cube {}", path.display()))?)
}

fn read_truth(path: &Path, cube: &HsiCube) -> CliResult<GroundTruth> {
    Ok(load_labels_for(path, cube).with_context(|| format!("loading labels {}", path.display()))?)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn out_dir(flag: &Option<PathBuf>, extra: &Option<PathBuf>) -> CliResult<PathBuf> {
    let dir = flag.clone().or_else(|| extra.clone()).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn header(body: &str) -> String {
    format!("s2dl {VERSION}\n{body}")
}

fn cmd_segment(a: SegmentArgs) -> CliResult<()> {
    let (config, extras) = resolve(&a.knobs)?;
    let cube_path = a
        .io
        .cube
        .or(extras.cube)
        .ok_or_else(|| usage("--cube is required"))?;
    let format = cube_format(&a.io.format, &cube_path)?;
    let out = out_dir(&a.io.out, &extras.out)?;
    let cube = read_cube(&cube_path, format)?;
    let mut prepared = Prepared::new(&cube);
    let seg = prepared.superpixels(&config)?;
    let map = &seg.map;
    let mut note = String::from("[config]\n");
    note.push_str(&config.to_kv());
    let _ = writeln!(note, "[derived]\nalpha = {}\nsuperpixels_found = {}", seg.alpha, map.n_superpixels());
    let note = header(&note);
    write(
        &out.join("superpixels.pgm"),
        raster::pgm_ascii_annotated(cube.height(), cube.width(), map.assignment(), &note),
    )?;
    write(
        &out.join("superpixels.csv"),
        raster::labels_csv_annotated(cube.width(), map.assignment(), &note),
    )?;
    write(&out.join("segment.txt"), &note)?;
    println!("{} superpixels", map.n_superpixels());
    Ok(())
}

fn cmd_cluster(a: ClusterArgs) -> CliResult<()> {
    let (config, extras) = resolve(&a.knobs)?;
    let method = match (a.method, extras.method.as_deref()) {
        (Some(m), _) => m,
        (None, None | Some("s2dl")) => Method::S2dl,
        (None, Some("kmeans")) => Method::Kmeans,
        (None, Some("dpc")) => Method::Dpc,
        (None, Some(other)) => return Err(usage(format!("unknown method {other:?}"))),
    };
    let seed = match (a.seed, extras.seed) {
        (Some(s), _) => s,
        (None, Some(s)) => s.parse().map_err(|_| usage(format!("seed: bad value {s:?}")))?,
        (None, None) => 0,
    };
    let cube_path = a
        .io
        .cube
        .or(extras.cube)
        .ok_or_else(|| usage("--cube is required"))?;
    let labels_path = a.io.labels.or(extras.labels);
    if matches!(method, Method::S2dl)
        && matches!(config.t, s2dl::cluster::TimeChoice::Auto)
        && labels_path.is_none()
    {
        return Err(usage("--t auto needs --labels to choose a time; pass a number instead"));
    }
    let format = cube_format(&a.io.format, &cube_path)?;
    let out = out_dir(&a.io.out, &extras.out)?;
    let cube = read_cube(&cube_path, format)?;
    let truth = labels_path.map(|p| read_truth(&p, &cube)).transpose()?;

    let (labels, metadata, timings) = match method {
        Method::S2dl => {
            let map = Prepared::new(&cube).run(&config, truth.as_ref())?;
            (map.labels.clone(), map.metadata(), map.timings_text())
        }
        Method::Kmeans | Method::Dpc => {
            let baseline = BaselineConfig {
                method: if matches!(method, Method::Kmeans) {
                    BaselineMethod::KMeans
                } else {
                    BaselineMethod::Dpc
                },
                clusters: config.clusters,
                seed,
                k_n: config.k_n,
                sigma0: config.sigma0,
            };
            let start = Instant::now();
            let labels = run_baseline(cube.values(), cube.bands(), &baseline)?;
            let secs = start.elapsed().as_secs_f64();
            let sigma = match config.sigma0 {
                Sigma0::Value(s) => format!("sigma0 = {s}"),
                Sigma0::Percentile(p) => format!("sigma0_percentile = {p}"),
            };
            let meta = match baseline.method {
                BaselineMethod::KMeans => {
                    format!("[config]\nmethod = kmeans\nclusters = {}\nseed = {seed}\n", config.clusters)
                }
                BaselineMethod::Dpc => format!(
                    "[config]\nmethod = dpc\nclusters = {}\nkn = {}\n{sigma}\n",
                    config.clusters, config.k_n
                ),
            };
            (labels, meta, format!("baseline = {secs:.6}\ntotal = {secs:.6}\n"))
        }
    };

    let note = header(metadata.split("\n[representatives]").next().unwrap_or(""));
    let (h, w) = (cube.height(), cube.width());
    write(&out.join("labels.csv"), raster::labels_csv_annotated(w, &labels, &note))?;
    write(&out.join("labels.pgm"), raster::pgm_ascii_annotated(h, w, &labels, &note))?;
    write(&out.join("labels.ppm"), raster::render_ppm_annotated(h, w, &labels, &note))?;
    write(&out.join("metadata.txt"), header(&metadata))?;
    write(&out.join("timings.txt"), &timings)?;
    if let Some(truth) = &truth {
        let (report, alignment) = evaluate(&labels, truth, 0.0)?;
        let mut text = format!(
            "{note}[metrics]\nOA = {:.6}\nAA = {:.6}\nkappa = {:.6}\n",
            report.oa, report.aa, report.kappa
        );
        for (c, p) in report.producers.iter().enumerate() {
            let v = p.map_or("n/a".to_string(), |v| format!("{v:.6}"));
            let _ = writeln!(text, "producer_{} = {v}", truth.class_ids()[c]);
        }
        for (p, c) in alignment.pairs() {
            let c = c.map_or("none".to_string(), |c| truth.class_ids()[c as usize - 1].to_string());
            let _ = writeln!(text, "cluster_{p} -> {c}");
        }
        write(&out.join("metrics.txt"), &text)?;
        println!(
            "OA {:.4}  AA {:.4}  kappa {:.4}",
            report.oa, report.aa, report.kappa
        );
    }
    log::info!("wrote {}", out.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CliResult<()> {
    let gt_grid = raster::read_label_grid(&a.labels)
        .with_context(|| format!("loading labels {}", a.labels.display()))?;
    let truth = GroundTruth::new(gt_grid.height, gt_grid.width, gt_grid.labels)?;
    let mut report = format!("{:<32}{:>10}{:>10}{:>10}\n", "prediction", "OA", "AA", "kappa");
    let mut producers = String::new();
    for path in &a.pred {
        let grid = raster::read_label_grid(path)
            .with_context(|| format!("loading prediction {}", path.display()))?;
        if (grid.height, grid.width) != (truth.height(), truth.width()) {
            return Err(Failure::Runtime(anyhow!(
                "{} is {}x{} but the labels are {}x{}",
                path.display(),
                grid.height,
                grid.width,
                truth.height(),
                truth.width()
            )));
        }
        let (m, _) = evaluate(&grid.labels, &truth, 0.0)
            .with_context(|| format!("scoring {}", path.display()))?;
        let _ = writeln!(
            report,
            "{:<32}{:>10.4}{:>10.4}{:>10.4}",
            path.display().to_string(),
            m.oa,
            m.aa,
            m.kappa
        );
        let per: Vec<String> = m
            .producers
            .iter()
            .map(|p| p.map_or("n/a".to_string(), |v| format!("{v:.4}")))
            .collect();
        let _ = writeln!(producers, "{}: {}", path.display(), per.join(" "));
    }
    let _ = write!(report, "\nproducer's accuracy per class\n{producers}");
    print!("{report}");
    if let Some(out) = &a.out {
        write(out, &report)?;
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> CliResult<()> {
    let (config, extras) = resolve(&a.knobs)?;
    let mut grid = match a.preset {
        Preset::Single => SweepGrid::single(config),
        Preset::Coarse => SweepGrid::coarse(config),
        Preset::Full => SweepGrid::full(config),
    };
    if let Some(path) = &a.grid {
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read grid {}: {e}", path.display())))?;
        grid.apply_kv(&text)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    for p in grid.points() {
        p.validate().map_err(|e| usage(format!("grid point invalid: {e}")))?;
    }
    if grid.is_empty() {
        return Err(usage("sweep grid is empty"));
    }
    let cube_path = a
        .io
        .cube
        .or(extras.cube)
        .ok_or_else(|| usage("--cube is required"))?;
    let labels_path = a
        .io
        .labels
        .or(extras.labels)
        .ok_or_else(|| usage("--labels is required for a sweep"))?;
    let format = cube_format(&a.io.format, &cube_path)?;
    let out = out_dir(&a.io.out, &extras.out)?;
    let cube = read_cube(&cube_path, format)?;
    let truth = read_truth(&labels_path, &cube)?;
    log::info!("sweeping {} configurations", grid.len());
    let report = sweep(&cube, &truth, &grid, a.cache.as_deref())?;
    let mut csv = raster::comment_block(&header(&format!("{} configurations\n[base]\n{}", grid.len(), grid.base.to_kv())));
    csv.push_str(&report.to_csv());
    write(&out.join("sweep.csv"), csv)?;
    let best = header(&report.best_block("S2DL"));
    write(&out.join("best.txt"), &best)?;
    print!("{best}");
    if report.best.is_none() {
        return Err(Failure::Runtime(anyhow!("every configuration failed; see sweep.csv")));
    }
    Ok(())
}

fn cmd_render(a: RenderArgs) -> CliResult<()> {
    let grid = raster::read_label_grid(&a.map)
        .with_context(|| format!("loading {}", a.map.display()))?;
    write(&a.out, raster::render_ppm(grid.height, grid.width, &grid.labels))
}

fn cmd_synth(a: SynthArgs) -> CliResult<()> {
    let (rows, cols) = a
        .layout
        .split_once('x')
        .and_then(|(r, c)| Some((r.trim().parse().ok()?, c.trim().parse().ok()?)))
        .ok_or_else(|| usage(format!("--layout expects ROWSxCOLS, got {:?}", a.layout)))?;
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return Err(usage("--noise must be >= 0"));
    }
    let format = cube_format(&a.format, &a.cube)?;
    let scene = SceneSpec::grid(a.height, a.width, rows, cols, a.bands, a.seed)
        .map_err(|e| usage(e.to_string()))?;
    let (cube, truth) = synth_cube(&scene, a.seed, a.noise)?;
    save_cube(&cube, &a.cube, format).with_context(|| format!("writing {}", a.cube.display()))?;
    write(&a.labels, raster::labels_csv(truth.width(), truth.labels()))?;
    println!(
        "{}x{}x{} cube, {} classes",
        cube.height(),
        cube.width(),
        cube.bands(),
        truth.n_classes()
    );
    Ok(())
}
