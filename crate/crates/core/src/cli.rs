//! The `rop` command line: `place`, `synth`, `eval`, `dump-trees` and `config`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;

use crate::atbt::write_tree_dump;
use crate::config::RunConfig;
use crate::error::Error;
use crate::evalx::{match_objects, report};
use crate::ingest::{load_inputs, BundlePaths, CategoryRegistry};
use crate::placer::{read_placed, run_bundle, run_intersection, write_diagnostics, write_placed};
use crate::synth::{render_bundle, standard_fixtures, write_bundle, Layout};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_EMPTY: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "rop", version, about = "Place traffic lights and signs at road intersections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the pipeline on an input bundle and write placed objects.
    Place(PlaceArgs),
    /// Render synthetic bundles with ground truth.
    Synth(SynthArgs),
    /// Score placed objects against reference objects.
    Eval(EvalArgs),
    /// Write the per-image trees of an input bundle as JSON.
    DumpTrees(DumpArgs),
    /// Print the effective configuration.
    Config(ConfigArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for per-intersection parallelism.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct InputArgs {
    #[arg(long)]
    images: PathBuf,
    /// Directory of `<image_id>.pgm` label maps.
    #[arg(long)]
    masks: PathBuf,
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    footprints: PathBuf,
    #[arg(long)]
    buffers: PathBuf,
    /// Radius for buffers that do not state one.
    #[arg(long)]
    buffer_radius: Option<f64>,
}

impl InputArgs {
    fn paths(&self) -> BundlePaths {
        BundlePaths {
            images: self.images.clone(),
            masks: self.masks.clone(),
            detections: self.detections.clone(),
            footprints: self.footprints.clone(),
            buffers: self.buffers.clone(),
        }
    }
}

#[derive(Debug, Args)]
struct PlaceArgs {
    #[command(flatten)]
    inputs: InputArgs,
    /// Output GeoJSON of placed objects.
    #[arg(long)]
    out: PathBuf,
    /// Diagnostics as JSON lines; defaults to `<out>.diagnostics.jsonl`.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// JSON layout, a single object or an array.
    #[arg(long, conflicts_with_all = ["fixtures", "seed"], required_unless_present = "fixtures")]
    layout: Option<PathBuf>,
    /// Number of seeded fixtures to generate.
    #[arg(long)]
    fixtures: Option<usize>,
    #[arg(long, requires = "fixtures")]
    seed: Option<u64>,
    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Report JSON; the table always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fail with exit 1 when overall completeness is lower.
    #[arg(long)]
    min_completeness: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[command(flatten)]
    inputs: InputArgs,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    #[arg(long)]
    show: bool,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Failure of one command, already mapped to its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: e.to_string(),
        }
    }

    fn output(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_FAILED,
            message: e.to_string(),
        }
    }
}

type Outcome = std::result::Result<i32, Failure>;

/// Parse `args` (program name first) and run the command. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Place(a) => place(a),
        Command::Synth(a) => synth(a),
        Command::Eval(a) => eval(a),
        Command::DumpTrees(a) => dump_trees(a),
        Command::Config(a) => show_config(a),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("rop: {}", f.message);
            f.code
        }
    }
}

fn load_config(path: Option<&Path>) -> std::result::Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::load(p).map_err(Failure::input),
        None => Ok(RunConfig::default()),
    }
}

fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> std::result::Result<R, Failure> {
    match jobs {
        Some(0) => Err(Failure {
            code: EXIT_USAGE,
            message: "--jobs must be at least 1".into(),
        }),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(Failure::output)?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn load_bundle(inputs: &InputArgs, cfg: &mut RunConfig) -> std::result::Result<crate::ingest::Bundle, Failure> {
    if let Some(r) = inputs.buffer_radius {
        cfg.buffer_radius_m = r;
        cfg.validate().map_err(Failure::input)?;
    }
    load_inputs(&inputs.paths(), cfg.buffer_radius_m).map_err(Failure::input)
}

fn place(a: PlaceArgs) -> Outcome {
    let mut cfg = load_config(a.common.config.as_deref())?;
    let bundle = load_bundle(&a.inputs, &mut cfg)?;
    let registry = CategoryRegistry::default();
    let (placed, diags) = with_jobs(a.common.jobs, || run_bundle(&bundle, &registry, &cfg))?
        .map_err(Failure::input)?;
    write_placed(&a.out, &placed).map_err(Failure::output)?;
    let diag_path = a
        .diagnostics
        .unwrap_or_else(|| PathBuf::from(format!("{}.diagnostics.jsonl", a.out.display())));
    write_diagnostics(&diag_path, &diags).map_err(Failure::output)?;
    info!("placed {} objects, {} diagnostics", placed.len(), diags.len());
    if placed.is_empty() {
        warn!("no objects placed");
        return Ok(EXIT_EMPTY);
    }
    Ok(EXIT_OK)
}

fn synth(a: SynthArgs) -> Outcome {
    let (layouts, seed) = match (&a.layout, a.fixtures) {
        (Some(p), _) => (Layout::read(p).map_err(Failure::input)?, None),
        (None, Some(n)) => {
            let cfg = load_config(a.common.config.as_deref())?;
            let seed = a.seed.unwrap_or(cfg.seed);
            (standard_fixtures(n, seed), Some(seed))
        }
        (None, None) => unreachable!("clap requires one of --layout and --fixtures"),
    };
    let rendered = with_jobs(a.common.jobs, || {
        layouts.par_iter().map(render_bundle).collect::<crate::Result<Vec<_>>>()
    })?
    .map_err(Failure::input)?;
    write_bundle(&a.out, &rendered, seed).map_err(Failure::output)?;
    info!("rendered {} intersections into {}", rendered.len(), a.out.display());
    Ok(EXIT_OK)
}

fn eval(a: EvalArgs) -> Outcome {
    let cfg = load_config(a.config.as_deref())?;
    let radius = a.radius.unwrap_or(cfg.eval.match_radius_m);
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Failure::input(Error::Config("match radius must be > 0".into())));
    }
    let pred = read_placed(&a.pred).map_err(Failure::input)?;
    let refs = read_placed(&a.reference).map_err(Failure::input)?;
    let rep = report(&match_objects(&pred, &refs, radius), &pred, &refs);
    print!("{}", rep.to_table());
    if let Some(out) = &a.out {
        std::fs::write(out, rep.to_json()).map_err(|e| Failure::output(Error::io(out, e)))?;
    }
    if let Some(min) = a.min_completeness {
        match rep.overall.completeness {
            Some(c) if c >= min => {}
            Some(c) => {
                eprintln!("rop: completeness {c:.4} below {min}");
                return Ok(EXIT_FAILED);
            }
            None => {
                eprintln!("rop: completeness undefined without reference objects");
                return Ok(EXIT_FAILED);
            }
        }
    }
    Ok(EXIT_OK)
}

fn dump_trees(a: DumpArgs) -> Outcome {
    let mut cfg = load_config(a.common.config.as_deref())?;
    let bundle = load_bundle(&a.inputs, &mut cfg)?;
    let registry = CategoryRegistry::default();
    let outputs = with_jobs(a.common.jobs, || {
        bundle
            .buffers
            .par_iter()
            .map(|b| run_intersection(&bundle, b, &registry, &cfg))
            .collect::<crate::Result<Vec<_>>>()
    })?
    .map_err(Failure::input)?;
    let trees: Vec<_> = outputs.into_iter().flat_map(|o| o.trees).collect();
    write_tree_dump(&a.out, &trees).map_err(Failure::output)?;
    Ok(EXIT_OK)
}

fn show_config(a: ConfigArgs) -> Outcome {
    let cfg = load_config(a.config.as_deref())?;
    if !a.show {
        return Err(Failure {
            code: EXIT_USAGE,
            message: "config: nothing to do (try --show)".into(),
        });
    }
    print!("{}", cfg.to_toml());
    Ok(EXIT_OK)
}
