use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use endorecon::config::{keys_help, PipelineConfig};
use endorecon::dataset;
use endorecon::error::{Error, Result};
use endorecon::evaluate::evaluate;
use endorecon::formats::binary::decode_descriptors;
use endorecon::formats::{read_file, read_text, text, write_file};
use endorecon::pipeline::{cmd_consistency, cmd_reconstruct, match_queries};
use endorecon::synth::{generate, SynthConfig};

#[derive(Parser)]
#[command(name = "endorecon", version, about = "Depth-map fusion into watertight meshes, with phantom data and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic phantom dataset.
    Synth(SynthArgs),
    /// Fuse a dataset into a mesh.
    #[command(after_help = keys_help())]
    Reconstruct(RunArgs),
    /// Compare a reconstruction with a reference mesh.
    #[command(after_help = keys_help())]
    Evaluate(EvalArgs),
    /// Dense descriptor matching with subpixel refinement.
    Match(MatchArgs),
    /// Reconstruct from two independent frame subsamples and register them.
    #[command(after_help = keys_help())]
    Consistency(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 60)]
    frames: usize,
    #[arg(long, default_value_t = 320)]
    width: u32,
    #[arg(long, default_value_t = 256)]
    height: u32,
    /// Focal length in pixels; the principal point is the image centre.
    #[arg(long, default_value_t = 160.0)]
    focal: f64,
    /// Depth noise standard deviation relative to depth.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 3000)]
    sparse_points: usize,
    /// Per-frame unknown depth scale is exp(U(-j, j)).
    #[arg(long, default_value_t = 0.2)]
    scale_jitter: f64,
    /// Phantom length, mm.
    #[arg(long, default_value_t = 120.0)]
    length: f64,
    /// Total bend of the phantom centreline, radians.
    #[arg(long, default_value_t = 0.5)]
    bend: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Dataset directory (overrides `dataset`).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Output directory (overrides `output`).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Reconstructed mesh (PLY).
    #[arg(long)]
    recon: PathBuf,
    /// Reference mesh (PLY).
    #[arg(long)]
    reference: PathBuf,
    /// Trajectory in the reconstruction frame.
    #[arg(long)]
    trajectory: PathBuf,
    /// Sparse cloud (PLY).
    #[arg(long)]
    cloud: PathBuf,
    /// Output directory for metrics.txt / metrics.json (overrides `output`).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MatchArgs {
    /// Source descriptor map (DESC).
    #[arg(long)]
    source: PathBuf,
    /// Target descriptor map (DESC).
    #[arg(long)]
    target: PathBuf,
    /// Query pixels, one `u v` per line.
    #[arg(long)]
    queries: PathBuf,
    /// Output file, one `u v u' v' score` per line.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 8)]
    refine_factor: u32,
}

fn load_config(args: &ConfigArgs, dataset: Option<&Path>, output: Option<&Path>) -> Result<PipelineConfig> {
    let text = args.config.as_deref().map(read_text).transpose()?;
    let mut overrides = args.overrides.clone();
    if let Some(d) = dataset {
        overrides.push(format!("dataset={}", d.display()));
    }
    if let Some(o) = output {
        overrides.push(format!("output={}", o.display()));
    }
    PipelineConfig::load(text.as_deref(), &overrides)
}

fn require(p: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
    p.clone().ok_or_else(|| Error::Usage(format!("`{key}` is not set (config key or --{key})")))
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        frames: a.frames,
        width: a.width,
        height: a.height,
        focal: a.focal,
        noise: a.noise,
        sparse_points: a.sparse_points,
        scale_jitter: a.scale_jitter,
        length: a.length,
        bend_angle: a.bend,
        seed: a.seed,
        threads: None,
    };
    let s = generate(&cfg)?;
    dataset::save(&a.out, &s.dataset, Some(&s.mesh))?;
    write_file(&a.out.join("synth.txt"), cfg.to_text().as_bytes())?;
    eprintln!("wrote {} frames and {} landmarks to {}", s.dataset.frames.len(), s.dataset.cloud.len(), a.out.display());
    Ok(())
}

fn reconstruct(a: RunArgs, consistency: bool) -> Result<()> {
    let cfg = load_config(&a.config, a.dataset.as_deref(), a.output.as_deref())?;
    let (dir, out) = (require(&cfg.dataset, "dataset")?, require(&cfg.output, "output")?);
    let data = dataset::load(&dir)?;
    if consistency {
        let c = cmd_consistency(&data, &cfg, &out)?;
        eprint!("{}", c.metrics.to_text());
    } else {
        let r = cmd_reconstruct(&data, &cfg, &out)?;
        eprintln!(
            "{} vertices, {} triangles, watertight: {}",
            r.mesh.vertices.len(),
            r.mesh.triangles.len(),
            r.watertight.is_watertight
        );
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let cfg = load_config(&a.config, None, a.output.as_deref())?;
    let out = require(&cfg.output, "output")?;
    let recon = dataset::read_mesh(&a.recon)?;
    let reference = dataset::read_mesh(&a.reference)?;
    let poses: Vec<_> = dataset::read_trajectory(&a.trajectory)?.into_iter().map(|(_, p)| p).collect();
    let cloud = dataset::read_cloud(&a.cloud)?;
    let ev = evaluate(&recon, &reference, &poses, &cloud, &cfg)?;
    endorecon::pipeline::echo_config(&out, &cfg)?;
    ev.metrics.write(&out, "metrics")?;
    print!("{}", ev.metrics.to_text());
    ev.sections.map(|_| ()).map_err(Into::into)
}

fn matches(a: MatchArgs) -> Result<()> {
    if a.refine_factor == 0 {
        return Err(Error::Usage("--refine-factor must be positive".into()));
    }
    let load = |p: &Path| decode_descriptors(&read_file(p)?).map_err(|e| e.at(p));
    let (source, target) = (load(&a.source)?, load(&a.target)?);
    let queries = text::read_queries(&read_text(&a.queries)?).map_err(|e| e.at(&a.queries))?;
    let found = match_queries(&source, &target, &queries, a.refine_factor)?;
    write_file(&a.output, text::write_matches(&found).as_bytes())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Reconstruct(a) => reconstruct(a, false),
        Command::Evaluate(a) => eval(a),
        Command::Match(a) => matches(a),
        Command::Consistency(a) => reconstruct(a, true),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
