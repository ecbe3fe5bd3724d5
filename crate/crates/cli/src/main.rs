use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Spectral fusion attention, noise initialization and diagnostics for video latents.
#[derive(Parser, Debug)]
#[command(name = "spfu", version, arg_required_else_help = false)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a latent from a scene config.
    Scene(SceneArgs),
    /// Two-branch spectral blend of precomputed global and local latents.
    Blend(BlendArgs),
    /// Multi-band fusion attention on a latent, given a plan config.
    Fuse(FuseArgs),
    /// Initial noise with a shuffled consistency base.
    Specmix(SpecmixArgs),
    /// Band-wise relative SNR of an extended latent against a reference.
    Analyze(AnalyzeArgs),
    /// Frame-level attention map and its diagonality.
    Attnmap(AttnmapArgs),
    /// Run every built-in invariant check.
    Selftest,
}

#[derive(Args, Debug)]
struct SceneArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Mode {
    Temporal,
    Radial,
}

impl From<Mode> for spfu_core::DomainMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Temporal => spfu_core::DomainMode::Temporal,
            Mode::Radial => spfu_core::DomainMode::Radial,
        }
    }
}

#[derive(Args, Debug)]
struct BlendArgs {
    #[arg(long = "global")]
    global: PathBuf,
    #[arg(long)]
    local: PathBuf,
    /// Low-pass stop frequency in units of pi.
    #[arg(long, default_value_t = spfu_core::fusion::DEFAULT_D0)]
    d0: f64,
    #[arg(long, value_enum, default_value_t = Mode::Radial)]
    mode: Mode,
    #[arg(long)]
    out: PathBuf,
}

/// Per-block projection weights: seeded Gaussian or identity.
#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct WeightArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    identity: bool,
}

impl WeightArgs {
    fn source(&self) -> spfu_core::WeightSource {
        match self.seed {
            Some(seed) => spfu_core::WeightSource::Random { seed },
            None => spfu_core::WeightSource::Identity,
        }
    }
}

#[derive(Args, Debug)]
struct FuseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    #[command(flatten)]
    weights: WeightArgs,
    #[arg(long, default_value_t = 1)]
    depth: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Domain {
    Spatial,
    Spacetime,
}

#[derive(Args, Debug)]
struct SpecmixArgs {
    #[arg(long)]
    frames: usize,
    #[arg(long)]
    t_alpha: usize,
    /// Seed for all three random roles unless overridden below.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    seed_base: Option<u64>,
    #[arg(long)]
    seed_res: Option<u64>,
    #[arg(long)]
    seed_perm: Option<u64>,
    #[arg(long, default_value_t = 8)]
    channels: usize,
    #[arg(long, default_value_t = 8)]
    height: usize,
    #[arg(long, default_value_t = 8)]
    width: usize,
    #[arg(long, value_enum, default_value_t = Domain::Spatial)]
    mix_domain: Domain,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    ext: PathBuf,
    /// Number of equal-width bands over [0, pi].
    #[arg(long, default_value_t = spfu_core::analysis::DEFAULT_BAND_COUNT, conflicts_with = "edges")]
    bands: usize,
    /// Explicit interior edges in units of pi, comma separated.
    #[arg(long, value_delimiter = ',')]
    edges: Option<Vec<f64>>,
    #[arg(long, default_value_t = spfu_core::analysis::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, value_enum, default_value_t = Mode::Temporal)]
    mode: Mode,
    /// CSV report path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Keys {
    Local,
    Global,
    Sparse,
}

#[derive(Args, Debug)]
struct AttnmapArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    keys: Keys,
    /// Window span in frames, for local keys.
    #[arg(long, required_if_eq("keys", "local"))]
    span: Option<usize>,
    /// Share of frames used as keys, for sparse keys.
    #[arg(long, default_value_t = spfu_core::fusion::SPARSE_KEY_FRACTION)]
    fraction: f64,
    /// Number of attention calls to average, each with its own projections.
    #[arg(long, default_value_t = 1)]
    calls: usize,
    #[command(flatten)]
    weights: WeightArgs,
    /// CSV map path.
    #[arg(long)]
    out: PathBuf,
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("SPFU_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("SPFU_THREADS={raw:?} is not a thread count"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Scene(a) => commands::scene(&a.config, &a.out),
        Command::Blend(a) => commands::blend(&a.global, &a.local, a.d0, a.mode.into(), &a.out),
        Command::Fuse(a) => commands::fuse(&a.input, &a.plan, a.weights.source(), a.depth, &a.out),
        Command::Specmix(a) => {
            let mut p = spfu_core::SpecMixParams::new(a.frames, a.t_alpha, a.seed)?;
            p.seed_base = a.seed_base.unwrap_or(a.seed);
            p.seed_res = a.seed_res.unwrap_or(a.seed);
            p.seed_perm = a.seed_perm.unwrap_or(a.seed);
            p.mix_domain = match a.mix_domain {
                Domain::Spatial => spfu_core::MixDomain::Spatial,
                Domain::Spacetime => spfu_core::MixDomain::SpaceTime,
            };
            let spatial = spfu_core::SpatialShape::new(a.channels, a.height, a.width);
            commands::specmix(&p, spatial, &a.out)
        }
        Command::Analyze(a) => {
            let edges = match a.edges {
                Some(e) => e,
                None => spfu_core::analysis::uniform_edges(a.bands)?,
            };
            commands::analyze(&a.reference, &a.ext, &edges, a.threshold, a.mode.into(), &a.out)
        }
        Command::Attnmap(a) => {
            if a.calls == 0 {
                bail!("--calls must be at least 1");
            }
            let keys = match a.keys {
                Keys::Local => commands::MapKeys::Window(a.span.expect("required by clap")),
                Keys::Global => commands::MapKeys::All,
                Keys::Sparse => commands::MapKeys::Fraction(a.fraction),
            };
            commands::attnmap(&a.input, keys, a.calls, a.weights.source(), &a.out)
        }
        Command::Selftest => commands::selftest(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
