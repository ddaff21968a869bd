use clap::Args;

use loopsurro::error::{Error, Result};
use loopsurro::multimodel::load_bundle;
use loopsurro::simulate::{save_trajectory, simulate_classical, simulate_surrogate, SimConfig};

use super::Context;
use crate::manifest::{manifest_path, RunManifest};

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub problem: String,
    /// classical | surrogate
    #[arg(long, default_value = "classical")]
    pub mode: String,
    /// Bundle directory from `train` (surrogate mode).
    #[arg(long)]
    pub bundle: Option<std::path::PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub atol: Option<f64>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Residual bound for accepting a surrogate prediction.
    #[arg(long)]
    pub fallback_atol: Option<f64>,
    #[arg(long)]
    pub fallback_rtol: Option<f64>,
    /// Seed each Newton solve from the problem's fixed guess instead of the
    /// previous step.
    #[arg(long)]
    pub cold_start: bool,
    #[arg(long, default_value = "trajectory.csv")]
    pub out: String,
}

pub fn run(ctx: &Context, args: SimulateArgs) -> Result<()> {
    let problem = super::load_problem(&args.problem)?;
    let steps = ctx.resolve(args.steps, "simulate.steps", 200)?;
    let atol = ctx.resolve(args.atol, "simulate.atol", 1e-10)?;
    let rtol = ctx.resolve(args.rtol, "simulate.rtol", 1e-8)?;
    let max_iter = ctx.resolve(args.max_iter, "simulate.max_iter", 60)?;

    let mut config = SimConfig::for_problem(&problem, steps)?;
    config.newton_tol = super::tolerance(atol, rtol, max_iter)?;
    config.warm_start = !args.cold_start;

    let trajectory = match args.mode.as_str() {
        "classical" => simulate_classical(&problem, &config)?,
        "surrogate" => {
            let dir = args.bundle.as_ref().ok_or_else(|| {
                Error::Config("surrogate mode needs --bundle <dir>".into())
            })?;
            let bundle = load_bundle(dir)?;
            let fb_atol = ctx.resolve(args.fallback_atol, "simulate.fallback_atol", 1e-6)?;
            let fb_rtol = ctx.resolve(args.fallback_rtol, "simulate.fallback_rtol", 1e-4)?;
            let fallback_tol = super::tolerance(fb_atol, fb_rtol, max_iter)?;
            simulate_surrogate(&problem, &bundle, &fallback_tol, &config)?
        }
        other => return Err(Error::Config(format!("unknown simulation mode `{other}`"))),
    };

    let out = ctx.out_path(&args.out)?;
    let mut manifest = RunManifest::new("simulate", ctx.seed);
    manifest.set("problem", &args.problem);
    manifest.set("mode", &args.mode);
    manifest.set("steps", steps);
    manifest.set("warm_start", config.warm_start);
    if let Some(bundle) = &args.bundle {
        manifest.set("bundle", bundle.display());
    }
    manifest.set("out", out.display());
    let hash = manifest.save(&manifest_path(&out))?;
    save_trajectory(&trajectory, &out, &hash)?;
    println!(
        "wrote {} ({} records, fallback rate {:.3}, {} Newton iterations)",
        out.display(),
        trajectory.times.len(),
        trajectory.fallback_rate,
        trajectory.total_newton_iterations()
    );
    Ok(())
}
