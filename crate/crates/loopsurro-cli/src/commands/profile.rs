use clap::Args;

use loopsurro::error::Result;
use loopsurro::problems::Driver;
use loopsurro::sampling::{profile_bounds, InputBounds};
use loopsurro::simulate::{simulate_classical, SimConfig};

use super::Context;
use crate::manifest::{manifest_path, RunManifest};

#[derive(Args)]
pub struct ProfileArgs {
    /// Problem name (see the problem registry).
    #[arg(long)]
    pub problem: String,
    #[arg(long)]
    pub t0: f64,
    #[arg(long)]
    pub t1: f64,
    /// Grid points for the profiling run.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Symmetric widening applied to the recorded bounds.
    #[arg(long)]
    pub margin: Option<f64>,
    /// Output file name inside the out directory.
    #[arg(long, default_value = "bounds.txt")]
    pub out: String,
}

pub fn run(ctx: &Context, args: ProfileArgs) -> Result<()> {
    let steps = ctx.resolve(args.steps, "profile.steps", 1000)?;
    let margin = ctx.resolve(args.margin, "profile.margin", 0.0)?;
    let problem = super::load_problem(&args.problem)?;

    let bounds = match &problem.driver {
        Driver::Trajectory(f) => {
            profile_bounds(&problem.system, f, (args.t0, args.t1), steps)?
        }
        Driver::Ode { .. } => {
            // No closed-form input path: profile from one classical run.
            let mut config = SimConfig::new((args.t0, args.t1), steps.max(2) - 1)?;
            config.newton_tol = Default::default();
            let trajectory = simulate_classical(&problem, &config)?;
            let mut dims = vec![(f64::INFINITY, f64::NEG_INFINITY); problem.system.n_in()];
            for j in 0..trajectory.times.len() {
                for (d, &v) in trajectory.x_values.column(j).iter().enumerate() {
                    dims[d].0 = dims[d].0.min(v);
                    dims[d].1 = dims[d].1.max(v);
                }
            }
            InputBounds::new(dims)?
        }
    }
    .with_margin(margin);

    let out = ctx.out_path(&args.out)?;
    super::save_bounds(&out, &args.problem, &bounds)?;

    let mut manifest = RunManifest::new("profile", ctx.seed);
    manifest.set("problem", &args.problem);
    manifest.set("t0", args.t0);
    manifest.set("t1", args.t1);
    manifest.set("steps", steps);
    manifest.set("margin", margin);
    manifest.set("out", out.display());
    manifest.save(&manifest_path(&out))?;
    println!("wrote {}", out.display());
    Ok(())
}
