use std::time::Instant;

use clap::Args;

use loopsurro::error::{Error, Result};
use loopsurro::sampling::{
    generate_labeled, lhs_sample, save_dataset, sobol_sample, Dataset, InputBounds, SampleMethod,
};

use super::Context;
use crate::manifest::{manifest_path, RunManifest};

#[derive(Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub problem: String,
    /// Bounds file from `profile`; defaults to the problem's built-in bounds.
    #[arg(long)]
    pub bounds: Option<std::path::PathBuf>,
    /// Number of samples.
    #[arg(long)]
    pub n: usize,
    /// sobol or lhs.
    #[arg(long, default_value = "sobol")]
    pub method: String,
    /// Leading Sobol points to drop (the first is the all-zeros corner).
    #[arg(long)]
    pub skip: Option<usize>,
    /// Solve the loop per sample to attach labels.
    #[arg(long)]
    pub labeled: bool,
    /// Newton seed redraws per sample during labeling.
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub label_atol: Option<f64>,
    #[arg(long)]
    pub label_max_iter: Option<usize>,
    #[arg(long, default_value = "dataset.csv")]
    pub out: String,
}

pub fn run(ctx: &Context, args: SampleArgs) -> Result<()> {
    let problem = super::load_problem(&args.problem)?;
    let bounds = match &args.bounds {
        Some(path) => {
            let (bounds_problem, bounds) = super::load_bounds(path)?;
            if bounds_problem != args.problem {
                return Err(Error::Consistency(format!(
                    "bounds file {} was profiled for `{bounds_problem}`, not `{}`",
                    path.display(),
                    args.problem
                )));
            }
            bounds
        }
        None => InputBounds::new(
            problem
                .system
                .input_bounds()
                .ok_or_else(|| {
                    Error::Config(format!(
                        "problem `{}` declares no static bounds; run profile first",
                        args.problem
                    ))
                })?
                .to_vec(),
        )?,
    };

    let skip = ctx.resolve(args.skip, "sample.skip", 1)?;
    let start = Instant::now();
    let (inputs, method) = match args.method.as_str() {
        "sobol" => (sobol_sample(&bounds, args.n, skip)?, SampleMethod::Sobol),
        "lhs" => (lhs_sample(&bounds, args.n, ctx.seed)?, SampleMethod::Lhs),
        other => return Err(Error::Config(format!("unknown sampling method `{other}`"))),
    };
    let sampling_time = start.elapsed();

    let (dataset, failed) = if args.labeled {
        let atol = ctx.resolve(args.label_atol, "sample.label_atol", 1e-10)?;
        let max_iter = ctx.resolve(args.label_max_iter, "sample.label_max_iter", 60)?;
        let restarts = ctx.resolve(args.restarts, "sample.restarts", 4)?;
        let tol = super::tolerance(atol, atol, max_iter)?;
        let (mut dataset, failed) =
            generate_labeled(&problem.system, &inputs, &tol, restarts, ctx.seed)?;
        dataset.method = method;
        (dataset, failed)
    } else {
        (Dataset::inputs_only(inputs, method, sampling_time), 0)
    };

    let out = ctx.out_path(&args.out)?;
    save_dataset(&dataset, &out, ctx.seed)?;

    let mut manifest = RunManifest::new("sample", ctx.seed);
    manifest.set("problem", &args.problem);
    manifest.set("n", args.n);
    manifest.set("method", dataset.method.tag());
    manifest.set("skip", skip);
    manifest.set("labeled", args.labeled);
    manifest.set("kept", dataset.len());
    manifest.set("failed", failed);
    manifest.set("out", out.display());
    manifest.save(&manifest_path(&out))?;
    println!(
        "wrote {} ({} samples, {} labeling failures, {:.3} ms)",
        out.display(),
        dataset.len(),
        failed,
        dataset.generation_time.as_secs_f64() * 1e3
    );
    Ok(())
}
