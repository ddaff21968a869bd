use clap::Args;

use loopsurro::error::Result;
use loopsurro::multimodel::load_bundle;
use loopsurro::simulate::{benchmark, save_benchmark, SimConfig};

use super::Context;
use crate::manifest::{manifest_path, RunManifest};

#[derive(Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub problem: String,
    /// Bundle directories to time against the classical baseline.
    #[arg(long)]
    pub bundle: Vec<std::path::PathBuf>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub fallback_atol: Option<f64>,
    #[arg(long)]
    pub fallback_rtol: Option<f64>,
    #[arg(long, default_value = "benchmark.csv")]
    pub out: String,
}

pub fn run(ctx: &Context, args: BenchmarkArgs) -> Result<()> {
    let problem = super::load_problem(&args.problem)?;
    let repeats = ctx.resolve(args.repeats, "benchmark.repeats", 5)?;
    let steps = ctx.resolve(args.steps, "benchmark.steps", 200)?;
    let fb_atol = ctx.resolve(args.fallback_atol, "benchmark.fallback_atol", 1e-6)?;
    let fb_rtol = ctx.resolve(args.fallback_rtol, "benchmark.fallback_rtol", 1e-4)?;
    let fallback_tol = super::tolerance(fb_atol, fb_rtol, 60)?;
    let config = SimConfig::for_problem(&problem, steps)?;

    let bundles: Vec<_> = args
        .bundle
        .iter()
        .map(|dir| load_bundle(dir).map(|b| (dir, b)))
        .collect::<Result<_>>()?;
    let variants: Vec<_> = bundles
        .iter()
        .map(|(dir, bundle)| {
            let name = dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "surrogate".to_string());
            (name, bundle, fallback_tol)
        })
        .collect();

    let report = benchmark(&problem, &variants, &config, repeats)?;

    let out = ctx.out_path(&args.out)?;
    let mut manifest = RunManifest::new("benchmark", ctx.seed);
    manifest.set("problem", &args.problem);
    manifest.set("repeats", repeats);
    manifest.set("steps", steps);
    manifest.set("variants", variants.len() + 1);
    manifest.set("out", out.display());
    let hash = manifest.save(&manifest_path(&out))?;
    save_benchmark(&report, &out, &hash)?;

    for variant in report.variants() {
        println!(
            "{variant}: mean wall {:.3} ms, mean Newton iterations {:.1}",
            report.mean_wall(&variant).unwrap().as_secs_f64() * 1e3,
            report.mean_iterations(&variant).unwrap()
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
