use clap::Args;

use loopsurro::error::{Error, Result};
use loopsurro::multimodel::{train_per_branch, train_per_cluster, SurrogateBundle};
use loopsurro::nn::{init_network, Activation, LrSchedule};
use loopsurro::sampling::{load_dataset, Dataset, SampleMethod};
use loopsurro::simulate::{simulate_classical, SimConfig};
use loopsurro::training::{
    save_report, train, two_phase_train, LossMode, TrainConfig, TrainReport,
};

use super::Context;
use crate::manifest::{manifest_path, RunManifest};

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub problem: String,
    /// Dataset CSV from `sample`.
    #[arg(long)]
    pub data: std::path::PathBuf,
    /// residual | supervised | semi:<lambda> | twophase:<switch-epoch>
    #[arg(long, default_value = "residual")]
    pub mode: String,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Hidden layer sizes, comma separated.
    #[arg(long, default_value = "160,160")]
    pub layers: String,
    /// Train one network per output-space cluster (needs labels).
    #[arg(long)]
    pub cluster_k: Option<usize>,
    /// Train one network per residual branch.
    #[arg(long)]
    pub per_branch: bool,
    /// Clusters used to pick two-phase guidance labels.
    #[arg(long)]
    pub guidance_k: Option<usize>,
    /// Which guidance cluster steers phase one.
    #[arg(long)]
    pub guidance_cluster: Option<usize>,
    /// Steps of the classical validation simulation (0 disables).
    #[arg(long)]
    pub val_steps: Option<usize>,
    /// Monitor cadence in epochs (0 disables).
    #[arg(long)]
    pub metric_every: Option<usize>,
    /// Output directory name for the bundle and report.
    #[arg(long, default_value = "model")]
    pub out: String,
}

fn parse_mode(raw: &str) -> Result<LossMode> {
    if raw == "residual" {
        return Ok(LossMode::Residual);
    }
    if raw == "supervised" {
        return Ok(LossMode::Supervised);
    }
    if let Some(rest) = raw.strip_prefix("semi:") {
        let lambda: f64 = rest
            .parse()
            .map_err(|_| Error::Config(format!("bad lambda in mode `{raw}`")))?;
        return Ok(LossMode::SemiSupervised { lambda });
    }
    if let Some(rest) = raw.strip_prefix("twophase:") {
        let switch_epoch: usize = rest
            .parse()
            .map_err(|_| Error::Config(format!("bad switch epoch in mode `{raw}`")))?;
        return Ok(LossMode::TwoPhase { switch_epoch });
    }
    Err(Error::Config(format!("unknown training mode `{raw}`")))
}

fn parse_layers(raw: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad layer size `{s}`")))
        })
        .collect()
}

pub fn run(ctx: &Context, args: TrainArgs) -> Result<()> {
    let problem = super::load_problem(&args.problem)?;
    super::check_problem_consistency(&args.data, &args.problem)?;
    let dataset = load_dataset(&args.data)?;
    if dataset.inputs.rows() != problem.system.n_in() {
        return Err(Error::Consistency(format!(
            "dataset has {} input dimensions, `{}` expects {}",
            dataset.inputs.rows(),
            args.problem,
            problem.system.n_in()
        )));
    }

    let loss_mode = parse_mode(&args.mode)?;
    if matches!(
        loss_mode,
        LossMode::Supervised | LossMode::SemiSupervised { .. } | LossMode::TwoPhase { .. }
    ) && dataset.labels.is_none()
        && !args.per_branch
    {
        return Err(Error::Consistency(format!(
            "mode `{}` needs a labeled dataset but {} carries no labels",
            args.mode,
            args.data.display()
        )));
    }

    let epochs = ctx.resolve(args.epochs, "train.epochs", 1000)?;
    let batch = ctx.resolve(args.batch, "train.batch", 128)?;
    let lr = ctx.resolve(args.lr, "train.lr", 8e-4)?;
    let metric_every = ctx.resolve(args.metric_every, "train.metric_every", 50)?;
    let hidden = parse_layers(&args.layers)?;
    let mut layer_sizes = vec![problem.system.net_inputs().len()];
    layer_sizes.extend(&hidden);
    layer_sizes.push(problem.system.n_out());

    let schedule = LrSchedule::new(lr, epochs.max(1))?;
    let mut config = TrainConfig::new(epochs, schedule, loss_mode.clone(), ctx.seed);
    config.batch_size = batch;
    config.metric_every = metric_every;

    // Validation set: one classical simulation of the reference model.
    let val_steps = ctx.resolve(args.val_steps, "train.val_steps", 200)?;
    let validation = if val_steps > 0 {
        let sim = SimConfig::for_problem(&problem, val_steps)?;
        let reference = simulate_classical(&problem, &sim)?;
        Some(Dataset {
            inputs: reference.x_values,
            labels: Some(reference.y_values),
            generation_time: std::time::Duration::ZERO,
            method: SampleMethod::Trajectory,
        })
    } else {
        None
    };

    let out_dir = ctx.out_path(&args.out)?;
    std::fs::create_dir_all(&out_dir)?;

    let (bundle, reports): (SurrogateBundle, Vec<TrainReport>) = if args.per_branch {
        if problem.branches.is_none() {
            return Err(Error::Config(format!(
                "problem `{}` has no branches to train per branch",
                args.problem
            )));
        }
        train_per_branch(&problem, &dataset, &layer_sizes, &config)?
    } else if let Some(k) = args.cluster_k {
        train_per_cluster(&problem, &dataset, k, &layer_sizes, &config)?
    } else {
        let net = init_network(&layer_sizes, Activation::ReLU, ctx.seed)?;
        let (trained, report) = match &loss_mode {
            LossMode::TwoPhase { .. } => {
                let guidance = guidance_subset(
                    &dataset,
                    ctx.resolve(args.guidance_k, "train.guidance_k", 2)?,
                    ctx.resolve(args.guidance_cluster, "train.guidance_cluster", 0)?,
                    ctx.seed,
                )?;
                two_phase_train(&problem.system, &guidance, &dataset, net, &config)?
            }
            _ => train(&problem.system, &dataset, validation.as_ref(), net, &config)?,
        };
        (SurrogateBundle::single(trained, problem.system.name()), vec![report])
    };

    loopsurro::multimodel::save_bundle(&bundle, &out_dir.join("bundle"))?;
    for (i, report) in reports.iter().enumerate() {
        let name = if reports.len() == 1 {
            "report.csv".to_string()
        } else {
            format!("report{i}.csv")
        };
        save_report(report, &out_dir.join(name))?;
    }

    let mut manifest = RunManifest::new("train", ctx.seed);
    manifest.set("problem", &args.problem);
    manifest.set("data", args.data.display());
    manifest.set("mode", &args.mode);
    manifest.set("epochs", epochs);
    manifest.set("batch", batch);
    manifest.set("lr", loopsurro::io::format_f64(lr));
    manifest.set("layers", &args.layers);
    manifest.set("networks", bundle.networks.len());
    manifest.set(
        "final_loss",
        loopsurro::io::format_f64(reports.last().map_or(f64::NAN, |r| r.final_train_loss)),
    );
    manifest.set("out", out_dir.display());
    manifest.save(&manifest_path(&out_dir))?;

    for (i, report) in reports.iter().enumerate() {
        println!(
            "network {i}: {} epochs, final loss {:.6e}, stop {:?}",
            report.epochs_run, report.final_train_loss, report.stop_reason
        );
    }
    println!("wrote {}", out_dir.display());
    Ok(())
}

/// Phase-one guidance for single-model two-phase training: the samples whose
/// labels fall in one k-means cluster of the label space.
fn guidance_subset(dataset: &Dataset, k: usize, cluster: usize, seed: u64) -> Result<Dataset> {
    let labels = dataset
        .labels
        .as_ref()
        .ok_or_else(|| Error::Config("two-phase guidance needs a labeled dataset".into()))?;
    if cluster >= k {
        return Err(Error::Config(format!(
            "guidance cluster {cluster} out of range for k = {k}"
        )));
    }
    let model = loopsurro::multimodel::kmeans(labels, k, seed, 200)?;
    let members: Vec<usize> = (0..dataset.len())
        .filter(|&j| model.assignments[j] == cluster)
        .collect();
    if members.is_empty() {
        return Err(Error::Config(format!("guidance cluster {cluster} is empty")));
    }
    Ok(Dataset {
        inputs: dataset.inputs.select_columns(&members),
        labels: Some(labels.select_columns(&members)),
        generation_time: std::time::Duration::ZERO,
        method: dataset.method,
    })
}
