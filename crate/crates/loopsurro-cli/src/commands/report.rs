use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;

use loopsurro::error::{Error, Result};
use loopsurro::io::format_f64;
use loopsurro::matrix::Matrix;
use loopsurro::multimodel::pca_project_2d;
use loopsurro::nn::{forward, load_network};
use loopsurro::sampling::load_dataset;

use super::Context;
use crate::manifest::{manifest_path, RunManifest};

#[derive(Args)]
pub struct ReportArgs {
    /// Training report CSVs; emitted as loss-curve plot data.
    #[arg(long)]
    pub train: Vec<PathBuf>,
    /// Benchmark CSVs; aggregated into the summary table.
    #[arg(long)]
    pub benchmark: Vec<PathBuf>,
    /// Trajectory CSVs; overlaid in one plot data file.
    #[arg(long)]
    pub trajectory: Vec<PathBuf>,
    /// Labeled dataset whose labels feed the PCA projection.
    #[arg(long)]
    pub pca_data: Option<PathBuf>,
    /// Labeled dataset for the prediction scatter.
    #[arg(long)]
    pub scatter_data: Option<PathBuf>,
    /// Networks evaluated on the scatter dataset (nncore format files).
    #[arg(long)]
    pub scatter_net: Vec<PathBuf>,
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".to_string())
}

/// Parses a numeric CSV, skipping `#` comments; returns header and rows.
fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok((header, rows))
}

pub fn run(ctx: &Context, args: ReportArgs) -> Result<()> {
    std::fs::create_dir_all(&ctx.out_dir)?;
    let mut summary = String::new();

    // Loss curves: epoch vs train/validation loss per run.
    if !args.train.is_empty() {
        let out = ctx.out_path("loss_curves.dat")?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(&out)?);
        let mut names = Vec::new();
        for path in &args.train {
            let (header, rows) = read_csv(path)?;
            let loss_col = header.iter().position(|h| h == "train_loss").ok_or_else(|| {
                Error::Parse(format!("{} lacks a train_loss column", path.display()))
            })?;
            let val_col = header.iter().position(|h| h == "val_loss");
            writeln!(w, "# {}", stem(path))?;
            for row in &rows {
                let val = val_col.map(|c| row[c].as_str()).filter(|v| !v.is_empty());
                writeln!(w, "{} {} {}", row[0], row[loss_col], val.unwrap_or("nan"))?;
            }
            writeln!(w)?;
            writeln!(w)?;
            let final_loss = rows.last().map(|r| r[loss_col].clone()).unwrap_or_default();
            summary.push_str(&format!("train {}: final loss {}\n", stem(path), final_loss));
            names.push(stem(path));
        }
        drop(w);
        write_gnuplot_script(
            &ctx.out_path("loss_curves.gp")?,
            "loss_curves.dat",
            &names,
            "epoch",
            "loss",
            true,
        )?;
    }

    // Benchmark aggregation.
    for path in &args.benchmark {
        let (header, rows) = read_csv(path)?;
        let col = |name: &str| header.iter().position(|h| h == name);
        let (Some(vc), Some(wc), Some(ic)) =
            (col("variant"), col("wall_ms"), col("total_newton_iters"))
        else {
            return Err(Error::Parse(format!(
                "{} is not a benchmark CSV",
                path.display()
            )));
        };
        let mut variants: Vec<String> = Vec::new();
        for row in &rows {
            if !variants.contains(&row[vc]) {
                variants.push(row[vc].clone());
            }
        }
        for variant in variants {
            let samples: Vec<&Vec<String>> =
                rows.iter().filter(|r| r[vc] == variant).collect();
            let mean = |c: usize| {
                samples
                    .iter()
                    .filter_map(|r| r[c].parse::<f64>().ok())
                    .sum::<f64>()
                    / samples.len() as f64
            };
            summary.push_str(&format!(
                "benchmark {} / {variant}: {} runs, mean wall {:.3} ms, mean iterations {:.1}\n",
                stem(path),
                samples.len(),
                mean(wc),
                mean(ic)
            ));
        }
    }

    // Trajectory overlays: t, then one y-block per file.
    if !args.trajectory.is_empty() {
        let out = ctx.out_path("trajectory_overlay.dat")?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(&out)?);
        let mut names = Vec::new();
        for path in &args.trajectory {
            let (header, rows) = read_csv(path)?;
            let y_cols: Vec<usize> = header
                .iter()
                .enumerate()
                .filter(|(_, h)| h.starts_with('y'))
                .map(|(i, _)| i)
                .collect();
            if y_cols.is_empty() {
                return Err(Error::Parse(format!(
                    "{} has no output columns",
                    path.display()
                )));
            }
            writeln!(w, "# {}", stem(path))?;
            for row in &rows {
                let ys: Vec<&str> = y_cols.iter().map(|&c| row[c].as_str()).collect();
                writeln!(w, "{} {}", row[0], ys.join(" "))?;
            }
            writeln!(w)?;
            writeln!(w)?;
            names.push(stem(path));
        }
        drop(w);
        write_gnuplot_script(
            &ctx.out_path("trajectory_overlay.gp")?,
            "trajectory_overlay.dat",
            &names,
            "t",
            "y",
            false,
        )?;
        summary.push_str(&format!("trajectory overlay: {} runs\n", args.trajectory.len()));
    }

    // Scatter: labels plus per-network predictions over the dataset inputs.
    if let Some(data_path) = &args.scatter_data {
        let dataset = load_dataset(data_path)?;
        let labels = dataset.labels.as_ref().ok_or_else(|| {
            Error::Consistency(format!("{} has no labels to scatter", data_path.display()))
        })?;
        let mut predictions = Vec::new();
        for net_path in &args.scatter_net {
            let net = load_network(net_path)?;
            let inputs = if net.input_dim() == dataset.inputs.rows() {
                dataset.inputs.clone()
            } else {
                // Networks trained on an input subset: take the trailing dims.
                let skip = dataset.inputs.rows() - net.input_dim();
                let rows: Vec<usize> = (skip..dataset.inputs.rows()).collect();
                dataset.inputs.select_rows(&rows)
            };
            predictions.push((stem(net_path), forward(&net, &inputs)?));
        }
        let out = ctx.out_path("scatter.dat")?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(&out)?);
        let mut header = vec!["# x...".to_string(), "label...".to_string()];
        header.extend(predictions.iter().map(|(n, _)| n.clone()));
        writeln!(w, "{}", header.join(" "))?;
        for j in 0..dataset.len() {
            let mut row: Vec<String> =
                dataset.inputs.column(j).iter().map(|&v| format_f64(v)).collect();
            row.extend(labels.column(j).iter().map(|&v| format_f64(v)));
            for (_, preds) in &predictions {
                row.extend(preds.column(j).iter().map(|&v| format_f64(v)));
            }
            writeln!(w, "{}", row.join(" "))?;
        }
        summary.push_str(&format!(
            "scatter: {} samples, {} networks\n",
            dataset.len(),
            predictions.len()
        ));
    }

    // PCA projection of a labeled dataset's output space.
    if let Some(path) = &args.pca_data {
        let dataset = load_dataset(path)?;
        let labels = dataset.labels.as_ref().ok_or_else(|| {
            Error::Consistency(format!("{} has no labels to project", path.display()))
        })?;
        let (projection, fractions, rank_warning) = pca_project_2d(labels)?;
        let out = ctx.out_path("pca.dat")?;
        write_pca(&out, &projection)?;
        summary.push_str(&format!(
            "pca: explained fractions {:.4} / {:.4}{}\n",
            fractions[0],
            fractions[1],
            if rank_warning { " (rank deficient)" } else { "" }
        ));
        let gp = ctx.out_path("pca.gp")?;
        std::fs::write(
            &gp,
            "set xlabel 'pc1'\nset ylabel 'pc2'\nplot 'pca.dat' using 1:2 with points title 'outputs'\npause -1\n",
        )?;
    }

    let summary_path = ctx.out_path("summary.txt")?;
    std::fs::write(&summary_path, &summary)?;
    let mut manifest = RunManifest::new("report", ctx.seed);
    manifest.set("train_inputs", args.train.len());
    manifest.set("benchmark_inputs", args.benchmark.len());
    manifest.set("trajectory_inputs", args.trajectory.len());
    manifest.save(&manifest_path(&summary_path))?;
    print!("{summary}");
    println!("wrote {}", summary_path.display());
    Ok(())
}

fn write_pca(path: &Path, projection: &Matrix) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for j in 0..projection.cols() {
        writeln!(
            w,
            "{} {}",
            format_f64(projection.get(0, j)),
            format_f64(projection.get(1, j))
        )?;
    }
    Ok(())
}

fn write_gnuplot_script(
    path: &Path,
    data_file: &str,
    block_names: &[String],
    xlabel: &str,
    ylabel: &str,
    logscale: bool,
) -> Result<()> {
    let mut script = String::new();
    script.push_str(&format!("set xlabel '{xlabel}'\nset ylabel '{ylabel}'\n"));
    if logscale {
        script.push_str("set logscale y\n");
    }
    script.push_str("plot ");
    let plots: Vec<String> = block_names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            format!("'{data_file}' index {i} using 1:2 with lines title '{name}'")
        })
        .collect();
    script.push_str(&plots.join(", \\\n     "));
    script.push_str("\npause -1\n");
    std::fs::write(path, script)?;
    Ok(())
}
