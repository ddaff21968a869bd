//! Versioned text serialization for networks.
//!
//! Layout:
//!
//! ```text
//! loopsurro-mlp v1
//! seed <u64>
//! layers <count>
//! layer <in_dim> <out_dim> <activation>
//! <out_dim lines of in_dim weights, row-major>
//! <one line of out_dim biases>
//! ...
//! ```
//!
//! Floats are printed with 17 significant digits, which round-trips every
//! finite f64 exactly.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::format_f64;
use crate::matrix::Matrix;

use super::{Activation, Layer, MlpNetwork};

const HEADER: &str = "loopsurro-mlp v1";

pub fn write_network<W: Write>(net: &MlpNetwork, mut w: W) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    writeln!(w, "seed {}", net.seed())?;
    writeln!(w, "layers {}", net.layers().len())?;
    for layer in net.layers() {
        writeln!(
            w,
            "layer {} {} {}",
            layer.in_dim(),
            layer.out_dim(),
            layer.activation.tag()
        )?;
        for r in 0..layer.out_dim() {
            let row: Vec<String> = (0..layer.in_dim())
                .map(|c| format_f64(layer.weight.get(r, c)))
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        let biases: Vec<String> = layer.bias.iter().map(|&b| format_f64(b)).collect();
        writeln!(w, "{}", biases.join(" "))?;
    }
    Ok(())
}

pub fn save_network(net: &MlpNetwork, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_network(net, std::io::BufWriter::new(file))
}

pub fn read_network<R: BufRead>(r: R) -> Result<MlpNetwork> {
    let mut lines = r.lines();
    let mut next_line = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Parse("unexpected end of network file".into()))?
            .map_err(Error::Io)
    };

    let header = next_line()?;
    if header.trim() != HEADER {
        return Err(Error::Parse(format!(
            "bad header `{header}`, expected `{HEADER}`"
        )));
    }
    let seed_line = next_line()?;
    let seed: u64 = parse_tagged(&seed_line, "seed")?;
    let count_line = next_line()?;
    let layer_count: usize = parse_tagged(&count_line, "layers")?;

    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let decl = next_line()?;
        let parts: Vec<&str> = decl.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "layer" {
            return Err(Error::Parse(format!("bad layer declaration `{decl}`")));
        }
        let in_dim: usize = parts[1]
            .parse()
            .map_err(|_| Error::Parse(format!("bad in_dim in `{decl}`")))?;
        let out_dim: usize = parts[2]
            .parse()
            .map_err(|_| Error::Parse(format!("bad out_dim in `{decl}`")))?;
        let activation = Activation::from_tag(parts[3])?;

        let mut weight = Matrix::zeros(out_dim, in_dim);
        for r in 0..out_dim {
            let row_line = next_line()?;
            let values = parse_floats(&row_line, in_dim)?;
            for (c, v) in values.into_iter().enumerate() {
                weight.set(r, c, v);
            }
        }
        let bias_line = next_line()?;
        let bias = parse_floats(&bias_line, out_dim)?;
        layers.push(Layer { weight, bias, activation });
    }
    MlpNetwork::from_layers(layers, seed)
}

pub fn load_network(path: &Path) -> Result<MlpNetwork> {
    let file = std::fs::File::open(path)?;
    read_network(std::io::BufReader::new(file))
}

fn parse_tagged<T: std::str::FromStr>(line: &str, tag: &str) -> Result<T> {
    let rest = line
        .strip_prefix(tag)
        .ok_or_else(|| Error::Parse(format!("expected `{tag} ...`, got `{line}`")))?;
    rest.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad value in `{line}`")))
}

fn parse_floats(line: &str, expected: usize) -> Result<Vec<f64>> {
    let values: std::result::Result<Vec<f64>, _> =
        line.split_whitespace().map(str::parse).collect();
    let values = values.map_err(|_| Error::Parse(format!("bad float in `{line}`")))?;
    if values.len() != expected {
        return Err(Error::Parse(format!(
            "expected {expected} values, got {} in `{line}`",
            values.len()
        )));
    }
    Ok(values)
}
