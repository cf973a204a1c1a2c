//! Flat text checkpoints.
//!
//! ```text
//! segnet-checkpoint v1
//! mode bayesian
//! classes 9
//! features 6
//! encoder 32 64
//! global 128
//! decoder 64 32
//! block_size 4096
//! layer 6 32
//! delta_w -4
//! delta_b -4
//! mu_w <inputs·outputs values, row-major>
//! mu_b <outputs values>
//! layer ...
//! ```
//!
//! Floats use the shortest representation that parses back to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::layer::VariationalLayer;
use super::network::{Mode, Network, NetworkConfig};
use crate::error::{Error, Result};

const MAGIC: &str = "segnet-checkpoint v1";

pub fn format_checkpoint(net: &Network) -> String {
    let c = &net.config;
    let list = |v: &[usize]| v.iter().map(|x| format!(" {x}")).collect::<String>();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "mode {}", c.mode.name());
    let _ = writeln!(out, "classes {}", c.classes);
    let _ = writeln!(out, "features {}", c.features);
    let _ = writeln!(out, "encoder{}", list(&c.encoder));
    let _ = writeln!(out, "global {}", c.global);
    let _ = writeln!(out, "decoder{}", list(&c.decoder));
    let _ = writeln!(out, "block_size {}", c.block_size);
    for l in &net.layers {
        let _ = writeln!(out, "layer {} {}", l.n_in(), l.n_out());
        let _ = writeln!(out, "delta_w {}", l.delta_w);
        let _ = writeln!(out, "delta_b {}", l.delta_b);
        out.push_str("mu_w");
        for v in &l.mu_w {
            let _ = write!(out, " {v}");
        }
        out.push_str("\nmu_b");
        for v in &l.mu_b {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_checkpoint(net))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    parse_checkpoint(&fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { line: self.last, message: message.into() }
    }

    /// Next line, which must start with `key`; returns the remaining fields.
    fn field(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let Some((i, line)) = self.inner.next() else {
            self.last += 1;
            return Err(self.err(format!("expected `{key}`, found end of file")));
        };
        self.last = i + 1;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        Ok(parts.collect())
    }

    fn numbers<T: std::str::FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let fields = self.field(key)?;
        fields
            .iter()
            .map(|f| f.parse().map_err(|_| self.err(format!("bad number {f:?} in `{key}`"))))
            .collect()
    }

    fn one<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let mut v = self.numbers(key)?;
        if v.len() != 1 {
            return Err(self.err(format!("`{key}` takes one value")));
        }
        Ok(v.remove(0))
    }
}

pub fn parse_checkpoint(text: &str) -> Result<Network> {
    let mut lines = Lines { inner: text.lines().enumerate(), last: 0 };
    match lines.inner.next() {
        Some((_, l)) if l.trim() == MAGIC => lines.last = 1,
        _ => return Err(Error::Parse { line: 1, message: format!("missing `{MAGIC}` header") }),
    }
    let mode = match lines.field("mode")?.as_slice() {
        ["bayesian"] => Mode::Bayesian,
        ["frequentist"] => Mode::Frequentist,
        other => return Err(lines.err(format!("unknown mode {other:?}"))),
    };
    let config = NetworkConfig {
        mode,
        classes: lines.one("classes")?,
        features: lines.one("features")?,
        encoder: lines.numbers("encoder")?,
        global: lines.one("global")?,
        decoder: lines.numbers("decoder")?,
        block_size: lines.one("block_size")?,
    };
    config.validate()?;
    let mut layers = Vec::new();
    for (n_in, n_out) in config.layer_shapes() {
        let shape: Vec<usize> = lines.numbers("layer")?;
        if shape != [n_in, n_out] {
            return Err(lines.err(format!("layer shape {shape:?}, expected [{n_in}, {n_out}]")));
        }
        let delta_w = lines.one("delta_w")?;
        let delta_b = lines.one("delta_b")?;
        let w: Vec<f64> = lines.numbers("mu_w")?;
        let w = Array2::from_shape_vec((n_in, n_out), w).map_err(|_| lines.err("mu_w has the wrong length"))?;
        let b: Vec<f64> = lines.numbers("mu_b")?;
        if b.len() != n_out {
            return Err(lines.err("mu_b has the wrong length"));
        }
        layers.push(VariationalLayer { mu_w: w, delta_w, mu_b: Array1::from(b), delta_b });
    }
    Network::from_layers(config, layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut net = Network::new(NetworkConfig::default(), 12).unwrap();
        net.layers[0].mu_w[[0, 0]] = 1.0 / 3.0;
        net.layers[1].delta_b = f64::NEG_INFINITY;
        let text = format_checkpoint(&net);
        assert_eq!(parse_checkpoint(&text).unwrap(), net);
    }

    #[test]
    fn empty_encoder_round_trips() {
        let cfg = NetworkConfig { encoder: vec![], decoder: vec![], classes: 2, global: 3, ..NetworkConfig::default() };
        let net = Network::new(cfg, 1).unwrap();
        assert_eq!(parse_checkpoint(&format_checkpoint(&net)).unwrap(), net);
    }

    #[test]
    fn corrupt_files_report_lines() {
        let net = Network::new(NetworkConfig::default(), 1).unwrap();
        let text = format_checkpoint(&net);
        let bad = text.replacen("delta_w", "delta_x", 1);
        assert!(matches!(parse_checkpoint(&bad), Err(Error::Parse { line: 10, .. })));
        let truncated: String = text.lines().take(12).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_checkpoint(&truncated), Err(Error::Parse { .. })));
        assert!(matches!(parse_checkpoint("nope"), Err(Error::Parse { line: 1, .. })));
    }
}
