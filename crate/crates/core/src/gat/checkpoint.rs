//! Plain-text checkpoints. Floats are written in Rust's shortest round-trip
//! form, so reading a checkpoint back reproduces every parameter bit-for-bit.
//!
//! ```text
//! ocgraph-gatv2 1
//! layers 2
//! ...
//! input_dim 16
//! params 1234
//! <one value per line>
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{GatConfig, GatModel, GatParams};
use crate::error::{Error, Result};

const MAGIC: &str = "ocgraph-gatv2 1";

impl GatModel {
    pub fn to_checkpoint(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "layers {}", c.layers);
        let _ = writeln!(out, "heads {}", c.heads);
        let _ = writeln!(out, "hidden_dim {}", c.hidden_dim);
        let _ = writeln!(out, "leaky_slope {}", c.leaky_slope);
        let _ = writeln!(out, "epochs {}", c.epochs);
        let _ = writeln!(out, "learning_rate {}", c.learning_rate);
        let _ = writeln!(out, "seed {}", c.seed);
        let _ = writeln!(out, "input_dim {}", self.input_dim);
        let flat = self.params.flatten();
        let _ = writeln!(out, "params {}", flat.len());
        for v in flat {
            let _ = writeln!(out, "{v}");
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |key: &str| -> Result<String> {
            let (i, line) = lines
                .next()
                .ok_or_else(|| Error::parse("checkpoint", format!("missing `{key}`")))?;
            let rest = line
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| {
                    Error::parse(
                        format!("checkpoint line {}", i + 1),
                        format!("expected `{key}`"),
                    )
                })?;
            Ok(rest.to_string())
        };
        if next("ocgraph-gatv2")? != "1" {
            return Err(Error::parse("checkpoint", "unsupported version"));
        }
        fn num<T: std::str::FromStr>(key: &str, s: String) -> Result<T> {
            s.parse()
                .map_err(|_| Error::parse("checkpoint", format!("bad value for `{key}`")))
        }
        let config = GatConfig {
            layers: num("layers", next("layers")?)?,
            heads: num("heads", next("heads")?)?,
            hidden_dim: num("hidden_dim", next("hidden_dim")?)?,
            leaky_slope: num("leaky_slope", next("leaky_slope")?)?,
            epochs: num("epochs", next("epochs")?)?,
            learning_rate: num("learning_rate", next("learning_rate")?)?,
            seed: num("seed", next("seed")?)?,
        };
        config.validate()?;
        let input_dim: usize = num("input_dim", next("input_dim")?)?;
        let count: usize = num("params", next("params")?)?;
        let values: Vec<f64> = lines
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim().parse().map_err(|_| {
                    Error::parse(format!("checkpoint line {}", i + 1), "bad parameter value")
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != count {
            return Err(Error::parse(
                "checkpoint",
                format!("declared {count} parameters, found {}", values.len()),
            ));
        }
        let mut params = GatParams::zeros(&config, input_dim);
        params.assign_flat(&values)?;
        Ok(Self {
            config,
            input_dim,
            params,
        })
    }
}

pub fn write_checkpoint(path: &Path, model: &GatModel) -> Result<()> {
    fs::write(path, model.to_checkpoint()).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<GatModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    GatModel::from_checkpoint(&text)
}
