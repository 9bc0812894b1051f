//! Self-describing text checkpoints.
//!
//! ```text
//! syrenets-ckpt-v1
//! kind <method>
//! seed <u64>
//! step <u64>
//! best_loss <f64>
//! config <key> <value>        (zero or more)
//! block <name> <rows> <cols>
//! <rows*cols whitespace-separated values>
//! ...
//! ```

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::baselines::{Mlp, MlpConfig, SysId};
use crate::error::CheckpointError;
use crate::model::{ArchConfig, SyreNet};
use crate::params::ParamSet;
use crate::training::{AnyModel, Method};

pub const CHECKPOINT_VERSION: &str = "syrenets-ckpt-v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: Method,
    pub seed: u64,
    pub step: u64,
    pub best_loss: f64,
    pub config: BTreeMap<String, String>,
    pub params: ParamSet<f64>,
}

fn arch_entries(c: &ArchConfig) -> BTreeMap<String, String> {
    [
        ("joints", c.joints),
        ("layers", c.layers),
        ("heads", c.heads),
        ("latent", c.latent),
        ("sel_hidden", c.sel_hidden),
        ("ae_hidden1", c.ae_hidden[0]),
        ("ae_hidden2", c.ae_hidden[1]),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

fn header_err(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Header(msg.into())
}

fn get<V: std::str::FromStr>(cfg: &BTreeMap<String, String>, key: &str) -> Result<V, CheckpointError> {
    let raw = cfg
        .get(key)
        .ok_or_else(|| header_err(format!("missing config entry {key:?}")))?;
    raw.parse()
        .map_err(|_| header_err(format!("config entry {key:?} has invalid value {raw:?}")))
}

impl Checkpoint {
    pub fn from_model(model: &AnyModel<f64>, seed: u64, step: u64, best_loss: f64) -> Self {
        let config = match model {
            AnyModel::SyreNets(m) => arch_entries(&m.config),
            AnyModel::Nn(m) => [
                ("joints", m.config.joints.to_string()),
                ("hidden_layers", m.config.hidden_layers.to_string()),
                ("width", m.config.width.to_string()),
                ("stencil_step", format!("{:e}", m.config.stencil_step)),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
            AnyModel::SysId(m) => [("g".to_string(), format!("{:e}", m.g))].into_iter().collect(),
        };
        Self {
            kind: model.method(),
            seed,
            step,
            best_loss,
            config,
            params: model.params().clone(),
        }
    }

    /// Rebuilds the model described by the header and loads its blocks.
    pub fn to_model(&self) -> Result<AnyModel<f64>, CheckpointError> {
        let c = &self.config;
        let mut model = match self.kind {
            Method::SyreNets => {
                let arch = ArchConfig {
                    joints: get(c, "joints")?,
                    layers: get(c, "layers")?,
                    heads: get(c, "heads")?,
                    latent: get(c, "latent")?,
                    sel_hidden: get(c, "sel_hidden")?,
                    ae_hidden: [get(c, "ae_hidden1")?, get(c, "ae_hidden2")?],
                };
                AnyModel::SyreNets(SyreNet::new(arch, self.seed).map_err(|e| header_err(e.to_string()))?)
            }
            Method::Nn => {
                let cfg = MlpConfig {
                    joints: get(c, "joints")?,
                    hidden_layers: get(c, "hidden_layers")?,
                    width: get(c, "width")?,
                    stencil_step: get(c, "stencil_step")?,
                };
                AnyModel::Nn(Mlp::new(cfg, self.seed).map_err(|e| header_err(e.to_string()))?)
            }
            Method::SysId => AnyModel::SysId(SysId::new(self.seed, get(c, "g")?)),
        };
        let expected = model.params();
        for b in expected.blocks() {
            let got = self
                .params
                .find(&b.name)
                .map(|id| self.params.block(id))
                .ok_or_else(|| CheckpointError::Block {
                    block: b.name.clone(),
                    message: "missing".into(),
                })?;
            if (got.rows, got.cols) != (b.rows, b.cols) {
                return Err(CheckpointError::Block {
                    block: b.name.clone(),
                    message: format!(
                        "shape {}x{} does not match the architecture's {}x{}",
                        got.rows, got.cols, b.rows, b.cols
                    ),
                });
            }
        }
        if let Some(extra) = self.params.blocks().iter().find(|b| expected.find(&b.name).is_none()) {
            return Err(CheckpointError::Block {
                block: extra.name.clone(),
                message: "not part of this architecture".into(),
            });
        }
        let params = model.params_mut();
        for b in self.params.blocks() {
            let id = params.find(&b.name).expect("checked above");
            params.block_mut(id).data.clone_from(&b.data);
        }
        Ok(model)
    }

    pub fn write(&self, path: &Path) -> Result<(), CheckpointError> {
        let io = |e| CheckpointError::Io {
            path: path.display().to_string(),
            source: e,
        };
        let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        let mut body = || -> std::io::Result<()> {
            writeln!(w, "{CHECKPOINT_VERSION}")?;
            writeln!(w, "kind {}", self.kind)?;
            writeln!(w, "seed {}", self.seed)?;
            writeln!(w, "step {}", self.step)?;
            writeln!(w, "best_loss {:e}", self.best_loss)?;
            for (k, v) in &self.config {
                writeln!(w, "config {k} {v}")?;
            }
            for b in self.params.blocks() {
                writeln!(w, "block {} {} {}", b.name, b.rows, b.cols)?;
                let mut line = String::with_capacity(b.data.len() * 24);
                for (i, v) in b.data.iter().enumerate() {
                    if i > 0 {
                        line.push(' ');
                    }
                    line.push_str(&format!("{v:e}"));
                }
                writeln!(w, "{line}")?;
            }
            w.flush()
        };
        body().map_err(io)
    }

    pub fn read(path: &Path) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path).map_err(|e| CheckpointError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CheckpointError> {
        let mut lines = text.lines().peekable();
        match lines.next() {
            Some(CHECKPOINT_VERSION) => {}
            Some(other) => return Err(header_err(format!("unsupported version tag {other:?}"))),
            None => return Err(header_err("empty file")),
        }
        let mut field = |name: &str| -> Result<String, CheckpointError> {
            let line = lines.next().ok_or_else(|| header_err(format!("missing {name}")))?;
            line.strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| header_err(format!("expected {name}, found {line:?}")))
        };
        let kind: Method = field("kind")?.parse().map_err(header_err)?;
        let seed = field("seed")?.parse().map_err(|_| header_err("invalid seed"))?;
        let step = field("step")?.parse().map_err(|_| header_err("invalid step"))?;
        let best_loss = field("best_loss")?.parse().map_err(|_| header_err("invalid best_loss"))?;
        let mut config = BTreeMap::new();
        while let Some(line) = lines.peek() {
            let Some(rest) = line.strip_prefix("config ") else {
                break;
            };
            let (k, v) = rest
                .split_once(' ')
                .ok_or_else(|| header_err(format!("malformed config line {line:?}")))?;
            config.insert(k.to_string(), v.to_string());
            lines.next();
        }
        let mut params = ParamSet::new();
        while let Some(line) = lines.next() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let (Some("block"), Some(name), Some(r), Some(c), None) =
                (parts.next(), parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(header_err(format!("expected a block header, found {line:?}")));
            };
            let block_err = |message: String| CheckpointError::Block {
                block: name.to_string(),
                message,
            };
            let rows: usize = r.parse().map_err(|_| block_err(format!("invalid row count {r:?}")))?;
            let cols: usize = c.parse().map_err(|_| block_err(format!("invalid column count {c:?}")))?;
            let values = lines.next().ok_or_else(|| block_err("missing values".into()))?;
            let data = values
                .split_ascii_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| block_err(format!("invalid value {v:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if data.len() != rows * cols {
                return Err(block_err(format!(
                    "expected {} values, found {}",
                    rows * cols,
                    data.len()
                )));
            }
            if params.find(name).is_some() {
                return Err(block_err("duplicate block".into()));
            }
            params.push(name, rows, cols, data);
        }
        Ok(Self {
            kind,
            seed,
            step,
            best_loss,
            config,
            params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = AnyModel::SysId(SysId::<f64>::new(4, 9.81));
        let ck = Checkpoint::from_model(&m, 4, 12, 0.25);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ckpt");
        ck.write(&path).unwrap();
        let back = Checkpoint::read(&path).unwrap();
        assert_eq!(back, ck);
        let m2 = back.to_model().unwrap();
        assert_eq!(m2.params(), m.params());
    }

    #[test]
    fn corrupt_block_is_named() {
        let m = AnyModel::SysId(SysId::<f64>::new(4, 9.81));
        let mut text = String::new();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ckpt");
        Checkpoint::from_model(&m, 4, 0, 1.0).write(&path).unwrap();
        for line in std::fs::read_to_string(&path).unwrap().lines() {
            if line.starts_with("-") || line.starts_with(char::is_numeric) {
                if text.contains("sysid.out") {
                    text.push_str("1 2 x\n");
                    continue;
                }
            }
            text.push_str(line);
            text.push('\n');
        }
        match Checkpoint::parse(&text) {
            Err(CheckpointError::Block { block, .. }) => assert_eq!(block, "sysid.out"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(Checkpoint::parse("bogus\n"), Err(CheckpointError::Header(_))));
    }
}
