//! Plain-text `key=value` run settings.
//!
//! Resolution order: built-in defaults, then the config file, then
//! command-line flags. Every run echoes the resolved map to its manifest.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};

/// Known keys with their defaults; an empty default means "unset" (or
/// "derived from other keys" where documented in the README).
pub const KEYS: &[(&str, &str)] = &[
    ("method", "syrenets"),
    ("mode", "indirect"),
    ("seed", "0"),
    ("steps", ""),
    ("seconds", ""),
    ("batch_size", "32"),
    ("lr", "1e-3"),
    ("decay_factor", "10"),
    ("patience", ""),
    ("lr_floor", "1e-5"),
    ("constant_lr", ""),
    ("record_time", "false"),
    ("lambda1", "1"),
    ("lambda2", "1e-3"),
    ("lambda3", "1"),
    ("layers", "3"),
    ("heads", "12"),
    ("latent", "16"),
    ("sel_hidden", "64"),
    ("ae_hidden1", "128"),
    ("ae_hidden2", "128"),
    ("nn_hidden_layers", "5"),
    ("nn_width", "300"),
    ("stencil_step", "1e-3"),
    ("g", "9.81"),
    ("train_rows", ""),
    ("eval_rows", ""),
    ("seeds", "10"),
    ("coords", "50"),
    ("fd_step", "0.1"),
    ("tol", ""),
];

/// Steps used when neither a step nor a time budget is given.
pub const DEFAULT_STEPS: u64 = 1000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn check_key(key: &str) -> anyhow::Result<()> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        bail!("unknown setting {key:?}")
    }
}

/// Parses `key=value` lines; `#` starts a comment, blank lines are ignored.
pub fn parse_config(text: &str) -> anyhow::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key=value, got {raw:?}", n + 1))?;
        let k = k.trim();
        check_key(k).with_context(|| format!("line {}", n + 1))?;
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl Settings {
    pub fn defaults() -> Self {
        Self {
            values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Defaults, overlaid with `config` (if any), overlaid with `flags`.
    pub fn resolve(config: Option<&Path>, flags: &[(&str, Option<String>)]) -> anyhow::Result<Self> {
        let mut s = Self::defaults();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            for (k, v) in parse_config(&text).with_context(|| format!("config file {}", path.display()))? {
                s.values.insert(k, v);
            }
        }
        for (k, v) in flags {
            if let Some(v) = v {
                s.set(k, v.clone())?;
            }
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> anyhow::Result<()> {
        check_key(key)?;
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map_or("", String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> anyhow::Result<T>
    where
        T::Err: Display,
    {
        self.opt(key)?.ok_or_else(|| anyhow!("setting {key:?} is required"))
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> anyhow::Result<Option<T>>
    where
        T::Err: Display,
    {
        let raw = self.raw(key);
        if raw.is_empty() {
            return Ok(None);
        }
        raw.parse()
            .map(Some)
            .map_err(|e| anyhow!("setting {key}={raw:?}: {e}"))
    }

    /// Fills a derived key if it is still unset.
    pub fn default_to(&mut self, key: &str, value: impl Display) {
        if self.raw(key).is_empty() {
            self.values.insert(key.to_string(), value.to_string());
        }
    }

    /// `key=value` lines in key order.
    pub fn render(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "# comment\nseed = 4\nlr=0.01 # inline\n\n").unwrap();
        let s = Settings::resolve(Some(&p), &[("seed", Some("9".into())), ("steps", None)]).unwrap();
        assert_eq!(s.get::<u64>("seed").unwrap(), 9);
        assert_eq!(s.get::<f64>("lr").unwrap(), 0.01);
        assert_eq!(s.opt::<u64>("steps").unwrap(), None);
    }

    #[test]
    fn unknown_keys_and_bad_lines_are_rejected() {
        assert!(parse_config("nope=1").is_err());
        assert!(parse_config("seed 1").is_err());
        let s = Settings::defaults();
        assert!(s.clone().set("bogus", "1").is_err());
        let mut s = s;
        s.set("seed", "x").unwrap();
        assert!(s.get::<u64>("seed").is_err());
    }

    #[test]
    fn render_is_sorted_and_complete() {
        let r = Settings::defaults().render();
        assert_eq!(r.lines().count(), KEYS.len());
        let keys: Vec<&str> = r.lines().map(|l| l.split('=').next().unwrap()).collect();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        assert_eq!(keys, sorted);
    }
}
