//! Flat sectioned key-value configuration files.
//!
//! The format is deliberately structureless: `[section]` headers followed
//! by `key = value` lines, `#` comments, blank lines ignored. Every run is
//! fully determined by the file plus the seed inside it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sparsegrad_core::{CoeffSpec, DomainKind, Error, Result};

#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::from("scenario");
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') || line.len() < 3 {
                    return Err(Error::Parse(format!("line {}: bad section header", lineno + 1)));
                }
                current = line[1..line.len() - 1].trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse(format!(
                    "line {}: expected `key = value`, found `{line}`",
                    lineno + 1
                )));
            };
            sections
                .entry(current.clone())
                .or_default()
                .insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(RawConfig { sections })
    }

    pub fn load(path: &Path) -> Result<RawConfig> {
        RawConfig::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|s| s.as_str())
    }

    pub fn get_f64(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Parse(format!("[{section}] {key}: bad number `{v}`"))),
        }
    }

    pub fn get_usize(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Parse(format!("[{section}] {key}: bad integer `{v}`"))),
        }
    }
}

/// A fully resolved scenario configuration.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub seed: u64,
    pub dim: usize,
    pub level: u32,
    pub coeff: CoeffSpec,
    pub domain: Option<DomainKind>,
    pub domain_file: Option<PathBuf>,
    pub modes: usize,
    pub spikes: usize,
    pub g_kind: String,
    pub theta: f64,
    pub q_l: f64,
    pub q_h: f64,
    pub p: f64,
    pub weight_alpha: Option<f64>,
    pub trials: usize,
    pub depth_cap: u32,
    pub out_dir: PathBuf,
}

pub fn coeff_spec_from(raw: &RawConfig) -> Result<CoeffSpec> {
    let kind = raw.get("coefficient", "kind").unwrap_or("identity");
    let alpha = raw.get_f64("coefficient", "alpha", 1.0)?;
    let beta = raw.get_f64("coefficient", "beta", 4.0)?;
    let period = raw.get_f64("coefficient", "period", 0.125)?;
    let gamma = raw.get_f64("coefficient", "gamma", 0.5)?;
    let eps = raw.get_f64("coefficient", "eps", 0.5)?;
    let cx = raw.get_f64("coefficient", "center_x", 0.5)?;
    let cy = raw.get_f64("coefficient", "center_y", 0.5)?;
    parse_coeff(kind, alpha, beta, period, gamma, eps, [cx, cy])
}

pub fn parse_coeff(
    kind: &str,
    alpha: f64,
    beta: f64,
    period: f64,
    gamma: f64,
    eps: f64,
    center: [f64; 2],
) -> Result<CoeffSpec> {
    Ok(match kind {
        "identity" => CoeffSpec::Identity,
        "scalar" => CoeffSpec::ScalarConstant { c: alpha },
        "checkerboard" => CoeffSpec::Checkerboard {
            alpha,
            beta,
            period,
        },
        "rotation" => CoeffSpec::Rotation { gamma },
        "log-oscillation" | "vmo" => CoeffSpec::LogOscillation {
            alpha,
            beta,
            center,
        },
        "dini" => CoeffSpec::Dini { beta, center },
        "nonlinear" => CoeffSpec::Nonlinear {
            base: Box::new(CoeffSpec::Identity),
            eps,
        },
        other => {
            return Err(Error::Parse(format!("unknown coefficient kind `{other}`")));
        }
    })
}

impl ScenarioConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<ScenarioConfig> {
        let scenario = raw
            .get("scenario", "name")
            .ok_or_else(|| Error::Parse("[scenario] name is required".into()))?
            .to_string();
        let dim = raw.get_usize("scenario", "dim", 2)?;
        let level = raw.get_usize("scenario", "level", 5)? as u32;
        let seed = raw.get_usize("scenario", "seed", 42)? as u64;
        let coeff = coeff_spec_from(raw)?;
        let (domain, domain_file) = match raw.get("domain", "kind") {
            None | Some("none") => (None, None),
            Some("file") => {
                let f = raw
                    .get("domain", "file")
                    .ok_or_else(|| Error::Parse("[domain] file path required".into()))?;
                (None, Some(PathBuf::from(f)))
            }
            Some(name) => {
                // resolve early so a typo is a config error (exit 2)
                let g = sparsegrad_core::Grid::new(dim, level)?;
                let _ = sparsegrad_core::Domain::by_name(&g, name)?;
                (Some(domain_kind_by_name(name)?), None)
            }
        };
        Ok(ScenarioConfig {
            scenario,
            seed,
            dim,
            level,
            coeff,
            domain,
            domain_file,
            modes: raw.get_usize("data", "modes", 6)?,
            spikes: raw.get_usize("data", "spikes", 0)?,
            g_kind: raw.get("data", "g").unwrap_or("ones").to_string(),
            theta: raw.get_f64("exponents", "theta", 0.5)?,
            q_l: raw.get_f64("exponents", "q_l", 2.0)?,
            q_h: raw.get_f64("exponents", "q_h", 4.0)?,
            p: raw.get_f64("exponents", "p", 2.0)?,
            weight_alpha: match raw.get("weight", "kind") {
                None | Some("none") => None,
                Some("power") => Some(raw.get_f64("weight", "alpha", 0.5)?),
                Some(other) => {
                    return Err(Error::Parse(format!("unknown weight kind `{other}`")));
                }
            },
            trials: raw.get_usize("scenario", "trials", 20)?,
            depth_cap: raw.get_usize("exponents", "depth_cap", 4)? as u32,
            out_dir: PathBuf::from(raw.get("output", "dir").unwrap_or("out")),
        })
    }

    /// Output directory, honoring the `SPARSEGRAD_OUT` root override.
    pub fn resolved_out_dir(&self) -> PathBuf {
        match std::env::var_os("SPARSEGRAD_OUT") {
            Some(root) => PathBuf::from(root).join(&self.out_dir),
            None => self.out_dir.clone(),
        }
    }
}

fn domain_kind_by_name(name: &str) -> Result<DomainKind> {
    Ok(match name {
        "full-cube" | "full_cube" | "cube" => DomainKind::FullCube,
        "square" => DomainKind::Square,
        "disk" => DomainKind::Disk,
        "l-shape" | "l_shape" | "lshape" => DomainKind::LShape,
        other => return Err(Error::Parse(format!("unknown domain kind `{other}`"))),
    })
}
