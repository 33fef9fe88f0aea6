//! Run configuration: a flat key/value TOML file overlaid by command-line
//! flags. Precedence is flag > `RFCW_OUTPUT_DIR` (output directory only) >
//! file > built-in default.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use rfcw::microsim::SimMode;
use rfcw::odeflow::{Direction, System};
use serde::{Deserialize, Serialize};

pub const OUTPUT_DIR_ENV: &str = "RFCW_OUTPUT_DIR";

/// Every tunable of every command. Unset fields fall back to defaults at
/// resolution time; a resolved config has every field set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,

    pub beta: Option<f64>,
    pub h: Option<f64>,

    pub m0: Option<f64>,
    pub m_eta0: Option<f64>,
    pub lambda0: Option<f64>,

    pub n: Option<usize>,
    pub t_end: Option<f64>,
    pub record_dt: Option<f64>,
    pub mode: Option<SimMode>,

    pub system: Option<System>,
    pub direction: Option<Direction>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_step: Option<f64>,
    pub crossings: Option<usize>,

    pub tol: Option<f64>,
    pub boundary_tol: Option<f64>,
    pub h_range: Option<String>,
    pub beta_range: Option<String>,

    pub n_list: Option<Vec<usize>>,
    pub seeds_per_n: Option<usize>,
}

macro_rules! overlay_fields {
    ($dst:expr, $src:expr; $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Settings {
    pub fn defaults() -> Self {
        Self {
            output_dir: Some(PathBuf::from("out")),
            seed: Some(0),
            threads: Some(0),
            beta: Some(2.0),
            h: Some(0.0),
            m0: Some(1.0),
            m_eta0: Some(0.0),
            lambda0: Some(0.0),
            n: Some(1000),
            t_end: Some(10.0),
            record_dt: Some(0.01),
            mode: Some(SimMode::OrderParamOnly),
            system: Some(System::Full3D),
            direction: Some(Direction::Forward),
            rel_tol: Some(1e-10),
            abs_tol: Some(1e-12),
            max_step: Some(0.5),
            crossings: Some(0),
            tol: Some(rfcw::bifurcation::BETA_STAR_TOL),
            boundary_tol: Some(rfcw::bifurcation::BOUNDARY_TOL),
            h_range: Some("0:0.05:1.2".into()),
            beta_range: Some("0.5:0.05:4.95".into()),
            n_list: Some(vec![250, 1000, 4000]),
            seeds_per_n: Some(50),
        }
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(&mut self, other: &Settings) {
        overlay_fields!(self, other;
            output_dir, seed, threads, beta, h, m0, m_eta0, lambda0, n, t_end, record_dt, mode,
            system, direction, rel_tol, abs_tol, max_step, crossings, tol, boundary_tol,
            h_range, beta_range, n_list, seeds_per_n);
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Defaults, then the file, then the environment, then the flags.
    pub fn resolve(file: Option<&Path>, flags: &Settings) -> Result<Self> {
        let mut s = Self::defaults();
        if let Some(path) = file {
            s.overlay(&Self::from_file(path)?);
        }
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                s.output_dir = Some(PathBuf::from(dir));
            }
        }
        s.overlay(flags);
        Ok(s)
    }
}

/// `start:step:end`, inclusive of `end` up to rounding.
pub fn parse_range(range: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = range.split(':').collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("range '{range}' is not start:step:end"))?;
    match nums.as_slice() {
        [v] => Ok(vec![*v]),
        [start, step, end] => {
            if !(*step > 0.0) || end < start {
                bail!("range '{range}' needs step > 0 and end >= start");
            }
            Ok(rfcw::bifurcation::grid(*start, *step, *end))
        }
        _ => bail!("range '{range}' is not start:step:end"),
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonFlags {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct InitFlags {
    /// Initial m^σ.
    #[arg(long, allow_hyphen_values = true)]
    pub m0: Option<f64>,
    /// Initial m^{ση}.
    #[arg(long, allow_hyphen_values = true)]
    pub m_eta0: Option<f64>,
    /// Initial λ.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda0: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct IntegratorFlags {
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub max_step: Option<f64>,
}

impl CommonFlags {
    pub fn apply(&self, s: &mut Settings) {
        s.output_dir.clone_from(&self.output_dir);
        s.threads = self.threads;
    }
}

impl ModelFlags {
    pub fn apply(&self, s: &mut Settings) {
        s.beta = self.beta;
        s.h = self.h;
    }
}

impl InitFlags {
    pub fn apply(&self, s: &mut Settings) {
        s.m0 = self.m0;
        s.m_eta0 = self.m_eta0;
        s.lambda0 = self.lambda0;
    }
}

impl IntegratorFlags {
    pub fn apply(&self, s: &mut Settings) {
        s.rel_tol = self.rel_tol;
        s.abs_tol = self.abs_tol;
        s.max_step = self.max_step;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_keeps_unset_fields() {
        let mut s = Settings::defaults();
        let flags = Settings {
            beta: Some(3.0),
            ..Default::default()
        };
        s.overlay(&flags);
        assert_eq!(s.beta, Some(3.0));
        assert_eq!(s.h, Some(0.0));
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:0.05:1.2").unwrap().len(), 25);
        assert_eq!(parse_range("1.5").unwrap(), vec![1.5]);
        assert!(parse_range("1:0:2").is_err());
        assert!(parse_range("a:b").is_err());
    }

    #[test]
    fn toml_roundtrip() {
        let s = Settings::defaults();
        let text = toml::to_string(&s).unwrap();
        assert_eq!(toml::from_str::<Settings>(&text).unwrap(), s);
        assert!(toml::from_str::<Settings>("bogus = 1").is_err());
    }
}
