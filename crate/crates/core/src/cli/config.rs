use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interference::QuadratureSpec;
use crate::model::{LinkGeometry, NetworkModel, ProtocolParams};
use crate::montecarlo::SimulationSpec;
use crate::search::RelayGrid;

/// Everything one run needs. Read from a flat TOML file; command-line flags
/// override file values, which override the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub lambda: f64,
    pub alpha: f64,
    pub distance: f64,
    pub k: f64,
    pub theta: f64,
    pub threshold: f64,
    /// `|rho|` for DF.
    pub rho: f64,
    /// Fixed CF compression noise; optimised when absent.
    pub w_c: Option<f64>,
    pub partitions: usize,
    pub rel_tol: f64,
    /// Density grid of `sweep` and `validate`.
    pub lambdas: Vec<f64>,
    /// Relay distance ratios of `rates`.
    pub ks: Vec<f64>,
    pub target_outage: f64,
    /// `[min, max]` of the region map's x axis.
    pub region_x: [f64; 2],
    pub region_y: [f64; 2],
    pub region_nx: usize,
    pub region_ny: usize,
    pub trials: u64,
    pub seed: u64,
    pub with_mc: bool,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            lambda: 1e-4,
            alpha: 4.0,
            distance: 10.0,
            k: 0.2,
            theta: 0.0,
            threshold: 3.0,
            rho: 0.0,
            w_c: None,
            partitions: ProtocolParams::DEFAULT_PARTITIONS,
            rel_tol: 1e-8,
            lambdas: vec![1e-5, 3e-5, 1e-4, 3e-4, 1e-3],
            ks: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            target_outage: 1e-3,
            region_x: [-10.0, 20.0],
            region_y: [-10.0, 10.0],
            region_nx: 31,
            region_ny: 21,
            trials: 100_000,
            seed: 1,
            with_mc: false,
            threads: None,
            out: PathBuf::from("out"),
        }
    }
}

/// Values given on the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub partitions: Option<usize>,
    pub with_mc: bool,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

fn field(name: &str, e: Error) -> Error {
    let msg = match e {
        Error::Domain(m) | Error::DegenerateGeometry(m) | Error::Config(m) => m,
        other => other.to_string(),
    };
    Error::Config(format!("config field `{name}`: {msg}"))
}

fn increasing(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("config field `{name}`: grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config(format!(
            "config field `{name}`: grid must be strictly increasing"
        )));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.trials {
            self.trials = v;
        }
        if let Some(v) = o.partitions {
            self.partitions = v;
        }
        if o.with_mc {
            self.with_mc = true;
        }
        if o.threads.is_some() {
            self.threads = o.threads;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
    }

    /// Checks every field against the model invariants before any work runs.
    pub fn validate(&self) -> Result<()> {
        NetworkModel::new(self.lambda, self.alpha).map_err(|e| field("lambda/alpha", e))?;
        LinkGeometry::new(self.distance, self.k, self.theta, self.alpha)
            .map_err(|e| field("distance/k/theta", e))?;
        ProtocolParams::new(self.threshold).map_err(|e| field("threshold", e))?;
        if !(0.0..1.0).contains(&self.rho) {
            return Err(field(
                "rho",
                Error::Domain(format!("must lie in [0, 1), got {}", self.rho)),
            ));
        }
        if let Some(w) = self.w_c {
            if !(w > 0.0) {
                return Err(field("w_c", Error::Domain(format!("must be positive, got {w}"))));
            }
        }
        if self.partitions == 0 {
            return Err(field("partitions", Error::Domain("must be at least 1".into())));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(field("rel_tol", Error::Domain("must lie in (0, 1)".into())));
        }
        increasing("lambdas", &self.lambdas)?;
        if self.lambdas.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(field(
                "lambdas",
                Error::Domain("densities must be non-negative".into()),
            ));
        }
        increasing("ks", &self.ks)?;
        if self.ks.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(field("ks", Error::Domain("ratios must be positive".into())));
        }
        if !(self.target_outage > 0.0 && self.target_outage < 1.0) {
            return Err(field("target_outage", Error::Domain("must lie in (0, 1)".into())));
        }
        for (name, r, n) in [
            ("region_x", self.region_x, self.region_nx),
            ("region_y", self.region_y, self.region_ny),
        ] {
            if n == 0 || !(r[1] >= r[0]) || (n > 1 && r[1] == r[0]) {
                return Err(field(
                    name,
                    Error::Domain("need min < max and a positive count".into()),
                ));
            }
        }
        if self.trials == 0 {
            return Err(field("trials", Error::Domain("must be at least 1".into())));
        }
        if self.threads == Some(0) {
            return Err(field("threads", Error::Domain("must be at least 1".into())));
        }
        Ok(())
    }

    pub fn network(&self) -> Result<NetworkModel> {
        NetworkModel::new(self.lambda, self.alpha)
    }

    pub fn geometry(&self) -> Result<LinkGeometry> {
        LinkGeometry::new(self.distance, self.k, self.theta, self.alpha)
    }

    pub fn params(&self) -> Result<ProtocolParams> {
        Ok(ProtocolParams::new(self.threshold)?
            .with_rho(self.rho)
            .with_partitions(self.partitions)
            .with_w_c(self.w_c.unwrap_or(1.0)))
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec::default().with_rel_tol(self.rel_tol)
    }

    pub fn simulation(&self) -> SimulationSpec {
        SimulationSpec::new(self.trials, self.seed)
    }

    pub fn region_grid(&self) -> RelayGrid {
        let axis = |r: [f64; 2], n: usize| -> Vec<f64> {
            if n == 1 {
                return vec![r[0]];
            }
            (0..n)
                .map(|i| r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64)
                .collect()
        };
        RelayGrid::Cartesian {
            xs: axis(self.region_x, self.region_nx),
            ys: axis(self.region_y, self.region_ny),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = ScenarioConfig::from_toml("lambda = 1e-4\nlamda = 2\n").unwrap_err();
        assert!(matches!(e, Error::Config(m) if m.contains("lamda")));
    }

    #[test]
    fn file_values_and_overrides() {
        let mut c = ScenarioConfig::from_toml("k = 0.9\nseed = 5\ntrials = 10\nw_c = 1e-5\n").unwrap();
        assert_eq!((c.k, c.seed, c.trials, c.w_c), (0.9, 5, 10, Some(1e-5)));
        assert_eq!(c.alpha, 4.0);
        c.apply(&Overrides {
            seed: Some(9),
            ..Default::default()
        });
        assert_eq!((c.seed, c.trials), (9, 10));
    }

    #[test]
    fn field_level_messages() {
        let c = ScenarioConfig {
            k: 0.0,
            ..Default::default()
        };
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("distance/k/theta"), "{msg}");
        let c = ScenarioConfig {
            lambdas: vec![1e-3, 1e-4],
            ..Default::default()
        };
        assert!(c.validate().unwrap_err().to_string().contains("lambdas"));
        let c = ScenarioConfig {
            rho: 1.0,
            ..Default::default()
        };
        assert!(c.validate().unwrap_err().to_string().contains("rho"));
    }

    #[test]
    fn region_axes() {
        let c = ScenarioConfig {
            region_x: [0.0, 10.0],
            region_nx: 3,
            region_y: [1.0, 1.0],
            region_ny: 1,
            ..Default::default()
        };
        c.validate().unwrap();
        match c.region_grid() {
            RelayGrid::Cartesian { xs, ys } => {
                assert_eq!(xs, vec![0.0, 5.0, 10.0]);
                assert_eq!(ys, vec![1.0]);
            }
            _ => unreachable!(),
        }
    }
}
