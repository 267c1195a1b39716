//! Closed-form and bound-form outage probabilities.

mod cf;
mod cutset;
mod df;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interference::constant_c;
use crate::model::{LinkGeometry, NetworkModel, ProtocolParams};

pub use cf::{
    cf_event_a_lower, cf_event_a_upper, cf_event_b_upper, cf_event_b_upper_joint, cf_outage_lower,
    cf_outage_upper, CfBoundParts, CfLattice,
};
pub use cutset::{cutset_destination_term, cutset_outage_lower, CutsetPoint, CUTSET_RHO_GRID};
pub use df::{df_mu, df_optimal_rho, df_outage, fv_ccdf, DfIntermediates, RHO_GRID};

/// Slack allowed for exact formulas before they are reported.
pub const PROBABILITY_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Df,
    Cf,
    Direct,
    Cutset,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [Protocol::Df, Protocol::Cf, Protocol::Direct, Protocol::Cutset];

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Df => "df",
            Protocol::Cf => "cf",
            Protocol::Direct => "direct",
            Protocol::Cutset => "cutset",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "df" => Ok(Protocol::Df),
            "cf" => Ok(Protocol::Cf),
            "direct" => Ok(Protocol::Direct),
            "cutset" | "cut-set" => Ok(Protocol::Cutset),
            other => Err(Error::Config(format!("unknown protocol `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateKind {
    ExactAnalytic,
    UpperBound,
    LowerBound,
    MonteCarlo,
}

impl EstimateKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimateKind::ExactAnalytic => "exact-analytic",
            EstimateKind::UpperBound => "upper-bound",
            EstimateKind::LowerBound => "lower-bound",
            EstimateKind::MonteCarlo => "monte-carlo",
        }
    }
}

/// Snapshot of the parameters an estimate was computed at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateMeta {
    pub protocol: Protocol,
    pub lambda: f64,
    pub alpha: f64,
    pub threshold: f64,
    pub distance: f64,
    pub k: Option<f64>,
    pub theta: Option<f64>,
    pub rho_mag: Option<f64>,
    pub w_c: Option<f64>,
    pub partitions: Option<usize>,
    pub trials: Option<u64>,
    pub warning: Option<String>,
}

impl EstimateMeta {
    pub fn new(protocol: Protocol, network: &NetworkModel, geometry: &LinkGeometry, threshold: f64) -> Self {
        EstimateMeta {
            protocol,
            lambda: network.lambda,
            alpha: network.alpha,
            threshold,
            distance: geometry.distance(),
            k: Some(geometry.k()),
            theta: Some(geometry.theta()),
            rho_mag: None,
            w_c: None,
            partitions: None,
            trials: None,
            warning: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub value: f64,
    pub kind: EstimateKind,
    /// Standard error, Monte Carlo estimates only.
    pub stderr: Option<f64>,
    pub meta: EstimateMeta,
}

impl OutageEstimate {
    pub fn protocol(&self) -> Protocol {
        self.meta.protocol
    }
}

/// Checks that an exact formula landed in `[0, 1]` up to [`PROBABILITY_SLACK`]
/// and snaps it into the interval.
pub(crate) fn checked_probability(value: f64, context: &'static str) -> Result<f64> {
    if !value.is_finite() || !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&value) {
        return Err(Error::OutOfRange { value, context });
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Direct transmission: `1 - exp(-lambda T^(2/alpha) D^2 C)`.
pub fn direct_outage(network: &NetworkModel, distance: f64, threshold: f64) -> Result<OutageEstimate> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::Domain(format!(
            "SIR threshold must be positive, got {threshold}"
        )));
    }
    if !(distance.is_finite() && distance > 0.0) {
        return Err(Error::Domain(format!(
            "distance must be positive, got {distance}"
        )));
    }
    let c = constant_c(network.alpha)?;
    let exponent = network.lambda * threshold.powf(2.0 / network.alpha) * distance * distance * c;
    Ok(OutageEstimate {
        value: -(-exponent).exp_m1(),
        kind: EstimateKind::ExactAnalytic,
        stderr: None,
        meta: EstimateMeta {
            protocol: Protocol::Direct,
            lambda: network.lambda,
            alpha: network.alpha,
            threshold,
            distance,
            k: None,
            theta: None,
            rho_mag: None,
            w_c: None,
            partitions: None,
            trials: None,
            warning: None,
        },
    })
}

/// Largest threshold whose direct-transmission outage does not exceed `target`.
pub fn direct_max_threshold(network: &NetworkModel, distance: f64, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain(format!(
            "target outage must lie in (0, 1), got {target}"
        )));
    }
    if network.lambda == 0.0 {
        return Err(Error::BracketExhausted(
            "no interferers: every threshold meets the target".into(),
        ));
    }
    let c = constant_c(network.alpha)?;
    let x = -(-target).ln_1p() / (network.lambda * distance * distance * c);
    Ok(x.powf(network.alpha / 2.0))
}

/// Convenience bundle used by reports: every analytic quantity at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticReport {
    pub df: OutageEstimate,
    pub cf_upper: OutageEstimate,
    pub cf_lower: OutageEstimate,
    pub direct: OutageEstimate,
    pub cutset: OutageEstimate,
}

/// Evaluates all protocols at one point with the parameters as given
/// (no optimisation of `w_c` or `rho`).
pub fn analytic_report(
    network: &NetworkModel,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    quad: &crate::interference::QuadratureSpec,
) -> Result<AnalyticReport> {
    Ok(AnalyticReport {
        df: df_outage(network, geometry, params, quad)?,
        cf_upper: cf_outage_upper(network, geometry, params, quad)?,
        cf_lower: cf_outage_lower(network, geometry, params, quad)?,
        direct: direct_outage(network, geometry.distance(), params.threshold)?,
        cutset: cutset_outage_lower(network, geometry, params, quad)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn direct_outage_values() {
        let n0 = NetworkModel::new(0.0, 4.0).unwrap();
        assert_eq!(direct_outage(&n0, 10.0, 3.0).unwrap().value, 0.0);
        let n = NetworkModel::new(1e-3, 4.0).unwrap();
        let p = direct_outage(&n, 10.0, 3.0).unwrap();
        let c = std::f64::consts::PI.powi(2) / 2.0;
        assert_relative_eq!(
            p.value,
            1.0 - (-1e-3 * 3f64.sqrt() * 100.0 * c).exp(),
            max_relative = 1e-13
        );
        assert_relative_eq!(p.value, 0.574_603_163_9, epsilon = 1e-9);
        assert_eq!(p.kind, EstimateKind::ExactAnalytic);
    }

    #[test]
    fn direct_outage_monotone() {
        let base = direct_outage(&NetworkModel::new(1e-4, 4.0).unwrap(), 10.0, 3.0)
            .unwrap()
            .value;
        assert!(
            direct_outage(&NetworkModel::new(2e-4, 4.0).unwrap(), 10.0, 3.0)
                .unwrap()
                .value
                > base
        );
        assert!(
            direct_outage(&NetworkModel::new(1e-4, 4.0).unwrap(), 11.0, 3.0)
                .unwrap()
                .value
                > base
        );
        assert!(
            direct_outage(&NetworkModel::new(1e-4, 4.0).unwrap(), 10.0, 3.5)
                .unwrap()
                .value
                > base
        );
    }

    #[test]
    fn direct_inversion_round_trip() {
        let n = NetworkModel::new(1e-3, 4.0).unwrap();
        let t = direct_max_threshold(&n, 10.0, 0.574607).unwrap();
        assert_relative_eq!(t, 3.0, max_relative = 1e-3);
        let p = direct_outage(&n, 10.0, 1.7).unwrap().value;
        assert_relative_eq!(
            direct_max_threshold(&n, 10.0, p).unwrap(),
            1.7,
            max_relative = 1e-12
        );
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in Protocol::ALL {
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
        }
        assert!("relay".parse::<Protocol>().is_err());
    }

    #[test]
    fn checked_probability_slack() {
        assert_eq!(checked_probability(-5e-7, "t").unwrap(), 0.0);
        assert_eq!(checked_probability(1.0 + 5e-7, "t").unwrap(), 1.0);
        assert!(checked_probability(-1e-3, "t").is_err());
        assert!(checked_probability(f64::NAN, "t").is_err());
    }
}
