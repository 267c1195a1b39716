//! Compress-and-forward outage bounds.
//!
//! With `X = H_sr l_sr / (I_r + W_c)` and `Y = H_sd l_sd / I_d`, the first
//! outage event is `{X + Y < T}`. Both bounds on its probability are built
//! from the rectangle probabilities
//!
//! ```text
//! G(a, b) = P(X >= a, Y >= b) = exp(-a W_c / l_sr) L(b / l_sd, a / l_sr)
//! ```
//!
//! on the lattice `a, b in {0, T/N, ..., T}`. The transform values do not
//! depend on `W_c`, so a [`CfLattice`] can be reused while `W_c` is optimised.

use std::collections::HashMap;

use serde::Serialize;

use super::{EstimateKind, EstimateMeta, OutageEstimate, Protocol};
use crate::error::{Error, Result};
use crate::interference::{laplace_joint, laplace_marginal, JointTransformArgs, QuadratureSpec};
use crate::model::{LinkGeometry, NetworkModel, ProtocolParams};
use crate::quad::{integrate_to_infinity, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CfBoundParts {
    pub p_a_upper: f64,
    pub p_a_lower: f64,
    pub p_b_upper: f64,
    pub n_partitions: usize,
}

/// Joint-transform values on the rectangle lattice of one
/// `(network, geometry, T, N)` point.
#[derive(Debug, Clone)]
pub struct CfLattice {
    network: NetworkModel,
    geometry: LinkGeometry,
    threshold: f64,
    partitions: usize,
    step: f64,
    joint: HashMap<(usize, usize), f64>,
}

impl CfLattice {
    pub fn new(
        network: &NetworkModel,
        geometry: &LinkGeometry,
        threshold: f64,
        partitions: usize,
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(Error::Domain(format!(
                "SIR threshold must be positive, got {threshold}"
            )));
        }
        if partitions == 0 {
            return Err(Error::Domain("partition count must be at least 1".into()));
        }
        let n = partitions;
        let step = threshold / n as f64;
        let mut needed = Vec::with_capacity(4 * n + 2);
        for i in 0..=n {
            needed.push((i, 0));
            needed.push((0, i));
        }
        for m in 0..n {
            needed.push((m, n - m));
            needed.push((m + 1, n - m));
            needed.push((m, n - m - 1));
            needed.push((m + 1, n - m - 1));
        }
        needed.sort_unstable();
        needed.dedup();
        let mut joint = HashMap::with_capacity(needed.len());
        for (i, j) in needed {
            let w_d = j as f64 * step / geometry.l_sd();
            let w_r = i as f64 * step / geometry.l_sr();
            let v = laplace_joint(&JointTransformArgs::new(w_d, w_r, geometry, network), quad)?;
            joint.insert((i, j), v);
        }
        Ok(CfLattice {
            network: *network,
            geometry: *geometry,
            threshold,
            partitions,
            step,
            joint,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn partitions(&self) -> usize {
        self.partitions
    }

    pub fn network(&self) -> &NetworkModel {
        &self.network
    }

    pub fn geometry(&self) -> &LinkGeometry {
        &self.geometry
    }

    fn rect(&self, i: usize, j: usize, w_c: f64) -> f64 {
        let decay = if i == 0 || w_c == 0.0 {
            1.0
        } else {
            (-(i as f64) * self.step * w_c / self.geometry.l_sr()).exp()
        };
        decay * self.joint[&(i, j)]
    }

    /// Outer staircase cover of `{X + Y < T}`.
    pub fn a_upper(&self, w_c: f64) -> f64 {
        let n = self.partitions;
        let mut p = 1.0 - self.rect(n, 0, w_c);
        for m in 0..n {
            p -= self.rect(m, n - m, w_c) - self.rect(m + 1, n - m, w_c);
        }
        p.clamp(0.0, 1.0)
    }

    /// Inner staircase of `{X + Y < T}`.
    pub fn a_lower(&self, w_c: f64) -> f64 {
        let n = self.partitions;
        let mut p = 0.0;
        for m in 0..n {
            let strip = self.rect(m, 0, w_c) - self.rect(m + 1, 0, w_c);
            let above = self.rect(m, n - m - 1, w_c) - self.rect(m + 1, n - m - 1, w_c);
            p += strip - above;
        }
        p.clamp(0.0, 1.0)
    }

    /// Factorised bound on `P(not A, B)`.
    pub fn b_upper(&self, w_c: f64) -> Result<f64> {
        b_upper_factorised(&self.network, &self.geometry, self.threshold, w_c)
    }

    pub fn parts(&self, w_c: f64) -> Result<CfBoundParts> {
        Ok(CfBoundParts {
            p_a_upper: self.a_upper(w_c),
            p_a_lower: self.a_lower(w_c),
            p_b_upper: self.b_upper(w_c)?,
            n_partitions: self.partitions,
        })
    }

    /// `min(1, P_A^upper + P_B^upper)`.
    pub fn outage_upper(&self, w_c: f64) -> Result<f64> {
        Ok((self.a_upper(w_c) + self.b_upper(w_c)?).min(1.0))
    }
}

/// `E[L(kappa H)]` for a unit-mean exponential `H`.
fn expected_marginal(kappa: f64, network: &NetworkModel) -> Result<f64> {
    if kappa == 0.0 || network.lambda == 0.0 {
        return Ok(1.0);
    }
    if kappa.is_infinite() {
        return Ok(0.0);
    }
    let est = integrate_to_infinity(
        |h: f64| (-h).exp() * laplace_marginal(kappa * h, network).unwrap_or(0.0),
        &[0.0, 0.1, 1.0, 5.0, 30.0],
        Tolerance::relative(1e-12).with_abs(1e-15),
        1_000_000,
    )?;
    Ok(est.value.clamp(0.0, 1.0))
}

fn b_scale(geometry: &LinkGeometry, threshold: f64, w_c: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::Domain(format!(
            "SIR threshold must be positive, got {threshold}"
        )));
    }
    if !(w_c >= 0.0) {
        return Err(Error::Domain(format!(
            "compression noise must be non-negative, got {w_c}"
        )));
    }
    Ok((1.0 + threshold) / (threshold * w_c * geometry.l_rd()))
}

fn b_upper_factorised(
    network: &NetworkModel,
    geometry: &LinkGeometry,
    threshold: f64,
    w_c: f64,
) -> Result<f64> {
    if network.lambda == 0.0 {
        return Ok(0.0);
    }
    let c = b_scale(geometry, threshold, w_c)?;
    let e_d = expected_marginal(c * geometry.l_sr(), network)?;
    let e_r = expected_marginal(c * geometry.l_sd(), network)?;
    Ok((1.0 - e_d * e_r).clamp(0.0, 1.0))
}

/// Upper bound on `P(A_CF)`.
pub fn cf_event_a_upper(
    network: &NetworkModel,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    quad: &QuadratureSpec,
) -> Result<f64> {
    params.validate()?;
    Ok(CfLattice::new(network, geometry, params.threshold, params.partitions, quad)?.a_upper(params.w_c))
}

/// Lower bound on `P(A_CF)`.
pub fn cf_event_a_lower(
    network: &NetworkModel,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    quad: &QuadratureSpec,
) -> Result<f64> {
    params.validate()?;
    Ok(CfLattice::new(network, geometry, params.threshold, params.partitions, quad)?.a_lower(params.w_c))
}

/// Upper bound on `P(not A_CF, B_CF)` with the coupling term dropped, which
/// factorises the expectation into two one-dimensional integrals.
pub fn cf_event_b_upper(
    network: &NetworkModel,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    _quad: &QuadratureSpec,
) -> Result<f64> {
    params.validate()?;
    b_upper_factorised(network, geometry, params.threshold, params.w_c)
}

/// The tighter bound `1 - E[L(c l_sr H_sr, c l_sd H_sd)]` that keeps the
/// coupling term. Two-dimensional expectation; considerably slower.
pub fn cf_event_b_upper_joint(
    network: &NetworkModel,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    quad: &QuadratureSpec,
) -> Result<f64> {
    params.validate()?;
    if network.lambda == 0.0 {
        return Ok(0.0);
    }
    let c = b_scale(geometry, params.threshold, params.w_c)?;
    if c.is_infinite() {
        return Ok(1.0);
    }
    let (k1, k2) = (c * geometry.l_sr(), c * geometry.l_sd());
    let tol = Tolerance::relative(1e-7).with_abs(1e-12);
    let points = [0.0, 0.1, 1.0, 5.0, 30.0];
    let mut failure = None;
    let outer = integrate_to_infinity(
        |h1: f64| {
            if failure.is_some() {
                return 0.0;
            }
            let inner = integrate_to_infinity(
                |h2: f64| {
                    let args = JointTransformArgs::new(k1 * h1, k2 * h2, geometry, network);
                    match laplace_joint(&args, quad) {
                        Ok(v) => (-h2).exp() * v,
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    }
                },
                &points,
                tol,
                200_000,
            );
            match inner {
                Ok(est) => (-h1).exp() * est.value,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        &points,
        tol,
        200_000,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((1.0 - outer?.value).clamp(0.0, 1.0))
}

fn cf_meta(network: &NetworkModel, geometry: &LinkGeometry, params: &ProtocolParams) -> EstimateMeta {
    let mut meta = EstimateMeta::new(Protocol::Cf, network, geometry, params.threshold);
    meta.w_c = Some(params.w_c);
    meta.partitions = Some(params.partitions);
    meta
}

/// `min(1, P_A^upper + P_B^upper)` at the given `W_c`.
pub fn cf_outage_upper(
    network: &NetworkModel,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    quad: &QuadratureSpec,
) -> Result<OutageEstimate> {
    params.validate()?;
    let lattice = CfLattice::new(network, geometry, params.threshold, params.partitions, quad)?;
    Ok(OutageEstimate {
        value: lattice.outage_upper(params.w_c)?,
        kind: EstimateKind::UpperBound,
        stderr: None,
        meta: cf_meta(network, geometry, params),
    })
}

/// `P_A^lower`, a lower bound on the whole CF outage.
pub fn cf_outage_lower(
    network: &NetworkModel,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    quad: &QuadratureSpec,
) -> Result<OutageEstimate> {
    params.validate()?;
    let lattice = CfLattice::new(network, geometry, params.threshold, params.partitions, quad)?;
    Ok(OutageEstimate {
        value: lattice.a_lower(params.w_c),
        kind: EstimateKind::LowerBound,
        stderr: None,
        meta: cf_meta(network, geometry, params),
    })
}
