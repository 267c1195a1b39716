use serde::Serialize;

use super::cf::CfLattice;
use super::df::df_mu;
use super::{checked_probability, EstimateKind, EstimateMeta, OutageEstimate, Protocol};
use crate::error::{Error, Result};
use crate::interference::{constant_c, laplace_marginal, QuadratureSpec};
use crate::model::{LinkGeometry, NetworkModel, ProtocolParams};

/// `|rho|` values over which the cut-set bound is minimised. `|rho| = 1` is
/// excluded: the broadcast term needs an infinite SIR there.
pub const CUTSET_RHO_GRID: [f64; 20] = super::df::RHO_GRID;

/// The two cut-set terms at one `|rho|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutsetPoint {
    pub rho_mag: f64,
    /// Lower bound on the broadcast-cut outage; `None` when it was not needed
    /// to decide the minimum.
    pub broadcast_lower: Option<f64>,
    /// Multiple-access-cut outage (exact).
    pub mac: f64,
}

/// `P(V / I_d < T)`: the destination (multiple-access) cut.
pub fn cutset_destination_term(
    network: &NetworkModel,
    geometry: &LinkGeometry,
    threshold: f64,
    rho_mag: f64,
) -> Result<f64> {
    if network.lambda == 0.0 {
        return Ok(0.0);
    }
    let (mu1, mu2) = df_mu(rho_mag, geometry.l_sd(), geometry.l_rd())?;
    let raw = if mu2 - mu1 <= 1e-12 * mu2 {
        // E[(1 + w I) e^(-w I)] = L(w) (1 + lambda C p w^p)
        let w = threshold / mu1;
        let p = 2.0 / network.alpha;
        let c = constant_c(network.alpha)?;
        1.0 - laplace_marginal(w, network)? * (1.0 + network.lambda * c * p * w.powf(p))
    } else {
        let hi = mu2 * laplace_marginal(threshold / mu2, network)?;
        let lo = if mu1 > 0.0 {
            mu1 * laplace_marginal(threshold / mu1, network)?
        } else {
            0.0
        };
        1.0 - (hi - lo) / (mu2 - mu1)
    };
    checked_probability(raw, "cut-set destination term")
}

/// Lower bound on the outage of every relaying scheme:
/// `min_rho max(P_broadcast(rho), P_mac(rho))`, where the broadcast term is
/// itself lower-bounded by the inner rectangle cover with `W_c = 0` and
/// threshold `T / (1 - rho^2)`.
pub fn cutset_outage_lower(
    network: &NetworkModel,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    quad: &QuadratureSpec,
) -> Result<OutageEstimate> {
    let (value, rho, _) = cutset_scan(network, geometry, params, quad)?;
    let mut meta = EstimateMeta::new(Protocol::Cutset, network, geometry, params.threshold);
    meta.rho_mag = Some(rho);
    meta.partitions = Some(params.partitions);
    Ok(OutageEstimate {
        value,
        kind: EstimateKind::LowerBound,
        stderr: None,
        meta,
    })
}

/// Full scan of [`CUTSET_RHO_GRID`]: the minimum, its argmin and the
/// per-`rho` terms. The broadcast term is skipped wherever the MAC term alone
/// already exceeds the running minimum.
pub fn cutset_scan(
    network: &NetworkModel,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    quad: &QuadratureSpec,
) -> Result<(f64, f64, Vec<CutsetPoint>)> {
    params.validate()?;
    if network.lambda == 0.0 {
        return Ok((0.0, 0.0, Vec::new()));
    }
    let mut points = Vec::with_capacity(CUTSET_RHO_GRID.len());
    let mut best = f64::INFINITY;
    let mut best_rho = 0.0;
    for &rho in CUTSET_RHO_GRID.iter() {
        let mac = cutset_destination_term(network, geometry, params.threshold, rho)?;
        if mac >= best {
            points.push(CutsetPoint {
                rho_mag: rho,
                broadcast_lower: None,
                mac,
            });
            continue;
        }
        let t_eff = params.threshold / (1.0 - rho * rho);
        let broadcast = CfLattice::new(network, geometry, t_eff, params.partitions, quad)?.a_lower(0.0);
        let v = broadcast.max(mac);
        if v < best {
            best = v;
            best_rho = rho;
        }
        points.push(CutsetPoint {
            rho_mag: rho,
            broadcast_lower: Some(broadcast),
            mac,
        });
    }
    if !best.is_finite() {
        return Err(Error::Domain("cut-set scan produced no value".into()));
    }
    Ok((best, best_rho, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{cf_outage_upper, df_outage};

    #[test]
    fn zero_density() {
        let n = NetworkModel::new(0.0, 4.0).unwrap();
        let g = LinkGeometry::new(10.0, 0.2, 0.0, 4.0).unwrap();
        let p = ProtocolParams::new(3.0).unwrap();
        let v = cutset_outage_lower(&n, &g, &p, &QuadratureSpec::default()).unwrap();
        assert_eq!(v.value, 0.0);
        assert_eq!(v.kind, EstimateKind::LowerBound);
    }

    #[test]
    fn destination_term_degenerate_branch_continuous() {
        let n = NetworkModel::new(0.05, 4.0).unwrap();
        let g = LinkGeometry::new(1.0, 1.0, std::f64::consts::PI / 3.0, 4.0).unwrap();
        let g2 = LinkGeometry::new(1.0, 1.0 + 1e-5, std::f64::consts::PI / 3.0, 4.0).unwrap();
        let a = cutset_destination_term(&n, &g, 1.0, 0.0).unwrap();
        let b = cutset_destination_term(&n, &g2, 1.0, 0.0).unwrap();
        assert!((a - b).abs() < 1e-4 * a, "{a} vs {b}");
    }

    #[test]
    fn below_df_and_cf() {
        let q = QuadratureSpec::default();
        let n = NetworkModel::new(1e-4, 4.0).unwrap();
        let p = ProtocolParams::new(3.0).unwrap().with_partitions(16);
        for k in [0.2, 0.9] {
            let g = LinkGeometry::new(10.0, k, 0.0, 4.0).unwrap();
            let cs = cutset_outage_lower(&n, &g, &p, &q).unwrap().value;
            let df = df_outage(&n, &g, &p, &q).unwrap().value;
            assert!(cs <= df, "k = {k}: cut-set {cs} above DF {df}");
            for w_c in [1e-8, 1e-6, 1e-4, 1e-2] {
                let cf = cf_outage_upper(&n, &g, &p.with_w_c(w_c), &q).unwrap().value;
                assert!(cs <= cf, "k = {k}, w_c = {w_c}: cut-set {cs} above CF {cf}");
            }
        }
    }
}
