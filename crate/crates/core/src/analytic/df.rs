use serde::Serialize;

use super::{checked_probability, EstimateKind, EstimateMeta, OutageEstimate, Protocol};
use crate::error::{Error, Result};
use crate::interference::{laplace_joint, JointTransformArgs, QuadratureSpec};
use crate::model::{LinkGeometry, NetworkModel, ProtocolParams};

/// `|rho|` grid scanned by [`df_optimal_rho`].
pub const RHO_GRID: [f64; 20] = [
    0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9,
    0.95,
];

/// Relative gap under which `mu1` and `mu2` are treated as equal.
const DEGENERATE_MU_TOL: f64 = 1e-12;

/// Scales of the destination signal `V` (two independent exponential
/// components with means `mu1 <= mu2`) and of the relay branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DfIntermediates {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
}

/// Complementary CDF of `V = mu1 E1 + mu2 E2` with unit-mean exponentials.
pub fn fv_ccdf(s: f64, mu1: f64, mu2: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!(
            "CCDF argument must be non-negative, got {s}"
        )));
    }
    if !(mu2 > 0.0 && mu1 >= 0.0 && mu1 <= mu2) {
        return Err(Error::Domain(format!(
            "need 0 <= mu1 <= mu2 and mu2 > 0, got ({mu1}, {mu2})"
        )));
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    if mu2 - mu1 <= DEGENERATE_MU_TOL * mu2 {
        let x = s / mu1;
        return Ok((1.0 + x) * (-x).exp());
    }
    if mu1 == 0.0 {
        return Ok((-s / mu2).exp());
    }
    Ok((mu2 * (-s / mu2).exp() - mu1 * (-s / mu1).exp()) / (mu2 - mu1))
}

/// Eigen-means of the combined destination signal for correlation `|rho|`.
pub fn df_mu(rho_mag: f64, l_sd: f64, l_rd: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&rho_mag) {
        return Err(Error::Domain(format!("|rho| must lie in [0, 1], got {rho_mag}")));
    }
    if !(l_sd > 0.0 && l_rd > 0.0) {
        return Err(Error::Domain("path-loss gains must be positive".into()));
    }
    let sum = l_sd + l_rd;
    let disc = ((l_sd - l_rd).powi(2) + 4.0 * l_sd * l_rd * rho_mag * rho_mag).sqrt();
    let mu2 = 0.5 * (sum + disc);
    // product identity avoids cancellation in (sum - disc)
    let mu1 = (l_sd * l_rd * (1.0 - rho_mag * rho_mag) / mu2).min(mu2);
    Ok((mu1, mu2))
}

impl DfIntermediates {
    pub fn new(geometry: &LinkGeometry, rho_mag: f64) -> Result<Self> {
        let (mu1, mu2) = df_mu(rho_mag, geometry.l_sd(), geometry.l_rd())?;
        Ok(DfIntermediates {
            mu1,
            mu2,
            mu3: geometry.l_sr() * (1.0 - rho_mag * rho_mag),
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.mu2 - self.mu1 <= DEGENERATE_MU_TOL * self.mu2
    }
}

/// Exact decode-and-forward outage probability.
pub fn df_outage(
    network: &NetworkModel,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    quad: &QuadratureSpec,
) -> Result<OutageEstimate> {
    params.validate()?;
    if params.rho_mag >= 1.0 {
        return Err(Error::Domain(
            "decode-and-forward needs |rho| < 1 (the relay cannot decode otherwise)".into(),
        ));
    }
    let t = params.threshold;
    let mu = DfIntermediates::new(geometry, params.rho_mag)?;
    let joint = |w1: f64, w2: f64| laplace_joint(&JointTransformArgs::new(w1, w2, geometry, network), quad);
    let w3 = t / mu.mu3;

    let raw = if network.lambda == 0.0 {
        0.0
    } else if mu.is_degenerate() {
        // (1 + s/mu) e^(-s/mu) branch: E[...] = L - w dL/dw1 at w = T/mu1
        let w = t / mu.mu1;
        let h = 1e-6 * w;
        let l0 = joint(w, w3)?;
        let slope = (joint(w + h, w3)? - joint(w - h, w3)?) / (2.0 * h);
        1.0 - (l0 - w * slope)
    } else {
        let upper = mu.mu2 * joint(t / mu.mu2, w3)?;
        let lower = if mu.mu1 > 0.0 {
            mu.mu1 * joint(t / mu.mu1, w3)?
        } else {
            0.0
        };
        1.0 - (upper - lower) / (mu.mu2 - mu.mu1)
    };
    let value = checked_probability(raw, "decode-and-forward outage")?;
    let mut meta = EstimateMeta::new(Protocol::Df, network, geometry, t);
    meta.rho_mag = Some(params.rho_mag);
    Ok(OutageEstimate {
        value,
        kind: EstimateKind::ExactAnalytic,
        stderr: None,
        meta,
    })
}

/// Scans [`RHO_GRID`] and returns the minimising `|rho|` together with the
/// outage at each grid point. Ties go to the smallest `|rho|`.
pub fn df_optimal_rho(
    network: &NetworkModel,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    quad: &QuadratureSpec,
) -> Result<(f64, Vec<f64>)> {
    let values = RHO_GRID
        .iter()
        .map(|&rho| Ok(df_outage(network, geometry, &params.with_rho(rho), quad)?.value))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    Ok((RHO_GRID[best], values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interference::laplace_marginal;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1};
    use std::f64::consts::PI;

    #[test]
    fn fv_ccdf_values() {
        assert_eq!(fv_ccdf(0.0, 1.0, 2.0).unwrap(), 1.0);
        let v = fv_ccdf(1.0, 1.0, 2.0).unwrap();
        assert_relative_eq!(v, 2.0 * (-0.5f64).exp() - (-1.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(v, 0.845182, epsilon = 1e-6);
        let e = fv_ccdf(2.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(e, 3.0 * (-2.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(e, 0.406006, epsilon = 1e-6);
        assert_relative_eq!(
            fv_ccdf(1.5, 0.0, 2.0).unwrap(),
            (-0.75f64).exp(),
            max_relative = 1e-14
        );
        assert!(fv_ccdf(-1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn fv_ccdf_against_sampling() {
        // V = 1 * E1 + 2 * E2
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 400_000;
        let hits = (0..n)
            .filter(|_| {
                let e1: f64 = Exp1.sample(&mut rng);
                let e2: f64 = Exp1.sample(&mut rng);
                e1 + 2.0 * e2 >= 1.0
            })
            .count();
        let p = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p - fv_ccdf(1.0, 1.0, 2.0).unwrap()).abs() < 3.0 * se);
    }

    #[test]
    fn fv_ccdf_continuous_at_branch() {
        let s = 0.7;
        let eq = fv_ccdf(s, 1.0, 1.0).unwrap();
        let near = fv_ccdf(s, 1.0, 1.0 + 1e-6).unwrap();
        assert!((eq - near).abs() < 1e-6);
    }

    #[test]
    fn df_mu_examples() {
        let (m1, m2) = df_mu(0.0, 2.0, 1.0).unwrap();
        assert_relative_eq!(m1, 1.0, max_relative = 1e-15);
        assert_relative_eq!(m2, 2.0, max_relative = 1e-15);
        let (m1, m2) = df_mu(1.0, 3.0, 5.0).unwrap();
        assert_eq!(m1, 0.0);
        assert_relative_eq!(m2, 8.0, max_relative = 1e-15);
        let (m1, m2) = df_mu(0.5, 1.0, 1.0).unwrap();
        assert_relative_eq!(m1, 0.5, max_relative = 1e-15);
        assert_relative_eq!(m2, 1.5, max_relative = 1e-15);
    }

    proptest! {
        #[test]
        fn df_mu_identities(rho in 0.0f64..=1.0, a in 1e-6f64..10.0, b in 1e-6f64..10.0) {
            let (m1, m2) = df_mu(rho, a, b).unwrap();
            prop_assert!(m1 >= 0.0 && m1 <= m2);
            prop_assert!(((m1 + m2) - (a + b)).abs() <= 1e-12 * (a + b));
            prop_assert!((m1 * m2 - a * b * (1.0 - rho * rho)).abs() <= 1e-12 * a * b);
        }

        #[test]
        fn fv_ccdf_is_a_ccdf(s1 in 0.0f64..20.0, ds in 0.0f64..5.0, m1 in 0.0f64..3.0, extra in 0.0f64..3.0) {
            let m2 = m1 + extra + 1e-3;
            let a = fv_ccdf(s1, m1, m2).unwrap();
            let b = fv_ccdf(s1 + ds, m1, m2).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
            prop_assert!(b <= a + 1e-12);
        }
    }

    fn setup(lambda: f64, k: f64) -> (NetworkModel, LinkGeometry, ProtocolParams) {
        (
            NetworkModel::new(lambda, 4.0).unwrap(),
            LinkGeometry::new(10.0, k, 0.0, 4.0).unwrap(),
            ProtocolParams::new(3.0).unwrap(),
        )
    }

    #[test]
    fn df_zero_density() {
        let (n, g, p) = setup(0.0, 0.2);
        assert_eq!(
            df_outage(&n, &g, &p, &QuadratureSpec::default()).unwrap().value,
            0.0
        );
    }

    #[test]
    fn df_rejects_full_correlation() {
        let (n, g, p) = setup(1e-4, 0.2);
        assert!(df_outage(&n, &g, &p.with_rho(1.0), &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn df_far_relay_limit() {
        // relay far away: mu1 = l_rd ~ 0, mu2 ~ l_sd
        let (n, g, p) = setup(1e-4, 100.0);
        let q = QuadratureSpec::default();
        let df = df_outage(&n, &g, &p, &q).unwrap().value;
        let two_constraints = 1.0
            - laplace_joint(
                &JointTransformArgs::new(3.0 / g.l_sd(), 3.0 / g.l_sr(), &g, &n),
                &q,
            )
            .unwrap();
        assert_relative_eq!(df, two_constraints, max_relative = 1e-6);
    }

    #[test]
    fn df_between_single_link_bounds() {
        // P(A) <= P(A u B) <= P(A) + P(B)
        let (n, g, p) = setup(1e-4, 0.6);
        let q = QuadratureSpec::default();
        let df = df_outage(&n, &g, &p, &q).unwrap().value;
        let pa = 1.0 - laplace_marginal(3.0 / g.l_sr(), &n).unwrap();
        let mu = DfIntermediates::new(&g, 0.0).unwrap();
        let pb = 1.0
            - (mu.mu2 * laplace_marginal(3.0 / mu.mu2, &n).unwrap()
                - mu.mu1 * laplace_marginal(3.0 / mu.mu1, &n).unwrap())
                / (mu.mu2 - mu.mu1);
        assert!(df >= pa.max(pb) - 1e-12);
        assert!(df <= pa + pb + 1e-12);
    }

    #[test]
    fn df_degenerate_branch_is_continuous() {
        // equilateral triangle: l_sd = l_rd, rho = 0
        let n = NetworkModel::new(0.02, 4.0).unwrap();
        let p = ProtocolParams::new(1.0).unwrap();
        let q = QuadratureSpec::default();
        let g = LinkGeometry::new(1.0, 1.0, PI / 3.0, 4.0).unwrap();
        assert!(DfIntermediates::new(&g, 0.0).unwrap().is_degenerate());
        let at = df_outage(&n, &g, &p, &q).unwrap().value;
        let g2 = LinkGeometry::new(1.0, 1.0 + 1e-3, PI / 3.0, 4.0).unwrap();
        let near = df_outage(&n, &g2, &p, &q).unwrap().value;
        assert!(at > 0.0 && at < 1.0);
        assert!((at - near).abs() < 2e-3 * at, "{at} vs {near}");
    }

    #[test]
    fn df_monotone_in_rho_and_optimal_at_zero() {
        let (n, g, p) = setup(1e-4, 0.2);
        let q = QuadratureSpec::default();
        let (best, values) = df_optimal_rho(&n, &g, &p, &q).unwrap();
        assert_eq!(best, 0.0);
        for w in values.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        let (n0, _, _) = setup(0.0, 0.2);
        assert_eq!(df_optimal_rho(&n0, &g, &p, &q).unwrap().0, 0.0);
    }
}
