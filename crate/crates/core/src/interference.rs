//! Laplace transforms of the Poisson shot-noise fields seen at the destination
//! (`I_d`) and at the relay (`I_r`).
//!
//! With unit-mean exponential marks and path loss `|x|^-alpha` the marginal
//! transform is `exp(-lambda C w^(2/alpha))`. The joint transform carries a
//! correction for the interferers shared by both observation points:
//!
//! ```text
//! L(w1, w2) = exp(-lambda (C w1^(2/alpha) + C w2^(2/alpha) - f(w1, w2)))
//! f(w1, w2) = int_R2 w1 w2 / ((w1 + |x-d|^alpha)(w2 + |x-r|^alpha)) dx
//! ```
//!
//! `f` is computed by nested adaptive quadrature in polar coordinates around
//! the destination point; [`pgfl_joint_oracle`] integrates the full
//! generating-functional exponent around the midpoint instead and serves as an
//! independent check.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::model::{path_loss_sq, pow_alpha_sq, LinkGeometry, NetworkModel, Point};
use crate::quad::{integrate, integrate_to_infinity, Tolerance};

/// `C(alpha) = 2 pi Gamma(2/alpha) Gamma(1 - 2/alpha) / alpha`.
pub fn constant_c(alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 2.0) {
        return Err(Error::Divergence { alpha });
    }
    let delta = 2.0 / alpha;
    let g = statrs::function::gamma::gamma;
    Ok(2.0 * PI * g(delta) * g(1.0 - delta) / alpha)
}

/// `E[exp(-omega I)]` for the interference at any single point.
pub fn laplace_marginal(omega: f64, network: &NetworkModel) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(Error::Domain(format!(
            "transform argument must be non-negative, got {omega}"
        )));
    }
    if omega == 0.0 || network.lambda == 0.0 {
        return Ok(1.0);
    }
    let c = constant_c(network.alpha)?;
    Ok((-network.lambda * c * omega.powf(2.0 / network.alpha)).exp())
}

/// Arguments of the joint transform: `omega1` multiplies the interference at
/// `dest`, `omega2` the interference at `relay`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTransformArgs {
    pub omega1: f64,
    pub omega2: f64,
    pub dest: Point,
    pub relay: Point,
    pub network: NetworkModel,
}

impl JointTransformArgs {
    pub fn new(omega1: f64, omega2: f64, geometry: &LinkGeometry, network: &NetworkModel) -> Self {
        JointTransformArgs {
            omega1,
            omega2,
            dest: geometry.destination(),
            relay: geometry.relay(),
            network: *network,
        }
    }

    /// Same field observed at two arbitrary points.
    pub fn at_points(omega1: f64, omega2: f64, dest: Point, relay: Point, network: &NetworkModel) -> Self {
        JointTransformArgs {
            omega1,
            omega2,
            dest,
            relay,
            network: *network,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.omega1 >= 0.0 && self.omega2 >= 0.0) || !self.omega1.is_finite() || !self.omega2.is_finite()
        {
            return Err(Error::Domain(format!(
                "transform arguments must be finite and non-negative, got ({}, {})",
                self.omega1, self.omega2
            )));
        }
        Ok(())
    }

    fn separation(&self) -> f64 {
        self.dest.dist(self.relay)
    }
}

/// How the planar integrals are split into a finite disk and a far field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusPolicy {
    /// Multiples of the interaction scales `omega^(1/alpha)` kept inside the disk.
    pub scale_multiple: f64,
    /// Multiple of the point separation kept inside the disk.
    pub separation_multiple: f64,
}

impl Default for RadiusPolicy {
    fn default() -> Self {
        RadiusPolicy {
            scale_multiple: 8.0,
            separation_multiple: 2.0,
        }
    }
}

impl RadiusPolicy {
    /// Radius of the disk integrated directly. The remainder is integrated
    /// after the inversion `rho -> 1/rho`.
    pub fn radius(&self, omega1: f64, omega2: f64, alpha: f64, separation: f64) -> f64 {
        let s = omega1.max(omega2).powf(1.0 / alpha);
        (self.scale_multiple * s)
            .max(self.separation_multiple * separation + 4.0 * s)
            .max(1e-300)
    }

    /// Upper bound on the part of `f` lying outside `radius`, from
    /// `w1 w2 / (|x-d|^alpha |x-r|^alpha) <= w1 w2 (rho - delta)^-2alpha`.
    pub fn coupling_tail_bound(
        &self,
        omega1: f64,
        omega2: f64,
        alpha: f64,
        separation: f64,
        radius: f64,
    ) -> f64 {
        let r = (radius - separation).max(f64::MIN_POSITIVE);
        2.0 * PI * omega1 * omega2 * r.powf(2.0 - 2.0 * alpha) / (2.0 * alpha - 2.0) * (radius / r)
    }
}

/// Memo table for the coupling integral keyed on `(w1, w2, |d - r|, alpha)`.
#[derive(Debug, Default)]
pub struct CouplingCache {
    table: RwLock<HashMap<[u64; 4], f64>>,
}

impl CouplingCache {
    fn key(omega1: f64, omega2: f64, separation: f64, alpha: f64) -> [u64; 4] {
        [
            omega1.to_bits(),
            omega2.to_bits(),
            separation.to_bits(),
            alpha.to_bits(),
        ]
    }

    fn get(&self, key: &[u64; 4]) -> Option<f64> {
        self.table.read().ok()?.get(key).copied()
    }

    fn insert(&self, key: [u64; 4], value: f64) {
        if let Ok(mut t) = self.table.write() {
            t.insert(key, value);
        }
    }

    pub fn len(&self) -> usize {
        self.table.read().map(|t| t.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Accuracy controls for the planar integrals.
#[derive(Debug, Clone)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub radius_policy: RadiusPolicy,
    /// Cap on integrand evaluations for one planar integral.
    pub max_evaluations: usize,
    /// Shared memo table for `f`, or `None` to always recompute.
    pub cache: Option<Arc<CouplingCache>>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-8,
            radius_policy: RadiusPolicy::default(),
            max_evaluations: 20_000_000,
            cache: Some(Arc::new(CouplingCache::default())),
        }
    }
}

impl QuadratureSpec {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn without_cache(mut self) -> Self {
        self.cache = None;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::Domain(format!(
                "relative tolerance must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

/// Angular breakpoints for a circle of radius `rho` around one point when a
/// feature of size `scale` sits at distance `separation` in direction 0.
fn peak_breaks(rho: f64, separation: f64, scale: f64) -> Option<f64> {
    if rho <= 0.0 {
        return None;
    }
    let width = 2.0 * scale.max((rho - separation).abs()) / rho;
    (width < 0.5 * PI).then_some(width)
}

fn push_sorted(points: &mut Vec<f64>, lo: f64, hi: f64, candidates: &[f64]) {
    points.push(lo);
    points.extend(candidates.iter().copied().filter(|&p| p > lo && p < hi));
    points.push(hi);
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
}

/// The coupling integral `f(w1, w2)` between the transforms at `dest` and
/// `relay`. Bounded by `min(C w1^(2/alpha), C w2^(2/alpha))`.
pub fn coupling_integral_f(args: &JointTransformArgs, quad: &QuadratureSpec) -> Result<f64> {
    args.validate()?;
    quad.validate()?;
    let alpha = args.network.alpha;
    if !(alpha > 2.0) {
        return Err(Error::Divergence { alpha });
    }
    let (w1, w2) = (args.omega1, args.omega2);
    if w1 == 0.0 || w2 == 0.0 {
        return Ok(0.0);
    }
    let sep = args.separation();
    let key = CouplingCache::key(w1, w2, sep, alpha);
    if let Some(cache) = &quad.cache {
        if let Some(v) = cache.get(&key) {
            return Ok(v);
        }
    }
    let value = coupling_quadrature(w1, w2, sep, alpha, quad)?;
    if let Some(cache) = &quad.cache {
        cache.insert(key, value);
    }
    Ok(value)
}

fn coupling_quadrature(w1: f64, w2: f64, sep: f64, alpha: f64, quad: &QuadratureSpec) -> Result<f64> {
    let c = constant_c(alpha)?;
    let p = 2.0 / alpha;
    let s1 = w1.powf(1.0 / alpha);
    let s2 = w2.powf(1.0 / alpha);
    let radius = quad.radius_policy.radius(w1, w2, alpha, sep);
    // Errors are judged against the full transform exponent, not f alone.
    let scale = c * (w1.powf(p) + w2.powf(p));
    let outer_tol = Tolerance::relative(quad.rel_tol).with_abs(1e-3 * quad.rel_tol * scale);
    let inner_rel = 0.1 * quad.rel_tol;

    let mut evaluations = 0usize;
    let mut failure: Option<Error> = None;
    let budget = quad.max_evaluations;
    let mut angular_points = Vec::with_capacity(4);

    // Polar coordinates around the destination, angle measured from the
    // direction of the relay; the integrand is even in the angle.
    let outer = |rho: f64| -> f64 {
        if rho == 0.0 || failure.is_some() {
            return 0.0;
        }
        let rho2 = rho * rho;
        let a = 1.0 / (1.0 + pow_alpha_sq(rho2, alpha) / w1);
        let inner = |phi: f64| {
            let half = (0.5 * phi).sin();
            let q2 = (rho - sep).powi(2) + 4.0 * rho * sep * half * half;
            1.0 / (1.0 + pow_alpha_sq(q2, alpha) / w2)
        };
        angular_points.clear();
        let cand = peak_breaks(rho, sep, s2);
        push_sorted(&mut angular_points, 0.0, PI, cand.as_slice());
        let left = budget.saturating_sub(evaluations);
        match integrate(
            inner,
            &angular_points,
            Tolerance::relative(inner_rel).with_abs(1e-300),
            left,
        ) {
            Ok(est) => {
                evaluations += est.evaluations;
                2.0 * rho * a * est.value
            }
            Err(e) => {
                failure = Some(e);
                0.0
            }
        }
    };

    let mut radial = Vec::with_capacity(12);
    let cands = [
        s1,
        2.0 * s1,
        sep - 4.0 * s2,
        sep - s2,
        sep,
        sep + s2,
        sep + 4.0 * s2,
    ];
    push_sorted(&mut radial, 0.0, radius, &cands);
    let est = integrate_to_infinity(outer, &radial, outer_tol, budget);
    if let Some(e) = failure {
        return Err(e);
    }
    let est = est?;
    Ok(est.value.max(0.0))
}

/// Joint transform `E[exp(-w1 I_d - w2 I_r)]`.
pub fn laplace_joint(args: &JointTransformArgs, quad: &QuadratureSpec) -> Result<f64> {
    args.validate()?;
    let lambda = args.network.lambda;
    if lambda == 0.0 {
        return Ok(1.0);
    }
    let alpha = args.network.alpha;
    let c = constant_c(alpha)?;
    let p = 2.0 / alpha;
    let f = coupling_integral_f(args, quad)?;
    let exponent = c * args.omega1.powf(p) + c * args.omega2.powf(p) - f;
    Ok((-lambda * exponent.max(0.0)).exp())
}

/// Joint transform computed directly from the generating functional of the
/// marked process, `exp(-lambda int (1 - 1/((1 + w1 l_d)(1 + w2 l_r))) dx)`,
/// integrated in absolute polar coordinates around the midpoint of the two
/// observation points.
pub fn pgfl_joint_oracle(args: &JointTransformArgs, quad: &QuadratureSpec) -> Result<f64> {
    args.validate()?;
    quad.validate()?;
    let net = args.network;
    if net.lambda == 0.0 || (args.omega1 == 0.0 && args.omega2 == 0.0) {
        return Ok(1.0);
    }
    Ok((-net.lambda * pgfl_exponent(args, quad)?).exp())
}

/// `int_R2 (1 - 1/((1 + w1 l(x - d))(1 + w2 l(x - r)))) dx`.
pub fn pgfl_exponent(args: &JointTransformArgs, quad: &QuadratureSpec) -> Result<f64> {
    let alpha = args.network.alpha;
    let (w1, w2) = (args.omega1, args.omega2);
    let center = args.dest.midpoint(args.relay);
    let half_sep = 0.5 * args.separation();
    let s = w1.max(w2).powf(1.0 / alpha);
    let s_min = {
        let a = if w1 > 0.0 { w1 } else { w2 };
        let b = if w2 > 0.0 { w2 } else { w1 };
        a.min(b).powf(1.0 / alpha)
    };
    let radius = (8.0 * s).max(4.0 * half_sep + 4.0 * s);
    let dir_d = (args.dest.y - center.y).atan2(args.dest.x - center.x);
    let dir_r = (args.relay.y - center.y).atan2(args.relay.x - center.x);

    let term = |omega: f64, obs: Point, x: Point| -> f64 {
        if omega == 0.0 {
            0.0
        } else {
            let l = path_loss_sq(x.dist2(obs), alpha);
            omega * l / (1.0 + omega * l)
        }
    };

    let mut evaluations = 0usize;
    let mut failure: Option<Error> = None;
    let budget = quad.max_evaluations;
    let outer = |rho: f64| -> f64 {
        if rho == 0.0 || failure.is_some() {
            return 0.0;
        }
        let inner = |phi: f64| {
            let x = Point::new(center.x + rho * phi.cos(), center.y + rho * phi.sin());
            let a = term(w1, args.dest, x);
            let b = term(w2, args.relay, x);
            a + b - a * b
        };
        // Break the circle at both observation directions (and their
        // neighbourhoods when the circle passes close to them).
        let mut pts = vec![0.0, 2.0 * PI];
        for dir in [dir_d, dir_r] {
            let base = dir.rem_euclid(2.0 * PI);
            pts.push(base);
            if let Some(w) = peak_breaks(rho, half_sep, s_min) {
                pts.push((base - w).rem_euclid(2.0 * PI));
                pts.push((base + w).rem_euclid(2.0 * PI));
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let left = budget.saturating_sub(evaluations);
        match integrate(
            inner,
            &pts,
            Tolerance::relative(0.1 * quad.rel_tol).with_abs(1e-300),
            left,
        ) {
            Ok(est) => {
                evaluations += est.evaluations;
                rho * est.value
            }
            Err(e) => {
                failure = Some(e);
                0.0
            }
        }
    };
    let mut radial = Vec::new();
    let cands = [
        half_sep - 4.0 * s,
        half_sep - s_min,
        half_sep,
        half_sep + s_min,
        half_sep + 4.0 * s,
        s,
    ];
    push_sorted(&mut radial, 0.0, radius, &cands);
    let est = integrate_to_infinity(outer, &radial, Tolerance::relative(quad.rel_tol), budget);
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(est?.value)
}
