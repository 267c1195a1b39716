//! Parameter optimisation and experiment grids.

use serde::Serialize;

use crate::analytic::{
    cutset_outage_lower, df_outage, direct_max_threshold, direct_outage, CfLattice, EstimateKind,
    EstimateMeta, OutageEstimate, Protocol,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::interference::QuadratureSpec;
use crate::model::{LinkGeometry, NetworkModel, Point, ProtocolParams};

/// Search range of `log10(W_c)`.
pub const WC_LOG10_RANGE: (f64, f64) = (-8.0, 4.0);
/// Golden-section stops once `W_c` is pinned to this relative width.
pub const WC_REL_WIDTH: f64 = 1e-3;
/// Size of the fallback grid when the bound does not look unimodal.
pub const WC_GRID_POINTS: usize = 64;
/// Bisection range for the SIR threshold.
pub const RATE_BRACKET: (f64, f64) = (1e-6, 1e6);
/// Bisection stops once `T` is pinned to this relative width.
pub const RATE_REL_WIDTH: f64 = 1e-4;

const INV_PHI: f64 = 0.618_033_988_749_894_9;
/// Bound values closer than this are treated as equal.
const FLAT_TOL: f64 = 1e-12;

/// Result of the `W_c` search over [`WC_LOG10_RANGE`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WcOptimum {
    pub w_c: f64,
    /// CF outage upper bound at `w_c`.
    pub value: f64,
    /// The bound in the limit `W_c -> inf`, where the relay stays silent and
    /// CF falls back to direct transmission.
    pub silent_value: f64,
    /// The golden-section result was replaced by a grid scan.
    pub grid_fallback: bool,
    /// The bound is flat over the whole range and `w_c` is the range midpoint.
    pub flat: bool,
    pub evaluations: usize,
}

/// Minimises the CF outage upper bound over `W_c` at the lattice's threshold.
pub fn optimize_wc_on(lattice: &CfLattice) -> Result<WcOptimum> {
    let mut seen: Vec<(f64, f64)> = Vec::new();
    let eval = |x: f64, seen: &mut Vec<(f64, f64)>| -> Result<f64> {
        let v = lattice.outage_upper(10f64.powf(x))?;
        seen.push((x, v));
        Ok(v)
    };

    let (mut a, mut b) = WC_LOG10_RANGE;
    let fa = eval(a, &mut seen)?;
    let fb = eval(b, &mut seen)?;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c, &mut seen)?;
    let mut fd = eval(d, &mut seen)?;
    let stop = (1.0 + WC_REL_WIDTH).log10();
    let mut suspicious = false;
    while b - a > stop {
        if (fc - fd).abs() <= FLAT_TOL {
            // a plateau gives golden section no direction
            suspicious = true;
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c, &mut seen)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d, &mut seen)?;
        }
    }
    let (mut x_best, mut f_best) = if fc <= fd { (c, fc) } else { (d, fd) };
    // a point left outside the final bracket that beats it means the
    // bracket shrank the wrong way
    if seen.iter().any(|&(x, v)| (x < a || x > b) && v < f_best) {
        suspicious = true;
    }

    let (lo, hi) = WC_LOG10_RANGE;
    let mut grid_fallback = false;
    if suspicious {
        grid_fallback = true;
        for i in 0..WC_GRID_POINTS {
            let x = lo + (hi - lo) * i as f64 / (WC_GRID_POINTS - 1) as f64;
            let v = eval(x, &mut seen)?;
            if v < f_best {
                x_best = x;
                f_best = v;
            }
        }
    }
    for (x, v) in [(lo, fa), (hi, fb)] {
        if v < f_best {
            x_best = x;
            f_best = v;
        }
    }
    let flat = seen.iter().all(|&(_, v)| v - f_best <= FLAT_TOL);
    if flat {
        x_best = 0.5 * (lo + hi);
        f_best = eval(x_best, &mut seen)?;
    }
    Ok(WcOptimum {
        w_c: 10f64.powf(x_best),
        value: f_best,
        silent_value: lattice.outage_upper(f64::INFINITY)?,
        grid_fallback,
        flat,
        evaluations: seen.len(),
    })
}

impl WcOptimum {
    /// Best `(W_c, bound)` once the silent relay is allowed; `W_c` is
    /// infinite when silence wins.
    pub fn overall(&self) -> (f64, f64) {
        if self.silent_value < self.value {
            (f64::INFINITY, self.silent_value)
        } else {
            (self.w_c, self.value)
        }
    }
}

/// Builds the lattice for `params` and minimises over `W_c`.
pub fn optimize_wc(
    network: &NetworkModel,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    quad: &QuadratureSpec,
) -> Result<WcOptimum> {
    params.validate()?;
    let lattice = CfLattice::new(network, geometry, params.threshold, params.partitions, quad)?;
    optimize_wc_on(&lattice)
}

/// CF upper and lower bounds at the optimised `W_c`, silent relay included.
pub fn cf_optimized(
    network: &NetworkModel,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    quad: &QuadratureSpec,
) -> Result<(OutageEstimate, OutageEstimate, WcOptimum)> {
    params.validate()?;
    let lattice = CfLattice::new(network, geometry, params.threshold, params.partitions, quad)?;
    let opt = optimize_wc_on(&lattice)?;
    let (w_c, value) = opt.overall();
    let mut meta = EstimateMeta::new(Protocol::Cf, network, geometry, params.threshold);
    meta.w_c = Some(w_c);
    meta.partitions = Some(params.partitions);
    let upper = OutageEstimate {
        value,
        kind: EstimateKind::UpperBound,
        stderr: None,
        meta: meta.clone(),
    };
    let lower = OutageEstimate {
        value: lattice.a_lower(w_c),
        kind: EstimateKind::LowerBound,
        stderr: None,
        meta,
    };
    Ok((upper, lower, opt))
}

/// Outage used by the rate solver and sweeps for each protocol: DF exact at
/// `params.rho_mag`, CF upper bound at the optimised `W_c` (silent relay
/// included), direct exact, cut-set lower bound.
pub fn protocol_outage(
    protocol: Protocol,
    network: &NetworkModel,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    quad: &QuadratureSpec,
) -> Result<OutageEstimate> {
    match protocol {
        Protocol::Df => df_outage(network, geometry, params, quad),
        Protocol::Cf => Ok(cf_optimized(network, geometry, params, quad)?.0),
        Protocol::Direct => direct_outage(network, geometry.distance(), params.threshold),
        Protocol::Cutset => cutset_outage_lower(network, geometry, params, quad),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxRate {
    pub protocol: Protocol,
    pub target: f64,
    /// Largest threshold meeting the target; 0 when none in the bracket does.
    pub threshold: f64,
    /// `log2(1 + threshold)`.
    pub rate: f64,
    /// Outage at `threshold`, absent when `threshold` is 0.
    pub outage: Option<OutageEstimate>,
    pub evaluations: usize,
}

/// Largest `T` with `outage(T) <= target`: a per-decade scan of
/// [`RATE_BRACKET`] followed by bisection on `log T` above the last feasible
/// decade.
pub fn max_rate(
    protocol: Protocol,
    target: f64,
    network: &NetworkModel,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    quad: &QuadratureSpec,
) -> Result<MaxRate> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain(format!(
            "target outage must lie in (0, 1), got {target}"
        )));
    }
    let mut evaluations = 0usize;
    let mut outage = |t: f64| -> Result<OutageEstimate> {
        evaluations += 1;
        protocol_outage(protocol, network, geometry, &params.with_threshold(t), quad)
    };
    // bounds (CF in particular) need not be monotone near T = 0, so the
    // bisection starts from the last feasible point of a per-decade scan
    let (t_min, t_max) = RATE_BRACKET;
    let decades = (t_max / t_min).log10().round() as i32;
    let mut feasible: Option<(f64, OutageEstimate)> = None;
    let mut infeasible_above = None;
    for i in 0..=decades {
        let t = t_min * 10f64.powi(i);
        let e = outage(t)?;
        if e.value <= target {
            feasible = Some((t, e));
            infeasible_above = None;
        } else if feasible.is_some() && infeasible_above.is_none() {
            infeasible_above = Some(t);
        }
    }
    let Some((mut lo, mut best)) = feasible else {
        return Ok(MaxRate {
            protocol,
            target,
            threshold: 0.0,
            rate: 0.0,
            outage: None,
            evaluations,
        });
    };
    let Some(mut hi) = infeasible_above else {
        return Err(Error::BracketExhausted(format!(
            "{protocol} outage stays below {target} up to T = {t_max}"
        )));
    };
    while hi / lo - 1.0 > RATE_REL_WIDTH {
        let mid = (lo * hi).sqrt();
        let e = outage(mid)?;
        if e.value <= target {
            lo = mid;
            best = e;
        } else {
            hi = mid;
        }
    }
    Ok(MaxRate {
        protocol,
        target,
        threshold: lo,
        rate: lo.ln_1p() / std::f64::consts::LN_2,
        outage: Some(best),
        evaluations,
    })
}

/// Closed-form counterpart of [`max_rate`] for direct transmission.
pub fn direct_max_rate_exact(network: &NetworkModel, distance: f64, target: f64) -> Result<f64> {
    direct_max_threshold(network, distance, target)
}

/// One grid point of a density sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    /// One estimate per requested protocol, in request order.
    pub estimates: Vec<OutageEstimate>,
    /// CF lower bound at the same `W_c`, when CF was requested.
    pub cf_lower: Option<OutageEstimate>,
    pub w_c: Option<f64>,
    pub cutset_rho: Option<f64>,
}

impl SweepPoint {
    pub fn get(&self, protocol: Protocol) -> Option<&OutageEstimate> {
        self.estimates.iter().find(|e| e.protocol() == protocol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axis: String,
    pub grid: Vec<f64>,
    pub protocols: Vec<Protocol>,
    pub points: Vec<SweepPoint>,
}

fn check_grid(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain(format!("{what} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(format!("{what} grid must be strictly increasing")));
    }
    Ok(())
}

/// Outage of each protocol along a grid of densities. `W_c` and the cut-set
/// `|rho|` are optimised at every point; DF uses `params.rho_mag`.
pub fn sweep_lambda(
    protocols: &[Protocol],
    lambdas: &[f64],
    alpha: f64,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    quad: &QuadratureSpec,
    exec: Execution,
) -> Result<SweepResult> {
    check_grid(lambdas, "density")?;
    params.validate()?;
    let points = exec.try_map(lambdas, |&lambda| {
        let network = NetworkModel::new(lambda, alpha)?;
        let mut point = SweepPoint {
            lambda,
            estimates: Vec::with_capacity(protocols.len()),
            cf_lower: None,
            w_c: None,
            cutset_rho: None,
        };
        for &p in protocols {
            let e = match p {
                Protocol::Cf => {
                    let (upper, lower, _) = cf_optimized(&network, geometry, params, quad)?;
                    point.cf_lower = Some(lower);
                    point.w_c = upper.meta.w_c;
                    upper
                }
                Protocol::Cutset => {
                    let e = cutset_outage_lower(&network, geometry, params, quad)?;
                    point.cutset_rho = e.meta.rho_mag;
                    e
                }
                other => protocol_outage(other, &network, geometry, params, quad)?,
            };
            point.estimates.push(e);
        }
        Ok(point)
    })?;
    Ok(SweepResult {
        axis: "lambda".into(),
        grid: lambdas.to_vec(),
        protocols: protocols.to_vec(),
        points,
    })
}

/// Maximum rate of each protocol along a grid of relay distance ratios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCurve {
    pub ks: Vec<f64>,
    pub theta: f64,
    pub target: f64,
    pub protocols: Vec<Protocol>,
    /// `rows[i][j]`: protocol `j` at `ks[i]`.
    pub rows: Vec<Vec<MaxRate>>,
}

#[allow(clippy::too_many_arguments)]
pub fn rate_curve(
    protocols: &[Protocol],
    ks: &[f64],
    theta: f64,
    distance: f64,
    target: f64,
    network: &NetworkModel,
    params: &ProtocolParams,
    quad: &QuadratureSpec,
    exec: Execution,
) -> Result<RateCurve> {
    check_grid(ks, "relay distance")?;
    let rows = exec.try_map(ks, |&k| {
        let g = LinkGeometry::new(distance, k, theta, network.alpha)?;
        protocols
            .iter()
            .map(|&p| max_rate(p, target, network, &g, params, quad))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(RateCurve {
        ks: ks.to_vec(),
        theta,
        target,
        protocols: protocols.to_vec(),
        rows,
    })
}

/// Relay positions of a region map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RelayGrid {
    Cartesian { xs: Vec<f64>, ys: Vec<f64> },
    Polar { ks: Vec<f64>, thetas: Vec<f64> },
}

impl RelayGrid {
    /// Cell positions, row by row (`y` or `theta` outer).
    pub fn positions(&self, distance: f64) -> Vec<Point> {
        match self {
            RelayGrid::Cartesian { xs, ys } => ys
                .iter()
                .flat_map(|&y| xs.iter().map(move |&x| Point::new(x, y)))
                .collect(),
            RelayGrid::Polar { ks, thetas } => thetas
                .iter()
                .flat_map(|&t| {
                    ks.iter()
                        .map(move |&k| Point::new(k * distance * t.cos(), k * distance * t.sin()))
                })
                .collect(),
        }
    }
}

/// Tie precedence of region maps: earlier wins.
pub const REGION_PRECEDENCE: [Protocol; 3] = [Protocol::Df, Protocol::Cf, Protocol::Direct];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionCell {
    pub x: f64,
    pub y: f64,
    /// `None` for relay positions on the source or destination.
    pub winner: Option<Protocol>,
    pub p_df: f64,
    pub p_cf_upper: f64,
    pub p_direct: f64,
    pub w_c: f64,
}

impl RegionCell {
    pub fn value(&self, p: Protocol) -> f64 {
        match p {
            Protocol::Df => self.p_df,
            Protocol::Cf => self.p_cf_upper,
            Protocol::Direct => self.p_direct,
            Protocol::Cutset => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionMap {
    pub lambda: f64,
    pub threshold: f64,
    pub distance: f64,
    pub cells: Vec<RegionCell>,
    pub precedence: [Protocol; 3],
    /// CF enters through its upper bound.
    pub cf_kind: EstimateKind,
}

impl RegionMap {
    pub fn count(&self, p: Protocol) -> usize {
        self.cells.iter().filter(|c| c.winner == Some(p)).count()
    }

    pub fn invalid_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.winner.is_none()).count()
    }

    /// Every winner's outage is no larger than each rival's.
    pub fn winners_dominate(&self) -> bool {
        self.cells.iter().all(|c| match c.winner {
            Some(w) => REGION_PRECEDENCE.iter().all(|&r| c.value(w) <= c.value(r)),
            None => true,
        })
    }
}

/// Smallest outage wins, ties broken by [`REGION_PRECEDENCE`].
pub fn pick_winner(p_df: f64, p_cf: f64, p_direct: f64) -> Protocol {
    if p_df <= p_cf && p_df <= p_direct {
        Protocol::Df
    } else if p_cf <= p_direct {
        Protocol::Cf
    } else {
        Protocol::Direct
    }
}

/// Preferred protocol at every relay position: DF exact at `rho = 0`, CF
/// upper bound at the best `W_c` inside [`WC_LOG10_RANGE`], direct exact. A
/// silent relay is not offered to CF here: that option is direct transmission.
pub fn region_map(
    network: &NetworkModel,
    grid: &RelayGrid,
    distance: f64,
    params: &ProtocolParams,
    quad: &QuadratureSpec,
    exec: Execution,
) -> Result<RegionMap> {
    params.validate()?;
    let params = params.with_rho(0.0);
    let p_direct = direct_outage(network, distance, params.threshold)?.value;
    let positions = grid.positions(distance);
    let cells = exec.try_map(&positions, |&x| {
        let g = match LinkGeometry::from_relay_position(distance, x, network.alpha) {
            Ok(g) => g,
            Err(Error::DegenerateGeometry(_)) => {
                return Ok(RegionCell {
                    x: x.x,
                    y: x.y,
                    winner: None,
                    p_df: f64::NAN,
                    p_cf_upper: f64::NAN,
                    p_direct,
                    w_c: f64::NAN,
                })
            }
            Err(e) => return Err(e),
        };
        let p_df = df_outage(network, &g, &params, quad)?.value;
        let lattice = CfLattice::new(network, &g, params.threshold, params.partitions, quad)?;
        let opt = optimize_wc_on(&lattice)?;
        Ok(RegionCell {
            x: x.x,
            y: x.y,
            winner: Some(pick_winner(p_df, opt.value, p_direct)),
            p_df,
            p_cf_upper: opt.value,
            p_direct,
            w_c: opt.w_c,
        })
    })?;
    Ok(RegionMap {
        lambda: network.lambda,
        threshold: params.threshold,
        distance,
        cells,
        precedence: REGION_PRECEDENCE,
        cf_kind: EstimateKind::UpperBound,
    })
}
