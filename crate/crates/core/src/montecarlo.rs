//! Monte Carlo simulation of the marked Poisson field and of the exact
//! outage events.
//!
//! Interferers are drawn in a disk around the source-destination midpoint.
//! The disk is a stack of shells (a core disk, then annuli each doubling the
//! radius) and every shell of every trial draws from its own ChaCha stream,
//! so enlarging the window only adds points and leaves the inner ones
//! untouched. The interference expected from outside the window is added as
//! a constant.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::Serialize;

use crate::analytic::{EstimateKind, EstimateMeta, OutageEstimate, Protocol, CUTSET_RHO_GRID};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{path_loss_sq, LinkGeometry, NetworkModel, Point, ProtocolParams};
use crate::quad::{integrate, integrate_to_infinity, Tolerance};

/// Streams reserved per trial: one per shell plus the tagged-link fades.
const STREAMS_PER_UNIT: u64 = 64;
const FADE_STREAM: u64 = STREAMS_PER_UNIT - 1;
const MAX_SHELLS: usize = (STREAMS_PER_UNIT - 1) as usize;
/// Simulation units per parallel work item.
const CHUNK: u64 = 2048;
/// Below this many observed outage events the estimate carries a warning.
pub const MIN_EVENTS: u64 = 10;

/// Chooses the simulation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowPolicy {
    /// Allowed standard deviation of the interference outside the window,
    /// relative to the weakest of the three link gains.
    pub tail_tolerance: f64,
    /// Smallest radius, in multiples of the source-destination distance.
    pub min_radius_multiple: f64,
    /// Radius doublings on top of what the tolerance asks for.
    pub extra_doublings: u32,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy {
            tail_tolerance: 1e-4,
            min_radius_multiple: 4.0,
            extra_doublings: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationSpec {
    pub trials: u64,
    pub seed: u64,
    pub window_policy: WindowPolicy,
    /// Pairs trials that share the interferers and use mirrored fades on the
    /// tagged links.
    pub antithetic: bool,
    /// Mean of every exponential power fade, tagged links and interferers alike.
    pub fading_mean: f64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            trials: 100_000,
            seed: 0,
            window_policy: WindowPolicy::default(),
            antithetic: false,
            fading_mean: 1.0,
        }
    }
}

impl SimulationSpec {
    pub fn new(trials: u64, seed: u64) -> Self {
        SimulationSpec {
            trials,
            seed,
            ..Default::default()
        }
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    pub fn with_fading_mean(mut self, mean: f64) -> Self {
        self.fading_mean = mean;
        self
    }

    pub fn with_extra_doublings(mut self, n: u32) -> Self {
        self.window_policy.extra_doublings = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Domain("at least one trial is needed".into()));
        }
        if !(self.fading_mean.is_finite() && self.fading_mean > 0.0) {
            return Err(Error::Domain(format!(
                "fading mean must be positive, got {}",
                self.fading_mean
            )));
        }
        let w = &self.window_policy;
        if !(w.tail_tolerance > 0.0 && w.tail_tolerance < 1.0) {
            return Err(Error::Domain(format!(
                "window tail tolerance must lie in (0, 1), got {}",
                w.tail_tolerance
            )));
        }
        if !(w.min_radius_multiple.is_finite() && w.min_radius_multiple > 0.0) {
            return Err(Error::Domain("window radius multiple must be positive".into()));
        }
        Ok(())
    }

    /// Independent simulation units: trials, or trial pairs when antithetic.
    fn units(&self) -> u64 {
        if self.antithetic {
            self.trials.div_ceil(2)
        } else {
            self.trials
        }
    }

    fn per_unit(&self) -> u64 {
        if self.antithetic {
            2
        } else {
            1
        }
    }
}

/// Complex fading amplitude with `E|h|^2` equal to the fading mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Amplitude {
    pub re: f64,
    pub im: f64,
}

impl Amplitude {
    pub fn power(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    /// `Re(a conj(b))`.
    pub fn dot(&self, b: &Amplitude) -> f64 {
        self.re * b.re + self.im * b.im
    }
}

/// Fades of one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FadingSample {
    pub h_sd: Amplitude,
    pub h_rd: Amplitude,
    pub h2_sr: f64,
    /// `(|h_xd|^2, |h_xr|^2)` for each interferer, in draw order.
    pub marks: Vec<(f64, f64)>,
}

impl FadingSample {
    pub fn h2_sd(&self) -> f64 {
        self.h_sd.power()
    }

    pub fn h2_rd(&self) -> f64 {
        self.h_rd.power()
    }
}

/// One simulated trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scene {
    /// Interference at the destination, tail correction included.
    pub i_d: f64,
    /// Interference at the relay, tail correction included.
    pub i_r: f64,
    pub interferers: Vec<Point>,
    pub fading: FadingSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct Shell {
    inner: f64,
    outer: f64,
    mean_count: f64,
}

/// Simulation window prepared for one `(network, geometry, spec)`.
#[derive(Debug, Clone, Serialize)]
pub struct Window {
    center: Point,
    dest: Point,
    relay: Point,
    alpha: f64,
    fading_mean: f64,
    shells: Vec<Shell>,
    tail_d: f64,
    tail_r: f64,
    seed: u64,
}

/// `int_{|x - c| > radius} |x - p|^-alpha dx` with `|p - c| = offset < radius`.
pub fn outer_path_loss_integral(radius: f64, offset: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 2.0) {
        return Err(Error::Divergence { alpha });
    }
    if !(offset >= 0.0 && offset < radius) {
        return Err(Error::Domain(format!(
            "observation point at offset {offset} is outside the window of radius {radius}"
        )));
    }
    if offset == 0.0 {
        return Ok(2.0 * PI * radius.powf(2.0 - alpha) / (alpha - 2.0));
    }
    let tol = Tolerance::relative(1e-11);
    let mut failure = None;
    let est = integrate_to_infinity(
        |rho: f64| {
            let ring = integrate(
                |phi: f64| {
                    let q2 = rho * rho + offset * offset - 2.0 * rho * offset * phi.cos();
                    path_loss_sq(q2, alpha)
                },
                &[0.0, 0.5 * PI, PI],
                tol,
                100_000,
            );
            match ring {
                Ok(e) => 2.0 * rho * e.value,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        &[radius, 2.0 * radius],
        tol,
        100_000,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(est.value),
    }
}

impl Window {
    pub fn new(network: &NetworkModel, geometry: &LinkGeometry, spec: &SimulationSpec) -> Result<Self> {
        spec.validate()?;
        let alpha = network.alpha;
        let dest = geometry.destination();
        let relay = geometry.relay();
        let center = geometry.source().midpoint(dest);
        let off_d = center.dist(dest);
        let off_r = center.dist(relay);
        let policy = spec.window_policy;
        let floor = (policy.min_radius_multiple * geometry.distance())
            .max(2.0 * off_r)
            .max(2.0 * off_d);

        // the core is stretched so the last shell ends exactly where the
        // tolerance is met
        let mut core = floor;
        let mut doublings = 0usize;
        if network.lambda > 0.0 {
            // sd of the outside sum at p is at most
            // sqrt(2 lambda m^2 2 pi (R - off)^(2 - 2 alpha) / (2 alpha - 2))
            let gain = geometry.l_sd().min(geometry.l_sr()).min(geometry.l_rd());
            let tol = policy.tail_tolerance * gain;
            let reach = (4.0 * PI * network.lambda / ((2.0 * alpha - 2.0) * tol * tol))
                .powf(1.0 / (2.0 * alpha - 2.0));
            let needed = off_d.max(off_r) + reach;
            if needed > floor {
                doublings = (needed / floor).log2().floor() as usize;
                core = needed / 2f64.powi(doublings as i32);
            }
        }
        doublings += policy.extra_doublings as usize;
        if doublings + 1 > MAX_SHELLS {
            return Err(Error::Domain(format!(
                "simulation window needs {} shells, more than the {MAX_SHELLS} available",
                doublings + 1
            )));
        }

        let mut shells = Vec::with_capacity(doublings + 1);
        let mut inner = 0.0;
        let mut outer = core;
        for _ in 0..=doublings {
            shells.push(Shell {
                inner,
                outer,
                mean_count: network.lambda * PI * (outer * outer - inner * inner),
            });
            inner = outer;
            outer *= 2.0;
        }
        let radius = inner;
        let scale = network.lambda * spec.fading_mean;
        let (tail_d, tail_r) = if scale > 0.0 {
            (
                scale * outer_path_loss_integral(radius, off_d, alpha)?,
                scale * outer_path_loss_integral(radius, off_r, alpha)?,
            )
        } else {
            (0.0, 0.0)
        };
        Ok(Window {
            center,
            dest,
            relay,
            alpha,
            fading_mean: spec.fading_mean,
            shells,
            tail_d,
            tail_r,
            seed: spec.seed,
        })
    }

    pub fn radius(&self) -> f64 {
        self.shells.last().map_or(0.0, |s| s.outer)
    }

    pub fn center(&self) -> Point {
        self.center
    }

    /// Mean number of interferers drawn per trial.
    pub fn expected_points(&self) -> f64 {
        self.shells.iter().map(|s| s.mean_count).sum()
    }

    /// Constant added to `(I_d, I_r)` for the field outside the window.
    pub fn tail_means(&self) -> (f64, f64) {
        (self.tail_d, self.tail_r)
    }

    fn stream(&self, unit: u64, slot: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(unit.wrapping_mul(STREAMS_PER_UNIT).wrapping_add(slot));
        rng
    }

    /// Draws the interferers of one unit and calls `visit(x, |h_xd|^2, |h_xr|^2)`.
    fn for_each_interferer(&self, unit: u64, mut visit: impl FnMut(Point, f64, f64)) {
        let m = self.fading_mean;
        for (j, shell) in self.shells.iter().enumerate() {
            if shell.mean_count <= 0.0 {
                continue;
            }
            let mut rng = self.stream(unit, j as u64);
            let count = match Poisson::new(shell.mean_count) {
                Ok(p) => p.sample(&mut rng) as u64,
                Err(_) => continue,
            };
            let (a2, b2) = (shell.inner * shell.inner, shell.outer * shell.outer);
            for _ in 0..count {
                let r = (a2 + rng.random::<f64>() * (b2 - a2)).sqrt();
                let (s, c) = (2.0 * PI * rng.random::<f64>()).sin_cos();
                let x = Point::new(self.center.x + r * c, self.center.y + r * s);
                let hd: f64 = Exp1.sample(&mut rng);
                let hr: f64 = Exp1.sample(&mut rng);
                visit(x, m * hd, m * hr);
            }
        }
    }

    fn interference(&self, unit: u64) -> (f64, f64) {
        let (mut i_d, mut i_r) = (self.tail_d, self.tail_r);
        self.for_each_interferer(unit, |x, hd, hr| {
            i_d += hd * path_loss_sq(x.dist2(self.dest), self.alpha);
            i_r += hr * path_loss_sq(x.dist2(self.relay), self.alpha);
        });
        (i_d, i_r)
    }

    /// Tagged-link fades of one unit: the plain draw and its mirror image.
    fn tagged(&self, unit: u64) -> [TaggedFades; 2] {
        let mut rng = self.stream(unit, FADE_STREAM);
        let m = self.fading_mean;
        let mut u = [0.0; 5];
        for v in u.iter_mut() {
            *v = 1.0 - rng.random::<f64>();
        }
        let amp = |u: f64, turns: f64| {
            let p = -m * u.ln();
            let (s, c) = (2.0 * PI * turns).sin_cos();
            Amplitude {
                re: p.sqrt() * c,
                im: p.sqrt() * s,
            }
        };
        let mirror = |u: f64| (1.0 - u).max(f64::MIN_POSITIVE);
        [
            TaggedFades {
                h_sd: amp(u[0], u[1]),
                h_rd: amp(u[2], u[3]),
                h2_sr: -m * u[4].ln(),
            },
            TaggedFades {
                h_sd: amp(mirror(u[0]), u[1] + 0.5),
                h_rd: amp(mirror(u[2]), u[3] + 0.5),
                h2_sr: -m * mirror(u[4]).ln(),
            },
        ]
    }

    /// Full record of trial `index`.
    pub fn scene(&self, index: u64, antithetic: bool) -> Scene {
        let (unit, half) = if antithetic {
            (index / 2, (index % 2) as usize)
        } else {
            (index, 0)
        };
        let mut interferers = Vec::new();
        let mut marks = Vec::new();
        let (mut i_d, mut i_r) = (self.tail_d, self.tail_r);
        self.for_each_interferer(unit, |x, hd, hr| {
            i_d += hd * path_loss_sq(x.dist2(self.dest), self.alpha);
            i_r += hr * path_loss_sq(x.dist2(self.relay), self.alpha);
            interferers.push(x);
            marks.push((hd, hr));
        });
        let t = self.tagged(unit)[half];
        Scene {
            i_d,
            i_r,
            interferers,
            fading: FadingSample {
                h_sd: t.h_sd,
                h_rd: t.h_rd,
                h2_sr: t.h2_sr,
                marks,
            },
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct TaggedFades {
    h_sd: Amplitude,
    h_rd: Amplitude,
    h2_sr: f64,
}

/// Draws trial `trial_index` of the given spec. Bit-identical on replay.
pub fn sample_scene(
    network: &NetworkModel,
    geometry: &LinkGeometry,
    spec: &SimulationSpec,
    trial_index: u64,
) -> Result<Scene> {
    Ok(Window::new(network, geometry, spec)?.scene(trial_index, spec.antithetic))
}

/// Hit counts of one event. `both` counts units where every trial hit, which
/// is all that is needed for the variance of the unit means.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Counter {
    hits: u64,
    both: u64,
}

impl Counter {
    fn record(&mut self, outs: &[Outcome], event: impl Fn(&Outcome) -> bool) {
        let h = outs.iter().filter(|o| event(o)).count() as u64;
        self.hits += h;
        if h > 0 && h as usize == outs.len() {
            self.both += 1;
        }
    }

    fn add(&mut self, o: &Counter) {
        self.hits += o.hits;
        self.both += o.both;
    }

    /// Mean and standard error over `units` units of `per_unit` trials.
    fn estimate(&self, units: u64, per_unit: u64) -> (f64, f64) {
        let n = units as f64;
        let mean = self.hits as f64 / (n * per_unit as f64);
        let second = if per_unit == 1 {
            mean
        } else {
            // unit means are 0, 1/2 or 1
            let single = (self.hits - 2 * self.both) as f64;
            (self.both as f64 + 0.25 * single) / n
        };
        let var = (second - mean * mean).max(0.0);
        (mean, (var / n).sqrt())
    }
}

const N_CUT: usize = CUTSET_RHO_GRID.len();

#[derive(Debug, Clone, Default)]
struct Tally {
    direct: Counter,
    df: Counter,
    cf: Counter,
    cf_a: Counter,
    cf_b_only: Counter,
    cut_broadcast: [Counter; N_CUT],
    cut_mac: [Counter; N_CUT],
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        self.direct.add(&o.direct);
        self.df.add(&o.df);
        self.cf.add(&o.cf);
        self.cf_a.add(&o.cf_a);
        self.cf_b_only.add(&o.cf_b_only);
        for i in 0..N_CUT {
            self.cut_broadcast[i].add(&o.cut_broadcast[i]);
            self.cut_mac[i].add(&o.cut_mac[i]);
        }
    }
}

/// Outcome of every event in one trial.
#[derive(Debug, Clone, Copy, Default)]
struct Outcome {
    direct: bool,
    df: bool,
    cf_a: bool,
    cf_b: bool,
    cut_broadcast: [bool; N_CUT],
    cut_mac: [bool; N_CUT],
}

#[derive(Debug, Clone, Copy)]
struct EventPlan {
    l_sd: f64,
    l_sr: f64,
    l_rd: f64,
    threshold: f64,
    rho: f64,
    w_c: f64,
}

impl EventPlan {
    fn outcome(&self, i_d: f64, i_r: f64, f: &TaggedFades) -> Outcome {
        let t = self.threshold;
        let s_sd = f.h_sd.power() * self.l_sd;
        let s_rd = f.h_rd.power() * self.l_rd;
        let s_sr = f.h2_sr * self.l_sr;
        let cross = 2.0 * (self.l_sd * self.l_rd).sqrt() * f.h_sd.dot(&f.h_rd);
        let v = |rho: f64| s_sd + s_rd + rho * cross;

        let relay_df = s_sr * (1.0 - self.rho * self.rho) < t * i_r;
        let dest_df = v(self.rho) < t * i_d;

        // X + Y < T and the relay-destination rate condition, cleared of
        // denominators so zero interference needs no special case
        let (cf_a, cf_b) = if self.w_c.is_infinite() {
            // silent relay
            (s_sd < t * i_d, false)
        } else {
            let i_rw = i_r + self.w_c;
            (
                s_sr * i_d + s_sd * i_rw < t * i_d * i_rw,
                self.w_c * s_rd < i_d * s_sr + i_r * s_sd + i_r * i_d,
            )
        };

        let mut out = Outcome {
            direct: s_sd < t * i_d,
            df: relay_df || dest_df,
            cf_a,
            cf_b,
            ..Default::default()
        };
        let both = s_sr * i_d + s_sd * i_r;
        for (j, &rho) in CUTSET_RHO_GRID.iter().enumerate() {
            let keep = 1.0 - rho * rho;
            out.cut_broadcast[j] = keep * both < t * i_r * i_d;
            out.cut_mac[j] = v(rho) < t * i_d;
        }
        out
    }
}

fn record(tally: &mut Tally, outs: &[Outcome]) {
    tally.direct.record(outs, |o| o.direct);
    tally.df.record(outs, |o| o.df);
    tally.cf.record(outs, |o| o.cf_a || o.cf_b);
    tally.cf_a.record(outs, |o| o.cf_a);
    tally.cf_b_only.record(outs, |o| o.cf_b && !o.cf_a);
    for j in 0..N_CUT {
        tally.cut_broadcast[j].record(outs, |o| o.cut_broadcast[j]);
        tally.cut_mac[j].record(outs, |o| o.cut_mac[j]);
    }
}

/// Every Monte Carlo estimate from one pass over the trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub direct: OutageEstimate,
    pub df: OutageEstimate,
    /// The union of both CF events, not a bound.
    pub cf: OutageEstimate,
    pub cf_event_a: OutageEstimate,
    /// `P(not A and B)` for CF.
    pub cf_event_b_only: OutageEstimate,
    /// `min_rho max(P_broadcast, P_mac)` over the cut-set grid.
    pub cutset: OutageEstimate,
    pub window_radius: f64,
    pub expected_points: f64,
}

impl McReport {
    pub fn get(&self, protocol: Protocol) -> &OutageEstimate {
        match protocol {
            Protocol::Df => &self.df,
            Protocol::Cf => &self.cf,
            Protocol::Direct => &self.direct,
            Protocol::Cutset => &self.cutset,
        }
    }
}

/// Runs the simulation and evaluates every protocol's outage events on the
/// same trials. DF uses `params.rho_mag`, CF uses `params.w_c`.
pub fn simulate(
    network: &NetworkModel,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    spec: &SimulationSpec,
    exec: Execution,
) -> Result<McReport> {
    params.validate()?;
    if params.rho_mag >= 1.0 {
        return Err(Error::Domain("decode-and-forward needs |rho| < 1".into()));
    }
    let window = Window::new(network, geometry, spec)?;
    let plan = EventPlan {
        l_sd: geometry.l_sd(),
        l_sr: geometry.l_sr(),
        l_rd: geometry.l_rd(),
        threshold: params.threshold,
        rho: params.rho_mag,
        w_c: params.w_c,
    };
    let units = spec.units();
    let per_unit = spec.per_unit();
    let chunks = units.div_ceil(CHUNK) as usize;
    let partial = exec.map_range(chunks, |c| {
        let mut tally = Tally::default();
        let lo = c as u64 * CHUNK;
        let hi = (lo + CHUNK).min(units);
        for unit in lo..hi {
            let (i_d, i_r) = window.interference(unit);
            let fades = window.tagged(unit);
            let outs = fades.map(|f| plan.outcome(i_d, i_r, &f));
            record(&mut tally, &outs[..per_unit as usize]);
        }
        tally
    });
    let mut tally = Tally::default();
    for t in &partial {
        tally.add(t);
    }

    let trials = units * per_unit;
    let make = |protocol: Protocol, counter: &Counter| {
        let (value, stderr) = counter.estimate(units, per_unit);
        let mut meta = EstimateMeta::new(protocol, network, geometry, params.threshold);
        meta.trials = Some(trials);
        meta.warning = trial_warning(counter.hits, trials);
        OutageEstimate {
            value,
            kind: EstimateKind::MonteCarlo,
            stderr: Some(stderr),
            meta,
        }
    };
    let mut df = make(Protocol::Df, &tally.df);
    df.meta.rho_mag = Some(params.rho_mag);
    let mut cf = make(Protocol::Cf, &tally.cf);
    cf.meta.w_c = Some(params.w_c);
    let mut cf_event_a = make(Protocol::Cf, &tally.cf_a);
    cf_event_a.meta.w_c = Some(params.w_c);
    let mut cf_event_b_only = make(Protocol::Cf, &tally.cf_b_only);
    cf_event_b_only.meta.w_c = Some(params.w_c);
    let mut direct = make(Protocol::Direct, &tally.direct);
    direct.meta.k = None;
    direct.meta.theta = None;

    let mut best: Option<(usize, bool)> = None;
    let mut best_value = f64::INFINITY;
    for j in 0..N_CUT {
        let b = tally.cut_broadcast[j].estimate(units, per_unit).0;
        let m = tally.cut_mac[j].estimate(units, per_unit).0;
        let v = b.max(m);
        if v < best_value {
            best_value = v;
            best = Some((j, b >= m));
        }
    }
    let (j, broadcast_wins) = best.unwrap_or((0, true));
    let counter = if broadcast_wins {
        &tally.cut_broadcast[j]
    } else {
        &tally.cut_mac[j]
    };
    let mut cutset = make(Protocol::Cutset, counter);
    cutset.meta.rho_mag = Some(CUTSET_RHO_GRID[j]);

    Ok(McReport {
        direct,
        df,
        cf,
        cf_event_a,
        cf_event_b_only,
        cutset,
        window_radius: window.radius(),
        expected_points: window.expected_points(),
    })
}

fn trial_warning(hits: u64, trials: u64) -> Option<String> {
    (hits > 0 && hits < MIN_EVENTS)
        .then(|| format!("only {hits} outage events in {trials} trials; the standard error is unreliable"))
}

/// Monte Carlo estimate of one protocol's outage.
pub fn estimate_outage(
    protocol: Protocol,
    network: &NetworkModel,
    geometry: &LinkGeometry,
    params: &ProtocolParams,
    spec: &SimulationSpec,
    exec: Execution,
) -> Result<OutageEstimate> {
    Ok(simulate(network, geometry, params, spec, exec)?
        .get(protocol)
        .clone())
}

/// Sample mean and standard error of `E[exp(-w1 I_d - w2 I_r)]`.
pub fn laplace_joint_mc(
    omega1: f64,
    omega2: f64,
    network: &NetworkModel,
    geometry: &LinkGeometry,
    spec: &SimulationSpec,
    exec: Execution,
) -> Result<(f64, f64)> {
    if !(omega1 >= 0.0 && omega2 >= 0.0) {
        return Err(Error::Domain("transform arguments must be non-negative".into()));
    }
    let window = Window::new(network, geometry, spec)?;
    let n = spec.trials;
    let chunks = n.div_ceil(CHUNK) as usize;
    let sums = exec.map_range(chunks, |c| {
        let lo = c as u64 * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let (mut s, mut s2) = (0.0, 0.0);
        for unit in lo..hi {
            let (i_d, i_r) = window.interference(unit);
            let v = (-omega1 * i_d - omega2 * i_r).exp();
            s += v;
            s2 += v * v;
        }
        (s, s2)
    });
    let (s, s2) = sums.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let nf = n as f64;
    let mean = s / nf;
    let var = (s2 / nf - mean * mean).max(0.0);
    Ok((mean, (var / nf).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup(k: f64, lambda: f64) -> (NetworkModel, LinkGeometry) {
        (
            NetworkModel::new(lambda, 4.0).unwrap(),
            LinkGeometry::new(10.0, k, 0.0, 4.0).unwrap(),
        )
    }

    #[test]
    fn outer_integral_closed_forms() {
        // alpha = 4: pi R^2 / (R^2 - a^2)^2
        for (r, a) in [(50.0, 0.0), (50.0, 5.0), (40.0, 19.0)] {
            let v = outer_path_loss_integral(r, a, 4.0).unwrap();
            let exact = PI * r * r / (r * r - a * a).powi(2);
            assert_relative_eq!(v, exact, max_relative = 1e-9);
        }
        let v = outer_path_loss_integral(30.0, 0.0, 3.0).unwrap();
        assert_relative_eq!(v, 2.0 * PI / 30.0, max_relative = 1e-12);
        assert!(outer_path_loss_integral(10.0, 10.0, 4.0).is_err());
    }

    #[test]
    fn empty_field() {
        let (n, g) = setup(0.2, 0.0);
        let spec = SimulationSpec::new(2000, 1);
        let s = sample_scene(&n, &g, &spec, 5).unwrap();
        assert_eq!((s.i_d, s.i_r), (0.0, 0.0));
        assert!(s.interferers.is_empty());
        let r = simulate(
            &n,
            &g,
            &ProtocolParams::new(3.0).unwrap(),
            &spec,
            Execution::Sequential,
        )
        .unwrap();
        for p in Protocol::ALL {
            assert_eq!(r.get(p).value, 0.0);
            assert_eq!(r.get(p).stderr, Some(0.0));
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let (n, g) = setup(0.9, 1e-3);
        let spec = SimulationSpec::new(10, 42);
        let a = sample_scene(&n, &g, &spec, 7).unwrap();
        let b = sample_scene(&n, &g, &spec, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_scene(&n, &g, &spec, 8).unwrap();
        assert_ne!(a.i_d, c.i_d);
        let other_seed = sample_scene(&n, &g, &SimulationSpec::new(10, 43), 7).unwrap();
        assert_ne!(a.i_d, other_seed.i_d);
    }

    #[test]
    fn scene_matches_fast_path() {
        let (n, g) = setup(0.2, 1e-3);
        let spec = SimulationSpec::new(10, 3);
        let w = Window::new(&n, &g, &spec).unwrap();
        for i in 0..5 {
            let s = w.scene(i, false);
            let (i_d, i_r) = w.interference(i);
            assert_eq!((s.i_d, s.i_r), (i_d, i_r));
            let direct: f64 = s
                .interferers
                .iter()
                .zip(&s.fading.marks)
                .map(|(x, m)| m.0 * x.dist(g.destination()).powf(-4.0))
                .sum::<f64>()
                + w.tail_means().0;
            assert_relative_eq!(direct, s.i_d, max_relative = 1e-12);
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let (n, g) = setup(0.9, 1e-4);
        let spec = SimulationSpec::new(5000, 9);
        let p = ProtocolParams::new(3.0).unwrap().with_w_c(1e-5);
        let a = simulate(&n, &g, &p, &spec, Execution::Sequential).unwrap();
        let b = simulate(&n, &g, &p, &spec, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn window_covers_relay() {
        for k in [0.2, 0.9, 3.0] {
            let (n, g) = setup(k, 1e-4);
            let w = Window::new(&n, &g, &SimulationSpec::default()).unwrap();
            let off = w.center().dist(g.relay());
            assert!(off <= 0.5 * w.radius(), "k = {k}");
            assert!(w.radius() >= 40.0);
        }
    }

    #[test]
    fn doubling_keeps_inner_points() {
        let (n, g) = setup(0.2, 1e-4);
        let a = sample_scene(&n, &g, &SimulationSpec::new(1, 5), 0).unwrap();
        let b = sample_scene(&n, &g, &SimulationSpec::new(1, 5).with_extra_doublings(1), 0).unwrap();
        assert!(b.interferers.len() >= a.interferers.len());
        assert_eq!(a.interferers[..], b.interferers[..a.interferers.len()]);
        assert_eq!(a.fading.h2_sr, b.fading.h2_sr);
    }

    #[test]
    fn counter_statistics() {
        let hit = |b: bool| Outcome {
            direct: b,
            ..Default::default()
        };
        let mut c = Counter::default();
        for i in 0..100 {
            c.record(&[hit(i % 4 == 0)], |o| o.direct);
        }
        let (m, s) = c.estimate(100, 1);
        assert_relative_eq!(m, 0.25);
        assert_relative_eq!(s, (0.25f64 * 0.75 / 100.0).sqrt());
        let mut p = Counter::default();
        for pair in [[true, true], [true, false], [false, false], [false, true]] {
            p.record(&pair.map(hit), |o| o.direct);
        }
        // unit means 1, 0.5, 0, 0.5
        let (m, s) = p.estimate(4, 2);
        assert_relative_eq!(m, 0.5);
        assert_relative_eq!(s, (0.125f64 / 4.0).sqrt());
    }

    #[test]
    fn silent_relay_cf_is_direct() {
        let (n, g) = setup(0.9, 1e-4);
        let p = ProtocolParams::new(3.0).unwrap().with_w_c(f64::INFINITY);
        let r = simulate(&n, &g, &p, &SimulationSpec::new(3000, 4), Execution::Sequential).unwrap();
        assert_eq!(r.cf.value, r.direct.value);
        assert_eq!(r.cf_event_b_only.value, 0.0);
    }

    #[test]
    fn antithetic_shares_interferers() {
        let (n, g) = setup(0.5, 1e-3);
        let spec = SimulationSpec::new(4, 2).with_antithetic(true);
        let a = sample_scene(&n, &g, &spec, 2).unwrap();
        let b = sample_scene(&n, &g, &spec, 3).unwrap();
        assert_eq!(a.interferers, b.interferers);
        assert_ne!(a.fading.h2_sr, b.fading.h2_sr);
        assert_relative_eq!(
            (-a.fading.h2_sr).exp() + (-b.fading.h2_sr).exp(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn too_few_events_warns() {
        let (n, g) = setup(0.2, 1e-6);
        let r = simulate(
            &n,
            &g,
            &ProtocolParams::new(3.0).unwrap(),
            &SimulationSpec::new(2000, 1),
            Execution::Sequential,
        )
        .unwrap();
        let d = &r.direct;
        if d.value > 0.0 && d.value * 2000.0 < MIN_EVENTS as f64 {
            assert!(d.meta.warning.is_some());
        }
        assert!(r.df.meta.trials == Some(2000));
    }
}
