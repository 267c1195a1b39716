//! Globally adaptive Gauss-Kronrod (G10/K21) quadrature on finite and
//! semi-infinite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_136_600_613,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Stopping rule: accept once the error estimate falls below
/// `max(abs, rel * |integral|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Tolerance { abs: 0.0, rel }
    }

    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One 21-point Kronrod rule with the embedded 10-point Gauss estimate.
/// Returns `(integral, error estimate)`.
pub fn gauss_kronrod_21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = WGK[10] * fc.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err)
}

/// Integrates `f` over `[points[0], points[last]]`, using the interior points
/// as the initial subdivision.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    tol: Tolerance,
    max_evaluations: usize,
) -> Result<Estimate> {
    if points.len() < 2 {
        return Err(Error::Domain("integration needs at least two points".into()));
    }
    let mut heap = BinaryHeap::with_capacity(64);
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evaluations = 0usize;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            if b == a {
                continue;
            }
            return Err(Error::Domain(format!(
                "integration points must be increasing, got {a} then {b}"
            )));
        }
        let (value, error) = gauss_kronrod_21(&mut f, a, b);
        evaluations += 21;
        total += value;
        total_err += error;
        heap.push(Segment { a, b, value, error });
    }
    // Segments too narrow to split further are parked here.
    let mut frozen_err = 0.0;
    let mut frozen_value = 0.0;
    while total_err > tol.target(total) {
        let Some(worst) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b)
            || (worst.b - worst.a) <= 1e-13 * worst.a.abs().max(worst.b.abs())
        {
            frozen_err += worst.error;
            frozen_value += worst.value;
            if total_err - frozen_err <= tol.target(total) {
                break;
            }
            continue;
        }
        if evaluations + 42 > max_evaluations {
            return Err(Error::Accuracy {
                estimate: total,
                error_bound: total_err,
                evaluations,
            });
        }
        let (v1, e1) = gauss_kronrod_21(&mut f, worst.a, mid);
        let (v2, e2) = gauss_kronrod_21(&mut f, mid, worst.b);
        evaluations += 42;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Recompute from the pieces to shed accumulated cancellation.
    let value: f64 = heap.iter().map(|s| s.value).sum::<f64>() + frozen_value;
    let error: f64 = heap.iter().map(|s| s.error).sum::<f64>() + frozen_err;
    Ok(Estimate {
        value,
        error,
        evaluations,
    })
}

/// Integrates `f` over `[points[0], inf)`. The finite part runs over `points`;
/// the range beyond the last point is mapped onto a finite interval with
/// `x = 1/t`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    tol: Tolerance,
    max_evaluations: usize,
) -> Result<Estimate> {
    let split = *points
        .last()
        .ok_or_else(|| Error::Domain("integration needs a start point".into()))?;
    if !(split > 0.0) {
        return Err(Error::Domain(
            "semi-infinite integration needs a positive split point".into(),
        ));
    }
    let head = if points.len() >= 2 {
        integrate(&mut f, points, tol, max_evaluations)?
    } else {
        Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        }
    };
    let remaining = max_evaluations.saturating_sub(head.evaluations);
    // The tail only needs to be accurate relative to the whole integral.
    let tail_tol = Tolerance {
        abs: tol.abs.max(0.5 * tol.rel * head.value.abs()),
        rel: tol.rel,
    };
    let tail = integrate(
        |t: f64| {
            let x = 1.0 / t;
            f(x) * x * x
        },
        &[0.0, 1.0 / split],
        tail_tol,
        remaining,
    )?;
    Ok(Estimate {
        value: head.value + tail.value,
        error: head.error + tail.error,
        evaluations: head.evaluations + tail.evaluations,
    })
}
