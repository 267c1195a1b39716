//! Scenario parameters: the interferer field, the source/relay/destination
//! triangle and the per-protocol knobs.
//!
//! The source sits at the origin and the destination at `(D, 0)`. The relay is
//! placed at `k D (cos θ, sin θ)`. All distances are multiples of an arbitrary
//! unit length and all powers are multiples of the (unit) transmit power.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist2(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(self, other: Point) -> f64 {
        self.dist2(other).sqrt()
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

/// The Poisson field of interferers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    /// Interferer density in nodes per unit area.
    pub lambda: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Mean of the exponential power fading. Always 1.
    pub fading_mean: f64,
}

impl NetworkModel {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 2.0) {
            return Err(Error::Divergence { alpha });
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Domain(format!(
                "interferer density must be finite and non-negative, got {lambda}"
            )));
        }
        Ok(NetworkModel {
            lambda,
            alpha,
            fading_mean: 1.0,
        })
    }

    /// Same field with a different density.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        NetworkModel::new(lambda, self.alpha)
    }
}

/// Path loss `distance^-alpha`.
pub fn path_loss(distance: f64, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 2.0) {
        return Err(Error::Divergence { alpha });
    }
    if !(distance.is_finite() && distance > 0.0) {
        return Err(Error::Domain(format!(
            "path loss needs a positive distance, got {distance}"
        )));
    }
    Ok(distance.powf(-alpha))
}

/// `d^-alpha` evaluated from the squared distance, with a fast path for the
/// common integer exponents. No validation.
#[inline]
pub(crate) fn path_loss_sq(dist2: f64, alpha: f64) -> f64 {
    if alpha == 4.0 {
        1.0 / (dist2 * dist2)
    } else if alpha == 3.0 {
        1.0 / (dist2 * dist2.sqrt())
    } else {
        dist2.powf(-0.5 * alpha)
    }
}

/// `d^alpha` evaluated from the squared distance.
#[inline]
pub(crate) fn pow_alpha_sq(dist2: f64, alpha: f64) -> f64 {
    if alpha == 4.0 {
        dist2 * dist2
    } else if alpha == 3.0 {
        dist2 * dist2.sqrt()
    } else {
        dist2.powf(0.5 * alpha)
    }
}

/// Placement of the tagged source, relay and destination together with the
/// three path-loss gains, computed once at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    distance: f64,
    k: f64,
    theta: f64,
    alpha: f64,
    relay: Point,
    destination: Point,
    rd_distance: f64,
    l_sd: f64,
    l_sr: f64,
    l_rd: f64,
}

impl LinkGeometry {
    /// Builds the geometry from the source-destination distance `distance`,
    /// the relay distance ratio `k` and the relay angle `theta`.
    pub fn new(distance: f64, k: f64, theta: f64, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 2.0) {
            return Err(Error::Divergence { alpha });
        }
        if !(distance.is_finite() && distance > 0.0) {
            return Err(Error::Domain(format!(
                "source-destination distance must be positive, got {distance}"
            )));
        }
        if !(theta.is_finite() && (0.0..TAU).contains(&theta)) {
            return Err(Error::Domain(format!(
                "relay angle must lie in [0, 2pi), got {theta}"
            )));
        }
        if !k.is_finite() || k < 0.0 {
            return Err(Error::Domain(format!(
                "relay distance ratio must be non-negative, got {k}"
            )));
        }
        if k == 0.0 {
            return Err(Error::DegenerateGeometry(
                "relay coincides with the source (k = 0)".into(),
            ));
        }
        let relay = Point::new(k * distance * theta.cos(), k * distance * theta.sin());
        let destination = Point::new(distance, 0.0);
        // |r - d|^2 = D^2 (k^2 - 2k cos(theta) + 1), written to stay accurate near r = d
        let rd2 = distance * distance * ((k - theta.cos()).powi(2) + theta.sin().powi(2));
        if rd2 <= (1e-12 * distance).powi(2) {
            return Err(Error::DegenerateGeometry(
                "relay coincides with the destination".into(),
            ));
        }
        let sr = k * distance;
        Ok(LinkGeometry {
            distance,
            k,
            theta,
            alpha,
            relay,
            destination,
            rd_distance: rd2.sqrt(),
            l_sd: distance.powf(-alpha),
            l_sr: sr.powf(-alpha),
            l_rd: path_loss_sq(rd2, alpha),
        })
    }

    /// Builds the geometry from a Cartesian relay position.
    pub fn from_relay_position(distance: f64, relay: Point, alpha: f64) -> Result<Self> {
        if !(distance.is_finite() && distance > 0.0) {
            return Err(Error::Domain(format!(
                "source-destination distance must be positive, got {distance}"
            )));
        }
        let k = relay.dist(Point::ORIGIN) / distance;
        let theta = relay.y.atan2(relay.x).rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative angles
        let theta = if theta >= TAU { 0.0 } else { theta };
        LinkGeometry::new(distance, k, theta, alpha)
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn source(&self) -> Point {
        Point::ORIGIN
    }

    pub fn relay(&self) -> Point {
        self.relay
    }

    pub fn destination(&self) -> Point {
        self.destination
    }

    /// Distance between relay and destination.
    pub fn relay_destination_distance(&self) -> f64 {
        self.rd_distance
    }

    pub fn l_sd(&self) -> f64 {
        self.l_sd
    }

    pub fn l_sr(&self) -> f64 {
        self.l_sr
    }

    pub fn l_rd(&self) -> f64 {
        self.l_rd
    }
}

/// Protocol knobs shared by the outage evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// SIR threshold `T = 2^R - 1`.
    pub threshold: f64,
    /// Magnitude of the source/relay symbol correlation. The phase is fixed to 0.
    pub rho_mag: f64,
    /// Compression noise power of the relay (CF only).
    pub w_c: f64,
    /// Number of covering rectangles used by the CF bounds.
    pub partitions: usize,
}

impl ProtocolParams {
    pub const DEFAULT_PARTITIONS: usize = 64;

    pub fn new(threshold: f64) -> Result<Self> {
        let p = ProtocolParams {
            threshold,
            rho_mag: 0.0,
            w_c: 1.0,
            partitions: Self::DEFAULT_PARTITIONS,
        };
        p.validate()?;
        Ok(p)
    }

    /// Threshold matching a target rate in bits per channel use.
    pub fn from_rate(rate: f64) -> Result<Self> {
        ProtocolParams::new(rate.exp2() - 1.0)
    }

    pub fn with_rho(mut self, rho_mag: f64) -> Self {
        self.rho_mag = rho_mag;
        self
    }

    pub fn with_w_c(mut self, w_c: f64) -> Self {
        self.w_c = w_c;
        self
    }

    pub fn with_partitions(mut self, partitions: usize) -> Self {
        self.partitions = partitions;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    /// Rate `log2(1 + T)`.
    pub fn rate(&self) -> f64 {
        self.threshold.ln_1p() / std::f64::consts::LN_2
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::Domain(format!(
                "SIR threshold must be positive, got {}",
                self.threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.rho_mag) {
            return Err(Error::Domain(format!(
                "|rho| must lie in [0, 1], got {}",
                self.rho_mag
            )));
        }
        if !(self.w_c >= 0.0) || self.w_c.is_nan() {
            return Err(Error::Domain(format!(
                "compression noise must be non-negative, got {}",
                self.w_c
            )));
        }
        if self.partitions == 0 {
            return Err(Error::Domain("partition count must be at least 1".into()));
        }
        Ok(())
    }
}
