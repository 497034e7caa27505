//! Measurement axes in a fixed plane.
//!
//! All axes live in one plane orthogonal to the particle beam, so an axis is
//! a single angle in `[0, 2*pi)`. Axes are oriented: an axis and its reverse
//! are distinct, and a preparation "along `a`" always means the +1 outcome
//! points along `a`. A -1 preparation along `a` is represented as a +1
//! preparation along `a.reversed()`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::outcome::Outcome;

/// Angular tolerance below which two axes count as the same direction.
pub const GEOM_TOL: f64 = 1e-12;

/// An oriented axis, stored as an angle in radians normalized to `[0, 2*pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Axis(f64);

impl Axis {
    /// Creates an axis from an angle in radians. The angle is reduced into
    /// `[0, 2*pi)`; it must be finite.
    pub fn new(angle: f64) -> Axis {
        assert!(angle.is_finite(), "axis angle must be finite");
        let mut a = angle.rem_euclid(TAU);
        // rem_euclid can round tiny negative inputs up to exactly 2*pi.
        if a >= TAU {
            a -= TAU;
        }
        Axis(a)
    }

    /// The normalized angle in `[0, 2*pi)`.
    pub fn angle(self) -> f64 {
        self.0
    }

    /// The oppositely oriented axis, `angle + pi`.
    pub fn reversed(self) -> Axis {
        Axis::new(self.0 + PI)
    }

    /// The axis carrying a signed preparation: `self` for +1, `reversed` for -1.
    pub fn oriented(self, outcome: Outcome) -> Axis {
        match outcome {
            Outcome::Plus => self,
            Outcome::Minus => self.reversed(),
        }
    }

    /// Circular distance to `other` in `[0, pi]`.
    pub fn separation(self, other: Axis) -> f64 {
        let d = (self.0 - other.0).rem_euclid(TAU);
        d.min(TAU - d)
    }

    /// Whether the two axes point the same way, within [`GEOM_TOL`].
    pub fn approx_eq(self, other: Axis) -> bool {
        self.separation(other) < GEOM_TOL
    }

    /// Whether the two axes span the same line (equal or reversed).
    pub fn collinear(self, other: Axis) -> bool {
        self.approx_eq(other) || self.approx_eq(other.reversed())
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Scalar product of two axis directions, `cos(angle_a - angle_b)`.
pub fn axis_dot(a: Axis, b: Axis) -> f64 {
    (a.0 - b.0).cos()
}
