//! Linear algebra in Minkowski space-time with signature `(-,+,+,+)`.
//!
//! The first coordinate is the timelike one. Everything here is plain value
//! arithmetic on [`Vec4`]; the only non-Euclidean piece is [`Vec4::dot`].

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// A point or vector `(x1, x2, x3, x4)` of Minkowski 4-space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec4 {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub x4: f64,
}

/// Causal character of a vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CausalClass {
    Spacelike,
    Timelike,
    Null,
    /// The exact zero vector. Kept apart from `Spacelike` so that frame code
    /// can reject zero tangents.
    Zero,
}

impl Vec4 {
    pub const ZERO: Vec4 = Vec4::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(x1: f64, x2: f64, x3: f64, x4: f64) -> Self {
        Vec4 { x1, x2, x3, x4 }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Vec4::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x1, self.x2, self.x3, self.x4]
    }

    /// Minkowski inner product `-a1 b1 + a2 b2 + a3 b3 + a4 b4`.
    #[inline]
    pub fn dot(self, other: Vec4) -> f64 {
        -self.x1 * other.x1 + self.x2 * other.x2 + self.x3 * other.x3 + self.x4 * other.x4
    }

    /// `sqrt(|<v,v>|)`. Zero for null vectors.
    #[inline]
    pub fn norm(self) -> f64 {
        self.dot(self).abs().sqrt()
    }

    /// Sum of squared components, ignoring the metric.
    #[inline]
    pub fn euclid_norm_sq(self) -> f64 {
        self.x1 * self.x1 + self.x2 * self.x2 + self.x3 * self.x3 + self.x4 * self.x4
    }

    /// Largest absolute component.
    pub fn max_abs(self) -> f64 {
        self.to_array().iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    /// Classify `self` as spacelike, timelike, null or zero.
    ///
    /// A nonzero vector is null when `|<v,v>| <= tol * max(1, sum x_i^2)`. The
    /// tolerance is relative so that large null vectors stay null.
    pub fn classify(self, tol: f64) -> CausalClass {
        if self == Vec4::ZERO {
            return CausalClass::Zero;
        }
        let q = self.dot(self);
        if q.abs() <= tol * self.euclid_norm_sq().max(1.0) {
            CausalClass::Null
        } else if q > 0.0 {
            CausalClass::Spacelike
        } else {
            CausalClass::Timelike
        }
    }
}

/// Free-function form of [`Vec4::dot`].
pub fn dot(a: Vec4, b: Vec4) -> f64 {
    a.dot(b)
}

/// Free-function form of [`Vec4::norm`].
pub fn norm(v: Vec4) -> f64 {
    v.norm()
}

/// Free-function form of [`Vec4::classify`].
pub fn classify(v: Vec4, tol: f64) -> CausalClass {
    v.classify(tol)
}

impl fmt::Display for Vec4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x1, self.x2, self.x3, self.x4)
    }
}

impl Add for Vec4 {
    type Output = Vec4;
    #[inline]
    fn add(self, o: Vec4) -> Vec4 {
        Vec4::new(self.x1 + o.x1, self.x2 + o.x2, self.x3 + o.x3, self.x4 + o.x4)
    }
}

impl AddAssign for Vec4 {
    #[inline]
    fn add_assign(&mut self, o: Vec4) {
        *self = *self + o;
    }
}

impl Sub for Vec4 {
    type Output = Vec4;
    #[inline]
    fn sub(self, o: Vec4) -> Vec4 {
        Vec4::new(self.x1 - o.x1, self.x2 - o.x2, self.x3 - o.x3, self.x4 - o.x4)
    }
}

impl SubAssign for Vec4 {
    #[inline]
    fn sub_assign(&mut self, o: Vec4) {
        *self = *self - o;
    }
}

impl Neg for Vec4 {
    type Output = Vec4;
    #[inline]
    fn neg(self) -> Vec4 {
        Vec4::new(-self.x1, -self.x2, -self.x3, -self.x4)
    }
}

impl Mul<f64> for Vec4 {
    type Output = Vec4;
    #[inline]
    fn mul(self, s: f64) -> Vec4 {
        Vec4::new(self.x1 * s, self.x2 * s, self.x3 * s, self.x4 * s)
    }
}

impl Mul<Vec4> for f64 {
    type Output = Vec4;
    #[inline]
    fn mul(self, v: Vec4) -> Vec4 {
        v * self
    }
}

impl Div<f64> for Vec4 {
    type Output = Vec4;
    #[inline]
    fn div(self, s: f64) -> Vec4 {
        Vec4::new(self.x1 / s, self.x2 / s, self.x3 / s, self.x4 / s)
    }
}

impl std::iter::Sum for Vec4 {
    fn sum<I: Iterator<Item = Vec4>>(iter: I) -> Vec4 {
        iter.fold(Vec4::ZERO, |a, b| a + b)
    }
}
