//! Geometry of the 2-torus and the one-step alternating shear maps.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::dual::Scalar;
use crate::error::{invalid, Result};

/// Canonical representative in [0, 2π).
#[inline]
pub fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Representative in (−π, π].
#[inline]
pub fn wrap_signed(a: f64) -> f64 {
    let r = wrap(a);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    #[inline]
    pub fn new(a: f64) -> Self {
        Angle(wrap(a))
    }
    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<f64> for Angle {
    fn from(a: f64) -> Self {
        Angle::new(a)
    }
}

impl Add for Angle {
    type Output = Angle;
    fn add(self, o: Angle) -> Angle {
        Angle::new(self.0 + o.0)
    }
}

impl Sub for Angle {
    type Output = Angle;
    fn sub(self, o: Angle) -> Angle {
        Angle::new(self.0 - o.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TorusPoint {
    pub x1: Angle,
    pub x2: Angle,
}

impl TorusPoint {
    #[inline]
    pub fn new(x1: f64, x2: f64) -> Self {
        TorusPoint {
            x1: Angle::new(x1),
            x2: Angle::new(x2),
        }
    }
    #[inline]
    pub fn coords(self) -> [f64; 2] {
        [self.x1.0, self.x2.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePair {
    pub w1: Angle,
    pub w2: Angle,
}

impl PhasePair {
    #[inline]
    pub fn new(w1: f64, w2: f64) -> Self {
        PhasePair {
            w1: Angle::new(w1),
            w2: Angle::new(w2),
        }
    }
    #[inline]
    pub fn coords(self) -> [f64; 2] {
        [self.w1.0, self.w2.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct KickStrength(f64);

impl KickStrength {
    pub fn new(k: f64) -> Result<Self> {
        if k.is_finite() && k > 0.0 {
            Ok(KickStrength(k))
        } else {
            Err(invalid("K", format!("must be finite and > 0, got {k}")))
        }
    }
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for KickStrength {
    type Error = crate::Error;
    fn try_from(k: f64) -> Result<Self> {
        KickStrength::new(k)
    }
}

impl From<KickStrength> for f64 {
    fn from(k: KickStrength) -> f64 {
        k.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub v1: f64,
    pub v2: f64,
    pub unit: bool,
}

impl TangentVector {
    pub fn new(v1: f64, v2: f64) -> Self {
        TangentVector { v1, v2, unit: false }
    }

    /// Normalized copy; `None` for the zero vector.
    pub fn unit(v1: f64, v2: f64) -> Option<Self> {
        let n = v1.hypot(v2);
        if n > 0.0 && n.is_finite() {
            Some(TangentVector {
                v1: v1 / n,
                v2: v2 / n,
                unit: true,
            })
        } else {
            None
        }
    }

    pub fn from_angle(theta: f64) -> Self {
        TangentVector {
            v1: theta.cos(),
            v2: theta.sin(),
            unit: true,
        }
    }

    pub fn norm(self) -> f64 {
        self.v1.hypot(self.v2)
    }
}

/// Row-major real 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn det(self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    #[inline]
    pub fn apply(self, v1: f64, v2: f64) -> (f64, f64) {
        (self.a * v1 + self.b * v2, self.c * v1 + self.d * v2)
    }

    pub fn frobenius(self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }

    /// Spectral norm (largest singular value).
    pub fn op_norm(self) -> f64 {
        let f2 = self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d;
        let det = self.det();
        let disc = (f2 * f2 - 4.0 * det * det).max(0.0).sqrt();
        ((f2 + disc) / 2.0).sqrt()
    }

    pub fn max_abs_diff(self, o: Mat2) -> f64 {
        (self.a - o.a)
            .abs()
            .max((self.b - o.b).abs())
            .max((self.c - o.c).abs())
            .max((self.d - o.d).abs())
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }
}

/// Nearest-lift Euclidean distance on 𝕋². Per-coordinate minimization
/// is the same as minimizing over the 3×3 lift neighborhood.
pub fn torus_dist(p: TorusPoint, q: TorusPoint) -> f64 {
    let d1 = circle_dist(p.x1.0, q.x1.0);
    let d2 = circle_dist(p.x2.0, q.x2.0);
    d1.hypot(d2)
}

#[inline]
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(TAU - d)
}

/// Shear profile shared by the Chirikov and Pierrehumbert models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    /// s ↦ amp·sin(s − ω)
    Sine(f64),
    /// s ↦ s − ω
    Sawtooth,
}

impl Profile {
    #[inline]
    pub fn displacement(self, s: f64, w: f64) -> f64 {
        match self {
            Profile::Sine(a) => a * (s - w).sin(),
            Profile::Sawtooth => s - w,
        }
    }

    #[inline]
    pub fn slope(self, s: f64, w: f64) -> f64 {
        match self {
            Profile::Sine(a) => a * (s - w).cos(),
            Profile::Sawtooth => 1.0,
        }
    }

    #[inline]
    pub fn displacement_t<T: Scalar>(self, s: T, w: T) -> T {
        match self {
            Profile::Sine(a) => (s - w).sin().scale(a),
            Profile::Sawtooth => s - w,
        }
    }

    #[inline]
    pub fn slope_t<T: Scalar>(self, s: T, w: T) -> T {
        match self {
            Profile::Sine(a) => (s - w).cos().scale(a),
            Profile::Sawtooth => T::cst(1.0),
        }
    }
}

/// A model is an ordered pair of shear profiles: horizontal, then vertical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShearPair {
    pub horizontal: Profile,
    pub vertical: Profile,
}

impl ShearPair {
    pub fn chirikov(k: f64) -> Self {
        ShearPair {
            horizontal: Profile::Sine(k),
            vertical: Profile::Sawtooth,
        }
    }

    pub fn pierrehumbert(a: f64) -> Self {
        ShearPair {
            horizontal: Profile::Sine(a),
            vertical: Profile::Sine(a),
        }
    }

    #[inline]
    pub fn step(self, x: TorusPoint, w: PhasePair) -> TorusPoint {
        let h = shear_horizontal(x, w.w1.0, self.horizontal);
        shear_vertical(h, w.w2.0, self.vertical)
    }

    #[inline]
    pub fn inverse(self, x: TorusPoint, w: PhasePair) -> TorusPoint {
        let x2 = x.x2.0 - self.vertical.displacement(x.x1.0, w.w2.0);
        let x1 = x.x1.0 - self.horizontal.displacement(x2, w.w1.0);
        TorusPoint::new(x1, x2)
    }

    #[inline]
    pub fn jacobian(self, x: TorusPoint, w: PhasePair) -> Mat2 {
        let (x1, x2) = (x.x1.0, x.x2.0);
        let ch = self.horizontal.slope(x2, w.w1.0);
        let mid = x1 + self.horizontal.displacement(x2, w.w1.0);
        let cv = self.vertical.slope(mid, w.w2.0);
        Mat2::new(1.0, ch, cv, 1.0 + ch * cv)
    }

    /// Unwrapped step on ℝ², generic over the scalar type.
    #[inline]
    pub fn lifted_step<T: Scalar>(self, x: [T; 2], w: [T; 2]) -> [T; 2] {
        let x1 = x[0] + self.horizontal.displacement_t(x[1], w[0]);
        let x2 = x[1] + self.vertical.displacement_t(x1, w[1]);
        [x1, x2]
    }

    /// Jacobian of the lifted step at (x, w), generic over the scalar type.
    #[inline]
    pub fn lifted_jacobian<T: Scalar>(self, x: [T; 2], w: [T; 2]) -> [[T; 2]; 2] {
        let ch = self.horizontal.slope_t(x[1], w[0]);
        let mid = x[0] + self.horizontal.displacement_t(x[1], w[0]);
        let cv = self.vertical.slope_t(mid, w[1]);
        let one = T::cst(1.0);
        [[one, ch], [cv, one + ch * cv]]
    }
}

#[inline]
pub fn shear_horizontal(x: TorusPoint, w1: f64, p: Profile) -> TorusPoint {
    TorusPoint {
        x1: Angle::new(x.x1.0 + p.displacement(x.x2.0, w1)),
        x2: x.x2,
    }
}

#[inline]
pub fn shear_vertical(x: TorusPoint, w2: f64, p: Profile) -> TorusPoint {
    TorusPoint {
        x1: x.x1,
        x2: Angle::new(x.x2.0 + p.displacement(x.x1.0, w2)),
    }
}

/// f^H: (x1 + K sin(x2 − ω¹), x2).
#[inline]
pub fn horizontal_step(x: TorusPoint, w1: Angle, k: f64) -> TorusPoint {
    shear_horizontal(x, w1.0, Profile::Sine(k))
}

/// f^V: (x1, x2 + x1 − ω²).
#[inline]
pub fn vertical_step(x: TorusPoint, w2: Angle) -> TorusPoint {
    shear_vertical(x, w2.0, Profile::Sawtooth)
}

#[inline]
pub fn chirikov_step(x: TorusPoint, w: PhasePair, k: f64) -> TorusPoint {
    vertical_step(horizontal_step(x, w.w1, k), w.w2)
}

#[inline]
pub fn chirikov_inverse(x: TorusPoint, w: PhasePair, k: f64) -> TorusPoint {
    ShearPair::chirikov(k).inverse(x, w)
}

/// D_x f_ω = [[1, K cos(x2−ω¹)], [1, 1 + K cos(x2−ω¹)]].
#[inline]
pub fn jacobian(x: TorusPoint, w: PhasePair, k: f64) -> Mat2 {
    let kc = k * (x.x2.0 - w.w1.0).cos();
    Mat2::new(1.0, kc, 1.0, 1.0 + kc)
}

/// Derivative of f_ω(x) in (ω¹, ω²): columns are ∂/∂ω¹ and ∂/∂ω².
#[inline]
pub fn phase_jacobian(x: TorusPoint, w: PhasePair, k: f64) -> Mat2 {
    let kc = k * (x.x2.0 - w.w1.0).cos();
    Mat2::new(-kc, 0.0, -kc, -1.0)
}
