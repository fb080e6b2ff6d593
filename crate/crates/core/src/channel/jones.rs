//! 2×2 Jones matrices.

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// `[[xx, xy], [yx, yy]]`, mapping input polarization components to output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesMatrix {
    pub xx: Complex64,
    pub xy: Complex64,
    pub yx: Complex64,
    pub yy: Complex64,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

impl JonesMatrix {
    pub const IDENTITY: Self = Self::new(ONE, ZERO, ZERO, ONE);
    pub const ZERO: Self = Self::new(ZERO, ZERO, ZERO, ZERO);

    pub const fn new(xx: Complex64, xy: Complex64, yx: Complex64, yy: Complex64) -> Self {
        Self { xx, xy, yx, yy }
    }

    pub fn diagonal(x: Complex64, y: Complex64) -> Self {
        Self::new(x, ZERO, ZERO, y)
    }

    /// Real rotation `[[cos a, -sin a], [sin a, cos a]]`.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c.into(), (-s).into(), s.into(), c.into())
    }

    /// Haar-distributed element of U(2): `e^{iφ}·[[a, -b*], [b, a*]]` with
    /// `(a, b)` uniform on the unit sphere of C².
    pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut g = [0.0f64; 4];
        let norm = loop {
            for v in g.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 1e-12 {
                break n;
            }
        };
        let a = Complex64::new(g[0], g[1]) / norm;
        let b = Complex64::new(g[2], g[3]) / norm;
        let phase = Complex64::from_polar(1.0, rng.random::<f64>() * TAU);
        Self::new(a, -b.conj(), b, a.conj()).scale(phase)
    }

    pub fn entries(&self) -> [Complex64; 4] {
        [self.xx, self.xy, self.yx, self.yy]
    }

    pub fn det(&self) -> Complex64 {
        self.xx * self.yy - self.xy * self.yx
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.xx, self.yx, self.xy, self.yy)
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.xx.conj(), self.yx.conj(), self.xy.conj(), self.yy.conj())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.xx * c, self.xy * c, self.yx * c, self.yy * c)
    }

    pub fn scale_re(&self, c: f64) -> Self {
        Self::new(self.xx * c, self.xy * c, self.yx * c, self.yy * c)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries().iter().map(Complex64::norm_sqr).sum()
    }

    /// Largest entry-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (*self - *other)
            .entries()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `‖U^H·U - I‖_max <= tol`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        (self.adjoint() * *self).max_abs_diff(&Self::IDENTITY) <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.entries()
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    #[inline]
    pub fn apply(&self, x: Complex64, y: Complex64) -> (Complex64, Complex64) {
        (self.xx * x + self.xy * y, self.yx * x + self.yy * y)
    }
}

impl Mul for JonesMatrix {
    type Output = Self;

    fn mul(self, b: Self) -> Self {
        Self::new(
            self.xx * b.xx + self.xy * b.yx,
            self.xx * b.xy + self.xy * b.yy,
            self.yx * b.xx + self.yy * b.yx,
            self.yx * b.xy + self.yy * b.yy,
        )
    }
}

impl Add for JonesMatrix {
    type Output = Self;

    fn add(self, b: Self) -> Self {
        Self::new(self.xx + b.xx, self.xy + b.xy, self.yx + b.yx, self.yy + b.yy)
    }
}

impl Sub for JonesMatrix {
    type Output = Self;

    fn sub(self, b: Self) -> Self {
        Self::new(self.xx - b.xx, self.xy - b.xy, self.yx - b.yx, self.yy - b.yy)
    }
}

impl Default for JonesMatrix {
    fn default() -> Self {
        Self::ZERO
    }
}
