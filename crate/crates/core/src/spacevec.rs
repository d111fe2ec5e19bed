//! Complex space vectors and the per-unit convention.
//!
//! Three-phase quantities are represented as amplitude-invariant space
//! vectors, so a magnitude of 1 pu is rated peak phase voltage (or current)
//! and the complex power `S = v * conj(i)` needs no 3/2 factor.
//!
//! A vector in the stationary frame is mapped to a synchronous frame at
//! angle `phi` by `v = v_s * exp(-j*phi)`.

use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Complex space vector in per unit.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SpaceVector {
    pub re: f64,
    pub im: f64,
}

impl SpaceVector {
    pub const ZERO: Self = Self { re: 0.0, im: 0.0 };
    pub const ONE: Self = Self { re: 1.0, im: 0.0 };
    pub const J: Self = Self { re: 0.0, im: 1.0 };

    #[inline]
    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    /// Unit vector `exp(j*theta)`.
    #[inline]
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = libm::sincos(theta);
        Self { re: c, im: s }
    }

    #[inline]
    pub fn from_polar(magnitude: f64, theta: f64) -> Self {
        Self::from_angle(theta) * magnitude
    }

    #[inline]
    pub fn magnitude(self) -> f64 {
        libm::hypot(self.re, self.im)
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    /// Argument in `(-pi, pi]`.
    #[inline]
    pub fn angle(self) -> f64 {
        libm::atan2(self.im, self.re)
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self {
            re: self.re,
            im: -self.im,
        }
    }

    #[inline]
    pub fn scale(self, k: f64) -> Self {
        Self {
            re: self.re * k,
            im: self.im * k,
        }
    }

    /// Multiplies by `exp(j*theta)`.
    #[inline]
    pub fn rotate(self, theta: f64) -> Self {
        self * Self::from_angle(theta)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl Add for SpaceVector {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl AddAssign for SpaceVector {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.re += rhs.re;
        self.im += rhs.im;
    }
}

impl Sub for SpaceVector {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl SubAssign for SpaceVector {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        self.re -= rhs.re;
        self.im -= rhs.im;
    }
}

impl Neg for SpaceVector {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.im)
    }
}

impl Mul for SpaceVector {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Self::new(self.re * rhs.re - self.im * rhs.im, self.re * rhs.im + self.im * rhs.re)
    }
}

impl Mul<f64> for SpaceVector {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

impl Mul<SpaceVector> for f64 {
    type Output = SpaceVector;
    #[inline]
    fn mul(self, rhs: SpaceVector) -> SpaceVector {
        rhs.scale(self)
    }
}

impl Div<f64> for SpaceVector {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        Self::new(self.re / rhs, self.im / rhs)
    }
}

/// Stationary frame to synchronous frame at angle `phi`.
#[inline]
pub fn to_dq(v_s: SpaceVector, phi: f64) -> SpaceVector {
    v_s.rotate(-phi)
}

/// Synchronous frame at angle `phi` to stationary frame.
#[inline]
pub fn to_alphabeta(v: SpaceVector, phi: f64) -> SpaceVector {
    v.rotate(phi)
}

/// Active and reactive power `(P, Q)` of `v * conj(i)`.
#[inline]
pub fn complex_power(v: SpaceVector, i: SpaceVector) -> (f64, f64) {
    let s = v * i.conj();
    (s.re, s.im)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    use core::f64::consts::{PI, TAU};
    let mut w = libm::remainder(theta, TAU);
    if w <= -PI {
        w += TAU;
    }
    w
}

/// Base quantities of one per-unit system.
///
/// `s_base` in VA, `v_base` as rated line-to-line rms voltage in V,
/// `omega_base` in rad/s.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PerUnitBase {
    pub s_base: f64,
    pub v_base: f64,
    pub omega_base: f64,
}

impl PerUnitBase {
    pub fn new(s_base: f64, v_base: f64, omega_base: f64) -> Option<Self> {
        let ok = [s_base, v_base, omega_base].iter().all(|x| x.is_finite() && *x > 0.0);
        ok.then_some(Self {
            s_base,
            v_base,
            omega_base,
        })
    }

    /// Base for an aggregation of `n_wt` turbines, each behind an
    /// `s_unit` transformer on a grid-side voltage `v_line`.
    pub fn aggregated(n_wt: u32, s_unit: f64, v_line: f64, omega_base: f64) -> Option<Self> {
        Self::new(f64::from(n_wt) * s_unit, v_line, omega_base)
    }

    pub fn z_base(&self) -> f64 {
        self.v_base * self.v_base / self.s_base
    }

    /// Peak phase current corresponding to 1 pu (amplitude-invariant).
    pub fn i_base_peak(&self) -> f64 {
        2.0 * self.s_base / (3.0 * self.v_peak_phase())
    }

    pub fn v_peak_phase(&self) -> f64 {
        self.v_base * core::f64::consts::SQRT_2 / libm::sqrt(3.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, PI};
    use proptest::prelude::*;

    fn close(a: SpaceVector, b: SpaceVector, tol: f64) -> bool {
        (a - b).magnitude() <= tol
    }

    #[test]
    fn to_dq_examples() {
        assert_eq!(to_dq(SpaceVector::ONE, 0.0), SpaceVector::ONE);
        assert!(close(to_dq(SpaceVector::J, FRAC_PI_2), SpaceVector::ONE, 1e-15));

        // Oracle: explicit rotation matrix [cos, sin; -sin, cos].
        let (v, phi) = (SpaceVector::new(0.6, 0.8), 0.3_f64);
        let expected = SpaceVector::new(
            v.re * phi.cos() + v.im * phi.sin(),
            -v.re * phi.sin() + v.im * phi.cos(),
        );
        assert!(close(to_dq(v, phi), expected, 1e-15));
    }

    #[test]
    fn to_alphabeta_examples() {
        assert_eq!(to_alphabeta(SpaceVector::ONE, 0.0), SpaceVector::ONE);
        assert!(close(
            to_alphabeta(SpaceVector::J, FRAC_PI_2),
            SpaceVector::new(-1.0, 0.0),
            1e-15
        ));
    }

    #[test]
    fn complex_power_examples() {
        assert_eq!(complex_power(SpaceVector::ONE, SpaceVector::new(0.5, 0.0)), (0.5, 0.0));
        let (p, q) = complex_power(SpaceVector::ONE, SpaceVector::new(0.5, -0.3));
        assert_eq!(p, 0.5);
        assert_eq!(q, 0.3);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert!((wrap_angle(0.25) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn per_unit_base_rejects_nonpositive() {
        assert!(PerUnitBase::new(0.0, 66e3, 314.0).is_none());
        assert!(PerUnitBase::new(18e6, f64::NAN, 314.0).is_none());
        let b = PerUnitBase::aggregated(36, 18e6, 66e3, 2.0 * PI * 50.0).unwrap();
        assert_eq!(b.s_base, 648e6);
        // 1.5 * V_peak * I_peak recovers the base power.
        assert!((1.5 * b.v_peak_phase() * b.i_base_peak() / b.s_base - 1.0).abs() < 1e-12);
    }

    fn vec_strategy() -> impl Strategy<Value = SpaceVector> {
        (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(re, im)| SpaceVector::new(re, im))
    }

    proptest! {
        #[test]
        fn rotation_preserves_magnitude(v in vec_strategy(), phi in -20.0..20.0f64) {
            let d = to_dq(v, phi);
            prop_assert!((d.magnitude() - v.magnitude()).abs() < 1e-12);
            prop_assert!(d.is_finite());
        }

        #[test]
        fn dq_alphabeta_inverse(v in vec_strategy(), phi in -20.0..20.0f64) {
            prop_assert!(close(to_alphabeta(to_dq(v, phi), phi), v, 1e-12));
            prop_assert!(close(to_dq(to_alphabeta(v, phi), phi), v, 1e-12));
        }

        #[test]
        fn power_is_frame_invariant(v in vec_strategy(), i in vec_strategy(), th in -20.0..20.0f64) {
            let (p0, q0) = complex_power(v, i);
            let (p1, q1) = complex_power(to_dq(v, th), to_dq(i, th));
            let scale = 1.0 + v.magnitude() * i.magnitude();
            prop_assert!((p0 - p1).abs() < 1e-12 * scale);
            prop_assert!((q0 - q1).abs() < 1e-12 * scale);
        }
    }
}
