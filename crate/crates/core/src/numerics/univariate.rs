//! Univariate distributions exposed through a common cdf/quantile surface.

use serde::{Deserialize, Serialize};

use super::invert::invert_cdf;
use super::special::{beta_reg, lgamma};
use super::Real;
use crate::error::Result;

/// A continuous univariate distribution with density, cdf and quantile.
pub trait UnivariateCdf<T: Real> {
    fn ln_pdf(&self, x: T) -> T;

    fn pdf(&self, x: T) -> T {
        self.ln_pdf(x).exp()
    }

    fn cdf(&self, x: T) -> T;

    /// Centre and spread used to seed bracket search in [`invert_cdf`].
    fn location_hint(&self) -> (T, T);

    fn quantile(&self, u: T) -> Result<T> {
        invert_cdf(self, u)
    }
}

impl<T: Real, D: UnivariateCdf<T> + ?Sized> UnivariateCdf<T> for &D {
    fn ln_pdf(&self, x: T) -> T {
        (**self).ln_pdf(x)
    }
    fn cdf(&self, x: T) -> T {
        (**self).cdf(x)
    }
    fn location_hint(&self) -> (T, T) {
        (**self).location_hint()
    }
    fn quantile(&self, u: T) -> Result<T> {
        (**self).quantile(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normal<T> {
    pub mean: T,
    pub sd: T,
}

impl<T: Real> Normal<T> {
    pub fn new(mean: T, sd: T) -> Self {
        assert!(sd > T::zero(), "normal sd must be positive");
        Normal { mean, sd }
    }

    pub fn standard() -> Self {
        Normal {
            mean: T::zero(),
            sd: T::one(),
        }
    }
}

/// Standard normal cdf.
pub fn std_normal_cdf<T: Real>(z: T) -> T {
    T::half() * (-z * T::FRAC_1_SQRT_2()).erfc()
}

pub fn std_normal_ln_pdf<T: Real>(z: T) -> T {
    -T::half() * z * z - T::c(0.918_938_533_204_672_8)
}

/// Standard normal quantile: Acklam's rational approximation followed by
/// one Halley step against the erfc-based cdf.
pub fn std_normal_quantile<T: Real>(p: T) -> T {
    if p <= T::zero() {
        return T::neg_infinity();
    }
    if p >= T::one() {
        return T::infinity();
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let pf = p.to_f64().unwrap_or(0.5);
    let p_low = 0.02425;
    let x = if pf < p_low {
        let q = (-2.0 * pf.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if pf <= 1.0 - p_low {
        let q = pf - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - pf).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = T::c(x);
    let e = std_normal_cdf(x) - p;
    let u = e * T::c((2.0 * std::f64::consts::PI).sqrt()) * (x * x * T::half()).exp();
    x - u / (T::one() + x * u * T::half())
}

impl<T: Real> UnivariateCdf<T> for Normal<T> {
    fn ln_pdf(&self, x: T) -> T {
        std_normal_ln_pdf((x - self.mean) / self.sd) - self.sd.ln()
    }

    fn cdf(&self, x: T) -> T {
        std_normal_cdf((x - self.mean) / self.sd)
    }

    fn location_hint(&self) -> (T, T) {
        (self.mean, self.sd)
    }

    fn quantile(&self, u: T) -> Result<T> {
        let u = super::invert::clamp_probability(u);
        Ok(self.mean + self.sd * std_normal_quantile(u))
    }
}

/// Location-scale Student t with `nu` degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentT<T> {
    pub loc: T,
    pub scale: T,
    pub nu: T,
}

impl<T: Real> StudentT<T> {
    pub fn new(loc: T, scale: T, nu: T) -> Self {
        assert!(scale > T::zero() && nu > T::zero(), "t scale and dof must be positive");
        StudentT { loc, scale, nu }
    }

    pub fn standard(nu: T) -> Self {
        Self::new(T::zero(), T::one(), nu)
    }
}

/// Standard Student t cdf via the regularized incomplete beta.
pub fn std_t_cdf<T: Real>(t: T, nu: T) -> T {
    if t.is_infinite() {
        return if t > T::zero() { T::one() } else { T::zero() };
    }
    let t2 = t * t;
    let x = nu / (nu + t2);
    let y = t2 / (nu + t2);
    let tail = T::half() * beta_reg(nu * T::half(), T::half(), x, y);
    if t > T::zero() {
        T::one() - tail
    } else {
        tail
    }
}

pub fn std_t_ln_pdf<T: Real>(t: T, nu: T) -> T {
    let half = T::half();
    lgamma(half * (nu + T::one())) - lgamma(half * nu) - half * (nu * T::PI()).ln()
        - half * (nu + T::one()) * (t * t / nu).ln_1p()
}

impl<T: Real> UnivariateCdf<T> for StudentT<T> {
    fn ln_pdf(&self, x: T) -> T {
        std_t_ln_pdf((x - self.loc) / self.scale, self.nu) - self.scale.ln()
    }

    fn cdf(&self, x: T) -> T {
        std_t_cdf((x - self.loc) / self.scale, self.nu)
    }

    fn location_hint(&self) -> (T, T) {
        (self.loc, self.scale)
    }

    fn quantile(&self, u: T) -> Result<T> {
        let u = super::invert::clamp_probability(u);
        match std_t_quantile(u, self.nu) {
            Some(t) => Ok(self.loc + self.scale * t),
            None => invert_cdf(self, u),
        }
    }
}

/// Standard t quantile: closed forms for one and two degrees of freedom,
/// otherwise a Cornish-Fisher start polished by Newton steps. `None` when
/// Newton fails to settle.
pub fn std_t_quantile<T: Real>(p: T, nu: T) -> Option<T> {
    let half = T::half();
    if p == half {
        return Some(T::zero());
    }
    if nu == T::one() {
        return Some((T::PI() * (p - half)).tan());
    }
    if nu == T::two() {
        return Some((p + p - T::one()) / (T::two() * p * (T::one() - p)).sqrt());
    }
    // work in the lower tail for accuracy, then reflect
    let (q, sign) = if p > half { (T::one() - p, T::one()) } else { (p, -T::one()) };
    let z = std_normal_quantile(q);
    let (z2, c) = (z * z, T::c);
    let g1 = (z2 + T::one()) * z / c(4.0);
    let g2 = ((c(5.0) * z2 + c(16.0)) * z2 + c(3.0)) * z / c(96.0);
    let g3 = (((c(3.0) * z2 + c(19.0)) * z2 + c(17.0)) * z2 - c(15.0)) * z / c(384.0);
    let mut x = z + g1 / nu + g2 / (nu * nu) + g3 / (nu * nu * nu);
    if !(x < T::zero()) || !x.is_finite() {
        return None;
    }
    let lnq = q.ln();
    for _ in 0..60 {
        // Newton on ln F keeps steps sane deep in the tail
        let f = std_t_cdf(x, nu);
        if !(f > T::zero()) {
            return None;
        }
        let step = (f.ln() - lnq) * f / std_t_ln_pdf(x, nu).exp();
        let next = x - step;
        let next = if next >= T::zero() { x * half } else { next };
        if (next - x).abs() <= T::epsilon() * c(8.0) * x.abs().max(T::one()) {
            return Some(sign * -next);
        }
        x = next;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};

    #[test]
    fn normal_quantile_known_values() {
        let n = Normal::<f64>::standard();
        assert!(n.quantile(0.5).unwrap().abs() < 1e-14);
        assert!((n.quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-9);
        for &p in &[1e-10f64, 1e-4, 0.01, 0.3, 0.7, 0.99, 1.0 - 1e-9] {
            let x = std_normal_quantile(p);
            assert!((std_normal_cdf(x) - p).abs() < 1e-14 * p.max(1e-3) + 1e-16, "p={p}");
        }
    }

    #[test]
    fn t_quantile_round_trip() {
        for &nu in &[1.0, 2.0, 3.0, 5.0, 17.0, 100.0] {
            let d = StudentsT::new(0.0, 1.0, nu).unwrap();
            for &p in &[1e-12f64, 1e-6, 0.01, 0.3, 0.5, 0.8, 0.999, 1.0 - 1e-9] {
                let x = StudentT::standard(nu).quantile(p).unwrap();
                let back = d.cdf(x);
                assert!((back - p).abs() < 1e-10 * p.min(1.0 - p).max(1e-6), "nu={nu} p={p}: {back}");
            }
        }
    }

    #[test]
    fn t_against_statrs() {
        for &nu in &[1.0, 2.5, 5.0, 30.0] {
            let d = StudentsT::new(0.0, 1.0, nu).unwrap();
            for &x in &[-40.0, -3.0, -0.2, 0.0, 0.7, 2.0, 15.0] {
                assert!((std_t_cdf(x, nu) - d.cdf(x)).abs() < 1e-12, "cdf nu={nu} x={x}");
                assert!((std_t_ln_pdf(x, nu) - d.ln_pdf(x)).abs() < 1e-12, "pdf nu={nu} x={x}");
            }
        }
    }

    #[test]
    fn cauchy_closed_form() {
        let c = StudentT::<f64>::standard(1.0);
        for &x in &[-5.0f64, -1.0, 0.0, 0.3, 8.0] {
            let expect = 0.5 + x.atan() / std::f64::consts::PI;
            assert!((c.cdf(x) - expect).abs() < 1e-13);
        }
        assert!((c.ln_pdf(0.0) + std::f64::consts::PI.ln()).abs() < 1e-13);
    }
}
