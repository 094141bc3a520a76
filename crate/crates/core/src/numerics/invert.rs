//! Quantiles of monotone cdfs by bracket expansion and Brent's method.

use super::univariate::UnivariateCdf;
use super::Real;
use crate::error::{Error, Result};

/// Probabilities are clamped to `[δ, 1 − δ]` before inversion.
pub const PROB_CLAMP: f64 = 1e-12;

const MAX_EXPANSIONS: usize = 2000;
const MAX_BRENT_ITERS: usize = 300;

pub fn clamp_probability<T: Real>(u: T) -> T {
    let delta = T::c(PROB_CLAMP).max(T::epsilon() * T::c(4.0));
    u.max(delta).min(T::one() - delta)
}

/// Find `x` with `F.cdf(x) = u`.
///
/// The bracket grows by doubling outward from the distribution's location
/// hint; Brent's method then shrinks it until the width reaches the
/// floating-point resolution of `x`.
pub fn invert_cdf<T, F>(dist: &F, u: T) -> Result<T>
where
    T: Real,
    F: UnivariateCdf<T> + ?Sized,
{
    if u.is_nan() {
        return Err(Error::Domain("cannot invert a cdf at NaN".into()));
    }
    let u = clamp_probability(u);
    let (center, spread) = dist.location_hint();
    let spread = if spread > T::zero() && spread.is_finite() {
        spread
    } else {
        T::one()
    };
    let g = |x: T| dist.cdf(x) - u;

    let g_center = g(center);
    if g_center == T::zero() {
        return Ok(center);
    }
    let (mut lo, mut hi, mut g_lo, mut g_hi);
    let mut step = spread;
    let mut expansions = 0;
    if g_center < T::zero() {
        lo = center;
        g_lo = g_center;
        loop {
            hi = center + step;
            g_hi = g(hi);
            if g_hi >= T::zero() {
                break;
            }
            lo = hi;
            g_lo = g_hi;
            step = step * T::two();
            expansions += 1;
            if expansions > MAX_EXPANSIONS || !hi.is_finite() {
                return Err(Error::Numeric(format!(
                    "quantile bracket failed for u={u}: cdf({hi}) = {} still below target",
                    g_hi + u
                )));
            }
        }
    } else {
        hi = center;
        g_hi = g_center;
        loop {
            lo = center - step;
            g_lo = g(lo);
            if g_lo <= T::zero() {
                break;
            }
            hi = lo;
            g_hi = g_lo;
            step = step * T::two();
            expansions += 1;
            if expansions > MAX_EXPANSIONS || !lo.is_finite() {
                return Err(Error::Numeric(format!(
                    "quantile bracket failed for u={u}: cdf({lo}) = {} still above target",
                    g_lo + u
                )));
            }
        }
    }
    brent_root(g, lo, hi, g_lo, g_hi).map_err(|e| match e {
        Error::Numeric(msg) => Error::Numeric(format!("inverting cdf at u={u}: {msg}")),
        other => other,
    })
}

/// Brent–Dekker root finding on a sign-changing bracket `[a, b]` with
/// known end values.
pub fn brent_root<T: Real>(
    f: impl Fn(T) -> T,
    mut a: T,
    mut b: T,
    mut fa: T,
    mut fb: T,
) -> Result<T> {
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return Err(Error::Numeric(format!(
            "root not bracketed: f({a}) = {fa}, f({b}) = {fb}"
        )));
    }
    let two = T::two();
    let three = T::c(3.0);
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_BRENT_ITERS {
        if (fb > T::zero()) == (fc > T::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = two * T::epsilon() * b.abs() + T::min_positive_value();
        let m = T::half() * (c - b);
        if m.abs() <= tol || fb == T::zero() {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * m * s;
                q = T::one() - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (two * m * qa * (qa - r) - (b - a) * (r - T::one()));
                q = (qa - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            } else {
                p = -p;
            }
            if two * p < (three * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b = if d.abs() > tol { b + d } else { b + tol * m.signum() };
        fb = f(b);
    }
    Err(Error::Numeric(format!(
        "Brent did not converge in {MAX_BRENT_ITERS} iterations (last x = {b}, f = {fb})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::univariate::{std_normal_cdf, Normal, StudentT};

    struct TwoNormals;

    impl UnivariateCdf<f64> for TwoNormals {
        fn ln_pdf(&self, x: f64) -> f64 {
            let a = Normal::new(-2.0, 1.0).ln_pdf(x);
            let b = Normal::new(2.0, 1.0).ln_pdf(x);
            crate::numerics::log_sum_exp(&[a, b]) - 2f64.ln()
        }
        fn cdf(&self, x: f64) -> f64 {
            0.5 * std_normal_cdf(x + 2.0) + 0.5 * std_normal_cdf(x - 2.0)
        }
        fn location_hint(&self) -> (f64, f64) {
            (0.3, 1.0)
        }
    }

    struct GenericNormal;

    impl UnivariateCdf<f64> for GenericNormal {
        fn ln_pdf(&self, x: f64) -> f64 {
            Normal::standard().ln_pdf(x)
        }
        fn cdf(&self, x: f64) -> f64 {
            std_normal_cdf(x)
        }
        fn location_hint(&self) -> (f64, f64) {
            (5.0, 0.01)
        }
    }

    #[test]
    fn normal_through_generic_solver() {
        assert!(invert_cdf(&GenericNormal, 0.5).unwrap().abs() < 1e-12);
        let q = invert_cdf(&GenericNormal, 0.975).unwrap();
        assert!((q - 1.959_964).abs() < 1e-6);
        let q = invert_cdf(&GenericNormal, 0.975).unwrap();
        assert!((std_normal_cdf(q) - 0.975).abs() < 1e-10);
    }

    #[test]
    fn symmetric_mixture_median() {
        let x = invert_cdf(&TwoNormals, 0.5).unwrap();
        assert!(x.abs() < 1e-10, "{x}");
    }

    #[test]
    fn clamps_extremes() {
        let lo = invert_cdf(&GenericNormal, 0.0).unwrap();
        let hi = invert_cdf(&GenericNormal, 1.0).unwrap();
        assert!(lo.is_finite() && hi.is_finite());
        assert!((std_normal_cdf(lo) - PROB_CLAMP).abs() < 1e-20);
        assert!(invert_cdf(&GenericNormal, f64::NAN).is_err());
    }

    #[test]
    fn heavy_tail_round_trip() {
        let t = StudentT::new(1.0, 2.0, 1.5);
        for &x in &[-300.0f64, -10.0, 0.0, 1.0, 4.0, 250.0] {
            let back = invert_cdf(&t, t.cdf(x)).unwrap();
            assert!((back - x).abs() < 1e-6 * x.abs().max(1.0), "x={x} back={back}");
        }
    }

    #[test]
    fn brent_requires_bracket() {
        let r = brent_root(|x: f64| x * x + 1.0, -1.0, 1.0, 2.0, 2.0);
        assert!(r.is_err());
        let r = brent_root(|x: f64| x.powi(3) - 2.0, 0.0, 2.0, -2.0, 6.0).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }
}
