use ctmix::marginals::UnivMixture;
use ctmix::numerics::special::{lgamma, psi};
use ctmix::numerics::{
    cholesky, clamp_probability, invert_cdf, ln_gamma, mvn_logpdf, mvt_logpdf, Matrix, Normal, SpdMatrix, StudentT,
    UnivariateCdf,
};
use proptest::prelude::*;

fn spd_from(entries: &[f64], d: usize) -> Matrix<f64> {
    let a = Matrix::from_vec(d, d, entries[..d * d].to_vec());
    let mut v = a.matmul(&a.transpose());
    v.add_diag(0.5);
    v
}

// Gauss-Jordan inverse and determinant, independent of the Cholesky path.
fn dense_inverse_and_det(m: &Matrix<f64>) -> (Matrix<f64>, f64) {
    let n = m.rows();
    let mut a = m.clone();
    let mut inv = Matrix::identity(n);
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[(i, c)].abs().total_cmp(&a[(j, c)].abs())).unwrap();
        if p != c {
            for k in 0..n {
                let t = a[(c, k)];
                a[(c, k)] = a[(p, k)];
                a[(p, k)] = t;
                let t = inv[(c, k)];
                inv[(c, k)] = inv[(p, k)];
                inv[(p, k)] = t;
            }
            det = -det;
        }
        let piv = a[(c, c)];
        det *= piv;
        for k in 0..n {
            a[(c, k)] /= piv;
            inv[(c, k)] /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = a[(r, c)];
                for k in 0..n {
                    a[(r, k)] -= f * a[(c, k)];
                    inv[(r, k)] -= f * inv[(c, k)];
                }
            }
        }
    }
    (inv, det)
}

#[test]
fn special_function_examples() {
    assert_eq!(ln_gamma(1.0).unwrap(), 0.0);
    assert!((ln_gamma(0.5f64).unwrap() - 0.572_364_942_924_700_1).abs() < 1e-12);
    assert!((ln_gamma(10.0).unwrap() - 362_880f64.ln()).abs() < 1e-12);
    assert!((psi(1.0f64) + 0.577_215_664_901_532_9).abs() < 1e-10);
    assert!((psi(2.0f64) - 0.422_784_335_098_467_1).abs() < 1e-10);
    assert!((psi(0.5f64) + 1.963_510_026_021_423_5).abs() < 1e-10);
    assert!(ln_gamma(0.0).is_err());
    assert!(ctmix::numerics::digamma(-1.0).is_err());
}

#[test]
fn ln_gamma_against_statrs_over_range() {
    let mut x = 1e-3;
    while x < 1e6 {
        let ours = lgamma(x);
        let theirs = statrs::function::gamma::ln_gamma(x);
        assert!((ours - theirs).abs() < 1e-12 * theirs.abs().max(1.0), "x={x}: {ours} vs {theirs}");
        x *= 1.37;
    }
}

#[test]
fn mvn_examples() {
    let i2 = SpdMatrix::identity(2);
    assert!((mvn_logpdf(&[0.0, 0.0], &[0.0, 0.0], &i2) + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
    let v = SpdMatrix::new(Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]])).unwrap();
    let expected = -(2.0 * std::f64::consts::PI * 0.75f64.sqrt()).ln();
    assert!((mvn_logpdf(&[0.0, 0.0], &[0.0, 0.0], &v) - expected).abs() < 1e-12);
    assert!((expected + 1.6940).abs() < 1e-4);
}

#[test]
fn mvt_examples() {
    let one = SpdMatrix::identity(1);
    assert!((mvt_logpdf(&[0.0], &[0.0], &one, 1.0) + std::f64::consts::PI.ln()).abs() < 1e-12);
    let v = SpdMatrix::new(spd_from(&[0.3, -0.2, 0.9, 0.1, 1.1, 0.4, -0.5, 0.2, 0.7], 3)).unwrap();
    let mu = [0.4, -1.0, 2.0];
    let nu: f64 = 3.5;
    let d = 3.0;
    let mode = lgamma((nu + d) / 2.0) - lgamma(nu / 2.0) - d / 2.0 * (nu * std::f64::consts::PI).ln() - 0.5 * v.log_det();
    assert!((mvt_logpdf(&mu, &mu, &v, nu) - mode).abs() < 1e-12);
}

#[test]
fn mvt_matches_scale_mixture_quadrature() {
    // ∫ N(x; μ, V/w) G(w; ν/2, ν/2) dw on a log grid in w.
    let v = SpdMatrix::new(Matrix::from_rows(&[vec![1.3, 0.4], vec![0.4, 0.8]])).unwrap();
    let mu = [0.2, -0.1];
    let nu: f64 = 5.0;
    let h = nu / 2.0;
    for x in [[0.0, 0.0], [1.5, -2.0], [-3.0, 4.0], [6.0, 6.0]] {
        let r = [x[0] - mu[0], x[1] - mu[1]];
        let q = v.inv_quad(&r);
        let (lo, hi, m) = (-40.0f64, 8.0f64, 200_000usize);
        let ds = (hi - lo) / m as f64;
        let mut acc = 0.0;
        for k in 0..=m {
            let s = lo + k as f64 * ds;
            let w = s.exp();
            let ln_normal = -(2.0 * std::f64::consts::PI).ln() + w.ln() - 0.5 * v.log_det() - 0.5 * w * q;
            let ln_gamma_pdf = h * h.ln() + (h - 1.0) * w.ln() - h * w - statrs::function::gamma::ln_gamma(h);
            let f = (ln_normal + ln_gamma_pdf).exp() * w;
            acc += if k == 0 || k == m { 0.5 * f } else { f };
        }
        let quad = (acc * ds).ln();
        let ours = mvt_logpdf(&x, &mu, &v, nu);
        assert!((ours - quad).abs() < 1e-8, "{x:?}: {ours} vs {quad}");
    }
}

#[test]
fn quantile_examples() {
    let n = Normal::<f64>::standard();
    assert_eq!(invert_cdf(&n, 0.5).unwrap(), 0.0);
    assert!((invert_cdf(&n, 0.975).unwrap() - 1.959_964).abs() < 1e-6);
    let mix = UnivMixture::new(vec![0.5, 0.5], vec![-2.0, 2.0], vec![1.0, 1.0], None).unwrap();
    assert!(invert_cdf(&mix, 0.5).unwrap().abs() < 1e-9);
    assert!(invert_cdf(&n, f64::NAN).is_err());
}

#[test]
fn cholesky_bit_identical() {
    let m = spd_from(&[0.9, 0.1, -0.4, 0.3, 1.2, 0.5, -0.7, 0.2, 0.6, 0.0, 1.0, 0.8, 0.4, -0.3, 0.5, 0.2], 4);
    let a = cholesky(&m).unwrap();
    let b = cholesky(&m.clone()).unwrap();
    assert!(a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn f32_kernels_track_f64() {
    let v64 = Matrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 0.5]]);
    let v32 = v64.map(|x| x as f32);
    let a = mvn_logpdf(&[0.4, -0.2], &[0.0, 0.1], &SpdMatrix::new(v64.clone()).unwrap());
    let b = mvn_logpdf(&[0.4f32, -0.2], &[0.0, 0.1], &SpdMatrix::new(v32.clone()).unwrap());
    assert!((a - b as f64).abs() < 1e-5);
    let a = mvt_logpdf(&[0.4, -0.2], &[0.0, 0.1], &SpdMatrix::new(v64).unwrap(), 4.0);
    let b = mvt_logpdf(&[0.4f32, -0.2], &[0.0, 0.1], &SpdMatrix::new(v32).unwrap(), 4.0);
    assert!((a - b as f64).abs() < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lgamma_recurrence(x in 0.1f64..100.0) {
        prop_assert!((lgamma(x + 1.0) - lgamma(x) - x.ln()).abs() < 1e-10);
    }

    #[test]
    fn digamma_recurrence(x in 0.05f64..200.0) {
        prop_assert!((psi(x + 1.0) - psi(x) - 1.0 / x).abs() < 1e-10);
    }

    #[test]
    fn mvn_matches_dense_inverse(entries in prop::collection::vec(-1.0f64..1.0, 9),
                                 x in prop::collection::vec(-3.0f64..3.0, 3),
                                 mu in prop::collection::vec(-1.0f64..1.0, 3)) {
        let v = spd_from(&entries, 3);
        let (inv, det) = dense_inverse_and_det(&v);
        let r: Vec<f64> = x.iter().zip(&mu).map(|(a, b)| a - b).collect();
        let q: f64 = (0..3).map(|i| (0..3).map(|j| r[i] * inv[(i, j)] * r[j]).sum::<f64>()).sum();
        let oracle = -1.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * q;
        let ours = mvn_logpdf(&x, &mu, &SpdMatrix::new(v).unwrap());
        prop_assert!((ours - oracle).abs() < 1e-9, "{} vs {}", ours, oracle);
    }

    #[test]
    fn mvt_tends_to_mvn(d in 1usize..=5, entries in prop::collection::vec(-1.0f64..1.0, 25),
                        x in prop::collection::vec(-2.0f64..2.0, 5)) {
        let v = SpdMatrix::new(spd_from(&entries, d)).unwrap();
        let mu = vec![0.0; d];
        let diff = mvt_logpdf(&x[..d], &mu, &v, 1e6) - mvn_logpdf(&x[..d], &mu, &v);
        prop_assert!(diff.abs() < 1e-3);
    }

    #[test]
    fn normal_round_trip(x in -6.0f64..6.0, m in -3.0f64..3.0, s in 0.1f64..5.0) {
        let n = Normal::new(m, s);
        prop_assert!((n.quantile(n.cdf(m + s * x)).unwrap() - (m + s * x)).abs() < 1e-6 * s.max(1.0));
    }

    #[test]
    fn t_round_trip(nu in 1u32..60, u in 1e-4f64..(1.0 - 1e-4)) {
        let t = StudentT::new(0.5, 2.0, nu as f64);
        let x = t.quantile(u).unwrap();
        prop_assert!((t.cdf(x) - u).abs() < 1e-10);
        prop_assert!((t.quantile(t.cdf(x)).unwrap() - x).abs() < 1e-6 * x.abs().max(1.0));
    }

    #[test]
    fn t_cdf_matches_statrs(nu in 1u32..80, x in -30.0f64..30.0) {
        use statrs::distribution::ContinuousCDF;
        let ours = StudentT::new(0.0, 1.0, nu as f64).cdf(x);
        let theirs = statrs::distribution::StudentsT::new(0.0, 1.0, nu as f64).unwrap().cdf(x);
        prop_assert!((ours - theirs).abs() < 1e-12);
    }

    #[test]
    fn mixture_quantile_round_trip(w in 0.05f64..0.95, m2 in -5.0f64..5.0, s2 in 0.2f64..3.0,
                                   nu in 1u32..30, p in 5e-4f64..(1.0 - 5e-4)) {
        let mix = UnivMixture::new(vec![w, 1.0 - w], vec![0.0, m2], vec![1.0, s2], Some(vec![nu, 30])).unwrap();
        let x = invert_cdf(&mix, p).unwrap();
        prop_assert!((mix.cdf(x) - p).abs() < 1e-10);
        prop_assert!((invert_cdf(&mix, mix.cdf(x)).unwrap() - x).abs() < 1e-6);
    }

    #[test]
    fn clamp_stays_inside(u in -1.0f64..2.0) {
        let c = clamp_probability(u);
        prop_assert!(c > 0.0 && c < 1.0);
    }

    #[test]
    fn log_sum_exp_bounds(xs in prop::collection::vec(-700.0f64..700.0, 1..20)) {
        let l = ctmix::numerics::log_sum_exp(&xs);
        let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(l >= m && l <= m + (xs.len() as f64).ln() + 1e-12);
    }
}
