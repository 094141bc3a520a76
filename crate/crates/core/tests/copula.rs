use ctmix::copula::{
    fit_parametric_copula, iterative_fit, to_u_space, to_x_space, CopulaKind, CopulaOptions, CopulaTypeModel,
    InitialWorking, ParametricCopulaModel,
};
use ctmix::data::DataMatrix;
use ctmix::evaluation::Dgp;
use ctmix::marginals::MarginalModel;
use ctmix::numerics::{Matrix, UnivariateCdf};
use ctmix::seed::rng;
use ctmix::vb::Family;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{FRAC_PI_2, PI};

fn fitted_motivating() -> (Dgp, CopulaTypeModel, DataMatrix) {
    let dgp = Dgp::motivating().unwrap();
    let y = dgp.sample(400, 21).unwrap();
    let mut opts = CopulaOptions {
        family: Family::MN,
        init: InitialWorking::StandardNormal,
        ..CopulaOptions::default()
    };
    opts.vb.k_init = 2;
    opts.vb.seed = 5;
    let model = iterative_fit(&y, dgp.marginals(), &opts).unwrap();
    (dgp, model, y)
}

// Midpoint nodes and weights for ∫ over R with x = c + s·tan θ.
fn line_nodes(m: usize, c: f64, s: f64) -> Vec<(f64, f64)> {
    let h = PI / m as f64;
    (0..m)
        .map(|k| {
            let th = -FRAC_PI_2 + (k as f64 + 0.5) * h;
            let ct = th.cos();
            (c + s * th.tan(), h * s / (ct * ct))
        })
        .collect()
}

#[test]
fn copula_type_density_integrates_to_one() {
    let (_, model, _) = fitted_motivating();
    let a = line_nodes(300, 1.0, 2.0);
    let b = line_nodes(300, 0.0, 1.5);
    let mut total = 0.0;
    for &(y1, w1) in &a {
        for &(y2, w2) in &b {
            total += w1 * w2 * model.logpdf(&[y1, y2]).unwrap().exp();
        }
    }
    assert!((total - 1.0).abs() < 0.02, "integral {total}");
}

#[test]
fn marginals_of_the_estimator() {
    let (dgp, model, _) = fitted_motivating();
    let nodes = line_nodes(4000, 0.0, 1.5);
    for &y1 in &[-3.0, -0.5, 1.0, 2.2, 5.0] {
        let ct: f64 = nodes.iter().map(|&(y2, w)| w * model.logpdf(&[y1, y2]).unwrap().exp()).sum();
        let expect = model.marginal_logpdf(0, y1).unwrap().exp();
        assert!((ct - expect).abs() < 1e-4 * expect.max(1e-2), "CT at {y1}: {ct} vs {expect}");

        // the exact-copula variant reproduces f_1
        let exact: f64 = nodes
            .iter()
            .map(|&(y2, w)| w * model.exact_copula_logpdf(&[y1, y2]).unwrap().exp())
            .sum();
        let f1 = dgp.marginals()[0].pdf(y1);
        assert!((exact - f1).abs() < 1e-4, "exact copula at {y1}: {exact} vs {f1}");
    }
}

#[test]
fn exact_variant_coincides_when_working_equals_joint_marginals() {
    let (_, model, y) = fitted_motivating();
    let same = CopulaTypeModel::new(model.marginals.clone(), model.joint_marginals.clone(), model.joint.clone()).unwrap();
    for row in y.rows().take(20) {
        assert_eq!(same.logpdf(row).unwrap(), same.exact_copula_logpdf(row).unwrap());
    }
}

#[test]
fn iteration_log_invariants() {
    let (_, model, y) = fitted_motivating();
    let log = &model.iteration_log;
    assert!(!log.is_empty() && log.len() <= 30);
    let best = log.iter().map(|r| r.loglik).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(model.loglik(), Some(best));
    // patience 1: every iteration but the last improves on the running best
    let mut running = f64::NEG_INFINITY;
    for (i, r) in log.iter().enumerate() {
        assert_eq!(r.iteration, i + 1);
        if i + 1 < log.len() {
            assert!(r.loglik > running);
            running = r.loglik;
        }
    }
    if log.len() < 30 {
        assert!(log.last().unwrap().loglik <= running);
    }
    // rescoring the training rows reproduces the logged value exactly
    assert_eq!(model.training_loglik(&y).unwrap().to_bits(), best.to_bits());
}

#[test]
fn true_density_scores_the_generator() {
    let dgp = Dgp::motivating().unwrap();
    let t = dgp.true_density().unwrap();
    // identity on the X-space mixture: f(y) dy = g(x) dx
    let x = dgp.sample_x(50, 2);
    let y = dgp.u_to_y(&dgp.x_to_u(&x)).unwrap();
    for i in 0..50 {
        let (xr, yr) = (x.row(i), y.row(i));
        let jac: f64 = (0..2)
            .map(|j| dgp.marginals()[j].ln_pdf(yr[j]) - dgp.g_marginals()[j].ln_pdf(xr[j]))
            .sum();
        let expect = dgp.mixture.logpdf(xr) + jac;
        assert!((t.logpdf(yr).unwrap() - expect).abs() < 1e-8);
    }
}

#[test]
fn space_transforms_round_trip() {
    let marg = vec![
        MarginalModel::Normal { mean: 1.0, sd: 2.0 },
        MarginalModel::StudentT { loc: -1.0, scale: 0.5, nu: 3.0 },
    ];
    let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.37).sin() * 4.0, (i as f64).cos() * 2.0]).collect();
    let y = DataMatrix::from_rows(&rows).unwrap();
    let u = to_u_space(&y, &marg).unwrap();
    assert!(u.rows().flatten().all(|&p| p > 0.0 && p < 1.0));
    let back = to_x_space(&u, &marg).unwrap();
    for (a, b) in y.rows().zip(back.rows()) {
        for (p, q) in a.iter().zip(b) {
            assert!((p - q).abs() < 1e-8, "{p} vs {q}");
        }
    }
    let std_normal = vec![MarginalModel::Normal { mean: 0.0, sd: 1.0 }; 2];
    let x = to_x_space(&u, &std_normal).unwrap();
    assert!((x.row(0)[0] - (rows[0][0] - 1.0) / 2.0).abs() < 1e-10);
    assert!(to_u_space(&y, &marg[..1]).is_err());
}

fn bvn_logpdf(a: f64, b: f64, rho: f64) -> f64 {
    let q = (a * a - 2.0 * rho * a * b + b * b) / (1.0 - rho * rho);
    -(2.0 * PI).ln() - 0.5 * (1.0 - rho * rho).ln() - 0.5 * q
}

fn bvt_logpdf(a: f64, b: f64, rho: f64, nu: f64) -> f64 {
    let q = (a * a - 2.0 * rho * a * b + b * b) / (1.0 - rho * rho);
    ln_gamma((nu + 2.0) / 2.0) - ln_gamma(nu / 2.0) - (nu * PI).ln() - 0.5 * (1.0 - rho * rho).ln()
        - (nu + 2.0) / 2.0 * (1.0 + q / nu).ln()
}

#[test]
fn parametric_copulas_with_matching_marginals() {
    let rho = -0.45;
    let r = Matrix::from_rows(&[vec![1.0, rho], vec![rho, 1.0]]);
    let nc = ParametricCopulaModel::new(
        CopulaKind::Normal,
        r.clone(),
        None,
        vec![MarginalModel::Normal { mean: 0.0, sd: 1.0 }; 2],
    )
    .unwrap();
    let tc = ParametricCopulaModel::new(
        CopulaKind::T,
        r,
        Some(4),
        vec![MarginalModel::StudentT { loc: 0.0, scale: 1.0, nu: 4.0 }; 2],
    )
    .unwrap();
    for &(a, b) in &[(0.0, 0.0), (1.3, -0.4), (-2.5, -2.0), (3.0, 1.0)] {
        assert!((nc.logpdf(&[a, b]).unwrap() - bvn_logpdf(a, b, rho)).abs() < 1e-9);
        assert!((tc.logpdf(&[a, b]).unwrap() - bvt_logpdf(a, b, rho, 4.0)).abs() < 1e-8);
    }
}

#[test]
fn parametric_copula_fits() {
    let mut r = rng(31);
    let g = Gamma::new(2.0, 0.5).unwrap();
    let rho: f64 = 0.5;
    let draw = |r: &mut rand_chacha::ChaCha8Rng, heavy: bool| {
        let a: f64 = StandardNormal.sample(r);
        let b: f64 = StandardNormal.sample(r);
        let w: f64 = if heavy { g.sample(r) } else { 1.0 };
        vec![a / w.sqrt(), (rho * a + (1.0 - rho * rho).sqrt() * b) / w.sqrt()]
    };
    // Gaussian data, arbitrary monotone marginals
    let rows: Vec<Vec<f64>> = (0..2000).map(|_| draw(&mut r, false)).collect();
    let std_normal = vec![MarginalModel::Normal { mean: 0.0, sd: 1.0 }; 2];
    let u = to_u_space(&DataMatrix::from_rows(&rows).unwrap(), &std_normal).unwrap();
    let nc = fit_parametric_copula(&u, CopulaKind::Normal, std_normal.clone(), 100).unwrap();
    assert!((nc.correlation()[(0, 1)] - rho).abs() < 0.05);
    assert_eq!(nc.correlation()[(0, 0)], 1.0);

    // bivariate t4 data
    let rows: Vec<Vec<f64>> = (0..800).map(|_| draw(&mut r, true)).collect();
    let t4 = vec![MarginalModel::StudentT { loc: 0.0, scale: 1.0, nu: 4.0 }; 2];
    let u = to_u_space(&DataMatrix::from_rows(&rows).unwrap(), &t4).unwrap();
    let tc = fit_parametric_copula(&u, CopulaKind::T, t4, 100).unwrap();
    let nu = tc.nu().unwrap();
    assert!((2..=8).contains(&nu), "ν = {nu}");
    assert!((tc.correlation()[(0, 1)] - rho).abs() < 0.07);
}
