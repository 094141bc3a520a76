use ctmix::data::{DataMatrix, Standardization};
use ctmix::evaluation::{complement, fold_partition};
use ctmix::marginals::{
    fit_kernel, fit_marginals, implied_marginal, select_marginals, silverman_bandwidth, MarginalModel,
    MarginalOptions, MarginalSpec, UnivMixture,
};
use ctmix::numerics::{Matrix, UnivariateCdf};
use ctmix::seed::{derive_seed, rng};
use ctmix::vb::{Component, ComponentScale, Family, MixtureModel};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

fn mixture(family: Family) -> MixtureModel {
    let dof = |v| family.is_t().then_some(v);
    let comps = vec![
        Component {
            location: vec![0.5, -1.0],
            scale: ComponentScale::Full {
                matrix: Matrix::from_rows(&[vec![1.0, 0.6], vec![0.6, 2.0]]),
            },
            dof: dof(4),
        },
        Component {
            location: vec![-1.5, 0.8],
            scale: ComponentScale::Full {
                matrix: Matrix::from_rows(&[vec![0.5, -0.2], vec![-0.2, 0.7]]),
            },
            dof: dof(9),
        },
    ];
    let st = Standardization {
        shift: vec![3.0, -2.0],
        scale: vec![2.0, 0.5],
        convention: "sample".into(),
    };
    MixtureModel::new(family, vec![0.35, 0.65], comps, st).unwrap()
}

// ∫ f(x) dx over the real line via x = c + s·tan θ and the open midpoint
// rule, which never evaluates the endpoints (heavy tails leave them nonzero).
fn integrate_line(f: impl Fn(f64) -> f64, c: f64, s: f64) -> f64 {
    let m = 40_000;
    let h = std::f64::consts::PI / m as f64;
    (0..m)
        .map(|k| {
            let th = -std::f64::consts::FRAC_PI_2 + (k as f64 + 0.5) * h;
            let ct = th.cos();
            f(c + s * th.tan()) * s / (ct * ct)
        })
        .sum::<f64>()
        * h
}

#[test]
fn implied_marginal_integrates_the_joint() {
    for family in [Family::MN, Family::Mt] {
        let joint = mixture(family);
        for j in 0..2 {
            let m = implied_marginal(&joint, j).unwrap();
            for &v in &[-4.0, -1.0, 0.3, 2.5, 6.0] {
                let numeric = integrate_line(
                    |other| {
                        let mut x = [0.0; 2];
                        x[j] = v;
                        x[1 - j] = other;
                        joint.logpdf(&x).exp()
                    },
                    joint.location(0)[1 - j],
                    1.0,
                );
                let analytic = m.pdf(v);
                assert!(
                    (analytic - numeric).abs() < 1e-7 * analytic.max(1e-3),
                    "{family} coordinate {j} at {v}: {analytic} vs {numeric}"
                );
            }
        }
    }
}

#[test]
fn implied_marginal_parameters() {
    let joint = mixture(Family::Mt);
    let MarginalModel::ImpliedMixT { coordinate, mixture } = implied_marginal(&joint, 1).unwrap() else {
        panic!("expected a t mixture");
    };
    assert_eq!(coordinate, 1);
    assert_eq!(mixture.dofs, Some(vec![4, 9]));
    // location −2 + 0.5·μ, scale 0.5·√Σ₂₂
    assert!((mixture.locations[0] - (-2.5)).abs() < 1e-14);
    assert!((mixture.scales[0] - 0.5 * 2f64.sqrt()).abs() < 1e-14);
    assert!((mixture.scales[1] - 0.5 * 0.7f64.sqrt()).abs() < 1e-14);
    assert!(implied_marginal(&joint, 2).is_err());
}

#[test]
fn silverman_rule() {
    let samples: Vec<f64> = (1..=100).map(f64::from).collect();
    // sd of 1..100 is √(100·101/12); IQR/1.34 is larger
    let sd = (100.0 * 101.0 / 12.0f64).sqrt();
    let expect = 0.9 * sd * 100f64.powf(-0.2);
    assert!((silverman_bandwidth(&samples) - expect).abs() < 1e-12);

    // heavy clustering makes the IQR the binding term
    let mut s = vec![0.0; 50];
    s.extend(vec![1.0; 50]);
    s.extend([-100.0, 100.0]);
    let iqr = 1.0;
    assert!((silverman_bandwidth(&s) - 0.9 * iqr / 1.34 * 102f64.powf(-0.2)).abs() < 1e-12);
}

#[test]
fn kernel_density_is_normalized() {
    let mut r = rng(3);
    let pts: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut r)).collect();
    let k = fit_kernel(&pts).unwrap();
    let total = integrate_line(|x| k.pdf(x), 0.0, 1.0);
    assert!((total - 1.0).abs() < 1e-8, "{total}");
    assert!(k.cdf(-50.0) < 1e-12 && (k.cdf(50.0) - 1.0).abs() < 1e-12);
}

#[test]
fn mixture_densities_are_normalized() {
    let normal = UnivMixture::new(vec![0.3, 0.7], vec![-2.0, 1.0], vec![0.5, 1.5], None).unwrap();
    let t = UnivMixture::new(vec![0.3, 0.7], vec![-2.0, 1.0], vec![0.5, 1.5], Some(vec![1, 6])).unwrap();
    for m in [normal, t] {
        let total = integrate_line(|x| m.ln_pdf(x).exp(), 0.0, 1.0);
        assert!((total - 1.0).abs() < 1e-7, "{total}");
    }
}

#[test]
fn selection_score_matches_hand_computed_cv() {
    let mut r = rng(8);
    let rows: Vec<Vec<f64>> = (0..60)
        .map(|i| {
            let a: f64 = StandardNormal.sample(&mut r);
            let b: f64 = StandardNormal.sample(&mut r);
            vec![a + if i % 3 == 0 { 4.0 } else { 0.0 }, b]
        })
        .collect();
    let data = DataMatrix::from_rows(&rows).unwrap();
    let cands = [MarginalSpec::Normal, MarginalSpec::Kernel];
    let seed = 17;
    let sel = select_marginals(&data, &cands, 5, seed, &MarginalOptions::default()).unwrap();

    let parts = fold_partition(60, 5, derive_seed(seed, &[0]));
    for j in 0..2 {
        let mut total = 0.0;
        for test in &parts {
            let train: Vec<f64> = complement(60, test).iter().map(|&i| rows[i][j]).collect();
            let k = fit_kernel(&train).unwrap();
            total -= test.iter().map(|&i| k.ln_pdf(rows[i][j])).sum::<f64>();
        }
        let got = sel[j].scores[1].lpds.unwrap();
        assert!((got - total / 60.0).abs() < 1e-12, "column {j}: {got} vs {}", total / 60.0);
        assert_eq!(sel[j].scores[0].candidate, "normal");
    }
    // the shifted third makes column 1 bimodal
    assert_eq!(sel[0].spec, MarginalSpec::Kernel);
}

#[test]
fn selection_is_deterministic() {
    let mut r = rng(4);
    let rows: Vec<Vec<f64>> = (0..80)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut r);
            vec![a, a * a]
        })
        .collect();
    let data = DataMatrix::from_rows(&rows).unwrap();
    let cands = MarginalSpec::standard_candidates();
    let opts = MarginalOptions::default();
    let a = select_marginals(&data, &cands, 4, 2, &opts).unwrap();
    let b = select_marginals(&data, &cands, 4, 2, &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn failed_candidate_has_no_score() {
    // 2-fold training halves of 12 rows are too small for a mixture fit
    let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![(i as f64 * 0.7).sin()]).collect();
    let data = DataMatrix::from_rows(&rows).unwrap();
    let cands = [MarginalSpec::UnivMixNormal, MarginalSpec::Kernel];
    let sel = select_marginals(&data, &cands, 2, 1, &MarginalOptions::default()).unwrap();
    assert_eq!(sel[0].scores[0].lpds, None);
    assert_eq!(sel[0].spec, MarginalSpec::Kernel);
    let json = serde_json::to_string(&sel[0].scores).unwrap();
    assert!(json.contains("\"lpds\":null"), "{json}");
}

#[test]
fn fixed_specs_pass_through() {
    let data = DataMatrix::from_rows(&[vec![1.0], vec![2.0], vec![4.0]]).unwrap();
    let m = MarginalModel::StudentT { loc: 0.0, scale: 1.0, nu: 5.0 };
    let fitted = fit_marginals(&data, &[MarginalSpec::Fixed(m.clone())], &MarginalOptions::default()).unwrap();
    assert_eq!(fitted, vec![m]);
    assert!(fit_marginals(&data, &[], &MarginalOptions::default()).is_err());
}

fn marginal_kinds() -> Vec<MarginalModel> {
    let mix = |dofs| UnivMixture::new(vec![0.4, 0.6], vec![-1.0, 2.0], vec![0.7, 1.2], dofs).unwrap();
    vec![
        MarginalModel::Kernel { points: vec![-1.0, 0.0, 0.5, 3.0], bandwidth: 0.6 },
        MarginalModel::UnivMixNormal { mixture: mix(None) },
        MarginalModel::UnivMixT { mixture: mix(Some(vec![3, 30])) },
        MarginalModel::Normal { mean: 1.0, sd: 2.0 },
        MarginalModel::StudentT { loc: -1.0, scale: 0.5, nu: 2.5 },
    ]
}

proptest! {
    #[test]
    fn quantile_inverts_cdf(u in 1e-6f64..(1.0 - 1e-6), which in 0usize..5) {
        let m = &marginal_kinds()[which];
        let x = m.quantile(u).unwrap();
        prop_assert!((m.cdf(x) - u).abs() < 1e-9, "{} at {}: {}", m.kind(), u, m.cdf(x));
    }

    #[test]
    fn cdf_is_monotone(a in -20.0f64..20.0, step in 1e-3f64..5.0, which in 0usize..5) {
        let m = &marginal_kinds()[which];
        prop_assert!(m.cdf(a + step) >= m.cdf(a));
    }
}
