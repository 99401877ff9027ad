//! Solver internals checked against dense, independently derived oracles.

mod common;

use common::{dense_cost, normal_equation_oracle, rel, with_w, Instance};
use proptest::prelude::*;
use sbltomo::model::{AcquisitionGeometry, ElevationGrid, SteeringMatrix};
use sbltomo::sbl::{
    evidence_cost, evidence_gradient, mackay_update_w, posterior_moments, sbl_solve, SblOptions,
};
use sbltomo::sim::{generate_snapshot, NoiseSpec, RngSeed, Scatterer, Scene};
use sbltomo::{DMatrix, DVector, C64};

fn complex() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| C64::new(re, im))
}

fn instance() -> impl Strategy<Value = Instance> {
    (2usize..=8)
        .prop_flat_map(|n| (Just(n), (n + 1)..=12usize))
        .prop_flat_map(|(n, l)| {
            (
                proptest::collection::vec(complex(), n * l),
                proptest::collection::vec(complex(), n),
                proptest::collection::vec(0.05..2.0f64, l),
                0.05..1.0f64,
            )
                .prop_map(move |(d, g, w, sigma2)| Instance {
                    dict: DMatrix::from_vec(n, l, d),
                    g: DVector::from_vec(g),
                    w,
                    sigma2,
                })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn posterior_matches_normal_equations(inst in instance()) {
        let (mu, var) = posterior_moments(&inst.g, &inst.dict, &inst.w, inst.sigma2).unwrap();
        let (mu_o, var_o) = normal_equation_oracle(&inst);
        prop_assert!((&mu - &mu_o).norm() <= 1e-8 * mu_o.norm());
        for i in 0..var.len() {
            prop_assert!(rel(var[i], var_o[i]) <= 1e-8, "post_var[{}]: {} vs {}", i, var[i], var_o[i]);
            prop_assert!(var[i] >= 0.0 && var[i] <= inst.w[i]);
        }
    }

    #[test]
    fn cost_matches_dense_evaluation(inst in instance()) {
        let cost = evidence_cost(&inst.g, &inst.dict, &inst.w, inst.sigma2).unwrap();
        let oracle = dense_cost(&inst);
        prop_assert!(rel(cost, oracle) <= 1e-10, "{} vs {}", cost, oracle);
    }

    #[test]
    fn gradient_matches_central_differences(inst in instance()) {
        let grad = evidence_gradient(&inst.g, &inst.dict, &inst.w, inst.sigma2).unwrap();
        let cost = |x: &Instance| dense_cost(x);
        for i in 0..inst.w.len() {
            let h = 1e-5 * inst.w[i];
            let fd = (cost(&with_w(&inst, i, inst.w[i] + h)) - cost(&with_w(&inst, i, inst.w[i] - h)))
                / (2.0 * h);
            prop_assert!(
                (fd - grad.w[i]).abs() <= 1e-4 * grad.w[i].abs().max(1e-6),
                "dL/dw[{}]: analytic {} vs numeric {}", i, grad.w[i], fd
            );
        }
        let h = 1e-5 * inst.sigma2;
        let mut up = inst.clone();
        up.sigma2 += h;
        let mut down = inst.clone();
        down.sigma2 -= h;
        let fd = (cost(&up) - cost(&down)) / (2.0 * h);
        prop_assert!(
            (fd - grad.sigma2).abs() <= 1e-4 * grad.sigma2.abs().max(1e-6),
            "dL/dsigma2: analytic {} vs numeric {}", grad.sigma2, fd
        );
    }

    #[test]
    fn pruned_columns_are_excluded(inst in instance(), k in 0usize..12) {
        let k = k % inst.w.len();
        let pruned = with_w(&inst, k, 0.0);
        let (mu, var) = posterior_moments(&pruned.g, &pruned.dict, &pruned.w, pruned.sigma2).unwrap();
        prop_assert_eq!(mu[k], C64::new(0.0, 0.0));
        prop_assert_eq!(var[k], 0.0);

        // Same as the oracle on the dictionary without column k.
        let keep: Vec<usize> = (0..inst.w.len()).filter(|&i| i != k).collect();
        let reduced = Instance {
            dict: inst.dict.select_columns(&keep),
            g: inst.g.clone(),
            w: keep.iter().map(|&i| inst.w[i]).collect(),
            sigma2: inst.sigma2,
        };
        let (mu_o, _) = normal_equation_oracle(&reduced);
        for (j, &i) in keep.iter().enumerate() {
            prop_assert!((mu[i] - mu_o[j]).norm() <= 1e-8 * mu_o.norm());
        }
    }
}

fn tsx13() -> SteeringMatrix {
    let geo = AcquisitionGeometry::evenly_spaced(0.031, 774_200.0, -200.0, 200.0, 13).unwrap();
    SteeringMatrix::build(&geo, &ElevationGrid::new(0.0, 300.0, 1.0).unwrap()).unwrap()
}

fn two_scatterers(r: &SteeringMatrix) -> DVector<C64> {
    let scene = Scene::new(
        vec![
            Scatterer::new(90.0, 1.5, 0.4),
            Scatterer::new(160.0, 0.8, 2.0),
        ],
        true,
    );
    generate_snapshot(&scene, r, &NoiseSpec::noiseless(), RngSeed::new(0, 0)).unwrap()
}

#[test]
fn true_support_is_a_fixed_point() {
    let r = tsx13();
    let g = two_scatterers(&r);
    let mut w = vec![0.0; r.ncols()];
    w[90] = 1.5 * 1.5;
    w[160] = 0.8 * 0.8;
    let (mu, var) = posterior_moments(&g, r.matrix(), &w, 1e-12).unwrap();
    let next = mackay_update_w(&mu, &var, &w);
    for i in [90, 160] {
        assert!(
            rel(next[i], w[i]) < 1e-6,
            "w[{i}] moved from {} to {}",
            w[i],
            next[i]
        );
    }
    assert!(next
        .iter()
        .enumerate()
        .all(|(i, &x)| i == 90 || i == 160 || x == 0.0));
}

#[test]
fn scale_equivariance() {
    // Perturbed so that σ² stays above the (absolute) noise floor.
    let r = tsx13();
    let mut g = two_scatterers(&r);
    g[3] += C64::new(0.05, -0.02);
    let options = SblOptions::default();
    let base = sbl_solve(&g, &r, &options).unwrap();
    let c = 3.7;
    let scaled = sbl_solve(&(&g * C64::new(c, 0.0)), &r, &options).unwrap();
    assert_eq!(base.state.iteration, scaled.state.iteration);
    assert_eq!(base.state.active, scaled.state.active);
    let wmax = base.state.w.iter().cloned().fold(0.0, f64::max);
    for (a, b) in base.state.w.iter().zip(&scaled.state.w) {
        assert!((b - c * c * a).abs() <= 1e-8 * c * c * wmax);
    }
    assert!(
        (&scaled.state.mu - &base.state.mu * C64::new(c, 0.0)).norm()
            <= 1e-8 * c * base.state.mu.norm()
    );
    assert!(rel(scaled.state.sigma2, c * c * base.state.sigma2) < 1e-8);
}

#[test]
fn solve_is_deterministic() {
    let r = tsx13();
    let mut g = two_scatterers(&r);
    g[3] += C64::new(0.05, -0.02);
    let options = SblOptions::default();
    let a = sbl_solve(&g, &r, &options).unwrap();
    let b = sbl_solve(&g, &r, &options).unwrap();
    assert_eq!(a.state.w, b.state.w);
    assert_eq!(a.state.mu, b.state.mu);
    assert_eq!(a.state.sigma2.to_bits(), b.state.sigma2.to_bits());
    assert_eq!(a.scatterers, b.scatterers);
}

#[test]
fn single_scatterer_matches_matched_filter_peak() {
    let r = tsx13();
    let scene = Scene::new(vec![Scatterer::new(137.0, 1.3, 0.9)], true);
    let g = generate_snapshot(&scene, &r, &NoiseSpec::noiseless(), RngSeed::new(0, 0)).unwrap();
    // Brute-force matched filter over the grid.
    let peak = (0..r.ncols())
        .max_by(|&a, &b| {
            r.column(a)
                .dotc(&g)
                .norm()
                .total_cmp(&r.column(b).dotc(&g).norm())
        })
        .unwrap();
    assert_eq!(peak, 137);
    let options = SblOptions {
        fixed_noise: Some(1e-6),
        ..SblOptions::default()
    };
    let result = sbl_solve(&g, &r, &options).unwrap();
    assert_eq!(result.scatterers.len(), 1);
    let d = result.scatterers[0];
    assert_eq!(d.grid_index, 137);
    let truth = C64::from_polar(1.3, 0.9);
    assert!((d.amplitude - truth).norm() < 1e-6 * truth.norm());
}
