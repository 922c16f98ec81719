//! Property checks over random inputs.

use num_complex::Complex64 as C64;
use proptest::prelude::*;

use strichartz::ascent::{extremiser_ascent, StepPolicy};
use strichartz::datum::{GaussianDatum, GaussianMixture, RandomData};
use strichartz::grid::{GridField, GridGeometry};
use strichartz::mb::{mb_residual, pq_maps, sample_collisions};
use strichartz::special::{gamma, log_gamma};
use strichartz::spectral::SpaceTimeGrid;
use strichartz::verify::grid_for;
use strichartz::weights::{closed_mass_conjugate, closed_mass_plain, compute_interaction, EstimateSpec};

fn random_field(d: usize, n: usize, seed: u64) -> GridField {
    let g = GridGeometry::new(d, n, 8.0).unwrap();
    let recipe = RandomData {
        bumps: 3,
        spread: 0.5,
        width: 0.7,
    };
    GaussianMixture::random(d, recipe, seed).unwrap().render_unchecked(g)
}

fn vector(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, d)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn transforms_round_trip(seed in 0u64..10_000, d in 1usize..=2) {
        let f = random_field(d, 32, seed).to_physical();
        let back = f.to_fourier().to_physical();
        let top = f.max_abs();
        for (a, b) in f.samples.iter().zip(&back.samples) {
            prop_assert!((a - b).norm() <= 1e-13 * top);
        }
    }

    #[test]
    fn plancherel(seed in 0u64..10_000, d in 1usize..=2) {
        let f = random_field(d, 32, seed);
        let (a, b) = (f.l2_mass(), f.to_physical().l2_mass());
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn interaction_symmetric_and_quadratic(seed in 0u64..10_000, p in -0.9..2.0f64, re in -2.0..2.0f64, im in -2.0..2.0f64) {
        let f = random_field(1, 64, seed);
        let g = random_field(1, 64, seed + 1);
        let i = compute_interaction(&f, &g, p).unwrap();
        prop_assert_eq!(i, compute_interaction(&g, &f, p).unwrap());
        let lam = C64::new(re, im);
        prop_assume!(lam.norm() > 1e-3);
        let scaled = compute_interaction(&f.scaled(lam), &g, p).unwrap();
        prop_assert!((scaled - lam.norm_sqr() * i).abs() <= 1e-12 * scaled.abs());
    }

    #[test]
    fn pq_maps_conserve(x in vector(3), y in vector(3)) {
        let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        prop_assume!(s.iter().map(|v| v * v).sum::<f64>() > 1e-6);
        let (p, q) = pq_maps(&x, &y).unwrap();
        let sq = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>();
        let energy = sq(&x) + sq(&y);
        for k in 0..3 {
            prop_assert!((p[k] + q[k] - s[k]).abs() <= 1e-14 * energy.sqrt().max(1.0));
        }
        prop_assert!((sq(&p) + sq(&q) - energy).abs() <= 1e-14 * energy.max(1.0));
    }

    #[test]
    fn mb_residual_ignores_scaling(seed in 0u64..1000, re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let lam = C64::new(re, im);
        prop_assume!(lam.norm() > 1e-2);
        let g = GaussianDatum::new(C64::new(-0.5, 0.2), vec![C64::new(0.1, 0.3); 2], C64::new(0.0, 0.0)).unwrap();
        let f = |x: &[f64]| g.eval(x) * (1.0 + 0.2 * (x[1] * x[0]).sin());
        let qs = sample_collisions(2, 200, 1.0, seed).unwrap();
        let a = mb_residual(&f, &qs).unwrap();
        let b = mb_residual(&|x: &[f64]| lam * f(x), &qs).unwrap();
        prop_assert!((a.rms - b.rms).abs() <= 1e-12 * a.rms);
    }

    #[test]
    fn masses_symmetric(z1 in vector(2), z2 in vector(2), e in 0.0..0.6f64) {
        let a = closed_mass_conjugate(&z1, &z2, e, 2).unwrap();
        prop_assert_eq!(a, closed_mass_conjugate(&z2, &z1, e, 2).unwrap());
        let b = closed_mass_plain(&z1, &z2, e, 2).unwrap();
        prop_assert_eq!(b, closed_mass_plain(&z2, &z1, e, 2).unwrap());
    }

    #[test]
    fn gamma_recurrence(x in 0.05..30.0f64) {
        let lhs = log_gamma(x + 1.0).unwrap();
        let rhs = log_gamma(x).unwrap() + x.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs().max(1.0));
        if x < 20.0 {
            prop_assert!((gamma(x + 1.0).unwrap() / (x * gamma(x).unwrap()) - 1.0).abs() <= 1e-13);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn ascent_never_decreases(seed in 0u64..1000, sigma in prop::sample::select(vec![0.25, 0.5])) {
        let recipe = RandomData { bumps: 3, spread: 0.4, width: 0.8 };
        let u = GaussianMixture::random(2, recipe, seed).unwrap();
        let g = grid_for(&[&u], 2, 1.1).unwrap();
        let f = u.render(g).unwrap();
        let st = SpaceTimeGrid::fit(&[&f], 2).unwrap().fixed();
        let spec = EstimateSpec::conjugate(2, sigma).unwrap();
        let policy = StepPolicy::Backtracking { initial_step: 0.5, min_step: 1e-6 };
        let out = extremiser_ascent(&spec, &f, 3, policy, &st).unwrap();
        prop_assert!(out.history.windows(2).all(|w| w[1] >= w[0]));
    }
}
