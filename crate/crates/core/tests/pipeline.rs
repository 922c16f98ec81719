//! End-to-end runs through the public API.

use num_complex::Complex64 as C64;

use strichartz::datum::{GaussianDatum, GaussianMixture, RandomData};
use strichartz::grid::{GridField, GridGeometry, Side};
use strichartz::spectral::SpaceTimeGrid;
use strichartz::verify::{
    complete_monotonicity_check, grid_for, heat_flow_curve, verify_estimate, verify_identity_1d_conjugate,
    verify_identity_1d_dispersive, Claim, SupportMode, Tolerances,
};
use strichartz::weights::EstimateSpec;
use strichartz::Error;

fn pair(d: usize, seed: u64) -> (GridField, GridField, SpaceTimeGrid) {
    let u = GaussianMixture::random(d, RandomData::default(), seed).unwrap();
    let v = GaussianMixture::random(d, RandomData::default(), seed + 1).unwrap();
    let g = grid_for(&[&u, &v], 2, 1.05).unwrap();
    let (fu, fv) = (u.render(g).unwrap(), v.render(g).unwrap());
    let st = SpaceTimeGrid::fit(&[&fu, &fv], 2).unwrap();
    (fu, fv, st)
}

#[test]
fn random_data_satisfy_the_planar_estimates() {
    let (u, v, st) = pair(2, 21);
    for spec in [
        EstimateSpec::conjugate(2, 0.0).unwrap(),
        EstimateSpec::conjugate(2, 0.5).unwrap(),
        EstimateSpec::plain(2, 0.5).unwrap(),
    ] {
        let r = verify_estimate(&spec, &u, &v, &st, Tolerances::default());
        assert!(r.error.is_none(), "{r:?}");
        assert_eq!(r.claim, Claim::Inequality);
        assert!(r.pass && r.ratio < 1.0, "{r:?}");
    }
}

#[test]
fn gaussian_attains_the_planar_estimate() {
    let u = GaussianDatum::new(C64::new(-1.0, 0.4), vec![C64::new(0.2, 0.1), C64::new(0.0, -0.3)], C64::new(0.0, 0.0))
        .unwrap()
        .to_mixture();
    let g = grid_for(&[&u], 2, 1.05).unwrap();
    let f = u.render(g).unwrap();
    let st = SpaceTimeGrid::fit(&[&f], 2).unwrap();
    let r = verify_estimate(&EstimateSpec::conjugate(2, 0.25).unwrap(), &f, &f, &st, Tolerances::default());
    assert!(r.pass && (r.ratio - 1.0).abs() < 1e-6, "{r:?}");
}

#[test]
fn one_dimensional_identities() {
    let (u, v, st) = pair(1, 5);
    for sigma in [0.1, 0.25, 0.5] {
        let r = verify_identity_1d_conjugate(&u, &v, sigma, &st, Tolerances::default());
        assert!(r.pass, "{sigma} {r:?}");
    }
    let r = verify_identity_1d_dispersive(&u, &v, 0.5, SupportMode::Symmetrized, &st, Tolerances::default());
    assert!(r.pass, "{r:?}");
    // overlapping supports are refused in the separated mode
    let r = verify_identity_1d_dispersive(&u, &v, 0.5, SupportMode::Separated, &st, Tolerances::default());
    assert!(!r.pass && r.error.is_some());
}

#[test]
fn separated_supports_identity() {
    let g = GridGeometry::new(1, 1024, 60.0).unwrap();
    // narrow Gaussians cut at the origin, where they are far below rounding
    let bump = |c: f64| {
        GridField::from_fn(g, Side::Fourier, move |x| {
            if x[0] * c > 0.0 {
                let t = (x[0] - c) / 0.3;
                C64::new(1.0, 0.3 * t) * (-0.5 * t * t).exp()
            } else {
                C64::new(0.0, 0.0)
            }
        })
    };
    let (u, v) = (bump(-3.0), bump(3.0));
    let st = SpaceTimeGrid::fit(&[&u, &v], 2).unwrap();
    for beta in [0.0, 0.5] {
        let r = verify_identity_1d_dispersive(&u, &v, beta, SupportMode::Separated, &st, Tolerances::default());
        assert!(r.pass, "{beta} {r:?}");
    }
}

#[test]
fn below_threshold_is_rejected() {
    assert!(matches!(EstimateSpec::conjugate(3, -0.5), Err(Error::BelowThreshold { .. })));
    assert!(matches!(EstimateSpec::plain(2, -0.5), Err(Error::BelowThreshold { .. })));
}

#[test]
fn heat_flow_on_one_planar_pair() {
    let spec = EstimateSpec::plain(2, 0.5).unwrap();
    let u = GaussianMixture::random(2, RandomData::default(), 7000).unwrap();
    let v = GaussianMixture::random(2, RandomData::default(), 57000).unwrap();
    let g = grid_for(&[&u, &v, &u.heat(0.5).unwrap(), &v.heat(0.5).unwrap()], 2, 1.05).unwrap();
    let rho: Vec<f64> = (1..=8).map(|j| 0.5 * j as f64 / 8.0).collect();
    let curve = heat_flow_curve(&spec, &u.render(g).unwrap(), &v.render(g).unwrap(), &rho, 1e-9).unwrap();
    assert!(curve.nonincreasing, "{curve:?}");
    assert!(curve.deficit[0] > 0.0);
    assert!(complete_monotonicity_check(&curve, 3).unwrap().iter().all(|o| o.pass));
}

#[test]
fn fields_survive_disk() {
    let dir = tempfile::tempdir().unwrap();
    let (u, _, _) = pair(2, 3);
    let path = dir.path().join("u.bin");
    u.save(&path).unwrap();
    assert_eq!(GridField::load(&path).unwrap(), u);
}
