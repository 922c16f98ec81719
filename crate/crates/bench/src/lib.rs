//! Shared inputs for the benchmarks.

use num_complex::Complex64 as C64;

use strichartz::datum::{GaussianDatum, GaussianMixture, RandomData};
use strichartz::grid::GridField;
use strichartz::spectral::SpaceTimeGrid;
use strichartz::verify::grid_for;

/// A random pair in `d` dimensions on an automatic grid, with its time grid.
pub fn random_pair(d: usize, seed: u64) -> (GridField, GridField, SpaceTimeGrid) {
    let u = GaussianMixture::random(d, RandomData::default(), seed).unwrap();
    let v = GaussianMixture::random(d, RandomData::default(), seed + 1).unwrap();
    let g = grid_for(&[&u, &v], 2, 1.05).unwrap();
    let (fu, fv) = (u.render(g).unwrap(), v.render(g).unwrap());
    let st = SpaceTimeGrid::fit(&[&fu, &fv], 2).unwrap();
    (fu, fv, st)
}

/// A tilted Gaussian in `d` dimensions.
pub fn gaussian(d: usize) -> GaussianDatum {
    let b = (0..d).map(|k| C64::new(0.3 - 0.2 * k as f64, 0.1)).collect();
    GaussianDatum::new(C64::new(-0.8, 0.4), b, C64::new(0.0, 0.0)).unwrap()
}
