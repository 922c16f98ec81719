//! The Maxwell-Boltzmann functional equation
//! `F(z1) F(z2) = F(e1) F(e2)` on collisions, the two-point reduction of a
//! collision sphere, and the scalar critical-point criterion that separates
//! `d = 2` from `d >= 3`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::datum::GaussianDatum;
use crate::error::{domain, Error, Result};
use crate::quadrature::{composite_legendre, pairwise_sum};

/// Two velocities before and after an elastic collision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionQuadruple {
    pub zeta1: Vec<f64>,
    pub zeta2: Vec<f64>,
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
}

impl CollisionQuadruple {
    /// `(|z1|^2 + |z2|^2) - (|e1|^2 + |e2|^2)`.
    pub fn energy_defect(&self) -> f64 {
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        sq(&self.zeta1) + sq(&self.zeta2) - sq(&self.eta1) - sq(&self.eta2)
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Collisions `z = c +- r w`, `e = c +- r w'` with `c ~ N(0, scale^2)`,
/// `r = scale |N(0,1)|` and uniform directions.
pub fn sample_collisions(d: usize, n: usize, scale: f64, seed: u64) -> Result<Vec<CollisionQuadruple>> {
    if d == 0 {
        return Err(Error::UnsupportedDimension {
            d,
            reason: "collisions need d >= 1".into(),
        });
    }
    if n == 0 {
        return Err(Error::Precondition("need at least one collision".into()));
    }
    if !(scale > 0.0) {
        return Err(domain("scale", scale, "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let c: Vec<f64> = (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
            let r = scale * rng.sample::<f64, _>(StandardNormal).abs();
            let w = unit_vector(&mut rng, d);
            let w2 = unit_vector(&mut rng, d);
            let at = |sign: f64, dir: &[f64]| -> Vec<f64> { c.iter().zip(dir).map(|(c, w)| c + sign * r * w).collect() };
            CollisionQuadruple {
                zeta1: at(1.0, &w),
                zeta2: at(-1.0, &w),
                eta1: at(1.0, &w2),
                eta2: at(-1.0, &w2),
            }
        })
        .collect())
}

/// Lower bound for the rms residual of `e^{-|eta|^2} (1 + 0.1 cos eta_1)` in
/// `d = 2` over `sample_collisions(2, 10_000, 1.0, 2024)`. The pinned run
/// measured `1.547e-3`; the bound keeps a third of that as margin.
pub const PERTURBATION_RMS_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub max: f64,
    pub rms: f64,
}

/// `F(z1) F(z2) - F(e1) F(e2)` over the collisions, in units of the largest
/// `|F(z1) F(z2)|`.
pub fn mb_residual(f: &(dyn Fn(&[f64]) -> C64 + Sync), quads: &[CollisionQuadruple]) -> Result<Residual> {
    if quads.is_empty() {
        return Err(Error::Precondition("no collisions".into()));
    }
    let pairs: Vec<(f64, f64)> = quads
        .par_iter()
        .map(|q| {
            let before = f(&q.zeta1) * f(&q.zeta2);
            let after = f(&q.eta1) * f(&q.eta2);
            ((before - after).norm(), before.norm())
        })
        .collect();
    let scale = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::Degenerate("F vanishes on every collision".into()));
    }
    let max = pairs.iter().map(|p| p.0).fold(0.0, f64::max) / scale;
    let sq: Vec<f64> = pairs.iter().map(|p| (p.0 / scale).powi(2)).collect();
    Ok(Residual {
        max,
        rms: (pairwise_sum(&sq) / sq.len() as f64).sqrt(),
    })
}

/// The two points where the line through the origin and `(x + y) / 2`
/// meets the sphere with diameter `[x, y]`.
pub fn pq_maps(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Mismatch("x and y must be vectors of one dimension".into()));
    }
    let c: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
    let cn = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if cn == 0.0 {
        return Err(Error::Degenerate("x + y = 0 leaves the line through the origin undetermined".into()));
    }
    let r = 0.5 * x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let p = c.iter().map(|v| v / cn * (cn + r)).collect();
    let q = c.iter().map(|v| v / cn * (cn - r)).collect();
    Ok((p, q))
}

/// `(x1, x2, x3, x4, ...) -> (-x2, x1, -x4, x3, ...)`: a rotation by a right
/// angle in each coordinate plane, so `H(x) . x = 0` and `|H(x)| = |x|`.
pub fn h_map_even_d(x: &[f64]) -> Result<Vec<f64>> {
    let d = x.len();
    if d == 0 || d % 2 == 1 {
        return Err(Error::UnsupportedDimension {
            d,
            reason: "no continuous tangent field without zeros exists on odd-dimensional spheres".into(),
        });
    }
    Ok(x.chunks(2).flat_map(|p| [-p[1], p[0]]).collect())
}

/// `J(R)` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JValue {
    pub radius: f64,
    pub value: f64,
    pub stderr: f64,
}

/// Sampling effort for the `d >= 3` estimate of `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalSampling {
    /// Independent replicates; the standard error comes from their spread.
    pub batches: usize,
    /// Strata of the first coordinate per replicate (one antithetic pair each).
    pub strata: usize,
    pub seed: u64,
}

impl Default for CriticalSampling {
    fn default() -> Self {
        CriticalSampling {
            batches: 64,
            strata: 16_384,
            seed: 0,
        }
    }
}

/// Gaussian weight `e^{2 a_re |z|^2 + 2 b_re.z}` as `mass` times the normal
/// density `N(mean, s^2 I)`.
struct Weight {
    mean: Vec<f64>,
    s: f64,
    mass: f64,
}

impl Weight {
    fn new(d: usize, a_re: f64, b_re: &[f64]) -> Result<Weight> {
        if b_re.len() != d {
            return Err(Error::Mismatch(format!("b_re must have {d} components")));
        }
        if !(a_re < 0.0) {
            return Err(domain("a_re", a_re, "Gaussian must decay"));
        }
        let bb: f64 = b_re.iter().map(|b| b * b).sum();
        Ok(Weight {
            mean: b_re.iter().map(|b| -b / (2.0 * a_re)).collect(),
            s: (-4.0 * a_re).recip().sqrt(),
            mass: (PI / (-2.0 * a_re)).powf(d as f64 / 2.0) * (-bb / (2.0 * a_re)).exp(),
        })
    }
}

/// `(|x - R e1| / |x + R e1|)^{d-2}`.
fn distance_ratio(x: &[f64], r: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let d = x.len();
    let rest: f64 = x[1..].iter().map(|v| v * v).sum();
    let minus = (x[0] - r).powi(2) + rest;
    let plus = (x[0] + r).powi(2) + rest;
    (minus / plus).powf((d as f64 - 2.0) / 2.0)
}

/// Per-replicate means of the ratio under the normal weight, one row per
/// replicate and one column per radius. Every radius sees the same samples.
fn replicate_means(w: &Weight, radii: &[f64], sampling: CriticalSampling) -> Result<Vec<Vec<f64>>> {
    if sampling.batches < 2 || sampling.strata == 0 {
        return Err(Error::Precondition("need at least two batches and one stratum".into()));
    }
    let d = w.mean.len();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok((0..sampling.batches)
        .into_par_iter()
        .map(|batch| {
            let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
            rng.set_stream(batch as u64 + 1);
            let mut terms = vec![Vec::with_capacity(sampling.strata); radii.len()];
            let mut g = vec![0.0; d];
            let mut x = vec![0.0; d];
            let mut y = vec![0.0; d];
            for k in 0..sampling.strata {
                let u = (k as f64 + rng.gen::<f64>()) / sampling.strata as f64;
                g[0] = normal.inverse_cdf(u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON));
                for gj in g.iter_mut().skip(1) {
                    *gj = rng.sample(StandardNormal);
                }
                for j in 0..d {
                    x[j] = w.mean[j] + w.s * g[j];
                    y[j] = w.mean[j] - w.s * g[j];
                }
                for (acc, &r) in terms.iter_mut().zip(radii) {
                    acc.push(0.5 * (distance_ratio(&x, r) + distance_ratio(&y, r)));
                }
            }
            terms.iter().map(|v| pairwise_sum(v) / v.len() as f64).collect()
        })
        .collect())
}

fn mean_and_stderr(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = pairwise_sum(vals) / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_radii(d: usize, radii: &[f64]) -> Result<()> {
    if d < 2 {
        return Err(Error::UnsupportedDimension {
            d,
            reason: "the criterion is stated for d >= 2".into(),
        });
    }
    if let Some(&r) = radii.iter().find(|r| !(**r >= 0.0)) {
        return Err(domain("R", r, "radii must be nonnegative"));
    }
    Ok(())
}

/// `d = 2`: the factor is identically one, so `J` is the Gaussian integral,
/// taken with tensor Gauss-Legendre panels over nine standard deviations.
/// The error estimate is the change under panel doubling.
fn planar_value(w: &Weight) -> (f64, f64) {
    let estimate = |panels: usize| -> f64 {
        let h = 9.0 * w.s;
        let rule = composite_legendre(-h, h, panels, 16);
        let mut terms = Vec::with_capacity(rule.len() * rule.len());
        for (&x, &wx) in rule.nodes.iter().zip(&rule.weights) {
            for (&y, &wy) in rule.nodes.iter().zip(&rule.weights) {
                let p = [w.mean[0] + x, w.mean[1] + y];
                let density = (-(x * x + y * y) / (2.0 * w.s * w.s)).exp() / (2.0 * PI * w.s * w.s);
                terms.push(wx * wy * density * distance_ratio(&p, 0.0));
            }
        }
        w.mass * pairwise_sum(&terms)
    };
    let (lo, hi) = (estimate(4), estimate(8));
    (hi, (hi - lo).abs())
}

/// `J(R) = int (|z - R e1| / |z + R e1|)^{d-2} e^{2 a_re |z|^2 + 2 b_re.z} dz`.
///
/// `d = 2` is a quadrature; `d >= 3` uses Monte Carlo with the first
/// coordinate stratified through the inverse normal CDF, antithetic pairs
/// about the mean, and the same samples at every radius.
pub fn critical_point_test(d: usize, a_re: f64, b_re: &[f64], radii: &[f64], sampling: CriticalSampling) -> Result<Vec<JValue>> {
    check_radii(d, radii)?;
    let w = Weight::new(d, a_re, b_re)?;
    if d == 2 {
        let (value, stderr) = planar_value(&w);
        return Ok(radii.iter().map(|&radius| JValue { radius, value, stderr }).collect());
    }
    let means = replicate_means(&w, radii, sampling)?;
    Ok(radii
        .iter()
        .enumerate()
        .map(|(i, &radius)| {
            let col: Vec<f64> = means.iter().map(|row| row[i]).collect();
            let (m, se) = mean_and_stderr(&col);
            JValue {
                radius,
                value: w.mass * m,
                stderr: w.mass * se,
            }
        })
        .collect())
}

/// `J(r1) - J(r0)` on common samples, with its standard error.
pub fn critical_difference(d: usize, a_re: f64, b_re: &[f64], r0: f64, r1: f64, sampling: CriticalSampling) -> Result<JValue> {
    check_radii(d, &[r0, r1])?;
    let w = Weight::new(d, a_re, b_re)?;
    if d == 2 {
        let (_, err) = planar_value(&w);
        return Ok(JValue {
            radius: r1,
            value: 0.0,
            stderr: err,
        });
    }
    let means = replicate_means(&w, &[r0, r1], sampling)?;
    let diffs: Vec<f64> = means.iter().map(|row| row[1] - row[0]).collect();
    let (m, se) = mean_and_stderr(&diffs);
    Ok(JValue {
        radius: r1,
        value: w.mass * m,
        stderr: w.mass * se,
    })
}

/// `int |u0^|^2 eta_1 d eta` after rotating `Re b` onto the positive first
/// axis.
pub fn radial_moment_test(g: &GaussianDatum) -> Result<f64> {
    if !(g.a.re < 0.0) {
        return Err(domain("Re a", g.a.re, "Gaussian must decay"));
    }
    let d = g.d() as f64;
    let alpha = -2.0 * g.a.re;
    let br: f64 = g.b.iter().map(|b| b.re * b.re).sum::<f64>().sqrt();
    // |u0^|^2 = e^{2 Re c} e^{-alpha |eta|^2 + 2 Re b . eta}
    let mass = (PI / alpha).powf(d / 2.0) * (br * br / alpha + 2.0 * g.c.re).exp();
    Ok(mass * br / alpha)
}
