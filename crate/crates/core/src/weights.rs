//! Interaction functionals `int int |f(z)|^2 |g(w)|^2 |z - w|^p` and the
//! collision-measure masses behind the sharp constants.

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{centered_dft, GridField, GridGeometry, Side};
use crate::quadrature::{composite_power_weighted, pairwise_sum};
use crate::special::{
    conjugate_threshold, log_gamma, ot_general_constant, plain_constant, plain_identity_constant_1d,
    plain_threshold, sphere_area,
};
use crate::spectral::SingularSum;

/// Which bilinear estimate: `|(-Delta)^sigma (u vbar)|` or `| |D|^beta (uv) |`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    Conjugate { sigma: f64 },
    Plain { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateSpec {
    #[serde(flatten)]
    pub family: Family,
    pub d: usize,
}

impl EstimateSpec {
    pub fn conjugate(d: usize, sigma: f64) -> Result<Self> {
        let s = EstimateSpec {
            family: Family::Conjugate { sigma },
            d,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn plain(d: usize, beta: f64) -> Result<Self> {
        let s = EstimateSpec {
            family: Family::Plain { beta },
            d,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::UnsupportedDimension {
                d: 0,
                reason: "dimension must be positive".into(),
            });
        }
        let (name, threshold) = match self.family {
            Family::Conjugate { .. } => ("conjugate", conjugate_threshold(self.d)),
            Family::Plain { .. } => ("plain", plain_threshold(self.d)),
        };
        let x = self.exponent();
        if !(x > threshold) || !x.is_finite() {
            return Err(Error::BelowThreshold {
                family: name.into(),
                d: self.d,
                exponent: x,
                threshold,
            });
        }
        Ok(())
    }

    /// `sigma` or `beta`.
    pub fn exponent(&self) -> f64 {
        match self.family {
            Family::Conjugate { sigma } => sigma,
            Family::Plain { beta } => beta,
        }
    }

    /// Power of `|z - w|` in the interaction functional.
    pub fn kernel_power(&self) -> f64 {
        4.0 * self.exponent() + self.d as f64 - 2.0
    }

    /// Sharp constant in front of the interaction functional. In one
    /// dimension the plain family only has the separated-support identity,
    /// whose constant is returned.
    pub fn constant(&self) -> Result<f64> {
        match self.family {
            Family::Conjugate { sigma } => ot_general_constant(self.d, sigma),
            Family::Plain { beta } if self.d == 1 => Ok(plain_identity_constant_1d(beta)),
            Family::Plain { beta } => plain_constant(self.d, beta),
        }
    }
}

fn total_order(a: &[C64], b: &[C64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// `int int a(z) conj(b(w)) |z - w|^p dz dw` for samples on one frequency
/// grid. The inner correlation is done by FFT on a doubled grid; the
/// singular point `z = w` gets the lattice-zeta correction.
pub fn kernel_pairing(geometry: GridGeometry, a: &[C64], b: &[C64], p: f64) -> Result<C64> {
    if !(p > -1.0) {
        return Err(Error::UnsupportedSingularity { p });
    }
    pairing_impl(geometry, a, b, p, true)
}

/// As [`kernel_pairing`] but with no treatment of `z = w`, for densities
/// whose correlation vanishes near the origin (separated supports).
pub fn kernel_pairing_separated(geometry: GridGeometry, a: &[C64], b: &[C64], p: f64) -> Result<C64> {
    pairing_impl(geometry, a, b, p, false)
}

fn pairing_impl(geometry: GridGeometry, a: &[C64], b: &[C64], p: f64, correct: bool) -> Result<C64> {
    let (d, n) = (geometry.d, geometry.n);
    if a.len() != geometry.len() || b.len() != geometry.len() {
        return Err(Error::Mismatch("sample count does not match the grid".into()));
    }
    let big = GridGeometry::new(d, 2 * n, geometry.half_width)?;
    let embed = |src: &[C64]| -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); big.len()];
        for (idx, v) in src.iter().enumerate() {
            let o = geometry.offsets(idx);
            let j = big.index_of(&o[..d]).expect("doubled grid contains the original");
            out[j] = *v;
        }
        out
    };
    let mut fa = embed(a);
    let mut fb = embed(b);
    centered_dft(&mut fa, d, 2 * n, false);
    centered_dft(&mut fb, d, 2 * n, false);
    let mut corr: Vec<C64> = fa.iter().zip(&fb).map(|(x, y)| x * y.conj()).collect();
    centered_dft(&mut corr, d, 2 * n, true);
    // discrete correlation times the cell volume: int a(z) conj(b(z - w)) dz
    let scale = geometry.cell(Side::Fourier) / big.len() as f64;
    corr.iter_mut().for_each(|v| *v *= scale);
    let re: Vec<f64> = corr.iter().map(|v| v.re).collect();
    let im: Vec<f64> = corr.iter().map(|v| v.im).collect();
    if correct {
        let sum = SingularSum::new(big, Side::Fourier, p)?;
        return Ok(C64::new(sum.apply(&re), sum.apply(&im)));
    }
    let weight: Vec<f64> = big
        .squared_radii(Side::Fourier)
        .iter()
        .map(|r2| crate::quadrature::power_weight(r2.sqrt(), p))
        .collect();
    let cell = big.cell(Side::Fourier);
    let dot = |x: &[f64]| -> f64 {
        let t: Vec<f64> = x.iter().zip(&weight).map(|(a, b)| a * b).collect();
        cell * pairwise_sum(&t)
    };
    Ok(C64::new(dot(&re), dot(&im)))
}

/// `I = int int |f(z)|^2 |g(w)|^2 |z - w|^p` for Fourier-side fields.
///
/// Symmetric in `f, g` to the last bit: the pair is put in a canonical order
/// before summation.
pub fn compute_interaction(fhat: &GridField, ghat: &GridField, p: f64) -> Result<f64> {
    if fhat.geometry != ghat.geometry {
        return Err(Error::Mismatch("interaction needs both fields on one grid".into()));
    }
    let f = fhat.to_fourier();
    let g = ghat.to_fourier();
    let (f, g) = if total_order(&f.samples, &g.samples) == Ordering::Greater {
        (g, f)
    } else {
        (f, g)
    };
    let dens = |x: &GridField| -> Vec<C64> { x.samples.iter().map(|v| C64::new(v.norm_sqr(), 0.0)).collect() };
    let value = kernel_pairing(f.geometry, &dens(&f), &dens(&g), p)?.re;
    Ok(value.max(0.0))
}

fn check_vectors(z1: &[f64], z2: &[f64], d: usize) -> Result<()> {
    if d == 0 || z1.len() != d || z2.len() != d {
        return Err(Error::Mismatch(format!("expected two vectors of length {d}")));
    }
    Ok(())
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Mass of the conjugate collision measure:
/// `pi^{(d-1)/2} Gamma(2 sigma + (d-1)/2) / (2 Gamma(2 sigma + d - 1)) |z1 + z2|^{4 sigma + d - 2}`.
pub fn closed_mass_conjugate(z1: &[f64], z2: &[f64], sigma: f64, d: usize) -> Result<f64> {
    check_vectors(z1, z2, d)?;
    EstimateSpec::conjugate(d, sigma)?;
    let df = d as f64;
    let q = 4.0 * sigma + df - 2.0;
    let s = norm(z1.iter().zip(z2).map(|(a, b)| a + b));
    if s == 0.0 && q <= 0.0 {
        return Err(Error::Degenerate("z1 + z2 = 0 with a nonpositive power".into()));
    }
    let lg = log_gamma(2.0 * sigma + (df - 1.0) / 2.0)? - log_gamma(2.0 * sigma + df - 1.0)?;
    Ok(PI.powf((df - 1.0) / 2.0) * lg.exp() / 2.0 * if s == 0.0 { 0.0 } else { s.powf(q) })
}

/// Angular quadrature for `(1/2) int_{S^{d-1}} (omega . s)_+^q d omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereRule {
    /// Nodes across the lit hemisphere in the polar variable.
    pub polar: usize,
    /// Trapezoid nodes in the azimuth (d = 3 only).
    pub azimuth: usize,
}

impl Default for SphereRule {
    fn default() -> Self {
        SphereRule {
            polar: 24,
            azimuth: 16,
        }
    }
}

/// Orthonormal frame whose first vector is `s / |s|`.
fn frame(s: &[f64]) -> Vec<Vec<f64>> {
    let d = s.len();
    let r = norm(s.iter().copied());
    let mut basis = vec![s.iter().map(|x| x / r).collect::<Vec<_>>()];
    for k in 0..d {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        for b in &basis {
            let dot: f64 = e.iter().zip(b).map(|(x, y)| x * y).sum();
            e.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let m = norm(e.iter().copied());
        if m > 1e-8 {
            basis.push(e.iter().map(|x| x / m).collect());
        }
        if basis.len() == d {
            break;
        }
    }
    basis
}

/// The conjugate mass by quadrature over the sphere. The rule is placed on
/// the lit hemisphere around `s = z1 + z2`, with Gauss-Jacobi nodes absorbing
/// the `(omega . s)^q` edge behaviour; the integrand itself is evaluated as
/// `(omega . s)_+^q` at the actual nodes.
pub fn quadrature_mass_conjugate(z1: &[f64], z2: &[f64], sigma: f64, d: usize, rule: SphereRule) -> Result<f64> {
    check_vectors(z1, z2, d)?;
    EstimateSpec::conjugate(d, sigma)?;
    let q = 4.0 * sigma + d as f64 - 2.0;
    let s: Vec<f64> = z1.iter().zip(z2).map(|(a, b)| a + b).collect();
    if norm(s.iter().copied()) == 0.0 {
        return Err(Error::Degenerate("z1 + z2 = 0".into()));
    }
    let lit = |omega: &[f64]| -> f64 {
        let t: f64 = omega.iter().zip(&s).map(|(a, b)| a * b).sum();
        if t > 0.0 {
            t.powf(q)
        } else {
            0.0
        }
    };
    let e = frame(&s);
    let integral = match d {
        1 => lit(&[1.0]) + lit(&[-1.0]),
        2 => {
            // omega = cos(phi) e0 + sin(phi) e1; with x = sin(phi), d phi = dx / sqrt(1-x^2)
            // and (omega . s)^q ~ (1-x^2)^{q/2}: Gauss-Jacobi with alpha = beta = (q-1)/2.
            let a = (q - 1.0) / 2.0;
            let gj = crate::quadrature::gauss_jacobi(rule.polar, a, a)?;
            let mut acc = Vec::with_capacity(gj.len());
            for (&x, &w) in gj.nodes.iter().zip(&gj.weights) {
                let c = (1.0 - x * x).sqrt();
                let omega = [c * e[0][0] + x * e[1][0], c * e[0][1] + x * e[1][1]];
                acc.push(w * lit(&omega) / (1.0 - x * x).powf(q / 2.0));
            }
            pairwise_sum(&acc)
        }
        3 => {
            // t = omega . e0 in (0,1), d omega = dt d psi, weight t^q
            let polar = composite_power_weighted(1.0, q, 1, rule.polar)?;
            let m = rule.azimuth.max(4);
            let mut acc = Vec::with_capacity(polar.len() * m);
            for (&t, &w) in polar.nodes.iter().zip(&polar.weights) {
                let r = (1.0 - t * t).max(0.0).sqrt();
                for k in 0..m {
                    let psi = 2.0 * PI * k as f64 / m as f64;
                    let omega: Vec<f64> = (0..3)
                        .map(|i| t * e[0][i] + r * (psi.cos() * e[1][i] + psi.sin() * e[2][i]))
                        .collect();
                    acc.push(w * (2.0 * PI / m as f64) * lit(&omega) / t.powf(q));
                }
            }
            pairwise_sum(&acc)
        }
        _ => {
            return Err(Error::UnsupportedDimension {
                d,
                reason: "sphere quadrature is provided for d <= 3".into(),
            })
        }
    };
    Ok(0.5 * integral)
}

/// Mass of the plain collision measure:
/// `pi^{d/2} / (2^{d-1} Gamma(d/2)) |z1 - z2|^{4 beta + d - 2}`.
pub fn closed_mass_plain(z1: &[f64], z2: &[f64], beta: f64, d: usize) -> Result<f64> {
    check_vectors(z1, z2, d)?;
    EstimateSpec::plain(d, beta)?;
    let r = norm(z1.iter().zip(z2).map(|(a, b)| a - b));
    if r == 0.0 {
        return Err(Error::Degenerate("z1 = z2".into()));
    }
    let df = d as f64;
    Ok(sphere_area(d) / 2f64.powf(df) * r.powf(4.0 * beta + df - 2.0))
}

/// Monte Carlo estimate of the plain collision mass.
///
/// The momentum delta is resolved exactly by `eta2 = z1 + z2 - eta1`; the
/// energy delta is replaced by a narrow Gaussian mollifier (relative width
/// `1e-3` of the collision energy) and `eta1` is drawn by importance
/// sampling around the collision sphere.
pub fn monte_carlo_mass_plain(z1: &[f64], z2: &[f64], beta: f64, d: usize, n_samples: usize, seed: u64) -> Result<f64> {
    check_vectors(z1, z2, d)?;
    EstimateSpec::plain(d, beta)?;
    let diff = norm(z1.iter().zip(z2).map(|(a, b)| a - b));
    if diff == 0.0 {
        return Err(Error::Degenerate("z1 = z2".into()));
    }
    if n_samples == 0 {
        return Err(Error::Precondition("need at least one sample".into()));
    }
    let energy: f64 = z1.iter().chain(z2).map(|x| x * x).sum();
    let centre: Vec<f64> = z1.iter().zip(z2).map(|(a, b)| (a + b) / 2.0).collect();
    let r0 = diff / 2.0;
    let eps = 1e-3 * 2.0 * r0 * r0;
    // radial proposal: normal around r0, a bit wider than the mollifier seen in the radius
    let width = 1.5 * eps / (4.0 * r0);
    let area = sphere_area(d);
    let weight_const = diff.powf(4.0 * beta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::with_capacity(n_samples);
    let mut omega = vec![0.0; d];
    let mut eta1 = vec![0.0; d];
    for _ in 0..n_samples {
        let z: f64 = rng.sample(StandardNormal);
        let rho = r0 + width * z;
        if rho <= 0.0 {
            terms.push(0.0);
            continue;
        }
        for o in omega.iter_mut() {
            *o = rng.sample(StandardNormal);
        }
        let on = norm(omega.iter().copied());
        for i in 0..d {
            eta1[i] = centre[i] + rho * omega[i] / on;
        }
        let e2: f64 = eta1
            .iter()
            .zip(&centre)
            .map(|(e, c)| {
                let eta2 = 2.0 * c - e;
                e * e + eta2 * eta2
            })
            .sum();
        let gap = energy - e2;
        let mollifier = (-0.5 * (gap / eps).powi(2)).exp() / (eps * (2.0 * PI).sqrt());
        let density = (-0.5 * z * z).exp() / (width * (2.0 * PI).sqrt());
        terms.push(area * rho.powi(d as i32 - 1) * mollifier / density);
    }
    Ok(weight_const * pairwise_sum(&terms) / n_samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datum::GaussianDatum;
    use approx::assert_relative_eq;

    #[test]
    fn admissibility() {
        assert!(EstimateSpec::conjugate(2, -0.25).is_err());
        assert!(EstimateSpec::conjugate(2, -0.24).is_ok());
        assert!(EstimateSpec::plain(3, -1.0).is_err());
        assert_eq!(EstimateSpec::conjugate(3, 0.25).unwrap().kernel_power(), 2.0);
        let json = serde_json::to_string(&EstimateSpec::plain(2, 0.5).unwrap()).unwrap();
        assert_eq!(json, r#"{"family":"plain","beta":0.5,"d":2}"#);
    }

    #[test]
    fn interaction_p0_factorises() {
        let g = GridGeometry::new(2, 128, 12.0).unwrap();
        let f = GaussianDatum::centred(2, -1.0).unwrap().render(g).unwrap();
        let i = compute_interaction(&f, &f, 0.0).unwrap();
        let m = f.l2_mass();
        assert_relative_eq!(i, (2.0 * PI).powi(4) * m * m, max_relative = 1e-12);
    }

    #[test]
    fn masses_agree_in_examples() {
        let m = closed_mass_conjugate(&[1.0, 0.0], &[0.0, 0.0], 0.5, 2).unwrap();
        assert_relative_eq!(m, PI / 4.0, max_relative = 1e-14);
        let p = closed_mass_plain(&[1.0, 0.0], &[-1.0, 0.0], 0.0, 2).unwrap();
        assert_relative_eq!(p, PI / 2.0, max_relative = 1e-14);
        let q = quadrature_mass_conjugate(&[0.3, 0.1], &[0.4, -0.9], 0.0, 2, SphereRule::default()).unwrap();
        assert_relative_eq!(q, sphere_area(2) / 4.0, max_relative = 1e-12);
        let mc = monte_carlo_mass_plain(&[0.3, 0.1, 0.0], &[0.4, -0.9, 1.0], 0.25, 3, 200_000, 3).unwrap();
        let cl = closed_mass_plain(&[0.3, 0.1, 0.0], &[0.4, -0.9, 1.0], 0.25, 3).unwrap();
        assert_relative_eq!(mc, cl, max_relative = 5e-3);
    }
}
