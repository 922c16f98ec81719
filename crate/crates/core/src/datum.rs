//! Analytic initial data: single Gaussians `exp(a|eta|^2 + b.eta + c)` on the
//! Fourier side and finite sums of such terms.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::{GridField, GridGeometry, Side};

/// Relative envelope below which a datum counts as resolved.
pub const RESOLVE_EPS: f64 = 1e-12;

/// Fourier-side Gaussian `exp(a|eta|^2 + b.eta + c)` with `Re a < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianDatum {
    pub a: C64,
    pub b: Vec<C64>,
    pub c: C64,
}

impl GaussianDatum {
    pub fn new(a: C64, b: Vec<C64>, c: C64) -> Result<Self> {
        if !(a.re < 0.0) {
            return Err(domain("Re a", a.re, "Gaussian data need Re a < 0"));
        }
        if b.is_empty() || b.len() > 64 {
            return Err(domain("d", b.len() as f64, "drift vector must have length 1..=64"));
        }
        Ok(GaussianDatum { a, b, c })
    }

    /// Centred real Gaussian `exp(a|eta|^2)`.
    pub fn centred(d: usize, a: f64) -> Result<Self> {
        GaussianDatum::new(C64::new(a, 0.0), vec![C64::new(0.0, 0.0); d], C64::new(0.0, 0.0))
    }

    pub fn d(&self) -> usize {
        self.b.len()
    }

    /// True iff `Re b = 0`, so that `|u0^|` is radial.
    pub fn radial_modulus(&self) -> bool {
        self.b.iter().all(|b| b.re == 0.0)
    }

    pub fn b_re(&self) -> Vec<f64> {
        self.b.iter().map(|b| b.re).collect()
    }

    pub fn eval(&self, eta: &[f64]) -> C64 {
        let r2: f64 = eta.iter().map(|x| x * x).sum();
        let lin: C64 = self.b.iter().zip(eta).map(|(b, x)| b * x).sum();
        (self.a * r2 + lin + self.c).exp()
    }

    pub fn to_mixture(&self) -> GaussianMixture {
        GaussianMixture {
            d: self.d(),
            terms: vec![GaussianTerm {
                coef: self.c.exp(),
                a: self.a,
                b: self.b.clone(),
            }],
        }
    }

    pub fn render(&self, geometry: GridGeometry) -> Result<GridField> {
        self.to_mixture().render(geometry)
    }
}

/// `coef * exp(a|eta|^2 + b.eta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianTerm {
    pub coef: C64,
    pub a: C64,
    pub b: Vec<C64>,
}

impl GaussianTerm {
    fn fourier(&self, eta: &[f64]) -> C64 {
        let r2: f64 = eta.iter().map(|x| x * x).sum();
        let lin: C64 = self.b.iter().zip(eta).map(|(b, x)| b * x).sum();
        self.coef * (self.a * r2 + lin).exp()
    }

    /// Inverse transform `(2 pi)^{-d} int coef e^{a|eta|^2 + b.eta + i x.eta} d eta`.
    fn physical(&self, x: &[f64]) -> C64 {
        let d = self.b.len() as i32;
        let big_a = -self.a;
        let quad: C64 = self
            .b
            .iter()
            .zip(x)
            .map(|(b, &x)| {
                let z = b + C64::new(0.0, x);
                z * z
            })
            .sum();
        let pref = (C64::new(PI, 0.0) / big_a).sqrt().powi(d) / (2.0 * PI).powi(d);
        self.coef * pref * (quad / (4.0 * big_a)).exp()
    }

    /// Fourier-side centre and peak modulus.
    fn fourier_peak(&self) -> (Vec<f64>, f64) {
        let kappa = -self.a.re;
        let centre: Vec<f64> = self.b.iter().map(|b| b.re / (2.0 * kappa)).collect();
        let b2: f64 = self.b.iter().map(|b| b.re * b.re).sum();
        (centre, self.coef.norm() * (b2 / (4.0 * kappa)).exp())
    }

    /// Physical-side centre, Gaussian rate `B_r` in `exp(-B_r |x - centre|^2)`
    /// and peak modulus.
    fn physical_peak(&self) -> (Vec<f64>, f64, f64) {
        let d = self.b.len() as i32;
        let big_a = -self.a;
        let inv = 1.0 / (4.0 * big_a);
        let rate = inv.re;
        let shift: Vec<f64> = self.b.iter().map(|b| (inv * b).im).collect();
        let centre: Vec<f64> = shift.iter().map(|s| -s / rate).collect();
        let bb: C64 = self.b.iter().map(|b| b * b).sum();
        let s2: f64 = shift.iter().map(|s| s * s).sum();
        let pref = (PI / big_a.norm()).powf(0.5 * d as f64) / (2.0 * PI).powi(d);
        let peak = self.coef.norm() * pref * ((inv * bb).re + s2 / rate).exp();
        (centre, rate, peak)
    }
}

/// Finite sum of Fourier-side Gaussian terms, all with `Re a < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub d: usize,
    pub terms: Vec<GaussianTerm>,
}

/// Recipe for seeded random data: `bumps` Gaussian bumps of width `width`
/// with centres drawn from `N(0, spread^2 I)` and complex normal amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomData {
    pub bumps: usize,
    pub spread: f64,
    pub width: f64,
}

impl Default for RandomData {
    fn default() -> Self {
        RandomData {
            bumps: 5,
            spread: 0.7,
            width: 0.6,
        }
    }
}

impl GaussianMixture {
    pub fn new(d: usize, terms: Vec<GaussianTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Precondition("mixture needs at least one term".into()));
        }
        for t in &terms {
            if !(t.a.re < 0.0) {
                return Err(domain("Re a", t.a.re, "every term needs Re a < 0"));
            }
            if t.b.len() != d {
                return Err(Error::Mismatch("term drift has the wrong dimension".into()));
            }
        }
        Ok(GaussianMixture { d, terms })
    }

    pub fn random(d: usize, recipe: RandomData, seed: u64) -> Result<Self> {
        if recipe.bumps == 0 || !(recipe.width > 0.0) || !(recipe.spread >= 0.0) {
            return Err(Error::Precondition("random data need bumps >= 1 and width > 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = C64::new(-0.5 / (recipe.width * recipe.width), 0.0);
        let mut terms = Vec::with_capacity(recipe.bumps);
        for _ in 0..recipe.bumps {
            let centre: Vec<f64> = (0..d)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    recipe.spread * z
                })
                .collect();
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let amp = C64::new(re, im) / 2f64.sqrt();
            let c2: f64 = centre.iter().map(|c| c * c).sum();
            // amp * exp(-|eta - centre|^2 / (2 w^2))
            let coef = amp * (a * c2).exp();
            let b = centre.iter().map(|c| C64::new(-2.0 * a.re * c, 0.0)).collect();
            terms.push(GaussianTerm { coef, a, b });
        }
        GaussianMixture::new(d, terms)
    }

    pub fn fourier(&self, eta: &[f64]) -> C64 {
        self.terms.iter().map(|t| t.fourier(eta)).sum()
    }

    pub fn physical(&self, x: &[f64]) -> C64 {
        self.terms.iter().map(|t| t.physical(x)).sum()
    }

    fn map_a(&self, f: impl Fn(C64) -> C64) -> GaussianMixture {
        GaussianMixture {
            d: self.d,
            terms: self
                .terms
                .iter()
                .map(|t| GaussianTerm {
                    coef: t.coef,
                    a: f(t.a),
                    b: t.b.clone(),
                })
                .collect(),
        }
    }

    /// Data of `e^{it Delta}`.
    pub fn evolve(&self, t: f64) -> GaussianMixture {
        self.map_a(|a| a - C64::new(0.0, t))
    }

    /// Data of `e^{rho Delta}`.
    pub fn heat(&self, rho: f64) -> Result<GaussianMixture> {
        if !(rho >= 0.0) {
            return Err(domain("rho", rho, "heat flow runs forward only"));
        }
        Ok(self.map_a(|a| a - rho))
    }

    pub fn scaled(&self, c: C64) -> GaussianMixture {
        GaussianMixture {
            d: self.d,
            terms: self
                .terms
                .iter()
                .map(|t| GaussianTerm {
                    coef: t.coef * c,
                    a: t.a,
                    b: t.b.clone(),
                })
                .collect(),
        }
    }

    fn fourier_reference_peak(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| self.fourier(&t.fourier_peak().0).norm())
            .fold(0.0, f64::max)
    }

    fn physical_reference_peak(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| self.physical(&t.physical_peak().0).norm())
            .fold(0.0, f64::max)
    }

    /// Radius outside which `|u0^| <= eps * peak` (term-wise bound).
    pub fn fourier_extent(&self, eps: f64) -> f64 {
        let peak = self.fourier_reference_peak();
        let share = eps * peak / self.terms.len() as f64;
        self.terms
            .iter()
            .map(|t| {
                let (centre, m) = t.fourier_peak();
                let c = centre.iter().map(|x| x * x).sum::<f64>().sqrt();
                let excess = (m / share).ln().max(0.0);
                c + (excess / -t.a.re).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Radius outside which `|u0| <= eps * peak` (term-wise bound).
    pub fn physical_extent(&self, eps: f64) -> f64 {
        let peak = self.physical_reference_peak();
        let share = eps * peak / self.terms.len() as f64;
        self.terms
            .iter()
            .map(|t| {
                let (centre, rate, m) = t.physical_peak();
                let c = centre.iter().map(|x| x * x).sum::<f64>().sqrt();
                let excess = (m / share).ln().max(0.0);
                c + (excess / rate).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Samples on the frequency grid. Fails when the box does not contain
    /// the datum on either side of the transform.
    pub fn render(&self, geometry: GridGeometry) -> Result<GridField> {
        if geometry.d != self.d {
            return Err(Error::Mismatch(format!(
                "datum in d = {} rendered on a d = {} grid",
                self.d, geometry.d
            )));
        }
        self.check_resolved(geometry, RESOLVE_EPS)?;
        Ok(self.render_unchecked(geometry))
    }

    pub fn render_unchecked(&self, geometry: GridGeometry) -> GridField {
        GridField::from_fn(geometry, Side::Fourier, |eta| self.fourier(eta))
    }

    pub fn check_resolved(&self, geometry: GridGeometry, eps: f64) -> Result<()> {
        let k = self.fourier_extent(eps);
        let x = self.physical_extent(eps);
        let l = geometry.half_width;
        let omega = geometry.nyquist();
        if k > omega || x > l {
            let suggested_l = l.max(x * 1.05);
            let suggested_n = (2.0 * suggested_l * k.max(omega) * 1.05 / PI)
                .ceil()
                .max(4.0) as usize;
            return Err(Error::Resolution {
                reason: format!(
                    "datum needs |xi| <= {k:.3} and |x| <= {x:.3}; grid covers {omega:.3} and {l:.3}"
                ),
                suggested_l,
                suggested_n: suggested_n.next_power_of_two(),
            });
        }
        Ok(())
    }
}

/// Smallest power-of-two grid of half-width `l` whose Nyquist frequency is
/// at least `omega`.
pub fn points_for(l: f64, omega: f64) -> usize {
    ((2.0 * l * omega / PI).ceil() as usize).max(4).next_power_of_two()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn render_peak_and_drift() {
        let g1 = GridGeometry::new(1, 64, 16.0).unwrap();
        let f = GaussianDatum::centred(1, -1.0).unwrap().render(g1).unwrap();
        assert_relative_eq!(f.samples[g1.origin()].re, 1.0);
        let g2 = GridGeometry::new(2, 64, 16.0).unwrap();
        let datum = GaussianDatum::new(
            C64::new(-1.0, 0.0),
            vec![C64::new(2.0, 0.0), C64::new(0.0, 0.0)],
            C64::new(0.0, 0.0),
        )
        .unwrap();
        let f = datum.render(g2).unwrap();
        let (best, _) = f
            .samples
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        let c = g2.coords(best, Side::Fourier);
        assert!((c[0] - 1.0).abs() <= 0.5 * g2.dxi() && c[1].abs() < 1e-12);
    }

    #[test]
    fn radial_flag() {
        let d = GaussianDatum::new(
            C64::new(-1.0, 0.0),
            vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
            C64::new(0.0, 0.0),
        )
        .unwrap();
        assert!(d.radial_modulus());
        let v = d.eval(&[0.3, -0.4]);
        assert_relative_eq!(v.norm(), (-0.25f64).exp(), max_relative = 1e-14);
        let drift = GaussianDatum::new(
            C64::new(-1.0, 0.0),
            vec![C64::new(1.0, 1.0)],
            C64::new(0.0, 0.0),
        )
        .unwrap();
        assert!(!drift.radial_modulus());
        assert!(GaussianDatum::new(C64::new(0.0, 1.0), vec![C64::new(0.0, 0.0)], C64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn unresolved_render_suggests_grid() {
        let g = GridGeometry::new(1, 16, 4.0).unwrap();
        let err = GaussianDatum::centred(1, -0.1).unwrap().render(g).unwrap_err();
        match err {
            Error::Resolution {
                suggested_l,
                suggested_n,
                ..
            } => {
                assert!(suggested_l >= 4.0 && suggested_n >= 16);
                let g2 = GridGeometry::new(1, suggested_n, suggested_l).unwrap();
                assert!(GaussianDatum::centred(1, -0.1).unwrap().render(g2).is_ok());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn physical_closed_form_matches_grid() {
        let m = GaussianMixture::random(2, RandomData::default(), 3).unwrap();
        let k = m.fourier_extent(1e-13);
        let x = m.physical_extent(1e-13);
        let l = 1.1 * x;
        let g = GridGeometry::new(2, points_for(l, 1.1 * k), l).unwrap();
        let f = m.render(g).unwrap().to_physical();
        let peak = f.max_abs();
        for idx in (0..g.len()).step_by(97) {
            let c = g.coords(idx, Side::Physical);
            let exact = m.physical(&c[..2]);
            assert!((exact - f.samples[idx]).norm() <= 1e-11 * peak);
        }
    }

    #[test]
    fn schrodinger_evolution_matches_grid() {
        let datum = GaussianDatum::centred(1, -1.0).unwrap().to_mixture();
        let g = GridGeometry::new(1, 256, 40.0).unwrap();
        let u1 = datum.render(g).unwrap().propagate_schrodinger(1.0).to_physical();
        let evolved = datum.evolve(1.0);
        for (idx, v) in u1.samples.iter().enumerate() {
            let x = g.coords(idx, Side::Physical);
            assert!((evolved.physical(&x[..1]) - v).norm() < 1e-10);
        }
    }

    #[test]
    fn heat_preserves_gaussians() {
        let m = GaussianDatum::centred(2, -1.0).unwrap().to_mixture();
        let h = m.heat(0.5).unwrap();
        assert_eq!(h.terms[0].a, C64::new(-1.5, 0.0));
        assert!(m.heat(-0.1).is_err());
    }

    #[test]
    fn random_data_are_reproducible() {
        let a = GaussianMixture::random(2, RandomData::default(), 11).unwrap();
        let b = GaussianMixture::random(2, RandomData::default(), 11).unwrap();
        let c = GaussianMixture::random(2, RandomData::default(), 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn extents_bound_the_samples() {
        let m = GaussianMixture::random(1, RandomData::default(), 5).unwrap();
        let k = m.fourier_extent(1e-10);
        let peak = m.fourier_reference_peak();
        for i in 0..200 {
            let eta = k + 0.05 * i as f64;
            assert!(m.fourier(&[eta]).norm() <= 1e-10 * peak);
            assert!(m.fourier(&[-eta]).norm() <= 1e-10 * peak);
        }
    }
}
