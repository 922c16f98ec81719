//! Energy-shell form of `|| |D|^beta (uv) ||^2`.
//!
//! The space-time transform of `uv` lives on `tau = -(|xi|^2 + |w|^2)/2`,
//! where `w = z1 - z2` and `xi = z1 + z2`. Writing `A_xi(r)` for the
//! spherical integral of `u0^((xi+w)/2) v0^((xi-w)/2)` over `|w| = r`,
//!
//! `|| |D|^beta (uv) ||^2 = (2pi)^{1-3d} 2^{-2d-2beta} int d xi int_0^inf r^{4beta+2d-3} |A_xi(r)|^2 dr`.
//!
//! This works for every admissible `beta`, at the price of evaluating the
//! data off-grid.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datum::GaussianMixture;
use crate::error::{Error, Result};
use crate::grid::{GridField, GridGeometry, Side};
use crate::quadrature::{composite_power_weighted, gauss_legendre, pairwise_sum, Rule};
use crate::special::plain_threshold;

/// Something that can be evaluated anywhere on the frequency side.
pub trait FourierProfile: Sync {
    fn dim(&self) -> usize;
    fn value(&self, eta: &[f64]) -> C64;
}

impl FourierProfile for GaussianMixture {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, eta: &[f64]) -> C64 {
        self.fourier(eta)
    }
}

/// Off-grid evaluation of a grid field's transform.
///
/// The physical samples are zero-padded, which samples the exact
/// trigonometric interpolant on a finer frequency grid, and six-point
/// Lagrange interpolation is used between those samples.
#[derive(Debug, Clone)]
pub struct GridProfile {
    fine: GridField,
}

const TAPS: usize = 6;

impl GridProfile {
    pub fn new(field: &GridField) -> Result<Self> {
        let g = field.geometry;
        let factor = match g.d {
            1 => 16,
            2 => 4,
            _ => 2,
        };
        let big = GridGeometry::new(g.d, g.n * factor, g.half_width * factor as f64)?;
        let phys = field.to_physical();
        let mut samples = vec![C64::new(0.0, 0.0); big.len()];
        for (idx, v) in phys.samples.iter().enumerate() {
            let o = g.offsets(idx);
            samples[big.index_of(&o[..g.d]).expect("padded grid contains the original")] = *v;
        }
        let fine = GridField::new(big, Side::Physical, samples)?.to_fourier();
        Ok(GridProfile { fine })
    }

    fn weights(&self, x: f64) -> Option<(i64, [f64; TAPS])> {
        let g = self.fine.geometry;
        let p = x / g.dxi();
        let base = p.floor() as i64 - (TAPS as i64 / 2 - 1);
        let half = (g.n / 2) as i64;
        if base < -half || base + TAPS as i64 - 1 >= half {
            return None;
        }
        let mut w = [0.0; TAPS];
        let t = p - base as f64;
        if let Some(k) = (0..TAPS).find(|&k| t == k as f64) {
            w[k] = 1.0;
            return Some((base, w));
        }
        // barycentric form on equispaced nodes: c_k = (-1)^(5-k) binom(5, k)
        const C: [f64; TAPS] = [-1.0, 5.0, -10.0, 10.0, -5.0, 1.0];
        let mut ell = 1.0;
        for (k, wk) in w.iter_mut().enumerate() {
            let dk = t - k as f64;
            ell *= dk;
            *wk = C[k] / dk;
        }
        // l(t) / 5!
        let scale = ell / 120.0;
        w.iter_mut().for_each(|v| *v *= scale);
        Some((base, w))
    }
}

impl FourierProfile for GridProfile {
    fn dim(&self) -> usize {
        self.fine.d()
    }

    fn value(&self, eta: &[f64]) -> C64 {
        let g = self.fine.geometry;
        let mut axes = Vec::with_capacity(g.d);
        for &x in eta {
            match self.weights(x) {
                Some(w) => axes.push(w),
                None => return C64::new(0.0, 0.0),
            }
        }
        let half = (g.n / 2) as i64;
        let n = g.n as i64;
        let idx = |offs: &[i64]| -> usize {
            offs.iter().fold(0i64, |acc, o| acc * n + (o + half)) as usize
        };
        let s = &self.fine.samples;
        let mut acc = C64::new(0.0, 0.0);
        match g.d {
            1 => {
                let (b, w) = axes[0];
                for k in 0..TAPS {
                    acc += w[k] * s[idx(&[b + k as i64])];
                }
            }
            2 => {
                let ((b0, w0), (b1, w1)) = (axes[0], axes[1]);
                for i in 0..TAPS {
                    let mut row = C64::new(0.0, 0.0);
                    for j in 0..TAPS {
                        row += w1[j] * s[idx(&[b0 + i as i64, b1 + j as i64])];
                    }
                    acc += w0[i] * row;
                }
            }
            _ => {
                let ((b0, w0), (b1, w1), (b2, w2)) = (axes[0], axes[1], axes[2]);
                for i in 0..TAPS {
                    for j in 0..TAPS {
                        let mut line = C64::new(0.0, 0.0);
                        for k in 0..TAPS {
                            line += w2[k] * s[idx(&[b0 + i as i64, b1 + j as i64, b2 + k as i64])];
                        }
                        acc += w0[i] * w1[j] * line;
                    }
                }
            }
        }
        acc
    }
}

/// Discretisation of the shell integral.
///
/// Both factors are negligible outside `|eta| <= radius / 2`, and
/// `|z1|^2 + |z2|^2 = (|xi|^2 + r^2) / 2`, so the integrand lives on
/// `|xi|^2 + r^2 <= radius^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellRule {
    pub radius: f64,
    /// Trapezoid intervals per axis of `[-radius, radius]` for the centre.
    pub xi_points: usize,
    /// Gauss panels (16 nodes each) over the longest radial range.
    pub r_panels: usize,
    /// Angular nodes at the largest radius (circle: trapezoid count; sphere:
    /// azimuth count), scaled down linearly in `r` to a floor of 16.
    pub angles: usize,
}

impl ShellRule {
    /// Rule sized from the frequency extent `k` and physical extent `x` of
    /// the data.
    pub fn for_extents(k: f64, x: f64) -> ShellRule {
        let b = 2.0 * k;
        // |A_xi|^2 has physical content within 2x, so a step below pi / x
        // resolves it
        let step = PI / x.max(1e-12) / 1.2;
        let xi_points = ((2.0 * b / step).ceil() as usize).max(32);
        let r_panels = ((b * x / (2.0 * PI)).ceil() as usize).max(4);
        // the circle integrand has angular modes up to r x
        let angles = ((1.25 * b * x).ceil() as usize).clamp(16, 512);
        ShellRule {
            radius: b,
            xi_points: xi_points + xi_points % 2,
            r_panels,
            angles: angles + angles % 2,
        }
    }

    /// Extents are measured at the space-time level, as for the time
    /// integrals: a tail of relative size `eps` enters the shell integral
    /// only through products with other samples on the same shell.
    pub fn for_fields(u: &GridField, v: &GridField) -> Result<ShellRule> {
        let eps = crate::spectral::SPACETIME_EPS;
        let k = u.to_fourier().extent(eps).max(v.to_fourier().extent(eps));
        let x = u.to_physical().extent(eps).max(v.to_physical().extent(eps));
        if k == 0.0 {
            return Err(Error::Precondition("data vanish on the grid".into()));
        }
        Ok(ShellRule::for_extents(k, x))
    }
}

/// Quadrature on the unit sphere; with `half` only one node of each
/// antipodal pair is kept, at double weight.
fn sphere_nodes(d: usize, angles: usize, half: bool) -> Vec<(Vec<f64>, f64)> {
    let f = if half { 2.0 } else { 1.0 };
    match d {
        1 if half => vec![(vec![1.0], 2.0)],
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => (0..if half { angles / 2 } else { angles })
            .map(|j| {
                let th = 2.0 * PI * j as f64 / angles as f64;
                (vec![th.cos(), th.sin()], f * 2.0 * PI / angles as f64)
            })
            .collect(),
        _ => {
            let m = (angles / 2).max(8);
            let polar: Rule = gauss_legendre(m + m % 2);
            let mut out = Vec::new();
            for (&c, &w) in polar.nodes.iter().zip(&polar.weights) {
                if half && c < 0.0 {
                    continue;
                }
                let s = (1.0 - c * c).sqrt();
                for k in 0..angles {
                    let ph = 2.0 * PI * k as f64 / angles as f64;
                    out.push((vec![s * ph.cos(), s * ph.sin(), c], f * w * 2.0 * PI / angles as f64));
                }
            }
            out
        }
    }
}

/// `|| |D|^beta (uv) ||^2` through the energy shell.
pub fn energy_shell_lhs(u: &dyn FourierProfile, v: &dyn FourierProfile, beta: f64, rule: &ShellRule) -> Result<f64> {
    let d = u.dim();
    if v.dim() != d {
        return Err(Error::Mismatch("profiles differ in dimension".into()));
    }
    if !(beta > plain_threshold(d)) {
        return Err(Error::BelowThreshold {
            family: "plain",
            d,
            exponent: beta,
            threshold: plain_threshold(d),
        });
    }
    if d > 3 {
        return Err(Error::UnsupportedDimension {
            d,
            reason: "the shell quadrature covers d <= 3".into(),
        });
    }
    let df = d as f64;
    let q = 4.0 * beta + 2.0 * df - 3.0;
    let b = rule.radius;
    // omega -> -omega swaps the two factors, so for u = v half the sphere does
    let half = std::ptr::eq(u as *const dyn FourierProfile as *const u8, v as *const dyn FourierProfile as *const u8);
    let panels = rule.r_panels.max(1);
    let radial: Vec<Rule> = (1..=panels)
        .map(|p| composite_power_weighted(1.0, q, p, 16))
        .collect::<Result<_>>()?;
    let floor = 16.min(rule.angles.max(2));
    let spheres: Vec<Vec<(Vec<f64>, f64)>> = (0..=rule.angles / 2)
        .map(|m| sphere_nodes(d, (2 * m).max(floor), half))
        .collect();
    let m = rule.xi_points;
    let h = 2.0 * b / m as f64;
    let axis: Vec<f64> = (0..=m).map(|j| -b + j as f64 * h).collect();
    let total = (m + 1).pow(d as u32);
    let centre_terms: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut xi = [0.0; 3];
            let mut rest = flat;
            for k in (0..d).rev() {
                xi[k] = axis[rest % (m + 1)];
                rest /= m + 1;
            }
            let xi2: f64 = xi.iter().map(|x| x * x).sum();
            if xi2 >= b * b {
                return 0.0;
            }
            let reach = (b * b - xi2).sqrt();
            let rule_r = &radial[((panels as f64 * reach / b).ceil() as usize).clamp(1, panels) - 1];
            let jac = reach.powf(q + 1.0);
            let mut zeta = [0.0; 3];
            let mut eta = [0.0; 3];
            let mut acc = Vec::with_capacity(rule_r.len());
            for (&t, &wr) in rule_r.nodes.iter().zip(&rule_r.weights) {
                let r = reach * t;
                let sphere = &spheres[((rule.angles as f64 * r / b / 2.0).ceil() as usize).min(spheres.len() - 1)];
                let mut a = C64::new(0.0, 0.0);
                for (omega, wo) in sphere {
                    for k in 0..d {
                        zeta[k] = 0.5 * (xi[k] + r * omega[k]);
                        eta[k] = 0.5 * (xi[k] - r * omega[k]);
                    }
                    a += *wo * u.value(&zeta[..d]) * v.value(&eta[..d]);
                }
                acc.push(jac * wr * a.norm_sqr());
            }
            pairwise_sum(&acc)
        })
        .collect();
    let cell = h.powi(d as i32);
    let prefactor = (2.0 * PI).powf(1.0 - 3.0 * df) * (-2.0 * df - 2.0 * beta).exp2();
    Ok(prefactor * cell * pairwise_sum(&centre_terms))
}
