//! Numerical search for maximisers of `lhs / (constant * I)` over data
//! `u0 = v0`.
//!
//! The objective is the discrete functional itself: the same grid, the same
//! time nodes and the same singular weights as the forward computation, so
//! the gradients below are exact for it and an accepted step really does
//! increase the ratio that is reported.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{centered_dft, GridField, GridGeometry, Side};
use crate::quadrature::{pairwise_sum, pairwise_sum_by};
use crate::spectral::{time_nodes, AxisTable, Buf, SingularSum, SpaceTimeGrid, TimeNode};
use crate::weights::{EstimateSpec, Family};

/// Relative ratio gain below which the ascent counts as converged.
const STALL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepPolicy {
    /// `u0^ <- grad lhs`, renormalised. Needs a kernel power of zero, where
    /// `I` is fixed by the mass and `lhs` is a convex quartic, so every step
    /// increases the ratio.
    PowerIteration,
    /// Gradient steps on the ratio; the step is halved until the ratio
    /// increases and grown again after a success.
    Backtracking { initial_step: f64, min_step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AscentStatus {
    Converged,
    MaxSteps,
    StepFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscentOutcome {
    /// Best datum found, on the Fourier side with the mass of the start.
    pub field: GridField,
    /// Ratio after each accepted step, starting with the initial ratio.
    pub history: Vec<f64>,
    pub status: AscentStatus,
}

/// Quartic part of the ratio together with its gradient.
struct Objective {
    geometry: GridGeometry,
    sigma: f64,
    nodes: Vec<TimeNode>,
    fourier_sum: Option<SingularSum>,
    physical_sum: Option<SingularSum>,
    kernel: KernelConvolution,
    constant: f64,
}

/// `rho -> sum_z' W(z - z') rho(z')` with the corrected singular weights.
struct KernelConvolution {
    small: GridGeometry,
    big: GridGeometry,
    weights_hat: Vec<C64>,
    embed: Vec<usize>,
}

impl KernelConvolution {
    fn new(geometry: GridGeometry, p: f64) -> Result<Self> {
        let big = GridGeometry::new(geometry.d, 2 * geometry.n, geometry.half_width)?;
        let sum = SingularSum::new(big, Side::Fourier, p)?;
        let mut weights_hat: Vec<C64> = sum.weights().iter().map(|&w| C64::new(w, 0.0)).collect();
        centered_dft(&mut weights_hat, big.d, big.n, false);
        let embed = (0..geometry.len())
            .map(|idx| {
                let o = geometry.offsets(idx);
                big.index_of(&o[..geometry.d]).expect("doubled grid contains the original")
            })
            .collect();
        Ok(KernelConvolution {
            small: geometry,
            big,
            weights_hat,
            embed,
        })
    }

    fn apply(&self, rho: &[f64]) -> Vec<f64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.big.len()];
        for (&j, &r) in self.embed.iter().zip(rho) {
            buf[j] = C64::new(r, 0.0);
        }
        centered_dft(&mut buf, self.big.d, self.big.n, false);
        buf.iter_mut().zip(&self.weights_hat).for_each(|(b, w)| *b *= w);
        centered_dft(&mut buf, self.big.d, self.big.n, true);
        let norm = 1.0 / self.big.len() as f64;
        debug_assert_eq!(rho.len(), self.small.len());
        self.embed.iter().map(|&j| buf[j].re * norm).collect()
    }
}

struct Evaluation {
    ratio: f64,
    lhs: f64,
    interaction: f64,
    grad_lhs: Vec<C64>,
    grad_interaction: Vec<C64>,
}

impl Evaluation {
    /// Wirtinger gradient of the ratio.
    fn grad_ratio(&self) -> Vec<C64> {
        self.grad_lhs
            .iter()
            .zip(&self.grad_interaction)
            .map(|(gn, gi)| self.ratio * (gn / self.lhs - gi / self.interaction))
            .collect()
    }
}

impl Objective {
    fn new(spec: &EstimateSpec, st: &SpaceTimeGrid) -> Result<Self> {
        spec.validate()?;
        let sigma = match spec.family {
            Family::Conjugate { sigma } => sigma,
            // |u u| = |u ubar| pointwise
            Family::Plain { beta } if beta == 0.0 => 0.0,
            Family::Plain { .. } => {
                return Err(Error::Precondition(
                    "ascent covers the conjugate family and the plain family at beta = 0".into(),
                ))
            }
        };
        let g = st.geometry;
        if g.d != spec.d {
            return Err(Error::Mismatch("spec and grid dimensions differ".into()));
        }
        let lens_power = 4.0 * sigma + g.d as f64 - 2.0;
        let (fourier_sum, physical_sum) = if sigma == 0.0 {
            (None, None)
        } else {
            (
                Some(SingularSum::new(g, Side::Fourier, 4.0 * sigma)?),
                Some(SingularSum::new(g, Side::Physical, 4.0 * sigma)?),
            )
        };
        Ok(Objective {
            geometry: g,
            sigma,
            nodes: time_nodes(lens_power, st.window, st.n_t)?,
            fourier_sum,
            physical_sum,
            kernel: KernelConvolution::new(g, spec.kernel_power())?,
            constant: spec.constant()?,
        })
    }

    fn dft(&self, buf: &mut [C64], inverse: bool) {
        centered_dft(buf, self.geometry.d, self.geometry.n, inverse);
    }

    /// Spatial norm `q(z)` of `|z|^2` on `side` and the real field `psi`
    /// with `dq / d zbar = psi z`.
    fn spatial(&self, z: &[C64], side: Side) -> (f64, Vec<f64>) {
        let g = self.geometry;
        let cell = g.cell(side);
        let p: Vec<f64> = z.iter().map(|v| v.norm_sqr()).collect();
        if self.sigma == 0.0 {
            let q = cell * pairwise_sum_by(p.len(), &|i| p[i] * p[i]);
            return (q, p.iter().map(|x| 2.0 * cell * x).collect());
        }
        let dual = match side {
            Side::Physical => self.fourier_sum.as_ref(),
            Side::Fourier => self.physical_sum.as_ref(),
        }
        .expect("singular sums exist for sigma != 0");
        let c = cell * cell / (2.0 * PI).powi(g.d as i32);
        let mut ph = Buf::new(p.len());
        for (b, &x) in ph.iter_mut().zip(&p) {
            *b = C64::new(x, 0.0);
        }
        self.dft(&mut ph, false);
        let q = c * dual.apply_norm(&ph);
        let w = dual.weights();
        ph.iter_mut().zip(w).for_each(|(b, w)| *b *= w);
        self.dft(&mut ph, true);
        (q, ph.iter().map(|b| 2.0 * c * b.re).collect())
    }

    /// Discrete `lhs` at `u_hat` and its Wirtinger gradient.
    fn lhs(&self, u_hat: &[C64]) -> (f64, Vec<C64>) {
        let g = self.geometry;
        let d = g.d as i32;
        let len = u_hat.len();
        let to_phys = g.dxi() / (2.0 * PI);
        let dx = g.spacing(Side::Physical);
        let mut u_phys = u_hat.to_vec();
        self.dft(&mut u_phys, true);
        u_phys.iter_mut().for_each(|v| *v *= to_phys.powi(d));
        let lens_factor = (2.0 * PI).powi(-2 * d) * (g.d as f64 + 4.0 * self.sigma - 2.0).exp2();
        let parts: Vec<(f64, Vec<C64>)> = self
            .nodes
            .par_iter()
            .map(|node| {
                let mut z = Buf::new(len);
                let mut out = vec![C64::new(0.0, 0.0); len];
                if node.lens {
                    let s = node.x;
                    AxisTable::chirp(g, Side::Physical, s, dx).apply(&u_phys, &mut z);
                    self.dft(&mut z, false);
                    let (q, psi) = self.spatial(&z, Side::Fourier);
                    z.iter_mut().zip(&psi).for_each(|(v, p)| *v *= p);
                    self.dft(&mut z, true);
                    AxisTable::chirp(g, Side::Physical, -s, dx).apply(&z, &mut out);
                    let w = node.weight * lens_factor;
                    out.iter_mut().for_each(|v| *v *= w);
                    (w * q, out)
                } else {
                    let t = node.x;
                    AxisTable::chirp(g, Side::Fourier, -t, to_phys).apply(u_hat, &mut z);
                    self.dft(&mut z, true);
                    let (q, psi) = self.spatial(&z, Side::Physical);
                    z.iter_mut().zip(&psi).for_each(|(v, p)| *v *= p);
                    self.dft(&mut z, false);
                    AxisTable::chirp(g, Side::Fourier, t, to_phys).apply(&z, &mut out);
                    out.iter_mut().for_each(|v| *v *= node.weight);
                    (node.weight * q, out)
                }
            })
            .collect();
        // fixed order keeps the sum independent of the thread count
        let mut direct = vec![C64::new(0.0, 0.0); len];
        let mut lens = vec![C64::new(0.0, 0.0); len];
        let mut values = Vec::with_capacity(parts.len());
        for (node, (v, part)) in self.nodes.iter().zip(&parts) {
            values.push(*v);
            let acc = if node.lens { &mut lens } else { &mut direct };
            acc.iter_mut().zip(part).for_each(|(a, b)| *a += b);
        }
        self.dft(&mut lens, false);
        let back = to_phys.powi(d);
        for (a, b) in direct.iter_mut().zip(&lens) {
            *a += back * b;
        }
        (pairwise_sum(&values), direct)
    }

    /// Discrete `I(u, u)` at `u_hat` and its Wirtinger gradient.
    fn interaction(&self, u_hat: &[C64]) -> (f64, Vec<C64>) {
        let cell = self.geometry.cell(Side::Fourier);
        let rho: Vec<f64> = u_hat.iter().map(|v| v.norm_sqr()).collect();
        let conv = self.kernel.apply(&rho);
        let value = cell * pairwise_sum_by(rho.len(), &|i| rho[i] * conv[i]);
        let grad = u_hat.iter().zip(&conv).map(|(u, c)| 2.0 * cell * c * u).collect();
        (value, grad)
    }

    fn evaluate(&self, u_hat: &[C64]) -> Result<Evaluation> {
        let (lhs, grad_lhs) = self.lhs(u_hat);
        let (interaction, grad_interaction) = self.interaction(u_hat);
        if !(interaction > 0.0) {
            return Err(Error::Degenerate("interaction vanishes".into()));
        }
        Ok(Evaluation {
            ratio: lhs / (self.constant * interaction),
            lhs,
            interaction,
            grad_lhs,
            grad_interaction,
        })
    }
}

fn norm2(v: &[C64]) -> f64 {
    pairwise_sum_by(v.len(), &|i| v[i].norm_sqr())
}

/// Fixed time rule for an ascent from `init`: twice the node count the
/// adaptive rule settles on for the value at `init`.
///
/// The value converges before the gradient does in directions where the
/// datum is tiny, and an ascent amplifies exactly those directions: with the
/// bare count, a quadrature floor near `1e-8` builds up in the far tails.
pub fn ascent_time_grid(spec: &EstimateSpec, init: &GridField) -> Result<SpaceTimeGrid> {
    let st = SpaceTimeGrid::fit(&[init], 2)?;
    let detail = match spec.family {
        Family::Conjugate { .. } => crate::spectral::lhs_conjugate_detailed(spec, init, init, &st)?,
        Family::Plain { .. } => crate::spectral::lhs_dispersive_detailed(spec, init, init, &st)?,
    };
    Ok(st.with_nodes(2 * detail.n_t.max(1)).fixed())
}

/// Ascent on `lhs / (constant * I)` over `u0 = v0`, starting from `init`.
///
/// The time rule of `st` is used as a fixed rule throughout; callers that
/// want an independent figure re-evaluate the returned field with an
/// adaptive rule.
pub fn extremiser_ascent(
    spec: &EstimateSpec,
    init: &GridField,
    max_steps: usize,
    policy: StepPolicy,
    st: &SpaceTimeGrid,
) -> Result<AscentOutcome> {
    if init.geometry != st.geometry {
        return Err(Error::Mismatch("initial datum and space-time grid differ in geometry".into()));
    }
    let objective = Objective::new(spec, st)?;
    let mut u = init.to_fourier().samples;
    let mass = norm2(&u);
    if !(mass > 0.0) {
        return Err(Error::Precondition("initial datum vanishes".into()));
    }
    if matches!(policy, StepPolicy::PowerIteration) && spec.kernel_power() != 0.0 {
        return Err(Error::Precondition(format!(
            "power iteration needs kernel power 0, this estimate has {}",
            spec.kernel_power()
        )));
    }
    let mut current = objective.evaluate(&u)?;
    let mut history = vec![current.ratio];
    let mut step = match policy {
        StepPolicy::Backtracking { initial_step, min_step } => {
            if !(initial_step > 0.0 && min_step > 0.0 && min_step <= initial_step) {
                return Err(Error::Precondition("need 0 < min_step <= initial_step".into()));
            }
            initial_step
        }
        StepPolicy::PowerIteration => 1.0,
    };
    let mut status = AscentStatus::MaxSteps;
    for _ in 0..max_steps {
        let next = match policy {
            StepPolicy::PowerIteration => {
                let gm = norm2(&current.grad_lhs);
                if !(gm > 0.0) {
                    status = AscentStatus::StepFailure;
                    break;
                }
                let c = (mass / gm).sqrt();
                let cand: Vec<C64> = current.grad_lhs.iter().map(|g| g * c).collect();
                let eval = objective.evaluate(&cand)?;
                (eval.ratio > current.ratio).then_some((cand, eval))
            }
            StepPolicy::Backtracking { min_step, .. } => {
                let dir = current.grad_ratio();
                let dm = norm2(&dir);
                if !(dm > 0.0) {
                    status = AscentStatus::Converged;
                    break;
                }
                let mut found = None;
                while step >= min_step {
                    let c = step * (mass / dm).sqrt();
                    let mut cand: Vec<C64> = u.iter().zip(&dir).map(|(a, b)| a + b * c).collect();
                    let k = (mass / norm2(&cand)).sqrt();
                    cand.iter_mut().for_each(|v| *v *= k);
                    let eval = objective.evaluate(&cand)?;
                    if eval.ratio > current.ratio {
                        found = Some((cand, eval));
                        step = (step * 1.5).min(1.0);
                        break;
                    }
                    step *= 0.5;
                }
                if found.is_none() {
                    status = AscentStatus::StepFailure;
                    break;
                }
                found
            }
        };
        let Some((cand, eval)) = next else {
            status = AscentStatus::Converged;
            break;
        };
        let gain = (eval.ratio - current.ratio) / current.ratio;
        assert!(eval.ratio > current.ratio, "accepted step lowered the ratio");
        u = cand;
        current = eval;
        history.push(current.ratio);
        if gain < STALL {
            status = AscentStatus::Converged;
            break;
        }
    }
    Ok(AscentOutcome {
        field: GridField::new(init.geometry, Side::Fourier, u)?,
        history,
        status,
    })
}

/// Isotropic Gaussian `A e^{-kappa |eta - m|^2}` fitted to `|u0^|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub centre: Vec<f64>,
    pub kappa: f64,
    pub amplitude: f64,
    /// `|| |u0^| - fit ||_2 / || u0^ ||_2` on the grid.
    pub residual: f64,
}

/// Moment fit: the centre and width come from the first two moments of
/// `|u0^|^2`, the amplitude from least squares.
pub fn gaussian_fit(field: &GridField) -> Result<GaussianFit> {
    let f = field.to_fourier();
    let g = f.geometry;
    let d = g.d;
    let rho: Vec<f64> = f.samples.iter().map(|v| v.norm_sqr()).collect();
    let mass = pairwise_sum(&rho);
    if !(mass > 0.0) {
        return Err(Error::Precondition("field vanishes".into()));
    }
    let coords: Vec<[f64; 3]> = (0..g.len()).map(|i| g.coords(i, Side::Fourier)).collect();
    let centre: Vec<f64> = (0..d)
        .map(|k| pairwise_sum_by(rho.len(), &|i| rho[i] * coords[i][k]) / mass)
        .collect();
    let dist2 = |i: usize| -> f64 { (0..d).map(|k| (coords[i][k] - centre[k]).powi(2)).sum() };
    let var = pairwise_sum_by(rho.len(), &|i| rho[i] * dist2(i)) / mass;
    // |u0^|^2 ~ e^{-2 kappa r^2} has second moment d / (4 kappa)
    let kappa = d as f64 / (4.0 * var);
    let shape: Vec<f64> = (0..g.len()).map(|i| (-kappa * dist2(i)).exp()).collect();
    let amplitude = pairwise_sum_by(shape.len(), &|i| shape[i] * f.samples[i].norm())
        / pairwise_sum_by(shape.len(), &|i| shape[i] * shape[i]);
    let err = pairwise_sum_by(shape.len(), &|i| (f.samples[i].norm() - amplitude * shape[i]).powi(2));
    Ok(GaussianFit {
        centre,
        kappa,
        amplitude,
        residual: (err / mass).sqrt(),
    })
}
