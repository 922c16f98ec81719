//! Closed forms for Gaussian data `u0^(eta) = exp(a|eta|^2 + b.eta)` with
//! `v0 = u0`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{composite_legendre, composite_power_weighted, pairwise_sum};
use crate::special::{log_gamma, sphere_area};
use crate::weights::{EstimateSpec, Family};

/// Both sides of an estimate at one datum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub lhs_sq: f64,
    pub rhs_interaction: f64,
    pub constant: f64,
    pub relative_deficit: f64,
}

impl OracleResult {
    pub fn new(lhs_sq: f64, rhs_interaction: f64, constant: f64) -> Self {
        let rhs = constant * rhs_interaction;
        OracleResult {
            lhs_sq,
            rhs_interaction,
            constant,
            relative_deficit: (rhs - lhs_sq) / rhs,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `int int e^{-alpha|z|^2 + 2 b.z} e^{-alpha|w|^2 + 2 b.w} |z - w|^p dz dw`.
///
/// In `s = z + w`, `w' = z - w` the drift only touches `s`, and the `w'`
/// integral is a radial Gamma integral.
pub fn oracle_interaction(alpha: f64, b_re: &[f64], p: f64, d: usize) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(crate::error::domain("alpha", alpha, "must be positive"));
    }
    if b_re.len() != d || d == 0 {
        return Err(Error::Mismatch(format!("drift must have {d} components")));
    }
    let df = d as f64;
    if !(p > -df) {
        return Err(Error::Domain {
            what: "p",
            value: p,
            reason: format!("interaction diverges for p <= -{d}"),
        });
    }
    let centre = (2.0 * PI / alpha).powf(df / 2.0) * (2.0 * dot(b_re, b_re) / alpha).exp();
    let radial = 0.5 * ((p + df) / 2.0 * (2.0 / alpha).ln() + log_gamma((p + df) / 2.0)?).exp();
    Ok((-df).exp2() * centre * sphere_area(d) * radial)
}

fn check_gaussian(a: C64, b: &[C64], d: usize) -> Result<()> {
    if !(a.re < 0.0) {
        return Err(crate::error::domain("Re a", a.re, "Gaussian must decay"));
    }
    if b.len() != d || d == 0 {
        return Err(Error::Mismatch(format!("b must have {d} components")));
    }
    Ok(())
}

/// `||(-Delta)^sigma |u(t)|^2||^2_{L^2_x}` at one time, in closed form.
fn conjugate_density(a: C64, b: &[C64], sigma: f64, t: f64) -> f64 {
    let d = b.len();
    let df = d as f64;
    // u(t)^ = exp((a - it)|eta|^2 + b.eta); |u(t,x)|^2 = K exp(-g|x|^2 - m.x)
    let at = -a + C64::new(0.0, t);
    let inv = at.inv();
    let bb: C64 = b.iter().map(|z| z * z).sum();
    let g = 0.5 * inv.re;
    let m: Vec<f64> = b.iter().map(|z| (z * inv).im).collect();
    let log_k = -2.0 * df * (2.0 * PI).ln() + df * (PI.ln() - at.norm().ln()) + (bb * inv).re / 2.0;
    let mm = dot(&m, &m);
    let q = 2.0 * sigma + df / 2.0;
    let log = -df * (2.0 * PI).ln() + 2.0 * log_k + df * (PI / g).ln() + mm / (2.0 * g) + q * (2.0 * g).ln()
        + log_gamma(q).expect("admissible sigma keeps the Gamma argument positive");
    sphere_area(d) * 0.5 * log.exp()
}

/// `||(-Delta)^sigma (u ubar)||^2_{L^2(R^{1+d})}` for the Gaussian
/// `u0^ = exp(a|eta|^2 + b.eta)`.
///
/// The spatial integral is closed; time is integrated over `[-1, 1]`
/// directly and over `|t| > 1` in `w = 1/t`, where the integrand is
/// `w^{4 sigma + d - 2}` times a smooth function.
pub fn oracle_lhs_conjugate(a: C64, b: &[C64], sigma: f64, d: usize) -> Result<f64> {
    check_gaussian(a, b, d)?;
    EstimateSpec::conjugate(d, sigma)?;
    let p = 4.0 * sigma + d as f64 - 2.0;
    let eval = |panels: usize| -> Result<f64> {
        let inner = composite_legendre(-1.0, 1.0, 2 * panels, 16);
        let outer = composite_power_weighted(1.0, p, panels, 16)?;
        let mut terms: Vec<f64> = inner
            .nodes
            .iter()
            .zip(&inner.weights)
            .map(|(&t, &w)| w * conjugate_density(a, b, sigma, t))
            .collect();
        for (&w_, &wt) in outer.nodes.iter().zip(&outer.weights) {
            let t = 1.0 / w_;
            let f = conjugate_density(a, b, sigma, t) + conjugate_density(a, b, sigma, -t);
            // weight already carries w^p; divide it out of f w^{-2}
            terms.push(wt * f / (w_ * w_) / w_.powf(p));
        }
        Ok(pairwise_sum(&terms))
    };
    let mut panels = 4;
    let mut prev = eval(panels)?;
    loop {
        panels *= 2;
        let next = eval(panels)?;
        if (next - prev).abs() <= 1e-13 * next.abs() {
            return Ok(next);
        }
        if panels >= 512 {
            return Err(Error::Convergence(format!(
                "Gaussian time integral not settled: {prev} vs {next}"
            )));
        }
        prev = next;
    }
}

/// `|| |D|^beta (u u) ||^2` for the Gaussian `u0^ = exp(a|eta|^2 + b.eta)`,
/// from the energy-shell representation where the shell integrand does not
/// depend on the direction.
pub fn oracle_lhs_dispersive(a: C64, b: &[C64], beta: f64, d: usize) -> Result<f64> {
    check_gaussian(a, b, d)?;
    EstimateSpec::plain(d, beta)?;
    let df = d as f64;
    let kappa = -a.re;
    let b_re: Vec<f64> = b.iter().map(|z| z.re).collect();
    let s = sphere_area(d);
    let e = 2.0 * beta + df - 1.0;
    let log = (1.0 - 3.0 * df) * (2.0 * PI).ln() + (-2.0 * df - 2.0 * beta) * 2f64.ln()
        + df / 2.0 * (PI / kappa).ln()
        + dot(&b_re, &b_re) / kappa
        - e * kappa.ln()
        + log_gamma(e)?;
    Ok(s * s * 0.5 * log.exp())
}

/// Both sides of the estimate named by `spec` at the Gaussian `(a, b)`.
pub fn oracle_check(spec: &EstimateSpec, a: C64, b: &[C64]) -> Result<OracleResult> {
    spec.validate()?;
    let d = spec.d;
    let b_re: Vec<f64> = b.iter().map(|z| z.re).collect();
    let interaction = oracle_interaction(-2.0 * a.re, &b_re, spec.kernel_power(), d)?;
    let lhs = match spec.family {
        Family::Conjugate { sigma } => oracle_lhs_conjugate(a, b, sigma, d)?,
        Family::Plain { beta } => oracle_lhs_dispersive(a, b, beta, d)?,
    };
    Ok(OracleResult::new(lhs, interaction, spec.constant()?))
}
