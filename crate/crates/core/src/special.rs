//! Gamma function, real zeta-type functions and the sharp constants of the
//! bilinear estimates.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Largest dimension accepted by the constant formulas.
pub const MAX_DIM: usize = 64;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const STIRLING_SHIFT: f64 = 15.0;

/// `ln Γ(x)` for `x > 0`.
///
/// Arguments below 15 are shifted up with the recurrence and the Stirling
/// series is summed to eight terms, which is exhausted well below an ulp.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("x", x, "log_gamma needs a finite positive argument"));
    }
    Ok(log_gamma_unchecked(x))
}

pub(crate) fn log_gamma_unchecked(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    let mut shift = 1.0;
    let mut y = x;
    while y < STIRLING_SHIFT {
        shift *= y;
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2
                        * (1.0 / 1260.0
                            + inv2
                                * (-1.0 / 1680.0
                                    + inv2
                                        * (1.0 / 1188.0
                                            + inv2
                                                * (-691.0 / 360_360.0
                                                    + inv2
                                                        * (1.0 / 156.0
                                                            + inv2 * (-3617.0 / 122_400.0))))))));
    (y - 0.5) * y.ln() - y + LN_SQRT_2PI + series - shift.ln()
}

/// `Γ(x)` for `x > 0`.
pub fn gamma(x: f64) -> Result<f64> {
    log_gamma(x).map(f64::exp)
}

/// Cohen-Villegas-Zagier acceleration of `sum_k (-1)^k a_k`.
fn alternating_sum(a: impl Fn(usize) -> f64) -> f64 {
    const TERMS: usize = 40;
    let n = TERMS as f64;
    let mut d = (3.0 + 8f64.sqrt()).powf(n);
    d = 0.5 * (d + 1.0 / d);
    let mut b = -1.0;
    let mut c = -d;
    let mut s = 0.0;
    for k in 0..TERMS {
        c = b - c;
        s += c * a(k);
        let kf = k as f64;
        b *= (kf + n) * (kf - n) / ((kf + 0.5) * (kf + 1.0));
    }
    s / d
}

/// Riemann zeta function on the real line, `s != 1`.
pub fn riemann_zeta(s: f64) -> Result<f64> {
    if !s.is_finite() {
        return Err(domain("s", s, "zeta needs a finite argument"));
    }
    if s == 1.0 {
        return Err(domain("s", s, "zeta has a pole at s = 1"));
    }
    if s == 0.0 {
        return Ok(-0.5);
    }
    if s >= 0.5 {
        let eta = alternating_sum(|k| ((k + 1) as f64).powf(-s));
        // 1 - 2^{1-s}, accurate near the pole
        let denom = -((1.0 - s) * LN_2).exp_m1();
        return Ok(eta / denom);
    }
    // trivial zeros
    if s.fract() == 0.0 && (s as i64) % 2 == 0 {
        return Ok(0.0);
    }
    let t = 1.0 - s;
    let sin = (0.5 * PI * s).sin();
    let mag = s * LN_2 + (s - 1.0) * PI.ln() + log_gamma_unchecked(t);
    Ok(sin * mag.exp() * riemann_zeta(t)?)
}

/// Dirichlet beta function `sum_k (-1)^k (2k+1)^{-s}` on the real line.
pub fn dirichlet_beta(s: f64) -> Result<f64> {
    if !s.is_finite() {
        return Err(domain("s", s, "beta needs a finite argument"));
    }
    if s >= 0.5 {
        return Ok(alternating_sum(|k| ((2 * k + 1) as f64).powf(-s)));
    }
    let t = 1.0 - s;
    let cos = (0.5 * PI * s).cos();
    if cos.abs() < 1e-300 {
        return Ok(0.0);
    }
    // exact zeros at negative odd integers
    if s < 0.0 && s.fract() == 0.0 && (s as i64) % 2 != 0 {
        return Ok(0.0);
    }
    let mag = t * (2.0 / PI).ln() + log_gamma_unchecked(t);
    Ok(cos * mag.exp() * dirichlet_beta(t)?)
}

/// Surface measure of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    let h = 0.5 * d as f64;
    2.0 * (h * PI.ln() - log_gamma_unchecked(h)).exp()
}

fn check_dim(d: usize, min: usize) -> Result<()> {
    if d < min || d > MAX_DIM {
        return Err(domain(
            "d",
            d as f64,
            format!("dimension must lie in {min}..={MAX_DIM}"),
        ));
    }
    Ok(())
}

/// Threshold below which the conjugate estimate fails: `sigma > (1-d)/4`.
pub fn conjugate_threshold(d: usize) -> f64 {
    (1.0 - d as f64) / 4.0
}

/// Threshold below which the plain estimate fails: `beta > (1-d)/2`.
pub fn plain_threshold(d: usize) -> f64 {
    (1.0 - d as f64) / 2.0
}

/// Sharp constant of the conjugate estimate for general `sigma`.
///
/// Also meaningful for `d = 1`, where the Gamma ratio cancels and the value
/// is `1/(8 pi^2)` for every admissible `sigma`.
pub fn ot_general_constant(d: usize, sigma: f64) -> Result<f64> {
    check_dim(d, 1)?;
    let df = d as f64;
    let threshold = conjugate_threshold(d);
    if !(sigma > threshold) || !sigma.is_finite() {
        return Err(Error::BelowThreshold {
            family: "conjugate",
            d,
            exponent: sigma,
            threshold,
        });
    }
    let log = -3.0 * df * LN_2 + 0.5 * (1.0 - 5.0 * df) * PI.ln()
        + log_gamma_unchecked(2.0 * sigma + 0.5 * (df - 1.0))
        - if d == 1 {
            log_gamma_unchecked(2.0 * sigma)
        } else {
            log_gamma_unchecked(2.0 * sigma + df - 1.0)
        };
    Ok(log.exp())
}

/// Classical constant for the `L^2 x L^2` form of the estimate.
pub fn ot_classical_constant(d: usize) -> Result<f64> {
    check_dim(d, 1)?;
    let df = d as f64;
    Ok((-df * LN_2 + 0.5 * (2.0 - df) * PI.ln() - log_gamma_unchecked(0.5 * df)).exp())
}

/// Sharp constant of the plain-product estimate at `beta = 0`.
pub fn carneiro_constant(d: usize) -> Result<f64> {
    check_dim(d, 2)?;
    let df = d as f64;
    Ok(((2.0 - 4.0 * df) * LN_2 + 0.5 * (2.0 - 5.0 * df) * PI.ln()
        - log_gamma_unchecked(0.5 * df))
    .exp())
}

/// Sharp constant of the conjugate estimate at `sigma = (3-d)/4`.
pub fn pv_constant(d: usize) -> Result<f64> {
    check_dim(d, 2)?;
    let df = d as f64;
    Ok((-3.0 * df * LN_2 + 0.5 * (1.0 - 5.0 * df) * PI.ln()
        - log_gamma_unchecked(0.5 * (df + 1.0)))
    .exp())
}

/// Constant in `||u ubar||_{H^1-type}^2 <= K ||u0||^2 ||u0||_{H^1}^2`.
pub fn gradient_pair_constant(d: usize) -> Result<f64> {
    check_dim(d, 2)?;
    let df = d as f64;
    Ok((-df * LN_2 + 0.5 * (2.0 - df) * PI.ln() - log_gamma_unchecked(0.5 * (df + 2.0))).exp())
}

/// Common constant of the two endpoint plain-product inequalities.
pub fn plain_endpoint_constant(d: usize) -> Result<f64> {
    check_dim(d, 2)?;
    let df = d as f64;
    Ok((0.5 * (2.0 - 3.0 * df) * LN_2 + 0.5 * (2.0 - df) * PI.ln()
        - log_gamma_unchecked(0.5 * df))
    .exp())
}

/// Sharp constant `2^{-2 beta} C(d)` of the plain estimate.
pub fn plain_constant(d: usize, beta: f64) -> Result<f64> {
    let threshold = plain_threshold(d);
    if !(beta > threshold) || !beta.is_finite() {
        return Err(Error::BelowThreshold {
            family: "plain",
            d,
            exponent: beta,
            threshold,
        });
    }
    Ok((-2.0 * beta * LN_2).exp() * carneiro_constant(d)?)
}

/// Constant of the one-dimensional plain identity for data with separated
/// Fourier supports: `1 / (2 (2^{beta+1} pi)^2)`.
pub fn plain_identity_constant_1d(beta: f64) -> f64 {
    let base = (beta + 1.0).exp2() * PI;
    0.5 / (base * base)
}

/// `|OT(d,0) - C(d)| / C(d)`.
pub fn check_duplication_consistency(d: usize) -> Result<f64> {
    check_dim(d, 2)?;
    let ot = ot_general_constant(d, 0.0)?;
    let c = carneiro_constant(d)?;
    Ok((ot - c).abs() / c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantFamily {
    OtGeneral,
    OtClassical,
    Carneiro,
    PlanchonVega,
    Ctrick,
    C15a,
    C15b,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpConstant {
    pub family: ConstantFamily,
    pub d: usize,
    pub exponent: Option<f64>,
    pub value: f64,
}

impl SharpConstant {
    pub fn evaluate(family: ConstantFamily, d: usize, exponent: Option<f64>) -> Result<Self> {
        let value = match family {
            ConstantFamily::OtGeneral => {
                let sigma = exponent.ok_or_else(|| {
                    Error::Precondition("OT_general needs an exponent".into())
                })?;
                ot_general_constant(d, sigma)?
            }
            ConstantFamily::OtClassical => ot_classical_constant(d)?,
            ConstantFamily::Carneiro => carneiro_constant(d)?,
            ConstantFamily::PlanchonVega => pv_constant(d)?,
            ConstantFamily::Ctrick => gradient_pair_constant(d)?,
            ConstantFamily::C15a | ConstantFamily::C15b => plain_endpoint_constant(d)?,
        };
        Ok(SharpConstant {
            family,
            d,
            exponent,
            value,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_gamma_small_table() {
        assert_relative_eq!(log_gamma(0.5).unwrap(), 0.5 * PI.ln(), max_relative = 1e-14);
        assert_eq!(log_gamma(1.0).unwrap(), 0.0);
        assert_relative_eq!(log_gamma(5.0).unwrap(), 24f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(
            log_gamma(1.5).unwrap(),
            (0.5 * PI.sqrt()).ln(),
            max_relative = 1e-13
        );
        // 99! through exact log-sum
        let ln99: f64 = (1..100).map(|k| (k as f64).ln()).sum();
        assert_relative_eq!(log_gamma(100.0).unwrap(), ln99, max_relative = 1e-14);
        let tiny = log_gamma(1e-8).unwrap();
        assert_relative_eq!(tiny, -(1e-8f64).ln() - 0.577_215_664_901_532_9e-8, max_relative = 1e-13);
    }

    #[test]
    fn log_gamma_rejects_nonpositive() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
        assert!(log_gamma(f64::NAN).is_err());
    }

    #[test]
    fn log_gamma_recurrence() {
        for i in 1..200 {
            let x = 0.037 * i as f64;
            let lhs = log_gamma(x + 1.0).unwrap();
            let rhs = log_gamma(x).unwrap() + x.ln();
            assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + lhs.abs()), "x = {x}");
        }
    }

    #[test]
    fn zeta_known_values() {
        assert_relative_eq!(riemann_zeta(2.0).unwrap(), PI * PI / 6.0, max_relative = 1e-14);
        assert_relative_eq!(riemann_zeta(4.0).unwrap(), PI.powi(4) / 90.0, max_relative = 1e-14);
        assert_relative_eq!(riemann_zeta(-1.0).unwrap(), -1.0 / 12.0, max_relative = 1e-13);
        assert_relative_eq!(riemann_zeta(-3.0).unwrap(), 1.0 / 120.0, max_relative = 1e-12);
        assert_eq!(riemann_zeta(0.0).unwrap(), -0.5);
        assert_eq!(riemann_zeta(-2.0).unwrap(), 0.0);
        assert_relative_eq!(
            riemann_zeta(0.5).unwrap(),
            -1.460_354_508_809_586_8,
            max_relative = 1e-13
        );
        assert!(riemann_zeta(1.0).is_err());
    }

    #[test]
    fn beta_known_values() {
        assert_relative_eq!(dirichlet_beta(1.0).unwrap(), PI / 4.0, max_relative = 1e-14);
        assert_relative_eq!(
            dirichlet_beta(2.0).unwrap(),
            0.915_965_594_177_219_0,
            max_relative = 1e-14
        );
        assert_relative_eq!(dirichlet_beta(3.0).unwrap(), PI.powi(3) / 32.0, max_relative = 1e-14);
        assert_relative_eq!(dirichlet_beta(0.0).unwrap(), 0.5, max_relative = 1e-14);
        assert_eq!(dirichlet_beta(-1.0).unwrap(), 0.0);
        // beta(-2) = -E_2 / 2 ... Euler number E_2 = -1
        assert_relative_eq!(dirichlet_beta(-2.0).unwrap(), -0.5, max_relative = 1e-12);
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(1), 2.0, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(2), 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(3), 4.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(4), 2.0 * PI * PI, max_relative = 1e-14);
    }

    #[test]
    fn constants_at_d2() {
        let c = 2f64.powi(-6) * PI.powi(-4);
        assert_relative_eq!(ot_general_constant(2, 0.0).unwrap(), c, max_relative = 1e-14);
        assert_relative_eq!(c, 1.604_059_7e-4, max_relative = 1e-6);
        assert_relative_eq!(
            ot_general_constant(2, 0.25).unwrap(),
            2f64.powi(-5) * PI.powi(-5),
            max_relative = 1e-14
        );
        assert_relative_eq!(carneiro_constant(2).unwrap(), c, max_relative = 1e-14);
        assert_relative_eq!(pv_constant(2).unwrap(), 2f64.powi(-5) * PI.powi(-5), max_relative = 1e-14);
        assert_relative_eq!(pv_constant(3).unwrap(), 2f64.powi(-9) * PI.powi(-7), max_relative = 1e-14);
    }

    #[test]
    fn classical_constants() {
        assert_relative_eq!(ot_classical_constant(1).unwrap(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(ot_classical_constant(2).unwrap(), 0.25, max_relative = 1e-15);
        assert_relative_eq!(ot_classical_constant(4).unwrap(), 1.0 / (16.0 * PI), max_relative = 1e-14);
    }

    #[test]
    fn one_dimensional_conjugate_constant() {
        for sigma in [0.1, 0.25, 0.5, 1.3] {
            assert_relative_eq!(
                ot_general_constant(1, sigma).unwrap(),
                1.0 / (8.0 * PI * PI),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn threshold_errors() {
        assert!(matches!(
            ot_general_constant(3, -0.5),
            Err(Error::BelowThreshold { .. })
        ));
        assert!(plain_constant(2, -0.5).is_err());
        assert!(carneiro_constant(1).is_err());
        assert!(pv_constant(1).is_err());
        assert!(ot_general_constant(65, 0.0).is_err());
    }

    #[test]
    fn blow_up_at_threshold() {
        for d in 2..=10 {
            let t = conjugate_threshold(d);
            let near = ot_general_constant(d, t + 1e-6).unwrap();
            let far = ot_general_constant(d, t + 1e-2).unwrap();
            assert!(near > 100.0 * far, "d = {d}");
        }
    }

    #[test]
    fn endpoint_constant_relations() {
        for d in 2..=10 {
            let two_pi_2d = (2.0 * PI).powi(2 * d as i32);
            let df = d as f64;
            // gradient-pair constant from the sigma = (4-d)/4 member
            let s = ot_general_constant(d, (4.0 - df) / 4.0).unwrap();
            assert_relative_eq!(
                2.0 * two_pi_2d * s,
                gradient_pair_constant(d).unwrap(),
                max_relative = 1e-12
            );
            // endpoint plain constants from beta = (2-d)/4 and (4-d)/4
            let b0 = plain_constant(d, (2.0 - df) / 4.0).unwrap() * two_pi_2d;
            let b1 = plain_constant(d, (4.0 - df) / 4.0).unwrap() * 2.0 * two_pi_2d;
            assert_relative_eq!(b0, plain_endpoint_constant(d).unwrap(), max_relative = 1e-12);
            assert_relative_eq!(b1, plain_endpoint_constant(d).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn sharp_constant_dispatch() {
        let c = SharpConstant::evaluate(ConstantFamily::OtGeneral, 2, Some(0.0)).unwrap();
        assert_relative_eq!(c.value, carneiro_constant(2).unwrap(), max_relative = 1e-14);
        assert!(SharpConstant::evaluate(ConstantFamily::OtGeneral, 2, None).is_err());
        let e = SharpConstant::evaluate(ConstantFamily::C15a, 2, None).unwrap();
        assert_relative_eq!(e.value, 0.25, max_relative = 1e-14);
    }

    #[test]
    fn identity_constant_1d() {
        assert_relative_eq!(plain_identity_constant_1d(0.0), 1.0 / (8.0 * PI * PI), max_relative = 1e-15);
    }
}
