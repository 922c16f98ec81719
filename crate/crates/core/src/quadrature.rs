//! One-dimensional quadrature rules, deterministic summation and the
//! lattice corrections used for radially singular weights on grids.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::special::{dirichlet_beta, log_gamma_unchecked, riemann_zeta, sphere_area};

/// Pairwise (cascade) summation. The summation tree depends only on the
/// length, so equal inputs always give bit-identical results.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `pairwise_sum` of `f(0), ..., f(n - 1)` without materialising the terms.
pub fn pairwise_sum_by(n: usize, f: &impl Fn(usize) -> f64) -> f64 {
    fn go(lo: usize, hi: usize, f: &impl Fn(usize) -> f64) -> f64 {
        if hi - lo <= 16 {
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            return s;
        }
        let mid = lo + (hi - lo) / 2;
        go(lo, mid, f) + go(mid, hi, f)
    }
    go(0, n, f)
}

/// A rule `sum_i w_i f(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn apply(&self, f: impl Fn(f64) -> f64) -> f64 {
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .collect();
        pairwise_sum(&terms)
    }

    /// Map a rule on `[-1, 1]` to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> Rule {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        Rule {
            nodes: self.nodes.iter().map(|x| c + r * x).collect(),
            weights: self.weights.iter().map(|w| r * w).collect(),
        }
    }

    fn extend(&mut self, other: Rule) {
        self.nodes.extend(other.nodes);
        self.weights.extend(other.weights);
    }
}

/// Gauss-Legendre rule with `n` nodes on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Jacobi rule for the weight `(1-x)^alpha (1+x)^beta` on `[-1, 1]`
/// by the Golub-Welsch construction.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Result<Rule> {
    if !(alpha > -1.0) || !(beta > -1.0) {
        return Err(domain("alpha/beta", alpha.min(beta), "Jacobi weights need exponents > -1"));
    }
    if n == 0 {
        return Err(domain("n", 0.0, "at least one node"));
    }
    let ab = alpha + beta;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    for k in 0..n {
        let kf = k as f64;
        diag[k] = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        if k + 1 < n {
            let j = kf + 1.0;
            let t = 2.0 * j + ab;
            // (j + ab) / (t - 1) is 1 at j = 1; written out to survive ab = -1
            let b = if k == 0 {
                4.0 * (1.0 + alpha) * (1.0 + beta) / (t * t * (t + 1.0))
            } else {
                4.0 * j * (j + alpha) * (j + beta) * (j + ab) / (t * t * (t + 1.0) * (t - 1.0))
            };
            off[k] = b.sqrt();
        }
    }
    let (vals, first) = symmetric_tridiagonal_eigen(&diag, &off)?;
    let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + log_gamma_unchecked(alpha + 1.0)
        + log_gamma_unchecked(beta + 1.0)
        - log_gamma_unchecked(ab + 2.0))
    .exp();
    let mut pairs: Vec<(f64, f64)> = vals
        .into_iter()
        .zip(first)
        .map(|(x, v)| (x, mu0 * v * v))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Eigenvalues and first eigenvector components of a symmetric tridiagonal
/// matrix (implicit QL with Wilkinson shifts).
fn symmetric_tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.resize(n, 0.0);
    // z holds the first row of the eigenvector matrix
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    let mut zfull = vec![vec![0.0; n]; n];
    for (i, row) in zfull.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Convergence("tridiagonal eigensolver".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in zfull.iter_mut() {
                    let fz = row[i + 1];
                    row[i + 1] = s * row[i] + c * fz;
                    row[i] = c * row[i] - s * fz;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    for k in 0..n {
        z[k] = zfull[0][k];
    }
    Ok((d, z))
}

/// Composite Gauss-Legendre on `[a, b]` with `panels` equal panels.
pub fn composite_legendre(a: f64, b: f64, panels: usize, order: usize) -> Rule {
    let base = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut rule = Rule {
        nodes: Vec::with_capacity(panels * order),
        weights: Vec::with_capacity(panels * order),
    };
    for k in 0..panels {
        let lo = a + k as f64 * h;
        rule.extend(base.mapped(lo, lo + h));
    }
    rule
}

/// Composite rule for `int_0^len s^power f(s) ds`. The panel touching the
/// origin uses Gauss-Jacobi, the rest Gauss-Legendre with the weight folded
/// into the returned weights.
pub fn composite_power_weighted(len: f64, power: f64, panels: usize, order: usize) -> Result<Rule> {
    if !(power > -1.0) {
        return Err(domain("power", power, "weight s^power must be integrable at 0"));
    }
    let h = len / panels as f64;
    let jac = gauss_jacobi(order, 0.0, power)?;
    let scale = (0.5 * h).powf(power + 1.0);
    let mut rule = Rule {
        nodes: jac.nodes.iter().map(|x| 0.5 * h * (1.0 + x)).collect(),
        weights: jac.weights.iter().map(|w| w * scale).collect(),
    };
    if panels > 1 {
        let mut rest = composite_legendre(h, len, panels - 1, order);
        for (x, w) in rest.nodes.iter().zip(rest.weights.iter_mut()) {
            *w *= x.powf(power);
        }
        rule.extend(rest);
    }
    Ok(rule)
}

/// Double-exponential quadrature on `[a, b]`; tolerates integrable endpoint
/// singularities. The integrand is never evaluated at `a` or `b`.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    const T_MAX: f64 = 4.5;
    let r = 0.5 * (b - a);
    let half_pi = 0.5 * PI;
    let term = |t: f64| -> f64 {
        let v = half_pi * t.sinh();
        let ch = v.abs().cosh();
        let w = half_pi * t.cosh() / (ch * ch);
        let gap = 2.0 * r / (1.0 + (2.0 * v.abs()).exp());
        let x = if t < 0.0 { a + gap } else { b - gap };
        if gap <= 0.0 || x <= a || x >= b || w == 0.0 {
            return 0.0;
        }
        r * w * f(x)
    };
    let mut h = 0.5;
    let mut samples = vec![term(0.0)];
    let mut k = 1;
    while k as f64 * h <= T_MAX {
        samples.push(term(k as f64 * h));
        samples.push(term(-(k as f64) * h));
        k += 1;
    }
    let mut sum = pairwise_sum(&samples);
    let mut estimate = h * sum;
    for _level in 0..12 {
        h *= 0.5;
        let mut fresh = Vec::new();
        let mut j = 1;
        while j as f64 * h <= T_MAX {
            let t = j as f64 * h;
            fresh.push(term(t));
            fresh.push(term(-t));
            j += 2;
        }
        sum += pairwise_sum(&fresh);
        let next = h * sum;
        if (next - estimate).abs() <= rel_tol * next.abs() || next == estimate {
            return Ok(next);
        }
        estimate = next;
    }
    Err(Error::Convergence(format!(
        "tanh-sinh on [{a}, {b}] did not reach relative tolerance {rel_tol}"
    )))
}

/// Epstein zeta of the integer lattice, `sum_{k != 0} |k|^{-s}`, continued
/// analytically. Available in one and two dimensions.
pub fn lattice_zeta(d: usize, s: f64) -> Result<f64> {
    match d {
        1 => Ok(2.0 * riemann_zeta(s)?),
        2 => Ok(4.0 * riemann_zeta(0.5 * s)? * dirichlet_beta(0.5 * s)?),
        _ => Err(Error::UnsupportedDimension {
            d,
            reason: "lattice zeta values are only tabulated for d <= 2".into(),
        }),
    }
}

/// Origin corrections for the trapezoidal sum of `|w|^gamma G(w)` on the
/// lattice `h Z^d` (origin term omitted from the plain sum).
///
/// The integral is approximated by
/// `h^d [ sum_{k != 0} |hk|^gamma G(hk) + origin G(0) + laplacian (Delta G)(0) + quartic G''''(0) ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularCorrection {
    pub origin: f64,
    pub laplacian: f64,
    /// Coefficient of the fourth derivative at the origin (one dimension only).
    pub quartic: f64,
}

impl SingularCorrection {
    pub fn new(d: usize, gamma: f64, h: f64) -> Result<Self> {
        if !(gamma > -(d as f64)) {
            return Err(domain("gamma", gamma, "weight |w|^gamma not locally integrable"));
        }
        let even_integer = gamma >= 0.0 && gamma.fract() == 0.0 && (gamma as i64) % 2 == 0;
        if even_integer {
            return Ok(SingularCorrection {
                origin: if gamma == 0.0 { 1.0 } else { 0.0 },
                laplacian: 0.0,
                quartic: 0.0,
            });
        }
        if d <= 2 {
            let z0 = lattice_zeta(d, -gamma)?;
            let z2 = lattice_zeta(d, -gamma - 2.0)?;
            return Ok(SingularCorrection {
                origin: -z0 * h.powf(gamma),
                laplacian: -z2 * h.powf(gamma + 2.0) / (2.0 * d as f64),
                quartic: if d == 1 {
                    -lattice_zeta(1, -gamma - 4.0)? * h.powf(gamma + 4.0) / 24.0
                } else {
                    0.0
                },
            });
        }
        // ball of the cell volume around the origin, constant density
        let df = d as f64;
        let ball = sphere_area(d) / df;
        let rho = (1.0 / ball).powf(1.0 / df) * h;
        Ok(SingularCorrection {
            origin: df / (gamma + df) * rho.powf(gamma),
            laplacian: 0.0,
            quartic: 0.0,
        })
    }
}

/// Weight `|w|^gamma`, zero at the origin.
pub fn power_weight(r: f64, gamma: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else if gamma == 0.0 {
        1.0
    } else if gamma == 2.0 {
        r * r
    } else {
        r.powf(gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials() {
        let rule = gauss_legendre(16);
        for k in 0..32 {
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            let got = rule.apply(|x| x.powi(k as i32));
            assert!((got - exact).abs() < 1e-14, "k = {k}: {got} vs {exact}");
        }
        let r1 = gauss_legendre(1);
        assert_eq!(r1.nodes, vec![0.0]);
        assert_relative_eq!(r1.weights[0], 2.0);
    }

    #[test]
    fn jacobi_moments() {
        for &beta in &[-0.6, -0.25, 0.0, 0.5, 1.0, 2.7] {
            let rule = gauss_jacobi(16, 0.0, beta).unwrap();
            // int_{-1}^{1} (1+x)^beta (1+x)^k dx = 2^{beta+k+1}/(beta+k+1)
            for k in 0..20 {
                let exact = 2f64.powf(beta + k as f64 + 1.0) / (beta + k as f64 + 1.0);
                let got = rule.apply(|x| (1.0 + x).powi(k));
                assert_relative_eq!(got, exact, max_relative = 1e-12);
            }
        }
        let legendre = gauss_jacobi(12, 0.0, 0.0).unwrap();
        let direct = gauss_legendre(12);
        for (a, b) in legendre.nodes.iter().zip(&direct.nodes) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn power_weighted_composite() {
        for &p in &[-0.5, 0.0, 0.3, 1.0] {
            let rule = composite_power_weighted(2.0, p, 4, 16).unwrap();
            let got = rule.apply(|s| (-s).exp());
            // int_0^2 s^p e^{-s} ds by a fine tanh-sinh reference
            let reference = tanh_sinh(|s| s.powf(p) * (-s).exp(), 0.0, 2.0, 1e-15).unwrap();
            assert_relative_eq!(got, reference, max_relative = 1e-13);
        }
    }

    #[test]
    fn tanh_sinh_endpoint_singularities() {
        let v = tanh_sinh(|x| x.powf(-0.5), 0.0, 1.0, 1e-14).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-12);
        let v = tanh_sinh(|x| (1.0 - x * x).sqrt(), -1.0, 1.0, 1e-14).unwrap();
        assert_relative_eq!(v, 0.5 * PI, max_relative = 1e-13);
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
        let ys: Vec<f64> = (0..1001).map(|k| (k as f64 * 0.3).sin()).collect();
        assert_eq!(pairwise_sum_by(ys.len(), &|i| ys[i]), pairwise_sum(&ys));
    }

    #[test]
    fn lattice_zeta_at_zero_is_minus_one() {
        assert_relative_eq!(lattice_zeta(1, 0.0).unwrap(), -1.0);
        assert_relative_eq!(lattice_zeta(2, 0.0).unwrap(), -1.0, max_relative = 1e-14);
        assert!(lattice_zeta(3, 0.0).is_err());
    }

    fn corrected_gaussian_moment(d: usize, gamma: f64, h: f64) -> f64 {
        // int |w|^gamma e^{-|w|^2} dw on the lattice h Z^d
        let corr = SingularCorrection::new(d, gamma, h).unwrap();
        let m = (9.0 / h).ceil() as i64;
        let mut sum = 0.0;
        if d == 1 {
            for k in -m..=m {
                let w = (k as f64 * h).abs();
                sum += power_weight(w, gamma) * (-w * w).exp();
            }
        } else {
            for i in -m..=m {
                for j in -m..=m {
                    let r2 = ((i * i + j * j) as f64) * h * h;
                    sum += power_weight(r2.sqrt(), gamma) * (-r2).exp();
                }
            }
        }
        // G = e^{-|w|^2}: G(0) = 1 and Laplacian -2d
        let h_d = h.powi(d as i32);
        h_d * (sum + corr.origin - 2.0 * d as f64 * corr.laplacian + 12.0 * corr.quartic)
    }

    #[test]
    fn singular_corrections_are_high_order() {
        for &(d, gamma) in &[(1usize, -0.6), (1, 1.0), (1, 0.5), (2, -0.5), (2, 1.0), (2, 0.3)] {
            let df = d as f64;
            let exact = 0.5 * sphere_area(d) * crate::special::gamma(0.5 * (gamma + df)).unwrap();
            let got = corrected_gaussian_moment(d, gamma, 0.1);
            assert_relative_eq!(got, exact, max_relative = 1e-7);
        }
    }
}
