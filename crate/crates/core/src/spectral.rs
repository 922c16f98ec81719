//! Space-time norms of bilinear expressions in free Schrodinger waves.
//!
//! The time axis is split at `|t| = T`. Inside the window the waves are
//! propagated spectrally and the spatial integral is taken on the grid.
//! Outside it the lens transform
//! `u(t,x) = (4 pi i t)^{-d/2} e^{i|x|^2/4t} w^(x/2t)`, `w = e^{is|y|^2} u0`,
//! `s = 1/(4t)`, maps the tail `|t| > T` onto `0 < |s| < 1/(4T)`, where the
//! integrand is smooth apart from an explicit power `|s|^p`. That power is
//! integrated exactly with Gauss-Jacobi panels, so no truncation of the time
//! axis is ever made.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{centered_dft, GridField, GridGeometry, Side};
use crate::quadrature::{
    composite_legendre, composite_power_weighted, pairwise_sum, pairwise_sum_by, power_weight, SingularCorrection,
};
use crate::weights::{EstimateSpec, Family};

const PANEL_ORDER: usize = 16;

/// Relative amplitude at which space-time extents are measured. Aliased or
/// wrapped tails of this size only meet other tails, so the error they cause
/// in a quadratic density is of order its square.
pub const SPACETIME_EPS: f64 = 1e-8;
const MAX_NODES: usize = 1 << 13;

/// Time discretisation on top of a spatial grid.
///
/// `n_t` Gauss nodes cover the window `[-T, T]`; the two lens intervals get
/// `n_t / 2` nodes each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub geometry: GridGeometry,
    pub n_t: usize,
    pub window: f64,
    pub adaptive: bool,
    pub tol: f64,
}

/// Physical and frequency radii holding a pair of data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extents {
    pub fourier: f64,
    pub physical: f64,
}

impl Extents {
    pub fn of_fields(fields: &[&GridField]) -> Extents {
        let mut out = Extents {
            fourier: 0.0,
            physical: 0.0,
        };
        for f in fields {
            out.fourier = out.fourier.max(f.to_fourier().extent(SPACETIME_EPS));
            out.physical = out.physical.max(f.to_physical().extent(SPACETIME_EPS));
        }
        out
    }
}

impl SpaceTimeGrid {
    /// Window range `[T_lo, T_hi]` in which neither the direct nor the lens
    /// picture aliases, for integrands of degree `2 m` in the waves.
    fn window_range(geometry: GridGeometry, ext: Extents, m: usize) -> Result<(f64, f64)> {
        let l = geometry.half_width;
        let omega = geometry.nyquist();
        let (k, x0) = (ext.fourier, ext.physical);
        if k == 0.0 || x0 == 0.0 {
            return Err(Error::Precondition("data vanish on the grid".into()));
        }
        let mf = m as f64;
        let t_hi = (l - x0) / (2.0 * k);
        let t_lo = if omega > k { x0 / (2.0 * (omega - k)) } else { f64::INFINITY };
        if l < mf * x0 || omega < mf * k || t_lo > t_hi {
            let want_l = (mf * x0).max(2.0 * x0);
            let want_omega = (mf * k).max(2.0 * k);
            return Err(Error::Resolution {
                reason: format!(
                    "space-time integrals of degree {} need L >= {:.3} and Nyquist >= {:.3}; grid has L = {l:.3}, Nyquist = {omega:.3}",
                    2 * m,
                    want_l,
                    want_omega
                ),
                suggested_l: want_l.max(l),
                suggested_n: crate::datum::points_for(want_l.max(l), want_omega * 1.02),
            });
        }
        Ok((t_lo, t_hi))
    }

    /// Choose the window for the given data automatically.
    pub fn fit(fields: &[&GridField], degree: usize) -> Result<SpaceTimeGrid> {
        let geometry = fields
            .first()
            .ok_or_else(|| Error::Precondition("no data".into()))?
            .geometry;
        let ext = Extents::of_fields(fields);
        SpaceTimeGrid::fit_extents(geometry, ext, degree)
    }

    pub fn fit_extents(geometry: GridGeometry, ext: Extents, degree: usize) -> Result<SpaceTimeGrid> {
        let (lo, hi) = SpaceTimeGrid::window_range(geometry, ext, degree)?;
        Ok(SpaceTimeGrid {
            geometry,
            n_t: 32,
            window: (lo * hi).sqrt(),
            adaptive: true,
            tol: 1e-11,
        })
    }

    pub fn with_nodes(mut self, n_t: usize) -> Self {
        self.n_t = n_t;
        self
    }

    pub fn fixed(mut self) -> Self {
        self.adaptive = false;
        self
    }

    fn validate(&self, fields: &[&GridField], degree: usize) -> Result<()> {
        if !self.n_t.is_power_of_two() || self.n_t < PANEL_ORDER {
            return Err(Error::Precondition(format!(
                "n_t = {} must be a power of two >= {PANEL_ORDER}",
                self.n_t
            )));
        }
        if !(self.window > 0.0) {
            return Err(Error::Precondition("time window must be positive".into()));
        }
        for f in fields {
            if f.geometry != self.geometry {
                return Err(Error::Mismatch("data and space-time grid differ in geometry".into()));
            }
        }
        let ext = Extents::of_fields(fields);
        let (lo, hi) = SpaceTimeGrid::window_range(self.geometry, ext, degree)?;
        if self.window < lo * (1.0 - 1e-9) || self.window > hi * (1.0 + 1e-9) {
            return Err(Error::Resolution {
                reason: format!(
                    "time window T = {} outside the alias-free range [{lo:.4}, {hi:.4}]",
                    self.window
                ),
                suggested_l: self.geometry.half_width,
                suggested_n: self.geometry.n,
            });
        }
        Ok(())
    }
}

/// Value of a time integral together with the node count that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeIntegral {
    pub value: f64,
    pub n_t: usize,
    /// Relative change against the previous node count (0 when not adaptive).
    pub change: f64,
}

/// Something integrated over all of `R_t`: a density inside the window and
/// the lens density (without its `|s|^p` factor) outside.
pub(crate) trait TimeDensity: Sync {
    fn direct(&self, t: f64) -> f64;
    fn lens(&self, s: f64) -> f64;
    fn lens_power(&self) -> f64;
}

/// One node of the full time rule: a point of the window (`lens == false`)
/// or a lens point `s`, with its weight.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TimeNode {
    pub x: f64,
    pub weight: f64,
    pub lens: bool,
}

/// Nodes for `n_t` direct points on `[-window, window]` and `n_t / 2` lens
/// points on each side, for a lens density carrying `|s|^lens_power`.
pub(crate) fn time_nodes(lens_power: f64, window: f64, n_t: usize) -> Result<Vec<TimeNode>> {
    let direct = composite_legendre(-window, window, n_t / PANEL_ORDER, PANEL_ORDER);
    // A lens power <= -1 only arises for data whose lens density vanishes at
    // s = 0 (separated frequency supports); the even part of the density is
    // then O(s^2) and that factor is moved into the weight.
    let p = lens_power;
    let shift = if p <= -1.0 { 2.0 } else { 0.0 };
    let lens = composite_power_weighted(0.25 / window, p + shift, (n_t / (2 * PANEL_ORDER)).max(1), PANEL_ORDER)?;
    let mut nodes = Vec::with_capacity(direct.len() + 2 * lens.len());
    for (&t, &w) in direct.nodes.iter().zip(&direct.weights) {
        nodes.push(TimeNode { x: t, weight: w, lens: false });
    }
    for (&s, &w) in lens.nodes.iter().zip(&lens.weights) {
        let w = w / s.powf(shift);
        nodes.push(TimeNode { x: s, weight: w, lens: true });
        nodes.push(TimeNode { x: -s, weight: w, lens: true });
    }
    Ok(nodes)
}

fn integrate_once(density: &impl TimeDensity, window: f64, n_t: usize) -> Result<f64> {
    let nodes = time_nodes(density.lens_power(), window, n_t)?;
    let terms: Vec<f64> = nodes
        .par_iter()
        .map(|node| {
            if node.lens {
                node.weight * density.lens(node.x)
            } else {
                node.weight * density.direct(node.x)
            }
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

pub(crate) fn integrate_time(density: &impl TimeDensity, st: &SpaceTimeGrid) -> Result<TimeIntegral> {
    let mut n_t = st.n_t;
    let mut value = integrate_once(density, st.window, n_t)?;
    if !st.adaptive {
        return Ok(TimeIntegral {
            value,
            n_t,
            change: 0.0,
        });
    }
    loop {
        if 2 * n_t > MAX_NODES {
            return Err(Error::Convergence(format!(
                "time quadrature still changing at {n_t} nodes"
            )));
        }
        n_t *= 2;
        let next = integrate_once(density, st.window, n_t)?;
        let change = (next - value).abs() / next.abs().max(f64::MIN_POSITIVE);
        value = next;
        if change <= st.tol {
            return Ok(TimeIntegral {
                value,
                n_t: n_t / 2,
                change,
            });
        }
    }
}

/// A separable multiplier `prod_k a(x_k)` stored by its axis factor.
#[derive(Debug, Clone)]
pub(crate) struct AxisTable {
    d: usize,
    n: usize,
    axis: Vec<C64>,
}

impl AxisTable {
    /// `scale^d e^{i c |x|^2}` on one side of the grid.
    pub fn chirp(geometry: GridGeometry, side: Side, c: f64, scale: f64) -> AxisTable {
        let n = geometry.n;
        let h = geometry.spacing(side);
        let axis = (0..n)
            .map(|j| {
                let x = (j as f64 - (n / 2) as f64) * h;
                C64::from_polar(scale, c * x * x)
            })
            .collect();
        AxisTable { d: geometry.d, n, axis }
    }

    /// `dst = src * table`.
    pub fn apply(&self, src: &[C64], dst: &mut [C64]) {
        let n = self.n;
        let a = &self.axis;
        match self.d {
            1 => {
                for ((d, s), f) in dst.iter_mut().zip(src).zip(a) {
                    *d = s * f;
                }
            }
            2 => {
                for (i, (drow, srow)) in dst.chunks_mut(n).zip(src.chunks(n)).enumerate() {
                    for ((d, s), f) in drow.iter_mut().zip(srow).zip(a) {
                        *d = s * (a[i] * f);
                    }
                }
            }
            _ => {
                for (ij, (drow, srow)) in dst.chunks_mut(n).zip(src.chunks(n)).enumerate() {
                    let outer = a[ij / n] * a[ij % n];
                    for ((d, s), f) in drow.iter_mut().zip(srow).zip(a) {
                        *d = s * (outer * f);
                    }
                }
            }
        }
    }
}

thread_local! {
    static POOL: RefCell<Vec<Vec<C64>>> = const { RefCell::new(Vec::new()) };
}

/// Grid-sized scratch buffer recycled through a per-thread pool. Fresh
/// allocations of this size are mapped and faulted in page by page, which
/// costs more than the transforms at every time node.
pub(crate) struct Buf(Vec<C64>);

impl Buf {
    pub fn new(len: usize) -> Buf {
        let mut v = POOL.with(|p| p.borrow_mut().pop()).unwrap_or_default();
        v.clear();
        v.resize(len, C64::new(0.0, 0.0));
        Buf(v)
    }
}

impl Drop for Buf {
    fn drop(&mut self) {
        let v = std::mem::take(&mut self.0);
        POOL.with(|p| {
            let mut p = p.borrow_mut();
            if p.len() < 16 {
                p.push(v);
            }
        });
    }
}

impl Deref for Buf {
    type Target = [C64];
    fn deref(&self) -> &[C64] {
        &self.0
    }
}

impl DerefMut for Buf {
    fn deref_mut(&mut self) -> &mut [C64] {
        &mut self.0
    }
}

/// `int |w|^gamma G(w) dw` over one grid, with the origin corrected.
///
/// The corrected rule is linear in the samples of `G`, so it is stored as a
/// single weight vector.
#[derive(Debug, Clone)]
pub(crate) struct SingularSum {
    weights: Vec<f64>,
}

impl SingularSum {
    pub fn new(geometry: GridGeometry, side: Side, gamma: f64) -> Result<Self> {
        let h = geometry.spacing(side);
        let c = SingularCorrection::new(geometry.d, gamma, h)?;
        let cell = geometry.cell(side);
        let mut w: Vec<f64> = geometry
            .squared_radii(side)
            .iter()
            .map(|&r2| power_weight(r2.sqrt(), gamma))
            .collect();
        let at = |o: &[i64]| geometry.index_of(o).expect("grid has >= 4 points");
        let origin = geometry.origin();
        w[origin] += c.origin;
        if c.quartic != 0.0 {
            // one dimension: fourth-order stencils for the second and fourth derivative
            let h2 = 12.0 * h * h;
            let h4 = h.powi(4);
            for (off, lap, quart) in [(1i64, 16.0, -4.0), (2, -1.0, 1.0)] {
                for o in [-off, off] {
                    w[at(&[o])] += c.laplacian * lap / h2 + c.quartic * quart / h4;
                }
            }
            w[origin] += c.laplacian * -30.0 / h2 + c.quartic * 6.0 / h4;
        } else if c.laplacian != 0.0 {
            for axis in 0..geometry.d {
                for step in [-1i64, 1] {
                    let mut o = [0i64; 3];
                    o[axis] = step;
                    w[at(&o[..geometry.d])] += c.laplacian / (h * h);
                }
            }
            w[origin] -= 2.0 * geometry.d as f64 * c.laplacian / (h * h);
        }
        w.iter_mut().for_each(|x| *x *= cell);
        Ok(SingularSum { weights: w })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn apply(&self, g: &[f64]) -> f64 {
        pairwise_sum_by(g.len(), &|i| g[i] * self.weights[i])
    }

    /// `apply` on `|z|^2`.
    pub fn apply_norm(&self, z: &[C64]) -> f64 {
        pairwise_sum_by(z.len(), &|i| z[i].norm_sqr() * self.weights[i])
    }
}

/// Shared data for densities built from two initial data.
///
/// Transforms inside the densities are unscaled; the grid factors are folded
/// into the chirp tables and the final constants.
struct Pair {
    geometry: GridGeometry,
    u_hat: Vec<C64>,
    v_hat: Vec<C64>,
    u_phys: Vec<C64>,
    v_phys: Vec<C64>,
    same: bool,
}

impl Pair {
    fn new(u0: &GridField, v0: &GridField) -> Pair {
        let uf = u0.to_fourier();
        let vf = v0.to_fourier();
        let same = uf.samples == vf.samples;
        Pair {
            geometry: u0.geometry,
            u_phys: uf.to_physical().samples,
            v_phys: vf.to_physical().samples,
            u_hat: uf.samples,
            v_hat: vf.samples,
            same,
        }
    }

    fn len(&self) -> usize {
        self.u_hat.len()
    }

    fn dft(&self, buf: &mut [C64], inverse: bool) {
        centered_dft(buf, self.geometry.d, self.geometry.n, inverse);
    }

    /// Propagator table whose inverse transform gives physical samples.
    fn propagator(&self, t: f64) -> AxisTable {
        let g = self.geometry;
        AxisTable::chirp(g, Side::Fourier, -t, g.dxi() / (2.0 * PI))
    }

    /// Chirp table whose forward transform gives the lens profile `w^`,
    /// `w = e^{is|y|^2} u0`.
    fn lens_chirp(&self, s: f64) -> AxisTable {
        let g = self.geometry;
        AxisTable::chirp(g, Side::Physical, s, g.spacing(Side::Physical))
    }

    /// `dst = src * table` followed by a transform.
    fn map(&self, table: &AxisTable, src: &[C64], inverse: bool) -> Buf {
        let mut out = Buf::new(self.len());
        table.apply(src, &mut out);
        self.dft(&mut out, inverse);
        out
    }
}

fn mul_conj(a: &mut [C64], b: &[C64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x *= y.conj();
    }
}

struct ConjugateDensity {
    pair: Pair,
    sigma: f64,
    fourier_sum: SingularSum,
    physical_sum: SingularSum,
}

impl ConjugateDensity {
    /// `||(-Delta)^sigma (f gbar)||^2` for samples on `side`, where `dual`
    /// integrates `|w|^{4 sigma}` on the other side.
    fn norm(&self, mut f: Buf, g: Option<Buf>, side: Side, dual: &SingularSum) -> f64 {
        let geom = self.pair.geometry;
        let len = f.len();
        let cell = geom.cell(side);
        if self.sigma == 0.0 {
            return cell * match &g {
                None => pairwise_sum_by(len, &|i| f[i].norm_sqr() * f[i].norm_sqr()),
                Some(g) => pairwise_sum_by(len, &|i| f[i].norm_sqr() * g[i].norm_sqr()),
            };
        }
        match &g {
            None => f.iter_mut().for_each(|z| *z = C64::new(z.norm_sqr(), 0.0)),
            Some(g) => mul_conj(&mut f, g),
        }
        self.pair.dft(&mut f, false);
        cell * cell * dual.apply_norm(&f) / (2.0 * PI).powi(geom.d as i32)
    }
}

impl TimeDensity for ConjugateDensity {
    fn direct(&self, t: f64) -> f64 {
        let pr = &self.pair;
        let table = pr.propagator(t);
        let u = pr.map(&table, &pr.u_hat, true);
        let v = (!pr.same).then(|| pr.map(&table, &pr.v_hat, true));
        self.norm(u, v, Side::Physical, &self.fourier_sum)
    }

    fn lens(&self, s: f64) -> f64 {
        let pr = &self.pair;
        let d = pr.geometry.d as i32;
        let chirp = pr.lens_chirp(s);
        let w = pr.map(&chirp, &pr.u_phys, false);
        let z = (!pr.same).then(|| pr.map(&chirp, &pr.v_phys, false));
        let norm = self.norm(w, z, Side::Fourier, &self.physical_sum);
        (2.0 * PI).powi(-2 * d) * (d as f64 + 4.0 * self.sigma - 2.0).exp2() * norm
    }

    fn lens_power(&self) -> f64 {
        4.0 * self.sigma + self.pair.geometry.d as f64 - 2.0
    }
}

/// `Re <D(uv), uv>` with `D = i d_t + Delta/2`, written through the
/// equation as `Delta(uv)/2 - v Delta u - u Delta v`.
struct HalfDispersiveDensity {
    pair: Pair,
    r2_fourier: Vec<f64>,
    r2_physical: Vec<f64>,
    /// `Delta u0^` and `Delta v0^` on the frequency grid.
    lap_hat: [Vec<C64>; 2],
    /// `-|y|^2 u0` and `-|y|^2 v0`, which the lens maps to the Laplacians.
    lap_phys: [Vec<C64>; 2],
}

impl HalfDispersiveDensity {
    fn new(pair: Pair) -> HalfDispersiveDensity {
        let g = pair.geometry;
        let r2_fourier = g.squared_radii(Side::Fourier);
        let r2_physical = g.squared_radii(Side::Physical);
        let weigh = |x: &[C64], r2: &[f64]| -> Vec<C64> { x.iter().zip(r2).map(|(a, r)| -a * r).collect() };
        HalfDispersiveDensity {
            lap_hat: [weigh(&pair.u_hat, &r2_fourier), weigh(&pair.v_hat, &r2_fourier)],
            lap_phys: [weigh(&pair.u_phys, &r2_physical), weigh(&pair.v_phys, &r2_physical)],
            pair,
            r2_fourier,
            r2_physical,
        }
    }

    /// `-|grad(fg)|^2/2 - Re <g Lf + f Lg, fg>` for samples on one side, with
    /// the gradient norm evaluated on the other side.
    fn pairing(&self, f: &[C64], g: &[C64], lf: &[C64], lg: &[C64], here: Side) -> f64 {
        let geom = self.pair.geometry;
        let d = geom.d as i32;
        let mut prod = Buf::new(f.len());
        for (i, p) in prod.iter_mut().enumerate() {
            *p = f[i] * g[i];
        }
        let cross = pairwise_sum_by(prod.len(), &|i| ((g[i] * lf[i] + f[i] * lg[i]) * prod[i].conj()).re);
        let (there, r2) = match here {
            Side::Physical => (Side::Fourier, &self.r2_fourier),
            Side::Fourier => (Side::Physical, &self.r2_physical),
        };
        self.pair.dft(&mut prod, false);
        let cell = geom.cell(here);
        let grad = pairwise_sum_by(prod.len(), &|i| r2[i] * prod[i].norm_sqr());
        let grad2 = geom.cell(there) * cell * cell * grad / (2.0 * PI).powi(d);
        -0.5 * grad2 - cell * cross
    }
}

impl TimeDensity for HalfDispersiveDensity {
    fn direct(&self, t: f64) -> f64 {
        let pr = &self.pair;
        let table = pr.propagator(t);
        let u = pr.map(&table, &pr.u_hat, true);
        let lu = pr.map(&table, &self.lap_hat[0], true);
        if pr.same {
            return self.pairing(&u, &u, &lu, &lu, Side::Physical);
        }
        let v = pr.map(&table, &pr.v_hat, true);
        let lv = pr.map(&table, &self.lap_hat[1], true);
        self.pairing(&u, &v, &lu, &lv, Side::Physical)
    }

    fn lens(&self, s: f64) -> f64 {
        let pr = &self.pair;
        let d = pr.geometry.d as i32;
        let chirp = pr.lens_chirp(s);
        let big_u = pr.map(&chirp, &pr.u_phys, false);
        let lu = pr.map(&chirp, &self.lap_phys[0], false);
        let val = if pr.same {
            self.pairing(&big_u, &big_u, &lu, &lu, Side::Fourier)
        } else {
            let big_v = pr.map(&chirp, &pr.v_phys, false);
            let lv = pr.map(&chirp, &self.lap_phys[1], false);
            self.pairing(&big_u, &big_v, &lu, &lv, Side::Fourier)
        };
        (-(d as f64)).exp2() * PI.powi(-2 * d) * val
    }

    fn lens_power(&self) -> f64 {
        self.pair.geometry.d as f64
    }
}

/// `|u|^{2m}` for a single wave.
struct PowerDensity {
    pair: Pair,
    m: i32,
}

impl TimeDensity for PowerDensity {
    fn direct(&self, t: f64) -> f64 {
        let pr = &self.pair;
        let u = pr.map(&pr.propagator(t), &pr.u_hat, true);
        pr.geometry.cell(Side::Physical) * pairwise_sum_by(u.len(), &|i| u[i].norm_sqr().powi(self.m))
    }

    fn lens(&self, s: f64) -> f64 {
        let pr = &self.pair;
        let g = pr.geometry;
        let w = pr.map(&pr.lens_chirp(s), &pr.u_phys, false);
        let df = g.d as f64;
        PI.powf(-(self.m as f64) * df) * (-df - 2.0).exp2() * g.cell(Side::Fourier)
            * pairwise_sum_by(w.len(), &|i| w[i].norm_sqr().powi(self.m))
    }

    fn lens_power(&self) -> f64 {
        let df = self.pair.geometry.d as f64;
        self.m as f64 * df - df - 2.0
    }
}

fn check_pair(u0: &GridField, v0: &GridField) -> Result<()> {
    if u0.geometry != v0.geometry {
        return Err(Error::Mismatch("u0 and v0 live on different grids".into()));
    }
    Ok(())
}

/// `||(-Delta)^sigma (u vbar)||^2_{L^2(R^{1+d})}` with full time integral.
pub fn lhs_conjugate_detailed(
    spec: &EstimateSpec,
    u0: &GridField,
    v0: &GridField,
    st: &SpaceTimeGrid,
) -> Result<TimeIntegral> {
    let sigma = match spec.family {
        Family::Conjugate { sigma } => sigma,
        Family::Plain { .. } => {
            return Err(Error::Precondition("lhs_conjugate_norm needs the conjugate family".into()))
        }
    };
    check_pair(u0, v0)?;
    if spec.d != u0.d() {
        return Err(Error::Mismatch("spec and data dimensions differ".into()));
    }
    conjugate_integral(sigma, u0, v0, st)
}

/// The conjugate time integral without the admissibility check; callers
/// vouch for convergence (e.g. separated frequency supports).
pub(crate) fn conjugate_integral(sigma: f64, u0: &GridField, v0: &GridField, st: &SpaceTimeGrid) -> Result<TimeIntegral> {
    st.validate(&[u0, v0], 2)?;
    let g = u0.geometry;
    let density = ConjugateDensity {
        pair: Pair::new(u0, v0),
        sigma,
        fourier_sum: SingularSum::new(g, Side::Fourier, 4.0 * sigma)?,
        physical_sum: SingularSum::new(g, Side::Physical, 4.0 * sigma)?,
    };
    integrate_time(&density, st)
}

pub fn lhs_conjugate_norm(
    spec: &EstimateSpec,
    u0: &GridField,
    v0: &GridField,
    st: &SpaceTimeGrid,
) -> Result<f64> {
    lhs_conjugate_detailed(spec, u0, v0, st).map(|r| r.value)
}

/// `|| |D|^beta (uv) ||^2` with `|D|^beta` the multiplier `|tau + |xi|^2/2|^beta`.
///
/// `beta = 0` and `beta = 1/2` are computed locally in time; any other
/// admissible `beta` goes through the energy-shell representation.
pub fn lhs_dispersive_detailed(
    spec: &EstimateSpec,
    u0: &GridField,
    v0: &GridField,
    st: &SpaceTimeGrid,
) -> Result<TimeIntegral> {
    let beta = match spec.family {
        Family::Plain { beta } => beta,
        Family::Conjugate { .. } => {
            return Err(Error::Precondition("lhs_dispersive_norm needs the plain family".into()))
        }
    };
    check_pair(u0, v0)?;
    if spec.d != u0.d() {
        return Err(Error::Mismatch("spec and data dimensions differ".into()));
    }
    if beta == 0.0 {
        // |uv| = |u vbar| pointwise
        return conjugate_integral(0.0, u0, v0, st);
    }
    if beta == 0.5 {
        st.validate(&[u0, v0], 2)?;
        let density = HalfDispersiveDensity::new(Pair::new(u0, v0));
        return integrate_time(&density, st);
    }
    let uf = u0.to_fourier();
    let vf = v0.to_fourier();
    let rule = crate::shell::ShellRule::for_fields(&uf, &vf)?;
    let pu = crate::shell::GridProfile::new(&uf)?;
    let value = if uf.samples == vf.samples {
        crate::shell::energy_shell_lhs(&pu, &pu, beta, &rule)?
    } else {
        crate::shell::energy_shell_lhs(&pu, &crate::shell::GridProfile::new(&vf)?, beta, &rule)?
    };
    Ok(TimeIntegral {
        value,
        n_t: 0,
        change: 0.0,
    })
}

pub fn lhs_dispersive_norm(
    spec: &EstimateSpec,
    u0: &GridField,
    v0: &GridField,
    st: &SpaceTimeGrid,
) -> Result<f64> {
    lhs_dispersive_detailed(spec, u0, v0, st).map(|r| r.value)
}

/// `int int |u(t,x)|^{2m} dx dt` for `u = e^{it Delta} u0`.
pub fn spacetime_power_norm(u0: &GridField, m: usize, st: &SpaceTimeGrid) -> Result<TimeIntegral> {
    if m < 1 {
        return Err(Error::Precondition("power must be >= 2".into()));
    }
    st.validate(&[u0], m)?;
    let density = PowerDensity {
        pair: Pair::new(u0, u0),
        m: m as i32,
    };
    if !(density.lens_power() > -1.0) {
        return Err(Error::Domain {
            what: "exponent",
            value: 2.0 * m as f64,
            reason: format!("L^{} in time and space diverges in d = {}", 2 * m, u0.d()),
        });
    }
    integrate_time(&density, st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datum::{GaussianDatum, GaussianMixture, RandomData};
    use approx::assert_relative_eq;

    fn grid_for(data: &[&GaussianMixture], degree: usize) -> GridGeometry {
        crate::verify::grid_for(data, degree, 1.05).unwrap()
    }

    #[test]
    fn d1_quarter_identity_on_gaussians() {
        let u = GaussianDatum::centred(1, -1.0).unwrap().to_mixture();
        let g = grid_for(&[&u], 2);
        let f = u.render(g).unwrap();
        let st = SpaceTimeGrid::fit(&[&f], 2).unwrap();
        let spec = EstimateSpec::conjugate(1, 0.25).unwrap();
        let lhs = lhs_conjugate_norm(&spec, &f, &f, &st).unwrap();
        let m = f.l2_mass();
        assert_relative_eq!(lhs, 0.5 * m * m, max_relative = 1e-7);
    }

    #[test]
    fn d2_l4_gaussian_benchmark() {
        let u = GaussianDatum::centred(2, -1.0).unwrap().to_mixture();
        let g = grid_for(&[&u], 2);
        let f = u.render(g).unwrap();
        let st = SpaceTimeGrid::fit(&[&f], 2).unwrap();
        let l4 = spacetime_power_norm(&f, 2, &st).unwrap().value;
        let m = f.l2_mass();
        assert_relative_eq!(l4 / (m * m), 0.25, max_relative = 1e-9);
        let spec = EstimateSpec::conjugate(2, 0.0).unwrap();
        let lhs = lhs_conjugate_norm(&spec, &f, &f, &st).unwrap();
        assert_relative_eq!(lhs, l4, max_relative = 1e-10);
        let plain = EstimateSpec::plain(2, 0.0).unwrap();
        assert_eq!(lhs_dispersive_norm(&plain, &f, &f, &st).unwrap(), lhs);
    }

    #[test]
    fn d1_l6_gaussian_benchmark() {
        let u = GaussianDatum::centred(1, -1.0).unwrap().to_mixture();
        let g = grid_for(&[&u], 3);
        let f = u.render(g).unwrap();
        let st = SpaceTimeGrid::fit(&[&f], 3).unwrap();
        let l6 = spacetime_power_norm(&f, 3, &st).unwrap().value;
        let m = f.l2_mass();
        assert_relative_eq!(l6 / (m * m * m), 12f64.powf(-0.5), max_relative = 1e-9);
    }

    #[test]
    fn d1_identity_random_pair() {
        let u = GaussianMixture::random(1, RandomData::default(), 1).unwrap();
        let v = GaussianMixture::random(1, RandomData::default(), 2).unwrap();
        let g = grid_for(&[&u, &v], 2);
        let (fu, fv) = (u.render(g).unwrap(), v.render(g).unwrap());
        let st = SpaceTimeGrid::fit(&[&fu, &fv], 2).unwrap();
        let spec = EstimateSpec::conjugate(1, 0.25).unwrap();
        let lhs = lhs_conjugate_norm(&spec, &fu, &fv, &st).unwrap();
        assert_relative_eq!(lhs, 0.5 * fu.l2_mass() * fv.l2_mass(), max_relative = 1e-9);
    }

    #[test]
    fn shell_agrees_with_local_half_derivative() {
        let u = GaussianMixture::random(2, RandomData::default(), 4).unwrap();
        let v = GaussianMixture::random(2, RandomData::default(), 5).unwrap();
        let g = grid_for(&[&u, &v], 2);
        let (fu, fv) = (u.render(g).unwrap(), v.render(g).unwrap());
        let st = SpaceTimeGrid::fit(&[&fu, &fv], 2).unwrap();
        let local = lhs_dispersive_norm(&EstimateSpec::plain(2, 0.5).unwrap(), &fu, &fv, &st).unwrap();
        let rule = crate::shell::ShellRule::for_fields(&fu, &fv).unwrap();
        let (pu, pv) = (crate::shell::GridProfile::new(&fu).unwrap(), crate::shell::GridProfile::new(&fv).unwrap());
        let shell = crate::shell::energy_shell_lhs(&pu, &pv, 0.5, &rule).unwrap();
        assert_relative_eq!(shell, local, max_relative = 1e-7);
    }

    #[test]
    fn lens_window_choice_does_not_matter() {
        let u = GaussianMixture::random(1, RandomData::default(), 9).unwrap();
        let g = grid_for(&[&u], 2);
        let g = GridGeometry::new(1, g.n * 2, g.half_width * 1.5).unwrap();
        let f = u.render(g).unwrap();
        let st = SpaceTimeGrid::fit(&[&f], 2).unwrap();
        let ext = Extents::of_fields(&[&f]);
        let (lo, hi) = SpaceTimeGrid::window_range(g, ext, 2).unwrap();
        let spec = EstimateSpec::conjugate(1, 0.5).unwrap();
        let a = lhs_conjugate_norm(&spec, &f, &f, &SpaceTimeGrid { window: lo, ..st }).unwrap();
        let b = lhs_conjugate_norm(&spec, &f, &f, &SpaceTimeGrid { window: hi, ..st }).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }

    #[test]
    fn under_resolved_window_is_reported() {
        let u = GaussianDatum::centred(1, -1.0).unwrap().to_mixture();
        let g = GridGeometry::new(1, 64, 12.0).unwrap();
        let f = u.render_unchecked(g);
        assert!(matches!(
            SpaceTimeGrid::fit(&[&f], 2),
            Err(Error::Resolution { .. })
        ));
    }
}
