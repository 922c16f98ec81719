//! Uniform periodic grids in one to three dimensions and the centred
//! discrete Fourier transform that links the physical and frequency sides.
//!
//! With `n` points per axis and half-width `L` the physical nodes are
//! `x_j = (j - n/2) dx`, `dx = 2L/n`, and the frequency nodes are
//! `xi_m = (m - n/2) dxi`, `dxi = pi/L`. The forward transform approximates
//! `f^(xi) = int f(x) e^{-i x.xi} dx`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Physical,
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub d: usize,
    pub n: usize,
    pub half_width: f64,
}

impl GridGeometry {
    pub fn new(d: usize, n: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::UnsupportedDimension {
                d,
                reason: "grids exist for d = 1, 2, 3".into(),
            });
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(domain("n", n as f64, "points per axis must be a power of two >= 4"));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(domain("L", half_width, "half-width must be positive"));
        }
        let len = n.checked_pow(d as u32).unwrap_or(usize::MAX);
        if len > 1 << 26 {
            return Err(domain("n", n as f64, "grid too large"));
        }
        Ok(GridGeometry { d, n, half_width })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn dxi(&self) -> f64 {
        PI / self.half_width
    }

    /// Largest frequency magnitude on an axis, `n pi / (2L)`.
    pub fn nyquist(&self) -> f64 {
        0.5 * self.n as f64 * self.dxi()
    }

    pub fn spacing(&self, side: Side) -> f64 {
        match side {
            Side::Physical => self.dx(),
            Side::Fourier => self.dxi(),
        }
    }

    /// Cell volume on the given side.
    pub fn cell(&self, side: Side) -> f64 {
        self.spacing(side).powi(self.d as i32)
    }

    /// Flat index of the origin.
    pub fn origin(&self) -> usize {
        let half = self.n / 2;
        (0..self.d).fold(0, |acc, _| acc * self.n + half)
    }

    /// Integer offsets from the centre for a flat index.
    pub fn offsets(&self, mut idx: usize) -> [i64; 3] {
        let mut out = [0i64; 3];
        for k in (0..self.d).rev() {
            out[k] = (idx % self.n) as i64 - (self.n / 2) as i64;
            idx /= self.n;
        }
        out
    }

    pub fn coords(&self, idx: usize, side: Side) -> [f64; 3] {
        let h = self.spacing(side);
        let o = self.offsets(idx);
        [o[0] as f64 * h, o[1] as f64 * h, o[2] as f64 * h]
    }

    /// Flat index for centred offsets, if inside the grid.
    pub fn index_of(&self, offsets: &[i64]) -> Option<usize> {
        let half = (self.n / 2) as i64;
        let mut idx = 0usize;
        for &o in offsets.iter().take(self.d) {
            let j = o + half;
            if j < 0 || j >= self.n as i64 {
                return None;
            }
            idx = idx * self.n + j as usize;
        }
        Some(idx)
    }

    /// `|x|^2` (or `|xi|^2`) at every node.
    pub fn squared_radii(&self, side: Side) -> Vec<f64> {
        let h = self.spacing(side);
        let axis: Vec<f64> = (0..self.n)
            .map(|j| {
                let x = (j as f64 - (self.n / 2) as f64) * h;
                x * x
            })
            .collect();
        let mut out = vec![0.0; self.len()];
        match self.d {
            1 => out.copy_from_slice(&axis),
            2 => {
                for i in 0..self.n {
                    for j in 0..self.n {
                        out[i * self.n + j] = axis[i] + axis[j];
                    }
                }
            }
            _ => {
                for i in 0..self.n {
                    for j in 0..self.n {
                        for k in 0..self.n {
                            out[(i * self.n + j) * self.n + k] = axis[i] + axis[j] + axis[k];
                        }
                    }
                }
            }
        }
        out
    }

    /// Coordinate along `axis` at every node.
    pub fn axis_coordinates(&self, axis: usize, side: Side) -> Vec<f64> {
        let h = self.spacing(side);
        (0..self.len())
            .map(|idx| self.offsets(idx)[axis] as f64 * h)
            .collect()
    }

    /// Same geometry with twice the points per axis.
    pub fn refined(&self) -> Result<Self> {
        GridGeometry::new(self.d, self.n * 2, self.half_width)
    }
}

/// FFT plans for one axis length, shared between all grids of that size.
pub struct AxisPlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn axis_plan(n: usize) -> Arc<AxisPlan> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<AxisPlan>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(AxisPlan {
                n,
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Unscaled centred DFT in place: `out_m = sum_j in_j e^{-+ 2 pi i (j-n/2)(m-n/2)/n}`.
/// `inverse` selects the `+` sign.
pub fn centered_dft(buf: &mut [C64], d: usize, n: usize, inverse: bool) {
    debug_assert_eq!(buf.len(), n.pow(d as u32));
    checkerboard(buf, d, n, n % 4 != 0 && d % 2 == 1);
    let plan = axis_plan(n);
    fft_axes(buf, d, &plan, inverse);
    checkerboard(buf, d, n, false);
}

/// Multiply by `(-1)^{sum of indices}`, optionally with an extra global sign.
fn checkerboard(buf: &mut [C64], d: usize, n: usize, negate: bool) {
    let base = if negate { -1.0 } else { 1.0 };
    match d {
        1 => {
            for (j, v) in buf.iter_mut().enumerate() {
                if j % 2 == 1 {
                    *v *= -base;
                } else if negate {
                    *v *= base;
                }
            }
        }
        _ => {
            let stride = n.pow(d as u32 - 1);
            for (i, block) in buf.chunks_mut(stride).enumerate() {
                let flip = i % 2 == 1;
                checkerboard(block, d - 1, n, negate ^ flip);
            }
        }
    }
}

fn fft_axes(buf: &mut [C64], d: usize, plan: &AxisPlan, inverse: bool) {
    let n = plan.n;
    let fft = if inverse { &plan.inverse } else { &plan.forward };
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // contiguous last axis
    fft.process_with_scratch(buf, &mut scratch);
    if d == 1 {
        return;
    }
    // remaining axes: gather blocks of lines into a contiguous buffer
    const BLOCK: usize = 16;
    let total = buf.len();
    let mut lines = vec![C64::new(0.0, 0.0); n * BLOCK];
    for axis in 0..d - 1 {
        let stride = n.pow((d - 1 - axis) as u32);
        let outer = total / (stride * n);
        for o in 0..outer {
            let base = o * stride * n;
            let mut inner = 0;
            while inner < stride {
                let width = BLOCK.min(stride - inner);
                for j in 0..n {
                    let row = base + j * stride + inner;
                    for b in 0..width {
                        lines[b * n + j] = buf[row + b];
                    }
                }
                fft.process_with_scratch(&mut lines[..width * n], &mut scratch);
                for j in 0..n {
                    let row = base + j * stride + inner;
                    for b in 0..width {
                        buf[row + b] = lines[b * n + j];
                    }
                }
                inner += width;
            }
        }
    }
}

/// Complex samples of a function on a grid, on one side of the transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub geometry: GridGeometry,
    pub side: Side,
    pub samples: Vec<C64>,
}

const MAGIC: &[u8; 4] = b"GFLD";
const FORMAT_VERSION: u32 = 1;

impl GridField {
    pub fn new(geometry: GridGeometry, side: Side, samples: Vec<C64>) -> Result<Self> {
        if samples.len() != geometry.len() {
            return Err(Error::Mismatch(format!(
                "{} samples for a grid of {} nodes",
                samples.len(),
                geometry.len()
            )));
        }
        Ok(GridField {
            geometry,
            side,
            samples,
        })
    }

    pub fn zeros(geometry: GridGeometry, side: Side) -> Self {
        GridField {
            geometry,
            side,
            samples: vec![C64::new(0.0, 0.0); geometry.len()],
        }
    }

    pub fn from_fn(geometry: GridGeometry, side: Side, f: impl Fn(&[f64]) -> C64) -> Self {
        let samples = (0..geometry.len())
            .map(|idx| {
                let c = geometry.coords(idx, side);
                f(&c[..geometry.d])
            })
            .collect();
        GridField {
            geometry,
            side,
            samples,
        }
    }

    pub fn d(&self) -> usize {
        self.geometry.d
    }

    pub fn to_fourier(&self) -> GridField {
        match self.side {
            Side::Fourier => self.clone(),
            Side::Physical => {
                let mut s = self.samples.clone();
                centered_dft(&mut s, self.geometry.d, self.geometry.n, false);
                let scale = self.geometry.cell(Side::Physical);
                s.iter_mut().for_each(|v| *v *= scale);
                GridField {
                    geometry: self.geometry,
                    side: Side::Fourier,
                    samples: s,
                }
            }
        }
    }

    pub fn to_physical(&self) -> GridField {
        match self.side {
            Side::Physical => self.clone(),
            Side::Fourier => {
                let mut s = self.samples.clone();
                centered_dft(&mut s, self.geometry.d, self.geometry.n, true);
                let scale = (self.geometry.dxi() / (2.0 * PI)).powi(self.geometry.d as i32);
                s.iter_mut().for_each(|v| *v *= scale);
                GridField {
                    geometry: self.geometry,
                    side: Side::Physical,
                    samples: s,
                }
            }
        }
    }

    /// `||f||_2^2` of the physical function, computed on whichever side the
    /// samples live (Plancherel with the `(2 pi)^{-d}` factor).
    pub fn l2_mass(&self) -> f64 {
        let raw: Vec<f64> = self.samples.iter().map(|v| v.norm_sqr()).collect();
        let sum = crate::quadrature::pairwise_sum(&raw) * self.geometry.cell(self.side);
        match self.side {
            Side::Physical => sum,
            Side::Fourier => sum / (2.0 * PI).powi(self.geometry.d as i32),
        }
    }

    /// `||(-Delta)^{s/2} f||_2^2`.
    pub fn sobolev_mass(&self, s: f64) -> f64 {
        let f = self.to_fourier();
        let r2 = f.geometry.squared_radii(Side::Fourier);
        let raw: Vec<f64> = f
            .samples
            .iter()
            .zip(&r2)
            .map(|(v, &r2)| crate::quadrature::power_weight(r2.sqrt(), 2.0 * s) * v.norm_sqr())
            .collect();
        crate::quadrature::pairwise_sum(&raw) * f.geometry.cell(Side::Fourier)
            / (2.0 * PI).powi(f.geometry.d as i32)
    }

    fn fourier_multiplier(&self, m: impl Fn(f64) -> C64) -> GridField {
        let mut f = self.to_fourier();
        let r2 = f.geometry.squared_radii(Side::Fourier);
        for (v, &r2) in f.samples.iter_mut().zip(&r2) {
            *v *= m(r2);
        }
        f
    }

    /// `e^{it Delta}`: multiplies the transform by `e^{-it|xi|^2}`.
    pub fn propagate_schrodinger(&self, t: f64) -> GridField {
        self.fourier_multiplier(|r2| C64::from_polar(1.0, -t * r2))
    }

    /// `e^{rho Delta}`: multiplies the transform by `e^{-rho |xi|^2}`.
    pub fn propagate_heat(&self, rho: f64) -> Result<GridField> {
        if !(rho >= 0.0) {
            return Err(domain("rho", rho, "heat flow runs forward only"));
        }
        Ok(self.fourier_multiplier(|r2| C64::new((-rho * r2).exp(), 0.0)))
    }

    /// `(-Delta)^s`: multiplies the transform by `|xi|^{2s}`; the zero
    /// frequency maps to zero whenever `s != 0`.
    pub fn fractional_laplacian(&self, s: f64) -> GridField {
        if s == 0.0 {
            return self.to_fourier();
        }
        self.fourier_multiplier(|r2| {
            if r2 == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                C64::new(r2.powf(s), 0.0)
            }
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    /// Radius beyond which every sample is below `eps` times the peak.
    pub fn extent(&self, eps: f64) -> f64 {
        let peak = self.max_abs();
        if peak == 0.0 {
            return 0.0;
        }
        let r2 = self.geometry.squared_radii(self.side);
        let mut out = 0.0f64;
        for (v, &r2) in self.samples.iter().zip(&r2) {
            if v.norm() > eps * peak {
                out = out.max(r2);
            }
        }
        out.sqrt()
    }

    /// Largest sample modulus on the outer face of the box, relative to the peak.
    pub fn boundary_ratio(&self) -> f64 {
        let peak = self.max_abs();
        if peak == 0.0 {
            return 0.0;
        }
        let lo = -((self.geometry.n / 2) as i64);
        let mut worst = 0.0f64;
        for (idx, v) in self.samples.iter().enumerate() {
            let o = self.geometry.offsets(idx);
            if o[..self.geometry.d].iter().any(|&k| k == lo) {
                worst = worst.max(v.norm());
            }
        }
        worst / peak
    }

    pub fn scaled(&self, c: C64) -> GridField {
        let mut out = self.clone();
        out.samples.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.geometry.d as u32).to_le_bytes())?;
        w.write_all(&(self.geometry.n as u32).to_le_bytes())?;
        w.write_all(&self.geometry.half_width.to_le_bytes())?;
        let side: u32 = match self.side {
            Side::Physical => 0,
            Side::Fourier => 1,
        };
        w.write_all(&side.to_le_bytes())?;
        let mut bytes = Vec::with_capacity(16 * self.samples.len());
        for v in &self.samples {
            bytes.extend_from_slice(&v.re.to_le_bytes());
            bytes.extend_from_slice(&v.im.to_le_bytes());
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<GridField> {
        let mut head = [0u8; 4];
        r.read_exact(&mut head)?;
        if &head != MAGIC {
            return Err(Error::Format("missing GFLD magic".into()));
        }
        let mut u = [0u8; 4];
        r.read_exact(&mut u)?;
        let version = u32::from_le_bytes(u);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unknown version {version}")));
        }
        r.read_exact(&mut u)?;
        let d = u32::from_le_bytes(u) as usize;
        r.read_exact(&mut u)?;
        let n = u32::from_le_bytes(u) as usize;
        let mut f = [0u8; 8];
        r.read_exact(&mut f)?;
        let half_width = f64::from_le_bytes(f);
        r.read_exact(&mut u)?;
        let side = match u32::from_le_bytes(u) {
            0 => Side::Physical,
            1 => Side::Fourier,
            other => return Err(Error::Format(format!("bad side tag {other}"))),
        };
        let geometry = GridGeometry::new(d, n, half_width)?;
        let mut bytes = vec![0u8; 16 * geometry.len()];
        r.read_exact(&mut bytes)?;
        let samples = bytes
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        GridField::new(geometry, side, samples)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_binary(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<GridField> {
        let file = std::fs::File::open(path)?;
        GridField::read_binary(std::io::BufReader::new(file))
    }

    /// CSV with one coordinate column per axis followed by `re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let prefix = match self.side {
            Side::Physical => "x",
            Side::Fourier => "xi",
        };
        let cols: Vec<String> = (1..=self.geometry.d).map(|k| format!("{prefix}{k}")).collect();
        writeln!(w, "{},re,im", cols.join(","))?;
        for (idx, v) in self.samples.iter().enumerate() {
            let c = self.geometry.coords(idx, self.side);
            for x in &c[..self.geometry.d] {
                write!(w, "{x},")?;
            }
            writeln!(w, "{},{}", v.re, v.im)?;
        }
        Ok(())
    }
}
