//! Bessel and Riesz kernels: point evaluation, cell-averaged tables, and
//! zero-padded spectral convolution with fields and atomic measures.
//!
//! The Bessel kernel is evaluated through the subordination integral
//!
//! ```text
//! G_a(x) = [(4 pi)^{n/2} Gamma(a/2)]^{-1} int_0^inf t^{(a-n)/2 - 1}
//!          exp(-t - |x|^2 / (4t)) dt
//! ```
//!
//! (Fourier convention with the (2 pi)^{-n} factor on the inverse transform,
//! so that in dimension one G_2(x) = e^{-|x|} / 2.) Cell averages use the
//! same integral with the Gaussian factor integrated exactly over the cell,
//! which turns each axis into an erf difference; the resulting t-integrand is
//! smooth away from the endpoints and double-exponential quadrature applies
//! even when the cell contains the kernel singularity. The Riesz kernel is
//! the same integral without the e^{-t} factor; its algebraic tail is folded
//! back to a finite interval by t -> 1/t.

use crate::error::{CoreError, Result};
use crate::fft::PadFft;
use crate::grid::{AtomicMeasure, Field, Grid};
use crate::quad::{exp_sinh, tanh_sinh};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

const REL_TOL_POINT: f64 = 1e-9;
const REL_TOL_CELL: f64 = 1e-7;
/// Cells where the kernel varies by more than this fraction are averaged.
const VARIATION_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Bessel,
    Riesz,
}

/// Which kernel, its order, and the ambient dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub alpha: f64,
    pub dim: usize,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, alpha: f64, dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(CoreError::InvalidSpec(format!("dim must be 1..=3, got {dim}")));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(CoreError::InvalidSpec(format!("alpha must be positive, got {alpha}")));
        }
        if kind == KernelKind::Riesz && alpha >= dim as f64 {
            return Err(CoreError::InvalidSpec(format!(
                "Riesz kernel needs 0 < alpha < dim, got alpha = {alpha}, dim = {dim}"
            )));
        }
        Ok(KernelSpec { kind, alpha, dim })
    }

    pub fn bessel(alpha: f64, dim: usize) -> Result<Self> {
        KernelSpec::new(KernelKind::Bessel, alpha, dim)
    }

    pub fn riesz(alpha: f64, dim: usize) -> Result<Self> {
        KernelSpec::new(KernelKind::Riesz, alpha, dim)
    }
}

/// Normalization gamma(n, alpha) = Gamma((n-a)/2) / (pi^{n/2} 2^a Gamma(a/2))
/// of the Riesz kernel I_a(x) = gamma(n, alpha) |x|^{a-n}.
pub fn riesz_constant(dim: usize, alpha: f64) -> f64 {
    let n = dim as f64;
    libm::tgamma((n - alpha) / 2.0)
        / (PI.powf(n / 2.0) * 2.0f64.powf(alpha) * libm::tgamma(alpha / 2.0))
}

fn norm(x: [f64; 3], dim: usize) -> f64 {
    (0..dim).map(|i| x[i] * x[i]).sum::<f64>().sqrt()
}

/// Riesz kernel at a point (`x != 0`).
pub fn riesz_value(spec: &KernelSpec, x: [f64; 3]) -> Result<f64> {
    if spec.kind != KernelKind::Riesz {
        return Err(CoreError::InvalidSpec("riesz_value needs a Riesz spec".into()));
    }
    let r = norm(x, spec.dim);
    if r == 0.0 {
        return Err(CoreError::SingularKernel);
    }
    Ok(riesz_constant(spec.dim, spec.alpha) * r.powf(spec.alpha - spec.dim as f64))
}

/// Bessel kernel at a point (`x != 0` unless `alpha > dim`).
pub fn bessel_value(spec: &KernelSpec, x: [f64; 3]) -> Result<f64> {
    if spec.kind != KernelKind::Bessel {
        return Err(CoreError::InvalidSpec("bessel_value needs a Bessel spec".into()));
    }
    let r = norm(x, spec.dim);
    if r == 0.0 && spec.alpha <= spec.dim as f64 {
        return Err(CoreError::SingularKernel);
    }
    Ok(bessel_point(spec.alpha, spec.dim, r))
}

/// Kernel at radial distance `r > 0`, dispatching on the kind.
pub fn point_value(spec: &KernelSpec, r: f64) -> Result<f64> {
    match spec.kind {
        KernelKind::Riesz => {
            if r == 0.0 {
                return Err(CoreError::SingularKernel);
            }
            Ok(riesz_constant(spec.dim, spec.alpha) * r.powf(spec.alpha - spec.dim as f64))
        }
        KernelKind::Bessel => {
            if r == 0.0 && spec.alpha <= spec.dim as f64 {
                return Err(CoreError::SingularKernel);
            }
            Ok(bessel_point(spec.alpha, spec.dim, r))
        }
    }
}

fn bessel_prefactor(alpha: f64, dim: usize) -> f64 {
    1.0 / ((4.0 * PI).powf(dim as f64 / 2.0) * libm::tgamma(alpha / 2.0))
}

fn bessel_point(alpha: f64, dim: usize, r: f64) -> f64 {
    let nu = (alpha - dim as f64) / 2.0;
    let b = r * r / 4.0;
    let integrand = |t: f64| {
        let arg = (nu - 1.0) * t.ln() - t - b / t;
        if arg < -745.0 {
            0.0
        } else {
            arg.exp()
        }
    };
    let split = (r * r / 4.0).max(1.0);
    let head = tanh_sinh(integrand, 0.0, split, REL_TOL_POINT);
    let tail = exp_sinh(integrand, split, REL_TOL_POINT);
    bessel_prefactor(alpha, dim) * (head + tail)
}

/// erf(b) - erf(a) for a <= b, switched to erfc in the tails so the
/// difference of near-unit values does not cancel.
fn erf_diff(a: f64, b: f64) -> f64 {
    if a > 0.7 {
        libm::erfc(a) - libm::erfc(b)
    } else if b < -0.7 {
        libm::erfc(-b) - libm::erfc(-a)
    } else {
        libm::erf(b) - libm::erf(a)
    }
}

/// Average of the kernel over the cube cell of side `h` centered at
/// `center`, exact in the Gaussian factor via per-axis erf differences.
pub fn cell_average(spec: &KernelSpec, center: [f64; 3], h: f64) -> f64 {
    let dim = spec.dim;
    let alpha = spec.alpha;
    let nu = (alpha - dim as f64) / 2.0;
    let r = norm(center, dim);
    let bessel = spec.kind == KernelKind::Bessel;

    let integrand = |t: f64| -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let sq = 2.0 * t.sqrt();
        let mut prod = 1.0f64;
        for axis in 0..dim {
            let c = center[axis];
            let um = (c - 0.5 * h) / sq;
            let up = (c + 0.5 * h) / sq;
            prod *= (PI * t).sqrt() * erf_diff(um, up) / h;
            if prod == 0.0 {
                return 0.0;
            }
        }
        let base = ((nu - 1.0) * t.ln()).exp() * prod;
        if bessel {
            let e = -t;
            if e < -745.0 {
                0.0
            } else {
                base * e.exp()
            }
        } else {
            base
        }
    };

    let split = (r * r / 4.0).max(1.0);
    let head = tanh_sinh(&integrand, 0.0, split, REL_TOL_CELL);
    let tail = if bessel {
        exp_sinh(&integrand, split, REL_TOL_CELL)
    } else {
        // algebraic tail: fold back with t = 1/u
        tanh_sinh(|u: f64| integrand(1.0 / u) / (u * u), 0.0, 1.0 / split, REL_TOL_CELL)
    };
    bessel_prefactor(alpha, dim) * (head + tail)
}

/// Conservative estimate of the kernel's relative variation across a cell
/// whose center sits at radius `r` (half-diagonal `delta`). Overestimating
/// only promotes a cell from center evaluation to averaging.
fn variation_estimate(spec: &KernelSpec, r: f64, delta: f64) -> f64 {
    if r <= delta {
        return f64::INFINITY;
    }
    let n = spec.dim as f64;
    let power = match spec.kind {
        KernelKind::Riesz => n - spec.alpha,
        KernelKind::Bessel => (n - spec.alpha).max((n + 1.0 - spec.alpha) / 2.0).max(0.0),
    };
    let ratio = ((r + delta) / (r - delta)).powf(power);
    let ratio = if spec.kind == KernelKind::Bessel { ratio * (2.0 * delta).exp() } else { ratio };
    ratio - 1.0
}

/// Cell-averaged kernel samples on the offsets of a grid, stored in the
/// zero-padded circular layout together with their spectrum.
pub struct KernelTable {
    spec: KernelSpec,
    grid: Grid,
    samples: Vec<f64>,
    spectrum: Vec<Complex64>,
    origin_avg: f64,
    opnorm_bound: f64,
    fft: PadFft,
}

impl KernelTable {
    /// Build the table: the origin cell and every cell where the kernel
    /// varies by more than 1% get the cell average; the rest get the
    /// center-point value. Values are deduplicated over the symmetry group
    /// of the cubic cell arrangement (axis permutations and sign flips).
    pub fn build(spec: KernelSpec, grid: Grid) -> Result<Self> {
        if spec.dim != grid.dim() {
            return Err(CoreError::InvalidSpec(format!(
                "kernel dim {} does not match grid dim {}",
                spec.dim,
                grid.dim()
            )));
        }
        let n = grid.points_per_axis();
        let dim = grid.dim();
        let h = grid.spacing();
        let delta = h * (dim as f64).sqrt() / 2.0;

        let mut canon: HashMap<[u32; 3], f64> = HashMap::new();
        let mut value_for = |key: [u32; 3]| -> f64 {
            if let Some(&v) = canon.get(&key) {
                return v;
            }
            let off = [key[0] as f64 * h, key[1] as f64 * h, key[2] as f64 * h];
            let r = norm(off, dim);
            let v = if r == 0.0 || variation_estimate(&spec, r, delta) > VARIATION_THRESHOLD {
                cell_average(&spec, off, h)
            } else {
                point_value(&spec, r).expect("r > 0")
            };
            canon.insert(key, v);
            v
        };

        let fft = PadFft::new(dim, n);
        let m = fft.padded_per_axis();
        let mut samples = vec![0.0f64; fft.padded_len()];
        // map a padded slot index to a kernel offset; slot n is never read
        // back by the convolution and stays zero
        let slot_offset = |mi: usize| -> Option<u32> {
            if mi < n {
                Some(mi as u32)
            } else if mi == n {
                None
            } else {
                Some((m - mi) as u32)
            }
        };
        let canon_key = |mut k: [u32; 3]| -> [u32; 3] {
            k.sort_unstable();
            k.reverse();
            k
        };
        match dim {
            1 => {
                for mi in 0..m {
                    if let Some(o) = slot_offset(mi) {
                        samples[mi] = value_for(canon_key([o, 0, 0]));
                    }
                }
            }
            2 => {
                for mi in 0..m {
                    let oi = slot_offset(mi);
                    for mj in 0..m {
                        if let (Some(a), Some(b)) = (oi, slot_offset(mj)) {
                            samples[mi * m + mj] = value_for(canon_key([a, b, 0]));
                        }
                    }
                }
            }
            _ => {
                for mi in 0..m {
                    let oi = slot_offset(mi);
                    for mj in 0..m {
                        let oj = slot_offset(mj);
                        for mk in 0..m {
                            if let (Some(a), Some(b), Some(c)) = (oi, oj, slot_offset(mk)) {
                                samples[(mi * m + mj) * m + mk] =
                                    value_for(canon_key([a, b, c]));
                            }
                        }
                    }
                }
            }
        }

        let origin_avg = samples[0];
        let mut spectrum: Vec<Complex64> =
            samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.forward(&mut spectrum);
        let max_mod = spectrum.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        let opnorm_bound = grid.cell_volume() * max_mod;

        Ok(KernelTable { spec, grid, samples, spectrum, origin_avg, opnorm_bound, fft })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Cell average of the kernel over the origin cell.
    pub fn origin_cell_average(&self) -> f64 {
        self.origin_avg
    }

    /// Upper bound on the L2 operator norm of `f -> h^dim (table * f)`.
    pub fn operator_norm_bound(&self) -> f64 {
        self.opnorm_bound
    }

    /// Raw padded samples (circular layout, `(2n)^dim` entries).
    pub fn padded_samples(&self) -> &[f64] {
        &self.samples
    }

    /// Rehydrate a table from its padded samples (e.g. read from disk).
    pub fn from_padded_samples(spec: KernelSpec, grid: Grid, samples: Vec<f64>) -> Result<Self> {
        if spec.dim != grid.dim() {
            return Err(CoreError::InvalidSpec("kernel/grid dimension mismatch".into()));
        }
        let fft = PadFft::new(grid.dim(), grid.points_per_axis());
        if samples.len() != fft.padded_len() {
            return Err(CoreError::InvalidSpec(format!(
                "expected {} padded samples, got {}",
                fft.padded_len(),
                samples.len()
            )));
        }
        let origin_avg = samples[0];
        let mut spectrum: Vec<Complex64> =
            samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.forward(&mut spectrum);
        let max_mod = spectrum.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        let opnorm_bound = grid.cell_volume() * max_mod;
        Ok(KernelTable { spec, grid, samples, spectrum, origin_avg, opnorm_bound, fft })
    }

    /// Table value at an integer offset, `|off_i| <= n-1`.
    pub fn sample_at_offset(&self, off: [isize; 3]) -> f64 {
        let n = self.grid.points_per_axis() as isize;
        let m = self.fft.padded_per_axis() as isize;
        let mut flat = 0isize;
        for axis in 0..self.grid.dim() {
            let o = off[axis];
            debug_assert!(o.abs() < n);
            let slot = if o >= 0 { o } else { m + o };
            flat = flat * m + slot;
        }
        self.samples[flat as usize]
    }

    /// Linear convolution `g(x) = h^dim sum_y table(x - y) f(y)` by
    /// zero-padded spectral multiplication.
    pub fn convolve(&self, f: &Field) -> Result<Field> {
        if f.grid() != self.grid {
            return Err(CoreError::GridMismatch);
        }
        let mut data = self.fft.pad_real(f.values());
        self.fft.forward(&mut data);
        for (d, s) in data.iter_mut().zip(&self.spectrum) {
            *d *= *s;
        }
        self.fft.inverse(&mut data);
        let scale = self.grid.cell_volume() / self.fft.padded_len() as f64;
        let mut values = self.fft.extract_real(&data, scale);
        if f.nonneg() {
            // convolution of nonnegative data is nonnegative; sweep out
            // the roundoff negatives the inverse transform leaves behind
            for v in &mut values {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        Field::new(self.grid, values)
    }

    /// Potential of an atomic measure, `x -> sum_i mass_i k(x - loc_i)`,
    /// with the cell-averaged kernel value standing in whenever the point
    /// is within one spacing of an atom.
    pub fn convolve_measure(&self, mu: &AtomicMeasure) -> Result<Field> {
        let grid = self.grid;
        let h = grid.spacing();
        for atom in mu.atoms() {
            if !grid.contains(atom.location) {
                return Err(CoreError::AtomOutsideGrid { location: atom.location });
            }
        }
        let mut values = vec![0.0f64; grid.len()];
        for (i, v) in values.iter_mut().enumerate() {
            let p = grid.point(i);
            let mut acc = 0.0;
            for atom in mu.atoms() {
                if atom.mass == 0.0 {
                    continue;
                }
                let mut d2 = 0.0;
                for a in 0..grid.dim() {
                    let d = p[a] - atom.location[a];
                    d2 += d * d;
                }
                let r = d2.sqrt();
                let k = if r < h {
                    self.origin_avg
                } else {
                    point_value(&self.spec, r).expect("r >= h > 0")
                };
                acc += atom.mass * k;
            }
            *v = acc;
        }
        Field::new(grid, values)
    }
}

/// Free-function form of [`KernelTable::build`].
pub fn build_table(spec: KernelSpec, grid: Grid) -> Result<KernelTable> {
    KernelTable::build(spec, grid)
}

/// Free-function form of [`KernelTable::convolve`].
pub fn convolve(table: &KernelTable, f: &Field) -> Result<Field> {
    table.convolve(f)
}

/// Free-function form of [`KernelTable::convolve_measure`].
pub fn convolve_measure(table: &KernelTable, mu: &AtomicMeasure) -> Result<Field> {
    table.convolve_measure(mu)
}

/// Observed two-sided comparability constants of the Bessel kernel:
/// `c1` against the power profile `|x|^{alpha-n}` over grid offsets with
/// `|x| <= min(15, 2L)`, and `c2` for translation stability
/// `G(x) vs G(x+y)` over sampled pairs with `|x| >= 3`, `|y| <= 1`.
pub fn check_two_sided(spec: &KernelSpec, grid: Grid) -> Result<(f64, f64)> {
    if spec.kind != KernelKind::Bessel {
        return Err(CoreError::InvalidSpec("two-sided check is for the Bessel kernel".into()));
    }
    if grid.half_extent() < 4.0 {
        return Err(CoreError::InvalidProblem(format!(
            "two-sided check needs half extent >= 4, got {}",
            grid.half_extent()
        )));
    }
    let dim = spec.dim;
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let rmax = (2.0 * grid.half_extent()).min(15.0);

    // c1: dedupe offsets by squared integer radius
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut c1 = 1.0f64;
    let mut visit = |r2int: u64| {
        if r2int == 0 {
            return 1.0;
        }
        let r = h * (r2int as f64).sqrt();
        if r > rmax {
            return 1.0;
        }
        let g = *cache.entry(r2int).or_insert_with(|| bessel_point(spec.alpha, dim, r));
        let prof = r.powf(spec.alpha - dim as f64);
        (g / prof).max(prof / g)
    };
    match dim {
        1 => {
            for i in 0..n as u64 {
                c1 = c1.max(visit(i * i));
            }
        }
        2 => {
            for i in 0..n as u64 {
                for j in 0..=i {
                    c1 = c1.max(visit(i * i + j * j));
                }
            }
        }
        _ => {
            for i in 0..n as u64 {
                for j in 0..=i {
                    for k in 0..=j {
                        c1 = c1.max(visit(i * i + j * j + k * k));
                    }
                }
            }
        }
    }

    // c2: sampled pairs
    let dirs: Vec<[f64; 3]> = match dim {
        1 => vec![[1.0, 0.0, 0.0]],
        2 => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [s, s, 0.0], [s, -s, 0.0]]
        }
        _ => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let t = 1.0 / 3.0f64.sqrt();
            vec![
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
                [s, s, 0.0],
                [s, 0.0, s],
                [0.0, s, s],
                [t, t, t],
                [t, -t, t],
            ]
        }
    };
    let steps = [-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0];
    let mut shifts: Vec<[f64; 3]> = Vec::new();
    match dim {
        1 => {
            for &a in &steps {
                shifts.push([a, 0.0, 0.0]);
            }
        }
        2 => {
            for &a in &steps {
                for &b in &steps {
                    if a * a + b * b <= 1.0 + 1e-12 {
                        shifts.push([a, b, 0.0]);
                    }
                }
            }
        }
        _ => {
            for &a in &steps {
                for &b in &steps {
                    for &c in &steps {
                        if a * a + b * b + c * c <= 1.0 + 1e-12 {
                            shifts.push([a, b, c]);
                        }
                    }
                }
            }
        }
    }

    let mut c2 = 1.0f64;
    let mut radius = 3.0;
    while radius <= rmax {
        for dir in &dirs {
            let x = [radius * dir[0], radius * dir[1], radius * dir[2]];
            let gx = bessel_point(spec.alpha, dim, norm(x, dim));
            for y in &shifts {
                let xy = [x[0] + y[0], x[1] + y[1], x[2] + y[2]];
                let gxy = bessel_point(spec.alpha, dim, norm(xy, dim));
                c2 = c2.max((gx / gxy).max(gxy / gx));
            }
        }
        radius += 0.5;
    }

    Ok((c1, c2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Atom;

    #[test]
    fn riesz_golden_value_dim3() {
        let spec = KernelSpec::riesz(2.0, 3).unwrap();
        let v = riesz_value(&spec, [1.0, 0.0, 0.0]).unwrap();
        assert!((v - 1.0 / (4.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn riesz_symmetry_and_homogeneity() {
        let spec = KernelSpec::riesz(0.5, 1).unwrap();
        let a = riesz_value(&spec, [0.3, 0.0, 0.0]).unwrap();
        let b = riesz_value(&spec, [-0.3, 0.0, 0.0]).unwrap();
        assert_eq!(a, b);

        let spec2 = KernelSpec::riesz(1.0, 2).unwrap();
        let v1 = riesz_value(&spec2, [1.0, 0.0, 0.0]).unwrap();
        let v2 = riesz_value(&spec2, [2.0, 0.0, 0.0]).unwrap();
        assert!((v2 / v1 - 0.5).abs() < 1e-14);
    }

    #[test]
    fn riesz_value_rejects_origin() {
        let spec = KernelSpec::riesz(0.5, 1).unwrap();
        assert!(matches!(riesz_value(&spec, [0.0; 3]), Err(CoreError::SingularKernel)));
    }

    #[test]
    fn bessel_golden_value_dim1() {
        // G_2(x) = e^{-|x|} / 2 in dimension one
        let spec = KernelSpec::bessel(2.0, 1).unwrap();
        for &x in &[0.5, 1.0, 2.0] {
            let v = bessel_value(&spec, [x, 0.0, 0.0]).unwrap();
            let expected = (-x).exp() / 2.0;
            assert!(
                ((v - expected) / expected).abs() < 1e-8,
                "x = {x}: {v} vs {expected}"
            );
        }
    }

    #[test]
    fn bessel_golden_value_dim3() {
        // G_2(x) = e^{-|x|} / (4 pi |x|) in dimension three
        let spec = KernelSpec::bessel(2.0, 3).unwrap();
        let r = 1.5f64;
        let v = bessel_value(&spec, [r, 0.0, 0.0]).unwrap();
        let expected = (-r).exp() / (4.0 * PI * r);
        assert!(((v - expected) / expected).abs() < 1e-8);
    }

    #[test]
    fn bessel_matches_riesz_profile_near_origin() {
        let spec = KernelSpec::bessel(1.0, 2).unwrap();
        let r = 0.01f64;
        let v = bessel_value(&spec, [r, 0.0, 0.0]).unwrap();
        let ratio = v / r.powf(spec.alpha - 2.0);
        let expected = riesz_constant(2, 1.0); // 1 / (2 pi)
        assert!((ratio / expected - 1.0).abs() < 0.05, "ratio {ratio}, expected {expected}");
    }

    #[test]
    fn bessel_symmetric_in_sign() {
        let spec = KernelSpec::bessel(0.5, 1).unwrap();
        let a = bessel_value(&spec, [0.7, 0.0, 0.0]).unwrap();
        let b = bessel_value(&spec, [-0.7, 0.0, 0.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn riesz_origin_average_closed_form_dim1() {
        let spec = KernelSpec::riesz(0.5, 1).unwrap();
        let h = 0.05f64;
        let avg = cell_average(&spec, [0.0; 3], h);
        let expected = riesz_constant(1, 0.5) * (1.0 / h) * 2.0 * (h / 2.0).sqrt() / 0.5;
        assert!(((avg - expected) / expected).abs() < 1e-6, "{avg} vs {expected}");
    }

    #[test]
    fn bessel_cell_average_closed_form_dim1() {
        // G_2 averages integrate e^{-|y|}/2 exactly
        let spec = KernelSpec::bessel(2.0, 1).unwrap();
        let h = 0.1f64;
        let origin = cell_average(&spec, [0.0; 3], h);
        let expected_origin = (1.0 - (-h / 2.0f64).exp()) / h;
        assert!(((origin - expected_origin) / expected_origin).abs() < 1e-6);

        let c = 0.8f64;
        let off = cell_average(&spec, [c, 0.0, 0.0], h);
        let expected_off = ((-(c - h / 2.0)).exp() - (-(c + h / 2.0)).exp()) / (2.0 * h);
        assert!(((off - expected_off) / expected_off).abs() < 1e-6);
    }

    fn table(spec: KernelSpec, dim: usize, n: usize, l: f64) -> KernelTable {
        KernelTable::build(spec, Grid::new(dim, n, l).unwrap()).unwrap()
    }

    #[test]
    fn table_origin_dominates_neighbors_and_decays() {
        let spec = KernelSpec::bessel(0.5, 1).unwrap();
        let t = table(spec, 1, 64, 4.0);
        let origin = t.sample_at_offset([0, 0, 0]);
        assert!(origin.is_finite() && origin > t.sample_at_offset([1, 0, 0]));
        // monotone along the ray
        let mut prev = origin;
        for o in 1..64 {
            let v = t.sample_at_offset([o, 0, 0]);
            assert!(v > 0.0 && v <= prev, "offset {o}");
            prev = v;
        }
        // |offset| = 4 < |offset| = 3 sample
        let at3 = t.sample_at_offset([(3.0f64 / t.grid().spacing()) as isize, 0, 0]);
        let at4 = t.sample_at_offset([(4.0f64 / t.grid().spacing()) as isize - 1, 0, 0]);
        assert!(at4 < at3);
    }

    #[test]
    fn table_riesz_origin_average_matches_closed_form() {
        let spec = KernelSpec::riesz(0.5, 1).unwrap();
        let t = table(spec, 1, 64, 4.0);
        let h = t.grid().spacing();
        let expected = riesz_constant(1, 0.5) * (1.0 / h) * 2.0 * (h / 2.0).sqrt() / 0.5;
        assert!(((t.origin_cell_average() - expected) / expected).abs() < 1e-6);
    }

    #[test]
    fn table_is_symmetric_under_cell_symmetries() {
        let spec = KernelSpec::riesz(1.0, 2).unwrap();
        let t = table(spec, 2, 16, 1.0);
        let a = t.sample_at_offset([3, 5, 0]);
        for off in [[5, 3, 0], [-3, 5, 0], [3, -5, 0], [-5, -3, 0]] {
            assert_eq!(t.sample_at_offset(off), a);
        }
    }

    #[test]
    fn table_riesz_rescaling_scales_samples() {
        let spec = KernelSpec::riesz(0.5, 1).unwrap();
        let t1 = table(spec, 1, 16, 1.0);
        let t2 = table(spec, 1, 16, 2.0); // grid scaled by 2
        let scale = 2.0f64.powf(spec.alpha - 1.0);
        for o in 0..16isize {
            let a = t1.sample_at_offset([o, 0, 0]);
            let b = t2.sample_at_offset([o, 0, 0]);
            assert!(
                (b / a - scale).abs() < 1e-5 * scale,
                "offset {o}: {b} / {a} != {scale}"
            );
        }
    }

    #[test]
    fn convolve_zero_and_linearity() {
        let grid = Grid::new(1, 32, 2.0).unwrap();
        let spec = KernelSpec::bessel(1.0, 1).unwrap();
        let t = KernelTable::build(spec, grid).unwrap();

        let zero = t.convolve(&Field::zeros(grid)).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));

        let f1 = Field::from_fn(grid, |p| (1.0 - p[0] * p[0]).max(0.0)).unwrap();
        let f2 = Field::from_fn(grid, |p| (0.5 - p[0]).abs().min(1.0)).unwrap();
        let lhs = t.convolve(&f1.add(&f2).unwrap()).unwrap();
        let rhs = t.convolve(&f1).unwrap().add(&t.convolve(&f2).unwrap()).unwrap();
        let scale = lhs.max_value();
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            assert!((a - b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn convolve_dirac_reproduces_table() {
        let grid = Grid::new(1, 32, 2.0).unwrap();
        let spec = KernelSpec::riesz(0.5, 1).unwrap();
        let t = KernelTable::build(spec, grid).unwrap();
        let h = grid.spacing();
        let mut values = vec![0.0; grid.len()];
        let center = 12usize;
        values[center] = 1.0 / h; // unit mass in one cell
        let f = Field::new(grid, values).unwrap();
        let g = t.convolve(&f).unwrap();
        let scale = t.origin_cell_average();
        for i in 0..grid.len() {
            let expected = t.sample_at_offset([i as isize - center as isize, 0, 0]);
            assert!(
                (g.values()[i] - expected).abs() <= 1e-10 * scale,
                "cell {i}: {} vs {expected}",
                g.values()[i]
            );
        }
    }

    #[test]
    fn convolve_measure_single_atom_golden() {
        let grid = Grid::new(1, 64, 4.0).unwrap();
        let spec = KernelSpec::bessel(2.0, 1).unwrap();
        let t = KernelTable::build(spec, grid).unwrap();
        let mu = AtomicMeasure::new(vec![Atom { location: [0.0; 3], mass: 2.0 }], 1).unwrap();
        let field = t.convolve_measure(&mu).unwrap();
        // nearest cell center to x = 1
        let idx = (0..grid.len())
            .min_by(|&a, &b| {
                let da = (grid.point(a)[0] - 1.0).abs();
                let db = (grid.point(b)[0] - 1.0).abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        let x = grid.point(idx)[0];
        let expected = 2.0 * (-x.abs()).exp() / 2.0;
        assert!(((field.values()[idx] - expected) / expected).abs() < 1e-7);
    }

    #[test]
    fn convolve_measure_scales_linearly_and_zero_measure() {
        let grid = Grid::new(1, 32, 2.0).unwrap();
        let spec = KernelSpec::riesz(0.5, 1).unwrap();
        let t = KernelTable::build(spec, grid).unwrap();
        let mu = AtomicMeasure::new(vec![Atom { location: [0.3, 0.0, 0.0], mass: 1.0 }], 1).unwrap();
        let one = t.convolve_measure(&mu).unwrap();
        let two = t.convolve_measure(&mu.scaled(2.0)).unwrap();
        for (a, b) in one.values().iter().zip(two.values()) {
            assert!((2.0 * a - b).abs() < 1e-14 * b.abs().max(1.0));
        }
        let zero = AtomicMeasure::new(vec![], 1).unwrap();
        assert!(t.convolve_measure(&zero).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn convolve_measure_rejects_outside_atom() {
        let grid = Grid::new(1, 32, 2.0).unwrap();
        let spec = KernelSpec::riesz(0.5, 1).unwrap();
        let t = KernelTable::build(spec, grid).unwrap();
        let mu = AtomicMeasure::new(vec![Atom { location: [5.0, 0.0, 0.0], mass: 1.0 }], 1).unwrap();
        assert!(matches!(
            t.convolve_measure(&mu),
            Err(CoreError::AtomOutsideGrid { .. })
        ));
    }

    #[test]
    fn two_sided_constants_dim1_alpha2() {
        let spec = KernelSpec::bessel(2.0, 1).unwrap();
        let grid = Grid::new(1, 128, 4.0).unwrap();
        let (c1, c2) = check_two_sided(&spec, grid).unwrap();
        assert!(c1 >= 1.0 && c1.is_finite());
        assert!(c2 >= 1.0 && c2.is_finite());
        // G_2 = e^{-|x|}/2 gives ratio e^{|x| - |x+y|} <= e
        assert!(c2 <= std::f64::consts::E * (1.0 + 1e-6), "c2 = {c2}");
        assert!(c2 >= std::f64::consts::E * (1.0 - 1e-6), "c2 = {c2}");
    }

    #[test]
    fn spec_validation() {
        assert!(KernelSpec::riesz(1.5, 1).is_err());
        assert!(KernelSpec::riesz(-0.5, 2).is_err());
        assert!(KernelSpec::bessel(0.0, 1).is_err());
        assert!(KernelSpec::bessel(2.0, 4).is_err());
    }
}
