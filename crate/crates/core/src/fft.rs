//! Zero-padded multi-dimensional FFT plumbing for linear convolution.
//!
//! Fields on an `n^dim` grid are embedded in a `(2n)^dim` cube so that the
//! circular convolution of the padded arrays reproduces the linear (non
//! wrap-around) convolution on the original grid.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// FFT plans and layout for one `(2n)^dim` padded cube.
pub struct PadFft {
    dim: usize,
    n: usize,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl PadFft {
    pub fn new(dim: usize, n: usize) -> Self {
        let m = 2 * n;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        PadFft { dim, n, m, forward, inverse }
    }

    pub fn padded_per_axis(&self) -> usize {
        self.m
    }

    pub fn padded_len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    /// Embed `n^dim` real values at the low corner of the padded cube.
    pub fn pad_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.padded_len()];
        match self.dim {
            1 => {
                for (i, &v) in values.iter().enumerate() {
                    out[i] = Complex64::new(v, 0.0);
                }
            }
            2 => {
                for i in 0..self.n {
                    for j in 0..self.n {
                        out[i * self.m + j] = Complex64::new(values[i * self.n + j], 0.0);
                    }
                }
            }
            _ => {
                for i in 0..self.n {
                    for j in 0..self.n {
                        for k in 0..self.n {
                            out[(i * self.m + j) * self.m + k] =
                                Complex64::new(values[(i * self.n + j) * self.n + k], 0.0);
                        }
                    }
                }
            }
        }
        out
    }

    /// Real parts of the low-corner `n^dim` block, scaled by `scale`.
    pub fn extract_real(&self, padded: &[Complex64], scale: f64) -> Vec<f64> {
        let mut out = vec![0.0f64; self.n.pow(self.dim as u32)];
        match self.dim {
            1 => {
                for i in 0..self.n {
                    out[i] = padded[i].re * scale;
                }
            }
            2 => {
                for i in 0..self.n {
                    for j in 0..self.n {
                        out[i * self.n + j] = padded[i * self.m + j].re * scale;
                    }
                }
            }
            _ => {
                for i in 0..self.n {
                    for j in 0..self.n {
                        for k in 0..self.n {
                            out[(i * self.n + j) * self.n + k] =
                                padded[(i * self.m + j) * self.m + k].re * scale;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let m = self.m;
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        match self.dim {
            1 => plan.process_with_scratch(data, &mut scratch),
            2 => {
                // rows (contiguous)
                for row in data.chunks_exact_mut(m) {
                    plan.process_with_scratch(row, &mut scratch);
                }
                // columns
                let mut line = vec![Complex64::new(0.0, 0.0); m];
                for j in 0..m {
                    for i in 0..m {
                        line[i] = data[i * m + j];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for i in 0..m {
                        data[i * m + j] = line[i];
                    }
                }
            }
            _ => {
                // axis 2 (contiguous)
                for row in data.chunks_exact_mut(m) {
                    plan.process_with_scratch(row, &mut scratch);
                }
                let mut line = vec![Complex64::new(0.0, 0.0); m];
                // axis 1
                for i in 0..m {
                    for k in 0..m {
                        for j in 0..m {
                            line[j] = data[(i * m + j) * m + k];
                        }
                        plan.process_with_scratch(&mut line, &mut scratch);
                        for j in 0..m {
                            data[(i * m + j) * m + k] = line[j];
                        }
                    }
                }
                // axis 0
                for j in 0..m {
                    for k in 0..m {
                        for i in 0..m {
                            line[i] = data[(i * m + j) * m + k];
                        }
                        plan.process_with_scratch(&mut line, &mut scratch);
                        for i in 0..m {
                            data[(i * m + j) * m + k] = line[i];
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_roundtrip_scales_by_total_size() {
        let fft = PadFft::new(2, 4);
        let vals: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let mut data = fft.pad_real(&vals);
        fft.forward(&mut data);
        fft.inverse(&mut data);
        let back = fft.extract_real(&data, 1.0 / fft.padded_len() as f64);
        for (a, b) in back.iter().zip(&vals) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
