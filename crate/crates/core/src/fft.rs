//! Multi-dimensional complex FFTs built from per-axis `rustfft` plans.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

const COLUMN_BATCH: usize = 32;

pub(crate) struct FftEngine {
    sizes: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl FftEngine {
    pub fn new(sizes: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = sizes.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = sizes.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self {
            sizes: sizes.to_vec(),
            forward,
            inverse,
        }
    }

    /// Unnormalized forward transform `f_k = sum_j f_j exp(-i k x_j)`.
    pub fn forward(&self, data: &mut [Complex64]) {
        for axis in 0..self.sizes.len() {
            self.axis_pass(data, axis, &self.forward[axis]);
        }
    }

    /// Inverse transform including the `1/N` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        for axis in 0..self.sizes.len() {
            self.axis_pass(data, axis, &self.inverse[axis]);
        }
        let scale = 1.0 / data.len() as f64;
        data.par_iter_mut().for_each(|z| *z *= scale);
    }

    fn axis_pass(&self, data: &mut [Complex64], axis: usize, plan: &Arc<dyn Fft<f64>>) {
        let n = self.sizes[axis];
        let stride: usize = self.sizes[axis + 1..].iter().product();
        if stride == 1 {
            let rows_per_chunk = (4096 / n).max(1);
            data.par_chunks_mut(n * rows_per_chunk).for_each_init(
                || vec![Complex64::default(); plan.get_inplace_scratch_len()],
                |scratch, chunk| plan.process_with_scratch(chunk, scratch),
            );
            return;
        }
        let block = n * stride;
        data.par_chunks_mut(block).for_each_init(
            || {
                (
                    vec![Complex64::default(); n * COLUMN_BATCH.min(stride)],
                    vec![Complex64::default(); plan.get_inplace_scratch_len()],
                )
            },
            |(buf, scratch), chunk| {
                let mut col = 0;
                while col < stride {
                    let width = COLUMN_BATCH.min(stride - col);
                    for i in 0..n {
                        let row = &chunk[i * stride + col..i * stride + col + width];
                        for (b, &z) in row.iter().enumerate() {
                            buf[b * n + i] = z;
                        }
                    }
                    plan.process_with_scratch(&mut buf[..width * n], scratch);
                    for i in 0..n {
                        let row = &mut chunk[i * stride + col..i * stride + col + width];
                        for (b, z) in row.iter_mut().enumerate() {
                            *z = buf[b * n + i];
                        }
                    }
                    col += width;
                }
            },
        );
    }
}
