use std::sync::Arc;

use num_complex::Complex64;

use crate::density::DensityMatrix;
use crate::state::SpatialGrid;

/// Running sum `Σ_n ψ_n(x_i) ψ_n*(x_j)`, upper triangle only.
#[derive(Debug, Clone)]
pub(crate) struct KernelSum {
    grid: Arc<SpatialGrid>,
    count: usize,
    sum: Vec<Complex64>,
}

/// States folded into the sum per pass over the kernel.
const BLOCK: usize = 16;

impl KernelSum {
    pub fn new(grid: Arc<SpatialGrid>) -> Self {
        let n = grid.len();
        Self { grid, count: 0, sum: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds the outer products of `states`, in order.
    pub fn add(&mut self, states: &[&[Complex64]]) {
        let n = self.grid.len();
        for block in states.chunks(BLOCK) {
            for i in 0..n {
                let row = &mut self.sum[i * n + i..(i + 1) * n];
                for s in block {
                    let a = s[i];
                    for (r, b) in row.iter_mut().zip(&s[i..]) {
                        *r += a * b.conj();
                    }
                }
            }
            self.count += block.len();
        }
    }

    /// The average, made Hermitian by mirroring the upper triangle.
    pub fn mean(&self) -> Option<DensityMatrix> {
        if self.count == 0 {
            return None;
        }
        let n = self.grid.len();
        let inv = 1.0 / self.count as f64;
        let mut k = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            k[i * n + i] = Complex64::new(self.sum[i * n + i].re * inv, 0.0);
            for j in i + 1..n {
                let z = self.sum[i * n + j] * inv;
                k[i * n + j] = z;
                k[j * n + i] = z.conj();
            }
        }
        DensityMatrix::from_kernel(self.grid.clone(), k).ok()
    }
}
