//! Uniform collocation grid on the square torus `[0, 2π)²` and the FFT
//! machinery shared by every field living on it.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Side length of the torus in each direction.
pub const DOMAIN_LENGTH: f64 = std::f64::consts::TAU;

pub(crate) struct FftPlans {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPlans {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// In-place 2D DFT, normalized by `1/n²` so the `k = 0` coefficient is the
    /// spatial mean.
    pub fn forward2d(&self, data: &mut [Complex64]) {
        self.all_lanes(data, &self.forward);
        let scale = 1.0 / (self.n * self.n) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// In-place unnormalized inverse 2D DFT: `u(x) = Σ_k û(k) e^{ik·x}`.
    pub fn inverse2d(&self, data: &mut [Complex64]) {
        self.all_lanes(data, &self.inverse);
    }

    fn all_lanes(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        debug_assert_eq!(data.len(), n * n);
        TRANSPOSE_SCRATCH.with(|cell| {
            let mut t = cell.borrow_mut();
            t.clear();
            t.resize(n * n, Complex64::new(0.0, 0.0));
            process_rows(plan, data, n);
            transpose(data, &mut t, n);
            process_rows(plan, &mut t, n);
            transpose(&t, data, n);
        });
    }
}

thread_local! {
    static TRANSPOSE_SCRATCH: std::cell::RefCell<Vec<Complex64>> =
        std::cell::RefCell::new(Vec::new());
}

fn process_rows(plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64], n: usize) {
    use rayon::prelude::*;
    let threads = rayon::current_num_threads();
    if n >= 64 && threads > 1 {
        // One contiguous chunk of rows per thread; rows are independent, so
        // the parallel split cannot change results.
        let rows_per_chunk = n.div_ceil(threads);
        data.par_chunks_mut(rows_per_chunk * n).for_each_init(
            || vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()],
            |scratch, chunk| {
                for row in chunk.chunks_exact_mut(n) {
                    plan.process_with_scratch(row, scratch);
                }
            },
        );
    } else {
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for row in data.chunks_exact_mut(n) {
            plan.process_with_scratch(row, &mut scratch);
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const BLOCK: usize = 16;
    for ib in (0..n).step_by(BLOCK) {
        for jb in (0..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                for j in jb..(jb + BLOCK).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}

/// The discretized torus: `n × n` collocation points on `[0, 2π)²` and the
/// integer wavenumber lattice truncated to `|k_i| ≤ n/2`.
pub struct TorusGrid {
    n: usize,
    wavenumbers: Vec<i64>,
    plans: FftPlans,
}

impl std::fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusGrid").field("n", &self.n).finish()
    }
}

impl TorusGrid {
    /// `n` must be a power of two, at least 8.
    pub fn new(n: usize) -> Result<Arc<Self>> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::BadGridSize(n));
        }
        let half = (n / 2) as i64;
        let wavenumbers = (0..n as i64)
            .map(|m| if m <= half { m } else { m - n as i64 })
            .collect();
        Ok(Arc::new(Self {
            n,
            wavenumbers,
            plans: FftPlans::new(n),
        }))
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn domain_length(&self) -> f64 {
        DOMAIN_LENGTH
    }

    /// Measure of the torus, `(2π)²`.
    pub fn measure(&self) -> f64 {
        DOMAIN_LENGTH * DOMAIN_LENGTH
    }

    /// Signed wavenumber carried by FFT bin `m` (the `n/2` bin holds the
    /// Nyquist mode `+n/2`).
    pub fn wavenumber(&self, bin: usize) -> i64 {
        self.wavenumbers[bin]
    }

    pub fn wavenumbers(&self) -> &[i64] {
        &self.wavenumbers
    }

    /// Euclidean length of the largest resolved wavenumber, `√2 · n/2`.
    pub fn max_resolved_wavenumber(&self) -> f64 {
        let h = (self.n / 2) as f64;
        (2.0 * h * h).sqrt()
    }

    /// Collocation coordinate of index `i` along either axis.
    pub fn point(&self, i: usize) -> f64 {
        DOMAIN_LENGTH * i as f64 / self.n as f64
    }

    pub(crate) fn forward2d(&self, data: &mut [Complex64]) {
        self.plans.forward2d(data);
    }

    pub(crate) fn inverse2d(&self, data: &mut [Complex64]) {
        self.plans.inverse2d(data);
    }

    /// `|k|²` for the bin pair `(i, j)`.
    #[inline]
    pub fn k_squared(&self, i: usize, j: usize) -> f64 {
        let k1 = self.wavenumbers[i] as f64;
        let k2 = self.wavenumbers[j] as f64;
        k1 * k1 + k2 * k2
    }
}

pub(crate) fn check_same_grid(a: &TorusGrid, b: &TorusGrid) -> Result<()> {
    if a.n_points() == b.n_points() {
        Ok(())
    } else {
        Err(Error::GridMismatch(a.n_points(), b.n_points()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(TorusGrid::new(7).is_err());
        assert!(TorusGrid::new(4).is_err());
        assert!(TorusGrid::new(48).is_err());
        assert!(TorusGrid::new(64).is_ok());
    }

    #[test]
    fn wavenumbers_are_symmetric_under_negation() {
        let grid = TorusGrid::new(16).unwrap();
        let ks = grid.wavenumbers();
        for &k in ks {
            // The Nyquist bin maps to itself modulo n, so only |k| < n/2 pairs.
            if k.unsigned_abs() as usize != grid.n_points() / 2 {
                assert!(ks.contains(&-k));
            }
        }
        assert_eq!(*ks.iter().max().unwrap(), 8);
        assert_eq!(*ks.iter().min().unwrap(), -7);
    }
}
