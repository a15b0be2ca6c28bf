//! Dyadic filter bank: the radial low-pass `χ` and annulus filters
//! `φ(2⁻ʲ·)` sampled at the grid wavenumbers, and the block operators built
//! from them.
//!
//! The smooth radial profiles use the classical mollified-plateau
//! construction: `χ` equals 1 on `|ξ| ≤ 3/4`, vanishes for `|ξ| ≥ 4/3`, and
//! `φ(ξ) = χ(ξ/2) − χ(ξ)` is supported in the annulus `3/4 ≤ |ξ| ≤ 8/3`.
//!
//! On the integer lattice the lowest block is the plain mean, so the sampled
//! filters are renormalized per wavenumber: the stored `χ` is the indicator of
//! `ξ = 0`, and for every resolved `ξ ≠ 0` the `φ` family is scaled to sum to
//! one exactly. Only `|ξ| = 1` is affected (there `φ₀ = 1`); the support and
//! disjointness constraints are untouched, and block sums reconstruct the
//! field to rounding error.

use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::TorusGrid;

fn smooth_step(t: f64) -> f64 {
    // C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1.
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// Radial low-pass profile: 1 on `r ≤ 3/4`, 0 on `r ≥ 4/3`, smooth between.
pub fn chi_profile(r: f64) -> f64 {
    smooth_step((4.0 / 3.0 - r) / (4.0 / 3.0 - 3.0 / 4.0))
}

/// Radial annulus profile `φ(r) = χ(r/2) − χ(r)`, supported in `[3/4, 8/3]`.
pub fn phi_profile(r: f64) -> f64 {
    chi_profile(r / 2.0) - chi_profile(r)
}

/// Regularity/integrability/summability triple `(s, p, r)` of a Besov norm.
/// `p` and `r` use `f64::INFINITY` for the sup/max variants.
#[derive(Debug, Clone, Copy)]
pub struct BesovParams {
    pub s: f64,
    pub p: f64,
    pub r: f64,
}

impl BesovParams {
    pub fn new(s: f64, p: f64, r: f64) -> Result<Self> {
        if !(p >= 1.0) || !(r >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Besov parameters need p, r >= 1 (got p = {p}, r = {r})"
            )));
        }
        Ok(Self { s, p, r })
    }
}

pub struct DyadicFilterBank {
    grid: Arc<TorusGrid>,
    chi_values: Vec<f64>,
    phi_values: Vec<Vec<f64>>,
    j_max: i32,
}

impl DyadicFilterBank {
    pub fn build(grid: &Arc<TorusGrid>) -> Self {
        let n = grid.n_points();
        let xi_max = grid.max_resolved_wavenumber();

        // Smallest j whose annulus upper edge 2^j·(8/3) clears the grid.
        let mut j_max = 0i32;
        while (1u64 << j_max) as f64 * (8.0 / 3.0) <= xi_max {
            j_max += 1;
        }

        let mut chi_values = vec![0.0; n * n];
        chi_values[0] = 1.0;

        let mut phi_values = vec![vec![0.0; n * n]; (j_max + 1) as usize];
        for i in 0..n {
            for j in 0..n {
                let idx = i * n + j;
                let r = grid.k_squared(i, j).sqrt();
                if r == 0.0 {
                    continue;
                }
                let mut total = 0.0;
                for (jj, phi) in phi_values.iter_mut().enumerate() {
                    let v = phi_profile(r / (1u64 << jj) as f64);
                    phi[idx] = v;
                    total += v;
                }
                // Lattice renormalization: push any χ leakage (|ξ| < 4/3,
                // i.e. |ξ| = 1 on the integer lattice) into the φ family.
                if total > 0.0 {
                    for phi in phi_values.iter_mut() {
                        phi[idx] /= total;
                    }
                }
            }
        }

        Self {
            grid: grid.clone(),
            chi_values,
            phi_values,
            j_max,
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    /// Index range of possibly non-vanishing blocks, `-1 ..= j_max`.
    pub fn block_range(&self) -> std::ops::RangeInclusive<i32> {
        -1..=self.j_max
    }

    pub fn chi_values(&self) -> &[f64] {
        &self.chi_values
    }

    pub fn phi_values(&self, j: i32) -> Option<&[f64]> {
        if (0..=self.j_max).contains(&j) {
            Some(&self.phi_values[j as usize])
        } else {
            None
        }
    }

    /// `Δⱼ f`: the mean for `j = −1`, the `φ(2⁻ʲ·)`-filtered field for
    /// `0 ≤ j ≤ j_max`, and zero otherwise (`Δⱼ = 0` for `j ≤ −2`; blocks
    /// above `j_max` vanish on resolved data).
    pub fn dyadic_block(&self, f: &ScalarField, j: i32) -> ScalarField {
        let grid = f.grid();
        let n = grid.n_points();
        match j {
            -1 => {
                let mut coeffs = vec![Complex64::new(0.0, 0.0); n * n];
                coeffs[0] = Complex64::new(f.mean(), 0.0);
                ScalarField::from_coefficients_unchecked(grid, coeffs)
            }
            j if j < -1 || j > self.j_max => ScalarField::zeros(grid),
            j => {
                let filt = &self.phi_values[j as usize];
                let coeffs = f
                    .coefficients()
                    .iter()
                    .zip(filt)
                    .map(|(c, w)| c * w)
                    .collect();
                ScalarField::from_coefficients_unchecked(grid, coeffs)
            }
        }
    }

    /// `Sⱼ f = Σ_{j' < j} Δ_{j'} f`, applied as one combined multiplier.
    pub fn low_freq_cutoff(&self, f: &ScalarField, j: i32) -> ScalarField {
        let grid = f.grid();
        let n = grid.n_points();
        if j <= -1 {
            return ScalarField::zeros(grid);
        }
        let mut mask = self.chi_values.clone();
        for jj in 0..(j.min(self.j_max + 1)) {
            for (m, w) in mask.iter_mut().zip(&self.phi_values[jj as usize]) {
                *m += w;
            }
        }
        let coeffs = f
            .coefficients()
            .iter()
            .zip(&mask)
            .map(|(c, w)| c * w)
            .collect::<Vec<_>>();
        let _ = n;
        ScalarField::from_coefficients_unchecked(grid, coeffs)
    }

    /// Max over resolved wavenumbers of `|χ(ξ) + Σⱼ φⱼ(ξ) − 1|`.
    pub fn partition_residual(&self) -> f64 {
        let n = self.grid.n_points();
        let mut worst = 0.0f64;
        for idx in 0..n * n {
            let mut s = self.chi_values[idx];
            for phi in &self.phi_values {
                s += phi[idx];
            }
            worst = worst.max((s - 1.0).abs());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;
    use approx::assert_relative_eq;

    fn bank(n: usize) -> (Arc<TorusGrid>, DyadicFilterBank) {
        let grid = TorusGrid::new(n).unwrap();
        let bank = DyadicFilterBank::build(&grid);
        (grid, bank)
    }

    #[test]
    fn profiles_have_the_required_supports() {
        assert_eq!(chi_profile(0.0), 1.0);
        assert_eq!(chi_profile(0.75), 1.0);
        assert_eq!(chi_profile(4.0 / 3.0), 0.0);
        assert_eq!(chi_profile(2.0), 0.0);
        assert_eq!(phi_profile(0.74), 0.0);
        assert_eq!(phi_profile(8.0 / 3.0), 0.0);
        assert!(phi_profile(1.0) > 0.0);
        assert!(phi_profile(2.0) > 0.0);
        // Partition over dyadic scalings of the profile itself.
        for &r in &[0.3, 0.9, 1.7, 3.1, 10.4, 40.0] {
            let mut s = chi_profile(r);
            for j in 0..12 {
                s += phi_profile(r / (1u64 << j) as f64);
            }
            assert_relative_eq!(s, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn partition_of_unity_on_the_lattice() {
        for n in [16, 64, 128] {
            let (_, bank) = bank(n);
            assert!(
                bank.partition_residual() < 1e-12,
                "residual {} at n = {}",
                bank.partition_residual(),
                n
            );
        }
    }

    #[test]
    fn filter_values_lie_in_unit_interval_and_respect_supports() {
        let (grid, bank) = bank(64);
        let n = grid.n_points();
        for j in 0..=bank.j_max() {
            let phi = bank.phi_values(j).unwrap();
            let scale = (1u64 << j) as f64;
            for i in 0..n {
                for jj in 0..n {
                    let v = phi[i * n + jj];
                    assert!((-1e-15..=1.0 + 1e-15).contains(&v));
                    let r = grid.k_squared(i, jj).sqrt() / scale;
                    if !(0.75..=8.0 / 3.0).contains(&r) {
                        assert_eq!(v, 0.0, "phi_{j} nonzero at scaled radius {r}");
                    }
                }
            }
        }
    }

    #[test]
    fn dyadically_separated_filters_have_disjoint_support() {
        let (grid, bank) = bank(64);
        let n = grid.n_points();
        for j in 0..=bank.j_max() {
            for j2 in (j + 2)..=bank.j_max() {
                let a = bank.phi_values(j).unwrap();
                let b = bank.phi_values(j2).unwrap();
                for idx in 0..n * n {
                    assert_eq!(a[idx] * b[idx], 0.0);
                }
            }
            // χ is carried by ξ = 0 only, where every φ vanishes.
            let phi = bank.phi_values(j).unwrap();
            assert_eq!(phi[0], 0.0);
        }
    }

    #[test]
    fn squared_sums_are_between_half_and_one() {
        let (grid, bank) = bank(64);
        let n = grid.n_points();
        for idx in 0..n * n {
            let mut s = bank.chi_values()[idx] * bank.chi_values()[idx];
            for j in 0..=bank.j_max() {
                let v = bank.phi_values(j).unwrap()[idx];
                s += v * v;
            }
            assert!(
                (0.5 - 1e-12..=1.0 + 1e-12).contains(&s),
                "sum of squares {s} at idx {idx}"
            );
        }
    }

    #[test]
    fn unit_wavenumber_is_covered_by_block_zero_alone() {
        // |ξ| = 1 sits inside [3/4, 8/3] only for j = 0 among j ≥ 0; after
        // lattice renormalization φ₀ carries it entirely.
        let (grid, bank) = bank(64);
        let n = grid.n_points();
        for &(i, j) in &[(1usize, 0usize), (0, 1), (n - 1, 0), (0, n - 1)] {
            let idx = i * n + j;
            assert_relative_eq!(bank.phi_values(0).unwrap()[idx], 1.0, epsilon = 1e-13);
            for jj in 1..=bank.j_max() {
                assert_eq!(bank.phi_values(jj).unwrap()[idx], 0.0);
            }
            let chi_plus_phi: f64 = bank.chi_values()[idx] + bank.phi_values(0).unwrap()[idx];
            assert_relative_eq!(chi_plus_phi, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn constant_field_lives_in_the_mean_block() {
        let (grid, bank) = bank(32);
        let f = ScalarField::from_fn(&grid, |_, _| 2.5);
        let low = bank.dyadic_block(&f, -1);
        assert_relative_eq!(low.mean(), 2.5, epsilon = 1e-13);
        for v in low.values() {
            assert_relative_eq!(*v, 2.5, epsilon = 1e-12);
        }
        for j in 0..=bank.j_max() {
            assert!(bank.dyadic_block(&f, j).max_abs() < 1e-13);
        }
        assert_eq!(bank.dyadic_block(&f, -2).max_abs(), 0.0);
    }

    #[test]
    fn sine_mode_four_occupies_blocks_one_and_two() {
        // 3/4 ≤ 4/2^j ≤ 8/3 holds exactly for j ∈ {1, 2}.
        let (grid, bank) = bank(64);
        let f = ScalarField::from_fn(&grid, |x1, _| (4.0 * x1).sin());
        let mut nonzero = vec![];
        for j in -1..=bank.j_max() {
            if bank.dyadic_block(&f, j).max_abs() > 1e-13 {
                nonzero.push(j);
            }
        }
        assert_eq!(nonzero, vec![1, 2]);
        let sum = bank.dyadic_block(&f, 1).add(&bank.dyadic_block(&f, 2));
        let err = sum.sub(&f).max_abs();
        assert!(err < 1e-12, "reconstruction error {err}");
    }

    #[test]
    fn blocks_sum_back_to_the_field() {
        let (grid, bank) = bank(64);
        // Includes the mean and |ξ| = 1 content on purpose.
        let f = ScalarField::from_fn(&grid, |x1, x2| {
            0.7 + 1.3 * x1.sin() + (3.0 * x2).cos() - 0.2 * (9.0 * (x1 + x2)).sin()
        });
        let mut sum = ScalarField::zeros(&grid);
        for j in -1..=bank.j_max() {
            sum = sum.add(&bank.dyadic_block(&f, j));
        }
        let rel = sum.sub(&f).l2_norm_spectral() / f.l2_norm_spectral();
        assert!(rel < 1e-13, "relative reconstruction error {rel}");
    }

    #[test]
    fn almost_orthogonality_of_distant_blocks() {
        let (grid, bank) = bank(64);
        let f = ScalarField::from_fn(&grid, |x1, x2| (5.0 * x1).sin() + (11.0 * x2).cos());
        for j in -1..=bank.j_max() {
            for j2 in -1..=bank.j_max() {
                if (j - j2).abs() >= 2 {
                    let twice = bank.dyadic_block(&bank.dyadic_block(&f, j), j2);
                    assert!(twice.max_abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn low_freq_cutoff_limits() {
        let (grid, bank) = bank(64);
        let f = ScalarField::from_fn(&grid, |x1, x2| 0.4 + (4.0 * x1).sin() + (13.0 * x2).cos());
        // Sum over everything.
        let all = bank.low_freq_cutoff(&f, bank.j_max() + 5);
        assert!(all.sub(&f).max_abs() < 1e-12);
        // Empty sum.
        assert_eq!(bank.low_freq_cutoff(&f, -1).max_abs(), 0.0);
        // S₂ of the |ξ| = 4 part keeps exactly the j = 1 block.
        let g = ScalarField::from_fn(&grid, |x1, _| (4.0 * x1).sin());
        let s2 = bank.low_freq_cutoff(&g, 2);
        let d1 = bank.dyadic_block(&g, 1);
        assert!(s2.sub(&d1).max_abs() < 1e-13);
    }
}
