//! Scalar and vector fields on the torus, held jointly in collocation and
//! spectral form.
//!
//! Every field keeps `values` and `coefficients` in sync: constructors and all
//! operations return fully populated fields. The Fourier convention follows the
//! grid: the forward transform divides by `n²`, so `coefficients[0]` is the
//! spatial mean and `u(x) = Σ_k û(k) e^{ik·x}`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{check_same_grid, TorusGrid};

/// Differentiation axis; `X1` is the first (row) coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

#[derive(Clone)]
pub struct ScalarField {
    grid: Arc<TorusGrid>,
    values: Vec<f64>,
    coefficients: Vec<Complex64>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("n", &self.grid.n_points())
            .field("mean", &self.mean())
            .finish()
    }
}

impl ScalarField {
    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        let n2 = grid.n_points() * grid.n_points();
        Self {
            grid: grid.clone(),
            values: vec![0.0; n2],
            coefficients: vec![Complex64::new(0.0, 0.0); n2],
        }
    }

    /// Build from collocation values (forward transform populates the
    /// coefficients).
    pub fn from_values(grid: &Arc<TorusGrid>, values: Vec<f64>) -> Result<Self> {
        let n = grid.n_points();
        if values.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                n * n,
                values.len()
            )));
        }
        let mut coefficients: Vec<Complex64> =
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid.forward2d(&mut coefficients);
        Ok(Self {
            grid: grid.clone(),
            values,
            coefficients,
        })
    }

    /// Build from spectral coefficients. Rejects spectra that are not
    /// Hermitian-symmetric (the field would not be real).
    pub fn from_coefficients(grid: &Arc<TorusGrid>, coefficients: Vec<Complex64>) -> Result<Self> {
        let n = grid.n_points();
        if coefficients.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                n * n,
                coefficients.len()
            )));
        }
        let scale = coefficients
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max)
            .max(1e-300);
        let mut asym = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mi = (n - i) % n;
                let mj = (n - j) % n;
                let d = coefficients[i * n + j] - coefficients[mi * n + mj].conj();
                asym = asym.max(d.norm());
            }
        }
        if asym > 1e-12 * scale {
            return Err(Error::NotHermitian(asym / scale));
        }
        Ok(Self::from_coefficients_unchecked(grid, coefficients))
    }

    pub(crate) fn from_coefficients_unchecked(
        grid: &Arc<TorusGrid>,
        coefficients: Vec<Complex64>,
    ) -> Self {
        let mut work = coefficients.clone();
        grid.inverse2d(&mut work);
        let values = work.iter().map(|c| c.re).collect();
        Self {
            grid: grid.clone(),
            values,
            coefficients,
        }
    }

    /// Sample a function of `(x₁, x₂)` at the collocation points.
    pub fn from_fn(grid: &Arc<TorusGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n_points();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            let x1 = grid.point(i);
            for j in 0..n {
                values[i * n + j] = f(x1, grid.point(j));
            }
        }
        Self::from_values(grid, values).expect("length is correct by construction")
    }

    /// Build a real field from a list of modes `(k1, k2, amplitude)`; the
    /// conjugate mirror mode is inserted automatically, so the result equals
    /// `Σ 2·Re(a e^{ik·x})` per listed mode.
    pub fn from_modes(grid: &Arc<TorusGrid>, modes: &[(i64, i64, Complex64)]) -> Self {
        let n = grid.n_points() as i64;
        let mut coefficients = vec![Complex64::new(0.0, 0.0); (n * n) as usize];
        for &(k1, k2, a) in modes {
            let i = k1.rem_euclid(n) as usize;
            let j = k2.rem_euclid(n) as usize;
            let mi = (-k1).rem_euclid(n) as usize;
            let mj = (-k2).rem_euclid(n) as usize;
            coefficients[i * n as usize + j] += a;
            coefficients[mi * n as usize + mj] += a.conj();
        }
        Self::from_coefficients_unchecked(grid, coefficients)
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn mean(&self) -> f64 {
        self.coefficients[0].re
    }

    /// Spectral derivative along one axis: multiplication by `i·k`, with the
    /// Nyquist mode zeroed so derivatives of real fields stay real.
    pub fn derivative(&self, axis: Axis) -> Self {
        let n = self.grid.n_points();
        let nyquist = (n / 2) as i64;
        let mut coefficients = self.coefficients.clone();
        for i in 0..n {
            let k1 = self.grid.wavenumber(i);
            for j in 0..n {
                let k2 = self.grid.wavenumber(j);
                let k = match axis {
                    Axis::X1 => k1,
                    Axis::X2 => k2,
                };
                let c = &mut coefficients[i * n + j];
                if k == nyquist {
                    *c = Complex64::new(0.0, 0.0);
                } else {
                    *c *= Complex64::new(0.0, k as f64);
                }
            }
        }
        Self::from_coefficients_unchecked(&self.grid, coefficients)
    }

    /// 2/3-rule dealiasing: zero every coefficient with
    /// `max(|k₁|, |k₂|) > n/3`.
    pub fn dealias(&self) -> Self {
        let n = self.grid.n_points();
        let cutoff = n as f64 / 3.0;
        let mut coefficients = self.coefficients.clone();
        for i in 0..n {
            let k1 = self.grid.wavenumber(i).unsigned_abs() as f64;
            for j in 0..n {
                let k2 = self.grid.wavenumber(j).unsigned_abs() as f64;
                if k1.max(k2) > cutoff {
                    coefficients[i * n + j] = Complex64::new(0.0, 0.0);
                }
            }
        }
        Self::from_coefficients_unchecked(&self.grid, coefficients)
    }

    /// L^p norm over the torus. For finite `p` this is the collocation
    /// quadrature `((2π)² · mean |f|^p)^{1/p}`; for `p = ∞` the max over
    /// collocation points. `p < 1` is rejected.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p < 1.0 || p.is_nan() {
            return Err(Error::InvalidParameter(format!("L^p norm needs p >= 1, got {p}")));
        }
        if p.is_infinite() {
            return Ok(self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs())));
        }
        let n2 = self.values.len() as f64;
        let sum: f64 = if (p - 2.0).abs() < 1e-14 {
            self.values.iter().map(|&v| v * v).sum()
        } else if (p - 1.0).abs() < 1e-14 {
            self.values.iter().map(|&v| v.abs()).sum()
        } else {
            self.values.iter().map(|&v| v.abs().powf(p)).sum()
        };
        Ok((self.grid.measure() * sum / n2).powf(1.0 / p))
    }

    /// Spectral L² norm, `2π·(Σ_k |û(k)|²)^{1/2}`; equals `lp_norm(2)` by
    /// Parseval.
    pub fn l2_norm_spectral(&self) -> f64 {
        let s: f64 = self.coefficients.iter().map(|c| c.norm_sqr()).sum();
        self.grid.measure().sqrt() * s.sqrt()
    }

    /// Homogeneous Sobolev seminorm `(Σ_k |k|² |û|² (2π)²)^{1/2}`.
    pub fn h1dot_norm(&self) -> f64 {
        let n = self.grid.n_points();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.grid.k_squared(i, j) * self.coefficients[i * n + j].norm_sqr();
            }
        }
        self.grid.measure().sqrt() * s.sqrt()
    }

    /// Nonhomogeneous Sobolev norm `(Σ_k (1+|k|²)^s |û|² (2π)²)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let n = self.grid.n_points();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let w = (1.0 + self.grid.k_squared(i, j)).powf(s);
                acc += w * self.coefficients[i * n + j].norm_sqr();
            }
        }
        self.grid.measure().sqrt() * acc.sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, c: f64) -> Self {
        let values = self.values.iter().map(|&v| c * v).collect();
        let coefficients = self.coefficients.iter().map(|&z| c * z).collect();
        Self {
            grid: self.grid.clone(),
            values,
            coefficients,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        check_same_grid(&self.grid, &other.grid).expect("grid mismatch in add");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        let coefficients = self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
            coefficients,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Pointwise product in collocation space (no dealiasing applied here).
    pub fn multiply(&self, other: &Self) -> Self {
        check_same_grid(&self.grid, &other.grid).expect("grid mismatch in multiply");
        let values: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Self::from_values(&self.grid, values).expect("length preserved")
    }
}

/// Raw spectral kernels shared by the time steppers; they operate on bare
/// coefficient buffers to keep inner loops free of field bookkeeping.
pub(crate) mod raw {
    use super::*;

    pub fn to_physical(grid: &TorusGrid, coeffs: &[Complex64]) -> Vec<f64> {
        let mut w = coeffs.to_vec();
        grid.inverse2d(&mut w);
        w.iter().map(|c| c.re).collect()
    }

    pub fn to_spectral(grid: &TorusGrid, values: &[f64]) -> Vec<Complex64> {
        let mut w: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid.forward2d(&mut w);
        w
    }

    pub fn derivative(grid: &TorusGrid, coeffs: &[Complex64], axis: Axis) -> Vec<Complex64> {
        let n = grid.n_points();
        let nyquist = (n / 2) as i64;
        let mut out = coeffs.to_vec();
        for i in 0..n {
            let k1 = grid.wavenumber(i);
            for j in 0..n {
                let k2 = grid.wavenumber(j);
                let k = match axis {
                    Axis::X1 => k1,
                    Axis::X2 => k2,
                };
                let c = &mut out[i * n + j];
                if k == nyquist {
                    *c = Complex64::new(0.0, 0.0);
                } else {
                    *c *= Complex64::new(0.0, k as f64);
                }
            }
        }
        out
    }

    pub fn dealias_in_place(grid: &TorusGrid, coeffs: &mut [Complex64]) {
        let n = grid.n_points();
        let cutoff = n as f64 / 3.0;
        for i in 0..n {
            let k1 = grid.wavenumber(i).unsigned_abs() as f64;
            for j in 0..n {
                let k2 = grid.wavenumber(j).unsigned_abs() as f64;
                if k1.max(k2) > cutoff {
                    coeffs[i * n + j] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    pub fn leray_in_place(grid: &TorusGrid, cx: &mut [Complex64], cy: &mut [Complex64]) {
        let n = grid.n_points();
        for i in 0..n {
            let k1 = grid.wavenumber(i) as f64;
            for j in 0..n {
                let k2 = grid.wavenumber(j) as f64;
                let k2norm = k1 * k1 + k2 * k2;
                if k2norm == 0.0 {
                    continue;
                }
                let idx = i * n + j;
                let d = (cx[idx] * k1 + cy[idx] * k2) / k2norm;
                cx[idx] -= k1 * d;
                cy[idx] -= k2 * d;
            }
        }
    }

    /// `measure · Σ |ĉ|²` — the squared spectral L² norm.
    pub fn l2_sq(grid: &TorusGrid, coeffs: &[Complex64]) -> f64 {
        grid.measure() * coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// `measure · Σ |k|² |ĉ|²` — the squared homogeneous H¹ seminorm.
    pub fn h1dot_sq(grid: &TorusGrid, coeffs: &[Complex64]) -> f64 {
        let n = grid.n_points();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += grid.k_squared(i, j) * coeffs[i * n + j].norm_sqr();
            }
        }
        grid.measure() * s
    }

    /// Squared spectral L² norm of `i(k₁ĉx + k₂ĉy)` — the divergence.
    pub fn divergence_l2_sq(grid: &TorusGrid, cx: &[Complex64], cy: &[Complex64]) -> f64 {
        let n = grid.n_points();
        let mut s = 0.0;
        for i in 0..n {
            let k1 = grid.wavenumber(i) as f64;
            for j in 0..n {
                let k2 = grid.wavenumber(j) as f64;
                let idx = i * n + j;
                s += (cx[idx] * k1 + cy[idx] * k2).norm_sqr();
            }
        }
        grid.measure() * s
    }
}

#[derive(Clone, Debug)]
pub struct VectorField2 {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField2 {
    pub fn new(x: ScalarField, y: ScalarField) -> Result<Self> {
        check_same_grid(x.grid(), y.grid())?;
        Ok(Self { x, y })
    }

    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        Self {
            x: ScalarField::zeros(grid),
            y: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.x.grid()
    }

    pub fn divergence(&self) -> ScalarField {
        self.x.derivative(Axis::X1).add(&self.y.derivative(Axis::X2))
    }

    /// `∂₁ v₂ − ∂₂ v₁`, the scalar vorticity of a planar field.
    pub fn curl2d(&self) -> ScalarField {
        self.y.derivative(Axis::X1).sub(&self.x.derivative(Axis::X2))
    }

    /// Leray projection onto divergence-free fields: per mode
    /// `v̂ ↦ v̂ − k(k·v̂)/|k|²`, with the `k = 0` mode passed through.
    pub fn leray_project(&self) -> Self {
        let grid = self.grid().clone();
        let n = grid.n_points();
        let mut cx = self.x.coefficients().to_vec();
        let mut cy = self.y.coefficients().to_vec();
        for i in 0..n {
            let k1 = grid.wavenumber(i) as f64;
            for j in 0..n {
                let k2 = grid.wavenumber(j) as f64;
                let k2norm = k1 * k1 + k2 * k2;
                if k2norm == 0.0 {
                    continue;
                }
                let idx = i * n + j;
                let d = (cx[idx] * k1 + cy[idx] * k2) / k2norm;
                cx[idx] -= k1 * d;
                cy[idx] -= k2 * d;
            }
        }
        Self {
            x: ScalarField::from_coefficients_unchecked(&grid, cx),
            y: ScalarField::from_coefficients_unchecked(&grid, cy),
        }
    }

    pub fn dealias(&self) -> Self {
        Self {
            x: self.x.dealias(),
            y: self.y.dealias(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            x: self.x.scale(c),
            y: self.y.scale(c),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            x: self.x.add(&other.x),
            y: self.y.add(&other.y),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            x: self.x.sub(&other.x),
            y: self.y.sub(&other.y),
        }
    }

    /// Sum of component L^p norms (the additive convention used throughout).
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        Ok(self.x.lp_norm(p)? + self.y.lp_norm(p)?)
    }

    /// `(‖v₁‖² + ‖v₂‖²)^{1/2}` with spectral component norms.
    pub fn l2_norm(&self) -> f64 {
        let a = self.x.l2_norm_spectral();
        let b = self.y.l2_norm_spectral();
        (a * a + b * b).sqrt()
    }

    pub fn h1dot_norm(&self) -> f64 {
        let a = self.x.h1dot_norm();
        let b = self.y.h1dot_norm();
        (a * a + b * b).sqrt()
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let a = self.x.sobolev_norm(s);
        let b = self.y.sobolev_norm(s);
        (a * a + b * b).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.x.max_abs().max(self.y.max_abs())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Relative divergence residual `‖div v‖_{L²} / ‖v‖_{L²}` (zero for the
    /// zero field).
    pub fn divergence_residual(&self) -> f64 {
        let norm = self.l2_norm();
        if norm == 0.0 {
            return 0.0;
        }
        self.divergence().l2_norm_spectral() / norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rustfft::num_complex::Complex64;

    fn grid(n: usize) -> Arc<TorusGrid> {
        TorusGrid::new(n).unwrap()
    }

    #[test]
    fn constant_field_transforms_to_pure_mean() {
        let g = grid(32);
        let f = ScalarField::from_fn(&g, |_, _| 1.0);
        assert_relative_eq!(f.coefficients()[0].re, 1.0, epsilon = 1e-14);
        for (idx, c) in f.coefficients().iter().enumerate() {
            if idx != 0 {
                assert!(c.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn single_sine_mode_has_two_coefficients_of_magnitude_half() {
        let g = grid(32);
        let n = g.n_points();
        let f = ScalarField::from_fn(&g, |x1, _| (3.0 * x1).sin());
        // sin(3x₁) = (e^{i3x₁} − e^{−i3x₁}) / 2i.
        let plus = f.coefficients()[3 * n];
        let minus = f.coefficients()[(n - 3) * n];
        assert_relative_eq!(plus.norm(), 0.5, epsilon = 1e-13);
        assert_relative_eq!(minus.norm(), 0.5, epsilon = 1e-13);
        assert_relative_eq!(plus.im, -0.5, epsilon = 1e-13);
        let others: f64 = f
            .coefficients()
            .iter()
            .enumerate()
            .filter(|(idx, _)| *idx != 3 * n && *idx != (n - 3) * n)
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max);
        assert!(others < 1e-14);
    }

    #[test]
    fn roundtrip_reproduces_values() {
        let g = grid(64);
        let f = ScalarField::from_fn(&g, |x1, x2| {
            (5.0 * x1).sin() * (2.0 * x2).cos() + 0.3 * (x1 - 7.0 * x2).cos()
        });
        let back = ScalarField::from_coefficients(&g, f.coefficients().to_vec()).unwrap();
        let scale = f.max_abs();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn from_coefficients_rejects_non_hermitian_spectra() {
        let g = grid(16);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 256];
        coeffs[1] = Complex64::new(1.0, 0.5); // no conjugate partner
        assert!(matches!(
            ScalarField::from_coefficients(&g, coeffs),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn derivative_of_single_mode() {
        let g = grid(32);
        let f = ScalarField::from_fn(&g, |x1, _| (3.0 * x1).sin());
        let d = f.derivative(Axis::X1);
        let expect = ScalarField::from_fn(&g, |x1, _| 3.0 * (3.0 * x1).cos());
        assert!(d.sub(&expect).max_abs() < 1e-12);
        let c = ScalarField::from_fn(&g, |_, _| 4.2);
        assert!(c.derivative(Axis::X2).max_abs() < 1e-14);
    }

    #[test]
    fn mixed_partials_commute() {
        let g = grid(64);
        let f = ScalarField::from_fn(&g, |x1, x2| {
            (3.0 * x1 + 2.0 * x2).sin() + 0.5 * (9.0 * x2).cos() * (4.0 * x1).sin()
        });
        let d12 = f.derivative(Axis::X1).derivative(Axis::X2);
        let d21 = f.derivative(Axis::X2).derivative(Axis::X1);
        assert!(d12.sub(&d21).max_abs() < 1e-12 * f.max_abs().max(1.0));
    }

    #[test]
    fn leray_annihilates_gradients_and_keeps_solenoidal_fields() {
        let g = grid(32);
        let phi = ScalarField::from_fn(&g, |x1, x2| x1.sin() * x2.sin());
        let grad = VectorField2::new(phi.derivative(Axis::X1), phi.derivative(Axis::X2)).unwrap();
        let projected = grad.leray_project();
        assert!(projected.max_abs() < 1e-13);

        let sol = VectorField2::new(
            ScalarField::from_fn(&g, |_, x2| x2.sin()),
            ScalarField::from_fn(&g, |x1, _| x1.sin()),
        )
        .unwrap();
        let kept = sol.leray_project();
        assert!(kept.sub(&sol).max_abs() < 1e-13);
    }

    #[test]
    fn leray_per_mode_formula() {
        // v̂ = (1, 1) at k = (1, 0) projects to (0, 1).
        let g = grid(16);
        let n = g.n_points();
        let vx = ScalarField::from_modes(&g, &[(1, 0, Complex64::new(0.5, 0.0))]);
        let vy = vx.clone();
        let v = VectorField2::new(vx, vy).unwrap();
        let p = v.leray_project();
        assert!(p.x.coefficients()[n].norm() < 1e-14);
        assert_relative_eq!(p.y.coefficients()[n].re, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn leray_is_idempotent_and_divergence_free() {
        let g = grid(64);
        let v = VectorField2::new(
            ScalarField::from_fn(&g, |x1, x2| (2.0 * x1).sin() + (5.0 * x2).cos() * x1.sin()),
            ScalarField::from_fn(&g, |x1, x2| (3.0 * x2).sin() - (x1 + 4.0 * x2).cos()),
        )
        .unwrap();
        let once = v.leray_project();
        let twice = once.leray_project();
        assert!(twice.sub(&once).max_abs() < 1e-13 * v.max_abs());
        assert!(once.divergence_residual() < 1e-13);
        // The projection removes only the gradient part: curl is untouched.
        let dcurl = once.curl2d().sub(&v.curl2d());
        assert!(dcurl.max_abs() < 1e-12 * v.curl2d().max_abs().max(1.0));
    }

    #[test]
    fn curl_of_simple_fields() {
        let g = grid(32);
        let v = VectorField2::new(
            ScalarField::from_fn(&g, |_, x2| -(x2.sin())),
            ScalarField::from_fn(&g, |x1, _| x1.sin()),
        )
        .unwrap();
        let w = v.curl2d();
        let expect = ScalarField::from_fn(&g, |x1, x2| x1.cos() + x2.cos());
        assert!(w.sub(&expect).max_abs() < 1e-13);

        // curl of a gradient vanishes.
        let phi = ScalarField::from_fn(&g, |x1, x2| (2.0 * x1).cos() * (3.0 * x2).sin());
        let grad = VectorField2::new(phi.derivative(Axis::X1), phi.derivative(Axis::X2)).unwrap();
        assert!(grad.curl2d().max_abs() < 1e-12);
    }

    #[test]
    fn curl_of_paired_sine_family() {
        // u = s·(sin(n x₂), sin(n x₁)) has curl s·n·(cos(n x₁) − cos(n x₂)).
        let g = grid(64);
        let nmode = 4.0;
        let s = 0.37;
        let v = VectorField2::new(
            ScalarField::from_fn(&g, |_, x2| s * (nmode * x2).sin()),
            ScalarField::from_fn(&g, |x1, _| s * (nmode * x1).sin()),
        )
        .unwrap();
        let expect = ScalarField::from_fn(&g, |x1, x2| {
            s * nmode * ((nmode * x1).cos() - (nmode * x2).cos())
        });
        assert!(v.curl2d().sub(&expect).max_abs() < 1e-12);
    }

    #[test]
    fn lp_norms_of_reference_fields() {
        let g = grid(64);
        let tau = std::f64::consts::TAU;
        let one = ScalarField::from_fn(&g, |_, _| 1.0);
        assert_relative_eq!(one.lp_norm(2.0).unwrap(), tau, epsilon = 1e-12);

        let s4 = ScalarField::from_fn(&g, |x1, _| (4.0 * x1).sin());
        // Max is resolved because 64 is a multiple of 16.
        assert_relative_eq!(s4.lp_norm(f64::INFINITY).unwrap(), 1.0, epsilon = 1e-14);
        // ∫ sin² = measure / 2, exactly resolved quadrature.
        assert_relative_eq!(
            s4.lp_norm(2.0).unwrap(),
            (tau * tau / 2.0).sqrt(),
            epsilon = 1e-13
        );
        assert_relative_eq!(s4.l2_norm_spectral(), (tau * tau / 2.0).sqrt(), epsilon = 1e-12);

        assert!(one.lp_norm(0.5).is_err());
    }

    #[test]
    fn lp_norm_is_absolutely_homogeneous() {
        let g = grid(32);
        let f = ScalarField::from_fn(&g, |x1, x2| (3.0 * x1).sin() + 0.2 * (x2).cos());
        for &p in &[1.0, 2.0, 3.5, f64::INFINITY] {
            let a = f.scale(-2.75).lp_norm(p).unwrap();
            let b = 2.75 * f.lp_norm(p).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-13);
        }
    }

    #[test]
    fn dealias_keeps_low_modes_and_kills_high_ones() {
        let g = grid(32);
        let low = ScalarField::from_fn(&g, |x1, x2| (5.0 * x1).sin() * (3.0 * x2).cos());
        assert!(low.dealias().sub(&low).max_abs() < 1e-13);

        let nyquist = ScalarField::from_modes(&g, &[(16, 0, Complex64::new(0.5, 0.0))]);
        assert!(nyquist.dealias().max_abs() < 1e-15);
    }

    #[test]
    fn dealiased_product_matches_fine_grid_truncation() {
        // Oracle: form the same product on a doubled grid (alias-free there),
        // then compare the retained modes.
        let n = 32;
        let g = grid(n);
        let k = 8.0; // 2k = 16 > n/3, so the coarse product aliases
        let a = ScalarField::from_fn(&g, |x1, _| (k * x1).sin());
        let b = ScalarField::from_fn(&g, |_, x2| (k * x2).sin());
        let coarse = a.multiply(&b).dealias();

        let g2 = grid(2 * n);
        let a2 = ScalarField::from_fn(&g2, |x1, _| (k * x1).sin());
        let b2 = ScalarField::from_fn(&g2, |_, x2| (k * x2).sin());
        let fine = a2.multiply(&b2);

        let cutoff = n as f64 / 3.0;
        for i in 0..n {
            let k1 = g.wavenumber(i);
            for j in 0..n {
                let k2 = g.wavenumber(j);
                if (k1.unsigned_abs() as f64).max(k2.unsigned_abs() as f64) > cutoff {
                    continue;
                }
                let i2 = k1.rem_euclid(2 * n as i64) as usize;
                let j2 = k2.rem_euclid(2 * n as i64) as usize;
                let want = fine.coefficients()[i2 * 2 * n + j2];
                let got = coarse.coefficients()[i * n + j];
                assert!(
                    (want - got).norm() < 1e-13,
                    "mode ({k1},{k2}): fine {want} vs coarse {got}"
                );
            }
        }
    }
}
