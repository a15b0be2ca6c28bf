//! Initial-data library: the paired-sine presets, band-limited random
//! solenoidal draws, and the smallness-condition report.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use crate::besov::besov_norm_vector;
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField2};
use crate::filter_bank::{BesovParams, DyadicFilterBank};
use crate::grid::TorusGrid;
use crate::lifespan::compute_e0;
use crate::mhd::MHDState;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialDataKind {
    /// `u₀ = s·(sin(n x₂), sin(n x₁))/(10 n^{7/2})`,
    /// `b₀ = s·(sin(n x₂), sin(n x₁))/(10 n^{5/2})` — the `remark15` preset:
    /// a family whose high-regularity size grows with `n` while its
    /// low-regularity size shrinks.
    Remark15 { n: u32 },
    /// Velocity-only paired sine `u₀ = s·(sin(n x₂), sin(n x₁))`, `b₀ = 0`.
    SingleMode { n: u32 },
    /// Band-limited complex-Gaussian draw for both fields, projected
    /// divergence-free, mean-zero, jointly rescaled so that
    /// `‖u₀‖_{B¹_{∞,1}} + ‖b₀‖_{B⁰_{∞,1}} = s`.
    RandomSolenoidal { band: (u32, u32), seed: u64 },
    /// Snapshot files written by this toolkit (vector kind), scaled by `s`.
    File { u_path: String, b_path: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialDataSpec {
    pub kind: InitialDataKind,
    pub scale: f64,
}

/// `(sin(m x₂), sin(m x₁))` built in spectral space (exactly solenoidal and
/// mean-free).
pub fn sine_pair(grid: &Arc<TorusGrid>, m: i64, amplitude: f64) -> VectorField2 {
    let half_i = Complex64::new(0.0, -0.5 * amplitude);
    VectorField2 {
        x: ScalarField::from_modes(grid, &[(0, m, half_i)]),
        y: ScalarField::from_modes(grid, &[(m, 0, half_i)]),
    }
}

fn check_mode_resolved(grid: &TorusGrid, n: u32) -> Result<()> {
    let cutoff = grid.n_points() as f64 / 3.0;
    if n as f64 > cutoff {
        return Err(Error::InvalidParameter(format!(
            "mode n = {n} lies beyond the dealiasing cutoff {cutoff:.1} of a {}-point grid",
            grid.n_points()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("mode n must be positive".into()));
    }
    Ok(())
}

/// One band-limited Hermitian Gaussian draw, mean-zero.
fn random_scalar(
    grid: &Arc<TorusGrid>,
    rng: &mut ChaCha8Rng,
    band: (u32, u32),
) -> ScalarField {
    let n = grid.n_points();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        let k1 = grid.wavenumber(i);
        for j in 0..n {
            let k2 = grid.wavenumber(j);
            let modulus = ((k1 * k1 + k2 * k2) as f64).sqrt();
            if modulus < band.0 as f64 || modulus > band.1 as f64 {
                continue;
            }
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            coeffs[i * n + j] = Complex64::new(re, im);
        }
    }
    // Hermitian symmetrization; the Nyquist row/column never carries a band
    // this narrow, but clear it anyway.
    let src = coeffs.clone();
    for i in 0..n {
        for j in 0..n {
            let mi = (n - i) % n;
            let mj = (n - j) % n;
            coeffs[i * n + j] = 0.5 * (src[i * n + j] + src[mi * n + mj].conj());
        }
    }
    for i in 0..n {
        coeffs[i * n + n / 2] = Complex64::new(0.0, 0.0);
        coeffs[(n / 2) * n + i] = Complex64::new(0.0, 0.0);
    }
    coeffs[0] = Complex64::new(0.0, 0.0);
    ScalarField::from_coefficients_unchecked(grid, coeffs)
}

/// Random solenoidal vector field in a wavenumber band, unscaled.
pub fn random_solenoidal(
    grid: &Arc<TorusGrid>,
    rng: &mut ChaCha8Rng,
    band: (u32, u32),
) -> VectorField2 {
    VectorField2 {
        x: random_scalar(grid, rng, band),
        y: random_scalar(grid, rng, band),
    }
    .leray_project()
}

/// Two independent seeded solenoidal draws (e.g. a perturbation direction
/// pair for stability experiments).
pub fn random_solenoidal_pair(
    grid: &Arc<TorusGrid>,
    seed: u64,
    band: (u32, u32),
) -> (VectorField2, VectorField2) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_solenoidal(grid, &mut rng, band);
    let b = random_solenoidal(grid, &mut rng, band);
    (a, b)
}

/// Smallness quantity `‖u‖_{B¹_{∞,1}} + ‖b‖_{B⁰_{∞,1}}` used by the
/// global-existence condition and the random-data normalization.
pub fn smallness_norm(u: &VectorField2, b: &VectorField2, bank: &DyadicFilterBank) -> f64 {
    let b1 = BesovParams::new(1.0, f64::INFINITY, 1.0).expect("static params");
    let b0 = BesovParams::new(0.0, f64::INFINITY, 1.0).expect("static params");
    besov_norm_vector(u, &b1, bank) + besov_norm_vector(b, &b0, bank)
}

pub fn make_initial_data(
    spec: &InitialDataSpec,
    grid: &Arc<TorusGrid>,
    bank: &DyadicFilterBank,
) -> Result<MHDState> {
    let (u, b) = match &spec.kind {
        InitialDataKind::Remark15 { n } => {
            check_mode_resolved(grid, *n)?;
            let nf = *n as f64;
            let su = spec.scale / (10.0 * nf.powf(3.5));
            let sb = spec.scale / (10.0 * nf.powf(2.5));
            (
                sine_pair(grid, *n as i64, su),
                sine_pair(grid, *n as i64, sb),
            )
        }
        InitialDataKind::SingleMode { n } => {
            check_mode_resolved(grid, *n)?;
            (
                sine_pair(grid, *n as i64, spec.scale),
                VectorField2::zeros(grid),
            )
        }
        InitialDataKind::RandomSolenoidal { band, seed } => {
            if band.0 > band.1 || band.1 as f64 > grid.n_points() as f64 / 3.0 || band.0 == 0 {
                return Err(Error::InvalidParameter(format!(
                    "band {band:?} is empty or reaches past the dealiasing cutoff"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let u = random_solenoidal(grid, &mut rng, *band);
            let b = random_solenoidal(grid, &mut rng, *band);
            let size = smallness_norm(&u, &b, bank);
            if size == 0.0 {
                return Err(Error::InvalidParameter(
                    "random draw produced an empty field".into(),
                ));
            }
            let factor = spec.scale / size;
            (u.scale(factor), b.scale(factor))
        }
        InitialDataKind::File { u_path, b_path } => {
            let u = crate::snapshot::read_vector(u_path)?;
            let b = crate::snapshot::read_vector(b_path)?;
            (u.scale(spec.scale), b.scale(spec.scale))
        }
    };
    MHDState::new(u, b, 0.0)
}

/// Everything the global-existence smallness conditions look at, measured on
/// one state. All constants are configuration inputs; the report carries the
/// comparison, not a verdict about the estimates themselves.
#[derive(Debug, Clone)]
pub struct SmallnessReport {
    pub mean_b: (f64, f64),
    /// `‖u‖_{B¹_{∞,1}} + ‖b‖_{B⁰_{∞,1}}`.
    pub smallness: f64,
    pub epsilon: f64,
    pub smallness_passes: bool,
    /// `‖u‖_{L²} + ‖b‖_{L²}`.
    pub l2_sum: f64,
    pub e0: f64,
    /// `θ = 1 − 2/s`.
    pub theta: f64,
    /// `θ̄ = 1 − 1/(s−1)`.
    pub theta_bar: f64,
    /// `C·(‖u‖_{H^s} + ‖b‖_{H^{s−1}})`.
    pub c_e0: f64,
    /// `min{1/(8C²), (cθ̄/(C_{E₀}+1))^{1/θ̄}, (‖b‖_{B⁰_{∞,1}}/C_{E₀})^{1/θ̄}}`.
    pub l2_threshold: f64,
    pub l2_passes: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn check_smallness_conditions(
    state: &MHDState,
    p: f64,
    s: f64,
    constant_c: f64,
    constant_c_small: f64,
    epsilon: f64,
    bank: &DyadicFilterBank,
) -> Result<SmallnessReport> {
    if s <= 2.0 {
        return Err(Error::InvalidParameter(format!(
            "smallness report needs s > 2, got {s}"
        )));
    }
    let mean_b = (state.b.x.mean(), state.b.y.mean());
    let smallness = smallness_norm(&state.u, &state.b, bank);
    let l2_sum = state.u.l2_norm() + state.b.l2_norm();
    let e0 = compute_e0(&state.u, &state.b, p, bank);
    let theta = 1.0 - 2.0 / s;
    let theta_bar = 1.0 - 1.0 / (s - 1.0);
    let c_e0 = constant_c * (state.u.sobolev_norm(s) + state.b.sobolev_norm(s - 1.0));

    let b0 = BesovParams::new(0.0, f64::INFINITY, 1.0)?;
    let b_low = besov_norm_vector(&state.b, &b0, bank);
    let l2_threshold = (1.0 / (8.0 * constant_c * constant_c))
        .min(((constant_c_small * theta_bar) / (c_e0 + 1.0)).powf(1.0 / theta_bar))
        .min(if c_e0 > 0.0 {
            (b_low / c_e0).powf(1.0 / theta_bar)
        } else {
            f64::INFINITY
        });

    Ok(SmallnessReport {
        mean_b,
        smallness,
        epsilon,
        smallness_passes: smallness <= epsilon,
        l2_sum,
        e0,
        theta,
        theta_bar,
        c_e0,
        l2_threshold,
        l2_passes: l2_sum <= l2_threshold,
    })
}
