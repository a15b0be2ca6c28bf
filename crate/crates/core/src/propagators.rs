//! Exact heat semigroup, forced heat solver and linear transport solver, and
//! the measured-constant reports for their smoothing/stability estimates.
//!
//! The heat solver uses an integrating-factor RK4 (the stiff diagonal part is
//! applied exactly per mode), so the unforced solve reproduces the semigroup
//! to rounding error. Transport uses plain RK4 with dealiased convective
//! products.

use rustfft::num_complex::Complex64;

use crate::besov::{besov_norm, chemin_lerner_norm, cumulative_trapezoid, trapezoid, TimeSeries};
use crate::error::{Error, Result};
use crate::field::{Axis, ScalarField, VectorField2};
use crate::filter_bank::{BesovParams, DyadicFilterBank};

/// Snapshots of a linear solve at uniform multiples of `dt` from 0 to
/// `t_final`, including both endpoints.
#[derive(Clone, Debug)]
pub struct PropagatorRun<T> {
    pub snapshots: TimeSeries<T>,
    pub dt: f64,
    pub t_final: f64,
}

fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need T > 0 and dt > 0, got T = {t_final}, dt = {dt}"
        )));
    }
    if dt > t_final * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt} exceeds T = {t_final}"
        )));
    }
    let m = (t_final / dt).round();
    if (m * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "T = {t_final} is not an integer multiple of dt = {dt}"
        )));
    }
    Ok(m as usize)
}

/// `e^{tΔ} f`: per-mode multiplication by `e^{−|k|²t}`, exact in time.
pub fn heat_semigroup(f: &ScalarField, t: f64) -> Result<ScalarField> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "heat semigroup needs t >= 0, got {t}"
        )));
    }
    let grid = f.grid();
    let n = grid.n_points();
    let mut coeffs = f.coefficients().to_vec();
    for i in 0..n {
        for j in 0..n {
            coeffs[i * n + j] *= (-grid.k_squared(i, j) * t).exp();
        }
    }
    Ok(ScalarField::from_coefficients_unchecked(grid, coeffs))
}

pub fn heat_semigroup_vector(v: &VectorField2, t: f64) -> Result<VectorField2> {
    Ok(VectorField2 {
        x: heat_semigroup(&v.x, t)?,
        y: heat_semigroup(&v.y, t)?,
    })
}

fn heat_factors(grid: &crate::grid::TorusGrid, tau: f64) -> Vec<f64> {
    let n = grid.n_points();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = (-grid.k_squared(i, j) * tau).exp();
        }
    }
    out
}

fn apply_factor(coeffs: &[Complex64], factor: &[f64]) -> Vec<Complex64> {
    coeffs.iter().zip(factor).map(|(c, f)| c * f).collect()
}

fn axpy(a: f64, x: &[Complex64], y: &[Complex64]) -> Vec<Complex64> {
    x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect()
}

/// Solve `u_t − Δu = G` by integrating-factor RK4 in spectral space.
pub fn solve_heat(
    f0: &ScalarField,
    forcing: impl Fn(f64) -> ScalarField,
    t_final: f64,
    dt: f64,
) -> Result<PropagatorRun<ScalarField>> {
    let m = step_count(t_final, dt)?;
    let grid = f0.grid().clone();
    let e_half = heat_factors(&grid, dt / 2.0);
    let e_full = heat_factors(&grid, dt);

    let mut snapshots = TimeSeries::new();
    snapshots.push(0.0, f0.clone());
    let mut u = f0.coefficients().to_vec();

    for step in 0..m {
        let t = step as f64 * dt;
        let g0 = forcing(t).coefficients().to_vec();
        let g_half = forcing(t + dt / 2.0).coefficients().to_vec();
        let g1 = forcing(t + dt).coefficients().to_vec();

        // IF-RK4 for u' = Lu + G(t) with L = Δ applied exactly.
        let k1 = &g0;
        let k2 = &g_half; // forcing is state-independent
        let k3 = &g_half;
        let k4 = &g1;

        let mut next = apply_factor(&u, &e_full);
        let mut acc = apply_factor(k1, &e_full);
        let mid = axpy(1.0, k2, k3);
        let mid = apply_factor(&mid, &e_half);
        acc = axpy(2.0, &mid, &acc);
        acc = axpy(1.0, k4, &acc);
        next = axpy(dt / 6.0, &acc, &next);

        u = next;
        snapshots.push(
            (step + 1) as f64 * dt,
            ScalarField::from_coefficients_unchecked(&grid, u.clone()),
        );
    }
    Ok(PropagatorRun {
        snapshots,
        dt,
        t_final,
    })
}

pub fn solve_heat_vector(
    f0: &VectorField2,
    forcing: impl Fn(f64) -> VectorField2,
    t_final: f64,
    dt: f64,
) -> Result<PropagatorRun<VectorField2>> {
    let fx = solve_heat(&f0.x, |t| forcing(t).x, t_final, dt)?;
    let fy = solve_heat(&f0.y, |t| forcing(t).y, t_final, dt)?;
    let times = fx.snapshots.times().to_vec();
    let items: Vec<VectorField2> = fx
        .snapshots
        .items()
        .iter()
        .zip(fy.snapshots.items())
        .map(|(x, y)| VectorField2 {
            x: x.clone(),
            y: y.clone(),
        })
        .collect();
    Ok(PropagatorRun {
        snapshots: TimeSeries::from_parts(times, items)?,
        dt,
        t_final,
    })
}

/// Allowed relative divergence residual of a transport velocity.
pub const SOLENOIDAL_TOLERANCE: f64 = 1e-8;

fn advection_term(v: &VectorField2, f: &ScalarField) -> ScalarField {
    // Convective form (v·∇)f with a dealiased product.
    let d1 = f.derivative(Axis::X1);
    let d2 = f.derivative(Axis::X2);
    v.x.multiply(&d1).add(&v.y.multiply(&d2)).dealias()
}

/// Solve `f_t + v·∇f = g` by RK4 with spectral convective products.
/// Rejects velocities whose relative divergence residual exceeds
/// [`SOLENOIDAL_TOLERANCE`].
pub fn solve_transport(
    f0: &ScalarField,
    velocity: impl Fn(f64) -> VectorField2,
    forcing: impl Fn(f64) -> ScalarField,
    t_final: f64,
    dt: f64,
) -> Result<PropagatorRun<ScalarField>> {
    let m = step_count(t_final, dt)?;
    let grid = f0.grid().clone();
    let mut snapshots = TimeSeries::new();
    snapshots.push(0.0, f0.clone());
    let mut f = f0.clone();

    for step in 0..m {
        let t = step as f64 * dt;
        let v0 = velocity(t);
        let res = v0.divergence_residual();
        if res > SOLENOIDAL_TOLERANCE {
            return Err(Error::NonSolenoidal {
                residual: res,
                allowed: SOLENOIDAL_TOLERANCE,
            });
        }
        let v_half = velocity(t + dt / 2.0);
        let v1 = velocity(t + dt);
        let g0 = forcing(t);
        let g_half = forcing(t + dt / 2.0);
        let g1 = forcing(t + dt);

        let rhs = |v: &VectorField2, g: &ScalarField, f: &ScalarField| -> ScalarField {
            g.sub(&advection_term(v, f))
        };

        let k1 = rhs(&v0, &g0, &f);
        let k2 = rhs(&v_half, &g_half, &f.add(&k1.scale(dt / 2.0)));
        let k3 = rhs(&v_half, &g_half, &f.add(&k2.scale(dt / 2.0)));
        let k4 = rhs(&v1, &g1, &f.add(&k3.scale(dt)));

        let incr = k1.add(&k2.scale(2.0)).add(&k3.scale(2.0)).add(&k4);
        f = f.add(&incr.scale(dt / 6.0));
        snapshots.push((step + 1) as f64 * dt, f.clone());
    }
    let _ = grid;
    Ok(PropagatorRun {
        snapshots,
        dt,
        t_final,
    })
}

pub fn solve_transport_vector(
    f0: &VectorField2,
    velocity: impl Fn(f64) -> VectorField2,
    forcing: impl Fn(f64) -> VectorField2,
    t_final: f64,
    dt: f64,
) -> Result<PropagatorRun<VectorField2>> {
    let fx = solve_transport(&f0.x, &velocity, |t| forcing(t).x, t_final, dt)?;
    let fy = solve_transport(&f0.y, &velocity, |t| forcing(t).y, t_final, dt)?;
    let times = fx.snapshots.times().to_vec();
    let items: Vec<VectorField2> = fx
        .snapshots
        .items()
        .iter()
        .zip(fy.snapshots.items())
        .map(|(x, y)| VectorField2 {
            x: x.clone(),
            y: y.clone(),
        })
        .collect();
    Ok(PropagatorRun {
        snapshots: TimeSeries::from_parts(times, items)?,
        dt,
        t_final,
    })
}

/// Measured constant of the heat smoothing estimate: the ratio
/// `‖u‖_{L̃^q_T(B^{s+2/q})} / (‖u₀‖_{B^s} + ‖G‖_{L̃^{q1}_T(B^{s+2/q1−2})})`,
/// with `q1 ≤ q`.
#[allow(clippy::too_many_arguments)]
pub fn smoothing_ratio_report(
    u0: &ScalarField,
    forcing: impl Fn(f64) -> ScalarField + Copy,
    t_final: f64,
    dt: f64,
    q: f64,
    q1: f64,
    params: &BesovParams,
    bank: &DyadicFilterBank,
) -> Result<f64> {
    if q1 > q {
        return Err(Error::InvalidParameter(format!(
            "smoothing estimate needs q1 <= q, got q1 = {q1}, q = {q}"
        )));
    }
    let run = solve_heat(u0, forcing, t_final, dt)?;
    let sol_params = BesovParams::new(params.s + 2.0 / q, params.p, params.r)?;
    let numerator = chemin_lerner_norm(&run.snapshots, q, &sol_params, bank)?;

    let forcing_series = run.snapshots.map(|t, _| forcing(t));
    let force_params = BesovParams::new(params.s + 2.0 / q1 - 2.0, params.p, params.r)?;
    let denom = besov_norm(u0, params, bank)
        + chemin_lerner_norm(&forcing_series, q1, &force_params, bank)?;
    if denom == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(numerator / denom)
}

/// Measured constants of the transport estimates.
#[derive(Debug, Clone)]
pub struct TransportEstimateReport {
    /// Sup over time of `‖f(t)‖ / [(1 + ∫₀ᵗ‖∇v‖_{L^∞})(‖f₀‖ + ∫₀ᵗ‖g‖)]`.
    pub growth_ratio: f64,
    /// Sup over time of `‖f(t)‖ / [e^{V(t)}(‖f₀‖ + ∫₀ᵗ e^{−V}‖g‖)]` with
    /// `V(t) = ∫₀ᵗ max(‖∇v‖_{B^{d/p}_{p,r}}, ‖∇v‖_{L^∞})`.
    pub exponential_ratio: f64,
    /// Same with the endpoint weight `‖∇v‖_{B^{d/p}_{p,1}}`.
    pub exponential_ratio_endpoint: f64,
}

/// Compare a transport solution against the right sides of the linear
/// estimates, with `V′` built from the supplied velocity.
pub fn transport_estimate_report(
    run: &PropagatorRun<ScalarField>,
    velocity: impl Fn(f64) -> VectorField2,
    forcing: impl Fn(f64) -> ScalarField,
    params: &BesovParams,
    bank: &DyadicFilterBank,
) -> Result<TransportEstimateReport> {
    if run.snapshots.is_empty() {
        return Err(Error::EmptySeries);
    }
    let times = run.snapshots.times().to_vec();
    let f_norms: Vec<f64> = run
        .snapshots
        .items()
        .iter()
        .map(|f| besov_norm(f, params, bank))
        .collect();
    let g_norms: Vec<f64> = times
        .iter()
        .map(|&t| besov_norm(&forcing(t), params, bank))
        .collect();
    let f0_norm = f_norms[0];

    // ∇v measured three ways; the Besov norms sum all four partials.
    let d_over_p = 2.0 / params.p;
    let grad_params = BesovParams::new(d_over_p, params.p, params.r)?;
    let grad_params_endpoint = BesovParams::new(d_over_p, params.p, 1.0)?;
    let mut grad_inf = Vec::with_capacity(times.len());
    let mut grad_mixed = Vec::with_capacity(times.len());
    let mut grad_endpoint = Vec::with_capacity(times.len());
    for &t in &times {
        let v = velocity(t);
        let parts = [
            v.x.derivative(Axis::X1),
            v.x.derivative(Axis::X2),
            v.y.derivative(Axis::X1),
            v.y.derivative(Axis::X2),
        ];
        let linf = parts.iter().map(|p| p.max_abs()).fold(0.0f64, f64::max);
        let bes: f64 = parts.iter().map(|p| besov_norm(p, &grad_params, bank)).sum();
        let bes1: f64 = parts
            .iter()
            .map(|p| besov_norm(p, &grad_params_endpoint, bank))
            .sum();
        grad_inf.push(linf);
        grad_mixed.push(bes.max(linf));
        grad_endpoint.push(bes1);
    }

    let v_inf = cumulative_trapezoid(&times, &grad_inf);
    let g_cum = cumulative_trapezoid(&times, &g_norms);

    let mut growth_ratio = 0.0f64;
    for i in 0..times.len() {
        let rhs = (1.0 + v_inf[i]) * (f0_norm + g_cum[i]);
        if rhs > 0.0 {
            growth_ratio = growth_ratio.max(f_norms[i] / rhs);
        }
    }

    let exp_ratio = |weights: &[f64]| -> f64 {
        let v_cum = cumulative_trapezoid(&times, weights);
        let damped: Vec<f64> = g_norms
            .iter()
            .zip(&v_cum)
            .map(|(g, v)| g * (-v).exp())
            .collect();
        let damped_cum = cumulative_trapezoid(&times, &damped);
        let mut worst = 0.0f64;
        for i in 0..times.len() {
            let rhs = v_cum[i].exp() * (f0_norm + damped_cum[i]);
            if rhs > 0.0 {
                worst = worst.max(f_norms[i] / rhs);
            }
        }
        worst
    };

    Ok(TransportEstimateReport {
        growth_ratio,
        exponential_ratio: exp_ratio(&grad_mixed),
        exponential_ratio_endpoint: exp_ratio(&grad_endpoint),
    })
}

/// Convenience: total trapezoid value of a sampled scalar function.
pub fn time_integral(times: &[f64], values: &[f64]) -> f64 {
    trapezoid(times, values)
}
