//! Computable local-existence time from the initial data: the data size
//! `E₀`, the smallness parameter `a = 1/(24C)`, the dyadic tail index `j₀`,
//! and the guaranteed horizon
//!
//! ```text
//! T = T₀                    if ‖u₀‖_{B^{d/p−1}_{p,1}} ≤ a   (small data)
//! T = min{T₀, T₁, T₂}       otherwise                       (large data)
//! ```
//!
//! with `T₀ = min{1, (96CE₀)⁻², (96Ca)⁻², (72CE₀)⁻¹, ln2/(12CE₀)}`,
//! `T₁ = (a/4)·2^{−2j₀}/‖u₀‖_{B^{d/p}_{p,1}}` and
//! `T₂ = (a²/16)·2^{−2j₀}/‖u₀‖²_{B^{d/p}_{p,1}}` (d = 2). The constant `C`
//! stands in for the unknowable constants of the linear estimates and is a
//! configuration input; every report carries the value used.

use crate::besov::besov_norm_vector;
use crate::error::{Error, Result};
use crate::field::VectorField2;
use crate::filter_bank::{BesovParams, DyadicFilterBank};
use crate::propagators::heat_semigroup_vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifespanBranch {
    SmallData,
    LargeData,
}

#[derive(Debug, Clone)]
pub struct LifespanReport {
    /// `E₀ = ‖b₀‖_{B^{2/p}_{p,1}} + ‖u₀‖_{B^{2/p+1}_{p,1}}`.
    pub e0: f64,
    /// Smallness parameter `a = 1/(24C)`.
    pub a: f64,
    /// Configured estimate constant.
    pub c: f64,
    pub p: f64,
    /// `‖u₀‖_{B^{2/p−1}_{p,1}}`, the branch selector.
    pub u0_low_norm: f64,
    pub j0: Option<u32>,
    pub t0: f64,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub t: f64,
    pub branch: LifespanBranch,
}

/// `E₀` for `d = 2`.
pub fn compute_e0(u0: &VectorField2, b0: &VectorField2, p: f64, bank: &DyadicFilterBank) -> f64 {
    let dp = 2.0 / p;
    let b_params = BesovParams::new(dp, p, 1.0).expect("p validated upstream");
    let u_params = BesovParams::new(dp + 1.0, p, 1.0).expect("p validated upstream");
    besov_norm_vector(b0, &b_params, bank) + besov_norm_vector(u0, &u_params, bank)
}

/// Weighted dyadic tail `Σ_{|j| ≥ j₀} 2^{(2/p)j} ‖Δⱼu₀‖_{L^p}` on the grid.
/// The `j = −1` block enters the tail only for `j₀ = 0`; blocks above `j_max`
/// vanish on resolved data.
pub fn dyadic_tail(u0: &VectorField2, j0: u32, p: f64, bank: &DyadicFilterBank) -> f64 {
    let dp = 2.0 / p;
    let mut tail = 0.0;
    for j in bank.block_range() {
        let in_tail = if j == -1 { j0 == 0 } else { j >= j0 as i32 };
        if !in_tail {
            continue;
        }
        let w = 2f64.powf(dp * j as f64);
        let bx = bank.dyadic_block(&u0.x, j).lp_norm(p).expect("p >= 1");
        let by = bank.dyadic_block(&u0.y, j).lp_norm(p).expect("p >= 1");
        tail += w * (bx + by);
    }
    tail
}

/// Smallest `j₀ ≥ 0` whose dyadic tail falls below `a/4`. Always exists on a
/// band-limited grid (the tail beyond `j_max` is zero).
pub fn find_j0(u0: &VectorField2, a: f64, p: f64, bank: &DyadicFilterBank) -> Result<u32> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("need a > 0, got {a}")));
    }
    let mut j0 = 0u32;
    loop {
        if dyadic_tail(u0, j0, p, bank) < a / 4.0 {
            return Ok(j0);
        }
        j0 += 1;
        if j0 as i32 > bank.j_max() + 1 {
            // Tail is empty here; numerically this is zero < a/4.
            return Ok(j0);
        }
    }
}

/// Evaluate the lifespan formula. Zero data is handled by treating the
/// `1/E₀`-type guards as `+∞`.
pub fn compute_lifespan(
    u0: &VectorField2,
    b0: &VectorField2,
    p: f64,
    constant_c: f64,
    bank: &DyadicFilterBank,
) -> Result<LifespanReport> {
    if !(constant_c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need C > 0, got {constant_c}"
        )));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("need p >= 1, got {p}")));
    }
    let c = constant_c;
    let a = 1.0 / (24.0 * c);
    let e0 = compute_e0(u0, b0, p, bank);

    // Zero data turns the 1/E₀-type guards into +∞.
    let inv = |x: f64| if x > 0.0 { 1.0 / x } else { f64::INFINITY };
    let t0 = 1.0f64
        .min(inv((96.0 * c * e0).powi(2)))
        .min(inv((96.0 * c * a).powi(2)))
        .min(inv(72.0 * c * e0))
        .min(2f64.ln() * inv(12.0 * c * e0));

    let dp = 2.0 / p;
    let low_params = BesovParams::new(dp - 1.0, p, 1.0)?;
    let u0_low_norm = besov_norm_vector(u0, &low_params, bank);

    if u0_low_norm <= a {
        return Ok(LifespanReport {
            e0,
            a,
            c,
            p,
            u0_low_norm,
            j0: None,
            t0,
            t1: None,
            t2: None,
            t: t0,
            branch: LifespanBranch::SmallData,
        });
    }

    let j0 = find_j0(u0, a, p, bank)?;
    let mid_params = BesovParams::new(dp, p, 1.0)?;
    let u0_mid_norm = besov_norm_vector(u0, &mid_params, bank);
    let pow = 2f64.powi(-2 * j0 as i32);
    let t1 = a / 4.0 * pow * inv(u0_mid_norm);
    let t2 = a * a / 16.0 * pow * inv(u0_mid_norm * u0_mid_norm);
    let t = t0.min(t1).min(t2);

    Ok(LifespanReport {
        e0,
        a,
        c,
        p,
        u0_low_norm,
        j0: Some(j0),
        t0,
        t1: Some(t1),
        t2: Some(t2),
        t,
        branch: LifespanBranch::LargeData,
    })
}

/// Smallness of the heat flow of `u₀` over `[0, T]` in
/// `A_T = L²_T(B^{2/p+1}_{p,1}) ∩ L¹_T(B^{2/p+2}_{p,1})`, evaluated by
/// adaptive quadrature over the exactly propagated field. Reported against
/// the target `a` rather than asserted.
#[derive(Debug, Clone)]
pub struct SemigroupSmallnessReport {
    /// `‖e^{tΔ}u₀‖_{L¹_T(B^{2/p+2}_{p,1})}`.
    pub l1_high: f64,
    /// `‖e^{tΔ}u₀‖_{L²_T(B^{2/p+1}_{p,1})}`.
    pub l2_mid: f64,
    pub sum: f64,
    pub a: f64,
    pub passes: bool,
}

pub fn verify_semigroup_smallness(
    u0: &VectorField2,
    t_final: f64,
    a: f64,
    p: f64,
    bank: &DyadicFilterBank,
) -> Result<SemigroupSmallnessReport> {
    if !(t_final > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need T > 0, got {t_final}"
        )));
    }
    let dp = 2.0 / p;
    let high = BesovParams::new(dp + 2.0, p, 1.0)?;
    let mid = BesovParams::new(dp + 1.0, p, 1.0)?;

    let norm_at = |t: f64, params: &BesovParams| -> f64 {
        let flowed = heat_semigroup_vector(u0, t).expect("t >= 0");
        besov_norm_vector(&flowed, params, bank)
    };

    let l1_high = adaptive_simpson(&|t| norm_at(t, &high), 0.0, t_final, 1e-11);
    let l2_sq = adaptive_simpson(
        &|t| {
            let v = norm_at(t, &mid);
            v * v
        },
        0.0,
        t_final,
        1e-12,
    );
    let l2_mid = l2_sq.max(0.0).sqrt();
    let sum = l1_high + l2_mid;
    Ok(SemigroupSmallnessReport {
        l1_high,
        l2_mid,
        sum,
        a,
        passes: sum <= a,
    })
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol * whole.abs().max(1e-30) {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, 28)
}
