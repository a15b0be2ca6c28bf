//! Measured quantities along a run: energy identity residual, decay-rate
//! fits, the bootstrap monitor, vorticity bounds, and the two-trajectory
//! stability experiment. The CSV schema is fixed; numbers are emitted with 17
//! significant digits so files round-trip exactly.

use crate::besov::{besov_norm_vector, cumulative_trapezoid, trapezoid, TimeSeries};
use crate::error::{Error, Result};
use crate::field::VectorField2;
use crate::filter_bank::{BesovParams, DyadicFilterBank};
use crate::mhd::{BlowUpInfo, MHDState, MhdStepper, Trajectory};

/// One recorded diagnostics row. The first twelve fields form the CSV
/// schema; the trailing fields are in-memory extras (running-integral
/// integrands and drift monitors) that do not appear in the file.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `½(‖u‖²_{L²} + ‖b‖²_{L²})`.
    pub energy: f64,
    pub b_l2: f64,
    pub b_linf: f64,
    /// `‖curl u‖_{L^∞}`.
    pub w_linf: f64,
    /// `‖curl u‖_{B⁰_{∞,1}}`.
    pub w_b0inf1: f64,
    /// `‖b‖_{B⁰_{∞,1}}`.
    pub b_b0inf1: f64,
    /// `∫₀ᵗ ‖b‖_{B²_{∞,1}} dτ` (trapezoid on the recording grid).
    pub run_b_b2inf1: f64,
    /// `∫₀ᵗ ‖b‖²_{Ḣ¹} dτ` (fourth-order accumulation on the step grid).
    pub grad_b_l2_sq_int: f64,
    /// `‖u‖_{B^{1+2/p}_{p,1}}`.
    pub besov_u: f64,
    /// `‖b‖_{B^{2/p}_{p,1}}`.
    pub besov_b: f64,
    /// Advisory CFL number `dt · n · ‖u‖_{L^∞} / 0.5` (≤ 1 satisfies the
    /// guidance).
    pub cfl: f64,

    /// Instantaneous `‖b‖_{B²_{∞,1}}` (integrand of `run_b_b2inf1`).
    pub b_b2inf1: f64,
    /// Instantaneous `‖u‖_{B¹_{∞,1}}`.
    pub u_b1inf1: f64,
    /// Instantaneous `‖b‖_{Ḣ¹}`.
    pub b_h1dot: f64,
    pub mean_b_abs: f64,
    pub div_u_rel: f64,
    pub div_b_rel: f64,
}

pub const CSV_HEADER: &str =
    "t,energy,b_l2,b_linf,w_linf,w_b0inf1,b_b0inf1,run_b_b2inf1,grad_b_l2_sq_int,besov_u,besov_b,cfl";

impl DiagnosticsRecord {
    pub fn csv_row(&self) -> String {
        let cols = [
            self.t,
            self.energy,
            self.b_l2,
            self.b_linf,
            self.w_linf,
            self.w_b0inf1,
            self.b_b0inf1,
            self.run_b_b2inf1,
            self.grad_b_l2_sq_int,
            self.besov_u,
            self.besov_b,
            self.cfl,
        ];
        cols.iter()
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Serialize records with the mandatory header row.
pub fn records_to_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Parse the 12 schema columns back; extras are zero-filled.
pub fn records_from_csv(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => {
            return Err(Error::InvalidParameter(format!(
                "bad diagnostics CSV header: {other:?}"
            )))
        }
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| {
                c.trim().parse::<f64>().map_err(|e| {
                    Error::InvalidParameter(format!("line {}: {e}", lineno + 2))
                })
            })
            .collect::<Result<_>>()?;
        if cols.len() != 12 {
            return Err(Error::InvalidParameter(format!(
                "line {}: expected 12 columns, got {}",
                lineno + 2,
                cols.len()
            )));
        }
        out.push(DiagnosticsRecord {
            t: cols[0],
            energy: cols[1],
            b_l2: cols[2],
            b_linf: cols[3],
            w_linf: cols[4],
            w_b0inf1: cols[5],
            b_b0inf1: cols[6],
            run_b_b2inf1: cols[7],
            grad_b_l2_sq_int: cols[8],
            besov_u: cols[9],
            besov_b: cols[10],
            cfl: cols[11],
            b_b2inf1: 0.0,
            u_b1inf1: 0.0,
            b_h1dot: 0.0,
            mean_b_abs: 0.0,
            div_u_rel: 0.0,
            div_b_rel: 0.0,
        });
    }
    Ok(out)
}

/// Left-minus-right side of the energy identity
/// `½(‖u‖²+‖b‖²)(T) + ∫₀ᵀ‖b‖²_{Ḣ¹} = ½(‖u₀‖²+‖b₀‖²)`, normalized by the
/// initial energy (absolute and flagged when the initial energy vanishes).
pub struct EnergyResidual {
    pub residual: f64,
    pub normalized: bool,
}

pub fn energy_identity_residual(trajectory: &Trajectory) -> Result<EnergyResidual> {
    if trajectory.records.len() < 2 {
        return Err(Error::InvalidParameter(
            "energy identity needs at least two records".into(),
        ));
    }
    let first = trajectory.records.first().unwrap();
    let last = trajectory.records.last().unwrap();
    let raw = last.energy + last.grad_b_l2_sq_int - first.energy;
    if first.energy > 0.0 {
        Ok(EnergyResidual {
            residual: raw / first.energy,
            normalized: true,
        })
    } else {
        Ok(EnergyResidual {
            residual: raw,
            normalized: false,
        })
    }
}

/// Least-squares exponential fit on a window: slope of `log(value)` vs `t`,
/// returned negated (positive = decay), with the fit quality `r²`. Nonpositive
/// values truncate the window and set the flag.
#[derive(Debug, Clone)]
pub struct DecayFit {
    pub rate: f64,
    pub r_squared: f64,
    pub truncated: bool,
    pub samples_used: usize,
}

pub fn fit_decay_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut truncated = false;
    for &(t, v) in series {
        if t < window.0 || t > window.1 {
            continue;
        }
        if v <= 0.0 {
            truncated = true;
            break;
        }
        xs.push(t);
        ys.push(v.ln());
    }
    if xs.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "decay window [{}, {}] holds fewer than two positive samples",
            window.0, window.1
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Ok(DecayFit {
        rate: -slope,
        r_squared,
        truncated,
        samples_used: xs.len(),
    })
}

/// Running bootstrap quantity built from the recorded columns:
/// `max(sup_{τ≤t} ‖b‖_{B⁰_{∞,1}}, ∫₀ᵗ‖b‖_{B²_{∞,1}})`, also reported as the
/// sum, with the first crossing of the threshold if any.
#[derive(Debug, Clone)]
pub struct BootstrapReport {
    pub times: Vec<f64>,
    pub running_max: Vec<f64>,
    pub running_sum: Vec<f64>,
    pub threshold: f64,
    pub first_crossing: Option<f64>,
}

pub fn bootstrap_monitor(trajectory: &Trajectory, threshold: f64) -> Result<BootstrapReport> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bootstrap threshold must be positive, got {threshold}"
        )));
    }
    let mut sup = 0.0f64;
    let mut times = Vec::new();
    let mut running_max = Vec::new();
    let mut running_sum = Vec::new();
    let mut first_crossing = None;
    for r in &trajectory.records {
        sup = sup.max(r.b_b0inf1);
        let m = sup.max(r.run_b_b2inf1);
        let s = sup + r.run_b_b2inf1;
        if m > threshold && first_crossing.is_none() {
            first_crossing = Some(r.t);
        }
        times.push(r.t);
        running_max.push(m);
        running_sum.push(s);
    }
    Ok(BootstrapReport {
        times,
        running_max,
        running_sum,
        threshold,
        first_crossing,
    })
}

/// Vorticity monitor: `‖w‖` series against the measured right side
/// `‖u₀‖_{B¹_{∞,1}} + sup‖b‖_{B⁰_{∞,1}} · ∫‖b‖_{B²_{∞,1}}`, plus the smallest
/// envelope `c·e^{ct}` dominating `‖w‖_{B⁰_{∞,1}}`.
#[derive(Debug, Clone)]
pub struct VorticityReport {
    pub times: Vec<f64>,
    pub w_linf: Vec<f64>,
    pub w_b0inf1: Vec<f64>,
    /// Ratio of `w_linf` to the measured right side, per record.
    pub bound_ratio: Vec<f64>,
    pub max_bound_ratio: f64,
    /// Fitted `c` of the smallest `c·e^{ct}` envelope over `w_b0inf1`.
    pub envelope_c: f64,
}

pub fn vorticity_bound_monitor(trajectory: &Trajectory) -> Result<VorticityReport> {
    if trajectory.records.is_empty() {
        return Err(Error::EmptySeries);
    }
    let u0_b1 = trajectory.records[0].u_b1inf1;
    let mut sup_b0 = 0.0f64;
    let mut times = Vec::new();
    let mut w_linf = Vec::new();
    let mut w_b0 = Vec::new();
    let mut ratio = Vec::new();
    for r in &trajectory.records {
        sup_b0 = sup_b0.max(r.b_b0inf1);
        let rhs = u0_b1 + sup_b0 * r.run_b_b2inf1;
        times.push(r.t);
        w_linf.push(r.w_linf);
        w_b0.push(r.w_b0inf1);
        ratio.push(if rhs > 0.0 { r.w_linf / rhs } else { 0.0 });
    }
    let max_ratio = ratio.iter().cloned().fold(0.0f64, f64::max);

    // Smallest c with c·e^{ct} ≥ w(t) for all samples; g(c) is decreasing.
    let g = |c: f64| -> f64 {
        times
            .iter()
            .zip(&w_b0)
            .map(|(&t, &w)| w - c * (c * t).exp())
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while g(hi) > 0.0 && hi < 1e12 {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    Ok(VorticityReport {
        times,
        w_linf,
        w_b0inf1: w_b0,
        bound_ratio: ratio,
        max_bound_ratio: max_ratio,
        envelope_c: hi,
    })
}

/// Poincaré check for mean-zero `b` on the torus (`‖b‖_{L²} ≤ ‖b‖_{Ḣ¹}`,
/// sharp constant 1 from the lowest nonzero mode): largest violation over the
/// run, nonpositive when the inequality holds.
pub fn poincare_violation(trajectory: &Trajectory) -> f64 {
    trajectory
        .records
        .iter()
        .map(|r| r.b_l2 - r.b_h1dot)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Norm bookkeeping of a base/perturbed pair of runs.
#[derive(Debug, Clone)]
pub struct StabilityExperiment {
    /// Size of the perturbation in the weak data norm
    /// `‖δb₀‖_{B^{2/p−1}_{p,1}} + ‖δu₀‖_{B^{2/p}_{p,1}}`.
    pub delta_weak: f64,
    /// Size in the strong data norm `‖δb₀‖_{B^{2/p}} + ‖δu₀‖_{B^{2/p+1}}`.
    pub delta_strong: f64,
    pub times: Vec<f64>,
    /// Strong-level difference: `sup ‖δu‖_{B^{2/p+1}_{p,1}}`,
    /// `sup ‖δb‖_{B^{2/p}_{p,1}}` and `∫‖δb‖_{B^{2/p+2}_{p,1}}`.
    pub strong_du_sup: f64,
    pub strong_db_sup: f64,
    pub strong_db_l1: f64,
    /// Weak-level difference one index lower with r = ∞.
    pub weak_du_sup: f64,
    pub weak_db_sup: f64,
    pub weak_db_l1: f64,
    /// Growth factor `exp(C·∫(‖u¹‖_{B^{2/p+1}} + ‖u²‖_{B^{2/p+1}} +
    /// ‖b¹‖_{B^{2/p+2}} + ‖b²‖_{B^{2/p+2}}))` with the configured constant.
    pub growth_factor: f64,
    /// Ratio of the weak-level difference to `delta_weak`.
    pub weak_ratio: f64,
    /// Ratio of the strong-level difference to `delta_strong`.
    pub strong_ratio: f64,
    pub blowup: Option<BlowUpInfo>,
}

/// Run base and perturbed data in lockstep and record the difference norms of
/// the two-solution stability estimates. `constant_c` scales the measured
/// exponent of the growth factor.
#[allow(clippy::too_many_arguments)]
pub fn stability_experiment(
    u0: &VectorField2,
    b0: &VectorField2,
    du0: &VectorField2,
    db0: &VectorField2,
    t_final: f64,
    dt: f64,
    p: f64,
    record_every: usize,
    constant_c: f64,
    bank: &DyadicFilterBank,
) -> Result<StabilityExperiment> {
    let strong_b = BesovParams::new(2.0 / p, p, 1.0)?;
    let strong_u = BesovParams::new(2.0 / p + 1.0, p, 1.0)?;
    let strong_b_high = BesovParams::new(2.0 / p + 2.0, p, 1.0)?;
    let weak_b = BesovParams::new(2.0 / p - 1.0, p, f64::INFINITY)?;
    let weak_u = BesovParams::new(2.0 / p, p, f64::INFINITY)?;
    let weak_b_high = BesovParams::new(2.0 / p + 1.0, p, f64::INFINITY)?;

    let delta_weak = besov_norm_vector(db0, &weak_b, bank) + besov_norm_vector(du0, &weak_u, bank);
    let delta_strong =
        besov_norm_vector(db0, &strong_b, bank) + besov_norm_vector(du0, &strong_u, bank);
    if delta_weak == 0.0 && delta_strong == 0.0 {
        // Identical data still produces a well-defined (zero) report.
    }

    let base0 = MHDState::new(u0.clone(), b0.clone(), 0.0)?;
    let pert0 = MHDState::new(
        u0.add(du0).leray_project(),
        b0.add(db0).leray_project(),
        0.0,
    )?;

    let steps = (t_final / dt).round() as usize;
    let mut base = MhdStepper::new(&base0, dt)?;
    let mut pert = MhdStepper::new(&pert0, dt)?;

    let mut times = Vec::new();
    let mut du_strong = Vec::new();
    let mut db_strong = Vec::new();
    let mut db_strong_high = Vec::new();
    let mut du_weak = Vec::new();
    let mut db_weak = Vec::new();
    let mut db_weak_high = Vec::new();
    let mut growth_integrand = Vec::new();
    let mut blowup = None;

    let mut sample = |t: f64, base: &MhdStepper, pert: &MhdStepper| {
        let sb = base.state();
        let sp = pert.state();
        let du = sp.u.sub(&sb.u);
        let db = sp.b.sub(&sb.b);
        times.push(t);
        du_strong.push(besov_norm_vector(&du, &strong_u, bank));
        db_strong.push(besov_norm_vector(&db, &strong_b, bank));
        db_strong_high.push(besov_norm_vector(&db, &strong_b_high, bank));
        du_weak.push(besov_norm_vector(&du, &weak_u, bank));
        db_weak.push(besov_norm_vector(&db, &weak_b, bank));
        db_weak_high.push(besov_norm_vector(&db, &weak_b_high, bank));
        growth_integrand.push(
            besov_norm_vector(&sb.u, &strong_u, bank)
                + besov_norm_vector(&sp.u, &strong_u, bank)
                + besov_norm_vector(&sb.b, &strong_b_high, bank)
                + besov_norm_vector(&sp.b, &strong_b_high, bank),
        );
    };

    sample(0.0, &base, &pert);
    for step in 1..=steps {
        let ra = base.step();
        let rb = pert.step();
        if let Err(Error::BlowUp { time, .. }) = ra.and(rb) {
            blowup = Some(BlowUpInfo {
                time,
                reason: "blow-up during stability run".into(),
            });
            break;
        }
        if step % record_every.max(1) == 0 || step == steps {
            sample(base.t(), &base, &pert);
        }
    }

    let sup = |v: &[f64]| v.iter().cloned().fold(0.0f64, f64::max);
    let strong_du_sup = sup(&du_strong);
    let strong_db_sup = sup(&db_strong);
    let strong_db_l1 = trapezoid(&times, &db_strong_high);
    let weak_du_sup = sup(&du_weak);
    let weak_db_sup = sup(&db_weak);
    let weak_db_l1 = trapezoid(&times, &db_weak_high);
    let growth_factor = (constant_c * trapezoid(&times, &growth_integrand)).exp();

    let weak_total = weak_du_sup + weak_db_sup + weak_db_l1;
    let strong_total = strong_du_sup + strong_db_sup + strong_db_l1;

    Ok(StabilityExperiment {
        delta_weak,
        delta_strong,
        times,
        strong_du_sup,
        strong_db_sup,
        strong_db_l1,
        weak_du_sup,
        weak_db_sup,
        weak_db_l1,
        growth_factor,
        weak_ratio: if delta_weak > 0.0 {
            weak_total / delta_weak
        } else {
            0.0
        },
        strong_ratio: if delta_strong > 0.0 {
            strong_total / delta_strong
        } else {
            0.0
        },
        blowup,
    })
}

/// Monotone-decay check: whether `b_l2` is nonincreasing (within `slack`
/// relative wobble) after the transient window.
pub fn b_l2_monotone_after(trajectory: &Trajectory, t_start: f64, slack: f64) -> bool {
    let vals: Vec<(f64, f64)> = trajectory
        .records
        .iter()
        .filter(|r| r.t >= t_start)
        .map(|r| (r.t, r.b_l2))
        .collect();
    vals.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + slack))
}

/// Consistency of the recorded running integrals: both are nondecreasing and
/// `run_b_b2inf1` matches a trapezoid over the recorded integrand.
pub fn check_running_integrals(trajectory: &Trajectory) -> Result<()> {
    let recs = &trajectory.records;
    for w in recs.windows(2) {
        if w[1].run_b_b2inf1 < w[0].run_b_b2inf1 - 1e-12
            || w[1].grad_b_l2_sq_int < w[0].grad_b_l2_sq_int - 1e-12
        {
            return Err(Error::InvalidParameter(
                "running integral decreased between records".into(),
            ));
        }
    }
    let times: Vec<f64> = recs.iter().map(|r| r.t).collect();
    let integrand: Vec<f64> = recs.iter().map(|r| r.b_b2inf1).collect();
    let cum = cumulative_trapezoid(&times, &integrand);
    for (r, c) in recs.iter().zip(&cum) {
        let scale = r.run_b_b2inf1.abs().max(1.0);
        if (r.run_b_b2inf1 - c).abs() > 1e-9 * scale {
            return Err(Error::InvalidParameter(format!(
                "run_b_b2inf1 {} does not match recomputed {}",
                r.run_b_b2inf1, c
            )));
        }
    }
    Ok(())
}

/// Rebuild derived series from a parsed CSV: running sup of `b_b0inf1` and
/// the bootstrap quantity, used to verify emitted files are self-consistent.
pub fn bootstrap_from_columns(records: &[DiagnosticsRecord]) -> (Vec<f64>, Vec<f64>) {
    let mut sup = 0.0f64;
    let mut sups = Vec::new();
    let mut boot = Vec::new();
    for r in records {
        sup = sup.max(r.b_b0inf1);
        sups.push(sup);
        boot.push(sup.max(r.run_b_b2inf1));
    }
    (sups, boot)
}

/// Helper for tests and reports: the `(t, column)` series of a trajectory.
pub fn column_series(
    trajectory: &Trajectory,
    select: impl Fn(&DiagnosticsRecord) -> f64,
) -> Vec<(f64, f64)> {
    trajectory
        .records
        .iter()
        .map(|r| (r.t, select(r)))
        .collect()
}

/// In-memory time series of the states of a sparse snapshot store.
pub fn snapshot_series(trajectory: &Trajectory) -> &TimeSeries<MHDState> {
    &trajectory.snapshots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;
    use crate::filter_bank::DyadicFilterBank;
    use crate::grid::TorusGrid;
    use crate::mhd::{run, RunOptions};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn setup(n: usize) -> (Arc<TorusGrid>, DyadicFilterBank) {
        let grid = TorusGrid::new(n).unwrap();
        let bank = DyadicFilterBank::build(&grid);
        (grid, bank)
    }

    fn sine_pair(g: &Arc<TorusGrid>, m: f64, s: f64) -> VectorField2 {
        VectorField2::new(
            ScalarField::from_fn(g, |_, x2| s * (m * x2).sin()),
            ScalarField::from_fn(g, |x1, _| s * (m * x1).sin()),
        )
        .unwrap()
    }

    fn small_run(n: usize, t_final: f64) -> (Trajectory, DyadicFilterBank) {
        let (grid, bank) = setup(n);
        let state = MHDState::new(
            sine_pair(&grid, 2.0, 0.05),
            sine_pair(&grid, 2.0, 0.03),
            0.0,
        )
        .unwrap();
        let traj = run(&state, &RunOptions::new(t_final, 1e-3, 10), &bank).unwrap();
        (traj, bank)
    }

    #[test]
    fn synthetic_exponential_fits_exactly() {
        let series: Vec<(f64, f64)> = (0..=100)
            .map(|i| {
                let t = 0.05 * i as f64;
                (t, (-3.0 * t).exp())
            })
            .collect();
        let fit = fit_decay_rate(&series, (0.0, 5.0)).unwrap();
        assert_relative_eq!(fit.rate, 3.0, max_relative = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert!(!fit.truncated);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let series: Vec<(f64, f64)> = (0..=10).map(|i| (i as f64, 2.0)).collect();
        let fit = fit_decay_rate(&series, (0.0, 10.0)).unwrap();
        assert_relative_eq!(fit.rate, 0.0, epsilon = 1e-14);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn nonpositive_values_truncate_the_window() {
        let series = vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.0), (3.0, 0.1)];
        let fit = fit_decay_rate(&series, (0.0, 3.0)).unwrap();
        assert!(fit.truncated);
        assert_eq!(fit.samples_used, 2);
        assert!(fit_decay_rate(&series, (1.5, 3.0)).is_err());
    }

    #[test]
    fn zero_magnetic_field_never_crosses_the_bootstrap_threshold() {
        let (grid, bank) = setup(32);
        let state = MHDState::new(sine_pair(&grid, 2.0, 0.1), VectorField2::zeros(&grid), 0.0)
            .unwrap();
        let traj = run(&state, &RunOptions::new(0.2, 1e-3, 10), &bank).unwrap();
        let rep = bootstrap_monitor(&traj, 4.0).unwrap();
        assert!(rep.first_crossing.is_none());
        assert!(rep.running_max.iter().all(|&v| v == 0.0));
        assert!(bootstrap_monitor(&traj, 0.0).is_err());
    }

    #[test]
    fn tight_threshold_reports_a_crossing_time() {
        let (traj, _) = small_run(32, 0.3);
        let initial = traj.records[0].b_b0inf1;
        let rep = bootstrap_monitor(&traj, initial / 2.0).unwrap();
        let t = rep.first_crossing.expect("crossing expected");
        assert!(t >= 0.0 && t <= 0.3);
    }

    #[test]
    fn euler_vorticity_sup_is_conserved() {
        let (grid, bank) = setup(64);
        let u = VectorField2::new(
            ScalarField::from_fn(&grid, |x1, x2| (2.0 * x2).sin() + 0.3 * (x1 + x2).cos()),
            ScalarField::from_fn(&grid, |x1, x2| (2.0 * x1).sin() - 0.3 * (x1 + x2).cos()),
        )
        .unwrap()
        .leray_project()
        .scale(0.2);
        let state = MHDState::new(u, VectorField2::zeros(&grid), 0.0).unwrap();
        let traj = run(&state, &RunOptions::new(1.0, 1e-3, 20), &bank).unwrap();
        let rep = vorticity_bound_monitor(&traj).unwrap();
        let w0 = rep.w_linf[0];
        for w in &rep.w_linf {
            assert!(
                (w - w0).abs() < 0.01 * w0,
                "vorticity sup drifted from {w0} to {w}"
            );
        }
    }

    #[test]
    fn vorticity_envelope_dominates_the_series() {
        let (traj, _) = small_run(32, 0.5);
        let rep = vorticity_bound_monitor(&traj).unwrap();
        let c = rep.envelope_c;
        for (t, w) in rep.times.iter().zip(&rep.w_b0inf1) {
            assert!(c * (c * t).exp() >= w - 1e-9, "envelope fails at t = {t}");
        }
        assert!(rep.max_bound_ratio.is_finite());
    }

    #[test]
    fn identical_data_gives_a_zero_stability_report() {
        let (grid, bank) = setup(32);
        let u0 = sine_pair(&grid, 2.0, 0.05);
        let b0 = sine_pair(&grid, 2.0, 0.03);
        let z = VectorField2::zeros(&grid);
        let rep =
            stability_experiment(&u0, &b0, &z, &z, 0.1, 1e-3, 2.0, 10, 1.0, &bank).unwrap();
        assert_eq!(rep.delta_weak, 0.0);
        assert_eq!(rep.strong_du_sup, 0.0);
        assert_eq!(rep.weak_db_sup, 0.0);
        assert!(rep.blowup.is_none());
    }

    #[test]
    fn perturbed_data_tracks_the_perturbation_size() {
        let (grid, bank) = setup(32);
        let u0 = sine_pair(&grid, 2.0, 0.05);
        let b0 = sine_pair(&grid, 2.0, 0.03);
        let du = sine_pair(&grid, 4.0, 1e-3);
        let db = sine_pair(&grid, 4.0, 1e-3);
        let rep =
            stability_experiment(&u0, &b0, &du, &db, 0.2, 1e-3, 2.0, 10, 1.0, &bank).unwrap();
        assert!(rep.delta_weak > 0.0);
        assert!(rep.weak_ratio > 0.0 && rep.weak_ratio.is_finite());
        assert!(rep.strong_ratio > 0.0 && rep.strong_ratio.is_finite());
        assert!(rep.growth_factor >= 1.0);
    }

    #[test]
    fn csv_round_trips_to_the_last_bit() {
        let (traj, _) = small_run(32, 0.1);
        let text = records_to_csv(&traj.records);
        assert!(text.starts_with(CSV_HEADER));
        let back = records_from_csv(&text).unwrap();
        assert_eq!(back.len(), traj.records.len());
        for (a, b) in traj.records.iter().zip(&back) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.energy, b.energy);
            assert_eq!(a.run_b_b2inf1, b.run_b_b2inf1);
            assert_eq!(a.cfl, b.cfl);
        }
        // Derived series rebuilt from columns match the trajectory monitors.
        let (sups, boot) = bootstrap_from_columns(&back);
        assert_eq!(sups.len(), back.len());
        assert!(boot.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(records_from_csv("nonsense\n1,2,3\n").is_err());
        let mut text = String::from(CSV_HEADER);
        text.push_str("\n1.0,2.0\n");
        assert!(records_from_csv(&text).is_err());
    }

    #[test]
    fn running_integrals_are_consistent() {
        let (traj, _) = small_run(32, 0.3);
        check_running_integrals(&traj).unwrap();
        let res = energy_identity_residual(&traj).unwrap();
        assert!(res.normalized);
        assert!(res.residual.abs() < 1e-6);
        // Poincaré for mean-zero b on the torus: ‖b‖_{L²} ≤ ‖b‖_{Ḣ¹} with
        // constant 1 (lowest nonzero |k| = 1).
        assert!(poincare_violation(&traj) <= 0.0);
    }

    #[test]
    fn small_data_b_l2_decays_monotonically_after_transient() {
        let (traj, _) = small_run(32, 1.0);
        assert!(b_l2_monotone_after(&traj, 0.5, 1e-9));
    }
}
