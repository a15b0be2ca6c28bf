//! The release-gate invariant suite: quantitative checks of the filter bank,
//! block reconstruction, the heat propagator, conservation laws, the Euler
//! limit, the linearized-iteration contraction, the lifespan formula, the
//! comparison bounds, and the preset-family norm laws. Each check reports one
//! pass/fail line; `run_selftest` executes all of them.

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::besov::besov_norm_vector;
use crate::field::{ScalarField, VectorField2};
use crate::filter_bank::{BesovParams, DyadicFilterBank};
use crate::grid::TorusGrid;
use crate::gronwall::{gronwall_bound, integrate_comparison_ode, OsgoodModulus};
use crate::initial_data::{
    make_initial_data, random_solenoidal, smallness_norm, InitialDataKind, InitialDataSpec,
};
use crate::lifespan::{
    compute_lifespan, dyadic_tail, find_j0, verify_semigroup_smallness, LifespanBranch,
};
use crate::mhd::{run, MHDState, RunMonitors, RunOptions};
use crate::picard::{picard_convergence_report, picard_iterate, PicardOptions};
use crate::propagators::{heat_semigroup, heat_semigroup_vector, solve_heat};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub criterion: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {:<22} {:>7.2}s  {}",
            self.criterion,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
    pub total_seconds: f64,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn timed<F: FnOnce() -> (bool, String)>(criterion: u32, name: &'static str, f: F) -> CheckResult {
    let start = Instant::now();
    let (passed, detail) = f();
    CheckResult {
        criterion,
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Criterion 1: partition-of-unity residual below 1e−12 at every resolved
/// nonzero wavenumber for n ∈ {64, 128}, in under a second.
pub fn check_filter_bank() -> CheckResult {
    timed(1, "filter-bank exactness", || {
        let mut worst = 0.0f64;
        for n in [64usize, 128] {
            let grid = TorusGrid::new(n).expect("power of two");
            let bank = DyadicFilterBank::build(&grid);
            worst = worst.max(bank.partition_residual());
        }
        (
            worst < 1e-12,
            format!("max partition residual {worst:.2e} (allowed 1e-12)"),
        )
    })
}

/// Criterion 2: block reconstruction within 1e−10 relative L² error on 100
/// random band-limited fields (mean and |ξ| = 1 content included).
pub fn check_reconstruction() -> CheckResult {
    timed(2, "block reconstruction", || {
        let grid = TorusGrid::new(64).expect("power of two");
        let bank = DyadicFilterBank::build(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let v = random_solenoidal(&grid, &mut rng, (1, 21));
            let f = v.x.add(&ScalarField::from_fn(&grid, |_, _| 0.37));
            let mut sum = ScalarField::zeros(&grid);
            for j in bank.block_range() {
                sum = sum.add(&bank.dyadic_block(&f, j));
            }
            let rel = sum.sub(&f).l2_norm_spectral() / f.l2_norm_spectral();
            worst = worst.max(rel);
        }
        (
            worst < 1e-10,
            format!("max relative reconstruction error {worst:.2e} over 100 fields"),
        )
    })
}

/// Criterion 3: exact semigroup on a single mode (1e−12), manufactured
/// forced solution within 1e−8 at dt = 1e−3, observed temporal order ≥ 3.8.
pub fn check_heat_propagator() -> CheckResult {
    timed(3, "heat propagator", || {
        let grid = TorusGrid::new(32).expect("power of two");
        let f = ScalarField::from_fn(&grid, |_, x2| (5.0 * x2).sin());
        let t: f64 = 0.2;
        let exact = f.scale((-25.0 * t).exp());
        let semi_err =
            heat_semigroup(&f, t).expect("t >= 0").sub(&exact).max_abs() / exact.max_abs();

        let shape = ScalarField::from_fn(&grid, |x1, x2| (3.0 * x1).sin() * (2.0 * x2).cos());
        let exact_at = |t: f64| shape.scale((-3.0f64 * t).exp());
        let solve_err = |dt: f64| -> f64 {
            let forcing = |t: f64| shape.scale(10.0 * (-3.0f64 * t).exp());
            let run = solve_heat(&shape, forcing, 0.2, dt).expect("valid step");
            let (_, last) = run.snapshots.last().expect("nonempty");
            last.sub(&exact_at(0.2)).max_abs()
        };
        let mms = solve_err(1e-3);
        let e1 = solve_err(4e-3);
        let e2 = solve_err(2e-3);
        let order = (e1 / e2).log2();

        let passed = semi_err < 1e-12 && mms < 1e-8 && order >= 3.8;
        (
            passed,
            format!(
                "semigroup rel err {semi_err:.2e}; manufactured err {mms:.2e}; order {order:.2}"
            ),
        )
    })
}

fn random_small_state(grid: &Arc<TorusGrid>, bank: &DyadicFilterBank, seed: u64) -> MHDState {
    let spec = InitialDataSpec {
        kind: InitialDataKind::RandomSolenoidal {
            band: (1, 6),
            seed,
        },
        scale: 0.05,
    };
    make_initial_data(&spec, grid, bank).expect("valid preset")
}

/// Criterion 4 (and the monitor half of criterion 5): normalized energy
/// residual below 1e−6 over T = 1 at n = 128, dt = 1e−3, for five random
/// small-data runs, within a two-minute budget.
pub fn check_energy_identity() -> (CheckResult, Vec<RunMonitors>) {
    let mut monitors = Vec::new();
    let check = timed(4, "energy identity", || {
        let grid = TorusGrid::new(128).expect("power of two");
        let bank = DyadicFilterBank::build(&grid);
        let mut worst = 0.0f64;
        for seed in 1..=5u64 {
            let state = random_small_state(&grid, &bank, seed);
            let mut opts = RunOptions::new(1.0, 1e-3, 250);
            opts.p = 2.0;
            let traj = run(&state, &opts, &bank).expect("run completes");
            assert!(traj.blowup.is_none(), "unexpected blow-up in a small-data run");
            let res = crate::diagnostics::energy_identity_residual(&traj).expect("records");
            worst = worst.max(res.residual.abs());
            monitors.push(traj.monitors.clone());
        }
        (
            worst < 1e-6,
            format!("max |energy residual| {worst:.2e} over 5 runs (allowed 1e-6)"),
        )
    });
    (check, monitors)
}

/// Criterion 5: mean-zero and solenoidality drift across the collected runs.
pub fn check_conservation(monitors: &[RunMonitors]) -> CheckResult {
    timed(5, "mean/divergence drift", || {
        let mean = monitors
            .iter()
            .map(|m| m.max_abs_mean_b)
            .fold(0.0f64, f64::max);
        let div = monitors
            .iter()
            .map(|m| m.max_div_u_rel.max(m.max_div_b_rel))
            .fold(0.0f64, f64::max);
        (
            mean < 1e-13 && div < 1e-8,
            format!("max |mean b| {mean:.2e} (<1e-13); max div residual {div:.2e} (<1e-8)"),
        )
    })
}

/// Criterion 6: with b ≡ 0, L² drift below 1e−6 and vorticity-sup drift
/// below 1% per unit time.
pub fn check_euler_limit() -> (CheckResult, Vec<RunMonitors>) {
    let mut monitors = Vec::new();
    let check = timed(6, "euler limit", || {
        let grid = TorusGrid::new(128).expect("power of two");
        let bank = DyadicFilterBank::build(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let u = random_solenoidal(&grid, &mut rng, (1, 6));
        let u = u.scale(0.3 / u.max_abs());
        let state = MHDState::new(u, VectorField2::zeros(&grid), 0.0).expect("solenoidal");
        let mut opts = RunOptions::new(1.0, 1e-3, 100);
        opts.p = 2.0;
        let traj = run(&state, &opts, &bank).expect("run completes");
        monitors.push(traj.monitors.clone());
        let l2_0 = (2.0 * traj.records[0].energy).sqrt();
        let l2_drift = traj
            .records
            .iter()
            .map(|r| ((2.0 * r.energy).sqrt() - l2_0).abs() / l2_0)
            .fold(0.0f64, f64::max);
        let w0 = traj.records[0].w_linf;
        let w_drift = traj
            .records
            .iter()
            .map(|r| (r.w_linf - w0).abs() / w0)
            .fold(0.0f64, f64::max);
        (
            l2_drift < 1e-6 && w_drift < 0.01,
            format!("L2 drift {l2_drift:.2e} (<1e-6); vorticity-sup drift {w_drift:.2e} (<1%)"),
        )
    });
    (check, monitors)
}

/// Criterion 7: contraction of the linearized scheme on small paired-sine
/// data at the computed lifespan with C = 10, and agreement of iterate 6 with
/// the nonlinear solution to 1e−4 relative.
pub fn check_picard() -> (CheckResult, Vec<RunMonitors>) {
    let mut monitors = Vec::new();
    let check = timed(7, "linearized iteration", || {
        let grid = TorusGrid::new(64).expect("power of two");
        let bank = DyadicFilterBank::build(&grid);
        let spec = InitialDataSpec {
            kind: InitialDataKind::Remark15 { n: 4 },
            scale: 0.03,
        };
        let state = make_initial_data(&spec, &grid, &bank).expect("valid preset");
        let lifespan =
            compute_lifespan(&state.u, &state.b, 2.0, 10.0, &bank).expect("valid data");
        let t_final = lifespan.t;
        let dt = t_final / 64.0;
        let out = picard_iterate(
            &state.u,
            &state.b,
            &PicardOptions {
                n_max: 7,
                t_final,
                dt,
                p: 2.0,
                constant_c: 10.0,
                record_every: 4,
            },
            &bank,
        )
        .expect("iteration completes");
        let report = picard_convergence_report(&out, &bank).expect("two iterates");
        let window = &report.diff_ratios[2..=5];
        let ratios_ok = window.iter().all(|&r| r <= 0.9);

        let mut opts = RunOptions::new(t_final, dt, 4);
        opts.p = 2.0;
        opts.snapshot_every = 4;
        let reference = run(&state, &opts, &bank).expect("run completes");
        monitors.push(reference.monitors.clone());
        let u_params = BesovParams::new(2.0, 2.0, 1.0).expect("static");
        let b_params = BesovParams::new(1.0, 2.0, 1.0).expect("static");
        let iterate6 = &out.trajectories[6];
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for ((_, s), (_, r)) in iterate6.iter().zip(reference.snapshots.iter()) {
            worst = worst.max(
                besov_norm_vector(&s.u.sub(&r.u), &u_params, &bank)
                    + besov_norm_vector(&s.b.sub(&r.b), &b_params, &bank),
            );
            scale = scale.max(
                besov_norm_vector(&r.u, &u_params, &bank)
                    + besov_norm_vector(&r.b, &b_params, &bank),
            );
        }
        let rel = worst / scale;
        (
            ratios_ok && rel < 1e-4,
            format!(
                "ratios d3/d2..d6/d5 = {:?} (<= 0.9); iterate-6 distance {rel:.2e} (<1e-4); T = {t_final:.3e}",
                window.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>()
            ),
        )
    });
    (check, monitors)
}

/// Criterion 8: branch selection, scaling monotonicity and tail-index
/// exactness of the lifespan formula; two-path smallness agreement < 0.1%.
pub fn check_lifespan() -> CheckResult {
    timed(8, "lifespan formula", || {
        let grid = TorusGrid::new(64).expect("power of two");
        let bank = DyadicFilterBank::build(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let broadband = random_solenoidal(&grid, &mut rng, (1, 18));
        let mut ok = true;
        let mut notes = Vec::new();

        // Tail search against a brute-force scan.
        for &a in &[1e-3, 0.05, 0.4, 2.0] {
            let got = find_j0(&broadband, a, 2.0, &bank).expect("a > 0");
            let mut expect = None;
            for j0 in 0..=(bank.j_max() as u32 + 2) {
                if dyadic_tail(&broadband, j0, 2.0, &bank) < a / 4.0 {
                    expect = Some(j0);
                    break;
                }
            }
            if Some(got) != expect {
                ok = false;
                notes.push(format!("j0 mismatch at a = {a}: {got} vs {expect:?}"));
            }
        }

        // Branch selection on small and large versions of the same shape.
        let small = compute_lifespan(
            &broadband.scale(1e-6),
            &broadband.scale(1e-6),
            2.0,
            10.0,
            &bank,
        )
        .expect("valid");
        let large =
            compute_lifespan(&broadband.scale(50.0), &broadband, 2.0, 10.0, &bank).expect("valid");
        if small.branch != LifespanBranch::SmallData || (small.t - small.t0).abs() > 1e-15 {
            ok = false;
            notes.push("small-data branch not selected".into());
        }
        if large.branch != LifespanBranch::LargeData || large.j0.is_none() {
            ok = false;
            notes.push("large-data branch not selected".into());
        } else {
            let t_expected = large
                .t0
                .min(large.t1.expect("large branch"))
                .min(large.t2.expect("large branch"));
            if (large.t - t_expected).abs() > 1e-15 {
                ok = false;
                notes.push("large-data T is not the minimum of the horizons".into());
            }
        }

        // Scale monotonicity.
        let mut prev = f64::INFINITY;
        for &c in &[0.01, 0.1, 1.0, 10.0, 100.0] {
            let rep = compute_lifespan(&broadband.scale(c), &broadband.scale(c), 2.0, 10.0, &bank)
                .expect("valid");
            if rep.t > prev * (1.0 + 1e-12) {
                ok = false;
                notes.push(format!("lifespan grew under amplification at scale {c}"));
            }
            prev = rep.t;
        }

        // Two evaluation paths of the semigroup smallness.
        let u = broadband.scale(0.2);
        let t_final = 0.04;
        let rep = verify_semigroup_smallness(&u, t_final, 1.0, 2.0, &bank).expect("T > 0");
        let (l1_q, l2_q) = {
            let dt = 1e-4;
            let m = (t_final / dt).round() as usize;
            let high = BesovParams::new(3.0, 2.0, 1.0).expect("static");
            let mid = BesovParams::new(2.0, 2.0, 1.0).expect("static");
            let mut l1 = 0.0;
            let mut l2sq = 0.0;
            let mut prev: Option<(f64, f64)> = None;
            for i in 0..=m {
                let t = i as f64 * dt;
                let flowed = heat_semigroup_vector(&u, t).expect("t >= 0");
                let nh = besov_norm_vector(&flowed, &high, &bank);
                let nm = besov_norm_vector(&flowed, &mid, &bank);
                if let Some((ph, pm)) = prev {
                    l1 += 0.5 * (ph + nh) * dt;
                    l2sq += 0.5 * (pm * pm + nm * nm) * dt;
                }
                prev = Some((nh, nm));
            }
            (l1, l2sq.sqrt())
        };
        let rel1 = (rep.l1_high - l1_q).abs() / l1_q;
        let rel2 = (rep.l2_mid - l2_q).abs() / l2_q;
        if rel1 > 1e-3 || rel2 > 1e-3 {
            ok = false;
            notes.push(format!("two-path disagreement {rel1:.2e}/{rel2:.2e}"));
        }

        let detail = if notes.is_empty() {
            format!(
                "j0 exact; branches and monotonicity exact; two-path agreement {:.2e}/{:.2e}",
                rel1, rel2
            )
        } else {
            notes.join("; ")
        };
        (ok, detail)
    })
}

/// Criterion 11: the linear closed form to 1e−10 and domination of the RK4
/// comparison oracle for 20 random cases per modulus.
pub fn check_gronwall() -> CheckResult {
    timed(11, "comparison bounds", || {
        use rand::Rng;
        // Closed-form exactness for constant gamma.
        let times: Vec<f64> = (0..=200).map(|i| 0.01 * i as f64).collect();
        let gam = vec![0.85f64; times.len()];
        let bound = gronwall_bound(0.4, &times, &gam, OsgoodModulus::Linear).expect("valid");
        let mut exact_err = 0.0f64;
        for (t, v) in bound.times.iter().zip(&bound.values) {
            exact_err = exact_err.max((v - 0.4 * (0.85 * t).exp()).abs() / v);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut dominated = true;
        let mut worst_margin = f64::INFINITY;
        for _ in 0..20 {
            let rho0 = rng.gen_range(1e-4..2.0);
            let times: Vec<f64> = (0..=50).map(|i| 0.04 * i as f64).collect();
            let gammas: Vec<f64> = times.iter().map(|_| rng.gen_range(0.0..1.5)).collect();
            for mu in [
                OsgoodModulus::Linear,
                OsgoodModulus::LogPlus { c: rng.gen_range(0.2..2.0) },
                OsgoodModulus::LogFrac { c: rng.gen_range(0.2..2.0) },
            ] {
                let bound = gronwall_bound(rho0, &times, &gammas, mu).expect("valid");
                let ode = integrate_comparison_ode(rho0, &times, &gammas, mu, 20);
                for (b, o) in bound.values.iter().zip(&ode) {
                    worst_margin = worst_margin.min((b - o) / o.max(1e-30));
                    if *b < o * (1.0 - 1e-8) - 1e-12 {
                        dominated = false;
                    }
                }
            }
        }
        (
            exact_err < 1e-10 && dominated,
            format!(
                "linear closed-form rel err {exact_err:.2e}; worst domination margin {worst_margin:.2e}"
            ),
        )
    })
}

/// Criterion 13: the preset family's norm laws across n ∈ {4, 8, 16}. The
/// high-regularity size grows like n^{1/2} while the H³-level size shrinks
/// like n^{-1/2}; both normalized products must be constant within 20%. The
/// measured low-regularity exponents are reported alongside.
pub fn check_power_laws() -> CheckResult {
    timed(13, "preset norm laws", || {
        let grid = TorusGrid::new(128).expect("power of two");
        let bank = DyadicFilterBank::build(&grid);
        let b1 = BesovParams::new(1.0, f64::INFINITY, 1.0).expect("static");
        let mut h4_scaled = Vec::new();
        let mut h3_scaled = Vec::new();
        let mut b1_vals = Vec::new();
        let mut smallness_vals = Vec::new();
        for n in [4u32, 8, 16] {
            let spec = InitialDataSpec {
                kind: InitialDataKind::Remark15 { n },
                scale: 1.0,
            };
            let state = make_initial_data(&spec, &grid, &bank).expect("resolved");
            let nf = n as f64;
            h4_scaled.push(state.u.sobolev_norm(4.0) / nf.sqrt());
            h3_scaled.push(state.u.sobolev_norm(3.0) * nf.sqrt());
            b1_vals.push(besov_norm_vector(&state.u, &b1, &bank));
            smallness_vals.push(smallness_norm(&state.u, &state.b, &bank));
        }
        let spread = |v: &[f64]| {
            let max = v.iter().cloned().fold(0.0f64, f64::max);
            let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
            max / min
        };
        let s_h4 = spread(&h4_scaled);
        let s_h3 = spread(&h3_scaled);
        // Dyadic slope of the measured ‖u₀‖_{B¹_{∞,1}}: the family is
        // exactly self-similar, so consecutive log₂-ratios agree.
        let b1_exp = (b1_vals[1] / b1_vals[0]).log2();
        let small_exp = (smallness_vals[1] / smallness_vals[0]).log2();
        (
            s_h4 < 1.2 && s_h3 < 1.2,
            format!(
                "H4*n^-1/2 spread {s_h4:.3}; H3*n^1/2 spread {s_h3:.3} (both <1.2); \
                 measured exponents: B1inf1 {b1_exp:.2}, smallness {small_exp:.2}"
            ),
        )
    })
}

/// Run every check in criterion order.
pub fn run_selftest() -> SelftestReport {
    let start = Instant::now();
    let mut checks = Vec::new();
    checks.push(check_filter_bank());
    checks.push(check_reconstruction());
    checks.push(check_heat_propagator());
    let (c4, mut monitors) = check_energy_identity();
    checks.push(c4);
    let (c6, m6) = check_euler_limit();
    let (c7, m7) = check_picard();
    monitors.extend(m6);
    monitors.extend(m7);
    checks.push(check_conservation(&monitors));
    checks.push(c6);
    checks.push(c7);
    checks.push(check_lifespan());
    checks.push(check_gronwall());
    checks.push(check_power_laws());
    checks.sort_by_key(|c| c.criterion);
    SelftestReport {
        checks,
        total_seconds: start.elapsed().as_secs_f64(),
    }
}
