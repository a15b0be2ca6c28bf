//! Subcommand implementations: build the experiment from the config, run the
//! core machinery, and emit CSV/snapshot/report files into `output_dir`.

use std::error::Error;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use besov_mhd_core::besov::besov_norm_vector;
use besov_mhd_core::diagnostics::{
    self, bootstrap_monitor, energy_identity_residual, fit_decay_rate, records_to_csv,
    stability_experiment, vorticity_bound_monitor,
};
use besov_mhd_core::filter_bank::{BesovParams, DyadicFilterBank};
use besov_mhd_core::grid::TorusGrid;
use besov_mhd_core::initial_data::{check_smallness_conditions, make_initial_data};
use besov_mhd_core::lifespan::{compute_lifespan, verify_semigroup_smallness, LifespanBranch};
use besov_mhd_core::mhd::{run, RunOptions, Trajectory};
use besov_mhd_core::picard::{picard_convergence_report, picard_iterate, PicardOptions};
use besov_mhd_core::selftest::run_selftest;
use besov_mhd_core::snapshot::{write_vector, TrajectoryIndex};

use crate::config::ExperimentConfig;

type CmdResult = Result<i32, Box<dyn Error>>;

fn prepare_output(cfg: &ExperimentConfig) -> Result<PathBuf, Box<dyn Error>> {
    let dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.effective"), cfg.to_text())?;
    Ok(dir)
}

fn setup(cfg: &ExperimentConfig) -> Result<(std::sync::Arc<TorusGrid>, DyadicFilterBank), Box<dyn Error>> {
    let grid = TorusGrid::new(cfg.resolution)?;
    let bank = DyadicFilterBank::build(&grid);
    Ok((grid, bank))
}

fn write_snapshots(
    dir: &Path,
    trajectory: &Trajectory,
) -> Result<(), Box<dyn Error>> {
    let mut index = TrajectoryIndex::default();
    for (i, (t, state)) in trajectory.snapshots.iter().enumerate() {
        let u_name = format!("u_{i:05}.bmhd");
        let b_name = format!("b_{i:05}.bmhd");
        write_vector(dir.join(&u_name), &state.u)?;
        write_vector(dir.join(&b_name), &state.b)?;
        index.push(t, u_name, b_name);
    }
    index.write(dir.join("snapshots.index"))?;
    Ok(())
}

pub fn simulate(cfg: &ExperimentConfig) -> CmdResult {
    let dir = prepare_output(cfg)?;
    let (grid, bank) = setup(cfg)?;
    let state = make_initial_data(&cfg.initial_data_spec()?, &grid, &bank)?;

    let smallness = check_smallness_conditions(
        &state,
        cfg.p,
        cfg.s,
        cfg.constant_c,
        cfg.constant_c_small,
        cfg.epsilon,
        &bank,
    )?;

    let mut options = RunOptions::new(cfg.t_max, cfg.dt, cfg.record_every);
    options.snapshot_every = cfg.snapshot_every;
    options.p = cfg.p;
    let trajectory = run(&state, &options, &bank)?;

    fs::write(
        dir.join("diagnostics.csv"),
        records_to_csv(&trajectory.records),
    )?;
    write_snapshots(&dir, &trajectory)?;

    let boot = bootstrap_monitor(&trajectory, cfg.bootstrap_threshold)?;
    let vort = vorticity_bound_monitor(&trajectory)?;
    let mut report = String::new();
    writeln!(report, "records: {}", trajectory.records.len())?;
    writeln!(
        report,
        "smallness: |mean b| = ({:.3e}, {:.3e}); ||u||_B1inf1 + ||b||_B0inf1 = {:.6e} vs epsilon {:.3e} -> {}",
        smallness.mean_b.0,
        smallness.mean_b.1,
        smallness.smallness,
        smallness.epsilon,
        if smallness.smallness_passes { "pass" } else { "above" }
    )?;
    writeln!(
        report,
        "L2 condition: ||u||+||b|| = {:.6e} vs threshold {:.6e} -> {}",
        smallness.l2_sum,
        smallness.l2_threshold,
        if smallness.l2_passes { "pass" } else { "above" }
    )?;
    if let Ok(res) = energy_identity_residual(&trajectory) {
        writeln!(
            report,
            "energy identity residual: {:.3e} ({})",
            res.residual,
            if res.normalized { "normalized" } else { "absolute" }
        )?;
    }
    writeln!(
        report,
        "monitors: max |mean b| = {:.3e}; max div residual u/b = {:.3e}/{:.3e}; max CFL = {:.3}",
        trajectory.monitors.max_abs_mean_b,
        trajectory.monitors.max_div_u_rel,
        trajectory.monitors.max_div_b_rel,
        trajectory.monitors.max_cfl
    )?;
    writeln!(
        report,
        "bootstrap: threshold {}; first crossing: {}",
        boot.threshold,
        boot.first_crossing
            .map(|t| format!("{t:.6e}"))
            .unwrap_or_else(|| "never".into())
    )?;
    writeln!(
        report,
        "vorticity: max ratio to measured bound {:.3e}; envelope c = {:.3e}",
        vort.max_bound_ratio, vort.envelope_c
    )?;
    match &trajectory.blowup {
        Some(info) => {
            writeln!(report, "blow-up: t = {:.6e} ({})", info.time, info.reason)?;
        }
        None => writeln!(report, "blow-up: none")?,
    }
    fs::write(dir.join("report.txt"), &report)?;
    print!("{report}");
    // Blow-up is a recorded result, not a tool failure.
    Ok(0)
}

pub fn picard(cfg: &ExperimentConfig) -> CmdResult {
    let dir = prepare_output(cfg)?;
    let (grid, bank) = setup(cfg)?;
    let state = make_initial_data(&cfg.initial_data_spec()?, &grid, &bank)?;
    let out = picard_iterate(
        &state.u,
        &state.b,
        &PicardOptions {
            n_max: cfg.picard_iterates,
            t_final: cfg.t_max,
            dt: cfg.dt,
            p: cfg.p,
            constant_c: cfg.constant_c,
            record_every: cfg.record_every,
        },
        &bank,
    )?;
    let report = picard_convergence_report(&out, &bank)?;

    let mut csv = String::from("n,truncation_level,d_n,ratio,h1_sup,b_at,max_div_u\n");
    for (i, traj) in out.trajectories.iter().enumerate() {
        let _ = traj;
        let level = out.truncation_levels[i]
            .map(|l| l.to_string())
            .unwrap_or_default();
        let d = report
            .diffs
            .get(i)
            .map(|v| format!("{v:.16e}"))
            .unwrap_or_default();
        let r = report
            .diff_ratios
            .get(i)
            .map(|v| format!("{v:.16e}"))
            .unwrap_or_default();
        writeln!(
            csv,
            "{i},{level},{d},{r},{:.16e},{:.16e},{:.16e}",
            report.h1_sup[i], report.b_at[i], out.max_div_u[i]
        )?;
    }
    fs::write(dir.join("picard.csv"), &csv)?;
    for w in &out.warnings {
        println!("warning: {w}");
    }
    println!(
        "iterates: {}; d_n = {:?}",
        out.trajectories.len(),
        report
            .diffs
            .iter()
            .map(|d| format!("{d:.3e}"))
            .collect::<Vec<_>>()
    );
    Ok(0)
}

pub fn lifespan(cfg: &ExperimentConfig) -> CmdResult {
    let dir = prepare_output(cfg)?;
    let (grid, bank) = setup(cfg)?;
    let state = make_initial_data(&cfg.initial_data_spec()?, &grid, &bank)?;
    let rep = compute_lifespan(&state.u, &state.b, cfg.p, cfg.constant_c, &bank)?;
    let smallness = verify_semigroup_smallness(&state.u, rep.t, rep.a, cfg.p, &bank)?;

    let branch = match rep.branch {
        LifespanBranch::SmallData => "small-data",
        LifespanBranch::LargeData => "large-data",
    };
    let mut csv = String::from("E0,a,C,p,branch,j0,T0,T1,T2,T\n");
    writeln!(
        csv,
        "{:.16e},{:.16e},{:.16e},{},{},{},{:.16e},{},{},{:.16e}",
        rep.e0,
        rep.a,
        rep.c,
        rep.p,
        branch,
        rep.j0.map(|j| j.to_string()).unwrap_or_default(),
        rep.t0,
        rep.t1.map(|v| format!("{v:.16e}")).unwrap_or_default(),
        rep.t2.map(|v| format!("{v:.16e}")).unwrap_or_default(),
        rep.t
    )?;
    fs::write(dir.join("lifespan.csv"), &csv)?;

    let mut text = String::new();
    writeln!(text, "data size          E0 = {:.6e}", rep.e0)?;
    writeln!(text, "smallness target    a = {:.6e} (C = {})", rep.a, rep.c)?;
    writeln!(text, "branch norm ||u0||  = {:.6e} -> {branch}", rep.u0_low_norm)?;
    if let Some(j0) = rep.j0 {
        writeln!(text, "tail index         j0 = {j0}")?;
    }
    writeln!(text, "horizons           T0 = {:.6e}", rep.t0)?;
    if let (Some(t1), Some(t2)) = (rep.t1, rep.t2) {
        writeln!(text, "                   T1 = {t1:.6e}")?;
        writeln!(text, "                   T2 = {t2:.6e}")?;
    }
    writeln!(text, "lifespan            T = {:.6e}", rep.t)?;
    writeln!(
        text,
        "heat-flow smallness over [0, T]: L1 {:.3e} + L2 {:.3e} = {:.3e} vs a -> {}",
        smallness.l1_high,
        smallness.l2_mid,
        smallness.sum,
        if smallness.passes { "pass" } else { "above" }
    )?;
    fs::write(dir.join("lifespan.txt"), &text)?;
    print!("{text}");
    Ok(0)
}

pub fn decay_study(cfg: &ExperimentConfig) -> CmdResult {
    let dir = prepare_output(cfg)?;
    let (grid, bank) = setup(cfg)?;
    let state = make_initial_data(&cfg.initial_data_spec()?, &grid, &bank)?;
    let mut options = RunOptions::new(cfg.t_max, cfg.dt, cfg.record_every);
    options.p = cfg.p;
    let trajectory = run(&state, &options, &bank)?;
    fs::write(
        dir.join("diagnostics.csv"),
        records_to_csv(&trajectory.records),
    )?;

    let window = cfg.decay_window;
    let b_l2 = diagnostics::column_series(&trajectory, |r| r.b_l2);
    let b_linf = diagnostics::column_series(&trajectory, |r| r.b_linf);
    let fit_l2 = fit_decay_rate(&b_l2, window)?;
    let fit_linf = fit_decay_rate(&b_linf, window)?;

    let mut text = String::new();
    writeln!(
        text,
        "b L2 decay:   rate {:.6e}, r^2 {:.6}, samples {}{}",
        fit_l2.rate,
        fit_l2.r_squared,
        fit_l2.samples_used,
        if fit_l2.truncated { " (window truncated)" } else { "" }
    )?;
    writeln!(
        text,
        "b Linf decay: rate {:.6e}, r^2 {:.6}, samples {}{}",
        fit_linf.rate,
        fit_linf.r_squared,
        fit_linf.samples_used,
        if fit_linf.truncated { " (window truncated)" } else { "" }
    )?;
    let first = trajectory.records.first().expect("records");
    let last = trajectory.records.last().expect("records");
    writeln!(
        text,
        "b Linf drop: {:.3e} -> {:.3e} ({:.1} orders)",
        first.b_linf,
        last.b_linf,
        (first.b_linf / last.b_linf).log10()
    )?;
    fs::write(dir.join("decay.txt"), &text)?;
    print!("{text}");
    Ok(0)
}

pub fn stability(cfg: &ExperimentConfig) -> CmdResult {
    use besov_mhd_core::initial_data::random_solenoidal_pair;

    let dir = prepare_output(cfg)?;
    let (grid, bank) = setup(cfg)?;
    let state = make_initial_data(&cfg.initial_data_spec()?, &grid, &bank)?;

    // Fixed perturbation direction, normalized in the weak data norm.
    let (dir_u, dir_b) = random_solenoidal_pair(&grid, cfg.perturb_seed, (cfg.band_lo, cfg.band_hi));
    let weak_b = BesovParams::new(2.0 / cfg.p - 1.0, cfg.p, f64::INFINITY)?;
    let weak_u = BesovParams::new(2.0 / cfg.p, cfg.p, f64::INFINITY)?;
    let unit = besov_norm_vector(&dir_b, &weak_b, &bank) + besov_norm_vector(&dir_u, &weak_u, &bank);
    let dir_u = dir_u.scale(1.0 / unit);
    let dir_b = dir_b.scale(1.0 / unit);

    let mut csv =
        String::from("delta,delta_weak,delta_strong,weak_ratio,strong_ratio,growth_factor\n");
    let mut ratios = Vec::new();
    let mut text = String::new();
    for k in 0..3 {
        let delta = cfg.stability_delta / 2f64.powi(k);
        let rep = stability_experiment(
            &state.u,
            &state.b,
            &dir_u.scale(delta),
            &dir_b.scale(delta),
            cfg.t_max,
            cfg.dt,
            cfg.p,
            cfg.record_every,
            cfg.constant_c,
            &bank,
        )?;
        writeln!(
            csv,
            "{delta:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            rep.delta_weak, rep.delta_strong, rep.weak_ratio, rep.strong_ratio, rep.growth_factor
        )?;
        writeln!(
            text,
            "delta {delta:.3e}: weak ratio {:.6e}, strong ratio {:.6e}",
            rep.weak_ratio, rep.strong_ratio
        )?;
        ratios.push(rep.weak_ratio);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = ratios
        .iter()
        .map(|r| (r - mean).abs() / mean)
        .fold(0.0f64, f64::max);
    writeln!(text, "weak-ratio spread about the mean: {:.2}%", 100.0 * spread)?;
    fs::write(dir.join("stability.csv"), &csv)?;
    fs::write(dir.join("stability.txt"), &text)?;
    print!("{text}");
    Ok(0)
}

pub fn selftest() -> CmdResult {
    let report = run_selftest();
    for check in &report.checks {
        println!("{}", check.line());
    }
    println!(
        "selftest: {} in {:.1}s",
        if report.all_passed() { "PASS" } else { "FAIL" },
        report.total_seconds
    );
    Ok(if report.all_passed() { 0 } else { 1 })
}
