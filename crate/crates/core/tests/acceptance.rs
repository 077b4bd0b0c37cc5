//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::Instant;

use ciprecode::bounds::{genie_bound, multicast_rank1_bound, zf_baseline};
use ciprecode::harness::{run_scenario, ResultTable, ScenarioConfig, ScenarioId};
use ciprecode::maxmin::{cimm, cimmr, MaxMinSpec};
use ciprecode::precoder::{
    cipm, cipmr_equal_margin, solve_fixed_phase, stationarity_residual, MarginMode, PrecodeSolution,
    TargetSpec, DEFAULT_GRID_STEP,
};
use ciprecode::ser::{analytic_user_ser, bpsk_closed_form, mc_ser, ser_strict_quadrature};
use ciprecode::{draw_channel, ChannelMatrix, Constellation, RngStream, SymbolFrame, C64};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

fn instance(seed: u64, i: u64, order: usize) -> (ChannelMatrix, SymbolFrame) {
    let mut rng = RngStream::new(seed, i).rng();
    let ch = draw_channel(2, 3, 1.0, &mut rng).unwrap();
    let c = Constellation::psk(order).unwrap();
    let frame = SymbolFrame::random(c, 2, &mut rng);
    (ch, frame)
}

fn closed_form() -> Outcome {
    let mut worst = 0.0f64;
    let mut rng = RngStream::new(101, 0).rng();
    for _ in 0..100 {
        let zeta = rng.random_range(0.5..20.0);
        let ch = draw_channel(1, 4, 1.0, &mut rng).unwrap();
        let frame = SymbolFrame::random(Constellation::qpsk(), 1, &mut rng);
        let p = cipm(&ch, &frame, &TargetSpec::strict(vec![zeta], 0.7)).unwrap().power;
        let exact = 0.7 * zeta / ch.row_norm(0).powi(2);
        worst = worst.max((p - exact).abs() / exact);

        // Orthogonal rows: scaled columns of a random unitary.
        let m = draw_channel(3, 3, 1.0, &mut rng).unwrap().matrix().clone();
        let q = m.qr().q();
        let gains = [0.3, 1.0, 2.5];
        let rows: Vec<Vec<C64>> = (0..3)
            .map(|j| q.row(j).iter().map(|z| z * gains[j]).collect())
            .collect();
        let ch = ChannelMatrix::from_rows(&rows).unwrap();
        let zetas = vec![1.0, 4.0, 9.0];
        let frame = SymbolFrame::random(Constellation::psk(8).unwrap(), 3, &mut rng);
        let p = cipm(&ch, &frame, &TargetSpec::strict(zetas.clone(), 1.0)).unwrap().power;
        let exact: f64 = (0..3).map(|j| zetas[j] / ch.row_norm(j).powi(2)).sum();
        worst = worst.max((p - exact).abs() / exact);
    }
    outcome(worst <= 1e-10, format!("max relative error {worst:.2e} (limit 1e-10)"))
}

/// Least power over `a_j ∈ [s_j, 4 s_j]` on a `1e-3·s_j` grid, each point
/// solved in least-norm form with the SVD pseudo-inverse.
fn amplitude_grid_power(ch: &ChannelMatrix, frame: &SymbolFrame, floors: &[f64], offsets: &[f64]) -> f64 {
    let pinv: DMatrix<C64> = ch.matrix().clone().pseudo_inverse(1e-12).unwrap();
    let cols: Vec<DVector<C64>> = (0..2)
        .map(|j| pinv.column(j) * C64::from_polar(1.0, frame.angle(j) + offsets[j]))
        .collect();
    let n = 3000;
    let mut best = f64::INFINITY;
    for i in 0..=n {
        let base = &cols[0] * C64::new(floors[0] * (1.0 + 3.0 * i as f64 / n as f64), 0.0);
        for k in 0..=n {
            let a1 = floors[1] * (1.0 + 3.0 * k as f64 / n as f64);
            let p: f64 = base.iter().zip(cols[1].iter()).map(|(b, c)| (b + c * a1).norm_sqr()).sum();
            best = best.min(p);
        }
    }
    best
}

fn oracle_equivalence() -> Outcome {
    let mut worst_gap = 0.0f64;
    let mut below = 0;
    let mut worst_residual = 0.0f64;
    for i in 0..200 {
        let (ch, frame) = instance(202, i, 4);
        let mut rng = RngStream::new(203, i).rng();
        let zetas = vec![rng.random_range(1.0..10.0), rng.random_range(1.0..10.0)];
        let spec = TargetSpec::strict(zetas, 1.0).with_margins(MarginMode::Equal(PI / 4.0));
        let offsets = if i % 2 == 0 {
            vec![0.0, 0.0]
        } else {
            vec![rng.random_range(-PI / 4.0..PI / 4.0), rng.random_range(-PI / 4.0..PI / 4.0)]
        };
        let sol = solve_fixed_phase(&ch, &frame, &spec, &offsets).unwrap();
        let grid = amplitude_grid_power(&ch, &frame, &spec.amplitude_floors(), &offsets);
        if sol.power > grid * (1.0 + 1e-12) {
            below += 1;
        }
        worst_gap = worst_gap.max((grid - sol.power).abs() / sol.power);
        let strict = cipm(&ch, &frame, &spec).unwrap();
        worst_residual = worst_residual.max(stationarity_residual(&ch, &strict).unwrap());
    }
    outcome(
        worst_gap <= 1e-4 && below == 0 && worst_residual <= 1e-6,
        format!(
            "200 instances: max relative gap {worst_gap:.2e} (limit 1e-4), {below} grid points below the solver, \
             max residual at zero margin {worst_residual:.2e} (limit 1e-6)"
        ),
    )
}

fn monotonicity() -> Outcome {
    let slack = 1e-9;
    let spec = TargetSpec::uniform(2, db(4.7712), 1.0);
    let phis = [0.0, PI / 16.0, PI / 8.0, PI / 5.0];
    let budget = 100.0;
    let mm = MaxMinSpec::new(vec![1.0, 1.0], budget, 1.0).with_tolerance(1e-12 * budget);
    let (mut p_viol, mut t_viol) = (0, 0);
    for i in 0..1000 {
        let (ch, frame) = instance(303, i, 4);
        let p0 = cipm(&ch, &frame, &spec).unwrap().power;
        let p8 = cipmr_equal_margin(&ch, &frame, &spec, PI / 8.0, DEFAULT_GRID_STEP).unwrap().power;
        let p5 = cipmr_equal_margin(&ch, &frame, &spec, PI / 5.0, DEFAULT_GRID_STEP).unwrap().power;
        if p5 > p8 * (1.0 + slack) || p8 > p0 * (1.0 + slack) {
            p_viol += 1;
        }
        let t: Vec<f64> = phis
            .iter()
            .map(|&phi| cimmr(&ch, &frame, &mm, phi, DEFAULT_GRID_STEP).unwrap().t)
            .collect();
        if t.windows(2).any(|w| w[1] < w[0] * (1.0 - slack)) {
            t_viol += 1;
        }
    }
    outcome(
        p_viol == 0 && t_viol == 0,
        format!("1000 trials: {p_viol} power-order violations, {t_viol} max-min violations (slack 1e-9)"),
    )
}

fn bound_ordering() -> Outcome {
    let targets = [db(4.7712); 2];
    let (mut genie_viol, mut mc_viol) = (0, 0);
    for i in 0..1000 {
        let (ch, frame) = instance(404, i, 4);
        let p = cipm(&ch, &frame, &TargetSpec::strict(targets.to_vec(), 1.0)).unwrap().power;
        if genie_bound(&ch, &targets, 1.0).unwrap().power > p * (1.0 + 1e-9) {
            genie_viol += 1;
        }
        if multicast_rank1_bound(&ch, &targets, 1.0).unwrap().power > p * (1.0 + 1e-9) {
            mc_viol += 1;
        }
    }
    outcome(
        genie_viol == 0 && mc_viol == 0,
        format!("1000 trials: {genie_viol} genie violations, {mc_viol} multicast violations"),
    )
}

fn ser_cross_validation() -> Outcome {
    let (ch, frame) = instance(505, 0, 4);
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, snr_db) in [6.0, 10.0, 13.01].into_iter().enumerate() {
        let zeta = db(snr_db);
        let sol = zf_baseline(&ch, &frame, &[zeta; 2], 1.0).unwrap();
        let exact = ser_strict_quadrature(zeta, 1.0, 4).unwrap();
        let mut rng = RngStream::new(506, k as u64).rng();
        let (mut errors, mut n) = (0u64, 0u64);
        let batch = 200_000;
        while errors < 200 && n < 400_000_000 {
            let rep = mc_ser(&sol, 1.0, batch, &mut rng).unwrap();
            errors += rep.errors;
            n += 2 * batch;
        }
        let p = errors as f64 / n as f64;
        let sigma = (exact * (1.0 - exact) / n as f64).sqrt();
        let good = errors >= 100 && (p - exact).abs() <= 3.0 * sigma;
        ok &= good;
        parts.push(format!(
            "{snr_db} dB: mc {p:.4e} vs {exact:.4e} ({:.2}σ, {errors} errors)",
            (p - exact).abs() / sigma
        ));
    }
    let mut worst = 0.0f64;
    for i in 0..=40 {
        let omega = db(-10.0 + 0.65 * i as f64);
        let q = ser_strict_quadrature(omega, 1.0, 2).unwrap();
        worst = worst.max((q - bpsk_closed_form(omega, 1.0)).abs());
    }
    ok &= worst <= 1e-9;
    parts.push(format!("bpsk max abs error {worst:.2e} (limit 1e-9)"));
    outcome(ok, parts.join("; "))
}

/// SER averaged over channel draws, drawing until at least 100 errors and
/// `min_draws` channels are seen.
fn fading_ser(
    stream: u64,
    min_draws: u64,
    max_draws: u64,
    solve: impl Fn(&ChannelMatrix, &SymbolFrame) -> PrecodeSolution,
) -> (f64, f64, u64, u64) {
    let symbols = 2000;
    let (mut errors, mut draws, mut analytic) = (0u64, 0u64, 0.0);
    while (errors < 100 || draws < min_draws) && draws < max_draws {
        let (ch, frame) = instance(600 + stream, draws, 4);
        let sol = solve(&ch, &frame);
        analytic += analytic_user_ser(&sol, 1.0).unwrap().iter().sum::<f64>() / 2.0;
        let mut noise = RngStream::new(700 + stream, draws).rng();
        errors += mc_ser(&sol, 1.0, symbols, &mut noise).unwrap().errors;
        draws += 1;
    }
    let mc = errors as f64 / (2 * symbols * draws) as f64;
    (mc, analytic / draws as f64, errors, draws)
}

fn fig4_point() -> Outcome {
    let spec = MaxMinSpec::new(vec![1.0, 1.0], db(20.0), 1.0);
    let cases: [(&str, f64, f64); 3] = [("cimm", 0.0, 1e-5), ("cimmr(π/8)", PI / 8.0, 5e-3), ("cimmr(π/5)", PI / 5.0, 1e-2)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, (name, phi, reference)) in cases.into_iter().enumerate() {
        let (mc, analytic, errors, draws) = fading_ser(k as u64, 2000, 20_000, |ch, frame| {
            if phi == 0.0 {
                cimm(ch, frame, &spec).unwrap().solution
            } else {
                cimmr(ch, frame, &spec, phi, DEFAULT_GRID_STEP).unwrap().solution
            }
        });
        let good = errors >= 100 && mc <= 3.0 * reference && mc >= reference / 3.0;
        ok &= good;
        parts.push(format!(
            "{name}: {mc:.3e} (analytic {analytic:.3e}, {errors} errors, {draws} channels) vs {reference:.0e}"
        ));
    }
    outcome(ok, parts.join("; "))
}

fn phi_star(id: ScenarioId, reference: f64) -> (bool, String) {
    let cfg = ScenarioConfig::defaults(id);
    let table = run_scenario(&cfg).unwrap();
    let star: f64 = table.meta("phi_star_deg").unwrap().parse().unwrap();
    let eta: f64 = table.meta("eta_star").unwrap().parse().unwrap();
    (
        (star - reference).abs() <= 5.0,
        format!("{}: φ* = {star}° (η {eta:.4}) vs {reference}° ± 5°", id.name()),
    )
}

fn energy_peaks() -> Outcome {
    let (a, da) = phi_star(ScenarioId::Fig8, 27.0);
    let (b, db_) = phi_star(ScenarioId::Fig9, 10.0);
    outcome(a && b, format!("{da}; {db_}"))
}

fn table2() -> Outcome {
    let table: ResultTable = run_scenario(&ScenarioConfig::defaults(ScenarioId::Table2)).unwrap();
    let row = |order: f64| -> Vec<f64> {
        table.rows().iter().find(|r| r[0] == order).unwrap()[1..].to_vec()
    };
    let (bpsk, qpsk) = (row(2.0), row(4.0));
    let ref_q = [135.5, 139.1, 136.0, 121.0];
    let ref_b = [67.75, 69.9, 71.0, 72.5];
    let within = |v: &[f64], r: &[f64]| v.iter().zip(r).all(|(a, b)| (a - b).abs() <= 0.15 * b);
    let peak = qpsk.iter().cloned().fold(f64::MIN, f64::max);
    let q_shape = qpsk[1] == peak && qpsk[2] < qpsk[1] && qpsk[3] < qpsk[2];
    let b_shape = bpsk.windows(2).all(|w| w[1] >= w[0]);
    let (q_lvl, b_lvl) = (within(&qpsk, &ref_q), within(&bpsk, &ref_b));
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>().join("/");
    outcome(
        q_lvl && b_lvl && q_shape && b_shape,
        format!(
            "qpsk {} (levels {}, rise-then-fall {}); bpsk {} (levels {}, non-decreasing {})",
            fmt(&qpsk),
            if q_lvl { "ok" } else { "off" },
            q_shape,
            fmt(&bpsk),
            if b_lvl { "ok" } else { "off" },
            b_shape
        ),
    )
}

fn duality() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..200 {
        let (ch, frame) = instance(909, i, 4);
        let mut rng = RngStream::new(910, i).rng();
        let r = vec![rng.random_range(0.5..5.0), rng.random_range(0.5..5.0)];
        let p = cipm(&ch, &frame, &TargetSpec::strict(r.clone(), 1.0)).unwrap().power;
        let t = cimm(&ch, &frame, &MaxMinSpec::new(r, p, 1.0)).unwrap().t;
        worst = worst.max((t - 1.0).abs());
    }
    outcome(worst <= 1e-3, format!("200 instances: max |t* − 1| = {worst:.2e} (limit 1e-3)"))
}

fn csv_with_threads(cfg: &ScenarioConfig, threads: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| run_scenario(cfg).unwrap().to_csv_string().unwrap())
}

fn determinism() -> Outcome {
    let mut mismatched = Vec::new();
    for id in ScenarioId::ALL {
        let mut cfg = ScenarioConfig::defaults(id);
        cfg.trials = cfg.trials.min(12);
        cfg.seed = 77;
        let runs: Vec<String> = [1, 1, 4].iter().map(|&n| csv_with_threads(&cfg, n)).collect();
        if runs[0] != runs[1] || runs[0] != runs[2] {
            mismatched.push(id.name());
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (k, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_ciprecode"))
            .args(["run", "--scenario", "fig4", "--seed", "5", "--trials", "6", "--quiet", "--out"])
            .arg(&out)
            .env("CIPRECODE_THREADS", threads)
            .env("SOURCE_DATE_EPOCH", "1700000000")
            .status()
            .unwrap();
        files.push(if status.success() { std::fs::read(&out).unwrap() } else { Vec::new() });
    }
    let cli_ok = !files[0].is_empty() && files[0] == files[1];
    outcome(
        mismatched.is_empty() && cli_ok,
        format!(
            "{} scenarios at 1/1/4 threads, mismatches {:?}; cli fig4 at 1 vs 3 threads identical: {cli_ok}",
            ScenarioId::ALL.len(),
            mismatched
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("closed-form power", closed_form),
        ("fixed-phase oracle", oracle_equivalence),
        ("margin monotonicity", monotonicity),
        ("bound ordering", bound_ordering),
        ("ser cross-validation", ser_cross_validation),
        ("max-min ser at 20 dB", fig4_point),
        ("energy-efficiency peaks", energy_peaks),
        ("table of η against margin", table2),
        ("max-min duality", duality),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} [{:.1}s] {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
