//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL line.

use std::process::{Command, ExitCode};
use std::time::Instant;

use cavity_ness::dynamics::distance;
use cavity_ness::liouvillian::{CMatrix3, State3};
use cavity_ness::observables::{curl_flux_closed_form, curl_flux_edges, heat_trace_residual, steady_matrix_sampler};
use cavity_ness::*;
use cavity_ness_cli::commands::fock_comparison;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAMMA: f64 = 0.1;
const T_A: f64 = 0.2;
const LINES: [f64; 3] = [0.1, 0.2, 0.4];
const STRICT: f64 = 1e-14;

type Outcome = std::result::Result<String, String>;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn point(lambda: f64, delta_t: f64) -> SystemParams {
    SystemParams::from_delta_t(lambda, GAMMA, T_A, delta_t).unwrap()
}

fn validation_grid() -> Vec<SystemParams> {
    let mut out = Vec::new();
    for &l in &linspace(0.05, 0.5, 20) {
        for &dt in &linspace(0.0, 0.8, 20) {
            out.push(point(l, dt));
        }
    }
    out
}

fn figure_lines() -> Vec<(f64, Vec<Evaluation>)> {
    LINES
        .iter()
        .map(|&l| {
            let evals = linspace(0.0, 0.8, 81)
                .into_iter()
                .map(|dt| evaluate(&point(l, dt), &QfiOptions::default()).unwrap())
                .collect();
            (l, evals)
        })
        .collect()
}

fn surface() -> Vec<SystemParams> {
    let mut out = Vec::new();
    for &l in &linspace(0.05, 0.5, 50) {
        for &dt in &linspace(0.0, 0.8, 50) {
            out.push(point(l, dt));
        }
    }
    out
}

fn every_grid_point() -> Vec<SystemParams> {
    let mut all = validation_grid();
    all.extend(surface());
    for &l in &LINES {
        all.extend(linspace(0.0, 0.8, 81).into_iter().map(|dt| point(l, dt)));
    }
    all
}

fn random_params(rng: &mut ChaCha8Rng) -> SystemParams {
    SystemParams::new(
        1.0,
        rng.gen_range(0.01..0.6),
        rng.gen_range(0.01..0.3),
        rng.gen_range(0.1..2.0),
        rng.gen_range(0.1..2.0),
    )
    .unwrap()
}

fn random_state(rng: &mut ChaCha8Rng) -> State3 {
    let a = CMatrix3::from_fn(|_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let rho = a * a.adjoint();
    State3::from_matrix(&(rho / rho.trace()))
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] - w[0] > STRICT)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for p in validation_grid() {
        let cv = cross_validate(&p.derive().unwrap()).map_err(|e| e.to_string())?;
        worst = worst.max(cv.worst);
    }
    check(worst <= 1e-10, format!("worst difference {worst:.2e} over 400 points"))
}

fn gibbs_limit() -> Outcome {
    let p = SystemParams::new(1.0, 0.1, GAMMA, 0.2, 0.2).unwrap();
    let ss = steady_analytic(&p.derive().unwrap());
    let [g, e, f] = ss.populations;
    let rel = |x: f64, y: f64| ((x - y) / y).abs();
    let upper = rel(e / g, (-1.1f64 / 0.2).exp());
    let lower = rel(f / g, (-0.9f64 / 0.2).exp());
    let coherence = ss.coherence.norm();
    check(
        upper <= 1e-10 && lower <= 1e-10 && coherence <= 1e-14,
        format!("ratio errors {upper:.2e}, {lower:.2e}; |rho_ef| = {coherence:.2e}"),
    )
}

fn fixed_point() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = random_params(&mut rng).derive().unwrap();
        let rate = EquationsOfMotion::new(&d).derivative(&steady_analytic(&d).to_state());
        worst = worst.max(rate.to_real_vector().amax());
    }
    check(worst < 1e-12, format!("max |drho/dt| {worst:.2e} over 100 random points"))
}

fn heat_identities() -> Outcome {
    let (mut balance, mut split, mut trace): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let points = every_grid_point();
    for p in &points {
        let e = evaluate(p, &QfiOptions::default()).map_err(|e| e.to_string())?;
        balance = balance.max(e.residuals.heat_balance);
        split = split.max(e.residuals.heat_split);
        trace = trace.max(heat_trace_residual(&e.steady, &p.derive().unwrap()));
    }
    check(
        balance <= 1e-12 && split <= 1e-12 && trace <= 1e-12,
        format!("balance {balance:.2e}, split {split:.2e}, trace form {trace:.2e} over {} points", points.len()),
    )
}

fn sign_structure() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for p in every_grid_point().into_iter().filter(|p| p.delta_t() >= 0.05 - 1e-12) {
        let r = evaluate(&p, &QfiOptions::default()).map_err(|e| e.to_string())?.record;
        checked += 1;
        let ok = r.j_b > 0.0
            && r.j_a < 0.0
            && r.j_b_p > 0.0
            && r.j_a_p < 0.0
            && r.j_a_c > 0.0
            && r.j_b_c < 0.0
            && r.epr > 0.0;
        if !ok {
            bad.push((p.lambda, p.delta_t()));
        }
    }
    match bad.first() {
        None => Ok(format!("all seven signs hold at {checked} points")),
        Some((l, dt)) => Err(format!("{} violations among {checked} points, first at lambda={l}, dT={dt}", bad.len())),
    }
}

fn curl_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut at_equilibrium: f64 = 0.0;
    for p in every_grid_point() {
        let d = p.derive().unwrap();
        let ss = steady_analytic(&d);
        let a = transfer_generator_a(&d).map_err(|e| e.to_string())?;
        let edges = curl_flux_edges(&a, &ss.populations);
        let closed = curl_flux_closed_form(&d, &ss.populations);
        for x in edges {
            worst = worst.max((x - closed).abs());
        }
        if p.delta_t() == 0.0 {
            at_equilibrium = at_equilibrium.max(edges.iter().chain([&closed]).fold(0.0, |m: f64, x| m.max(x.abs())));
        }
    }
    check(
        worst <= 1e-12 && at_equilibrium <= 1e-14,
        format!("edge/closed-form spread {worst:.2e}; |J_curl| at equal temperatures {at_equilibrium:.2e}"),
    )
}

fn monotonicity() -> Outcome {
    let lines = figure_lines();
    let column = |k: usize, f: &dyn Fn(&ObservablesRecord) -> f64| -> Vec<f64> {
        lines[k].1.iter().map(|e| f(&e.record)).collect()
    };
    let mut failures = Vec::new();
    let observables: [(&str, &dyn Fn(&ObservablesRecord) -> f64, bool); 4] = [
        ("|rho_ef|", &|r| r.coherence_abs, false),
        ("J_curl", &|r| r.j_curl, true),
        ("J_b", &|r| r.j_b, true),
        ("EPR", &|r| r.epr, true),
    ];
    for (name, f, grows_with_lambda) in observables {
        let cols: Vec<Vec<f64>> = (0..LINES.len()).map(|k| column(k, f)).collect();
        for (k, c) in cols.iter().enumerate() {
            if !strictly_increasing(c) {
                failures.push(format!("{name} not increasing in dT at lambda={}", LINES[k]));
            }
        }
        // Every quantity vanishes identically at equal temperatures, so the
        // ordering in lambda is checked where the temperatures differ.
        for i in 1..cols[0].len() {
            for k in 1..cols.len() {
                let step = if grows_with_lambda { cols[k][i] - cols[k - 1][i] } else { cols[k - 1][i] - cols[k][i] };
                if step <= STRICT {
                    failures.push(format!("{name} ordering in lambda broken at dT index {i}"));
                }
            }
        }
    }
    let qfi_low = column(0, &|r| r.qfi);
    if !strictly_increasing(&qfi_low) {
        failures.push("QFI at lambda=0.1 not increasing".into());
    }
    let qfi_high = column(2, &|r| r.qfi);
    let (arg, max) = qfi_high.iter().enumerate().fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    let interior = arg > 0
        && arg + 1 < qfi_high.len()
        && max - qfi_high[0] > STRICT
        && max - qfi_high[qfi_high.len() - 1] > STRICT;
    if !interior {
        failures.push("QFI at lambda=0.4 has no interior maximum".into());
    }
    let detail = format!("QFI(lambda=0.4) peaks at dT={:.2}", 0.8 * arg as f64 / 80.0);
    check(failures.is_empty(), if failures.is_empty() { detail } else { failures.join("; ") })
}

fn qfi_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut min_coherent = f64::INFINITY;
    for _ in 0..20 {
        let p = SystemParams::new(
            1.0,
            rng.gen_range(0.05..0.5),
            rng.gen_range(0.05..0.2),
            rng.gen_range(0.15..0.4),
            rng.gen_range(0.45..1.2),
        )
        .unwrap();
        let analytic = qfi_lambda(&p, &QfiOptions::default()).map_err(|e| e.to_string())?;
        let generic = qfi_general(steady_matrix_sampler(p), p.lambda, 1e-5).map_err(|e| e.to_string())?;
        if analytic.degenerate || generic.crossing {
            return Err(format!("degenerate sample at lambda={}", p.lambda));
        }
        worst = worst.max(((analytic.total - generic.total) / analytic.total).abs());
        min_coherent = min_coherent.min(analytic.coherent);
    }
    for p in every_grid_point() {
        min_coherent = min_coherent.min(qfi_lambda(&p, &QfiOptions::default()).map_err(|e| e.to_string())?.coherent);
    }
    check(
        worst <= 1e-6 && min_coherent >= 0.0,
        format!("worst relative difference {worst:.2e}; smallest coherent term {min_coherent:.2e}"),
    )
}

fn dynamics_convergence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst, mut drift): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let p = point(rng.gen_range(0.05..0.5), rng.gen_range(0.0..0.8));
        let d = p.derive().unwrap();
        let eom = EquationsOfMotion::new(&d);
        let traj = dynamics::evolve_sampled(&random_state(&mut rng), &eom, 100.0 / GAMMA, dynamics::DEFAULT_DT, 1000)
            .map_err(|e| e.to_string())?;
        worst = worst.max(distance(traj.last().unwrap(), &steady_analytic(&d).to_state()));
        drift = drift.max(traj.trace_drift());
    }

    let d = point(0.3, 0.6).derive().unwrap();
    let eom = EquationsOfMotion::new(&d);
    let start = random_state(&mut rng);
    let run = |dt: f64| evolve(&start, &eom, 10.0, dt).unwrap().last().unwrap().to_real_vector();
    let h = eom.max_dt;
    let (x1, x2, x3) = (run(h), run(h / 2.0), run(h / 4.0));
    let order = ((x1 - x2).amax() / (x2 - x3).amax()).log2();
    check(
        worst <= 1e-8 && drift <= 1e-9 && order >= 3.5,
        format!("distance at t=100/gamma {worst:.2e}; trace drift {drift:.2e}; RK4 order {order:.2}"),
    )
}

fn fock_check() -> Outcome {
    let p = SystemParams::new(1.0, 0.1, GAMMA, T_A, 1.0).unwrap();
    let (leakage, difference) = fock_comparison(&p, 4).map_err(|e| e.to_string())?;
    check(
        difference <= 5.0 * leakage,
        format!("leakage {leakage:.4e}; projected difference {difference:.4e}"),
    )
}

fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_cavity-ness");
    let sweep = || Command::new(bin).args(["sweep", "--preset", "fig2a"]).output().map_err(|e| e.to_string());
    let (first, second) = (sweep()?, sweep()?);
    if !first.status.success() || !second.status.success() {
        return Err("sweep --preset fig2a failed".into());
    }
    let identical = first.stdout == second.stdout && !first.stdout.is_empty();
    let validate = Command::new(bin).arg("validate").output().map_err(|e| e.to_string())?;
    check(
        identical && validate.status.code() == Some(0),
        format!(
            "sweep outputs identical: {identical} ({} bytes); validate exit code {:?}",
            first.stdout.len(),
            validate.status.code()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("oracle equivalence", oracle_equivalence),
        ("Gibbs limit", gibbs_limit),
        ("fixed point", fixed_point),
        ("heat-current identities", heat_identities),
        ("sign structure", sign_structure),
        ("curl-flux equivalence", curl_equivalence),
        ("monotonicity", monotonicity),
        ("QFI equivalence", qfi_equivalence),
        ("dynamics convergence", dynamics_convergence),
        ("single-excitation validity", fock_check),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} ({secs:.2} s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail} ({secs:.2} s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
