use cavity_ness::dynamics::{evolve_sampled, EquationsOfMotion, Trajectory};
use cavity_ness::liouvillian::{build_fock_generator, State3};
use cavity_ness::observables::{curl_flux_closed_form, curl_flux_edges, edge_spread, heat_trace_residual};
use cavity_ness::{
    cross_validate, evaluate_lenient, qfi_lambda, steady_analytic, transfer_generator_a, DerivedParams,
    ObservablesRecord, QfiOptions, SteadyState, SystemParams,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{DynamicsArgs, InitialState, ValidateArgs};
use crate::config::{Resolved, DELTA_T_MAX, LAMBDA_MAX, LAMBDA_MIN};
use crate::error::{CliError, CliResult};
use crate::output::{csv_line, numeric_line, to_json, Check};

/// Text to emit, plus the failure that should set the exit code once it is written.
#[derive(Debug)]
pub struct Outcome {
    pub body: String,
    pub failure: Option<CliError>,
    /// Non-fatal notes for the error stream.
    pub warnings: Vec<String>,
}

impl Outcome {
    fn ok(body: String) -> Self {
        Outcome {
            body,
            failure: None,
            warnings: Vec::new(),
        }
    }
}

const ORACLE_TOL: f64 = 1e-10;
const IDENTITY_TOL: f64 = 1e-12;
const SIGN_THRESHOLD: f64 = 0.05;

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::BadInput(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Per-point residuals shared by `steady` and `validate`.
#[derive(Debug, Clone, Copy)]
struct PointResiduals {
    oracle: f64,
    heat_balance: f64,
    heat_split: f64,
    heat_trace: f64,
    flux: f64,
    negative_epr: f64,
    negative_eigenvalue: f64,
    fixed_point: f64,
}

fn point_residuals(d: &DerivedParams, ss: &SteadyState, r: &ObservablesRecord, corrupt: bool) -> PointResiduals {
    let oracle = cross_validate(d).map(|c| c.worst).unwrap_or(f64::NAN);
    let flux = match transfer_generator_a(d) {
        Ok(mut a) => {
            if corrupt {
                a.0[(0, 1)] *= 1.0 + 1e-6;
            }
            let edges = curl_flux_edges(&a, &ss.populations);
            edge_spread(&edges).max((edges[0] - curl_flux_closed_form(d, &ss.populations)).abs())
        }
        Err(_) => f64::NAN,
    };
    PointResiduals {
        oracle,
        heat_balance: (r.j_a + r.j_b).abs(),
        heat_split: (r.j_a - r.j_a_p - r.j_a_c).abs().max((r.j_b - r.j_b_p - r.j_b_c).abs()),
        heat_trace: heat_trace_residual(ss, d),
        flux,
        negative_epr: (-r.epr).max(0.0),
        negative_eigenvalue: (-ss.min_eigenvalue()).max(0.0),
        fixed_point: EquationsOfMotion::new(d).derivative(&ss.to_state()).to_real_vector().amax(),
    }
}

impl PointResiduals {
    fn worst(a: Self, b: Self) -> Self {
        // NaN-propagating maximum, so a failed evaluation is never hidden.
        let m = |x: f64, y: f64| if x.is_nan() || y.is_nan() { f64::NAN } else { x.max(y) };
        PointResiduals {
            oracle: m(a.oracle, b.oracle),
            heat_balance: m(a.heat_balance, b.heat_balance),
            heat_split: m(a.heat_split, b.heat_split),
            heat_trace: m(a.heat_trace, b.heat_trace),
            flux: m(a.flux, b.flux),
            negative_epr: m(a.negative_epr, b.negative_epr),
            negative_eigenvalue: m(a.negative_eigenvalue, b.negative_eigenvalue),
            fixed_point: m(a.fixed_point, b.fixed_point),
        }
    }

    fn checks(&self) -> Vec<Check> {
        vec![
            Check::within("oracle_agreement", self.oracle, ORACLE_TOL),
            Check::within("heat_balance", self.heat_balance, IDENTITY_TOL),
            Check::within("heat_split", self.heat_split, IDENTITY_TOL),
            Check::within("heat_trace_form", self.heat_trace, IDENTITY_TOL),
            Check::within("flux_equivalence", self.flux, IDENTITY_TOL),
            Check::within("second_law", self.negative_epr, IDENTITY_TOL),
            Check::within("positivity", self.negative_eigenvalue, IDENTITY_TOL),
            Check::within("fixed_point", self.fixed_point, IDENTITY_TOL),
        ]
    }
}

fn failed_checks(checks: &[Check]) -> Option<CliError> {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        None
    } else {
        Some(CliError::Validation(format!("failed checks: {}", failed.join(", "))))
    }
}

#[derive(Debug, Serialize)]
pub struct SteadyReport {
    pub omega: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub t_a: f64,
    pub t_b: f64,
    pub delta_t: f64,
    pub omega_upper: f64,
    pub omega_lower: f64,
    pub rho_gg: f64,
    pub rho_ee: f64,
    pub rho_ff: f64,
    pub rho_ef_re: f64,
    pub rho_ef_im: f64,
    pub normalization: f64,
    pub min_eigenvalue: f64,
    pub coherence_abs: f64,
    pub qfi: f64,
    pub qfi_classical: f64,
    pub qfi_coherent: f64,
    pub j_curl: f64,
    pub j_a: f64,
    pub j_b: f64,
    pub j_a_p: f64,
    pub j_b_p: f64,
    pub j_a_c: f64,
    pub j_b_c: f64,
    pub epr: f64,
    pub checks: Vec<Check>,
}

pub fn steady_report(p: &SystemParams, qfi: &QfiOptions) -> CliResult<(SteadyReport, Vec<String>)> {
    let d = p.derive()?;
    let ss = steady_analytic(&d);
    let (r, errors) = evaluate_lenient(p, qfi);
    let q = qfi_lambda(p, qfi).ok();
    let warnings = errors.iter().map(|e| e.to_string()).collect();
    let checks = point_residuals(&d, &ss, &r, false).checks();
    Ok((
        SteadyReport {
            omega: p.omega,
            lambda: p.lambda,
            gamma: p.gamma,
            t_a: p.t_a,
            t_b: p.t_b,
            delta_t: p.delta_t(),
            omega_upper: d.omega_upper,
            omega_lower: d.omega_lower,
            rho_gg: ss.populations[0],
            rho_ee: ss.populations[1],
            rho_ff: ss.populations[2],
            rho_ef_re: ss.coherence.re,
            rho_ef_im: ss.coherence.im,
            normalization: ss.normalization.unwrap_or(f64::NAN),
            min_eigenvalue: ss.min_eigenvalue(),
            coherence_abs: r.coherence_abs,
            qfi: r.qfi,
            qfi_classical: q.map_or(f64::NAN, |q| q.classical),
            qfi_coherent: q.map_or(f64::NAN, |q| q.coherent),
            j_curl: r.j_curl,
            j_a: r.j_a,
            j_b: r.j_b,
            j_a_p: r.j_a_p,
            j_b_p: r.j_b_p,
            j_a_c: r.j_a_c,
            j_b_c: r.j_b_c,
            epr: r.epr,
            checks,
        },
        warnings,
    ))
}

pub fn cmd_steady(r: &Resolved) -> CliResult<Outcome> {
    let (report, warnings) = steady_report(&r.params, &r.qfi)?;
    Ok(Outcome {
        failure: failed_checks(&report.checks),
        body: to_json(&report)?,
        warnings,
    })
}

pub const SWEEP_KEYS: [&str; 2] = ["delta_t", "lambda"];

pub fn cmd_sweep(r: &Resolved) -> CliResult<Outcome> {
    let sweep = r
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::BadInput("sweep needs a grid: use --preset, --config or --axis1".into()))?;
    let grid = sweep.grid(&r.params)?;
    let qfi = r.qfi;
    let rows: Vec<(ObservablesRecord, Vec<cavity_ness::Error>)> =
        in_pool(r.threads, || grid.par_iter().map(|g| evaluate_lenient(&g.params, &qfi)).collect())?;

    let mut body = csv_line(
        SWEEP_KEYS
            .iter()
            .copied()
            .chain(sweep.outputs.iter().map(|&i| ObservablesRecord::FIELDS[i])),
    );
    let mut failed = 0;
    let mut first_failure = None;
    for (g, (record, errors)) in grid.iter().zip(rows.iter()) {
        let values = record.values();
        let mut line = vec![g.delta_t, g.params.lambda];
        line.extend(sweep.outputs.iter().map(|&i| values[i]));
        body.push_str(&numeric_line(&line));
        if !errors.is_empty() {
            failed += 1;
            first_failure.get_or_insert_with(|| {
                format!("delta_t={}, lambda={}: {}", g.delta_t, g.params.lambda, errors[0])
            });
        }
    }
    let failure = first_failure.map(|first| {
        CliError::Validation(format!(
            "{failed} of {} grid points failed checks and were written as nan; first at {first}",
            grid.len()
        ))
    });
    Ok(Outcome {
        body,
        failure,
        warnings: Vec::new(),
    })
}

pub const TRAJECTORY_HEADER: [&str; 8] = [
    "t",
    "rho_gg",
    "rho_ee",
    "rho_ff",
    "re_rho_ef",
    "im_rho_ef",
    "abs_rho_ge",
    "abs_rho_gf",
];

fn parse_list(s: &str, len: usize, flag: &str) -> CliResult<Vec<f64>> {
    let values: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::BadInput(format!("{flag} expects {len} comma-separated numbers, got `{s}`")))?;
    if values.len() != len || values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::BadInput(format!("{flag} expects {len} finite numbers, got `{s}`")));
    }
    Ok(values)
}

pub fn initial_state(args: &DynamicsArgs) -> CliResult<State3> {
    let state = match args.initial {
        InitialState::Ground => State3::ground(),
        InitialState::Mixed => State3::maximally_mixed(),
        InitialState::ExcitedE => State3::excited_upper(),
        InitialState::ExcitedF => State3::excited_lower(),
        InitialState::Custom => {
            let pops = args
                .populations
                .as_deref()
                .ok_or_else(|| CliError::BadInput("--initial custom requires --populations gg,ee,ff".into()))?;
            let pops = parse_list(pops, 3, "--populations")?;
            let coh = match args.coherence.as_deref() {
                Some(c) => parse_list(c, 2, "--coherence")?,
                None => vec![0.0, 0.0],
            };
            State3 {
                rho_ef: Complex64::new(coh[0], coh[1]),
                ..State3::diagonal(pops[0], pops[1], pops[2])
            }
        }
    };
    if (state.trace() - 1.0).abs() > 1e-12 {
        return Err(CliError::BadInput(format!("initial state has trace {}, expected 1", state.trace())));
    }
    if state.min_eigenvalue() < -1e-12 {
        return Err(CliError::BadInput(format!(
            "initial state is not positive semidefinite (min eigenvalue {})",
            state.min_eigenvalue()
        )));
    }
    Ok(state)
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut body = csv_line(TRAJECTORY_HEADER);
    for (t, s) in traj.times.iter().zip(traj.states.iter()) {
        body.push_str(&numeric_line(&[
            *t,
            s.rho_gg,
            s.rho_ee,
            s.rho_ff,
            s.rho_ef.re,
            s.rho_ef.im,
            s.rho_ge.norm(),
            s.rho_gf.norm(),
        ]));
    }
    body
}

pub fn cmd_dynamics(r: &Resolved, args: &DynamicsArgs) -> CliResult<Outcome> {
    let d = r.params.derive()?;
    let eom = EquationsOfMotion::new(&d);
    let initial = initial_state(args)?;
    let t_final = args.t_final.unwrap_or(200.0 / r.params.gamma);
    eom.check_step(args.dt)?;
    if args.sample_every == 0 {
        return Err(CliError::BadInput("--sample-every must be >= 1".into()));
    }
    match evolve_sampled(&initial, &eom, t_final, args.dt, args.sample_every) {
        Ok(traj) => Ok(Outcome::ok(trajectory_csv(&traj))),
        Err(failure) => match failure.error {
            cavity_ness::Error::InvalidParameter { .. } => Err(failure.error.into()),
            _ => Ok(Outcome {
                body: trajectory_csv(&failure.partial),
                failure: Some(CliError::Validation(failure.to_string())),
                warnings: Vec::new(),
            }),
        },
    }
}

#[derive(Debug, Serialize)]
pub struct ValidateReport {
    pub grid_points: usize,
    pub gamma: f64,
    pub t_a: f64,
    pub checks_passed: usize,
    pub checks_failed: usize,
    /// Largest residual among the identity checks.
    pub worst_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fock_n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fock_t_b: Option<f64>,
    /// Population outside the vacuum and single-excitation states.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fock_leakage: Option<f64>,
    /// Largest element difference between the renormalised projected state and
    /// the three-level steady state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fock_projected_difference: Option<f64>,
    pub checks: Vec<Check>,
}

fn linspace(min: f64, max: f64, count: usize) -> Vec<f64> {
    let n = count - 1;
    (0..count)
        .map(|i| if i == n { max } else { min + (max - min) * i as f64 / n as f64 })
        .collect()
}

struct PointOutcome {
    residuals: PointResiduals,
    sign_violation: bool,
}

pub fn validate_report(r: &Resolved, args: &ValidateArgs) -> CliResult<ValidateReport> {
    if args.grid_lambda < 2 || args.grid_dt < 2 {
        return Err(CliError::BadInput("validation grid needs at least 2 points per axis".into()));
    }
    let base = r.params;
    let mut grid = Vec::with_capacity(args.grid_lambda * args.grid_dt);
    for &lambda in &linspace(LAMBDA_MIN, LAMBDA_MAX, args.grid_lambda) {
        for &dt in &linspace(0.0, DELTA_T_MAX, args.grid_dt) {
            grid.push((SystemParams::new(base.omega, lambda, base.gamma, base.t_a, base.t_a + dt)?, dt));
        }
    }
    let qfi = r.qfi;
    let corrupt = args.corrupt_generator;
    let outcomes: Vec<CliResult<PointOutcome>> = in_pool(r.threads, || {
        grid.par_iter()
            .map(|(p, dt)| {
                let d = p.derive()?;
                let ss = steady_analytic(&d);
                let (rec, _) = evaluate_lenient(p, &qfi);
                let signs = [rec.j_b, -rec.j_a, rec.j_b_p, -rec.j_a_p, rec.j_a_c, -rec.j_b_c, rec.epr];
                Ok(PointOutcome {
                    residuals: point_residuals(&d, &ss, &rec, corrupt),
                    sign_violation: *dt >= SIGN_THRESHOLD && !signs.iter().all(|&x| x > 0.0),
                })
            })
            .collect()
    })?;
    let outcomes = outcomes.into_iter().collect::<CliResult<Vec<_>>>()?;
    let worst = outcomes
        .iter()
        .map(|o| o.residuals)
        .reduce(PointResiduals::worst)
        .expect("grid is non-empty");
    let violations = outcomes.iter().filter(|o| o.sign_violation).count();

    let mut checks = worst.checks();
    checks.push(Check {
        name: "sign_structure".into(),
        pass: violations == 0,
        residual: violations as f64,
    });

    // Equal temperatures: Boltzmann ratios and no coherence.
    let mut ratio_err: f64 = 0.0;
    let mut coherence: f64 = 0.0;
    for &lambda in &linspace(LAMBDA_MIN, LAMBDA_MAX, args.grid_lambda) {
        let p = SystemParams::new(base.omega, lambda, base.gamma, base.t_a, base.t_a)?;
        let d = p.derive()?;
        let ss = steady_analytic(&d);
        let rel = |got: f64, want: f64| ((got - want) / want).abs();
        ratio_err = ratio_err
            .max(rel(ss.populations[1] / ss.populations[0], (-d.omega_upper / p.t_a).exp()))
            .max(rel(ss.populations[2] / ss.populations[0], (-d.omega_lower / p.t_a).exp()));
        coherence = coherence.max(ss.coherence.norm());
    }
    checks.push(Check::within("gibbs_ratios", ratio_err, 1e-10));
    checks.push(Check::within("gibbs_coherence", coherence, 1e-14));
    let worst_residual = checks
        .iter()
        .filter(|c| c.name != "sign_structure")
        .map(|c| c.residual)
        .fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) });

    let mut report = ValidateReport {
        grid_points: grid.len(),
        gamma: base.gamma,
        t_a: base.t_a,
        checks_passed: 0,
        checks_failed: 0,
        worst_residual,
        fock_n_max: None,
        fock_t_b: None,
        fock_leakage: None,
        fock_projected_difference: None,
        checks,
    };

    if args.fock {
        let p = SystemParams::new(base.omega, base.lambda, base.gamma, base.t_a, args.fock_tb)?;
        let (leakage, difference) = fock_comparison(&p, args.nmax)?;
        report.fock_n_max = Some(args.nmax);
        report.fock_t_b = Some(args.fock_tb);
        report.fock_leakage = Some(leakage);
        report.fock_projected_difference = Some(difference);
        report.checks.push(Check {
            name: "fock_single_excitation".into(),
            pass: difference <= 5.0 * leakage,
            residual: difference,
        });
    }
    report.checks_passed = report.checks.iter().filter(|c| c.pass).count();
    report.checks_failed = report.checks.len() - report.checks_passed;
    Ok(report)
}

/// Leakage out of the single-excitation subspace and the largest element
/// difference between the renormalised projection and the three-level state.
pub fn fock_comparison(p: &SystemParams, n_max: usize) -> CliResult<(f64, f64)> {
    let d = p.derive()?;
    let fock = build_fock_generator(&d, n_max)?;
    let rho = fock.steady_state()?;
    let leakage = fock.leakage(&rho);
    let block = fock.single_excitation_block(&rho);
    let projected = block / block.trace();
    let three = steady_analytic(&d).matrix();
    let difference = (projected - three).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok((leakage, difference))
}

pub fn cmd_validate(r: &Resolved, args: &ValidateArgs) -> CliResult<Outcome> {
    let report = validate_report(r, args)?;
    Ok(Outcome {
        failure: failed_checks(&report.checks),
        body: to_json(&report)?,
        warnings: Vec::new(),
    })
}
