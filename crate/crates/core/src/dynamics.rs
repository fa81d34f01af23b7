//! Time evolution of the single-excitation density matrix.
//!
//! The state is integrated with classical fixed-step RK4 in its real
//! representation (ρ_gg, ρ_ee, ρ_ff, Re/Im ρ_ef, Re/Im ρ_ge, Re/Im ρ_gf).
//! Time is in units of 1/ω.

use nalgebra::SVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::liouvillian::{build_block_generator, BlockGenerator, State3};
use crate::model::DerivedParams;

pub const DEFAULT_DT: f64 = 0.01;

type Real9 = SVector<f64, 9>;

/// Element-wise equations of motion: the coupled populations/ρ_ef block plus
/// the two ground-state coherences, which evolve on their own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquationsOfMotion {
    pub block: BlockGenerator,
    /// Diagonal rates of ρ_ge and ρ_gf.
    pub ground_rates: [Complex64; 2],
    /// Coupling of ρ_ge to ρ_gf and of ρ_gf to ρ_ge.
    pub ground_cross: [f64; 2],
    /// Upper limit on the RK4 step.
    pub max_dt: f64,
}

impl EquationsOfMotion {
    pub fn new(d: &DerivedParams) -> Self {
        let g = d.gamma;
        let (pu, pl) = (d.n_plus.upper, d.n_plus.lower);
        EquationsOfMotion {
            block: build_block_generator(d),
            ground_rates: [
                Complex64::new(-g * (2.0 * pu + pl + 1.0), d.omega_upper),
                Complex64::new(-g * (2.0 * pl + pu + 1.0), d.omega_lower),
            ],
            ground_cross: [-g * d.n_minus.lower, -g * d.n_minus.upper],
            max_dt: 0.1 / (g * d.coherence_damping()).max(d.omega_upper),
        }
    }

    /// dρ/dt, returned in the same container as the state.
    pub fn derivative(&self, s: &State3) -> State3 {
        let x = SVector::<f64, 5>::new(s.rho_gg, s.rho_ee, s.rho_ff, s.rho_ef.re, s.rho_ef.im);
        let dx = self.block.apply(&x);
        State3 {
            rho_gg: dx[0],
            rho_ee: dx[1],
            rho_ff: dx[2],
            rho_ef: Complex64::new(dx[3], dx[4]),
            rho_ge: self.ground_rates[0] * s.rho_ge + self.ground_cross[0] * s.rho_gf,
            rho_gf: self.ground_rates[1] * s.rho_gf + self.ground_cross[1] * s.rho_ge,
        }
    }

    fn rate(&self, x: &Real9) -> Real9 {
        self.derivative(&State3::from_real_vector(x)).to_real_vector()
    }

    fn rk4_step(&self, x: &Real9, h: f64) -> Real9 {
        let k1 = self.rate(x);
        let k2 = self.rate(&(x + k1 * (h / 2.0)));
        let k3 = self.rate(&(x + k2 * (h / 2.0)));
        let k4 = self.rate(&(x + k3 * h));
        x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    }

    pub fn check_step(&self, dt: f64) -> Result<()> {
        if dt.is_finite() && dt > 0.0 && dt <= self.max_dt {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name: "dt",
                value: dt,
                constraint: "time step must satisfy 0 < dt <= 0.1 / max(gamma * S, omega_upper)",
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State3>,
    pub step: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&State3> {
        self.states.last()
    }

    pub fn trace_drift(&self) -> f64 {
        self.states.iter().map(|s| (s.trace() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.states.iter().map(State3::min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    /// Whether the distance to `target` never grows by more than `tol` between
    /// consecutive points of the last fifth of the trajectory.
    pub fn tail_is_monotone(&self, target: &State3, tol: f64) -> bool {
        let start = self.len() - self.len() / 5;
        let dist: Vec<f64> = self.states[start.saturating_sub(1)..]
            .iter()
            .map(|s| distance(s, target))
            .collect();
        dist.windows(2).all(|w| w[1] <= w[0] + tol)
    }
}

/// Max over population differences and coherence moduli.
pub fn distance(a: &State3, b: &State3) -> f64 {
    [
        (a.rho_gg - b.rho_gg).abs(),
        (a.rho_ee - b.rho_ee).abs(),
        (a.rho_ff - b.rho_ff).abs(),
        (a.rho_ef - b.rho_ef).norm(),
        (a.rho_ge - b.rho_ge).norm(),
        (a.rho_gf - b.rho_gf).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Integration stopped on a non-finite state; the points computed so far are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationFailure {
    pub error: Error,
    pub partial: Trajectory,
}

impl From<IntegrationFailure> for Error {
    fn from(f: IntegrationFailure) -> Error {
        f.error
    }
}

impl std::fmt::Display for IntegrationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} points computed)", self.error, self.partial.len())
    }
}

impl std::error::Error for IntegrationFailure {}

/// Integrates from t = 0 to `t_final`, keeping every `sample_every`-th step
/// and always the final point. The step is shrunk to t_final / ⌈t_final / dt⌉.
pub fn evolve_sampled(
    initial: &State3,
    eom: &EquationsOfMotion,
    t_final: f64,
    dt: f64,
    sample_every: usize,
) -> std::result::Result<Trajectory, IntegrationFailure> {
    let reject = |error| IntegrationFailure {
        error,
        partial: Trajectory::default(),
    };
    eom.check_step(dt).map_err(reject)?;
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(reject(Error::InvalidParameter {
            name: "t_final",
            value: t_final,
            constraint: "final time must be finite and >= 0",
        }));
    }
    let steps = (t_final / dt).ceil() as usize;
    let h = if steps == 0 { dt } else { t_final / steps as f64 };
    let every = sample_every.max(1);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![*initial],
        step: h,
    };
    let mut x = initial.to_real_vector();
    for k in 1..=steps {
        x = eom.rk4_step(&x, h);
        let t = k as f64 * h;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(IntegrationFailure {
                error: Error::Integration { time: t },
                partial: traj,
            });
        }
        if k % every == 0 || k == steps {
            traj.times.push(t);
            traj.states.push(State3::from_real_vector(&x));
        }
    }
    Ok(traj)
}

pub fn evolve(
    initial: &State3,
    eom: &EquationsOfMotion,
    t_final: f64,
    dt: f64,
) -> std::result::Result<Trajectory, IntegrationFailure> {
    evolve_sampled(initial, eom, t_final, dt, 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relaxation {
    pub state: State3,
    pub time: f64,
    /// Max-norm of dρ/dt at the returned state.
    pub rate: f64,
    pub converged: bool,
}

/// Integrates until the max-norm of dρ/dt drops below `tol` or `t_max` is
/// reached. `tol = 0` always runs to `t_max`.
pub fn relax_to_steady(initial: &State3, eom: &EquationsOfMotion, tol: f64, t_max: f64, dt: f64) -> Result<Relaxation> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: tol,
            constraint: "tolerance must be finite and >= 0",
        });
    }
    if !(t_max.is_finite() && t_max >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "t_max",
            value: t_max,
            constraint: "maximum time must be finite and >= 0",
        });
    }
    eom.check_step(dt)?;
    let steps = (t_max / dt).ceil() as usize;
    let h = if steps == 0 { dt } else { t_max / steps as f64 };
    let mut x = initial.to_real_vector();
    let mut rate = eom.rate(&x).amax();
    let mut k = 0;
    while k < steps && !(rate < tol) {
        x = eom.rk4_step(&x, h);
        k += 1;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration { time: k as f64 * h });
        }
        rate = eom.rate(&x).amax();
    }
    Ok(Relaxation {
        state: State3::from_real_vector(&x),
        time: k as f64 * h,
        rate,
        converged: rate < tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::total_generator;
    use crate::model::SystemParams;
    use crate::steady::steady_analytic;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn derived(lambda: f64, ta: f64, tb: f64) -> DerivedParams {
        SystemParams::new(1.0, lambda, 0.1, ta, tb).unwrap().derive().unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng) -> State3 {
        let a = crate::liouvillian::CMatrix3::from_fn(|_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let rho = a * a.adjoint();
        let tr = rho.trace();
        State3::from_matrix(&(rho / tr))
    }

    #[test]
    fn matches_superoperator_on_random_states() {
        let d = derived(0.2, 0.2, 0.7);
        let eom = EquationsOfMotion::new(&d);
        let l = total_generator(&d);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let s = random_state(&mut rng);
            let expected = State3::from_matrix(&l.apply(&s.to_matrix()));
            assert!(eom.derivative(&s).max_abs_diff(&expected) < 1e-14);
        }
    }

    #[test]
    fn steady_state_is_fixed_point() {
        let d = derived(0.1, 0.2, 0.6);
        let ss = steady_analytic(&d).to_state();
        assert!(EquationsOfMotion::new(&d).derivative(&ss).to_real_vector().amax() < 1e-12);
    }

    #[test]
    fn excited_upper_decay_rate_at_equilibrium() {
        let d = derived(0.1, 0.3, 0.3);
        let rate = EquationsOfMotion::new(&d).derivative(&State3::excited_upper());
        assert!((rate.rho_ee + 2.0 * d.gamma * (d.n_plus.upper + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn derivative_is_trace_free() {
        let eom = EquationsOfMotion::new(&derived(0.3, 0.5, 0.2));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let r = eom.derivative(&random_state(&mut rng));
            assert!((r.rho_gg + r.rho_ee + r.rho_ff).abs() < 1e-15);
        }
    }

    #[test]
    fn step_bound_is_enforced() {
        let eom = EquationsOfMotion::new(&derived(0.1, 0.2, 0.6));
        assert!(eom.check_step(DEFAULT_DT).is_ok());
        let failure = evolve(&State3::ground(), &eom, 1.0, 0.5).unwrap_err();
        assert!(matches!(failure.error, Error::InvalidParameter { name: "dt", .. }));
        assert!(eom.check_step(0.0).is_err());
    }

    #[test]
    fn steady_initial_state_stays_put() {
        let d = derived(0.1, 0.2, 0.6);
        let ss = steady_analytic(&d).to_state();
        let traj = evolve(&ss, &EquationsOfMotion::new(&d), 50.0, 0.05).unwrap();
        for s in &traj.states {
            assert!(s.max_abs_diff(&ss) < 1e-11);
        }
    }

    #[test]
    fn ground_coherence_decays() {
        let d = derived(0.1, 0.2, 0.6);
        let mut s = State3::maximally_mixed();
        s.rho_ge = Complex64::new(0.3, 0.0);
        let traj = evolve_sampled(&s, &EquationsOfMotion::new(&d), 20.0 / d.gamma, 0.05, 100).unwrap();
        assert!(traj.last().unwrap().rho_ge.norm() < 1e-8);
    }

    #[test]
    fn ground_coherences_do_not_feed_populations() {
        let d = derived(0.2, 0.2, 0.8);
        let eom = EquationsOfMotion::new(&d);
        let base = State3::maximally_mixed();
        let mut kicked = base;
        kicked.rho_ge = Complex64::new(0.2, -0.1);
        kicked.rho_gf = Complex64::new(-0.05, 0.15);
        let a = evolve(&base, &eom, 30.0, 0.05).unwrap();
        let b = evolve(&kicked, &eom, 30.0, 0.05).unwrap();
        for (x, y) in a.states.iter().zip(b.states.iter()) {
            for k in 0..3 {
                assert!((x.populations()[k] - y.populations()[k]).abs() < 1e-12);
            }
            assert!((x.rho_ef - y.rho_ef).norm() < 1e-12);
        }
    }

    #[test]
    fn rk4_convergence_order() {
        let d = derived(0.3, 0.2, 0.8);
        let eom = EquationsOfMotion::new(&d);
        let s = State3 {
            rho_ef: Complex64::new(0.1, 0.05),
            rho_ge: Complex64::new(0.0, 0.1),
            rho_gf: Complex64::new(-0.08, 0.0),
            ..State3::diagonal(0.4, 0.3, 0.3)
        };
        assert!(s.min_eigenvalue() > 0.0);
        let run = |dt: f64| evolve(&s, &eom, 10.0, dt).unwrap().last().unwrap().to_real_vector();
        let h = eom.max_dt;
        let (x1, x2, x3) = (run(h), run(h / 2.0), run(h / 4.0));
        let order = ((x1 - x2).amax() / (x2 - x3).amax()).log2();
        assert!(order >= 3.5, "measured order {order}");
    }

    #[test]
    fn random_initial_states_relax_to_analytic_steady_state() {
        let d = derived(0.1, 0.2, 0.6);
        let eom = EquationsOfMotion::new(&d);
        let target = steady_analytic(&d).to_state();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let traj = evolve_sampled(&random_state(&mut rng), &eom, 100.0 / d.gamma, 0.05, 50).unwrap();
            assert!(distance(traj.last().unwrap(), &target) < 1e-8);
            assert!(traj.trace_drift() < 1e-9);
            assert!(traj.min_eigenvalue() > -1e-8);
            assert!(traj.tail_is_monotone(&target, 1e-12));
        }
    }

    #[test]
    fn relaxation_reaches_gibbs_state() {
        let d = derived(0.1, 0.2, 0.2);
        let eom = EquationsOfMotion::new(&d);
        let gibbs = steady_analytic(&d).to_state();
        let r = relax_to_steady(&State3::maximally_mixed(), &eom, 1e-10, 2000.0, 0.05).unwrap();
        assert!(r.converged && r.rate < 1e-10);
        let r = relax_to_steady(&State3::maximally_mixed(), &eom, 1e-12, 2000.0, 0.05).unwrap();
        assert!(r.converged);
        assert!(distance(&r.state, &gibbs) < 1e-10);
    }

    #[test]
    fn zero_tolerance_runs_to_t_max() {
        let eom = EquationsOfMotion::new(&derived(0.1, 0.2, 0.6));
        let r = relax_to_steady(&State3::ground(), &eom, 0.0, 3.0, 0.05).unwrap();
        assert!(!r.converged);
        assert!((r.time - 3.0).abs() < 1e-12);
        assert!(relax_to_steady(&State3::ground(), &eom, -1.0, 3.0, 0.05).is_err());
    }

    #[test]
    fn non_finite_state_reports_time() {
        let eom = EquationsOfMotion::new(&derived(0.1, 0.2, 0.6));
        let mut s = State3::ground();
        s.rho_ee = f64::NAN;
        let failure = evolve(&s, &eom, 1.0, 0.05).unwrap_err();
        assert!(matches!(failure.error, Error::Integration { time } if time > 0.0));
        assert_eq!(failure.partial.len(), 1);
    }
}
