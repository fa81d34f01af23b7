//! Figures of merit of the steady state: coherence, quantum Fisher information
//! with respect to the inter-cavity coupling, curl flux, heat currents and the
//! entropy production rate.

use nalgebra::Matrix3;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::liouvillian::{
    build_reservoir_dissipator, split_dissipator, system_hamiltonian, CMatrix3, Superoperator3,
    E, F, G,
};
use crate::model::{DerivedParams, Reservoir, SystemParams};
use crate::steady::{steady_analytic, transfer_generator_a, SteadyState, TransferGenerator};

/// Eigenvalues below this are treated as zero in the Fisher information sums.
pub const ZERO_EIGENVALUE: f64 = 1e-12;
const PHASE_CUTOFF: f64 = 1e-14;
const DEGENERATE_BLOCK: f64 = 1e-14;
const FLUX_AGREEMENT: f64 = 1e-12;
const HEAT_AGREEMENT: f64 = 1e-12;
pub const DEFAULT_QFI_STEP: f64 = 1e-6;

/// Eigen-decomposition of a steady state. |g⟩ is an eigenvector on its own;
/// the {e, f} block is parametrised by a mixing angle and the coherence phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDecomp {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    /// In [0, π].
    pub alpha: f64,
    /// In (−π, π]; zero when the coherence vanishes.
    pub phi: f64,
}

impl SpectralDecomp {
    pub fn eigenvalues(&self) -> [f64; 3] {
        [self.p1, self.p2, self.p3]
    }

    /// Eigenvectors as columns, in the order p1, p2, p3.
    pub fn eigenvectors(&self) -> CMatrix3 {
        let (s, c) = (self.alpha / 2.0).sin_cos();
        let phase = Complex64::from_polar(1.0, self.phi);
        let mut v = CMatrix3::zeros();
        v[(G, 0)] = Complex64::new(1.0, 0.0);
        v[(E, 1)] = Complex64::new(c, 0.0);
        v[(F, 1)] = phase.conj() * s;
        v[(E, 2)] = -phase * s;
        v[(F, 2)] = Complex64::new(c, 0.0);
        v
    }
}

pub fn spectral_decomposition(ss: &SteadyState) -> SpectralDecomp {
    let [gg, ee, ff] = ss.populations;
    let magnitude = ss.coherence.norm();
    let half_gap = (ee - ff) / 2.0;
    let radius = half_gap.hypot(magnitude);
    let mean = (ee + ff) / 2.0;
    SpectralDecomp {
        p1: gg,
        p2: mean + radius,
        p3: mean - radius,
        alpha: (2.0 * magnitude).atan2(ee - ff),
        phi: if magnitude < PHASE_CUTOFF { 0.0 } else { ss.coherence.arg() },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfiOptions {
    pub step: f64,
    /// Combine steps h and h/2 to cancel the O(h²) error of the derivatives.
    pub richardson: bool,
}

impl Default for QfiOptions {
    fn default() -> Self {
        QfiOptions {
            step: DEFAULT_QFI_STEP,
            richardson: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfiResult {
    pub total: f64,
    /// Σ (∂p)²/p over non-zero eigenvalues.
    pub classical: f64,
    /// Contribution of the eigenvector rotation, carried by the coherence.
    pub coherent: f64,
    /// The {e, f} block has vanishing weight, so only the classical part is kept.
    pub degenerate: bool,
    /// An eigenvalue crossing inside the stencil survived one step reduction.
    pub crossing: bool,
}

/// Shift `x` by a multiple of 2π to land closest to `reference`.
fn unwrap_near(x: f64, reference: f64) -> f64 {
    x - 2.0 * PI * ((x - reference) / (2.0 * PI)).round()
}

fn spectral_at(p: &SystemParams, lambda: f64) -> Result<SpectralDecomp> {
    Ok(spectral_decomposition(&steady_analytic(&p.with_lambda(lambda).derive()?)))
}

/// Central differences of (p1, p2, p3, α, φ) with respect to λ.
fn spectral_derivatives(p: &SystemParams, centre: &SpectralDecomp, h: f64) -> Result<[f64; 5]> {
    let minus = spectral_at(p, p.lambda - h)?;
    let plus = spectral_at(p, p.lambda + h)?;
    let phi_minus = unwrap_near(minus.phi, centre.phi);
    let phi_plus = unwrap_near(plus.phi, centre.phi);
    let d = |a: f64, b: f64| (b - a) / (2.0 * h);
    Ok([
        d(minus.p1, plus.p1),
        d(minus.p2, plus.p2),
        d(minus.p3, plus.p3),
        d(minus.alpha, plus.alpha),
        d(phi_minus, phi_plus),
    ])
}

/// Fisher information of the steady state with respect to λ, from the
/// closed-form spectrum and finite differences in λ.
pub fn qfi_lambda(p: &SystemParams, options: &QfiOptions) -> Result<QfiResult> {
    p.validate()?;
    let h = options.step;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter {
            name: "qfi_step",
            value: h,
            constraint: "finite-difference step must be finite and > 0",
        });
    }
    if p.lambda - h <= 0.0 || p.lambda + h >= p.omega {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: p.lambda,
            constraint: "lambda ± qfi_step must stay inside (0, omega)",
        });
    }
    let centre = spectral_at(p, p.lambda)?;
    let mut deriv = spectral_derivatives(p, &centre, h)?;
    if options.richardson {
        let half = spectral_derivatives(p, &centre, h / 2.0)?;
        for k in 0..5 {
            deriv[k] = (4.0 * half[k] - deriv[k]) / 3.0;
        }
    }
    let classical: f64 = centre
        .eigenvalues()
        .iter()
        .zip(deriv.iter())
        .filter(|(&pi, _)| pi >= ZERO_EIGENVALUE)
        .map(|(pi, dp)| dp * dp / pi)
        .sum();
    let block = centre.p2 + centre.p3;
    if block < DEGENERATE_BLOCK {
        return Ok(QfiResult {
            total: classical,
            classical,
            coherent: 0.0,
            degenerate: true,
            crossing: false,
        });
    }
    let gap = centre.p2 - centre.p3;
    let sin_alpha = centre.alpha.sin();
    let coherent = gap * gap / block * (deriv[3].powi(2) + (deriv[4] * sin_alpha).powi(2));
    Ok(QfiResult {
        total: classical + coherent,
        classical,
        coherent,
        degenerate: false,
        crossing: false,
    })
}

/// Eigenvalues and eigenvectors (as columns) of a density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub values: [f64; 3],
    pub vectors: CMatrix3,
}

impl Spectrum {
    /// Numerical decomposition, eigenvalues in descending order.
    pub fn of(rho: &CMatrix3) -> Spectrum {
        let hermitian = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = hermitian.symmetric_eigen();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        Spectrum {
            values: order.map(|k| eig.eigenvalues[k]),
            vectors: CMatrix3::from_columns(&order.map(|k| eig.eigenvectors.column(k).into_owned())),
        }
    }

    /// Multiplies each eigenvector by the phase that makes component
    /// `index[i]` of vector i real and non-negative.
    fn fix_gauge(&mut self, index: &[usize; 3]) {
        for (i, &k) in index.iter().enumerate() {
            let z = self.vectors[(k, i)];
            if z.norm() > 0.0 {
                let phase = z.conj() / z.norm();
                let mut col = self.vectors.column_mut(i);
                col *= phase;
            }
        }
    }
}

/// Evaluates the general Fisher information formula from the spectra of ρ at
/// θ₀ and θ₀ ± step. The eigenvector phases are used exactly as supplied.
pub fn qfi_from_spectra(centre: &Spectrum, minus: &Spectrum, plus: &Spectrum, step: f64) -> QfiResult {
    let support: Vec<usize> = (0..3).filter(|&i| centre.values[i] >= ZERO_EIGENVALUE).collect();
    let dvec = (plus.vectors - minus.vectors) / Complex64::new(2.0 * step, 0.0);
    let mut classical = 0.0;
    let mut coherent = 0.0;
    for &i in &support {
        let p = centre.values[i];
        let dp = (plus.values[i] - minus.values[i]) / (2.0 * step);
        classical += dp * dp / p;
        coherent += 4.0 * p * dvec.column(i).norm_squared();
        for &j in &support {
            let q = centre.values[j];
            let overlap = centre.vectors.column(i).dotc(&dvec.column(j));
            coherent -= 8.0 * p * q / (p + q) * overlap.norm_sqr();
        }
    }
    QfiResult {
        total: classical + coherent,
        classical,
        coherent,
        degenerate: false,
        crossing: false,
    }
}

fn stencil_has_crossing(centre: &Spectrum, side: &Spectrum) -> bool {
    (0..3).any(|i| centre.vectors.column(i).dotc(&side.vectors.column(i)).norm() < 0.9)
}

/// Fisher information of a parametrised family of density matrices from
/// numerical eigendecompositions at θ₀ and θ₀ ± step.
pub fn qfi_general<S>(sampler: S, theta0: f64, step: f64) -> Result<QfiResult>
where
    S: Fn(f64) -> Result<CMatrix3>,
{
    let centre = Spectrum::of(&sampler(theta0)?);
    let gauge: [usize; 3] = std::array::from_fn(|i| centre.vectors.column(i).icamax());
    let mut centre_fixed = centre;
    centre_fixed.fix_gauge(&gauge);

    let mut h = step;
    for attempt in 0..2 {
        let mut minus = Spectrum::of(&sampler(theta0 - h)?);
        let mut plus = Spectrum::of(&sampler(theta0 + h)?);
        minus.fix_gauge(&gauge);
        plus.fix_gauge(&gauge);
        let crossing = stencil_has_crossing(&centre_fixed, &minus) || stencil_has_crossing(&centre_fixed, &plus);
        if !crossing || attempt == 1 {
            let mut result = qfi_from_spectra(&centre_fixed, &minus, &plus, h);
            result.crossing = crossing;
            return Ok(result);
        }
        h /= 10.0;
    }
    unreachable!("the second attempt always returns")
}

/// ρ_ss as a function of λ, for [`qfi_general`].
pub fn steady_matrix_sampler(p: SystemParams) -> impl Fn(f64) -> Result<CMatrix3> {
    move |lambda| Ok(steady_analytic(&p.with_lambda(lambda).derive()?).matrix())
}

/// Circulating probability flux, evaluated on all three edges of the
/// g → e → f → g cycle, which must agree.
pub fn curl_flux(a: &TransferGenerator, pops: &[f64; 3]) -> Result<f64> {
    let edges = curl_flux_edges(a, pops);
    Error::check("curl flux edge equivalence", edge_spread(&edges), FLUX_AGREEMENT)?;
    Ok(edges[0])
}

/// Net flux along e → g, g → f and f → e.
pub fn curl_flux_edges(a: &TransferGenerator, pops: &[f64; 3]) -> [f64; 3] {
    let edge = |from: usize, to: usize| a.entry(to, from) * pops[from] - a.entry(from, to) * pops[to];
    [edge(E, G), edge(G, F), edge(F, E)]
}

pub fn edge_spread(edges: &[f64; 3]) -> f64 {
    (edges[0] - edges[1]).abs().max((edges[0] - edges[2]).abs())
}

/// Curl flux written directly in terms of the occupation differences.
pub fn curl_flux_closed_form(d: &DerivedParams, pops: &[f64; 3]) -> f64 {
    2.0 * d.gamma * d.r_factor * (d.n_minus.lower.powi(2) * pops[F] - d.n_minus.upper.powi(2) * pops[E])
}

/// T = S + J·C, where T_mn is the probability flux from m to n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferDecomposition {
    pub transfer: Matrix3<f64>,
    /// Symmetric part, the detailed-balance landscape.
    pub landscape: Matrix3<f64>,
    pub curl: f64,
}

impl TransferDecomposition {
    /// Ones on the edges e → g, g → f, f → e.
    pub fn cycle() -> Matrix3<f64> {
        let mut c = Matrix3::zeros();
        c[(E, G)] = 1.0;
        c[(G, F)] = 1.0;
        c[(F, E)] = 1.0;
        c
    }

    pub fn reconstruction_error(&self) -> f64 {
        (self.transfer - self.landscape - Self::cycle() * self.curl).amax()
    }
}

pub fn decompose_transfer(a: &TransferGenerator, pops: &[f64; 3]) -> Result<TransferDecomposition> {
    let curl = curl_flux(a, pops)?;
    let transfer = Matrix3::from_fn(|m, n| if m == n { 0.0 } else { a.entry(n, m) * pops[m] });
    let landscape = transfer - TransferDecomposition::cycle() * curl;
    Ok(TransferDecomposition {
        transfer,
        landscape,
        curl,
    })
}

/// Tr{L[ρ] H_s}.
fn energy_rate(l: &Superoperator3, rho: &CMatrix3, h: &CMatrix3) -> f64 {
    (l.apply(rho) * h).trace().re
}

fn heat_split_closed_form(which: Reservoir, ss: &SteadyState, d: &DerivedParams) -> (f64, f64) {
    let n = d.bath(which);
    let g = d.gamma;
    let (wu, wl) = (d.omega_upper, d.omega_lower);
    let [gg, ee, ff] = ss.populations;
    let u = ss.coherence.re;
    let population = g * wu * (n.upper * gg - (n.upper + 1.0) * ee) + g * wl * (n.lower * gg - (n.lower + 1.0) * ff);
    let coherence = -which.cross_sign() * g * (wu * (n.lower + 1.0) + wl * (n.upper + 1.0)) * u;
    (population, coherence)
}

/// Heat current from reservoir `which` into the system.
pub fn heat_current(which: Reservoir, ss: &SteadyState, d: &DerivedParams) -> Result<f64> {
    let (p, c) = heat_split_closed_form(which, ss, d);
    let closed = p + c;
    let traced = energy_rate(&build_reservoir_dissipator(d, which), &ss.matrix(), &system_hamiltonian(d));
    Error::check("heat current closed vs trace form", (closed - traced).abs(), HEAT_AGREEMENT)?;
    Ok(closed)
}

/// Parts of the heat current that maintain the populations and the coherence.
pub fn heat_current_split(which: Reservoir, ss: &SteadyState, d: &DerivedParams) -> Result<(f64, f64)> {
    let (p, c) = heat_split_closed_form(which, ss, d);
    let (pop_part, coh_part) = split_dissipator(d, which);
    let rho = ss.matrix();
    let h = system_hamiltonian(d);
    let residual = (p - energy_rate(&pop_part, &rho, &h))
        .abs()
        .max((c - energy_rate(&coh_part, &rho, &h)).abs());
    Error::check("heat current split closed vs trace form", residual, HEAT_AGREEMENT)?;
    Ok((p, c))
}

/// Largest difference between closed and trace forms over both reservoirs,
/// for the total current and both of its parts.
pub fn heat_trace_residual(ss: &SteadyState, d: &DerivedParams) -> f64 {
    let rho = ss.matrix();
    let h = system_hamiltonian(d);
    let mut worst: f64 = 0.0;
    for which in Reservoir::BOTH {
        let (p, c) = heat_split_closed_form(which, ss, d);
        let (pop_part, coh_part) = split_dissipator(d, which);
        let total = energy_rate(&build_reservoir_dissipator(d, which), &rho, &h);
        worst = worst
            .max((p + c - total).abs())
            .max((p - energy_rate(&pop_part, &rho, &h)).abs())
            .max((c - energy_rate(&coh_part, &rho, &h)).abs());
    }
    worst
}

pub fn entropy_production_rate(j_a: f64, j_b: f64, t_a: f64, t_b: f64) -> f64 {
    -(j_a / t_a + j_b / t_b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservablesRecord {
    pub coherence_abs: f64,
    pub qfi: f64,
    pub j_curl: f64,
    pub j_a: f64,
    pub j_b: f64,
    pub j_a_p: f64,
    pub j_b_p: f64,
    pub j_a_c: f64,
    pub j_b_c: f64,
    pub epr: f64,
}

impl ObservablesRecord {
    pub const FIELDS: [&'static str; 10] = [
        "coherence_abs",
        "qfi",
        "j_curl",
        "j_a",
        "j_b",
        "j_a_p",
        "j_b_p",
        "j_a_c",
        "j_b_c",
        "epr",
    ];

    pub fn nan() -> Self {
        Self::from_values([f64::NAN; 10])
    }

    pub fn values(&self) -> [f64; 10] {
        [
            self.coherence_abs,
            self.qfi,
            self.j_curl,
            self.j_a,
            self.j_b,
            self.j_a_p,
            self.j_b_p,
            self.j_a_c,
            self.j_b_c,
            self.epr,
        ]
    }

    pub fn from_values(v: [f64; 10]) -> Self {
        ObservablesRecord {
            coherence_abs: v[0],
            qfi: v[1],
            j_curl: v[2],
            j_a: v[3],
            j_b: v[4],
            j_a_p: v[5],
            j_b_p: v[6],
            j_a_c: v[7],
            j_b_c: v[8],
            epr: v[9],
        }
    }
}

/// Worst deviations of the identities that tie the observables together.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    /// |J_a + J_b|.
    pub heat_balance: f64,
    /// max_i |J_i − J_i^(p) − J_i^(c)|.
    pub heat_split: f64,
    /// |curl flux on an edge − closed form|.
    pub curl_closed_form: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub params: SystemParams,
    pub steady: SteadyState,
    pub qfi: QfiResult,
    pub record: ObservablesRecord,
    pub residuals: Residuals,
}

fn heat_block(ss: &SteadyState, d: &DerivedParams, p: &SystemParams) -> Result<([f64; 7], f64, f64)> {
    let j_a = heat_current(Reservoir::A, ss, d)?;
    let j_b = heat_current(Reservoir::B, ss, d)?;
    let (j_a_p, j_a_c) = heat_current_split(Reservoir::A, ss, d)?;
    let (j_b_p, j_b_c) = heat_current_split(Reservoir::B, ss, d)?;
    let balance = (j_a + j_b).abs();
    let split = (j_a - j_a_p - j_a_c).abs().max((j_b - j_b_p - j_b_c).abs());
    Error::check("heat current balance", balance, HEAT_AGREEMENT)?;
    Error::check("heat current split sum", split, HEAT_AGREEMENT)?;
    let epr = entropy_production_rate(j_a, j_b, p.t_a, p.t_b);
    Ok(([j_a, j_b, j_a_p, j_b_p, j_a_c, j_b_c, epr], balance, split))
}

fn curl_block(ss: &SteadyState, d: &DerivedParams) -> Result<(f64, f64)> {
    let a = transfer_generator_a(d)?;
    let curl = curl_flux(&a, &ss.populations)?;
    let residual = (curl - curl_flux_closed_form(d, &ss.populations)).abs();
    Error::check("curl flux closed form", residual, FLUX_AGREEMENT)?;
    Ok((curl, residual))
}

/// Every observable at one parameter point, failing on the first broken
/// consistency check.
pub fn evaluate(p: &SystemParams, options: &QfiOptions) -> Result<Evaluation> {
    let d = p.derive()?;
    let steady = steady_analytic(&d);
    let qfi = qfi_lambda(p, options)?;
    let (j_curl, curl_residual) = curl_block(&steady, &d)?;
    let ([j_a, j_b, j_a_p, j_b_p, j_a_c, j_b_c, epr], balance, split) = heat_block(&steady, &d, p)?;
    Ok(Evaluation {
        params: *p,
        steady,
        qfi,
        record: ObservablesRecord {
            coherence_abs: steady.coherence.norm(),
            qfi: qfi.total,
            j_curl,
            j_a,
            j_b,
            j_a_p,
            j_b_p,
            j_a_c,
            j_b_c,
            epr,
        },
        residuals: Residuals {
            heat_balance: balance,
            heat_split: split,
            curl_closed_form: curl_residual,
        },
    })
}

/// Like [`evaluate`], but a failing group of observables becomes NaN while
/// the others are still reported. Errors are returned alongside.
pub fn evaluate_lenient(p: &SystemParams, options: &QfiOptions) -> (ObservablesRecord, Vec<Error>) {
    let mut record = ObservablesRecord::nan();
    let mut errors = Vec::new();
    let d = match p.derive() {
        Ok(d) => d,
        Err(e) => return (record, vec![e]),
    };
    let steady = steady_analytic(&d);
    record.coherence_abs = steady.coherence.norm();
    match qfi_lambda(p, options) {
        Ok(q) => record.qfi = q.total,
        Err(e) => errors.push(e),
    }
    match curl_block(&steady, &d) {
        Ok((c, _)) => record.j_curl = c,
        Err(e) => errors.push(e),
    }
    match heat_block(&steady, &d, p) {
        Ok(([j_a, j_b, j_a_p, j_b_p, j_a_c, j_b_c, epr], _, _)) => {
            record = ObservablesRecord {
                j_a,
                j_b,
                j_a_p,
                j_b_p,
                j_a_c,
                j_b_c,
                epr,
                ..record
            };
        }
        Err(e) => errors.push(e),
    }
    (record, errors)
}
