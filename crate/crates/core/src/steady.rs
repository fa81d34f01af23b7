//! Nonequilibrium steady state, computed three independent ways:
//!
//! 1. closed form for the populations, the coherence and the normalisation;
//! 2. cofactors of the population transfer generator A (dimension reduction),
//!    followed by the coherence expressed through the populations;
//! 3. a null-space solve of the 9×9 superoperator assembled from the
//!    per-reservoir dissipators and the commutator.

use nalgebra::{DMatrix, Matrix3, SVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::liouvillian::{
    build_block_generator, unvectorize, CMatrix3, State3, Superoperator3, E, F, G,
};
use crate::model::DerivedParams;

/// Entry-wise relative tolerance between the closed-form A and block elimination.
const TRANSFER_AGREEMENT: f64 = 1e-11;
/// Second-smallest singular value threshold, relative to the largest one.
const RANK_TOLERANCE: f64 = 1e-10;
const ORACLE_RESIDUAL: f64 = 1e-12;

/// Population transfer generator A, indexed as (to, from) over {g, e, f}.
/// Off-diagonal entries are effective rates; every column sums to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferGenerator(pub Matrix3<f64>);

impl TransferGenerator {
    /// Entries written out in terms of N₊, N₋ and R.
    pub fn closed_form(d: &DerivedParams) -> Self {
        let g2 = 2.0 * d.gamma;
        let (pu, pl) = (d.n_plus.upper, d.n_plus.lower);
        let (mu, ml) = (d.n_minus.upper, d.n_minus.lower);
        let r = d.r_factor;
        let s = mu + ml;
        let mut a = Matrix3::zeros();
        a[(G, G)] = g2 * (-(pu + pl) + s * s * r);
        a[(E, E)] = g2 * (-(pu + 1.0) + mu * ml * r);
        a[(F, F)] = g2 * (-(pl + 1.0) + mu * ml * r);
        a[(G, E)] = g2 * ((pu + 1.0) - s * mu * r);
        a[(G, F)] = g2 * ((pl + 1.0) - s * ml * r);
        a[(E, G)] = g2 * (pu - s * ml * r);
        a[(F, G)] = g2 * (pl - s * mu * r);
        a[(E, F)] = g2 * ml * ml * r;
        a[(F, E)] = g2 * mu * mu * r;
        TransferGenerator(a)
    }

    /// M_p − M_pc M_c⁻¹ M_cp from the block generator.
    pub fn from_block_elimination(d: &DerivedParams) -> Result<Self> {
        Ok(TransferGenerator(build_block_generator(d).eliminate_coherence()?))
    }

    pub fn entry(&self, to: usize, from: usize) -> f64 {
        self.0[(to, from)]
    }

    pub fn column_sums(&self) -> [f64; 3] {
        let s = self.0.row_sum();
        [s[0], s[1], s[2]]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        TransferGenerator(self.0 * factor)
    }
}

/// Closed-form A, cross-checked against block elimination.
pub fn transfer_generator_a(d: &DerivedParams) -> Result<TransferGenerator> {
    let closed = TransferGenerator::closed_form(d);
    let eliminated = TransferGenerator::from_block_elimination(d)?;
    let scale = closed.0.amax();
    let worst = closed
        .0
        .iter()
        .zip(eliminated.0.iter())
        .map(|(a, b)| (a - b).abs() / (a.abs() + 1e-4 * scale).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Error::check("transfer generator: closed form vs elimination", worst, TRANSFER_AGREEMENT)?;
    Ok(closed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    /// (ρ_gg, ρ_ee, ρ_ff).
    pub populations: [f64; 3],
    /// ρ_ef; the ground-state coherences vanish at stationarity.
    pub coherence: Complex64,
    /// Sum of the unnormalised population numerators, when known.
    pub normalization: Option<f64>,
}

impl SteadyState {
    pub fn to_state(&self) -> State3 {
        State3 {
            rho_ef: self.coherence,
            ..State3::diagonal(self.populations[0], self.populations[1], self.populations[2])
        }
    }

    pub fn matrix(&self) -> CMatrix3 {
        self.to_state().to_matrix()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.to_state().min_eigenvalue()
    }

    /// Largest difference over the populations and both parts of ρ_ef.
    pub fn max_abs_diff(&self, other: &SteadyState) -> f64 {
        let pops = self
            .populations
            .iter()
            .zip(other.populations.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let dc = self.coherence - other.coherence;
        pops.max(dc.re.abs()).max(dc.im.abs())
    }

    /// Populations clamped to [0, 1], for reporting only.
    pub fn clamped_populations(&self) -> [f64; 3] {
        self.populations.map(|p| p.clamp(0.0, 1.0))
    }

    /// Fails if the state is not a valid density matrix within 1e-10.
    pub fn check_physical(&self) -> Result<()> {
        let trace_err = (self.populations.iter().sum::<f64>() - 1.0).abs();
        Error::check("steady state normalisation", trace_err, 1e-12)?;
        let neg = (-self.min_eigenvalue()).max(0.0);
        Error::check("steady state positivity", neg, 1e-10)
    }
}

/// Closed-form stationary populations, coherence and normalisation.
pub fn steady_analytic(d: &DerivedParams) -> SteadyState {
    let (pu, pl) = (d.n_plus.upper, d.n_plus.lower);
    let (mu, ml) = (d.n_minus.upper, d.n_minus.lower);
    let r = d.r_factor;
    let s = d.coherence_damping();
    let cross = mu * ml * r;
    let gg = (pu + 1.0) * (pl + 1.0) - s * cross;
    let ee = pu * (pl + 1.0) - (s - 1.0) * cross - ml * ml * r;
    let ff = pl * (pu + 1.0) - (s - 1.0) * cross - mu * mu * r;
    let norm = gg + ee + ff;
    let numerator = mu * (pl + 1.0) + ml * (pu + 1.0);
    let denominator = Complex64::new(s, d.detuning() / d.gamma) * norm;
    SteadyState {
        populations: [gg / norm, ee / norm, ff / norm],
        coherence: Complex64::from(numerator) / denominator,
        normalization: Some(norm),
    }
}

/// Stationary populations of a rank-2 transfer generator from the cofactors
/// of its first row, normalised to unit sum.
pub fn steady_from_cofactors(a: &TransferGenerator) -> Result<[f64; 3]> {
    let m = &a.0;
    let mut sigma: Vec<f64> = m.singular_values().iter().copied().collect();
    sigma.sort_by(|x, y| x.total_cmp(y));
    let threshold = RANK_TOLERANCE * sigma[2];
    if !(sigma[1] > threshold) {
        return Err(Error::DegenerateSteadyState {
            sigma: sigma[1],
            threshold,
        });
    }
    let v = [
        m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)],
        m[(2, 0)] * m[(1, 2)] - m[(1, 0)] * m[(2, 2)],
        m[(1, 0)] * m[(2, 1)] - m[(2, 0)] * m[(1, 1)],
    ];
    let total: f64 = v.iter().sum();
    Ok(v.map(|x| x / total))
}

/// ρ_ef from stationarity of its own equation of motion.
pub fn coherence_from_populations(pops: &[f64; 3], d: &DerivedParams) -> Complex64 {
    let (mu, ml) = (d.n_minus.upper, d.n_minus.lower);
    let numerator = (mu + ml) * pops[0] - mu * pops[1] - ml * pops[2];
    Complex64::from(numerator) / Complex64::new(d.coherence_damping(), d.detuning() / d.gamma)
}

/// Cofactor route: A → populations → coherence.
pub fn steady_by_reduction(d: &DerivedParams) -> Result<SteadyState> {
    let a = transfer_generator_a(d)?;
    let populations = steady_from_cofactors(&a)?;
    Ok(SteadyState {
        populations,
        coherence: coherence_from_populations(&populations, d),
        normalization: None,
    })
}

/// Number of singular values of `m` below `rel_tol · σ_max`.
pub(crate) fn kernel_dimension(m: &DMatrix<Complex64>, rel_tol: f64) -> usize {
    let sigma = m.singular_values();
    let top = sigma.max();
    sigma.iter().filter(|&&s| s <= rel_tol * top).count()
}

/// Solves L vec(ρ) = 0 with Tr ρ = 1 appended as an extra row, by SVD least
/// squares on the 10×9 system.
pub fn steady_numeric_oracle(generator: &Superoperator3) -> Result<SteadyState> {
    let l = DMatrix::from_column_slice(9, 9, generator.0.as_slice());
    let kernel = kernel_dimension(&l, RANK_TOLERANCE);
    if kernel != 1 {
        return Err(Error::NonUniqueSteadyState { kernel_dim: kernel });
    }
    let mut augmented = DMatrix::<Complex64>::zeros(10, 9);
    augmented.view_mut((0, 0), (9, 9)).copy_from(&l);
    for i in 0..3 {
        augmented[(9, i + 3 * i)] = Complex64::new(1.0, 0.0);
    }
    let mut rhs = DMatrix::<Complex64>::zeros(10, 1);
    rhs[(9, 0)] = Complex64::new(1.0, 0.0);
    let x = augmented
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|_| Error::NonUniqueSteadyState { kernel_dim: kernel })?;
    let raw = unvectorize(&SVector::<Complex64, 9>::from_column_slice(x.as_slice()));
    let rho = (raw + raw.adjoint()) * Complex64::new(0.5, 0.0);

    let residual = (generator.0 * crate::liouvillian::vectorize(&rho)).camax();
    Error::check("null-space residual", residual, ORACLE_RESIDUAL)?;
    let ground_coherence = rho[(G, E)].norm().max(rho[(G, F)].norm());
    Error::check("ground-state coherences vanish", ground_coherence, 1e-12)?;

    Ok(SteadyState {
        populations: [rho[(G, G)].re, rho[(E, E)].re, rho[(F, F)].re],
        coherence: rho[(E, F)],
        normalization: None,
    })
}

/// All three solutions and their worst pairwise component difference.
#[derive(Debug, Clone, Copy)]
pub struct CrossValidation {
    pub analytic: SteadyState,
    pub reduction: SteadyState,
    pub oracle: SteadyState,
    pub worst: f64,
}

pub fn cross_validate(d: &DerivedParams) -> Result<CrossValidation> {
    let analytic = steady_analytic(d);
    let reduction = steady_by_reduction(d)?;
    let oracle = steady_numeric_oracle(&crate::liouvillian::total_generator(d))?;
    let worst = analytic
        .max_abs_diff(&reduction)
        .max(analytic.max_abs_diff(&oracle))
        .max(reduction.max_abs_diff(&oracle));
    Ok(CrossValidation {
        analytic,
        reduction,
        oracle,
        worst,
    })
}
