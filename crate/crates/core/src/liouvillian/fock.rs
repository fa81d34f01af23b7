//! Full non-secular generator on a truncated two-supermode Fock space, used
//! to check how much population the single-excitation restriction misses.
//!
//! Basis state |m, n⟩ (m quanta in the upper supermode, n in the lower) has
//! index `m * (n_max + 1) + n`. Superoperators use column stacking, so
//! vec(X ρ Y) = (Yᵀ ⊗ X) vec(ρ).

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::CMatrix3;
use crate::error::{Error, Result};
use crate::model::DerivedParams;

pub const MAX_TRUNCATION: usize = 6;

type CMat = DMatrix<Complex64>;

#[derive(Debug, Clone)]
pub struct FockGenerator {
    pub n_max: usize,
    /// Hilbert-space dimension (n_max + 1)².
    pub dim: usize,
    /// dim² × dim² generator in the column-stacked convention.
    pub matrix: CMat,
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Truncated bosonic annihilation operator on n_max + 1 levels.
fn annihilation(levels: usize) -> CMat {
    let mut a = CMat::zeros(levels, levels);
    for k in 1..levels {
        a[(k - 1, k)] = c((k as f64).sqrt());
    }
    a
}

/// vec(x ρ y) as a matrix acting on vec(ρ).
fn sandwich(x: &CMat, y: &CMat) -> CMat {
    y.transpose().kronecker(x)
}

pub fn build_fock_generator(d: &DerivedParams, n_max: usize) -> Result<FockGenerator> {
    if !(1..=MAX_TRUNCATION).contains(&n_max) {
        return Err(Error::InvalidParameter {
            name: "n_max",
            value: n_max as f64,
            constraint: "truncation must satisfy 1 <= n_max <= 6",
        });
    }
    let levels = n_max + 1;
    let dim = levels * levels;
    let id_mode = CMat::identity(levels, levels);
    let a = annihilation(levels);
    let upper = a.kronecker(&id_mode);
    let lower = id_mode.kronecker(&a);
    let (ud, ld) = (upper.adjoint(), lower.adjoint());
    let id = CMat::identity(dim, dim);

    let h = &ud * &upper * c(d.omega_upper) + &ld * &lower * c(d.omega_lower);
    let mut gen = (sandwich(&h, &id) - sandwich(&id, &h)) * Complex64::new(0.0, -1.0);

    // rate · (2 L ρ L† − ρ L†L − L†L ρ)
    let mut lindblad = |l: &CMat, rate: f64| {
        let ldag = l.adjoint();
        let ll = &ldag * l;
        gen += (sandwich(l, &ldag) * c(2.0) - sandwich(&id, &ll) - sandwich(&ll, &id)) * c(rate);
    };
    let g = d.gamma;
    let (np, nm) = (d.n_plus, d.n_minus);
    lindblad(&ud, g * np.upper);
    lindblad(&ld, g * np.lower);
    lindblad(&upper, g * (np.upper + 1.0));
    lindblad(&lower, g * (np.lower + 1.0));

    // rate · (x ρ y + y† ρ x†)
    let with_hc = |x: &CMat, y: &CMat, rate: f64| {
        (sandwich(x, y) + sandwich(&y.adjoint(), &x.adjoint())) * c(rate)
    };
    let l_ud = &lower * &ud;
    let ud_l = &ud * &lower;
    gen += with_hc(&ud, &lower, g * (nm.upper + nm.lower));
    gen += with_hc(&l_ud, &id, -g * nm.upper);
    gen += with_hc(&id, &l_ud, -g * nm.lower);
    gen += with_hc(&lower, &ud, g * (nm.upper + nm.lower));
    gen += with_hc(&id, &ud_l, -g * nm.upper);
    gen += with_hc(&ud_l, &id, -g * nm.lower);

    Ok(FockGenerator {
        n_max,
        dim,
        matrix: gen,
    })
}

impl FockGenerator {
    pub fn index(&self, upper: usize, lower: usize) -> usize {
        upper * (self.n_max + 1) + lower
    }

    /// Indices of |g⟩ = |0,0⟩, |e⟩ = |1,0⟩, |f⟩ = |0,1⟩.
    pub fn single_excitation_indices(&self) -> [usize; 3] {
        [self.index(0, 0), self.index(1, 0), self.index(0, 1)]
    }

    /// a†a of the upper (first) or lower (second) supermode.
    pub fn number_operators(&self) -> (CMat, CMat) {
        let levels = self.n_max + 1;
        let id_mode = CMat::identity(levels, levels);
        let a = annihilation(levels);
        let n = a.adjoint() * &a;
        (n.kronecker(&id_mode), id_mode.kronecker(&n))
    }

    /// max over the operator basis of |Tr L[|i⟩⟨j|]|.
    pub fn trace_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for col in 0..self.matrix.ncols() {
            let t: Complex64 = (0..self.dim).map(|i| self.matrix[(i + self.dim * i, col)]).sum();
            worst = worst.max(t.norm());
        }
        worst
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        let v = CMat::from_column_slice(self.dim * self.dim, 1, rho.as_slice());
        let out = &self.matrix * v;
        CMat::from_column_slice(self.dim, self.dim, out.as_slice())
    }

    /// Unique stationary state, from the generator with its first row (a
    /// diagonal row, linearly dependent on the others by trace preservation)
    /// replaced by the trace functional.
    pub fn steady_state(&self) -> Result<CMat> {
        let n = self.dim * self.dim;
        let mut system = self.matrix.clone();
        for k in 0..n {
            system[(0, k)] = Complex64::new(0.0, 0.0);
        }
        for i in 0..self.dim {
            system[(0, i + self.dim * i)] = c(1.0);
        }
        let mut rhs = CMat::zeros(n, 1);
        rhs[(0, 0)] = c(1.0);
        let x = system.lu().solve(&rhs).ok_or(Error::NonUniqueSteadyState { kernel_dim: 0 })?;
        let rho = CMat::from_column_slice(self.dim, self.dim, x.as_slice());
        let rho = (&rho + rho.adjoint()) * c(0.5);
        let residual = self.apply(&rho).camax();
        Error::check("fock steady-state residual", residual, 1e-10)?;
        Ok(rho)
    }

    /// The 3×3 block of ρ on span{|g⟩, |e⟩, |f⟩}, unnormalised.
    pub fn single_excitation_block(&self, rho: &CMat) -> CMatrix3 {
        let idx = self.single_excitation_indices();
        CMatrix3::from_fn(|i, j| rho[(idx[i], idx[j])])
    }

    /// Population outside span{|00⟩, |10⟩, |01⟩}.
    pub fn leakage(&self, rho: &CMat) -> f64 {
        let block = self.single_excitation_block(rho);
        1.0 - block.trace().re
    }

    /// Generator entries connecting single-excitation operators, as a 9×9
    /// matrix in the same {g, e, f} column-stacked convention as the
    /// three-level superoperators.
    pub fn projected_generator(&self) -> super::CMatrix9 {
        let idx = self.single_excitation_indices();
        let flat = |i: usize, j: usize| idx[i] + self.dim * idx[j];
        super::CMatrix9::from_fn(|r, col| {
            let (ri, rj) = (r % 3, r / 3);
            let (ci, cj) = (col % 3, col / 3);
            self.matrix[(flat(ri, rj), flat(ci, cj))]
        })
    }
}
