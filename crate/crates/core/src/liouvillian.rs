//! Generators of the master equation.
//!
//! Two independent constructions live here:
//!
//! * [`BlockGenerator`], read off the element-wise equations of motion in the
//!   single-excitation subspace and written in the real representation
//!   x = (ρ_gg, ρ_ee, ρ_ff, Re ρ_ef, Im ρ_ef);
//! * [`Superoperator3`] maps built from the operator forms of the per-reservoir
//!   dissipators with A = |g⟩⟨e|, B = |g⟩⟨f|, and their split into population
//!   and coherence parts.
//!
//! Vectorisation is column-stacking throughout: element (i, j) of a 3×3
//! matrix sits at index `i + 3 j` of the 9-vector.
//!
//! Basis order is g = |0,0⟩, e = |1,0⟩ (one quantum in the upper supermode),
//! f = |0,1⟩ (one quantum in the lower supermode).

pub mod fock;

use nalgebra::{DMatrix, Matrix2, Matrix3, RowVector3, SMatrix, SVector, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{DerivedParams, Reservoir};

pub use fock::{build_fock_generator, FockGenerator};

pub type CMatrix3 = Matrix3<Complex64>;
pub type CMatrix9 = SMatrix<Complex64, 9, 9>;

pub const G: usize = 0;
pub const E: usize = 1;
pub const F: usize = 2;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// |i⟩⟨j| in the {g, e, f} basis.
pub fn ket_bra(i: usize, j: usize) -> CMatrix3 {
    let mut m = CMatrix3::zeros();
    m[(i, j)] = Complex64::new(1.0, 0.0);
    m
}

/// Hermitian adjoint.
fn dag(m: &CMatrix3) -> CMatrix3 {
    m.adjoint()
}

/// Density matrix on span{|g⟩, |e⟩, |f⟩}. The lower triangle is implied by
/// Hermiticity: `rho_ef` stands for both ρ_ef and ρ_fe = ρ_ef*.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State3 {
    pub rho_gg: f64,
    pub rho_ee: f64,
    pub rho_ff: f64,
    pub rho_ef: Complex64,
    pub rho_ge: Complex64,
    pub rho_gf: Complex64,
}

impl State3 {
    pub fn diagonal(rho_gg: f64, rho_ee: f64, rho_ff: f64) -> Self {
        State3 {
            rho_gg,
            rho_ee,
            rho_ff,
            rho_ef: ZERO,
            rho_ge: ZERO,
            rho_gf: ZERO,
        }
    }

    pub fn ground() -> Self {
        Self::diagonal(1.0, 0.0, 0.0)
    }

    pub fn maximally_mixed() -> Self {
        Self::diagonal(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    }

    /// One quantum in the upper supermode, |e⟩⟨e|.
    pub fn excited_upper() -> Self {
        Self::diagonal(0.0, 1.0, 0.0)
    }

    /// One quantum in the lower supermode, |f⟩⟨f|.
    pub fn excited_lower() -> Self {
        Self::diagonal(0.0, 0.0, 1.0)
    }

    /// Reads the upper triangle and diagonal of `m`, averaging each
    /// off-diagonal pair so that a slightly non-Hermitian input is Hermitised.
    pub fn from_matrix(m: &CMatrix3) -> Self {
        let herm = |i: usize, j: usize| (m[(i, j)] + m[(j, i)].conj()) * 0.5;
        State3 {
            rho_gg: m[(G, G)].re,
            rho_ee: m[(E, E)].re,
            rho_ff: m[(F, F)].re,
            rho_ef: herm(E, F),
            rho_ge: herm(G, E),
            rho_gf: herm(G, F),
        }
    }

    pub fn to_matrix(&self) -> CMatrix3 {
        let mut m = CMatrix3::zeros();
        m[(G, G)] = self.rho_gg.into();
        m[(E, E)] = self.rho_ee.into();
        m[(F, F)] = self.rho_ff.into();
        m[(E, F)] = self.rho_ef;
        m[(F, E)] = self.rho_ef.conj();
        m[(G, E)] = self.rho_ge;
        m[(E, G)] = self.rho_ge.conj();
        m[(G, F)] = self.rho_gf;
        m[(F, G)] = self.rho_gf.conj();
        m
    }

    pub fn trace(&self) -> f64 {
        self.rho_gg + self.rho_ee + self.rho_ff
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.rho_gg, self.rho_ee, self.rho_ff]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.to_matrix()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// (ρ_gg, ρ_ee, ρ_ff, Re ρ_ef, Im ρ_ef, Re ρ_ge, Im ρ_ge, Re ρ_gf, Im ρ_gf).
    pub fn to_real_vector(&self) -> SVector<f64, 9> {
        SVector::<f64, 9>::from_column_slice(&[
            self.rho_gg,
            self.rho_ee,
            self.rho_ff,
            self.rho_ef.re,
            self.rho_ef.im,
            self.rho_ge.re,
            self.rho_ge.im,
            self.rho_gf.re,
            self.rho_gf.im,
        ])
    }

    pub fn from_real_vector(x: &SVector<f64, 9>) -> Self {
        State3 {
            rho_gg: x[0],
            rho_ee: x[1],
            rho_ff: x[2],
            rho_ef: Complex64::new(x[3], x[4]),
            rho_ge: Complex64::new(x[5], x[6]),
            rho_gf: Complex64::new(x[7], x[8]),
        }
    }

    /// Largest component-wise difference in the real 9-vector representation.
    pub fn max_abs_diff(&self, other: &State3) -> f64 {
        (self.to_real_vector() - other.to_real_vector()).amax()
    }

    pub fn is_finite(&self) -> bool {
        self.to_real_vector().iter().all(|x| x.is_finite())
    }
}

/// Block form of the generator acting on x = (ρ_gg, ρ_ee, ρ_ff, u, v) with
/// u = Re ρ_ef and v = Im ρ_ef.
///
/// `m_pc` feeds u into the populations and `m_cp` feeds the populations into
/// u; v couples only to u through the detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockGenerator {
    pub m_p: Matrix3<f64>,
    pub m_pc: Vector3<f64>,
    pub m_cp: RowVector3<f64>,
    pub m_c: Matrix2<f64>,
    pub detuning: f64,
}

impl BlockGenerator {
    pub fn assembled(&self) -> SMatrix<f64, 5, 5> {
        let mut m = SMatrix::<f64, 5, 5>::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.m_p);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.m_pc);
        m.fixed_view_mut::<1, 3>(3, 0).copy_from(&self.m_cp);
        m.fixed_view_mut::<2, 2>(3, 3).copy_from(&self.m_c);
        m
    }

    pub fn apply(&self, x: &SVector<f64, 5>) -> SVector<f64, 5> {
        self.assembled() * x
    }

    /// Population-only generator M_p − M_pc M_c⁻¹ M_cp, obtained by
    /// eliminating the coherence at stationarity.
    pub fn eliminate_coherence(&self) -> Result<Matrix3<f64>> {
        let inv = self.m_c.try_inverse().ok_or(Error::Consistency {
            check: "invertible coherence block",
            residual: self.m_c.determinant().abs(),
            tolerance: 0.0,
        })?;
        // Only u is driven by the populations, so only the (u, u) entry of M_c⁻¹ enters.
        Ok(self.m_p - self.m_pc * inv[(0, 0)] * self.m_cp)
    }
}

/// Element-wise equations of motion for populations and ρ_ef, in block form.
pub fn build_block_generator(d: &DerivedParams) -> BlockGenerator {
    let g = d.gamma;
    let np = d.n_plus;
    let nm = d.n_minus;
    let m_p = Matrix3::new(
        -2.0 * g * (np.upper + np.lower),
        2.0 * g * (np.upper + 1.0),
        2.0 * g * (np.lower + 1.0),
        2.0 * g * np.upper,
        -2.0 * g * (np.upper + 1.0),
        0.0,
        2.0 * g * np.lower,
        0.0,
        -2.0 * g * (np.lower + 1.0),
    );
    // ρ_ef + ρ_fe = 2u.
    let m_pc = Vector3::new(
        2.0 * g * (nm.upper + nm.lower),
        -2.0 * g * nm.lower,
        -2.0 * g * nm.upper,
    );
    let m_cp = RowVector3::new(g * (nm.upper + nm.lower), -g * nm.upper, -g * nm.lower);
    let damping = g * d.coherence_damping();
    let detuning = d.detuning();
    let m_c = Matrix2::new(-damping, detuning, -detuning, -damping);
    BlockGenerator {
        m_p,
        m_pc,
        m_cp,
        m_c,
        detuning,
    }
}

/// A linear map on 3×3 complex matrices, stored as a 9×9 matrix acting on
/// column-stacked vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Superoperator3(pub CMatrix9);

impl Superoperator3 {
    pub fn zero() -> Self {
        Superoperator3(CMatrix9::zeros())
    }

    pub fn identity() -> Self {
        Superoperator3(CMatrix9::identity())
    }

    /// Tabulates a linear map by its action on the basis |i⟩⟨j|.
    pub fn from_map(map: impl Fn(&CMatrix3) -> CMatrix3) -> Self {
        let mut s = CMatrix9::zeros();
        for j in 0..3 {
            for i in 0..3 {
                let image = map(&ket_bra(i, j));
                s.set_column(i + 3 * j, &vectorize(&image));
            }
        }
        Superoperator3(s)
    }

    pub fn apply(&self, rho: &CMatrix3) -> CMatrix3 {
        unvectorize(&(self.0 * vectorize(rho)))
    }

    /// Applies the map to a dynamically sized matrix, which must be 3×3.
    pub fn apply_dynamic(&self, rho: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        if rho.nrows() != 3 || rho.ncols() != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                actual: if rho.nrows() != 3 { rho.nrows() } else { rho.ncols() },
            });
        }
        let fixed = CMatrix3::from_iterator(rho.iter().copied());
        let out = self.apply(&fixed);
        Ok(DMatrix::from_iterator(3, 3, out.iter().copied()))
    }

    pub fn scale(&self, c: f64) -> Self {
        Superoperator3(self.0 * Complex64::from(c))
    }

    /// max over the basis |i⟩⟨j| of |Tr S[|i⟩⟨j|]|.
    pub fn trace_residual(&self) -> f64 {
        (0..9)
            .map(|k| {
                let col = self.0.column(k);
                (col[0] + col[4] + col[8]).norm()
            })
            .fold(0.0, f64::max)
    }

    /// max over the basis of ‖S[X†] − S[X]†‖∞.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..3 {
            for i in 0..3 {
                let x = ket_bra(i, j);
                let lhs = self.apply(&dag(&x));
                let rhs = dag(&self.apply(&x));
                worst = worst.max((lhs - rhs).camax());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Superoperator3) -> f64 {
        (self.0 - other.0).camax()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.camax()
    }
}

impl std::ops::Add for Superoperator3 {
    type Output = Superoperator3;
    fn add(self, rhs: Self) -> Self {
        Superoperator3(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Superoperator3 {
    type Output = Superoperator3;
    fn sub(self, rhs: Self) -> Self {
        Superoperator3(self.0 - rhs.0)
    }
}

pub fn vectorize(m: &CMatrix3) -> SVector<Complex64, 9> {
    // nalgebra storage is column-major, which is exactly column stacking.
    SVector::<Complex64, 9>::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &SVector<Complex64, 9>) -> CMatrix3 {
    CMatrix3::from_column_slice(v.as_slice())
}

/// H_s = ω_A |e⟩⟨e| + ω_B |f⟩⟨f| restricted to the single-excitation subspace.
pub fn system_hamiltonian(d: &DerivedParams) -> CMatrix3 {
    ket_bra(E, E) * Complex64::from(d.omega_upper) + ket_bra(F, F) * Complex64::from(d.omega_lower)
}

/// ρ ↦ −i[H_s, ρ].
pub fn hamiltonian_superoperator(d: &DerivedParams) -> Superoperator3 {
    let h = system_hamiltonian(d);
    Superoperator3::from_map(|r| (h * r - r * h) * (-I))
}

/// Dissipator of one reservoir in operator form, with the supermode lowering
/// operators replaced by A = |g⟩⟨e| and B = |g⟩⟨f|. The Hermitian-conjugate
/// partner of every X ρ Y term is Y† ρ X†.
pub fn build_reservoir_dissipator(d: &DerivedParams, which: Reservoir) -> Superoperator3 {
    let n = d.bath(which);
    let (nu, nl) = (n.upper, n.lower);
    let half = d.gamma / 2.0;
    let sign = which.cross_sign();
    let a = ket_bra(G, E);
    let b = ket_bra(G, F);
    let (ad, bd) = (dag(&a), dag(&b));
    let id = CMatrix3::identity();

    Superoperator3::from_map(move |r| {
        let lindblad = |l: &CMatrix3, rate: f64| {
            let ld = dag(l);
            (l * r * ld * Complex64::from(2.0) - r * ld * l - ld * l * r) * Complex64::from(rate)
        };
        // x ρ y + y† ρ x†
        let with_hc = |x: &CMatrix3, y: &CMatrix3, c: f64| {
            (x * r * y + dag(y) * r * dag(x)) * Complex64::from(c)
        };

        let mut out = lindblad(&ad, half * nu)
            + lindblad(&bd, half * nl)
            + lindblad(&a, half * (nu + 1.0))
            + lindblad(&b, half * (nl + 1.0));

        let cross = with_hc(&ad, &b, half * (nu + nl))
            + with_hc(&(b * ad), &id, -half * nu)
            + with_hc(&id, &(b * ad), -half * nl)
            + with_hc(&b, &ad, half * (nu + nl + 2.0))
            + with_hc(&id, &(ad * b), -half * (nu + 1.0))
            + with_hc(&(ad * b), &id, -half * (nl + 1.0));
        out += cross * Complex64::from(sign);
        out
    })
}

/// The seven bra-ket maps L₁ … L₇ that split each reservoir dissipator into a
/// population part (L₁–L₄) and a coherence part (L₅–L₇). Index k holds L_{k+1}.
pub fn split_terms() -> [Superoperator3; 7] {
    let kb = ket_bra;
    let two = Complex64::from(2.0);
    let decay = |to: usize, from: usize| {
        Superoperator3::from_map(move |r| {
            kb(to, from) * r * kb(from, to) * two - r * kb(from, from) - kb(from, from) * r
        })
    };
    let l5 = Superoperator3::from_map(|r| kb(E, G) * r * kb(G, F) + kb(F, G) * r * kb(G, E));
    let l6 = Superoperator3::from_map(|r| {
        kb(G, F) * r * kb(E, G) + kb(G, E) * r * kb(F, G) - r * kb(E, F) - kb(F, E) * r
    });
    let l7 = Superoperator3::from_map(|r| {
        kb(G, F) * r * kb(E, G) + kb(G, E) * r * kb(F, G) - r * kb(F, E) - kb(E, F) * r
    });
    [decay(E, G), decay(F, G), decay(G, E), decay(G, F), l5, l6, l7]
}

/// Coefficients of L₁ … L₇ in the population/coherence split of `which`.
pub fn split_coefficients(d: &DerivedParams, which: Reservoir) -> [f64; 7] {
    let n = d.bath(which);
    let half = d.gamma / 2.0;
    let s = which.cross_sign();
    [
        half * n.upper,
        half * n.lower,
        half * (n.upper + 1.0),
        half * (n.lower + 1.0),
        s * half * (n.upper + n.lower),
        s * half * (n.upper + 1.0),
        s * half * (n.lower + 1.0),
    ]
}

/// Returns (D^(p), D^(c)) for one reservoir.
pub fn split_dissipator(d: &DerivedParams, which: Reservoir) -> (Superoperator3, Superoperator3) {
    let terms = split_terms();
    let c = split_coefficients(d, which);
    let combine = |range: std::ops::Range<usize>| {
        range.fold(Superoperator3::zero(), |acc, k| acc + terms[k].scale(c[k]))
    };
    (combine(0..4), combine(4..7))
}

/// −i[H_s, ·] + D_a + D_b on the single-excitation subspace.
pub fn total_generator(d: &DerivedParams) -> Superoperator3 {
    hamiltonian_superoperator(d)
        + build_reservoir_dissipator(d, Reservoir::A)
        + build_reservoir_dissipator(d, Reservoir::B)
}
