//! Physical parameters of the optical molecule and the occupation factors
//! derived from them.
//!
//! Units: the bare cavity frequency ω sets the energy scale and ħ = k_B = 1,
//! so frequencies, rates and temperatures are all plain `f64` in the same
//! unit. The coupled cavities diagonalise into two supermodes, the upper one
//! at ω + λ and the lower one at ω − λ.

use crate::error::{Error, Result};

/// Above this ratio ω/T the occupation is evaluated as exp(−ω/T).
const OVERFLOW_RATIO: f64 = 700.0;

/// Mean Bose occupation [exp(ω/T) − 1]⁻¹ of a reservoir mode.
pub fn planck_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidParameter {
            name: "omega",
            value: omega,
            constraint: "frequency must be finite and > 0",
        });
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::InvalidParameter {
            name: "temperature",
            value: temperature,
            constraint: "temperature must be finite and > 0",
        });
    }
    let ratio = omega / temperature;
    if ratio > OVERFLOW_RATIO {
        Ok((-ratio).exp())
    } else {
        Ok(1.0 / ratio.exp_m1())
    }
}

/// The five physical inputs: cavity frequency, inter-cavity coupling,
/// reservoir coupling rate and the two reservoir temperatures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub omega: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub t_a: f64,
    pub t_b: f64,
}

impl SystemParams {
    pub fn new(omega: f64, lambda: f64, gamma: f64, t_a: f64, t_b: f64) -> Result<Self> {
        let p = SystemParams {
            omega,
            lambda,
            gamma,
            t_a,
            t_b,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters in units of ω = 1 with ΔT = t_b − t_a.
    pub fn from_delta_t(lambda: f64, gamma: f64, t_a: f64, delta_t: f64) -> Result<Self> {
        Self::new(1.0, lambda, gamma, t_a, t_a + delta_t)
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, value: f64) -> Result<()> {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    value,
                    constraint: "must be finite and > 0",
                })
            }
        }
        positive("omega", self.omega)?;
        positive("gamma", self.gamma)?;
        positive("t_a", self.t_a)?;
        positive("t_b", self.t_b)?;
        if !(self.lambda.is_finite() && self.lambda >= 0.0 && self.lambda < self.omega) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: self.lambda,
                constraint: "requires 0 <= lambda < omega",
            });
        }
        Ok(())
    }

    pub fn delta_t(&self) -> f64 {
        self.t_b - self.t_a
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        SystemParams { lambda, ..self }
    }

    pub fn derive(&self) -> Result<DerivedParams> {
        derive_params(self)
    }
}

/// A quantity evaluated at the two supermode frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeValues {
    /// Upper supermode, frequency ω + λ.
    pub upper: f64,
    /// Lower supermode, frequency ω − λ.
    pub lower: f64,
}

/// Supermode frequencies, occupation factors of both reservoirs at both
/// supermode frequencies, their half-sums/half-differences, and the factor R
/// that appears wherever the coherence is eliminated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    pub omega_upper: f64,
    pub omega_lower: f64,
    pub gamma: f64,
    /// Occupations of reservoir a.
    pub bath_a: ModeValues,
    /// Occupations of reservoir b.
    pub bath_b: ModeValues,
    /// (N_a + N_b) / 2 per supermode.
    pub n_plus: ModeValues,
    /// (N_a − N_b) / 2 per supermode; vanishes at equal temperatures.
    pub n_minus: ModeValues,
    pub r_factor: f64,
}

impl DerivedParams {
    pub fn detuning(&self) -> f64 {
        self.omega_upper - self.omega_lower
    }

    /// N₊ of both supermodes plus 2; the relaxation rate of ρ_ef in units of γ.
    pub fn coherence_damping(&self) -> f64 {
        self.n_plus.upper + self.n_plus.lower + 2.0
    }

    pub fn bath(&self, which: Reservoir) -> ModeValues {
        match which {
            Reservoir::A => self.bath_a,
            Reservoir::B => self.bath_b,
        }
    }
}

/// Identifies the reservoir attached to cavity a or cavity b.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reservoir {
    A,
    B,
}

impl Reservoir {
    pub const BOTH: [Reservoir; 2] = [Reservoir::A, Reservoir::B];

    /// +1 for reservoir a, −1 for reservoir b: the sign of the cross-supermode
    /// terms, since cavity b couples to the antisymmetric combination.
    pub fn cross_sign(self) -> f64 {
        match self {
            Reservoir::A => 1.0,
            Reservoir::B => -1.0,
        }
    }
}

pub fn derive_params(p: &SystemParams) -> Result<DerivedParams> {
    p.validate()?;
    let omega_upper = p.omega + p.lambda;
    let omega_lower = p.omega - p.lambda;
    let bath_a = ModeValues {
        upper: planck_occupation(omega_upper, p.t_a)?,
        lower: planck_occupation(omega_lower, p.t_a)?,
    };
    let bath_b = ModeValues {
        upper: planck_occupation(omega_upper, p.t_b)?,
        lower: planck_occupation(omega_lower, p.t_b)?,
    };
    let n_plus = ModeValues {
        upper: (bath_a.upper + bath_b.upper) / 2.0,
        lower: (bath_a.lower + bath_b.lower) / 2.0,
    };
    let n_minus = ModeValues {
        upper: (bath_a.upper - bath_b.upper) / 2.0,
        lower: (bath_a.lower - bath_b.lower) / 2.0,
    };
    let damping = n_plus.upper + n_plus.lower + 2.0;
    let scaled_detuning = (omega_upper - omega_lower) / p.gamma;
    let r_factor = damping / (damping * damping + scaled_detuning * scaled_detuning);
    Ok(DerivedParams {
        omega_upper,
        omega_lower,
        gamma: p.gamma,
        bath_a,
        bath_b,
        n_plus,
        n_minus,
        r_factor,
    })
}
