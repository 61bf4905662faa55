use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ChargeField, EnvelopeDensities};

/// What a [`ComplexWave`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveRole {
    /// φ2 + iφ1 of one envelope pair.
    Psi,
    PsiPlus,
    PsiMinus,
    /// ψ− with the rest-mass phase removed.
    Chi,
}

/// Complex amplitudes over the periodic grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexWave {
    pub values: Vec<Complex64>,
    pub t: f64,
    pub role: WaveRole,
}

impl ComplexWave {
    pub fn new(values: Vec<Complex64>, t: f64, role: WaveRole) -> Self {
        Self { values, t, role }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn conj(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| v.conj()).collect(),
            t: self.t,
            role: self.role,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Numerical(format!("non-finite amplitude at t = {}", self.t)));
        }
        Ok(())
    }
}

/// ψ = φ_plus + i·φ_minus for one envelope pair.
pub fn pack_densities(d: &EnvelopeDensities, t: f64) -> ComplexWave {
    let values = d
        .minus
        .iter()
        .zip(&d.plus)
        .map(|(&m, &p)| Complex64::new(p, m))
        .collect();
    ComplexWave::new(values, t, WaveRole::Psi)
}

/// ψ = φ2 + iφ1 from the left envelope.
pub fn pack_complex(field: &ChargeField, t: f64) -> ComplexWave {
    pack_densities(&field.left, t)
}

/// φ4 + iφ3 from the right envelope; equals conj(ψ) for a conjugate pair.
pub fn pack_right(field: &ChargeField, t: f64) -> ComplexWave {
    pack_densities(&field.right, t)
}

/// Inverse of [`pack_densities`].
pub fn unpack_complex(wave: &ComplexWave) -> EnvelopeDensities {
    EnvelopeDensities {
        minus: wave.values.iter().map(|v| v.im).collect(),
        plus: wave.values.iter().map(|v| v.re).collect(),
    }
}
