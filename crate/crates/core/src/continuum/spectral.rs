use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::wave::{ComplexWave, WaveRole};
use crate::error::{check_len, invalid, Result};
use crate::evolve::Scattering;
use crate::lattice::{ChargeField, EnvelopeDensities};

/// Angular wavenumbers of an n-point periodic grid with spacing δ in FFT
/// order. The Nyquist mode of an even grid gets 0 so real data stay real
/// under differentiation.
pub fn wavenumbers(n: usize, delta: f64) -> Vec<f64> {
    let length = n as f64 * delta;
    (0..n)
        .map(|j| {
            let m = if 2 * j < n {
                j as f64
            } else if 2 * j == n {
                0.0
            } else {
                j as f64 - n as f64
            };
            2.0 * std::f64::consts::PI * m / length
        })
        .collect()
}

fn fft(v: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(v.len())
    } else {
        planner.plan_fft_forward(v.len())
    };
    let mut buf = v.to_vec();
    plan.process(&mut buf);
    if inverse {
        let s = 1.0 / v.len() as f64;
        buf.iter_mut().for_each(|x| *x *= s);
    }
    buf
}

/// Forward DFT (unnormalized).
pub fn dft(v: &[Complex64]) -> Vec<Complex64> {
    fft(v, false)
}

/// Inverse DFT (normalized by 1/n).
pub fn idft(v: &[Complex64]) -> Vec<Complex64> {
    fft(v, true)
}

/// Spectral z-derivative of complex data on a periodic grid.
pub fn spectral_derivative(v: &[Complex64], delta: f64) -> Vec<Complex64> {
    let k = wavenumbers(v.len(), delta);
    let hat: Vec<Complex64> = dft(v).iter().zip(&k).map(|(x, k)| x * Complex64::new(0.0, *k)).collect();
    idft(&hat)
}

/// The constant-coefficient system
///
/// ```text
/// ∂t φ_minus =  c ∂z φ_minus + p φ_plus
/// ∂t φ_plus  = −c ∂z φ_plus  + q φ_minus
/// ```
///
/// integrated exactly per Fourier mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiracSystem {
    pub c: f64,
    pub a: f64,
    pub scattering: Scattering,
}

impl DiracSystem {
    pub fn new(c: f64, a: f64, scattering: Scattering) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid("c", format!("must be positive, got {c}")));
        }
        if !a.is_finite() {
            return Err(invalid("a", "must be finite"));
        }
        Ok(Self { c, a, scattering })
    }

    /// (p, q) of the left envelope pair (φ1, φ2).
    pub fn left_coupling(&self) -> (f64, f64) {
        match self.scattering {
            Scattering::Entwined => (-self.a, self.a),
            Scattering::Unentwined => (self.a, self.a),
        }
    }

    /// (p, q) of the right envelope pair (φ3, φ4).
    pub fn right_coupling(&self) -> (f64, f64) {
        match self.scattering {
            Scattering::Entwined => (self.a, -self.a),
            Scattering::Unentwined => (self.a, self.a),
        }
    }

    /// Evolves one envelope pair by time `t` (may be negative).
    pub fn evolve_pair(
        &self,
        d: &EnvelopeDensities,
        coupling: (f64, f64),
        t: f64,
        delta: f64,
    ) -> Result<EnvelopeDensities> {
        check_len(d.minus.len(), d.plus.len())?;
        let n = d.minus.len();
        let to_c = |v: &[f64]| v.iter().map(|x| Complex64::new(*x, 0.0)).collect::<Vec<_>>();
        let mut m = dft(&to_c(&d.minus));
        let mut p = dft(&to_c(&d.plus));
        let ks = wavenumbers(n, delta);
        for j in 0..n {
            let e = mode_exponential(self.c * ks[j], coupling, t);
            let (mj, pj) = (m[j], p[j]);
            m[j] = e[0][0] * mj + e[0][1] * pj;
            p[j] = e[1][0] * mj + e[1][1] * pj;
        }
        Ok(EnvelopeDensities {
            minus: idft(&m).iter().map(|x| x.re).collect(),
            plus: idft(&p).iter().map(|x| x.re).collect(),
        })
    }

    /// Evolves both envelope pairs of a field by time `t`.
    pub fn evolve(&self, field: &ChargeField, t: f64, delta: f64) -> Result<ChargeField> {
        field.validate()?;
        Ok(ChargeField {
            left: self.evolve_pair(&field.left, self.left_coupling(), t, delta)?,
            right: self.evolve_pair(&field.right, self.right_coupling(), t, delta)?,
            t_index: field.t_index,
            normalization: field.normalization,
        })
    }

    /// Largest imaginary part left by the inverse transforms of a left-pair
    /// evolution; measures how well realness is preserved.
    pub fn imaginary_residue(&self, d: &EnvelopeDensities, t: f64, delta: f64) -> f64 {
        let n = d.minus.len();
        let to_c = |v: &[f64]| v.iter().map(|x| Complex64::new(*x, 0.0)).collect::<Vec<_>>();
        let mut m = dft(&to_c(&d.minus));
        let mut p = dft(&to_c(&d.plus));
        let ks = wavenumbers(n, delta);
        for j in 0..n {
            let e = mode_exponential(self.c * ks[j], self.left_coupling(), t);
            let (mj, pj) = (m[j], p[j]);
            m[j] = e[0][0] * mj + e[0][1] * pj;
            p[j] = e[1][0] * mj + e[1][1] * pj;
        }
        idft(&m)
            .iter()
            .chain(idft(&p).iter())
            .map(|x| x.im.abs())
            .fold(0.0, f64::max)
    }
}

/// exp(G t) for G = [[i ck, p], [q, −i ck]]. G² = (pq − c²k²) I, so the
/// exponential is a combination of I and G.
pub fn mode_exponential(ck: f64, coupling: (f64, f64), t: f64) -> [[Complex64; 2]; 2] {
    let (p, q) = coupling;
    let disc = p * q - ck * ck;
    let (cosine, sine_over) = if disc < 0.0 {
        let w = (-disc).sqrt();
        ((w * t).cos(), (w * t).sin() / w)
    } else if disc > 0.0 {
        let w = disc.sqrt();
        ((w * t).cosh(), (w * t).sinh() / w)
    } else {
        (1.0, t)
    };
    let i_ck = Complex64::new(0.0, ck);
    let c0 = Complex64::new(cosine, 0.0);
    [
        [c0 + sine_over * i_ck, Complex64::new(sine_over * p, 0.0)],
        [Complex64::new(sine_over * q, 0.0), c0 - sine_over * i_ck],
    ]
}

/// Exact solution of the homogeneous (z-independent) entwined system:
/// (φ1, φ2) = (A cos at, A sin at).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousSolution {
    pub amplitude: f64,
    pub a: f64,
}

impl HomogeneousSolution {
    pub fn at(&self, t: f64) -> (f64, f64) {
        let (s, c) = (self.a * t).sin_cos();
        (self.amplitude * c, self.amplitude * s)
    }
}

/// Which phase convention [`to_psi_pm`] uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiConvention {
    /// ψ± = (iφ1 ± φ2) e^{+iat}; satisfies ∂tψ+ = c∂zψ− and
    /// ∂tψ− = c∂zψ+ + 2iaψ−.
    #[default]
    Corrected,
    /// ψ± = (iφ1 ± φ2) e^{−iat}. Does not satisfy the pair above; kept for
    /// comparison only.
    AsPrinted,
}

/// Combines the left pair into ψ+ and ψ−.
pub fn to_psi_pm(
    field: &ChargeField,
    a: f64,
    t: f64,
    convention: PsiConvention,
) -> (ComplexWave, ComplexWave) {
    let sign = match convention {
        PsiConvention::Corrected => 1.0,
        PsiConvention::AsPrinted => -1.0,
    };
    let phase = Complex64::from_polar(1.0, sign * a * t);
    let (plus, minus) = field
        .phi1()
        .iter()
        .zip(field.phi2())
        .map(|(&f1, &f2)| {
            let i_f1 = Complex64::new(0.0, f1);
            ((i_f1 + f2) * phase, (i_f1 - f2) * phase)
        })
        .unzip();
    (
        ComplexWave::new(plus, t, WaveRole::PsiPlus),
        ComplexWave::new(minus, t, WaveRole::PsiMinus),
    )
}

/// Residuals (max norm) of ∂tψ+ = c∂zψ− and ∂tψ− = c∂zψ+ + 2iaψ− at time
/// `t` along the exact spectral solution started from `initial` at t = 0.
/// Time derivatives use a sixth-order central difference with step `h`.
pub fn psi_pm_residuals(
    system: &DiracSystem,
    initial: &ChargeField,
    t: f64,
    h: f64,
    delta: f64,
    convention: PsiConvention,
) -> Result<(f64, f64)> {
    let at = |s: f64| -> Result<(ComplexWave, ComplexWave)> {
        let f = system.evolve(initial, s, delta)?;
        Ok(to_psi_pm(&f, system.a, s, convention))
    };
    const OFFSETS: [f64; 6] = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
    const WEIGHTS: [f64; 6] = [-1.0, 9.0, -45.0, 45.0, -9.0, 1.0];
    let samples: Vec<(ComplexWave, ComplexWave)> = OFFSETS
        .iter()
        .map(|k| at(t + k * h))
        .collect::<Result<_>>()?;
    let (p0, m0) = at(t)?;
    let n = p0.len();
    let dt = |sel: fn(&(ComplexWave, ComplexWave)) -> &ComplexWave, j: usize| {
        samples
            .iter()
            .zip(WEIGHTS)
            .map(|(s, w)| w * sel(s).values[j])
            .sum::<Complex64>()
            / (60.0 * h)
    };
    let dz_plus = spectral_derivative(&p0.values, delta);
    let dz_minus = spectral_derivative(&m0.values, delta);
    let two_ia = Complex64::new(0.0, 2.0 * system.a);
    let mut r1: f64 = 0.0;
    let mut r2: f64 = 0.0;
    for j in 0..n {
        let dtp = dt(|s| &s.0, j);
        let dtm = dt(|s| &s.1, j);
        r1 = r1.max((dtp - system.c * dz_minus[j]).norm());
        r2 = r2.max((dtm - system.c * dz_plus[j] - two_ia * m0.values[j]).norm());
    }
    Ok((r1, r2))
}
