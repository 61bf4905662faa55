use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::wave::ComplexWave;
use crate::error::{check_len, invalid, Error, Result};
use crate::lattice::Potential;

/// Sign of the time derivative being integrated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CnDirection {
    /// i∂tψ = Hψ.
    #[default]
    Forward,
    /// −i∂tψ = Hψ, satisfied by the complex conjugate of a forward solution.
    Conjugate,
}

/// Crank–Nicolson integrator for i∂tψ = (−D∂²z + v)ψ on a periodic grid with
/// the three-point Laplacian.
///
/// The cyclic tridiagonal system is solved as a tridiagonal one plus a
/// rank-one correction (Sherman–Morrison); the factorization is computed once.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    n: usize,
    // explicit half-step: (I − iσ dt/2 H)
    rhs_diag: Vec<Complex64>,
    rhs_off: Complex64,
    // implicit half-step: (I + iσ dt/2 H) = T + u vᵀ
    off: Complex64,
    gamma: Complex64,
    // Thomas sweep of T
    c_prime: Vec<Complex64>,
    denom: Vec<Complex64>,
    // T⁻¹u and the Sherman–Morrison scalar
    corr: Vec<Complex64>,
    corr_scale: Complex64,
}

impl CrankNicolson {
    pub fn new(
        delta: f64,
        diffusivity: f64,
        potential: &[f64],
        dt: f64,
        direction: CnDirection,
    ) -> Result<Self> {
        let n = potential.len();
        if n < 3 {
            return Err(invalid("n_sites", "Crank-Nicolson needs at least three sites"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(invalid("delta", format!("must be positive, got {delta}")));
        }
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(invalid("potential", "non-finite sample"));
        }
        let sigma = match direction {
            CnDirection::Forward => 1.0,
            CnDirection::Conjugate => -1.0,
        };
        let h = Complex64::new(0.0, sigma * 0.5 * dt);
        let k = diffusivity / (delta * delta);
        let h_diag: Vec<f64> = potential.iter().map(|v| 2.0 * k + v).collect();
        let h_off = -k;

        let lhs_diag: Vec<Complex64> = h_diag.iter().map(|d| 1.0 + h * d).collect();
        let off = h * h_off;
        let rhs_diag = h_diag.iter().map(|d| 1.0 - h * d).collect();
        let rhs_off = -(h * h_off);

        let gamma = -lhs_diag[0];
        let mut b = lhs_diag;
        b[0] -= gamma;
        b[n - 1] -= off * off / gamma;

        let mut c_prime = vec![Complex64::new(0.0, 0.0); n];
        let mut denom = vec![Complex64::new(0.0, 0.0); n];
        denom[0] = b[0];
        c_prime[0] = off / denom[0];
        for i in 1..n {
            denom[i] = b[i] - off * c_prime[i - 1];
            if denom[i].norm() == 0.0 {
                return Err(Error::Numerical(format!("singular tridiagonal pivot at row {i}")));
            }
            c_prime[i] = off / denom[i];
        }
        let mut solver = Self {
            n,
            rhs_diag,
            rhs_off,
            off,
            gamma,
            c_prime,
            denom,
            corr: Vec::new(),
            corr_scale: Complex64::new(0.0, 0.0),
        };
        let mut u = vec![Complex64::new(0.0, 0.0); n];
        u[0] = gamma;
        u[n - 1] = off;
        let z = solver.thomas(&u);
        let vz = z[0] + off * z[n - 1] / gamma;
        let scale = 1.0 + vz;
        if scale.norm() < 1e-300 {
            return Err(Error::Numerical("rank-one correction is singular".into()));
        }
        solver.corr = z;
        solver.corr_scale = scale;
        Ok(solver)
    }

    fn thomas(&self, r: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        y[0] = r[0] / self.denom[0];
        for i in 1..n {
            y[i] = (r[i] - self.off * y[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            y[i] = y[i] - self.c_prime[i] * y[i + 1];
        }
        y
    }

    /// Advances `psi` by one time step in place.
    pub fn step(&self, psi: &mut [Complex64]) -> Result<()> {
        check_len(self.n, psi.len())?;
        let n = self.n;
        let rhs: Vec<Complex64> = (0..n)
            .map(|j| {
                self.rhs_diag[j] * psi[j] + self.rhs_off * (psi[(j + n - 1) % n] + psi[(j + 1) % n])
            })
            .collect();
        let y = self.thomas(&rhs);
        let vy = y[0] + self.off * y[n - 1] / self.gamma;
        let f = vy / self.corr_scale;
        for j in 0..n {
            psi[j] = y[j] - f * self.corr[j];
        }
        if psi.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Numerical("Crank-Nicolson step produced non-finite values".into()));
        }
        Ok(())
    }
}

/// One forward Crank–Nicolson step of a wave. Builds a fresh solver; use
/// [`CrankNicolson`] directly for repeated steps.
pub fn cn_schrodinger_step(
    psi: &ComplexWave,
    delta: f64,
    diffusivity: f64,
    potential: &Potential,
    dt: f64,
) -> Result<ComplexWave> {
    check_len(psi.len(), potential.values.len())?;
    let solver = CrankNicolson::new(delta, diffusivity, &potential.values, dt, CnDirection::Forward)?;
    let mut out = psi.clone();
    solver.step(&mut out.values)?;
    out.t += dt;
    Ok(out)
}

/// Evolves `psi` for `n_steps` steps of size `dt`.
pub fn cn_evolve(
    psi: &ComplexWave,
    delta: f64,
    diffusivity: f64,
    potential: &Potential,
    dt: f64,
    n_steps: u64,
    direction: CnDirection,
) -> Result<ComplexWave> {
    check_len(psi.len(), potential.values.len())?;
    let solver = CrankNicolson::new(delta, diffusivity, &potential.values, dt, direction)?;
    let mut out = psi.clone();
    for _ in 0..n_steps {
        solver.step(&mut out.values)?;
    }
    out.t += dt * n_steps as f64;
    Ok(out)
}
