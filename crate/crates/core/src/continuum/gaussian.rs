use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::wave::{ComplexWave, WaveRole};
use crate::error::{invalid, Result};

/// Free Gaussian packet for i∂tψ = −D∂²zψ, normalized to unit ∫|ψ|².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub sigma0: f64,
    pub k0: f64,
    #[serde(default)]
    pub z0: f64,
}

impl GaussianPacket {
    pub fn new(sigma0: f64, k0: f64, z0: f64) -> Result<Self> {
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(invalid("sigma0", format!("must be positive, got {sigma0}")));
        }
        if !(k0.is_finite() && z0.is_finite()) {
            return Err(invalid("k0", "packet parameters must be finite"));
        }
        Ok(Self { sigma0, k0, z0 })
    }

    pub fn eval(&self, diffusivity: f64, z: f64, t: f64) -> Complex64 {
        let a = 1.0 / (4.0 * self.sigma0 * self.sigma0);
        let x = z - self.z0;
        let den = Complex64::new(1.0, 4.0 * a * diffusivity * t);
        let num = Complex64::new(-a * x * x, self.k0 * x - diffusivity * self.k0 * self.k0 * t);
        let pref = (2.0 * std::f64::consts::PI * self.sigma0 * self.sigma0).powf(-0.25);
        pref / den.sqrt() * (num / den).exp()
    }

    /// Standard deviation of |ψ|² at time t.
    pub fn width(&self, diffusivity: f64, t: f64) -> f64 {
        let s = self.sigma0;
        (s * s + (diffusivity * t / s).powi(2)).sqrt()
    }
}

/// Spreading Gaussian centred at the origin, evaluated at (z, t).
pub fn analytic_free_gaussian(sigma0: f64, k0: f64, diffusivity: f64, z: f64, t: f64) -> Result<Complex64> {
    Ok(GaussianPacket::new(sigma0, k0, 0.0)?.eval(diffusivity, z, t))
}

/// The packet sampled at `positions`.
pub fn gaussian_wave(packet: &GaussianPacket, diffusivity: f64, positions: &[f64], t: f64) -> ComplexWave {
    ComplexWave::new(
        positions.iter().map(|&z| packet.eval(diffusivity, z, t)).collect(),
        t,
        WaveRole::Psi,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn initial_profile() {
        let p = GaussianPacket::new(0.7, 1.5, 0.0).unwrap();
        for z in [-1.0f64, 0.0, 0.3, 2.0] {
            let expect = (2.0 * std::f64::consts::PI * 0.49f64).powf(-0.25)
                * (-z * z / (4.0 * 0.49)).exp()
                * Complex64::from_polar(1.0, 1.5 * z);
            assert_abs_diff_eq!((p.eval(0.5, z, 0.0) - expect).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn width_matches_second_moment_and_grows() {
        let p = GaussianPacket::new(1.0, 1.0, 0.0).unwrap();
        let d = 0.5;
        let h = 0.01;
        let mut last = 0.0;
        for t in [0.0, 0.5, 1.0, 3.0] {
            let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
            for j in -4000..4000 {
                let z = j as f64 * h;
                let w = p.eval(d, z, t).norm_sqr() * h;
                m0 += w;
                m1 += w * z;
                m2 += w * z * z;
            }
            let mean = m1 / m0;
            let var = m2 / m0 - mean * mean;
            assert_abs_diff_eq!(m0, 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(var.sqrt(), p.width(d, t), epsilon = 1e-8);
            assert!(p.width(d, t) >= last);
            last = p.width(d, t);
        }
    }

    #[test]
    fn zero_momentum_packet_is_symmetric() {
        for t in [0.0, 0.4, 2.0] {
            for z in [0.1, 0.9, 2.5] {
                let l = analytic_free_gaussian(0.8, 0.0, 0.5, -z, t).unwrap().norm();
                let r = analytic_free_gaussian(0.8, 0.0, 0.5, z, t).unwrap().norm();
                assert_abs_diff_eq!(l, r, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn satisfies_the_free_equation() {
        let p = GaussianPacket::new(1.0, 1.2, 0.3).unwrap();
        let (d, h) = (0.5, 1e-3);
        for (z, t) in [(0.2, 0.4), (-1.0, 1.1)] {
            let dt = (p.eval(d, z, t + h) - p.eval(d, z, t - h)) / (2.0 * h);
            let dzz = (p.eval(d, z + h, t) - 2.0 * p.eval(d, z, t) + p.eval(d, z - h, t)) / (h * h);
            let residual = Complex64::new(0.0, 1.0) * dt + d * dzz;
            assert!(residual.norm() < 1e-5, "{residual}");
        }
    }
}
