use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A point of the (k, c) plane with the physical constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionQuery {
    pub k: f64,
    pub c: f64,
    pub hbar: f64,
    pub m: f64,
}

impl DispersionQuery {
    pub fn new(k: f64, c: f64, hbar: f64, m: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid("c", format!("must be positive, got {c}")));
        }
        if !(m.is_finite() && m > 0.0) {
            return Err(invalid("m", format!("must be positive, got {m}")));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(invalid("hbar", format!("must be positive, got {hbar}")));
        }
        if !k.is_finite() {
            return Err(invalid("k", "must be finite"));
        }
        Ok(Self { k, c, hbar, m })
    }

    /// Rest frequency mc²/ħ (the coupling a of the Dirac-form system).
    pub fn rest_frequency(&self) -> f64 {
        self.m * self.c * self.c / self.hbar
    }

    /// ħk²/2m.
    pub fn free_frequency(&self) -> f64 {
        self.hbar * self.k * self.k / (2.0 * self.m)
    }
}

/// Both roots of ω² + 2(mc²/ħ)ω − c²k² = 0, the plane-wave condition of the
/// second-order ψ− equation with a = mc²/ħ. The low root is written in a
/// cancellation-free form and tends to ħk²/2m as c → ∞.
pub fn newschrod_dispersion(q: &DispersionQuery) -> (f64, f64) {
    let a = q.rest_frequency();
    let ck = q.c * q.k;
    let root = a.hypot(ck);
    (ck * ck / (root + a), -a - root)
}

/// |(ħω + mc²)² − (ħ²c²k² + m²c⁴)|.
pub fn kg_consistency(omega: f64, q: &DispersionQuery) -> f64 {
    let mc2 = q.m * q.c * q.c;
    let hck = q.hbar * q.c * q.k;
    ((q.hbar * omega + mc2).powi(2) - (hck * hck + mc2 * mc2)).abs()
}

/// Scale the Klein–Gordon residual is measured against.
pub fn kg_scale(q: &DispersionQuery) -> f64 {
    let mc2 = q.m * q.c * q.c;
    let hck = q.hbar * q.c * q.k;
    hck * hck + mc2 * mc2
}

/// Angular frequency ω of a signal s(t) ∝ e^{−iωt} by least-squares slope
/// of its unwrapped phase.
pub fn fit_frequency(times: &[f64], samples: &[Complex64]) -> Result<f64> {
    if times.len() != samples.len() || times.len() < 2 {
        return Err(invalid("samples", "need at least two (t, value) pairs"));
    }
    let mut phases = Vec::with_capacity(samples.len());
    let mut offset = 0.0;
    let mut prev = samples[0].arg();
    phases.push(prev);
    for s in &samples[1..] {
        let p = s.arg();
        let mut jump = p - prev;
        while jump > std::f64::consts::PI {
            jump -= 2.0 * std::f64::consts::PI;
            offset -= 2.0 * std::f64::consts::PI;
        }
        while jump < -std::f64::consts::PI {
            jump += 2.0 * std::f64::consts::PI;
            offset += 2.0 * std::f64::consts::PI;
        }
        phases.push(p + offset);
        prev = p;
    }
    let n = times.len() as f64;
    let tm = times.iter().sum::<f64>() / n;
    let pm = phases.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, p) in times.iter().zip(&phases) {
        sxy += (t - tm) * (p - pm);
        sxx += (t - tm) * (t - tm);
    }
    Ok(-sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn q(k: f64, c: f64) -> DispersionQuery {
        DispersionQuery::new(k, c, 1.0, 1.0).unwrap()
    }

    #[test]
    fn known_roots() {
        assert_abs_diff_eq!(newschrod_dispersion(&q(1.0, 2.0)).0, 0.4721359549995794, epsilon = 1e-15);
        assert_abs_diff_eq!(newschrod_dispersion(&q(1.0, 8.0)).0, 0.4980619863883972, epsilon = 1e-15);
        assert_abs_diff_eq!(newschrod_dispersion(&q(1.0, 1e8)).0, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn both_roots_satisfy_klein_gordon() {
        for k in [0.0, 0.5, 1.0, 3.0] {
            for c in [0.5, 2.0, 10.0] {
                let qq = q(k, c);
                let (lo, hi) = newschrod_dispersion(&qq);
                assert!(kg_consistency(lo, &qq) <= 1e-12 * kg_scale(&qq));
                assert!(kg_consistency(hi, &qq) <= 1e-12 * kg_scale(&qq));
            }
        }
        assert_eq!(kg_consistency(0.0, &q(0.0, 3.0)), 0.0);
    }

    #[test]
    fn low_root_is_below_the_free_value_and_rises_with_c() {
        let mut last = 0.0;
        for c in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let qq = q(1.3, c);
            let lo = newschrod_dispersion(&qq).0;
            let free = qq.free_frequency();
            assert!(lo < free);
            assert!(lo > free * (1.0 - free / (qq.m * c * c)));
            assert!(lo > last);
            last = lo;
        }
    }

    #[test]
    fn rejects_bad_queries() {
        assert!(DispersionQuery::new(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(DispersionQuery::new(1.0, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn phase_fit_recovers_frequency() {
        let w = 2.7;
        let times: Vec<f64> = (0..60).map(|j| j as f64 * 0.2).collect();
        let s: Vec<Complex64> = times.iter().map(|t| Complex64::from_polar(1.3, -w * t + 0.4)).collect();
        assert_abs_diff_eq!(fit_frequency(&times, &s).unwrap(), w, epsilon = 1e-12);
    }
}
