//! Refinement sweeps comparing the stroboscoped stencil with a continuum
//! reference at fixed physical time.

use serde::{Deserialize, Serialize};

use crate::analysis::{empirical_order, l2_error_waves, ConvergenceReport};
use crate::continuum::{cn_evolve, gaussian_wave, pack_complex, CnDirection, ComplexWave, GaussianPacket};
use crate::error::{invalid, Result};
use crate::evolve::{stroboscope_evolve, EnvelopeStencil, Scattering, STROBE_STEPS};
use crate::lattice::{
    make_diffusive_spec, sample_potential, AlphaSite, ChargeField, EnvelopeDensities, LatticeSpec, Normalization,
    PotentialDescriptor, ReversalField,
};

/// How the reference solution is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reference {
    /// Closed-form free packet; requires a zero potential.
    Analytic,
    /// Crank–Nicolson on a grid `refine` times finer than the finest δ.
    CrankNicolson { refine: usize, dt: f64 },
}

/// A Gaussian packet on a periodic domain evolved to `t_final` under
/// diffusive scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusiveCase {
    pub diffusivity: f64,
    pub t_final: f64,
    pub length: f64,
    pub packet: GaussianPacket,
    pub potential: PotentialDescriptor,
    pub reference: Reference,
    #[serde(default)]
    pub alpha_site: AlphaSite,
}

/// Stencil result and the lattice it lives on.
#[derive(Debug, Clone)]
pub struct StencilRun {
    pub spec: LatticeSpec,
    pub wave: ComplexWave,
    pub saturated_sites: usize,
}

impl DiffusiveCase {
    fn sites(&self, delta: f64) -> Result<usize> {
        let n = self.length / delta;
        if (n - n.round()).abs() > 1e-9 || n < 4.0 {
            return Err(invalid("delta", format!("must divide the domain length {} evenly", self.length)));
        }
        Ok(n.round() as usize)
    }

    /// Stroboscoped stencil at t_final, started from the packet at t = 0.
    pub fn stencil(&self, delta: f64) -> Result<StencilRun> {
        let (spec, _) = make_diffusive_spec(delta, self.diffusivity, self.sites(delta)?)?;
        let steps = self.t_final / spec.epsilon;
        let n_steps = steps.round() as u64;
        if (steps - n_steps as f64).abs() > 1e-6 || !n_steps.is_multiple_of(STROBE_STEPS) {
            return Err(invalid(
                "delta",
                format!("t_final / epsilon = {steps} must be a whole multiple of {STROBE_STEPS}"),
            ));
        }
        let pot = sample_potential(&self.potential, &spec)?;
        let (alpha, saturated_sites) = ReversalField::from_potential(&pot, spec.epsilon)?;
        let stencil = EnvelopeStencil::new(&spec, &alpha, self.alpha_site, Scattering::Entwined)?;
        let psi0 = gaussian_wave(&self.packet, self.diffusivity, &spec.positions(), 0.0);
        let mut field = ChargeField::with_conjugate_right(EnvelopeDensities {
            minus: psi0.values.iter().map(|v| v.im).collect(),
            plus: psi0.values.iter().map(|v| v.re).collect(),
        });
        field.normalization = Normalization::Renormalized;
        let out = stroboscope_evolve(&stencil, &field, n_steps / STROBE_STEPS)?;
        Ok(StencilRun {
            spec,
            wave: pack_complex(&out, self.t_final),
            saturated_sites,
        })
    }

    /// Reference ψ at t_final on the grid with spacing `delta`.
    pub fn reference_at(&self, delta: f64) -> Result<ComplexWave> {
        match self.reference {
            Reference::Analytic => {
                if self.potential != PotentialDescriptor::Zero {
                    return Err(invalid("reference", "the analytic packet needs a zero potential"));
                }
                let (spec, _) = make_diffusive_spec(delta, self.diffusivity, self.sites(delta)?)?;
                Ok(gaussian_wave(&self.packet, self.diffusivity, &spec.positions(), self.t_final))
            }
            Reference::CrankNicolson { dt, .. } => {
                let (spec, _) = make_diffusive_spec(delta, self.diffusivity, self.sites(delta)?)?;
                let pot = sample_potential(&self.potential, &spec)?;
                let psi0 = gaussian_wave(&self.packet, self.diffusivity, &spec.positions(), 0.0);
                let n = (self.t_final / dt).round() as u64;
                cn_evolve(&psi0, delta, self.diffusivity, &pot, self.t_final / n as f64, n, CnDirection::Forward)
            }
        }
    }

    /// L2 errors for each δ (which must halve) and their empirical orders.
    pub fn convergence(&self, deltas: &[f64]) -> Result<ConvergenceReport> {
        let finest = deltas.iter().copied().fold(f64::INFINITY, f64::min);
        let fine = match self.reference {
            Reference::CrankNicolson { refine, .. } => {
                if refine == 0 {
                    return Err(invalid("refine", "must be positive"));
                }
                Some((finest / refine as f64, self.reference_at(finest / refine as f64)?))
            }
            Reference::Analytic => None,
        };
        let mut errors = Vec::with_capacity(deltas.len());
        for &d in deltas {
            let run = self.stencil(d)?;
            let reference = match &fine {
                None => self.reference_at(d)?,
                Some((fd, wave)) => {
                    let stride = (d / fd).round() as usize;
                    ComplexWave::new(wave.values.iter().step_by(stride).copied().collect(), wave.t, wave.role)
                }
            };
            errors.push(l2_error_waves(&run.wave, &reference, d)?);
        }
        empirical_order(deltas, &errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case(reference: Reference, potential: PotentialDescriptor) -> DiffusiveCase {
        DiffusiveCase {
            diffusivity: 0.5,
            t_final: 0.5,
            length: 40.0,
            packet: GaussianPacket::new(1.0, 1.0, 0.0).unwrap(),
            potential,
            reference,
            alpha_site: AlphaSite::Departure,
        }
    }

    #[test]
    fn free_packet_errors_match_the_prototype() {
        let r = case(Reference::Analytic, PotentialDescriptor::Zero)
            .convergence(&[0.125, 0.0625])
            .unwrap();
        assert!((r.errors[0] - 0.1037).abs() < 5e-4, "{:?}", r.errors);
        assert!((r.errors[1] - 0.0528).abs() < 5e-4, "{:?}", r.errors);
    }

    #[test]
    fn rejects_incommensurate_spacing() {
        let c = case(Reference::Analytic, PotentialDescriptor::Zero);
        assert!(c.stencil(0.3).is_err());
        // 40 / 0.1 sites is fine but 0.5 / ε = 100 steps is not a multiple of 8
        assert!(c.stencil(0.1).is_err());
    }

    #[test]
    fn analytic_reference_needs_zero_potential() {
        let c = case(Reference::Analytic, PotentialDescriptor::Cosine { amplitude: 1.0, periods: 4.0 });
        assert!(c.reference_at(0.125).is_err());
    }
}
