//! Deterministic iteration of the envelope difference equations.
//!
//! With φ keyed by the hop leaving (z, t), one step reads
//!
//! ```text
//! φ1'(z) = β φ1(z+1) − α φ2(z−1)      φ3'(z) = β φ3(z+1) + α φ4(z−1)
//! φ2'(z) = β φ2(z−1) + α φ1(z+1)      φ4'(z) = β φ4(z−1) − α φ3(z+1)
//! ```
//!
//! where each coefficient is evaluated at the site the incoming hop left
//! (or at z under [`AlphaSite::Arrival`]).

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::lattice::{
    AlphaSite, Boundary, ChargeField, EnvelopeDensities, LatticeSpec, Normalization, ReversalField,
    StepProbabilities, SCALING_RTOL,
};

/// Micro-steps per stroboscopic macro-step.
pub const STROBE_STEPS: u64 = 8;
/// (√2)^8, applied after every macro-step.
pub const STROBE_GAIN: f64 = 16.0;

/// Sign pattern of the scattering terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scattering {
    /// Charge flips sign on the reversal that starts a rhombus.
    #[default]
    Entwined,
    /// Both scattering terms positive. Diagnostic only.
    Unentwined,
}

/// Per-site coefficients of one envelope step. For output site z:
/// `from_right` multiplies data at z+1 and `from_left` data at z−1.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeStencil {
    pub stay_from_right: Vec<f64>,
    pub turn_from_right: Vec<f64>,
    pub stay_from_left: Vec<f64>,
    pub turn_from_left: Vec<f64>,
    pub scattering: Scattering,
    pub boundary: Boundary,
}

impl EnvelopeStencil {
    pub fn new(
        spec: &LatticeSpec,
        alpha: &ReversalField,
        site: AlphaSite,
        scattering: Scattering,
    ) -> Result<Self> {
        alpha.check_sites(spec.n_sites)?;
        let n = spec.n_sites as i64;
        let coeff = |z: i64, offset: i64| -> StepProbabilities {
            match site {
                AlphaSite::Departure => alpha.at(z + offset),
                AlphaSite::Arrival => alpha.at(z),
            }
        };
        let mut s = Self {
            stay_from_right: Vec::with_capacity(spec.n_sites),
            turn_from_right: Vec::with_capacity(spec.n_sites),
            stay_from_left: Vec::with_capacity(spec.n_sites),
            turn_from_left: Vec::with_capacity(spec.n_sites),
            scattering,
            boundary: spec.boundary,
        };
        for z in 0..n {
            let r = coeff(z, 1);
            let l = coeff(z, -1);
            s.stay_from_right.push(r.beta);
            s.turn_from_right.push(r.alpha);
            s.stay_from_left.push(l.beta);
            s.turn_from_left.push(l.alpha);
        }
        Ok(s)
    }

    /// Uniform-α stencil.
    pub fn uniform(spec: &LatticeSpec, probs: StepProbabilities, scattering: Scattering) -> Self {
        let n = spec.n_sites;
        Self {
            stay_from_right: vec![probs.beta; n],
            turn_from_right: vec![probs.alpha; n],
            stay_from_left: vec![probs.beta; n],
            turn_from_left: vec![probs.alpha; n],
            scattering,
            boundary: spec.boundary,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.stay_from_right.len()
    }

    // (value at z−1, value at z+1); zero outside an unbounded window
    fn neighbours(&self, v: &[f64], z: usize) -> (f64, f64) {
        let n = v.len();
        match self.boundary {
            Boundary::Periodic => (v[(z + n - 1) % n], v[(z + 1) % n]),
            Boundary::Unbounded => (
                if z == 0 { 0.0 } else { v[z - 1] },
                if z + 1 == n { 0.0 } else { v[z + 1] },
            ),
        }
    }

    /// One step of (φ1, φ2).
    pub fn step_left(&self, d: &EnvelopeDensities) -> Result<EnvelopeDensities> {
        self.check(d)?;
        let n = d.len();
        let mut out = EnvelopeDensities::zeros(n);
        for z in 0..n {
            let (_, m_r) = self.neighbours(&d.minus, z);
            let (p_l, _) = self.neighbours(&d.plus, z);
            let stay_m = self.stay_from_right[z] * m_r;
            let turn_m = self.turn_from_left[z] * p_l;
            let stay_p = self.stay_from_left[z] * p_l;
            let turn_p = self.turn_from_right[z] * m_r;
            out.minus[z] = match self.scattering {
                Scattering::Entwined => stay_m - turn_m,
                Scattering::Unentwined => stay_m + turn_m,
            };
            out.plus[z] = stay_p + turn_p;
        }
        Ok(out)
    }

    /// One step of (φ3, φ4).
    pub fn step_right(&self, d: &EnvelopeDensities) -> Result<EnvelopeDensities> {
        self.check(d)?;
        let n = d.len();
        let mut out = EnvelopeDensities::zeros(n);
        for z in 0..n {
            let (_, m_r) = self.neighbours(&d.minus, z);
            let (p_l, _) = self.neighbours(&d.plus, z);
            let stay_m = self.stay_from_right[z] * m_r;
            let turn_m = self.turn_from_left[z] * p_l;
            let stay_p = self.stay_from_left[z] * p_l;
            let turn_p = self.turn_from_right[z] * m_r;
            out.minus[z] = stay_m + turn_m;
            out.plus[z] = match self.scattering {
                Scattering::Entwined => stay_p - turn_p,
                Scattering::Unentwined => stay_p + turn_p,
            };
        }
        Ok(out)
    }

    /// One step of all four densities. The normalization label is kept.
    pub fn step(&self, field: &ChargeField) -> Result<ChargeField> {
        Ok(ChargeField {
            left: self.step_left(&field.left)?,
            right: self.step_right(&field.right)?,
            t_index: field.t_index + 1,
            normalization: field.normalization,
        })
    }

    fn check(&self, d: &EnvelopeDensities) -> Result<()> {
        check_len(self.n_sites(), d.minus.len())?;
        check_len(self.n_sites(), d.plus.len())
    }
}

/// Slices t_index, t_index+1, …, t_index+n_steps (n_steps + 1 fields).
pub fn evolve_slices(stencil: &EnvelopeStencil, initial: &ChargeField, n_steps: u64) -> Result<Vec<ChargeField>> {
    initial.validate()?;
    let mut out = Vec::with_capacity(n_steps as usize + 1);
    out.push(initial.clone());
    for _ in 0..n_steps {
        let next = stencil.step(out.last().expect("non-empty"))?;
        out.push(next);
    }
    Ok(out)
}

/// Final slice after `n_steps` steps.
pub fn evolve_to(stencil: &EnvelopeStencil, initial: &ChargeField, n_steps: u64) -> Result<ChargeField> {
    initial.validate()?;
    let mut f = initial.clone();
    for _ in 0..n_steps {
        f = stencil.step(&f)?;
    }
    Ok(f)
}

/// Multiplies a raw diffusive field by (√2)^{t_index}.
pub fn renormalize(field: &ChargeField) -> Result<ChargeField> {
    if field.normalization == Normalization::Renormalized {
        return Err(Error::AlreadyRenormalized);
    }
    let mut out = field.clone();
    let exp = i32::try_from(field.t_index).map_err(|_| invalid("t_index", "too large to renormalize"))?;
    out.scale(std::f64::consts::SQRT_2.powi(exp));
    out.normalization = Normalization::Renormalized;
    Ok(out)
}

/// Advances `n_macro` macro-steps of eight raw steps each, multiplying by 16
/// after every macro-step so the amplitude stays O(1). A raw input is
/// renormalized first; the result is labelled renormalized.
pub fn stroboscope_evolve(stencil: &EnvelopeStencil, initial: &ChargeField, n_macro: u64) -> Result<ChargeField> {
    let mut f = match initial.normalization {
        Normalization::Raw => renormalize(initial)?,
        Normalization::Renormalized => initial.clone(),
    };
    f.validate()?;
    for _ in 0..n_macro {
        f = evolve_to(stencil, &f, STROBE_STEPS)?;
        f.scale(STROBE_GAIN);
    }
    Ok(f)
}

/// How a fixed-velocity run is normalized per step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedVelocityNormalization {
    /// Divide by √((1 − aε)² + (aε)²), the modulus of the zero-mode
    /// multiplier, so the homogeneous solution neither grows nor decays.
    #[default]
    ZeroMode,
    /// Raw stencil; homogeneous data decay like e^{−a t}.
    None,
}

impl FixedVelocityNormalization {
    pub fn per_step_factor(self, a_eps: f64) -> f64 {
        match self {
            FixedVelocityNormalization::ZeroMode => 1.0 / (1.0 - a_eps).hypot(a_eps),
            FixedVelocityNormalization::None => 1.0,
        }
    }
}

/// Runs the stencil in the fixed-velocity regime δ = cε, α = aε.
pub fn evolve_fixed_velocity(
    spec: &LatticeSpec,
    c: f64,
    a: f64,
    initial: &ChargeField,
    n_steps: u64,
    normalization: FixedVelocityNormalization,
) -> Result<ChargeField> {
    if ((spec.delta - c * spec.epsilon) / spec.delta).abs() > SCALING_RTOL {
        return Err(Error::WrongScaling {
            expected: "fixed-velocity (delta = c * epsilon)",
        });
    }
    let a_eps = a * spec.epsilon;
    let probs = StepProbabilities::new(a_eps).map_err(|_| invalid("a", format!("a * epsilon = {a_eps} must lie in (0, 1)")))?;
    let stencil = EnvelopeStencil::uniform(spec, probs, Scattering::Entwined);
    let factor = normalization.per_step_factor(a_eps);
    initial.validate()?;
    let mut f = initial.clone();
    for _ in 0..n_steps {
        f = stencil.step(&f)?;
        if factor != 1.0 {
            f.scale(factor);
        }
    }
    f.normalization = match normalization {
        FixedVelocityNormalization::ZeroMode => Normalization::Renormalized,
        FixedVelocityNormalization::None => initial.normalization,
    };
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_fixed_velocity_spec, PotentialDescriptor, Potential};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spec(n: usize) -> LatticeSpec {
        LatticeSpec::new(1.0, 1.0, n).unwrap()
    }

    fn half(n: usize) -> EnvelopeStencil {
        EnvelopeStencil::uniform(&spec(n), StepProbabilities::new(0.5).unwrap(), Scattering::Entwined)
    }

    #[test]
    fn point_source_first_two_steps() {
        let s = spec(16);
        let o = s.origin();
        let slices = evolve_slices(&half(16), &ChargeField::point_source(&s), 2).unwrap();
        let f1 = &slices[1];
        assert_eq!(f1.phi1()[o - 1], -0.5);
        assert_eq!(f1.phi2()[o - 1], -0.5);
        assert_eq!(f1.phi3()[o + 1], 0.5);
        assert_eq!(f1.phi4()[o + 1], 0.5);
        assert_eq!(f1.total_charge(), 0.0);
        let f2 = &slices[2];
        assert_eq!(f2.phi1()[o - 2], -0.25);
        assert_eq!(f2.phi2()[o - 2], -0.25);
        assert_eq!(f2.phi1()[o], 0.25);
        assert_eq!(f2.phi2()[o], -0.25);
        assert_eq!(f2.phi3()[o], 0.25);
        assert_eq!(f2.phi4()[o], -0.25);
        assert_eq!(f2.phi3()[o + 2], 0.25);
        assert_eq!(f2.phi4()[o + 2], 0.25);
        assert_eq!(f2.t_index, 2);
    }

    #[test]
    fn conjugate_seed_stays_conjugate_bitwise() {
        let s = LatticeSpec::new(0.1, 0.01, 64).unwrap();
        let pot = crate::lattice::sample_potential(&PotentialDescriptor::Cosine { amplitude: 3.0, periods: 2.0 }, &s).unwrap();
        let (alpha, _) = ReversalField::from_potential(&pot, s.epsilon).unwrap();
        let st = EnvelopeStencil::new(&s, &alpha, AlphaSite::Departure, Scattering::Entwined).unwrap();
        let left = EnvelopeDensities {
            minus: (0..64).map(|j| (j as f64 * 0.3).sin()).collect(),
            plus: (0..64).map(|j| (j as f64 * 0.7).cos()).collect(),
        };
        let f = evolve_to(&st, &ChargeField::with_conjugate_right(left), 50).unwrap();
        for z in 0..64 {
            assert_eq!(f.phi3()[z].to_bits(), (-f.phi1()[z]).to_bits());
            assert_eq!(f.phi4()[z].to_bits(), f.phi2()[z].to_bits());
        }
    }

    #[test]
    fn eight_strobed_steps_return_the_zero_mode() {
        let mut f = ChargeField::zeros(8);
        f.left.minus.iter_mut().for_each(|x| *x = 1.0);
        f.left.plus.iter_mut().for_each(|x| *x = -0.5);
        f.normalization = Normalization::Renormalized;
        let g = stroboscope_evolve(&half(8), &f, 3).unwrap();
        for z in 0..8 {
            assert_abs_diff_eq!(g.phi1()[z], 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(g.phi2()[z], -0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn sums_rotate_like_the_zero_mode() {
        let st = EnvelopeStencil::uniform(&spec(32), StepProbabilities::new(0.3).unwrap(), Scattering::Entwined);
        let mut f = ChargeField::zeros(32);
        for z in 0..32 {
            f.left.minus[z] = (z as f64).sin();
            f.left.plus[z] = (z as f64 * 0.5).cos();
        }
        let s1: f64 = f.phi1().iter().sum();
        let s2: f64 = f.phi2().iter().sum();
        let g = st.step(&f).unwrap();
        assert_abs_diff_eq!(g.phi1().iter().sum::<f64>(), 0.7 * s1 - 0.3 * s2, epsilon = 1e-12);
        assert_abs_diff_eq!(g.phi2().iter().sum::<f64>(), 0.7 * s2 + 0.3 * s1, epsilon = 1e-12);
    }

    #[test]
    fn renormalize_once() {
        let s = spec(8);
        let f = evolve_to(&half(8), &ChargeField::point_source(&s), 4).unwrap();
        let r = renormalize(&f).unwrap();
        assert_abs_diff_eq!(r.total_charge(), 0.0, epsilon = 1e-15);
        assert_eq!(renormalize(&r), Err(Error::AlreadyRenormalized));
        assert_abs_diff_eq!(r.phi1()[s.origin() - 4], -0.25, epsilon = 1e-15);
    }

    #[test]
    fn unbounded_window_loses_charge_at_edges() {
        let probs = StepProbabilities::new(0.5).unwrap();
        let run = |b: Boundary| {
            let s = spec(3).with_boundary(b);
            let st = EnvelopeStencil::uniform(&s, probs, Scattering::Entwined);
            evolve_to(&st, &ChargeField::point_source(&s), 2).unwrap()
        };
        let open = run(Boundary::Unbounded);
        assert_eq!(open.phi1(), &[0.0, 0.25, 0.0]);
        assert_eq!(open.phi2(), &[0.0, -0.25, 0.0]);
        // the periodic window wraps the −z front onto site 2
        assert_eq!(run(Boundary::Periodic).phi1()[2], -0.25);
    }

    #[test]
    fn fixed_velocity_requires_matching_spec() {
        let s = LatticeSpec::new(0.1, 0.01, 8).unwrap();
        let f = ChargeField::zeros(8);
        let err = evolve_fixed_velocity(&s, 1.0, 1.0, &f, 1, FixedVelocityNormalization::None);
        assert!(matches!(err, Err(Error::WrongScaling { .. })));
    }

    // Homogeneous data: φ1 = −sin(at), φ2 = cos(at) up to an O(a²εt) phase error.
    #[test]
    fn fixed_velocity_zero_mode_rotates() {
        let (c, a, eps) = (1.0, 1.0, 1e-3);
        let (s, _) = make_fixed_velocity_spec(eps, c, a, 4).unwrap();
        let mut f = ChargeField::zeros(4);
        f.left.plus.iter_mut().for_each(|x| *x = 1.0);
        let n = 1000u64;
        let g = evolve_fixed_velocity(&s, c, a, &f, n, FixedVelocityNormalization::ZeroMode).unwrap();
        let t = n as f64 * eps;
        let bound = 2.0 * a * a * eps * t;
        assert!((g.phi1()[0] + t.sin()).abs() < bound);
        assert!((g.phi2()[0] - t.cos()).abs() < bound);
        let raw = evolve_fixed_velocity(&s, c, a, &f, n, FixedVelocityNormalization::None).unwrap();
        let modulus = raw.phi1()[0].hypot(raw.phi2()[0]);
        assert_abs_diff_eq!(modulus, (-a * t).exp(), epsilon = 1e-3);
    }

    #[test]
    fn zero_potential_field_equals_uniform_stencil() {
        let s = spec(10);
        let (alpha, _) = ReversalField::from_potential(&Potential::zero(10), 1.0).unwrap();
        let a = EnvelopeStencil::new(&s, &alpha, AlphaSite::Departure, Scattering::Entwined).unwrap();
        assert_eq!(a, half(10));
    }

    proptest! {
        #[test]
        fn step_is_linear(
            x in proptest::collection::vec(-1.0f64..1.0, 24),
            y in proptest::collection::vec(-1.0f64..1.0, 24),
            a in -2.0f64..2.0,
            alpha in 0.05f64..0.95,
        ) {
            let st = EnvelopeStencil::uniform(&spec(6), StepProbabilities::new(alpha).unwrap(), Scattering::Entwined);
            let field = |v: &[f64]| {
                let mut f = ChargeField::zeros(6);
                for c in 0..4 {
                    f.component_mut(c).copy_from_slice(&v[c * 6..c * 6 + 6]);
                }
                f
            };
            let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + q).collect();
            let lhs = st.step(&field(&combo)).unwrap();
            let fx = st.step(&field(&x)).unwrap();
            let fy = st.step(&field(&y)).unwrap();
            for c in 0..4 {
                for z in 0..6 {
                    let rhs = a * fx.component(c)[z] + fy.component(c)[z];
                    prop_assert!((lhs.component(c)[z] - rhs).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn point_source_charge_is_conserved(alpha in 0.05f64..0.95, steps in 1u64..30) {
            let s = spec(64);
            let st = EnvelopeStencil::uniform(&s, StepProbabilities::new(alpha).unwrap(), Scattering::Entwined);
            let f = evolve_to(&st, &ChargeField::point_source(&s), steps).unwrap();
            prop_assert!(f.total_charge().abs() < 1e-12);
        }
    }
}
