//! Lattice geometry, scaling regimes, step probabilities, potentials and the
//! four-component charge field.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};

/// Relative tolerance used when checking the scaling relations.
pub const SCALING_RTOL: f64 = 1e-12;

/// Largest |2 v ε| for which the logistic reversal probability is evaluated
/// unclamped. Beyond it α would round to exactly 0 or 1 in double precision.
pub const REVERSAL_SATURATION: f64 = 36.0;

/// Default bound on |v| accepted by [`sample_potential`].
pub const DEFAULT_POTENTIAL_BOUND: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Unbounded,
}

/// Lattice spacing δ, time step ε and the size of the periodic window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub delta: f64,
    pub epsilon: f64,
    pub n_sites: usize,
    pub boundary: Boundary,
}

impl LatticeSpec {
    pub fn new(delta: f64, epsilon: f64, n_sites: usize) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(invalid("delta", format!("must be positive, got {delta}")));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        if n_sites < 2 {
            return Err(invalid("n_sites", format!("must be at least 2, got {n_sites}")));
        }
        Ok(Self {
            delta,
            epsilon,
            n_sites,
            boundary: Boundary::Periodic,
        })
    }

    /// Site index of the point z = 0.
    pub fn origin(&self) -> usize {
        self.n_sites / 2
    }

    /// Physical coordinate of site `j`, measured from the central site.
    pub fn position(&self, j: usize) -> f64 {
        (j as f64 - self.origin() as f64) * self.delta
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_sites).map(|j| self.position(j)).collect()
    }

    pub fn domain_length(&self) -> f64 {
        self.n_sites as f64 * self.delta
    }

    /// Lattice hopping speed δ/ε.
    pub fn hopping_speed(&self) -> f64 {
        self.delta / self.epsilon
    }

    /// Wraps an unbounded lattice coordinate (z in units of δ relative to the
    /// origin) onto a site index of the periodic window.
    pub fn wrap(&self, z: i64) -> usize {
        (self.origin() as i64 + z).rem_euclid(self.n_sites as i64) as usize
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }
}

/// The continuum scaling under which the lattice is refined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// δ²/(2ε) = D.
    Diffusive { diffusivity: f64 },
    /// δ/ε = c and α = a ε.
    FixedVelocity { c: f64, a: f64 },
}

impl ScalingMode {
    pub fn name(&self) -> &'static str {
        match self {
            ScalingMode::Diffusive { .. } => "diffusive",
            ScalingMode::FixedVelocity { .. } => "fixed-velocity",
        }
    }

    /// Checks the scaling relation against a lattice.
    pub fn validate(&self, spec: &LatticeSpec) -> Result<()> {
        match *self {
            ScalingMode::Diffusive { diffusivity } => {
                if !(diffusivity.is_finite() && diffusivity > 0.0) {
                    return Err(invalid("D", "diffusivity must be positive"));
                }
                let implied = spec.delta * spec.delta / (2.0 * spec.epsilon);
                if ((implied - diffusivity) / diffusivity).abs() > SCALING_RTOL {
                    return Err(invalid(
                        "epsilon",
                        format!("delta^2/(2 epsilon) = {implied} differs from D = {diffusivity}"),
                    ));
                }
            }
            ScalingMode::FixedVelocity { c, a } => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(invalid("c", "speed must be positive"));
                }
                if !(a.is_finite() && a > 0.0) {
                    return Err(invalid("a", "rate must be positive"));
                }
                if a * spec.epsilon >= 1.0 {
                    return Err(invalid(
                        "a",
                        format!("a*epsilon = {} is not a probability below 1", a * spec.epsilon),
                    ));
                }
                let speed = spec.hopping_speed();
                if ((speed - c) / c).abs() > SCALING_RTOL {
                    return Err(invalid(
                        "delta",
                        format!("delta/epsilon = {speed} differs from c = {c}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Builds a lattice with ε = δ²/(2D).
pub fn make_diffusive_spec(
    delta: f64,
    diffusivity: f64,
    n_sites: usize,
) -> Result<(LatticeSpec, ScalingMode)> {
    if !(diffusivity.is_finite() && diffusivity > 0.0) {
        return Err(invalid("D", format!("must be positive, got {diffusivity}")));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid("delta", format!("must be positive, got {delta}")));
    }
    let epsilon = delta * delta / (2.0 * diffusivity);
    let spec = LatticeSpec::new(delta, epsilon, n_sites)?;
    let mode = ScalingMode::Diffusive { diffusivity };
    mode.validate(&spec)?;
    Ok((spec, mode))
}

/// Builds a lattice with δ = c ε; the per-step reversal probability is a ε.
pub fn make_fixed_velocity_spec(
    epsilon: f64,
    c: f64,
    a: f64,
    n_sites: usize,
) -> Result<(LatticeSpec, ScalingMode)> {
    if !(c.is_finite() && c > 0.0) {
        return Err(invalid("c", format!("must be positive, got {c}")));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(invalid("a", format!("must be positive, got {a}")));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
    }
    if a * epsilon >= 1.0 {
        return Err(invalid(
            "a",
            format!("reversal probability a*epsilon = {} must be below 1", a * epsilon),
        ));
    }
    let spec = LatticeSpec::new(c * epsilon, epsilon, n_sites)?;
    let mode = ScalingMode::FixedVelocity { c, a };
    mode.validate(&spec)?;
    Ok((spec, mode))
}

/// ħ, m and c together with the quantities they fix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub m: f64,
    pub c: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            m: 1.0,
            c: 1.0,
        }
    }
}

impl PhysicalConstants {
    /// Inverse mean free time a = m c² / ħ.
    pub fn a(&self) -> f64 {
        self.m * self.c * self.c / self.hbar
    }

    /// Mean free time τ = 1/a.
    pub fn mean_free_time(&self) -> f64 {
        1.0 / self.a()
    }

    /// Mean free path l = c τ, which coincides with the Compton length.
    pub fn mean_free_path(&self) -> f64 {
        self.c / self.a()
    }
}

/// Compton length λ_C = ħ/(m c).
pub fn compton_scale(pc: &PhysicalConstants) -> Result<f64> {
    if !(pc.m.is_finite() && pc.m > 0.0) {
        return Err(invalid("m", "a massless particle has no Compton scale"));
    }
    if !(pc.c.is_finite() && pc.c > 0.0) {
        return Err(invalid("c", "speed must be positive"));
    }
    if !(pc.hbar.is_finite() && pc.hbar > 0.0) {
        return Err(invalid("hbar", "must be positive"));
    }
    Ok(pc.hbar / (pc.m * pc.c))
}

/// Reversal (α) and continuation (β) probabilities with α + β = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepProbabilities {
    pub alpha: f64,
    pub beta: f64,
}

impl StepProbabilities {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
        }
        Ok(Self::from_smaller_side(alpha))
    }

    // Computes 1 - p from the side with p <= 1/2 so that the rounded pair
    // still sums to exactly 1.
    fn from_smaller_side(alpha: f64) -> Self {
        if alpha <= 0.5 {
            Self {
                alpha,
                beta: 1.0 - alpha,
            }
        } else {
            let beta = 1.0 - alpha;
            Self {
                alpha: 1.0 - beta,
                beta,
            }
        }
    }

    /// Probabilities with no direction preference; also used for α = 0 in
    /// pure-transport diagnostics, which [`StepProbabilities::new`] rejects.
    pub fn unchecked(alpha: f64) -> Self {
        Self {
            alpha,
            beta: 1.0 - alpha,
        }
    }
}

/// Result of [`reversal_probability`]; `saturated` reports that |2vε| was
/// clamped to [`REVERSAL_SATURATION`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReversalProbability {
    pub probs: StepProbabilities,
    pub saturated: bool,
}

/// α = e^{vε} / (e^{-vε} + e^{vε}), evaluated as the logistic 1/(1 + e^{-2vε}).
pub fn reversal_probability(v: f64, epsilon: f64) -> Result<ReversalProbability> {
    if !v.is_finite() {
        return Err(invalid("v", format!("potential must be finite, got {v}")));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
    }
    let x = 2.0 * v * epsilon;
    let saturated = x.abs() > REVERSAL_SATURATION;
    let x = x.clamp(-REVERSAL_SATURATION, REVERSAL_SATURATION);
    // smaller of the two probabilities, always <= 1/2
    let small = 1.0 / (1.0 + x.abs().exp());
    let probs = if x >= 0.0 {
        StepProbabilities {
            alpha: 1.0 - small,
            beta: small,
        }
    } else {
        StepProbabilities {
            alpha: small,
            beta: 1.0 - small,
        }
    };
    Ok(ReversalProbability { probs, saturated })
}

/// Built-in potential shapes. Positions `x` are measured from the first site
/// of the window, x_j = j δ, so a domain of length L spans [0, L).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum PotentialDescriptor {
    #[default]
    Zero,
    /// `amplitude * cos(2π periods x / L)`.
    Cosine { amplitude: f64, periods: f64 },
    /// `height` on `start <= x < end`, zero elsewhere.
    Barrier { height: f64, start: f64, end: f64 },
    /// `-depth` on `start <= x < end`, zero elsewhere.
    Well { depth: f64, start: f64, end: f64 },
}


impl PotentialDescriptor {
    fn params(&self) -> Vec<f64> {
        match *self {
            PotentialDescriptor::Zero => vec![],
            PotentialDescriptor::Cosine { amplitude, periods } => vec![amplitude, periods],
            PotentialDescriptor::Barrier { height, start, end } => vec![height, start, end],
            PotentialDescriptor::Well { depth, start, end } => vec![depth, start, end],
        }
    }

    /// Largest |v| the descriptor can produce.
    pub fn sup_norm(&self) -> f64 {
        match *self {
            PotentialDescriptor::Zero => 0.0,
            PotentialDescriptor::Cosine { amplitude, .. } => amplitude.abs(),
            PotentialDescriptor::Barrier { height, .. } => height.abs(),
            PotentialDescriptor::Well { depth, .. } => depth.abs(),
        }
    }

    pub fn eval(&self, x: f64, domain_length: f64) -> f64 {
        match *self {
            PotentialDescriptor::Zero => 0.0,
            PotentialDescriptor::Cosine { amplitude, periods } => {
                amplitude * (2.0 * std::f64::consts::PI * periods * x / domain_length).cos()
            }
            PotentialDescriptor::Barrier { height, start, end } => {
                if x >= start && x < end {
                    height
                } else {
                    0.0
                }
            }
            PotentialDescriptor::Well { depth, start, end } => {
                if x >= start && x < end {
                    -depth
                } else {
                    0.0
                }
            }
        }
    }
}

/// Per-site samples of a static potential v(z).
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub values: Vec<f64>,
    pub descriptor: PotentialDescriptor,
}

impl Potential {
    pub fn zero(n_sites: usize) -> Self {
        Self {
            values: vec![0.0; n_sites],
            descriptor: PotentialDescriptor::Zero,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

pub fn sample_potential(descriptor: &PotentialDescriptor, spec: &LatticeSpec) -> Result<Potential> {
    sample_potential_bounded(descriptor, spec, DEFAULT_POTENTIAL_BOUND)
}

pub fn sample_potential_bounded(
    descriptor: &PotentialDescriptor,
    spec: &LatticeSpec,
    bound: f64,
) -> Result<Potential> {
    if descriptor.params().iter().any(|p| !p.is_finite()) {
        return Err(invalid("potential", "descriptor parameters must be finite"));
    }
    if descriptor.sup_norm() >= bound {
        return Err(invalid(
            "potential",
            format!("|v| reaches {} which is not below the bound {bound}", descriptor.sup_norm()),
        ));
    }
    let length = spec.domain_length();
    let values = (0..spec.n_sites)
        .map(|j| descriptor.eval(j as f64 * spec.delta, length))
        .collect();
    Ok(Potential {
        values,
        descriptor: descriptor.clone(),
    })
}

/// Which end of a hop supplies the reversal probability.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSite {
    /// The site the incoming hop departed from (z ± δ for an update at z).
    #[default]
    Departure,
    /// The site where the direction decision is taken (z).
    Arrival,
}

/// Reversal probabilities over the lattice: uniform, or one per site.
#[derive(Debug, Clone, PartialEq)]
pub enum ReversalField {
    Uniform(StepProbabilities),
    PerSite(Vec<StepProbabilities>),
}

impl ReversalField {
    /// α(z) from a potential through [`reversal_probability`]. Returns the
    /// field and the number of saturated sites.
    pub fn from_potential(potential: &Potential, epsilon: f64) -> Result<(Self, usize)> {
        let mut saturated = 0;
        let mut probs = Vec::with_capacity(potential.values.len());
        for &v in &potential.values {
            let r = reversal_probability(v, epsilon)?;
            saturated += usize::from(r.saturated);
            probs.push(r.probs);
        }
        Ok((ReversalField::PerSite(probs), saturated))
    }

    /// Probabilities at a site index of the periodic window (wrapped).
    pub fn at(&self, site: i64) -> StepProbabilities {
        match self {
            ReversalField::Uniform(p) => *p,
            ReversalField::PerSite(v) => v[site.rem_euclid(v.len() as i64) as usize],
        }
    }

    pub fn check_sites(&self, n_sites: usize) -> Result<()> {
        match self {
            ReversalField::Uniform(_) => Ok(()),
            ReversalField::PerSite(v) => check_len(n_sites, v.len()),
        }
    }
}

/// Whether a field carries the (√2)^{t/ε} growth factor (or its
/// fixed-velocity counterpart).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Raw,
    Renormalized,
}

impl Normalization {
    pub fn as_str(&self) -> &'static str {
        match self {
            Normalization::Raw => "raw",
            Normalization::Renormalized => "renormalized",
        }
    }
}

/// Densities of one envelope: charge carried by hops in the −z direction
/// (`minus`) and in the +z direction (`plus`), indexed by departure site.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeDensities {
    pub minus: Vec<f64>,
    pub plus: Vec<f64>,
}

impl EnvelopeDensities {
    pub fn zeros(n: usize) -> Self {
        Self {
            minus: vec![0.0; n],
            plus: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.minus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minus.is_empty()
    }

    pub fn scale(&mut self, factor: f64) {
        self.minus.iter_mut().chain(self.plus.iter_mut()).for_each(|x| *x *= factor);
    }
}

/// φ1..φ4 at one time slice. φ1, φ2 belong to the left envelope and φ3, φ4
/// to the right one; odd indices count −z hops, even indices +z hops.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeField {
    pub left: EnvelopeDensities,
    pub right: EnvelopeDensities,
    pub t_index: u64,
    pub normalization: Normalization,
}

impl ChargeField {
    pub fn zeros(n_sites: usize) -> Self {
        Self {
            left: EnvelopeDensities::zeros(n_sites),
            right: EnvelopeDensities::zeros(n_sites),
            t_index: 0,
            normalization: Normalization::Raw,
        }
    }

    /// Expected charge of the first hop of an entwined pair launched at the
    /// origin: the left envelope leaves towards −z coloured −1, the right one
    /// towards +z coloured +1.
    pub fn point_source(spec: &LatticeSpec) -> Self {
        let mut field = Self::zeros(spec.n_sites);
        let o = spec.origin();
        field.left.minus[o] = -1.0;
        field.right.plus[o] = 1.0;
        field
    }

    /// Left-envelope data with the conjugate seed φ3 = −φ1, φ4 = φ2 on the right.
    pub fn with_conjugate_right(left: EnvelopeDensities) -> Self {
        let right = EnvelopeDensities {
            minus: left.minus.iter().map(|x| -x).collect(),
            plus: left.plus.clone(),
        };
        Self {
            left,
            right,
            t_index: 0,
            normalization: Normalization::Raw,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.left.len()
    }

    pub fn phi1(&self) -> &[f64] {
        &self.left.minus
    }
    pub fn phi2(&self) -> &[f64] {
        &self.left.plus
    }
    pub fn phi3(&self) -> &[f64] {
        &self.right.minus
    }
    pub fn phi4(&self) -> &[f64] {
        &self.right.plus
    }

    /// Component `i` in 0..4 (φ1..φ4).
    pub fn component(&self, i: usize) -> &[f64] {
        match i {
            0 => &self.left.minus,
            1 => &self.left.plus,
            2 => &self.right.minus,
            3 => &self.right.plus,
            _ => panic!("charge field has four components, asked for {i}"),
        }
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [f64] {
        match i {
            0 => &mut self.left.minus,
            1 => &mut self.left.plus,
            2 => &mut self.right.minus,
            3 => &mut self.right.plus,
            _ => panic!("charge field has four components, asked for {i}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_sites();
        for i in 0..4 {
            let c = self.component(i);
            check_len(n, c.len())?;
            if c.iter().any(|x| !x.is_finite()) {
                return Err(crate::Error::Numerical(format!(
                    "phi{} has non-finite entries at t_index {}",
                    i + 1,
                    self.t_index
                )));
            }
        }
        Ok(())
    }

    /// Net charge of the slice summed over all four components.
    pub fn total_charge(&self) -> f64 {
        (0..4).map(|i| self.component(i).iter().sum::<f64>()).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        self.left.scale(factor);
        self.right.scale(factor);
    }
}
