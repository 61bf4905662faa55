use super::path::deposit_hop_pair;
use super::tally::WeightedFields;
use crate::error::{Error, Result};
use crate::lattice::{ChargeField, LatticeSpec, StepProbabilities};

/// Largest horizon [`enumerate_exact`] accepts.
pub const ENUMERATION_LIMIT: usize = 16;

/// Exact expected charge for slices t = 0..=t_max by summing over every
/// rhombus sequence of the stutter process, weighted by its probability.
///
/// Run lengths longer than the remaining horizon are lumped into one branch
/// with their tail probability, so the result is exact rather than sampled.
/// Each rhombus is deposited with the probability of its prefix, which
/// equals the summed weight of all its completions. Charges wrap onto the
/// periodic window of `spec`.
pub fn enumerate_exact(
    spec: &LatticeSpec,
    probs: StepProbabilities,
    t_max: usize,
) -> Result<Vec<ChargeField>> {
    Ok(enumerate_with_mass(spec, probs, t_max)?.0)
}

// Also returns the total probability of all terminal branches (should be 1).
fn enumerate_with_mass(
    spec: &LatticeSpec,
    probs: StepProbabilities,
    t_max: usize,
) -> Result<(Vec<ChargeField>, f64)> {
    if t_max > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            t_max,
            limit: ENUMERATION_LIMIT,
            estimated_branches: 2f64.powi(t_max as i32 + 1),
        });
    }
    let mut e = Enumerator {
        probs,
        horizon: t_max as u64 + 1,
        sink: WeightedFields::new(spec, t_max + 1),
        terminal_mass: 0.0,
    };
    e.rhombus(0, 0, 1, 1.0);
    Ok((e.sink.fields, e.terminal_mass))
}

struct Enumerator {
    probs: StepProbabilities,
    horizon: u64,
    sink: WeightedFields,
    terminal_mass: f64,
}

impl Enumerator {
    // P(run = len) for len <= remaining; len = remaining + 1 stands for "longer".
    fn run_probability(&self, len: u64, remaining: u64) -> f64 {
        let beta = self.probs.beta;
        if len > remaining {
            beta.powi(remaining as i32)
        } else {
            beta.powi(len as i32 - 1) * self.probs.alpha
        }
    }

    /// Rhombus opening at (z0, t0) with forward direction d: the forward side
    /// runs p hops along d then q against it; the return side runs q against
    /// d then p along it.
    fn rhombus(&mut self, z0: i64, t0: u64, d: i8, weight: f64) {
        let remaining = self.horizon - t0;
        for p in 1..=remaining + 1 {
            let wp = weight * self.run_probability(p, remaining);
            for q in 1..=remaining + 1 {
                let w = wp * self.run_probability(q, remaining);
                self.deposit_rhombus(z0, t0, d, p, q, w);
                if p + q < remaining {
                    let z1 = z0 + i64::from(d) * (p as i64 - q as i64);
                    self.rhombus(z1, t0 + p + q, -d, w);
                } else {
                    self.terminal_mass += w;
                }
            }
        }
    }

    fn deposit_rhombus(&mut self, z0: i64, t0: u64, d: i8, p: u64, q: u64, w: f64) {
        self.sink.weight = w;
        let end = (t0 + p + q).min(self.horizon);
        let (mut zf, mut zr) = (z0, z0);
        for s in 0..end - t0 {
            let df = if s < p { d } else { -d };
            let dr = if s < q { -d } else { d };
            deposit_hop_pair(&mut self.sink, t0 + s, (zf, df), (zr, dr));
            zf += i64::from(df);
            zr += i64::from(dr);
        }
    }
}
