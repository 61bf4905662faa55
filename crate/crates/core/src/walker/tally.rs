use serde::{Deserialize, Serialize};

use super::path::{ChargeSink, EntwinedPath};
use crate::error::{invalid, Result};
use crate::lattice::{ChargeField, LatticeSpec, Normalization};

/// The (t, z) region charge is tallied over. Hops leaving slices
/// t >= `n_slices` are counted in `beyond_horizon` and not binned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyWindow {
    pub n_sites: usize,
    /// Site index of z = 0.
    pub origin: usize,
    pub n_slices: usize,
}

impl TallyWindow {
    pub fn for_spec(spec: &LatticeSpec, n_slices: usize) -> Self {
        Self {
            n_sites: spec.n_sites,
            origin: spec.origin(),
            n_slices,
        }
    }

    fn bins(&self) -> usize {
        self.n_slices * self.n_sites * 4
    }
}

/// Exact integer charge tallies over an ensemble of paths.
///
/// Bins are laid out as `((t * n_sites + site) * 4 + component)`. Each path
/// hits a bin at most once, so `sum_sq` counts hits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub window: TallyWindow,
    pub master_seed: u64,
    pub n_walkers: u64,
    pub sum: Vec<i64>,
    pub sum_sq: Vec<u64>,
    /// Hops inside the time horizon that fell outside the spatial window.
    pub outside_window: u64,
    /// Hops leaving slices at or past the horizon.
    pub beyond_horizon: u64,
}

impl EnsembleStats {
    pub fn new(window: TallyWindow, master_seed: u64) -> Self {
        Self {
            window,
            master_seed,
            n_walkers: 0,
            sum: vec![0; window.bins()],
            sum_sq: vec![0; window.bins()],
            outside_window: 0,
            beyond_horizon: 0,
        }
    }

    pub fn index(&self, t: usize, site: usize, component: usize) -> usize {
        (t * self.window.n_sites + site) * 4 + component
    }

    /// Adds one path's envelope charge.
    pub fn deposit_path(&mut self, path: &EntwinedPath) {
        let (left, right) = path.envelopes();
        left.deposit(self);
        right.deposit(self);
        self.n_walkers += 1;
    }

    /// Adds another tally over the same window. Integer sums make the result
    /// independent of merge order.
    pub fn merge(&mut self, other: &EnsembleStats) -> Result<()> {
        if self.window != other.window {
            return Err(invalid("window", "cannot merge tallies over different windows"));
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self.n_walkers += other.n_walkers;
        self.outside_window += other.outside_window;
        self.beyond_horizon += other.beyond_horizon;
        Ok(())
    }

    pub fn mean(&self, t: usize, site: usize, component: usize) -> f64 {
        if self.n_walkers == 0 {
            return 0.0;
        }
        self.sum[self.index(t, site, component)] as f64 / self.n_walkers as f64
    }

    /// Standard error of the bin mean (sample variance with n − 1).
    pub fn std_error(&self, t: usize, site: usize, component: usize) -> f64 {
        let n = self.n_walkers as f64;
        if self.n_walkers < 2 {
            return f64::INFINITY;
        }
        let i = self.index(t, site, component);
        let mean = self.sum[i] as f64 / n;
        let var = ((self.sum_sq[i] as f64 - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }

    fn fields_with(&self, f: impl Fn(&Self, usize, usize, usize) -> f64) -> Vec<ChargeField> {
        (0..self.window.n_slices)
            .map(|t| {
                let mut field = ChargeField::zeros(self.window.n_sites);
                field.t_index = t as u64;
                field.normalization = Normalization::Raw;
                for c in 0..4 {
                    let comp = field.component_mut(c);
                    for (site, v) in comp.iter_mut().enumerate() {
                        *v = f(self, t, site, c);
                    }
                }
                field
            })
            .collect()
    }

    /// Expected charge per slice, t = 0..n_slices.
    pub fn mean_fields(&self) -> Vec<ChargeField> {
        self.fields_with(Self::mean)
    }

    /// Standard errors laid out like [`EnsembleStats::mean_fields`].
    pub fn std_error_fields(&self) -> Vec<ChargeField> {
        self.fields_with(Self::std_error)
    }
}

impl ChargeSink for EnsembleStats {
    fn deposit(&mut self, t: u64, z: i64, component: usize, colour: i8) {
        if t as usize >= self.window.n_slices {
            self.beyond_horizon += 1;
            return;
        }
        let site = self.window.origin as i64 + z;
        if site < 0 || site as usize >= self.window.n_sites {
            self.outside_window += 1;
            return;
        }
        let i = self.index(t as usize, site as usize, component);
        self.sum[i] += i64::from(colour);
        self.sum_sq[i] += 1;
    }
}

/// Adds a path's envelope charge to `tally` and returns it.
pub fn deposit_charge(path: &EntwinedPath, mut tally: EnsembleStats) -> EnsembleStats {
    tally.deposit_path(path);
    tally
}

/// Real-valued accumulator used by the enumeration oracle and by loop-based
/// deposits; charges are scaled by the current `weight`.
#[derive(Debug, Clone)]
pub struct WeightedFields {
    pub fields: Vec<ChargeField>,
    pub spec: LatticeSpec,
    pub weight: f64,
}

impl WeightedFields {
    pub fn new(spec: &LatticeSpec, n_slices: usize) -> Self {
        let fields = (0..n_slices)
            .map(|t| {
                let mut f = ChargeField::zeros(spec.n_sites);
                f.t_index = t as u64;
                f
            })
            .collect();
        Self {
            fields,
            spec: *spec,
            weight: 1.0,
        }
    }
}

impl ChargeSink for WeightedFields {
    // periodic wrap, matching the stencil's boundary
    fn deposit(&mut self, t: u64, z: i64, component: usize, colour: i8) {
        if let Some(field) = self.fields.get_mut(t as usize) {
            let site = self.spec.wrap(z);
            field.component_mut(component)[site] += self.weight * f64::from(colour);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{ReversalField, StepProbabilities};
    use crate::walker::path::{generate_entwined_pair, WalkOptions};
    use rand::rngs::mock::StepRng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec() -> LatticeSpec {
        LatticeSpec::new(1.0, 1.0, 32).unwrap()
    }

    #[test]
    fn depositing_twice_doubles_every_bin() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let field = ReversalField::Uniform(StepProbabilities::new(0.4).unwrap());
        let path = generate_entwined_pair(&mut rng, &field, &WalkOptions::new(10)).unwrap();
        let window = TallyWindow::for_spec(&spec(), 10);
        let once = deposit_charge(&path, EnsembleStats::new(window, 0));
        let twice = deposit_charge(&path, once.clone());
        for (a, b) in once.sum.iter().zip(&twice.sum) {
            assert_eq!(2 * a, *b);
        }
        assert_eq!(twice.n_walkers, 2);
    }

    #[test]
    fn every_slice_balances() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let field = ReversalField::Uniform(StepProbabilities::new(0.3).unwrap());
        let window = TallyWindow::for_spec(&spec(), 12);
        let mut tally = EnsembleStats::new(window, 0);
        for _ in 0..200 {
            let path = generate_entwined_pair(&mut rng, &field, &WalkOptions::new(12)).unwrap();
            tally.deposit_path(&path);
        }
        for t in 0..12 {
            let s: i64 = (0..32 * 4).map(|k| tally.sum[t * 32 * 4 + k]).sum();
            assert_eq!(s, 0, "slice {t}");
        }
        assert!(tally.beyond_horizon > 0);
    }

    #[test]
    fn envelope_and_loop_deposits_agree() {
        let mut rng = StepRng::new(0, 0);
        let field = ReversalField::Uniform(StepProbabilities::new(0.5).unwrap());
        let path = generate_entwined_pair(&mut rng, &field, &WalkOptions::new(6)).unwrap();
        let mut by_loop = WeightedFields::new(&spec(), 6);
        path.deposit_loop(&mut by_loop);
        let tally = deposit_charge(&path, EnsembleStats::new(TallyWindow::for_spec(&spec(), 6), 0));
        assert_eq!(tally.mean_fields(), by_loop.fields);
    }

    #[test]
    fn merge_rejects_other_windows() {
        let mut a = EnsembleStats::new(TallyWindow::for_spec(&spec(), 4), 0);
        let b = EnsembleStats::new(TallyWindow::for_spec(&spec(), 5), 0);
        assert!(a.merge(&b).is_err());
    }

    #[test]
    fn narrow_window_counts_overflow() {
        let narrow = LatticeSpec::new(1.0, 1.0, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let field = ReversalField::Uniform(StepProbabilities::new(0.2).unwrap());
        let mut tally = EnsembleStats::new(TallyWindow::for_spec(&narrow, 8), 0);
        for _ in 0..50 {
            tally.deposit_path(&generate_entwined_pair(&mut rng, &field, &WalkOptions::new(8)).unwrap());
        }
        assert!(tally.outside_window > 0);
    }
}
