use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::path::{generate_entwined_pair, EntwinedPath, ReturnRule, WalkOptions, DEFAULT_MAX_STEPS};
use super::tally::{EnsembleStats, TallyWindow};
use crate::error::{invalid, Error, Result};
use crate::lattice::{AlphaSite, LatticeSpec, ReversalField};

/// Name of the per-walker stream construction, recorded in run metadata.
pub const RNG_STREAM_NAME: &str = "chacha8-stream-v1";

/// Walkers per work unit. Fixed so the partition never depends on threads.
const CHUNK: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub master_seed: u64,
    pub n_walkers: u64,
    pub t_return: u64,
    #[serde(default)]
    pub rule: ReturnRule,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default)]
    pub alpha_site: AlphaSite,
}

fn default_max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}

impl EnsembleConfig {
    pub fn new(master_seed: u64, n_walkers: u64, t_return: u64) -> Self {
        Self {
            master_seed,
            n_walkers,
            t_return,
            rule: ReturnRule::AtOrAfter,
            max_steps: DEFAULT_MAX_STEPS,
            alpha_site: AlphaSite::Departure,
        }
    }

    fn walk_options(&self, spec: &LatticeSpec) -> WalkOptions {
        WalkOptions {
            t_return: self.t_return,
            rule: self.rule,
            max_steps: self.max_steps,
            alpha_site: self.alpha_site,
            origin_site: spec.origin() as i64,
        }
    }
}

/// Independent stream for walker `index`: the master seed keys the generator
/// and the walker index selects the stream.
pub fn child_stream(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Regenerates the path of a single walker of an ensemble.
pub fn walker_path(
    alpha: &ReversalField,
    spec: &LatticeSpec,
    cfg: &EnsembleConfig,
    index: u64,
) -> Result<EntwinedPath> {
    let mut rng = child_stream(cfg.master_seed, index);
    generate_entwined_pair(&mut rng, alpha, &cfg.walk_options(spec)).map_err(|e| tag(e, cfg, index))
}

fn tag(e: Error, cfg: &EnsembleConfig, index: u64) -> Error {
    match e {
        Error::NonTerminating { max_steps, .. } => Error::NonTerminating {
            seed: cfg.master_seed,
            walker: index,
            max_steps,
        },
        other => other,
    }
}

/// Runs `cfg.n_walkers` independent entwined pairs and tallies their envelope
/// charge over slices t < t_R. Results are bit-identical for any thread count.
/// `threads = None` uses rayon's default.
pub fn run_ensemble(
    spec: &LatticeSpec,
    alpha: &ReversalField,
    cfg: &EnsembleConfig,
    threads: Option<usize>,
) -> Result<EnsembleStats> {
    if cfg.n_walkers == 0 {
        return Err(invalid("n_walkers", "must be positive"));
    }
    if cfg.t_return < 2 {
        return Err(invalid("t_return", "must be at least two steps"));
    }
    alpha.check_sites(spec.n_sites)?;
    let window = TallyWindow::for_spec(spec, cfg.t_return as usize);
    let opts = cfg.walk_options(spec);
    let n_chunks = cfg.n_walkers.div_ceil(CHUNK);

    let run_chunk = |c: u64| -> std::result::Result<EnsembleStats, (u64, Error)> {
        let mut tally = EnsembleStats::new(window, cfg.master_seed);
        let end = ((c + 1) * CHUNK).min(cfg.n_walkers);
        for i in c * CHUNK..end {
            let mut rng = child_stream(cfg.master_seed, i);
            let path = generate_entwined_pair(&mut rng, alpha, &opts).map_err(|e| (i, tag(e, cfg, i)))?;
            tally.deposit_path(&path);
        }
        Ok(tally)
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(invalid("threads", "must be positive"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;

    // Per-chunk tallies are merged in index order; on failure the lowest
    // failing walker is reported.
    let chunks: Vec<_> = pool.install(|| (0..n_chunks).into_par_iter().map(run_chunk).collect());
    let mut total = EnsembleStats::new(window, cfg.master_seed);
    let mut first_err: Option<(u64, Error)> = None;
    for c in chunks {
        match c {
            Ok(t) => total.merge(&t)?,
            Err((i, e)) => {
                if first_err.as_ref().is_none_or(|(j, _)| i < *j) {
                    first_err = Some((i, e));
                }
            }
        }
    }
    match first_err {
        Some((_, e)) => Err(e),
        None => Ok(total),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{reversal_probability, StepProbabilities};
    use rand::RngCore;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a = child_stream(7, 0).next_u64();
        let b = child_stream(7, 1).next_u64();
        let c = child_stream(8, 0).next_u64();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, child_stream(7, 0).next_u64());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let spec = LatticeSpec::new(1.0, 1.0, 40).unwrap();
        let alpha = ReversalField::Uniform(StepProbabilities::new(0.3).unwrap());
        let cfg = EnsembleConfig::new(11, 3000, 10);
        let one = run_ensemble(&spec, &alpha, &cfg, Some(1)).unwrap();
        let four = run_ensemble(&spec, &alpha, &cfg, Some(4)).unwrap();
        assert_eq!(one, four);
        assert_eq!(one.n_walkers, 3000);
    }

    #[test]
    fn single_walker_matches_direct_path() {
        let spec = LatticeSpec::new(1.0, 1.0, 40).unwrap();
        let alpha = ReversalField::Uniform(StepProbabilities::new(0.5).unwrap());
        let cfg = EnsembleConfig::new(5, 1, 8);
        let stats = run_ensemble(&spec, &alpha, &cfg, Some(2)).unwrap();
        let path = walker_path(&alpha, &spec, &cfg, 0).unwrap();
        let direct = super::super::deposit_charge(
            &path,
            EnsembleStats::new(TallyWindow::for_spec(&spec, 8), 5),
        );
        assert_eq!(stats, direct);
    }

    #[test]
    fn non_termination_reports_walker() {
        let spec = LatticeSpec::new(1.0, 1.0, 16).unwrap();
        // α tiny: the second indication essentially never arrives within 10 steps
        let alpha = ReversalField::Uniform(StepProbabilities::new(1e-9).unwrap());
        let mut cfg = EnsembleConfig::new(3, 5, 4);
        cfg.max_steps = 10;
        let err = run_ensemble(&spec, &alpha, &cfg, Some(2)).unwrap_err();
        assert_eq!(
            err,
            Error::NonTerminating {
                seed: 3,
                walker: 0,
                max_steps: 10
            }
        );
    }

    // Runs between indications are shorter where α is raised by the potential.
    #[test]
    fn mean_free_path_tracks_local_alpha() {
        let n = 64;
        let spec = LatticeSpec::new(1.0, 1.0, n).unwrap();
        let origin = spec.origin() as i64;
        let probs: Vec<StepProbabilities> = (0..n as i64)
            .map(|j| {
                let v = if (j - origin).abs() <= 2 { 2.0 } else { 0.0 };
                reversal_probability(v, 0.5).unwrap().probs
            })
            .collect();
        let alpha = ReversalField::PerSite(probs);
        let cfg = EnsembleConfig::new(21, 20_000, 20);
        let (mut near, mut far) = ((0u64, 0u64), (0u64, 0u64));
        for i in 0..cfg.n_walkers {
            let path = walker_path(&alpha, &spec, &cfg, i).unwrap();
            let track = path.forward_track();
            let mut indications: Vec<usize> = (1..path.forward_leg.len())
                .filter(|&t| path.forward_leg[t] != path.forward_leg[t - 1])
                .collect();
            indications.extend(path.markers.iter().map(|m| m.t as usize));
            indications.sort_unstable();
            let mut start = 0usize;
            for &t in &indications {
                let z = track[start];
                let outward = z * i64::from(path.forward_leg[start]) > 0;
                let bucket = if z.abs() <= 1 {
                    Some(&mut near)
                } else if z.abs() >= 4 && outward {
                    Some(&mut far)
                } else {
                    None
                };
                if let Some(b) = bucket {
                    b.0 += (t - start) as u64;
                    b.1 += 1;
                }
                start = t;
            }
        }
        let near_mean = near.0 as f64 / near.1 as f64;
        let far_mean = far.0 as f64 / far.1 as f64;
        assert!(near_mean < 1.3, "near {near_mean}");
        assert!(far_mean > 1.8, "far {far_mean}");
    }
}
