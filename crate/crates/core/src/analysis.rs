//! Error norms, convergence orders, ensemble-vs-reference statistics and
//! conservation diagnostics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::continuum::ComplexWave;
use crate::error::{check_len, invalid, Result};
use crate::lattice::ChargeField;
use crate::walker::{EnsembleStats, EntwinedPath};

/// Relative tolerance when checking that successive spacings halve.
const HALVING_RTOL: f64 = 1e-9;

/// sqrt(δ Σ |a − b|²).
pub fn l2_error<A, B>(a: &[A], b: &[B], delta: f64) -> Result<f64>
where
    A: Copy + Into<Complex64>,
    B: Copy + Into<Complex64>,
{
    check_len(a.len(), b.len())?;
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| ((*x).into() - (*y).into()).norm_sqr())
        .sum();
    Ok((delta * s).sqrt())
}

/// max |a − b|.
pub fn linf_error<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Copy + Into<Complex64>,
    B: Copy + Into<Complex64>,
{
    check_len(a.len(), b.len())?;
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| ((*x).into() - (*y).into()).norm())
        .fold(0.0, f64::max))
}

pub fn l2_error_waves(a: &ComplexWave, b: &ComplexWave, delta: f64) -> Result<f64> {
    l2_error(&a.values, &b.values, delta)
}

/// L2 error over all four components.
pub fn l2_error_fields(a: &ChargeField, b: &ChargeField, delta: f64) -> Result<f64> {
    check_len(a.n_sites(), b.n_sites())?;
    let mut s = 0.0;
    for c in 0..4 {
        s += l2_error(a.component(c), b.component(c), delta)?.powi(2);
    }
    Ok(s.sqrt())
}

/// δ Σ ψ_L ψ_R.
pub fn norm_product(psi_left: &ComplexWave, psi_right: &ComplexWave, delta: f64) -> Result<Complex64> {
    check_len(psi_left.len(), psi_right.len())?;
    let s: Complex64 = psi_left.values.iter().zip(&psi_right.values).map(|(l, r)| l * r).sum();
    Ok(s * delta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub deltas: Vec<f64>,
    pub errors: Vec<f64>,
    /// log2(e_j / e_{j+1}).
    pub orders: Vec<f64>,
    pub mean_order: f64,
    /// Set when some successive error did not decrease.
    pub no_convergence: bool,
}

/// Pairwise empirical orders for spacings that halve at each level.
pub fn empirical_order(deltas: &[f64], errors: &[f64]) -> Result<ConvergenceReport> {
    check_len(deltas.len(), errors.len())?;
    if deltas.len() < 2 {
        return Err(invalid("deltas", "need at least two refinement levels"));
    }
    for w in deltas.windows(2) {
        if !(w[1] > 0.0 && ((w[0] / w[1]) - 2.0).abs() <= 2.0 * HALVING_RTOL) {
            return Err(invalid("deltas", format!("spacings must halve, got {} then {}", w[0], w[1])));
        }
    }
    if errors.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(invalid("errors", "must be positive and finite"));
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let mean_order = orders.iter().sum::<f64>() / orders.len() as f64;
    let no_convergence = errors.windows(2).any(|w| w[1] >= w[0]);
    Ok(ConvergenceReport {
        deltas: deltas.to_vec(),
        errors: errors.to_vec(),
        orders,
        mean_order,
        no_convergence,
    })
}

/// One bin of a [`ComparisonReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinScore {
    pub t: usize,
    pub site: usize,
    pub component: usize,
    pub mean: f64,
    pub reference: f64,
    pub std_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n_walkers: u64,
    pub compared_bins: usize,
    /// Zero-variance bins that were skipped: unoccupied with a plausibly
    /// empty reference, or exactly equal to it.
    pub excluded_bins: usize,
    /// Zero-variance bins whose mean disagrees with the reference.
    pub degenerate_mismatches: usize,
    pub within_3se: f64,
    pub within_5se: f64,
    pub worst: Option<BinScore>,
    #[serde(skip)]
    pub scores: Vec<BinScore>,
}

/// Largest n|r| at which an empty bin is still accepted (exp(−25) ≈ 1.4e-11).
pub const EMPTY_BIN_LIMIT: f64 = 25.0;

/// Scores the ensemble mean against `reference` slice by slice.
///
/// Unoccupied bins are excluded unless the reference makes an empty tally
/// implausible: with n walkers a bin of expected charge r stays empty with
/// probability at most exp(−n|r|), flagged once n|r| exceeds
/// [`EMPTY_BIN_LIMIT`]. Other zero-variance bins are compared exactly. Both
/// kinds of disagreement count in `degenerate_mismatches`.
pub fn compare_ensemble(stats: &EnsembleStats, reference: &[ChargeField]) -> Result<ComparisonReport> {
    let w = stats.window;
    if reference.len() < w.n_slices {
        return Err(invalid(
            "reference",
            format!("{} slices for a {}-slice tally", reference.len(), w.n_slices),
        ));
    }
    let mut scores = Vec::new();
    let mut excluded = 0;
    let mut degenerate = 0;
    for (t, field) in reference.iter().enumerate().take(w.n_slices) {
        check_len(w.n_sites, field.n_sites())?;
        for site in 0..w.n_sites {
            for c in 0..4 {
                let mean = stats.mean(t, site, c);
                let se = stats.std_error(t, site, c);
                let r = field.component(c)[site];
                if se == 0.0 {
                    if mean == 0.0 && stats.n_walkers as f64 * r.abs() <= EMPTY_BIN_LIMIT {
                        excluded += 1;
                    } else if (mean - r).abs() > 1e-12 {
                        degenerate += 1;
                    } else {
                        excluded += 1;
                    }
                    continue;
                }
                scores.push(BinScore {
                    t,
                    site,
                    component: c,
                    mean,
                    reference: r,
                    std_error: se,
                    z: (mean - r) / se,
                });
            }
        }
    }
    let n = scores.len();
    let frac = |k: f64| {
        if n == 0 {
            1.0
        } else {
            scores.iter().filter(|s| s.z.abs() <= k).count() as f64 / n as f64
        }
    };
    let worst = scores
        .iter()
        .copied()
        .max_by(|a, b| a.z.abs().total_cmp(&b.z.abs()));
    Ok(ComparisonReport {
        n_walkers: stats.n_walkers,
        compared_bins: n,
        excluded_bins: excluded,
        degenerate_mismatches: degenerate,
        within_3se: frac(3.0),
        within_5se: frac(5.0),
        worst,
        scores,
    })
}

/// Net charge per time slice t = 0..=t_stop: +1 for each forward occupancy,
/// −1 for each return occupancy.
pub fn charge_slice_sums(path: &EntwinedPath) -> Vec<i64> {
    let mut sums = forward_slice_sums(path);
    let ret = return_slice_sums(path);
    for (s, r) in sums.iter_mut().zip(ret) {
        *s += r;
    }
    sums
}

/// Slice sums of the forward leg alone (one +1 per slice).
pub fn forward_slice_sums(path: &EntwinedPath) -> Vec<i64> {
    let mut sums = vec![0i64; path.t_stop as usize + 1];
    for (t, _) in path.forward_track().iter().enumerate() {
        sums[t] += 1;
    }
    sums
}

/// Slice sums of the return leg alone (one −1 per slice it visits).
pub fn return_slice_sums(path: &EntwinedPath) -> Vec<i64> {
    let mut sums = vec![0i64; path.t_stop as usize + 1];
    // the return leg visits t_stop, t_stop − 1, …, 0
    let mut t = path.t_stop as usize;
    sums[t] -= 1;
    for _ in path.return_leg.iter().take(path.t_stop as usize) {
        t -= 1;
        sums[t] -= 1;
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::WaveRole;
    use crate::lattice::{LatticeSpec, ReversalField, StepProbabilities};
    use crate::walker::{generate_entwined_pair, TallyWindow, WalkOptions};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn l2_basics() {
        let a = vec![1.0, 2.0, 3.0];
        assert_eq!(l2_error(&a, &a, 0.1).unwrap(), 0.0);
        let b = vec![1.0, 3.0, 3.0];
        assert_abs_diff_eq!(l2_error(&a, &b, 0.1).unwrap(), 0.1f64.sqrt(), epsilon = 1e-15);
        assert!(l2_error(&a, &b[..2], 0.1).is_err());
    }

    #[test]
    fn norm_product_basics() {
        let one = ComplexWave::new(vec![Complex64::new(1.0, 0.0); 10], 0.0, WaveRole::Psi);
        assert_abs_diff_eq!(norm_product(&one, &one, 0.1).unwrap().re, 1.0, epsilon = 1e-15);
        let w = ComplexWave::new(
            (0..7).map(|j| Complex64::new(j as f64, 1.0 - j as f64)).collect(),
            0.0,
            WaveRole::Psi,
        );
        let p = norm_product(&w, &w.conj(), 0.5).unwrap();
        assert!(p.im.abs() <= 1e-14);
        let direct: f64 = w.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * 0.5;
        assert_abs_diff_eq!(p.re, direct, epsilon = 1e-12);
    }

    #[test]
    fn order_examples() {
        assert_abs_diff_eq!(empirical_order(&[0.1, 0.05], &[0.2, 0.1]).unwrap().mean_order, 1.0);
        assert_abs_diff_eq!(empirical_order(&[0.1, 0.05], &[0.2, 0.05]).unwrap().mean_order, 2.0);
        let flat = empirical_order(&[0.1, 0.05], &[0.2, 0.2]).unwrap();
        assert_eq!(flat.mean_order, 0.0);
        assert!(flat.no_convergence);
        assert!(empirical_order(&[0.1, 0.06], &[0.2, 0.1]).is_err());
        assert!(empirical_order(&[0.1], &[0.2]).is_err());
    }

    fn small_tally() -> (EnsembleStats, Vec<ChargeField>) {
        let spec = LatticeSpec::new(1.0, 1.0, 24).unwrap();
        let alpha = ReversalField::Uniform(StepProbabilities::new(0.4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut stats = EnsembleStats::new(TallyWindow::for_spec(&spec, 8), 2);
        for _ in 0..500 {
            stats.deposit_path(&generate_entwined_pair(&mut rng, &alpha, &WalkOptions::new(8)).unwrap());
        }
        let mean = stats.mean_fields();
        (stats, mean)
    }

    #[test]
    fn self_comparison_is_perfect() {
        let (stats, mean) = small_tally();
        let r = compare_ensemble(&stats, &mean).unwrap();
        assert!(r.scores.iter().all(|s| s.z == 0.0));
        assert_eq!(r.within_3se, 1.0);
        assert_eq!(r.degenerate_mismatches, 0);
        assert!(r.excluded_bins > 0);
    }

    #[test]
    fn offset_bin_is_the_worst() {
        let (stats, mut reference) = small_tally();
        let w = stats.window;
        let (t, site, c) = (0..w.n_slices)
            .flat_map(|t| (0..w.n_sites).flat_map(move |s| (0..4).map(move |c| (t, s, c))))
            .max_by(|a, b| stats.std_error(a.0, a.1, a.2).total_cmp(&stats.std_error(b.0, b.1, b.2)))
            .unwrap();
        let se = stats.std_error(t, site, c);
        assert!(se > 0.0 && se.is_finite());
        reference[t].component_mut(c)[site] -= 10.0 * se;
        let r = compare_ensemble(&stats, &reference).unwrap();
        let w = r.worst.unwrap();
        assert_eq!((w.t, w.site, w.component), (t, site, c));
        assert_abs_diff_eq!(w.z, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn empty_bins_flag_only_when_implausible() {
        let (stats, mut reference) = small_tally();
        let w = stats.window;
        let (t, site, c) = (0..w.n_slices)
            .flat_map(|t| (0..w.n_sites).flat_map(move |s| (0..4).map(move |c| (t, s, c))))
            .find(|&(t, s, c)| stats.std_error(t, s, c) == 0.0 && stats.mean(t, s, c) == 0.0)
            .unwrap();
        // 500 walkers: n|r| = 5 is an unremarkable empty bin, n|r| = 50 is not
        reference[t].component_mut(c)[site] = 0.01;
        assert_eq!(compare_ensemble(&stats, &reference).unwrap().degenerate_mismatches, 0);
        reference[t].component_mut(c)[site] = -0.1;
        assert_eq!(compare_ensemble(&stats, &reference).unwrap().degenerate_mismatches, 1);
    }

    #[test]
    fn short_reference_is_rejected() {
        let (stats, mean) = small_tally();
        assert!(compare_ensemble(&stats, &mean[..3]).is_err());
    }

    #[test]
    fn slice_sums() {
        let alpha = ReversalField::Uniform(StepProbabilities::new(0.3).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let p = generate_entwined_pair(&mut rng, &alpha, &WalkOptions::new(10)).unwrap();
            assert!(charge_slice_sums(&p).iter().all(|s| *s == 0));
            assert!(forward_slice_sums(&p).iter().all(|s| *s == 1));
            let f = forward_slice_sums(&p);
            let r = return_slice_sums(&p);
            let total: Vec<i64> = f.iter().zip(&r).map(|(a, b)| a + b).collect();
            assert_eq!(total, charge_slice_sums(&p));
        }
    }

    proptest! {
        #[test]
        fn l2_is_a_metric(
            a in proptest::collection::vec(-5.0f64..5.0, 12),
            b in proptest::collection::vec(-5.0f64..5.0, 12),
            c in proptest::collection::vec(-5.0f64..5.0, 12),
        ) {
            let ab = l2_error(&a, &b, 0.3).unwrap();
            let ba = l2_error(&b, &a, 0.3).unwrap();
            let bc = l2_error(&b, &c, 0.3).unwrap();
            let ac = l2_error(&a, &c, 0.3).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, ba);
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn order_is_scale_invariant(e0 in 1e-3f64..1.0, r1 in 1.1f64..8.0, r2 in 1.1f64..8.0, s in 1e-3f64..1e3) {
            let errs = [e0, e0 / r1, e0 / r1 / r2];
            let scaled: Vec<f64> = errs.iter().map(|e| e * s).collect();
            let d = [0.1, 0.05, 0.025];
            let a = empirical_order(&d, &errs).unwrap();
            let b = empirical_order(&d, &scaled).unwrap();
            for (x, y) in a.orders.iter().zip(&b.orders) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
