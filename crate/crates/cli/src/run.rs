//! Subcommand bodies. Every artifact depends only on the config and seed.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use entwine_core::analysis::{compare_ensemble, l2_error_fields, ComparisonReport, ConvergenceReport};
use entwine_core::continuum::{
    kg_consistency, kg_scale, newschrod_dispersion, pack_complex, unpack_complex, CnDirection, CrankNicolson,
    DiracSystem, DispersionQuery,
};
use entwine_core::evolve::{
    evolve_fixed_velocity, evolve_slices, evolve_to, stroboscope_evolve, EnvelopeStencil, Scattering, STROBE_STEPS,
};
use entwine_core::lattice::{ChargeField, LatticeSpec, Normalization};
use entwine_core::walker::{run_ensemble, EnsembleStats, RNG_STREAM_NAME};
use serde::Serialize;

use crate::config::{ExperimentConfig, Scaling};
use crate::emit::{emit, emit_ndjson, push_slice, Cell, Format, Table, SLICE_HEADER};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CompareMode {
    /// Monte Carlo tally against the stencil from a point source.
    WalkEvolve,
    /// Stencil slices against the continuum reference.
    EvolvePde,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunOptions {
    fn dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."))
    }

    fn table_format(&self, cfg: &ExperimentConfig) -> Format {
        self.format.or(cfg.output.format).unwrap_or(Format::Csv)
    }

    /// Report-style outputs are NDJSON only.
    fn require_ndjson(&self, what: &str) -> Result<(), CliError> {
        match self.format {
            Some(Format::Csv) => Err(CliError::Config(format!("--format: {what} writes NDJSON only"))),
            _ => Ok(()),
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

/// Step counts at which slices are written: 0, every, 2·every, …, n_steps.
fn output_steps(n_steps: u64, every: u64) -> Vec<u64> {
    let mut v: Vec<u64> = (0..=n_steps).step_by(every as usize).collect();
    if *v.last().unwrap() != n_steps {
        v.push(n_steps);
    }
    v
}

/// Stencil fields at each output step.
pub fn stencil_slices(cfg: &ExperimentConfig) -> Result<Vec<(u64, ChargeField)>, CliError> {
    let spec = cfg.spec()?;
    let s = cfg.solver;
    let steps = output_steps(s.n_steps, s.every);
    let mut field = cfg.initial_field(&spec)?;
    let mut out = Vec::with_capacity(steps.len());
    match cfg.scaling()? {
        Scaling::Diffusive { .. } => {
            let (alpha, _) = cfg.reversal_field()?;
            let stencil = EnvelopeStencil::new(&spec, &alpha, cfg.alpha_site, s.scattering)?;
            if s.stroboscope {
                field.normalization = Normalization::Renormalized;
            }
            let mut done = 0;
            for &n in &steps {
                if n > done {
                    field = if s.stroboscope {
                        stroboscope_evolve(&stencil, &field, (n - done) / STROBE_STEPS)?
                    } else {
                        evolve_to(&stencil, &field, n - done)?
                    };
                    done = n;
                }
                out.push((n, field.clone()));
            }
        }
        Scaling::FixedVelocity { c, a } => {
            if s.scattering != Scattering::Entwined {
                return Err(CliError::Config(
                    "solver.scattering: fixed-velocity stencil runs are entwined; use the pde subcommand for the unentwined system".into(),
                ));
            }
            field.normalization = match s.normalization {
                entwine_core::evolve::FixedVelocityNormalization::ZeroMode => Normalization::Renormalized,
                entwine_core::evolve::FixedVelocityNormalization::None => Normalization::Raw,
            };
            let mut done = 0;
            for &n in &steps {
                if n > done {
                    field = evolve_fixed_velocity(&spec, c, a, &field, n - done, s.normalization)?;
                    done = n;
                }
                out.push((n, field.clone()));
            }
        }
    }
    Ok(out)
}

/// Continuum reference at each output step: Crank–Nicolson under diffusive
/// scaling, the exact spectral solution under fixed-velocity scaling.
pub fn reference_slices(cfg: &ExperimentConfig) -> Result<Vec<(u64, ChargeField)>, CliError> {
    let spec = cfg.spec()?;
    let s = cfg.solver;
    let steps = output_steps(s.n_steps, s.every);
    let init = cfg.initial_field(&spec)?;
    let as_reference = |mut f: ChargeField, n: u64| {
        f.t_index = n;
        f.normalization = Normalization::Renormalized;
        f
    };
    let mut out = Vec::with_capacity(steps.len());
    match cfg.scaling()? {
        Scaling::Diffusive { diffusivity } => {
            let pot = cfg.potential(&spec)?;
            let dt = spec.epsilon / s.cn_substeps as f64;
            let cn = CrankNicolson::new(spec.delta, diffusivity, &pot.values, dt, CnDirection::Forward)?;
            let mut psi = pack_complex(&init, 0.0);
            let mut done = 0;
            for &n in &steps {
                for _ in done * s.cn_substeps..n * s.cn_substeps {
                    cn.step(&mut psi.values)?;
                }
                done = n;
                let f = ChargeField::with_conjugate_right(unpack_complex(&psi));
                out.push((n, as_reference(f, n)));
            }
        }
        Scaling::FixedVelocity { c, a } => {
            let system = DiracSystem::new(c, a, s.scattering)?;
            for &n in &steps {
                let f = system.evolve(&init, n as f64 * spec.epsilon, spec.delta)?;
                out.push((n, as_reference(f, n)));
            }
        }
    }
    Ok(out)
}

fn slice_table(spec: &LatticeSpec, slices: &[(u64, ChargeField)]) -> Table {
    let mut table = Table::new(SLICE_HEADER.to_vec());
    for (n, f) in slices {
        push_slice(&mut table, spec, f, *n as f64 * spec.epsilon);
    }
    table
}

pub fn evolve(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<PathBuf, CliError> {
    let spec = cfg.spec()?;
    let (_, saturated) = cfg.reversal_field()?;
    if saturated > 0 {
        eprintln!("warning: reversal probability clamped at {saturated} sites");
    }
    let table = slice_table(&spec, &stencil_slices(cfg)?);
    write_table(&table, opts.table_format(cfg), &opts.dir(cfg), "evolve")
}

pub fn pde(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<PathBuf, CliError> {
    let spec = cfg.spec()?;
    let table = slice_table(&spec, &reference_slices(cfg)?);
    write_table(&table, opts.table_format(cfg), &opts.dir(cfg), "pde")
}

fn write_table(table: &Table, format: Format, dir: &Path, stem: &str) -> Result<PathBuf, CliError> {
    let name = format!("{stem}.{}", format.extension());
    emit(table, format, create(dir, &name)?)?;
    Ok(dir.join(name))
}

#[derive(Debug, Serialize)]
struct TallyRecord {
    t_index: usize,
    t: f64,
    z: f64,
    mean: [f64; 4],
    std_error: [f64; 4],
}

#[derive(Debug, Serialize)]
struct WalkSummary<'a> {
    rng: &'a str,
    master_seed: u64,
    n_walkers: u64,
    t_return: u64,
    n_slices: usize,
    outside_window: u64,
    beyond_horizon: u64,
}

fn ensemble(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<(LatticeSpec, EnsembleStats), CliError> {
    let spec = cfg.spec()?;
    let (alpha, _) = cfg.reversal_field()?;
    let ens = cfg.walker(opts.seed)?;
    let stats = run_ensemble(&spec, &alpha, &ens, opts.threads)?;
    Ok((spec, stats))
}

pub fn walk(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<PathBuf, CliError> {
    opts.require_ndjson("walk")?;
    let (spec, stats) = ensemble(cfg, opts)?;
    let w = stats.window;
    let mut records = Vec::new();
    for t in 0..w.n_slices {
        for site in 0..w.n_sites {
            let mean: [f64; 4] = std::array::from_fn(|c| stats.mean(t, site, c));
            let se: [f64; 4] = std::array::from_fn(|c| stats.std_error(t, site, c));
            if mean.iter().chain(&se).any(|x| *x != 0.0) {
                records.push(TallyRecord {
                    t_index: t,
                    t: t as f64 * spec.epsilon,
                    z: spec.position(site),
                    mean,
                    std_error: se,
                });
            }
        }
    }
    let dir = opts.dir(cfg);
    emit_ndjson(&records, create(&dir, "walk.ndjson")?)?;
    let summary = WalkSummary {
        rng: RNG_STREAM_NAME,
        master_seed: stats.master_seed,
        n_walkers: stats.n_walkers,
        t_return: cfg.walker(opts.seed)?.t_return,
        n_slices: w.n_slices,
        outside_window: stats.outside_window,
        beyond_horizon: stats.beyond_horizon,
    };
    emit_ndjson(&[summary], create(&dir, "walk_summary.ndjson")?)?;
    Ok(dir.join("walk.ndjson"))
}

#[derive(Debug, Serialize)]
struct SliceError {
    t: f64,
    l2_error: f64,
    reference_norm: f64,
}

pub fn compare(cfg: &ExperimentConfig, opts: &RunOptions, mode: CompareMode) -> Result<PathBuf, CliError> {
    opts.require_ndjson("compare")?;
    let dir = opts.dir(cfg);
    let path = dir.join("compare.ndjson");
    match mode {
        CompareMode::WalkEvolve => {
            let report = walk_report(cfg, opts)?;
            emit_ndjson(&[report], create(&dir, "compare.ndjson")?)?;
        }
        CompareMode::EvolvePde => {
            if matches!(cfg.scaling()?, Scaling::Diffusive { .. }) && !cfg.solver.stroboscope {
                return Err(CliError::Config(
                    "solver.stroboscope: raw diffusive slices decay like 2^(-t/2); enable the stroboscope to compare with the continuum".into(),
                ));
            }
            let spec = cfg.spec()?;
            let zero = ChargeField::zeros(spec.n_sites);
            let records = stencil_slices(cfg)?
                .iter()
                .zip(reference_slices(cfg)?)
                .map(|((n, s), (_, r))| {
                    Ok(SliceError {
                        t: *n as f64 * spec.epsilon,
                        l2_error: l2_error_fields(s, &r, spec.delta)?,
                        reference_norm: l2_error_fields(&r, &zero, spec.delta)?,
                    })
                })
                .collect::<Result<Vec<_>, entwine_core::Error>>()?;
            emit_ndjson(&records, create(&dir, "compare.ndjson")?)?;
        }
    }
    Ok(path)
}

/// Ensemble tally scored against stencil slices from a point source.
pub fn walk_report(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ComparisonReport, CliError> {
    let (spec, stats) = ensemble(cfg, opts)?;
    let (alpha, _) = cfg.reversal_field()?;
    let stencil = EnvelopeStencil::new(&spec, &alpha, cfg.alpha_site, Scattering::Entwined)?;
    let n = stats.window.n_slices as u64;
    let reference = evolve_slices(&stencil, &ChargeField::point_source(&spec), n.saturating_sub(1))?;
    Ok(compare_ensemble(&stats, &reference)?)
}

pub fn dispersion(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<PathBuf, CliError> {
    let grid = cfg
        .dispersion
        .clone()
        .ok_or_else(|| CliError::Config("dispersion: section required for this subcommand".into()))?;
    let mut table = Table::new(vec!["k", "c", "omega_low", "omega_high", "kg_residual"]);
    for &k in &grid.k {
        for &c in &grid.c {
            let q = DispersionQuery::new(k, c, grid.hbar, grid.m).map_err(|e| CliError::Config(format!("dispersion: {e}")))?;
            let (lo, hi) = newschrod_dispersion(&q);
            let residual = kg_consistency(lo, &q).max(kg_consistency(hi, &q)) / kg_scale(&q);
            table.push(vec![Cell::Float(k), Cell::Float(c), Cell::Float(lo), Cell::Float(hi), Cell::Float(residual)]);
        }
    }
    write_table(&table, opts.table_format(cfg), &opts.dir(cfg), "dispersion")
}

pub fn convergence(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<PathBuf, CliError> {
    opts.require_ndjson("convergence")?;
    let (case, deltas) = cfg.diffusive_case()?;
    let report: ConvergenceReport = case.convergence(&deltas)?;
    let dir = opts.dir(cfg);
    emit_ndjson(&[report], create(&dir, "convergence.ndjson")?)?;
    Ok(dir.join("convergence.ndjson"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_steps_include_both_ends() {
        assert_eq!(output_steps(10, 4), vec![0, 4, 8, 10]);
        assert_eq!(output_steps(8, 4), vec![0, 4, 8]);
        assert_eq!(output_steps(0, 3), vec![0]);
    }
}
