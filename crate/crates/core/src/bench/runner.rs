//! Runs an experiment config cell by cell.
//!
//! A cell is one `(seed, image, ratio, fidelity, solver, param)` job. Cells
//! share immutable operators and run on a rayon pool; a failing cell is
//! reported and never touches the rows of other cells.

use std::sync::Arc;

use rayon::prelude::*;

use crate::bench::config::{ExperimentConfig, ExperimentKind, SignalSpec};
use crate::bench::pgm::{downsample, load_image_pgm};
use crate::bench::protocols::{
    cs_operator, observe, synthetic_power, synthetic_sparse, Problem, STREAM_NOISE,
    STREAM_SENSING, STREAM_SIGNAL, STREAM_SUPPORTS,
};
use crate::bench::table::{ResultRow, ResultTable};
use crate::error::{Error, Result};
use crate::fidelity::{FidelityKind, FidelityTerm};
use crate::linops::DenseOperator;
use crate::metrics::{sparsify_top_k, PEAK_8BIT};
use crate::priors::Prior;
use crate::rate_lab::estimate_restricted_rates;
use crate::rng::SeededRng;
use crate::solvers::{
    alista_run, alista_weights, fista, pgd, proximal_gradient, InitPolicy, IterateTrace,
    SolverConfig, ThetaSchedule,
};
use crate::transforms::{column_normalize, compose_with_basis, gaussian_sensing, sr_operator, HaarBasis};
use crate::vecops::norm1;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "BP_INVLAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Pgd,
    Fista,
    Ista,
    Idbp,
    Alista,
    RestrictedRate,
}

impl Solver {
    pub fn as_str(self) -> &'static str {
        match self {
            Solver::Pgd => "pgd",
            Solver::Fista => "fista",
            Solver::Ista => "ista",
            Solver::Idbp => "idbp",
            Solver::Alista => "alista",
            Solver::RestrictedRate => "restricted_rate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub seed: u64,
    pub image: String,
    pub solver: String,
    pub fidelity: Option<FidelityKind>,
    pub param: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub table: ResultTable,
    pub failures: Vec<CellFailure>,
}

impl RunReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// The thread cap from `BP_INVLAB_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
    }
}

/// Validates `cfg` and runs every cell. Only configuration problems are
/// returned as `Err`; solver failures are collected per cell.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let signals = load_signals(cfg)?;
    Ok(pool.install(|| run_cells(cfg, &signals)))
}

/// A named ground-truth source, before seed-dependent randomness.
enum Source {
    Synthetic(SignalSpec),
    Image { id: String, coeffs: Vec<f64> },
}

fn load_signals(cfg: &ExperimentConfig) -> Result<Vec<Source>> {
    match cfg.signal() {
        SignalSpec::Images { paths } => {
            let basis = HaarBasis::new(cfg.side)?;
            paths
                .iter()
                .map(|p| {
                    let img = load_image_pgm(p)
                        .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                    let img = downsample(&img, cfg.side)
                        .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                    let id = p
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| p.display().to_string());
                    Ok(Source::Image {
                        id,
                        coeffs: basis.forward(&img.pixels)?,
                    })
                })
                .collect()
        }
        spec => Ok(vec![Source::Synthetic(spec)]),
    }
}

struct Job {
    seed: u64,
    source: usize,
    ratio: f64,
}

struct Cell {
    problem: Arc<Problem>,
    fidelity: FidelityKind,
    solver: Solver,
    param: f64,
}

fn run_cells(cfg: &ExperimentConfig, sources: &[Source]) -> RunReport {
    let ratios: Vec<f64> = match cfg.experiment {
        ExperimentKind::SrPgd => vec![1.0 / (cfg.sr.scale * cfg.sr.scale) as f64],
        _ => cfg.ratios.clone(),
    };
    let jobs: Vec<Job> = cfg
        .seeds
        .iter()
        .flat_map(|&seed| {
            let ratios = &ratios;
            (0..sources.len()).flat_map(move |source| {
                ratios.iter().map(move |&ratio| Job { seed, source, ratio })
            })
        })
        .collect();

    let mut report = RunReport::default();
    if cfg.experiment == ExperimentKind::RateCurves {
        let results: Vec<_> = jobs
            .par_iter()
            .flat_map_iter(|job| {
                cfg.params.iter().map(move |&k| (job, k, rate_rows(cfg, job, k as usize)))
            })
            .collect();
        for (job, k, res) in results {
            match res {
                Ok(rows) => report.table.extend(rows),
                Err(e) => report.failures.push(CellFailure {
                    seed: job.seed,
                    image: rate_label(cfg, job.ratio),
                    solver: Solver::RestrictedRate.as_str().into(),
                    fidelity: None,
                    param: Some(k),
                    message: e.to_string(),
                }),
            }
        }
        report.table.sort();
        return report;
    }

    let built: Vec<(&Job, Result<Problem>)> = jobs
        .par_iter()
        .map(|job| (job, build_problem(cfg, &sources[job.source], job)))
        .collect();
    let mut cells = Vec::new();
    for (job, res) in built {
        match res {
            Ok(p) => cells.extend(cells_for(cfg, Arc::new(p))),
            Err(e) => report.failures.push(CellFailure {
                seed: job.seed,
                image: source_id(&sources[job.source]),
                solver: "setup".into(),
                fidelity: None,
                param: None,
                message: e.to_string(),
            }),
        }
    }
    let results: Vec<(&Cell, Result<Vec<ResultRow>>)> =
        cells.par_iter().map(|c| (c, run_cell(cfg, c))).collect();
    for (cell, res) in results {
        match res {
            Ok(rows) => report.table.extend(rows),
            Err(e) => report.failures.push(CellFailure {
                seed: cell.problem.seed,
                image: cell.problem.image.clone(),
                solver: cell.solver.as_str().into(),
                fidelity: Some(cell.fidelity),
                param: Some(cell.param),
                message: e.to_string(),
            }),
        }
    }
    report.table.sort();
    report
}

fn source_id(source: &Source) -> String {
    match source {
        Source::Synthetic(_) => "synthetic".into(),
        Source::Image { id, .. } => id.clone(),
    }
}

fn rate_label(cfg: &ExperimentConfig, ratio: f64) -> String {
    format!("m{}", cfg.measurements(ratio))
}

fn rate_rows(cfg: &ExperimentConfig, job: &Job, k: usize) -> Result<Vec<ResultRow>> {
    let m = cfg.measurements(job.ratio);
    let op = gaussian_sensing(m, cfg.n(), &SeededRng::new(job.seed, STREAM_SENSING))?;
    let est = estimate_restricted_rates(
        &op,
        k,
        cfg.num_supports,
        &SeededRng::new(job.seed, STREAM_SUPPORTS),
    )?;
    Ok([(FidelityKind::Ls, est.p_ls_hat), (FidelityKind::Bp, est.p_bp_hat)]
        .into_iter()
        .map(|(fidelity, p)| ResultRow {
            experiment: cfg.label(),
            seed: job.seed,
            image: rate_label(cfg, job.ratio),
            fidelity,
            solver: Solver::RestrictedRate.as_str().into(),
            param: k as f64,
            iteration: 0,
            psnr_gt: None,
            psnr_star: None,
            objective: Some(p),
            l1_norm: None,
            distance_to_star: None,
        })
        .collect())
}

fn build_problem(cfg: &ExperimentConfig, source: &Source, job: &Job) -> Result<Problem> {
    let n = cfg.n();
    let (image, mut x_gt) = match source {
        Source::Synthetic(spec) => {
            let mut rng = SeededRng::new(job.seed, STREAM_SIGNAL);
            let x = match *spec {
                SignalSpec::Sparse { k } => synthetic_sparse(n, k, PEAK_8BIT, &mut rng),
                SignalSpec::Power { decay } => synthetic_power(n, decay, PEAK_8BIT, &mut rng),
                SignalSpec::Images { .. } => unreachable!("images are loaded up front"),
            };
            ("synthetic".to_string(), x)
        }
        Source::Image { id, coeffs } => (id.clone(), coeffs.clone()),
    };
    let op = match cfg.experiment {
        ExperimentKind::SrPgd => {
            let sr = sr_operator(cfg.side, cfg.sr.scale, cfg.sr.kernel_size, cfg.sr.kernel_sigma)?;
            compose_with_basis(&sr, &HaarBasis::new(cfg.side)?)?
        }
        ExperimentKind::IstaFamily => {
            column_normalize(&cs_operator(cfg.side, cfg.measurements(job.ratio), job.seed)?)?
        }
        _ => cs_operator(cfg.side, cfg.measurements(job.ratio), job.seed)?,
    };
    if cfg.experiment == ExperimentKind::CsControlled {
        x_gt = sparsify_top_k(&x_gt, cfg.controlled_keep(op.rows()))?;
    }
    let noise = SeededRng::new(job.seed, STREAM_NOISE + 16 * job.source as u64);
    let y = observe(&op, &x_gt, cfg.snr_db, &noise)?;
    Ok(Problem {
        seed: job.seed,
        image,
        ratio: job.ratio,
        op: Arc::new(op),
        x_gt,
        y,
    })
}

fn cells_for(cfg: &ExperimentConfig, problem: Arc<Problem>) -> Vec<Cell> {
    let mut out = Vec::new();
    let mut push = |fidelity, solver, param| {
        out.push(Cell {
            problem: Arc::clone(&problem),
            fidelity,
            solver,
            param,
        })
    };
    for &fidelity in &cfg.fidelities {
        match cfg.experiment {
            ExperimentKind::CsPgdSweepR | ExperimentKind::SrPgd => {
                for &p in &cfg.params {
                    push(fidelity, Solver::Pgd, p);
                }
            }
            ExperimentKind::CsPgdRatios | ExperimentKind::CsControlled => {
                push(fidelity, Solver::Pgd, problem.ratio)
            }
            ExperimentKind::CsFistaSweepBeta => {
                for &p in &cfg.params {
                    push(fidelity, Solver::Fista, p);
                }
            }
            ExperimentKind::IstaFamily => {
                for &p in &cfg.params {
                    match fidelity {
                        FidelityKind::Ls => push(fidelity, Solver::Ista, p),
                        FidelityKind::Bp => {
                            push(fidelity, Solver::Idbp, p);
                            push(fidelity, Solver::Alista, p);
                        }
                    }
                }
            }
            ExperimentKind::RateCurves => {}
        }
    }
    out
}

/// The `l1`-ball radius for PGD cells.
fn radius(cfg: &ExperimentConfig, cell: &Cell) -> f64 {
    let scale = match cfg.experiment {
        ExperimentKind::CsPgdRatios => cfg.params.first().copied().unwrap_or(1.0),
        ExperimentKind::CsControlled => 1.0,
        _ => cell.param,
    };
    scale * norm1(&cell.problem.x_gt)
}

fn solve(
    cfg: &ExperimentConfig,
    cell: &Cell,
    f: &FidelityTerm,
    op: &DenseOperator,
    scfg: &SolverConfig,
) -> Result<(Vec<f64>, IterateTrace)> {
    match cell.solver {
        Solver::Pgd => pgd(f, &Prior::l1_ball(radius(cfg, cell))?, scfg),
        Solver::Fista => fista(f, &Prior::soft_threshold(cell.param)?, cell.param, scfg),
        Solver::Ista | Solver::Idbp => {
            proximal_gradient(f, &Prior::soft_threshold(cell.param)?, cell.param, scfg)
        }
        Solver::Alista => alista_run(
            f,
            &alista_weights(op)?,
            &ThetaSchedule::Constant(cell.param),
            1.0,
            scfg,
        ),
        Solver::RestrictedRate => Err(Error::Config("rate cells have no solver".into())),
    }
}

fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> Result<Vec<ResultRow>> {
    let p = &cell.problem;
    let f = FidelityTerm::new(cell.fidelity, Arc::clone(&p.op), p.y.clone())?;
    let x0 = match cfg.experiment {
        ExperimentKind::IstaFamily => InitPolicy::PinvOfY,
        _ => InitPolicy::Zeros,
    };
    let mut scfg = SolverConfig::new(cfg.iters)
        .with_x0(x0.clone())
        .with_record_every(cfg.record_every)
        .with_ground_truth(p.x_gt.clone());
    if cfg.star_iters > 0 {
        let pre = SolverConfig::new(cfg.star_iters)
            .with_x0(x0)
            .with_record_every(cfg.star_iters);
        let (x_star, _) = solve(cfg, cell, &f, &p.op, &pre)?;
        scfg = scfg.with_stationary_point(x_star);
    }
    let (_, trace) = solve(cfg, cell, &f, &p.op, &scfg)?;
    Ok(trace
        .records
        .iter()
        .map(|r| ResultRow {
            experiment: cfg.label(),
            seed: p.seed,
            image: p.image.clone(),
            fidelity: cell.fidelity,
            solver: cell.solver.as_str().into(),
            param: cell.param,
            iteration: r.iteration,
            psnr_gt: r.psnr_gt,
            psnr_star: r.psnr_star,
            objective: Some(r.objective),
            l1_norm: Some(r.l1_norm),
            distance_to_star: r.dist_star,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(text).unwrap()
    }

    #[test]
    fn sweep_row_count() {
        let c = cfg(r#"
            experiment = "cs_pgd_sweep_r"
            seeds = [3]
            side = 8
            snr_db = 20.0
            params = [0.5, 1.0, 1.5]
            iters = 7
            [signal]
            kind = "sparse"
            k = 4
        "#);
        let report = run_experiment(&c).unwrap();
        assert!(report.ok(), "{:?}", report.failures);
        assert_eq!(report.table.len(), 3 * 2 * (7 + 1));
        assert!(report.table.rows.iter().all(|r| r.psnr_star.is_none()));
    }

    #[test]
    fn stationary_point_columns_are_filled() {
        let c = cfg(r#"
            experiment = "cs_fista_sweep_beta"
            seeds = [1]
            side = 8
            snr_db = 30.0
            params = [2.0]
            fidelities = ["BP"]
            iters = 5
            star_iters = 50
            [signal]
            kind = "power"
            decay = 1.0
        "#);
        let report = run_experiment(&c).unwrap();
        assert!(report.ok());
        assert_eq!(report.table.len(), 6);
        assert!(report.table.rows.iter().all(|r| r.distance_to_star.is_some()));
    }

    #[test]
    fn family_and_rates() {
        let c = cfg(r#"
            experiment = "ista_family"
            seeds = [0]
            side = 8
            snr_db = 20.0
            params = [1.0]
            iters = 4
        "#);
        let report = run_experiment(&c).unwrap();
        let solvers: std::collections::BTreeSet<_> =
            report.table.rows.iter().map(|r| r.solver.clone()).collect();
        assert_eq!(solvers.into_iter().collect::<Vec<_>>(), ["alista", "idbp", "ista"]);

        let c = cfg(r#"
            experiment = "rate_curves"
            seeds = [0, 1]
            side = 8
            ratios = [0.25, 0.5]
            params = [2, 4]
            num_supports = 20
        "#);
        let report = run_experiment(&c).unwrap();
        assert_eq!(report.table.len(), 2 * 2 * 2 * 2);
    }

    #[test]
    fn failing_cells_are_isolated() {
        // an infinite beta is rejected by the solver, a finite one runs
        let mut c = cfg(r#"
            experiment = "cs_fista_sweep_beta"
            seeds = [0]
            side = 8
            params = [1.0, 2.0]
            iters = 3
        "#);
        c.params[1] = f64::INFINITY;
        let report = run_cells(&c, &load_signals(&c).unwrap());
        assert_eq!(report.failures.len(), 2);
        assert_eq!(report.table.len(), 2 * 4);
        assert!(report.table.rows.iter().all(|r| r.param == 1.0));
    }

    #[test]
    fn controlled_keeps_sparsity() {
        let c = cfg(r#"
            experiment = "cs_controlled"
            seeds = [0]
            side = 16
            keep = 6
            iters = 2
            [signal]
            kind = "power"
            decay = 0.8
        "#);
        let job = Job { seed: 0, source: 0, ratio: 0.5 };
        let p = build_problem(&c, &load_signals(&c).unwrap()[0], &job).unwrap();
        assert_eq!(p.x_gt.iter().filter(|v| **v != 0.0).count(), 6);
    }

    #[test]
    fn config_errors_surface() {
        let c = cfg(r#"
            experiment = "cs_pgd_sweep_r"
            seeds = []
            side = 8
            params = [1.0]
        "#);
        assert!(matches!(run_experiment(&c), Err(Error::Config(_))));
    }
}
