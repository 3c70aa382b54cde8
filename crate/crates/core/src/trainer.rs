//! Hyperparameter training on sampled log-marginal-likelihood estimates.
//!
//! The trainer is a deterministic coordinate-ascent loop over per-parameter
//! candidate grids. Every candidate evaluation is recorded in a trace;
//! moves are accepted only when the estimated improvement exceeds its own
//! combined statistical uncertainty, which keeps the loop from chasing
//! sampling noise. The same loop runs against the exact Cholesky oracle,
//! which is how estimator quality is audited end to end.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::baselines::exact_lml;
use crate::error::{Error, Result};
use crate::estimators::{choose_rotation_constant, estimate_lml, headroom_bound, EstimateReport};
use crate::kernels::{regularized_covariance, Dataset, Hyperparameters, KernelKind, KernelSpec};
use crate::numerics::{eigendecompose, spectral_upper_bound};
use crate::qsim::{ClampPolicy, PhaseEstimationConfig};
use crate::rng::derive_seed;

/// Difference between two LML estimates and the combined standard error of
/// that difference (independent estimates, quadrature).
pub fn delta_lml(prev: &EstimateReport, next: &EstimateReport) -> (f64, f64) {
    let delta = next.mean - prev.mean;
    let stderr = (prev.standard_error * prev.standard_error
        + next.standard_error * next.standard_error)
        .sqrt();
    (delta, stderr)
}

/// How candidate hyperparameters are scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LmlEvaluator {
    /// Cholesky oracle; reports carry zero standard error.
    Exact,
    /// Sampled estimate through phase estimation.
    Quantum {
        register_size: usize,
        /// Fixed evolution time; None re-derives the default top-bin rule
        /// per candidate (the spectral bound moves with the parameters).
        t0: Option<f64>,
        samples_det: u64,
        samples_fit: u64,
    },
}

/// Candidate values per coordinate. Lists are sorted ascending on
/// validation so tie-breaking favors smaller parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingGrid {
    pub lengthscales: Vec<f64>,
    pub signal_variances: Vec<f64>,
    pub noise_variances: Vec<f64>,
}

impl TrainingGrid {
    fn validated(&self) -> Result<Self> {
        let mut grid = self.clone();
        for list in [
            &mut grid.lengthscales,
            &mut grid.signal_variances,
            &mut grid.noise_variances,
        ] {
            if list.is_empty() {
                return Err(Error::EmptyGrid);
            }
            if list.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidConfig(
                    "grid values must be finite and > 0".into(),
                ));
            }
            list.sort_by(f64::total_cmp);
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainerConfig {
    pub evaluator: LmlEvaluator,
    /// Maximum full coordinate passes.
    pub max_steps: u32,
    pub seed: u64,
}

impl TrainerConfig {
    pub fn new(evaluator: LmlEvaluator, seed: u64) -> Self {
        Self {
            evaluator,
            max_steps: 8,
            seed,
        }
    }

    pub fn with_max_steps(mut self, max_steps: u32) -> Self {
        self.max_steps = max_steps;
        self
    }
}

/// One recorded evaluation. `lml` is None when the candidate could not be
/// scored (numerically singular matrix, invalid simulator configuration);
/// such steps are never accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingStep {
    pub theta: Hyperparameters,
    pub lml: Option<EstimateReport>,
    /// Improvement over the incumbent at evaluation time.
    pub delta_lml: f64,
    pub delta_stderr: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub steps: Vec<TrainingStep>,
    pub best_theta: Hyperparameters,
    pub budget_used: u64,
}

struct Ascent<'a> {
    data: &'a Dataset,
    kind: KernelKind,
    support_radius: f64,
    cfg: &'a TrainerConfig,
    eval_counter: u64,
    budget_used: u64,
}

impl Ascent<'_> {
    fn samples_per_eval(&self) -> u64 {
        match self.cfg.evaluator {
            LmlEvaluator::Exact => 0,
            LmlEvaluator::Quantum {
                samples_det,
                samples_fit,
                ..
            } => samples_det + samples_fit,
        }
    }

    fn evaluate(&mut self, theta: Hyperparameters) -> Option<EstimateReport> {
        let eval_seed = derive_seed(self.cfg.seed, self.eval_counter);
        self.eval_counter += 1;
        let spec = KernelSpec::new(self.kind, theta.with_support_radius(self.support_radius));
        let result = match self.cfg.evaluator {
            LmlEvaluator::Exact => exact_lml(self.data, &spec).map(|mean| EstimateReport {
                mean,
                standard_error: 0.0,
                sample_count: 0,
                seed: eval_seed,
                clamp_count: 0,
                reject_count: 0,
            }),
            LmlEvaluator::Quantum {
                register_size,
                t0,
                samples_det,
                samples_fit,
            } => (|| {
                let a = regularized_covariance(self.data, &spec)?;
                let sd = eigendecompose(&a)?;
                let py = sd.project(self.data.outputs())?;
                let lambda_upper = spectral_upper_bound(&a);
                let pe = match t0 {
                    Some(t0) => PhaseEstimationConfig::new(
                        register_size,
                        t0,
                        lambda_upper,
                        ClampPolicy::HalfBinClamp,
                    )?,
                    None => PhaseEstimationConfig::with_default_t0(
                        register_size,
                        headroom_bound(lambda_upper),
                        ClampPolicy::HalfBinClamp,
                    )?,
                };
                let c = choose_rotation_constant(&pe, spec.params.noise_variance)?;
                estimate_lml(&sd, &py, &pe, &c, samples_det, samples_fit, eval_seed)
            })(),
        };
        match result {
            Ok(report) => {
                self.budget_used += self.samples_per_eval();
                Some(report)
            }
            Err(_) => None,
        }
    }
}

/// Coordinate ascent over the grid: sweeps lengthscale, signal variance,
/// then noise variance, accepting a move only when the mean improvement
/// exceeds one combined standard error. Stops after a full pass without an
/// accepted move, or after `max_steps` passes.
///
/// `budget_used` counts simulator samples actually drawn:
/// (successful evaluations) x (samples_det + samples_fit), exactly; the
/// exact evaluator draws none.
pub fn train(
    data: &Dataset,
    kind: KernelKind,
    support_radius: f64,
    grid: &TrainingGrid,
    cfg: &TrainerConfig,
) -> Result<TrainingTrace> {
    if cfg.max_steps < 1 {
        return Err(Error::InvalidConfig("max_steps must be >= 1".into()));
    }
    let grid = grid.validated()?;
    let mut ascent = Ascent {
        data,
        kind,
        support_radius,
        cfg,
        eval_counter: 0,
        budget_used: 0,
    };

    // Start from the per-coordinate median of each sorted list.
    let mut indices = [
        grid.lengthscales.len() / 2,
        grid.signal_variances.len() / 2,
        grid.noise_variances.len() / 2,
    ];
    let theta_at = |idx: [usize; 3]| {
        Hyperparameters::new(
            grid.lengthscales[idx[0]],
            grid.signal_variances[idx[1]],
            grid.noise_variances[idx[2]],
        )
        .with_support_radius(support_radius)
    };

    let mut steps: Vec<TrainingStep> = Vec::new();
    let mut current = match ascent.evaluate(theta_at(indices)) {
        Some(report) => report,
        None => {
            return Err(Error::InvalidConfig(
                "initial grid point could not be evaluated".into(),
            ))
        }
    };
    steps.push(TrainingStep {
        theta: theta_at(indices),
        lml: Some(current.clone()),
        delta_lml: 0.0,
        delta_stderr: std::f64::consts::SQRT_2 * current.standard_error,
        accepted: false,
    });

    for _pass in 0..cfg.max_steps {
        let mut moved = false;
        for coord in 0..3 {
            let list = match coord {
                0 => &grid.lengthscales,
                1 => &grid.signal_variances,
                _ => &grid.noise_variances,
            };
            let mut best: Option<(usize, usize, f64)> = None; // (step idx, grid idx, delta)
            for (gi, _) in list.iter().enumerate() {
                if gi == indices[coord] {
                    continue;
                }
                let mut cand_indices = indices;
                cand_indices[coord] = gi;
                let theta = theta_at(cand_indices);
                let report = ascent.evaluate(theta);
                let (delta, stderr) = match &report {
                    Some(r) => delta_lml(&current, r),
                    None => (f64::NEG_INFINITY, 0.0),
                };
                let failed = report.is_none();
                steps.push(TrainingStep {
                    theta,
                    lml: report,
                    delta_lml: if failed { 0.0 } else { delta },
                    delta_stderr: stderr,
                    accepted: false,
                });
                // Strict > both against the threshold and against the best
                // candidate so far: ascending order then favors the smaller
                // parameter value on exact ties.
                if !failed && delta > stderr && best.is_none_or(|(_, _, d)| delta > d) {
                    best = Some((steps.len() - 1, gi, delta));
                }
            }
            if let Some((step_idx, gi, _)) = best {
                indices[coord] = gi;
                current = steps[step_idx]
                    .lml
                    .clone()
                    .expect("accepted step has a report");
                steps[step_idx].accepted = true;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }

    // Best point overall: highest recorded mean among successful
    // evaluations; earliest (hence smallest-value) wins ties.
    let best_step = steps
        .iter()
        .filter(|s| s.lml.is_some())
        .max_by(|a, b| {
            let am = a.lml.as_ref().unwrap().mean;
            let bm = b.lml.as_ref().unwrap().mean;
            am.partial_cmp(&bm).unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("at least the initial evaluation succeeded");

    Ok(TrainingTrace {
        best_theta: best_step.theta,
        budget_used: ascent.budget_used,
        steps,
    })
}

/// Writes one JSON object per step, then a summary line.
pub fn write_trace_jsonl<W: Write>(trace: &TrainingTrace, out: &mut W) -> Result<()> {
    for step in &trace.steps {
        serde_json::to_writer(&mut *out, step)
            .map_err(|e| Error::InvalidConfig(format!("serialization failed: {e}")))?;
        writeln!(out)?;
    }
    let summary = serde_json::json!({
        "best_theta": trace.best_theta,
        "budget_used": trace.budget_used,
        "steps": trace.steps.len(),
    });
    serde_json::to_writer(&mut *out, &summary)
        .map_err(|e| Error::InvalidConfig(format!("serialization failed: {e}")))?;
    writeln!(out)?;
    Ok(())
}

/// Configuration for the relative-variance scaling study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyConfig {
    pub register_size: usize,
    pub t0: Option<f64>,
    pub samples_det: u64,
    pub samples_fit: u64,
    /// Independent repetitions of the two-point delta estimate per size.
    pub repetitions: u32,
    /// Relative lengthscale perturbation defining the delta (default 5%).
    pub delta_fraction: f64,
    /// |exact delta| below this flags the row: the denominator is too small
    /// for the ratio to mean anything.
    pub denominator_threshold: f64,
    pub seed: u64,
}

impl StudyConfig {
    pub fn new(register_size: usize, samples_det: u64, samples_fit: u64, seed: u64) -> Self {
        Self {
            register_size,
            t0: None,
            samples_det,
            samples_fit,
            repetitions: 50,
            delta_fraction: 0.05,
            denominator_threshold: 1e-6,
            seed,
        }
    }
}

/// One problem size in the study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: usize,
    /// Var[delta-LML estimate] / (exact delta-LML)^2.
    pub rel_var: f64,
    /// Half-width of the ~95% confidence interval on rel_var, from the
    /// chi-squared large-sample approximation for a variance.
    pub ci: f64,
    pub delta_exact: f64,
    /// True when |delta_exact| is below the configured threshold; flagged
    /// rows are excluded from trend checks.
    pub flagged: bool,
}

/// Measures how the relative variance of the delta-LML estimate scales with
/// problem size. For each n the provider supplies a dataset, the base
/// hyperparameters are perturbed by `delta_fraction` in lengthscale, and the
/// delta of the two sampled LML estimates is recomputed `repetitions` times
/// on independent streams. The denominator is the exact (Cholesky) delta,
/// so the ratio isolates estimator variance from estimator bias.
pub fn relative_variance_study<F>(
    provider: F,
    spec: &KernelSpec,
    sizes: &[usize],
    cfg: &StudyConfig,
) -> Result<Vec<StudyRow>>
where
    F: Fn(usize, u64) -> Result<Dataset>,
{
    if cfg.repetitions < 2 {
        return Err(Error::TooFewSamples(cfg.repetitions as usize));
    }
    if !(cfg.delta_fraction > 0.0 && cfg.delta_fraction.is_finite()) {
        return Err(Error::OutOfRange {
            what: "delta_fraction",
            value: cfg.delta_fraction,
            constraint: "must be finite and > 0",
        });
    }
    let mut perturbed = *spec;
    perturbed.params.lengthscale *= 1.0 + cfg.delta_fraction;

    let mut rows = Vec::with_capacity(sizes.len());
    for (size_index, &n) in sizes.iter().enumerate() {
        let data = provider(n, derive_seed(cfg.seed, size_index as u64))?;
        let delta_exact = exact_lml(&data, &perturbed)? - exact_lml(&data, spec)?;

        // Decompose both parameter points once; repetitions only reseed.
        let mut contexts = Vec::with_capacity(2);
        for point in [spec, &perturbed] {
            let a = regularized_covariance(&data, point)?;
            let sd = eigendecompose(&a)?;
            let py = sd.project(data.outputs())?;
            let lambda_upper = spectral_upper_bound(&a);
            let pe = match cfg.t0 {
                Some(t0) => PhaseEstimationConfig::new(
                    cfg.register_size,
                    t0,
                    lambda_upper,
                    ClampPolicy::HalfBinClamp,
                )?,
                None => PhaseEstimationConfig::with_default_t0(
                    cfg.register_size,
                    headroom_bound(lambda_upper),
                    ClampPolicy::HalfBinClamp,
                )?,
            };
            let c = choose_rotation_constant(&pe, point.params.noise_variance)?;
            contexts.push((sd, py, pe, c));
        }

        let mut mean = 0.0;
        let mut m2 = 0.0;
        for rep in 0..cfg.repetitions {
            let label = ((size_index as u64) << 32) | (rep as u64) << 1;
            let mut values = [0.0; 2];
            for (which, (sd, py, pe, c)) in contexts.iter().enumerate() {
                let seed = derive_seed(cfg.seed, label | which as u64);
                let report = estimate_lml(sd, py, pe, c, cfg.samples_det, cfg.samples_fit, seed)?;
                values[which] = report.mean;
            }
            let delta = values[1] - values[0];
            let count = (rep + 1) as f64;
            let step = delta - mean;
            mean += step / count;
            m2 += step * (delta - mean);
        }
        let variance = m2 / (cfg.repetitions as f64 - 1.0);
        let floor = cfg.denominator_threshold * cfg.denominator_threshold;
        let rel_var = if variance == 0.0 {
            0.0
        } else {
            variance / (delta_exact * delta_exact).max(floor)
        };
        let ci = rel_var * 1.96 * (2.0 / (cfg.repetitions as f64 - 1.0)).sqrt();
        rows.push(StudyRow {
            n,
            rel_var,
            ci,
            delta_exact,
            flagged: delta_exact.abs() < cfg.denominator_threshold,
        });
    }
    Ok(rows)
}

/// Writes study rows as CSV.
pub fn write_study_csv<W: Write>(rows: &[StudyRow], out: &mut W) -> Result<()> {
    writeln!(out, "n,rel_var,ci,delta_exact,flagged")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.n, row.rel_var, row.ci, row.delta_exact, row.flagged
        )?;
    }
    Ok(())
}
