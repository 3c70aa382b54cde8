//! Sampling-based estimators for the two expensive terms of the GP
//! log marginal likelihood, and their assembly.
//!
//! Log-determinant: a uniformly random eigenindex (the maximally mixed
//! work register) is pushed through phase estimation, the measured bin is
//! decoded to an eigenvalue estimate, and `log det A = n <log lambda>`
//! turns the sample mean of logs into the estimate.
//!
//! Data fit: the work register is prepared as `|y>`, so the eigenindex
//! arrives with probability `gamma_i^2 / ||y||^2`; an ancilla is rotated by
//! the eigenvalue transformation `f(lambda) = 1 / sqrt(lambda)` and
//! post-selected, succeeding with probability `C^2 / lambda_hat`. The
//! success frequency, rescaled by `||y||^2 / C^2`, estimates
//! `y^T A^{-1} y = sum_i gamma_i^2 / lambda_i`.
//!
//! Both estimators draw from per-trial derived RNG streams (see [`crate::rng`]),
//! so results are bit-reproducible at any sample count and trivially
//! parallelizable without changing output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ProjectedVector, SpectralDecomposition};
use crate::qsim::{
    decode_eigenvalue, pe_outcome_distribution, ClampPolicy, DecodedEigenvalue, OutcomeSampler,
    PhaseEstimationConfig,
};
use crate::rng::{trial_rng, DOMAIN_DATAFIT, DOMAIN_LOGDET};

use rand::Rng;
use rand_distr::{Distribution, OpenClosed01};
use std::f64::consts::{PI, TAU};

/// Cap on redraws per trial under [`ClampPolicy::Resample`]; hitting it
/// means the configuration funnels essentially all mass into bin 0.
const MAX_REDRAWS: u32 = 10_000;

/// Monte Carlo output of any estimator in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub mean: f64,
    #[serde(rename = "stderr")]
    pub standard_error: f64,
    #[serde(rename = "samples")]
    pub sample_count: u64,
    pub seed: u64,
    /// Number of bin-0 measurements (floored under HalfBinClamp, redrawn
    /// under Resample).
    #[serde(rename = "clamps")]
    pub clamp_count: u64,
    /// Post-selection failures (data-fit trials only).
    #[serde(rename = "rejects")]
    pub reject_count: u64,
}

/// Ancilla rotation scale C: the post-selection succeeds with probability
/// `C^2 / lambda_hat`, which must stay a valid probability for every
/// decodable eigenvalue estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationConstant {
    c: f64,
    /// Inputs the production rule used, kept for reporting.
    lambda_upper: f64,
    noise_variance: f64,
}

impl RotationConstant {
    /// Directly sets C. The caller must ensure `C^2 <= lambda_hat` for every
    /// eigenvalue estimate the run can decode; trials verify this at runtime
    /// and error out otherwise. Prefer [`choose_rotation_constant`], whose
    /// output is safe unconditionally.
    pub fn with_value(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::OutOfRange {
                what: "rotation constant",
                value: c,
                constraint: "must be finite and > 0",
            });
        }
        Ok(Self {
            c,
            lambda_upper: f64::NAN,
            noise_variance: f64::NAN,
        })
    }

    pub fn value(&self) -> f64 {
        self.c
    }

    pub fn squared(&self) -> f64 {
        self.c * self.c
    }

    /// The (lambda_upper, noise_variance) pair recorded by the production
    /// rule; NaN when constructed directly.
    pub fn derivation(&self) -> (f64, f64) {
        (self.lambda_upper, self.noise_variance)
    }
}

/// Relative slack applied to a spectral upper bound before it is used to
/// pick the default evolution time.
///
/// The default time maps the bound to the top register bin. An eigenvalue
/// sitting fractionally below the top bin leaks outcome-law tail mass past
/// the register end, which wraps around the phase circle onto the lowest
/// bins; wrapped outcomes decode to near-zero eigenvalues and wreck the
/// inverse-eigenvalue estimator in particular. Kernel matrices routinely
/// have eigenvalues within a fraction of a percent of their Gershgorin
/// bound, so production call sites inflate the bound by this factor to keep
/// every eigenphase a comfortable distance from the wrap point.
pub const SPECTRAL_HEADROOM: f64 = 0.05;

/// A spectral bound padded by [`SPECTRAL_HEADROOM`]; still a valid upper
/// bound, but safe to feed to the default evolution-time rule.
pub fn headroom_bound(lambda_upper: f64) -> f64 {
    lambda_upper * (1.0 + SPECTRAL_HEADROOM)
}

/// Production rule for C: `min(sqrt(noise_variance), 0.999 sqrt(pi / t0))`.
///
/// The second branch is the smallest value a half-bin clamp can decode to,
/// so `C^2 / lambda_hat <= 1` holds for every decodable outcome; the first
/// branch keeps C at the spectrum floor, where the success probability
/// `C^2 / lambda` is largest without exceeding 1.
pub fn choose_rotation_constant(
    cfg: &PhaseEstimationConfig,
    noise_variance: f64,
) -> Result<RotationConstant> {
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(Error::OutOfRange {
            what: "noise_variance",
            value: noise_variance,
            constraint: "must be finite and > 0",
        });
    }
    let clamp_floor = (PI / cfg.evolution_time()).sqrt() * 0.999;
    let c = noise_variance.sqrt().min(clamp_floor);
    Ok(RotationConstant {
        c,
        lambda_upper: cfg.lambda_upper(),
        noise_variance,
    })
}

/// Decoded eigenvalue per bin (index 0 follows the clamp policy; NaN there
/// under Resample, where bin 0 is never consumed).
fn decode_table(cfg: &PhaseEstimationConfig) -> Vec<f64> {
    (0..cfg.register_size())
        .map(|k| match decode_eigenvalue(k, cfg) {
            Ok(DecodedEigenvalue::Value(v)) | Ok(DecodedEigenvalue::Clamped(v)) => v,
            _ => f64::NAN,
        })
        .collect()
}

/// One phase-estimation sampler per eigenvalue.
fn eigen_samplers(
    sd: &SpectralDecomposition,
    cfg: &PhaseEstimationConfig,
) -> Result<Vec<OutcomeSampler>> {
    (0..sd.dim())
        .map(|i| {
            Ok(OutcomeSampler::new(&pe_outcome_distribution(
                sd.eigenvalue(i),
                cfg,
            )?))
        })
        .collect()
}

/// Steps 1-5 of the log-det routine as a single draw: uniform eigenindex,
/// phase estimation, decode. Under Resample, bin-0 outcomes redraw the whole
/// trial (index and outcome).
pub fn sample_random_eigenvalue<R: Rng + ?Sized>(
    sd: &SpectralDecomposition,
    cfg: &PhaseEstimationConfig,
    rng: &mut R,
) -> Result<f64> {
    let n = sd.dim();
    for _ in 0..MAX_REDRAWS {
        let i = rng.random_range(0..n);
        let k = crate::qsim::sample_pe_outcome(sd.eigenvalue(i), cfg, rng)?;
        match decode_eigenvalue(k, cfg)? {
            DecodedEigenvalue::Value(v) | DecodedEigenvalue::Clamped(v) => return Ok(v),
            DecodedEigenvalue::Resample => continue,
        }
    }
    Err(Error::InvalidConfig(format!(
        "resample policy failed to decode after {MAX_REDRAWS} redraws"
    )))
}

/// Log-determinant estimator: `mean = n <log lambda_hat>` over `samples`
/// uniform-eigenindex draws; the standard error is `n` times the sample
/// standard deviation of the logs over `sqrt(samples)`.
pub fn estimate_logdet(
    sd: &SpectralDecomposition,
    cfg: &PhaseEstimationConfig,
    samples: u64,
    seed: u64,
) -> Result<EstimateReport> {
    if samples < 2 {
        return Err(Error::TooFewSamples(samples as usize));
    }
    let n = sd.dim();
    let samplers = eigen_samplers(sd, cfg)?;
    let decode = decode_table(cfg);
    let log_decode: Vec<f64> = decode.iter().map(|v| v.ln()).collect();

    let mut clamp_count = 0u64;
    // Welford accumulation: exact-bin spectra must report a standard error
    // of exactly zero, which naive sum-of-squares cancellation would spoil.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for trial in 0..samples {
        let mut rng = trial_rng(seed, DOMAIN_LOGDET, trial);
        let mut x = None;
        for _ in 0..MAX_REDRAWS {
            let i = rng.random_range(0..n);
            let k = samplers[i].sample(&mut rng);
            if k == 0 {
                clamp_count += 1;
                if cfg.clamp_policy() == ClampPolicy::Resample {
                    continue;
                }
            }
            x = Some(log_decode[k]);
            break;
        }
        let x = x.ok_or_else(|| {
            Error::InvalidConfig(format!(
                "resample policy failed to decode after {MAX_REDRAWS} redraws"
            ))
        })?;
        let count = (trial + 1) as f64;
        let delta = x - mean;
        mean += delta / count;
        m2 += delta * (x - mean);
    }

    let nf = n as f64;
    let variance = m2 / (samples - 1) as f64;
    Ok(EstimateReport {
        mean: nf * mean,
        standard_error: nf * (variance / samples as f64).sqrt(),
        sample_count: samples,
        seed,
        clamp_count,
        reject_count: 0,
    })
}

/// Draws the eigenindex for a `|y>`-prepared work register: index i with
/// probability `gamma_i^2 / ||y||^2`. Indices with exactly zero weight are
/// never returned.
fn sample_projected_index<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let u: f64 = OpenClosed01.sample(rng);
    let total = *cumulative.last().expect("nonempty");
    let target = u * total;
    let i = cumulative.partition_point(|&c| c < target);
    i.min(cumulative.len() - 1)
}

fn weight_cumulative(py: &ProjectedVector) -> Result<Vec<f64>> {
    if py.norm() == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut acc = 0.0;
    Ok(py
        .coefficients()
        .iter()
        .map(|g| {
            acc += g * g;
            acc
        })
        .collect())
}

/// Success probability for one decoded eigenvalue; errors if C was chosen
/// too large for this outcome to be a valid amplitude.
fn success_probability(c_squared: f64, lambda_hat: f64) -> Result<f64> {
    let p = c_squared / lambda_hat;
    if p > 1.0 + 1e-12 {
        return Err(Error::OutOfRange {
            what: "success probability C^2 / lambda_hat",
            value: p,
            constraint: "must be <= 1; rotation constant too large",
        });
    }
    Ok(p.min(1.0))
}

/// One post-selection trial of the modified linear-system routine: draw an
/// eigenindex from the `|y>` preparation, phase-estimate its eigenvalue,
/// rotate the ancilla by `C / sqrt(lambda_hat)`, and measure. Returns
/// whether post-selection succeeded.
pub fn qlsa_datafit_trial<R: Rng + ?Sized>(
    sd: &SpectralDecomposition,
    py: &ProjectedVector,
    cfg: &PhaseEstimationConfig,
    c: &RotationConstant,
    rng: &mut R,
) -> Result<bool> {
    let cumulative = weight_cumulative(py)?;
    for _ in 0..MAX_REDRAWS {
        let i = sample_projected_index(&cumulative, rng);
        let k = crate::qsim::sample_pe_outcome(sd.eigenvalue(i), cfg, rng)?;
        let lambda_hat = match decode_eigenvalue(k, cfg)? {
            DecodedEigenvalue::Value(v) | DecodedEigenvalue::Clamped(v) => v,
            DecodedEigenvalue::Resample => continue,
        };
        let p = success_probability(c.squared(), lambda_hat)?;
        return Ok(rng.random::<f64>() < p);
    }
    Err(Error::InvalidConfig(format!(
        "resample policy failed to decode after {MAX_REDRAWS} redraws"
    )))
}

/// Data-fit estimator: success frequency of `samples` post-selection trials,
/// rescaled by `||y||^2 / C^2`. The reported standard error is the exact
/// Bernoulli one, `(||y||^2 / C^2) sqrt(p_hat (1 - p_hat) / samples)`.
pub fn estimate_datafit(
    sd: &SpectralDecomposition,
    py: &ProjectedVector,
    cfg: &PhaseEstimationConfig,
    c: &RotationConstant,
    samples: u64,
    seed: u64,
) -> Result<EstimateReport> {
    if samples < 2 {
        return Err(Error::TooFewSamples(samples as usize));
    }
    let cumulative = weight_cumulative(py)?;
    let samplers = eigen_samplers(sd, cfg)?;
    let decode = decode_table(cfg);
    let c_squared = c.squared();

    let mut successes = 0u64;
    let mut clamp_count = 0u64;
    for trial in 0..samples {
        let mut rng = trial_rng(seed, DOMAIN_DATAFIT, trial);
        let mut outcome = None;
        for _ in 0..MAX_REDRAWS {
            let i = sample_projected_index(&cumulative, &mut rng);
            let k = samplers[i].sample(&mut rng);
            if k == 0 {
                clamp_count += 1;
                if cfg.clamp_policy() == ClampPolicy::Resample {
                    continue;
                }
            }
            let p = success_probability(c_squared, decode[k])?;
            outcome = Some(rng.random::<f64>() < p);
            break;
        }
        let success = outcome.ok_or_else(|| {
            Error::InvalidConfig(format!(
                "resample policy failed to decode after {MAX_REDRAWS} redraws"
            ))
        })?;
        if success {
            successes += 1;
        }
    }

    let scale = py.squared_norm() / c_squared;
    let p_hat = successes as f64 / samples as f64;
    Ok(EstimateReport {
        mean: scale * p_hat,
        standard_error: scale * (p_hat * (1.0 - p_hat) / samples as f64).sqrt(),
        sample_count: samples,
        seed,
        clamp_count,
        reject_count: samples - successes,
    })
}

/// Assembled log marginal likelihood:
/// `-1/2 logdet - 1/2 datafit - (n/2) log(2 pi)`.
///
/// The two estimators run on disjoint RNG domains of the same seed, so their
/// errors are independent and add in quadrature. A zero output vector makes
/// the data-fit term exactly zero, so it is reported as such without
/// running trials (the trial routine itself rejects zero vectors).
pub fn estimate_lml(
    sd: &SpectralDecomposition,
    py: &ProjectedVector,
    cfg: &PhaseEstimationConfig,
    c: &RotationConstant,
    samples_det: u64,
    samples_fit: u64,
    seed: u64,
) -> Result<EstimateReport> {
    let logdet = estimate_logdet(sd, cfg, samples_det, seed)?;
    let datafit = if py.norm() == 0.0 {
        EstimateReport {
            mean: 0.0,
            standard_error: 0.0,
            sample_count: samples_fit,
            seed,
            clamp_count: 0,
            reject_count: 0,
        }
    } else {
        estimate_datafit(sd, py, cfg, c, samples_fit, seed)?
    };
    let n = sd.dim() as f64;
    let mean = -0.5 * logdet.mean - 0.5 * datafit.mean - 0.5 * n * (TAU).ln();
    let standard_error = 0.5
        * (logdet.standard_error * logdet.standard_error
            + datafit.standard_error * datafit.standard_error)
            .sqrt();
    Ok(EstimateReport {
        mean,
        standard_error,
        sample_count: logdet.sample_count + datafit.sample_count,
        seed,
        clamp_count: logdet.clamp_count + datafit.clamp_count,
        reject_count: datafit.reject_count,
    })
}

/// Exact expected value of `log lambda_hat` for one eigenvalue under the
/// configured decode rules: the quantization-bias oracle. Under Resample the
/// expectation is conditional on a decodable outcome.
pub fn expected_log_decode(lambda: f64, cfg: &PhaseEstimationConfig) -> Result<f64> {
    let dist = pe_outcome_distribution(lambda, cfg)?;
    let decode = decode_table(cfg);
    match cfg.clamp_policy() {
        ClampPolicy::HalfBinClamp => Ok(dist
            .probabilities()
            .iter()
            .zip(&decode)
            .map(|(p, v)| p * v.ln())
            .sum()),
        ClampPolicy::Resample => {
            let kept: f64 = dist.probabilities()[1..].iter().sum();
            let sum: f64 = dist.probabilities()[1..]
                .iter()
                .zip(&decode[1..])
                .map(|(p, v)| p * v.ln())
                .sum();
            Ok(sum / kept)
        }
    }
}

/// Exact success probability of one data-fit trial: the mixture expectation
/// `sum_i w_i sum_k P(k | lambda_i) C^2 / lambda_hat_k` with the same bin-0
/// handling as the sampler. The Monte Carlo success frequency must converge
/// to this number; as bins refine it approaches
/// `(C^2 / ||y||^2) y^T A^{-1} y`.
pub fn exact_success_probability(
    sd: &SpectralDecomposition,
    py: &ProjectedVector,
    cfg: &PhaseEstimationConfig,
    c: &RotationConstant,
) -> Result<f64> {
    if py.norm() == 0.0 {
        return Err(Error::ZeroVector);
    }
    let decode = decode_table(cfg);
    let c_squared = c.squared();
    let mut numerator = 0.0;
    let mut kept_mass = 0.0;
    for i in 0..sd.dim() {
        let w = py.coefficients()[i] * py.coefficients()[i] / py.squared_norm();
        if w == 0.0 {
            continue;
        }
        let dist = pe_outcome_distribution(sd.eigenvalue(i), cfg)?;
        match cfg.clamp_policy() {
            ClampPolicy::HalfBinClamp => {
                for (k, p) in dist.probabilities().iter().enumerate() {
                    if *p > 0.0 {
                        numerator += w * p * success_probability(c_squared, decode[k])?;
                    }
                }
                kept_mass += w;
            }
            ClampPolicy::Resample => {
                for (k, p) in dist.probabilities().iter().enumerate().skip(1) {
                    if *p > 0.0 {
                        numerator += w * p * success_probability(c_squared, decode[k])?;
                    }
                }
                kept_mass += w * dist.probabilities()[1..].iter().sum::<f64>();
            }
        }
    }
    Ok(numerator / kept_mass)
}
