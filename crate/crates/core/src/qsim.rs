//! Phase-estimation outcome model, in two interchangeable backends.
//!
//! The machinery being simulated: a work register holding a spectral mixture
//! of A's eigenvectors, a T-dimensional time register prepared uniformly,
//! conditional evolution applying `e^{+i A t0 tau / T}` for time index tau,
//! an inverse Fourier transform on the time register, and a computational-
//! basis readout of the bin k.
//!
//! For a single eigenvalue lambda the outcome law has the closed Fejer form
//!
//! ```text
//! P(k) = sin^2(T delta_k / 2) / (T^2 sin^2(delta_k / 2)),
//! delta_k = (lambda t0 - 2 pi k) / T,
//! ```
//!
//! with the limit value 1 when delta_k = 0 (eigenphase exactly on bin k).
//! The analytic backend evaluates this directly and is cheap enough to
//! sample millions of outcomes. The statevector backend simulates all
//! n * T amplitudes of the composite system and exists to certify that the
//! analytic law is exactly faithful to the circuit; the two must agree to
//! near machine precision on every configuration.
//!
//! Conventions fixed here (outcome statistics are invariant to both): the
//! time register indexes tau in {0, ..., T-1}, and the Fourier transform
//! carries the e^{-2 pi i tau k / T} sign so that bins map to positive
//! eigenvalues under e^{+i A t}.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, OpenClosed01};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{eigendecompose, RealSymmetricMatrix};

/// Largest composite statevector (n * T amplitudes) the exact backend will
/// allocate by default.
pub const DEFAULT_STATEVECTOR_BUDGET: usize = 1 << 20;

/// Relative slack used when revalidating the no-aliasing product
/// `t0 * lambda_upper <= 2 pi (T - 1)`: the default t0 places lambda_upper
/// exactly on the top bin, and recomputing the product can land one ulp
/// above the bound.
const ALIASING_REL_SLACK: f64 = 1e-12;

/// What to do when the measured bin is k = 0, which would decode to
/// eigenvalue 0 and poison any logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClampPolicy {
    /// Decode k = 0 as half a bin width, pi / t0. Default: keeps the
    /// eigenvalue mixture unbiased across trials and merely floors the
    /// decoded value; occurrences are counted and reported.
    HalfBinClamp,
    /// Signal the caller to redraw. Biases the mixture toward eigenvalues
    /// that decode cleanly, so it is opt-in.
    Resample,
}

/// Register size T, evolution time t0, and the spectral bound they were
/// chosen against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimationConfig {
    register_size: usize,
    evolution_time: f64,
    lambda_upper: f64,
    clamp_policy: ClampPolicy,
}

impl PhaseEstimationConfig {
    /// Validates and builds a configuration. `register_size` must be a power
    /// of two >= 2, and the no-aliasing constraint
    /// `t0 * lambda_upper / (2 pi) <= T - 1` must hold so the largest
    /// eigenphase lands at or below the top bin.
    pub fn new(
        register_size: usize,
        evolution_time: f64,
        lambda_upper: f64,
        clamp_policy: ClampPolicy,
    ) -> Result<Self> {
        if register_size < 2 || !register_size.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "register size must be a power of two >= 2, got {register_size}"
            )));
        }
        if !(evolution_time > 0.0 && evolution_time.is_finite()) {
            return Err(Error::OutOfRange {
                what: "evolution_time",
                value: evolution_time,
                constraint: "must be finite and > 0",
            });
        }
        if !(lambda_upper > 0.0 && lambda_upper.is_finite()) {
            return Err(Error::OutOfRange {
                what: "lambda_upper",
                value: lambda_upper,
                constraint: "must be finite and > 0",
            });
        }
        let limit = TAU * (register_size - 1) as f64;
        if evolution_time * lambda_upper > limit * (1.0 + ALIASING_REL_SLACK) {
            return Err(Error::InvalidConfig(format!(
                "aliasing: t0 * lambda_upper = {:.6e} exceeds 2 pi (T - 1) = {:.6e}",
                evolution_time * lambda_upper,
                limit
            )));
        }
        Ok(Self {
            register_size,
            evolution_time,
            lambda_upper,
            clamp_policy,
        })
    }

    /// Default evolution time `t0 = 2 pi (T - 1) / lambda_upper`: places
    /// lambda_upper exactly on the top bin, maximizing resolution without
    /// aliasing.
    pub fn with_default_t0(
        register_size: usize,
        lambda_upper: f64,
        clamp_policy: ClampPolicy,
    ) -> Result<Self> {
        if !(lambda_upper > 0.0 && lambda_upper.is_finite()) {
            return Err(Error::OutOfRange {
                what: "lambda_upper",
                value: lambda_upper,
                constraint: "must be finite and > 0",
            });
        }
        if register_size < 2 || !register_size.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "register size must be a power of two >= 2, got {register_size}"
            )));
        }
        let evolution_time = TAU * (register_size - 1) as f64 / lambda_upper;
        Self::new(register_size, evolution_time, lambda_upper, clamp_policy)
    }

    pub fn register_size(&self) -> usize {
        self.register_size
    }

    pub fn evolution_time(&self) -> f64 {
        self.evolution_time
    }

    pub fn lambda_upper(&self) -> f64 {
        self.lambda_upper
    }

    pub fn clamp_policy(&self) -> ClampPolicy {
        self.clamp_policy
    }

    /// Resolution of decoded eigenvalues: 2 pi / t0.
    pub fn bin_width(&self) -> f64 {
        TAU / self.evolution_time
    }

    /// Continuous bin coordinate of an eigenvalue: c = lambda t0 / (2 pi).
    /// Integer c means the eigenphase sits exactly on a bin.
    pub fn center_bin(&self, lambda: f64) -> f64 {
        lambda * self.evolution_time / TAU
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        if !(lambda > 0.0 && lambda <= self.lambda_upper * (1.0 + ALIASING_REL_SLACK)) {
            return Err(Error::OutOfRange {
                what: "lambda",
                value: lambda,
                constraint: "must lie in (0, lambda_upper]",
            });
        }
        Ok(())
    }
}

/// Probability law over the T measurement bins.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    probabilities: Vec<f64>,
}

impl OutcomeDistribution {
    /// Validates non-negativity and normalization (sum within 1e-10 of 1).
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidConfig("empty distribution".into()));
        }
        if probabilities.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::NonFinite {
                context: "outcome probabilities",
            });
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm: total });
        }
        Ok(Self { probabilities })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires at least one bin
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, k: usize) -> f64 {
        self.probabilities[k]
    }

    /// Bin with the largest probability.
    pub fn mode(&self) -> usize {
        self.probabilities
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0)
    }
}

/// Precomputed inverse-CDF sampler for repeated draws from one distribution.
#[derive(Debug, Clone)]
pub struct OutcomeSampler {
    cdf: Vec<f64>,
}

impl OutcomeSampler {
    pub fn new(dist: &OutcomeDistribution) -> Self {
        let mut acc = 0.0;
        let cdf = dist
            .probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { cdf }
    }

    /// Draws one bin. Uses u in (0, 1] with the smallest k such that
    /// cdf[k] >= u, so bins carrying exactly zero mass are never selected
    /// and an exact point mass always returns its bin.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = OpenClosed01.sample(rng);
        let k = self.cdf.partition_point(|&c| c < u);
        k.min(self.cdf.len() - 1)
    }
}

/// Fejer mass at offset delta for register size t; exact 1 at delta = 0.
fn fejer_mass(delta: f64, t: f64) -> f64 {
    let s = (delta / 2.0).sin();
    if s == 0.0 {
        1.0
    } else {
        let r = (t * delta / 2.0).sin() / (t * s);
        r * r
    }
}

/// Exact measurement distribution for a single eigenvalue.
pub fn pe_outcome_distribution(
    lambda: f64,
    cfg: &PhaseEstimationConfig,
) -> Result<OutcomeDistribution> {
    cfg.check_lambda(lambda)?;
    let t = cfg.register_size;
    let tf = t as f64;
    let omega = lambda * cfg.evolution_time;

    // On-bin eigenphase: the law is exactly a point mass. Detecting it here
    // keeps constructed exact-bin instances noise-free to the last bit.
    let nearest = (omega / TAU).round();
    if nearest >= 0.0 && (nearest as usize) < t && omega - TAU * nearest == 0.0 {
        let mut probabilities = vec![0.0; t];
        probabilities[nearest as usize] = 1.0;
        return OutcomeDistribution::new(probabilities);
    }

    let probabilities = (0..t)
        .map(|k| fejer_mass((omega - TAU * k as f64) / tf, tf))
        .collect();
    OutcomeDistribution::new(probabilities)
}

/// Draws one measurement outcome for a single eigenvalue. For repeated
/// sampling at fixed lambda, build the distribution once and reuse an
/// [`OutcomeSampler`].
pub fn sample_pe_outcome<R: Rng + ?Sized>(
    lambda: f64,
    cfg: &PhaseEstimationConfig,
    rng: &mut R,
) -> Result<usize> {
    let dist = pe_outcome_distribution(lambda, cfg)?;
    Ok(OutcomeSampler::new(&dist).sample(rng))
}

/// Result of turning a measured bin back into an eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodedEigenvalue {
    /// k >= 1: the bin center 2 pi k / t0.
    Value(f64),
    /// k = 0 under [`ClampPolicy::HalfBinClamp`]: floored to pi / t0.
    Clamped(f64),
    /// k = 0 under [`ClampPolicy::Resample`]: caller should redraw.
    Resample,
}

impl DecodedEigenvalue {
    /// The decoded value, if any.
    pub fn value(&self) -> Option<f64> {
        match self {
            DecodedEigenvalue::Value(v) | DecodedEigenvalue::Clamped(v) => Some(*v),
            DecodedEigenvalue::Resample => None,
        }
    }

    pub fn is_clamped(&self) -> bool {
        matches!(self, DecodedEigenvalue::Clamped(_))
    }
}

/// Maps bin k to the eigenvalue estimate 2 pi k / t0; bin 0 is handled per
/// the configured clamp policy.
pub fn decode_eigenvalue(k: usize, cfg: &PhaseEstimationConfig) -> Result<DecodedEigenvalue> {
    if k >= cfg.register_size {
        return Err(Error::IndexOutOfRange {
            index: k,
            size: cfg.register_size,
        });
    }
    if k == 0 {
        return Ok(match cfg.clamp_policy {
            ClampPolicy::HalfBinClamp => DecodedEigenvalue::Clamped(PI / cfg.evolution_time),
            ClampPolicy::Resample => DecodedEigenvalue::Resample,
        });
    }
    Ok(DecodedEigenvalue::Value(
        TAU * k as f64 / cfg.evolution_time,
    ))
}

/// Exact joint measurement distribution over (computational basis index of
/// the work register, time-register bin) from the full composite
/// statevector.
#[derive(Debug, Clone)]
pub struct JointOutcomeDistribution {
    n: usize,
    t: usize,
    /// Row-major by basis index: probability of (b, k) at `b * t + k`.
    probabilities: Vec<f64>,
}

impl JointOutcomeDistribution {
    pub fn basis_count(&self) -> usize {
        self.n
    }

    pub fn bin_count(&self) -> usize {
        self.t
    }

    pub fn probability(&self, basis: usize, bin: usize) -> f64 {
        self.probabilities[basis * self.t + bin]
    }

    /// Marginal law of the measured bin.
    pub fn bin_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.t];
        for b in 0..self.n {
            for k in 0..self.t {
                out[k] += self.probabilities[b * self.t + k];
            }
        }
        out
    }

    /// Marginal law of the work-register readout.
    pub fn basis_marginal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|b| {
                self.probabilities[b * self.t..(b + 1) * self.t]
                    .iter()
                    .sum()
            })
            .collect()
    }

    /// Total probability; unitarity keeps this at 1 to ~1e-12.
    pub fn total_probability(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

/// Brute-force backend: simulates the full n * T composite statevector of
/// phase estimation on `A` with the given input state, and returns the exact
/// joint readout distribution.
///
/// The evolution `e^{+i A t0 tau / T}` is applied exactly through the
/// spectral decomposition; the time register then receives a literal
/// Fourier transform. No sampling is involved — the output is the exact law
/// that [`pe_outcome_distribution`] (mixed over the input state's eigenbasis
/// weights) must reproduce.
pub fn statevector_phase_estimation(
    a: &RealSymmetricMatrix,
    input_state: &[Complex64],
    cfg: &PhaseEstimationConfig,
    memory_budget: usize,
) -> Result<JointOutcomeDistribution> {
    let n = a.dim();
    let t = cfg.register_size;
    if input_state.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: input_state.len(),
        });
    }
    let amplitudes = n.checked_mul(t).ok_or(Error::BudgetExceeded {
        required: usize::MAX,
        budget: memory_budget,
    })?;
    if amplitudes > memory_budget {
        return Err(Error::BudgetExceeded {
            required: amplitudes,
            budget: memory_budget,
        });
    }
    let norm_sq: f64 = input_state.iter().map(|z| z.norm_sqr()).sum();
    if (norm_sq - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized {
            norm: norm_sq.sqrt(),
        });
    }

    let sd = eigendecompose(a)?;
    for i in 0..n {
        cfg.check_lambda(sd.eigenvalue(i))?;
    }

    // Input state in the eigenbasis: psi_i = e_i . y (real basis vectors).
    let psi: Vec<Complex64> = (0..n)
        .map(|i| {
            sd.eigenvector(i)
                .iter()
                .zip(input_state)
                .map(|(e, z)| z * *e)
                .sum()
        })
        .collect();

    // Composite state after preparing the time register uniformly and
    // applying the conditional evolution: amp[i, tau] =
    // psi_i * e^{i lambda_i t0 tau / T} / sqrt(T).
    let tf = t as f64;
    let inv_sqrt_t = 1.0 / tf.sqrt();
    let mut evolved = vec![Complex64::ZERO; n * t];
    for i in 0..n {
        let phase_step = sd.eigenvalue(i) * cfg.evolution_time / tf;
        for tau in 0..t {
            evolved[i * t + tau] =
                psi[i] * Complex64::from_polar(inv_sqrt_t, phase_step * tau as f64);
        }
    }

    // Fourier transform of the time register (literal O(T^2) sum):
    // fourier[i, k] = sum_tau evolved[i, tau] e^{-2 pi i tau k / T} / sqrt(T).
    let mut fourier = vec![Complex64::ZERO; n * t];
    for i in 0..n {
        for k in 0..t {
            let angle = -TAU * k as f64 / tf;
            let mut acc = Complex64::ZERO;
            for tau in 0..t {
                acc += evolved[i * t + tau] * Complex64::from_polar(1.0, angle * tau as f64);
            }
            fourier[i * t + k] = acc * inv_sqrt_t;
        }
    }

    // Work register back in the computational basis for readout:
    // amp[b, k] = sum_i E[b, i] fourier[i, k].
    let mut probabilities = vec![0.0; n * t];
    for k in 0..t {
        for b in 0..n {
            let mut acc = Complex64::ZERO;
            for i in 0..n {
                acc += fourier[i * t + k] * sd.eigenvector(i)[b];
            }
            probabilities[b * t + k] = acc.norm_sqr();
        }
    }

    Ok(JointOutcomeDistribution {
        n,
        t,
        probabilities,
    })
}

/// Total variation distance between two probability vectors of equal length.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Writes a distribution as `bin,probability` CSV for plotting.
pub fn write_distribution_csv<W: Write>(dist: &OutcomeDistribution, out: &mut W) -> Result<()> {
    writeln!(out, "bin,probability")?;
    for (k, p) in dist.probabilities().iter().enumerate() {
        writeln!(out, "{k},{p}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random_spd_matrix;
    use crate::rng::trial_rng;
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn cfg_with_center(center: f64, t: usize) -> (f64, PhaseEstimationConfig) {
        // Arrange lambda so that lambda * t0 / (2 pi) = center with t0 = 1.
        let lambda = center * TAU;
        let cfg = PhaseEstimationConfig::new(t, 1.0, lambda, ClampPolicy::HalfBinClamp).unwrap();
        (lambda, cfg)
    }

    #[test]
    fn exact_phase_is_point_mass() {
        let (lambda, cfg) = cfg_with_center(3.0, 4);
        let dist = pe_outcome_distribution(lambda, &cfg).unwrap();
        assert_eq!(dist.probabilities(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn matches_brute_force_amplitude_sum() {
        // center 2.5, T = 4: distribution from the explicit amplitude sum
        // over tau, symmetric about bins 2 and 3.
        let (lambda, cfg) = cfg_with_center(2.5, 4);
        let dist = pe_outcome_distribution(lambda, &cfg).unwrap();
        let t = 4usize;
        for k in 0..t {
            let mut acc = Complex64::ZERO;
            for tau in 0..t {
                let angle = (lambda * 1.0 - TAU * k as f64) * tau as f64 / t as f64;
                acc += Complex64::from_polar(1.0, angle);
            }
            let brute = (acc / t as f64).norm_sqr();
            assert!((dist.probability(k) - brute).abs() < 1e-12, "k={k}");
        }
        assert!((dist.probability(2) - dist.probability(3)).abs() < 1e-12);
        assert!((dist.probability(0) - dist.probability(1)).abs() < 1e-12);
        assert!(dist.probability(2) > dist.probability(0));
    }

    proptest! {
        #[test]
        fn distribution_normalizes(frac in 0.01f64..0.99, exp in 1u32..8, seed in 0u64..1000) {
            let t = 1usize << exp;
            let lambda = 1.0 + (seed % 7) as f64;
            let cfg = PhaseEstimationConfig::with_default_t0(t, lambda, ClampPolicy::HalfBinClamp).unwrap();
            // Probe an arbitrary interior eigenvalue.
            let probe = lambda * frac;
            let dist = pe_outcome_distribution(probe, &cfg).unwrap();
            let total: f64 = dist.probabilities().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            prop_assert!(dist.probabilities().iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn sampler_matches_distribution_chi_squared() {
        let (lambda, cfg) = cfg_with_center(2.5, 8);
        let dist = pe_outcome_distribution(lambda, &cfg).unwrap();
        let sampler = OutcomeSampler::new(&dist);
        let mut rng = trial_rng(31, 97, 0);
        let draws = 100_000usize;
        let mut counts = [0usize; 8];
        for _ in 0..draws {
            counts[sampler.sample(&mut rng)] += 1;
        }
        let mut chi2 = 0.0;
        for k in 0..8 {
            let expected = dist.probability(k) * draws as f64;
            assert!(expected > 20.0, "bin {k} too thin for chi-squared");
            let diff = counts[k] as f64 - expected;
            chi2 += diff * diff / expected;
        }
        let critical = ChiSquared::new(7.0).unwrap().inverse_cdf(0.999);
        assert!(chi2 < critical, "chi2={chi2} critical={critical}");
    }

    #[test]
    fn sampling_is_deterministic_in_seed() {
        let (lambda, cfg) = cfg_with_center(5.3, 16);
        let a: Vec<usize> = {
            let mut rng = trial_rng(7, 97, 1);
            (0..100)
                .map(|_| sample_pe_outcome(lambda, &cfg, &mut rng).unwrap())
                .collect()
        };
        let b: Vec<usize> = {
            let mut rng = trial_rng(7, 97, 1);
            (0..100)
                .map(|_| sample_pe_outcome(lambda, &cfg, &mut rng).unwrap())
                .collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn exact_phase_always_samples_its_bin() {
        let (lambda, cfg) = cfg_with_center(3.0, 8);
        let dist = pe_outcome_distribution(lambda, &cfg).unwrap();
        let sampler = OutcomeSampler::new(&dist);
        let mut rng = trial_rng(8, 97, 2);
        for _ in 0..10_000 {
            assert_eq!(sampler.sample(&mut rng), 3);
        }
    }

    #[test]
    fn decode_rules() {
        let cfg = PhaseEstimationConfig::new(8, 2.0, 3.0, ClampPolicy::HalfBinClamp).unwrap();
        assert_eq!(
            decode_eigenvalue(0, &cfg).unwrap(),
            DecodedEigenvalue::Clamped(PI / 2.0)
        );
        assert_eq!(
            decode_eigenvalue(3, &cfg).unwrap(),
            DecodedEigenvalue::Value(TAU * 3.0 / 2.0)
        );
        let resample_cfg = PhaseEstimationConfig::new(8, 2.0, 3.0, ClampPolicy::Resample).unwrap();
        assert_eq!(
            decode_eigenvalue(0, &resample_cfg).unwrap(),
            DecodedEigenvalue::Resample
        );
        assert!(decode_eigenvalue(8, &cfg).is_err());
    }

    #[test]
    fn default_t0_decodes_top_eigenvalue_bit_exactly() {
        // lambda_upper on the top bin must decode back to itself exactly:
        // this is what makes constructed exact-bin instances noise-free.
        let cfg =
            PhaseEstimationConfig::with_default_t0(1024, 2.0, ClampPolicy::HalfBinClamp).unwrap();
        let dist = pe_outcome_distribution(2.0, &cfg).unwrap();
        assert_eq!(dist.probability(1023), 1.0);
        let decoded = decode_eigenvalue(1023, &cfg).unwrap().value().unwrap();
        assert_eq!(decoded, 2.0);
    }

    #[test]
    fn concentration_within_one_bin() {
        // Mass within one bin width of the true eigenvalue is at least
        // 8 / pi^2 (textbook phase-estimation concentration; the bound is
        // tight at half-bin offsets).
        for center in [13.37, 5.5, 20.0] {
            let (lambda, cfg) = cfg_with_center(center, 64);
            let dist = pe_outcome_distribution(lambda, &cfg).unwrap();
            let mass: f64 = (0..64)
                .filter(|&k| (k as f64 - center).abs() <= 1.0)
                .map(|k| dist.probability(k))
                .sum();
            assert!(
                mass >= 8.0 / (PI * PI) - 1e-12,
                "center={center} mass={mass}"
            );
        }
    }

    #[test]
    fn doubling_t0_halves_bin_width_exactly() {
        let base = PhaseEstimationConfig::new(64, 3.0, 1.0, ClampPolicy::HalfBinClamp).unwrap();
        let doubled = PhaseEstimationConfig::new(128, 6.0, 1.0, ClampPolicy::HalfBinClamp).unwrap();
        assert_eq!(doubled.bin_width(), base.bin_width() / 2.0);
    }

    #[test]
    fn config_validation() {
        // Non-power-of-two and undersized registers.
        assert!(PhaseEstimationConfig::new(3, 1.0, 1.0, ClampPolicy::HalfBinClamp).is_err());
        assert!(PhaseEstimationConfig::new(1, 1.0, 1.0, ClampPolicy::HalfBinClamp).is_err());
        // Aliasing: t0 lambda_upper / 2 pi = 4 > T - 1 = 3.
        assert!(PhaseEstimationConfig::new(4, TAU * 4.0, 1.0, ClampPolicy::HalfBinClamp).is_err());
        // Default t0 must pass its own validation for awkward bounds.
        for t in [2usize, 4, 64, 1024] {
            for lu in [0.1, 1.0, 3.7, 1234.5] {
                PhaseEstimationConfig::with_default_t0(t, lu, ClampPolicy::HalfBinClamp).unwrap();
            }
        }
        // Eigenvalue range checks.
        let cfg =
            PhaseEstimationConfig::with_default_t0(8, 1.0, ClampPolicy::HalfBinClamp).unwrap();
        assert!(pe_outcome_distribution(0.0, &cfg).is_err());
        assert!(pe_outcome_distribution(-1.0, &cfg).is_err());
        assert!(pe_outcome_distribution(1.5, &cfg).is_err());
    }

    fn real_state(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|x| Complex64::new(*x, 0.0)).collect()
    }

    #[test]
    fn statevector_matches_analytic_on_eigenvector() {
        let mut rng = trial_rng(51, 97, 3);
        let a = random_spd_matrix(4, 0.1, &mut rng);
        let sd = eigendecompose(&a).unwrap();
        let cfg = PhaseEstimationConfig::with_default_t0(
            32,
            sd.max_eigenvalue() * 1.25,
            ClampPolicy::HalfBinClamp,
        )
        .unwrap();
        let joint = statevector_phase_estimation(
            &a,
            &real_state(sd.eigenvector(2)),
            &cfg,
            DEFAULT_STATEVECTOR_BUDGET,
        )
        .unwrap();
        let marginal = joint.bin_marginal();
        let analytic = pe_outcome_distribution(sd.eigenvalue(2), &cfg).unwrap();
        assert!(total_variation(&marginal, analytic.probabilities()) <= 1e-9);
        assert!((joint.total_probability() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn statevector_superposition_mixes_linearly() {
        let mut rng = trial_rng(52, 97, 4);
        let a = random_spd_matrix(4, 0.1, &mut rng);
        let sd = eigendecompose(&a).unwrap();
        let cfg = PhaseEstimationConfig::with_default_t0(
            32,
            sd.max_eigenvalue() * 1.25,
            ClampPolicy::HalfBinClamp,
        )
        .unwrap();
        let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
        let state: Vec<Complex64> = sd
            .eigenvector(0)
            .iter()
            .zip(sd.eigenvector(1))
            .map(|(a, b)| Complex64::new((a + b) * inv_sqrt2, 0.0))
            .collect();
        let joint =
            statevector_phase_estimation(&a, &state, &cfg, DEFAULT_STATEVECTOR_BUDGET).unwrap();
        let marginal = joint.bin_marginal();
        let f0 = pe_outcome_distribution(sd.eigenvalue(0), &cfg).unwrap();
        let f1 = pe_outcome_distribution(sd.eigenvalue(1), &cfg).unwrap();
        let mixed: Vec<f64> = f0
            .probabilities()
            .iter()
            .zip(f1.probabilities())
            .map(|(p, q)| 0.5 * p + 0.5 * q)
            .collect();
        assert!(total_variation(&marginal, &mixed) <= 1e-9);
    }

    #[test]
    fn statevector_dyadic_diagonal_is_deterministic() {
        // diag(2, 4) with t0 = 3 pi puts the eigenphases exactly on bins
        // 3 and 6 of a T = 8 register.
        let a = RealSymmetricMatrix::diagonal(&[2.0, 4.0]);
        let cfg = PhaseEstimationConfig::new(8, 3.0 * PI, 4.0, ClampPolicy::HalfBinClamp).unwrap();
        let state = real_state(&[1.0, 0.0]);
        let joint =
            statevector_phase_estimation(&a, &state, &cfg, DEFAULT_STATEVECTOR_BUDGET).unwrap();
        let marginal = joint.bin_marginal();
        assert!((marginal[3] - 1.0).abs() <= 1e-12);
        for (k, p) in marginal.iter().enumerate() {
            if k != 3 {
                assert!(*p <= 1e-12, "k={k} p={p}");
            }
        }
    }

    #[test]
    fn statevector_budget_and_norm_checks() {
        let a = RealSymmetricMatrix::identity(2);
        let cfg =
            PhaseEstimationConfig::with_default_t0(8, 1.0, ClampPolicy::HalfBinClamp).unwrap();
        let state = real_state(&[1.0, 0.0]);
        assert!(matches!(
            statevector_phase_estimation(&a, &state, &cfg, 8),
            Err(Error::BudgetExceeded { .. })
        ));
        let bad = real_state(&[0.5, 0.0]);
        assert!(matches!(
            statevector_phase_estimation(&a, &bad, &cfg, DEFAULT_STATEVECTOR_BUDGET),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn backend_equivalence_grid() {
        // Every work-register size and a sweep of register sizes: the
        // analytic law and the statevector marginal agree to 1e-9 TV when
        // the input is an eigenvector. (The acceptance suite runs the wider
        // grid; this is the fast regression version.)
        let mut rng = trial_rng(53, 97, 5);
        for &n in &[2usize, 4, 8] {
            for &t in &[8usize, 32, 64] {
                let a = random_spd_matrix(n, 0.05, &mut rng);
                let sd = eigendecompose(&a).unwrap();
                let cfg = PhaseEstimationConfig::with_default_t0(
                    t,
                    sd.max_eigenvalue() * 1.1,
                    ClampPolicy::HalfBinClamp,
                )
                .unwrap();
                for i in [0, n - 1] {
                    let joint = statevector_phase_estimation(
                        &a,
                        &real_state(sd.eigenvector(i)),
                        &cfg,
                        DEFAULT_STATEVECTOR_BUDGET,
                    )
                    .unwrap();
                    let tv = total_variation(
                        &joint.bin_marginal(),
                        pe_outcome_distribution(sd.eigenvalue(i), &cfg)
                            .unwrap()
                            .probabilities(),
                    );
                    assert!(tv <= 1e-9, "n={n} t={t} i={i} tv={tv}");
                }
            }
        }
    }

    #[test]
    fn distribution_csv_shape() {
        let (lambda, cfg) = cfg_with_center(1.5, 4);
        let dist = pe_outcome_distribution(lambda, &cfg).unwrap();
        let mut buf = Vec::new();
        write_distribution_csv(&dist, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "bin,probability");
        assert!(lines[1].starts_with("0,"));
    }
}
