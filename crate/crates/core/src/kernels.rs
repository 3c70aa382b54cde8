//! Datasets, covariance kernels, and the regularized matrices
//! `A = K + noise_variance * I` that the estimators consume.
//!
//! Two kernels are provided: the squared-exponential classic (dense K) and a
//! Wendland-type compactly supported kernel whose covariance matrix is
//! genuinely sparse on low-density point sets. The compact kernel's piecewise
//! polynomial `(1 - r/rho)^4 (4 r/rho + 1)` is positive definite for input
//! dimension d <= 3, which covers everything this crate generates.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RealSymmetricMatrix;
use crate::rng::{trial_rng, DOMAIN_INPUTS, DOMAIN_OUTPUTS};

/// Observed inputs (n rows of d features) and outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    /// Row-major, `n * d`.
    inputs: Vec<f64>,
    outputs: Vec<f64>,
}

impl Dataset {
    pub fn new(d: usize, inputs: Vec<f64>, outputs: Vec<f64>) -> Result<Self> {
        let n = outputs.len();
        if n == 0 || d == 0 {
            return Err(Error::InvalidConfig(
                "dataset needs n >= 1 observations and d >= 1 features".into(),
            ));
        }
        if inputs.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                actual: inputs.len(),
            });
        }
        if inputs.iter().chain(outputs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "dataset" });
        }
        Ok(Self {
            n,
            d,
            inputs,
            outputs,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires n >= 1
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.d..(i + 1) * self.d]
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    /// Euclidean distance between observations i and j.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.input(i)
            .iter()
            .zip(self.input(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Kernel hyperparameters. All strictly positive; `support_radius` only
/// affects the compact kernel but is validated unconditionally so a
/// hyperparameter point is always fully specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub support_radius: f64,
}

impl Hyperparameters {
    pub fn new(lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Self {
        Self {
            lengthscale,
            signal_variance,
            noise_variance,
            support_radius: 1.0,
        }
    }

    pub fn with_support_radius(mut self, support_radius: f64) -> Self {
        self.support_radius = support_radius;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (what, value) in [
            ("lengthscale", self.lengthscale),
            ("signal_variance", self.signal_variance),
            ("noise_variance", self.noise_variance),
            ("support_radius", self.support_radius),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::OutOfRange {
                    what,
                    value,
                    constraint: "must be finite and > 0",
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    SquaredExponential,
    CompactSupport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub params: Hyperparameters,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, params: Hyperparameters) -> Self {
        Self { kind, params }
    }

    /// Kernel value at distance r (diagonal: r = 0 gives exactly
    /// `signal_variance` for both kinds).
    pub fn evaluate(&self, r: f64) -> f64 {
        let p = &self.params;
        match self.kind {
            KernelKind::SquaredExponential => {
                p.signal_variance * (-(r * r) / (2.0 * p.lengthscale * p.lengthscale)).exp()
            }
            KernelKind::CompactSupport => {
                let u = r / p.support_radius;
                if u >= 1.0 {
                    0.0
                } else {
                    let b = 1.0 - u;
                    let b2 = b * b;
                    p.signal_variance * b2 * b2 * (4.0 * u + 1.0)
                }
            }
        }
    }
}

/// Builds the covariance matrix K over the dataset's inputs.
pub fn build_covariance(data: &Dataset, spec: &KernelSpec) -> Result<RealSymmetricMatrix> {
    spec.params.validate()?;
    let n = data.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        entries[i * n + i] = spec.params.signal_variance;
        for j in (i + 1)..n {
            let v = spec.evaluate(data.distance(i, j));
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    RealSymmetricMatrix::new(n, entries, 0.0)
}

/// `A = K + noise_variance * I`. Every eigenvalue of A is the corresponding
/// eigenvalue of K shifted up by exactly `noise_variance`, so for PSD K the
/// smallest eigenvalue of A is at least `noise_variance`.
pub fn regularized_matrix(
    k: &RealSymmetricMatrix,
    noise_variance: f64,
) -> Result<RealSymmetricMatrix> {
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(Error::OutOfRange {
            what: "noise_variance",
            value: noise_variance,
            constraint: "must be finite and > 0",
        });
    }
    Ok(k.add_scaled_identity(noise_variance))
}

/// Convenience: dataset + spec straight to `A = K + noise_variance * I`.
pub fn regularized_covariance(data: &Dataset, spec: &KernelSpec) -> Result<RealSymmetricMatrix> {
    let k = build_covariance(data, spec)?;
    regularized_matrix(&k, spec.params.noise_variance)
}

/// Maximum over rows of the count of entries exceeding `zero_tolerance` in
/// magnitude. With the default tolerance of 0 this counts exact nonzeros,
/// which is the right notion for the compact kernel.
pub fn sparsity(a: &RealSymmetricMatrix, zero_tolerance: f64) -> usize {
    (0..a.dim())
        .map(|i| a.row(i).iter().filter(|v| v.abs() > zero_tolerance).count())
        .max()
        .unwrap_or(0)
}

/// Inputs for a regular 1-D grid with the given spacing: x_i = i * spacing.
/// Fixed spacing keeps the compact kernel's sparsity constant as n grows.
pub fn grid_inputs_1d(n: usize, spacing: f64) -> Vec<f64> {
    (0..n).map(|i| i as f64 * spacing).collect()
}

/// Draws outputs `y ~ N(0, K + noise_variance I)` for the given inputs via
/// the Cholesky factor. Deterministic in the seed (output RNG domain).
pub fn sample_gp_outputs(
    d: usize,
    inputs: &[f64],
    spec: &KernelSpec,
    seed: u64,
) -> Result<Vec<f64>> {
    let placeholder = vec![0.0; inputs.len() / d];
    let data = Dataset::new(d, inputs.to_vec(), placeholder)?;
    let a = regularized_covariance(&data, spec)?;
    let chol = nalgebra::Cholesky::new(a.to_dmatrix()).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let n = data.len();
    let mut rng = trial_rng(seed, DOMAIN_OUTPUTS, 0);
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok((0..n)
        .map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum())
        .collect())
}

/// Synthetic dataset: inputs uniform in [0,1]^d, outputs drawn from the GP
/// prior at the given hyperparameters. Byte-reproducible in the seed.
pub fn synthetic_dataset(n: usize, d: usize, spec: &KernelSpec, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidConfig("need n >= 1 and d >= 1".into()));
    }
    spec.params.validate()?;
    let mut rng = trial_rng(seed, DOMAIN_INPUTS, 0);
    let inputs: Vec<f64> = (0..n * d).map(|_| rng.random_range(0.0..1.0)).collect();
    let outputs = sample_gp_outputs(d, &inputs, spec, seed)?;
    Dataset::new(d, inputs, outputs)
}

/// Synthetic dataset on a fixed-spacing 1-D grid; used by the scaling study
/// where point density (hence sparsity) must not change with n.
pub fn grid_dataset_1d(n: usize, spacing: f64, spec: &KernelSpec, seed: u64) -> Result<Dataset> {
    let inputs = grid_inputs_1d(n, spacing);
    let outputs = sample_gp_outputs(1, &inputs, spec, seed)?;
    Dataset::new(1, inputs, outputs)
}

/// Writes dataset CSV: header `x1,...,xd,y`, one observation per row.
/// Floats use the shortest representation that round-trips exactly.
pub fn write_dataset_csv<W: Write>(data: &Dataset, out: &mut W) -> Result<()> {
    let mut header: Vec<String> = (1..=data.input_dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    writeln!(out, "{}", header.join(","))?;
    for i in 0..data.len() {
        let mut fields: Vec<String> = data.input(i).iter().map(|v| v.to_string()).collect();
        fields.push(data.outputs()[i].to_string());
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Parses the CSV format written by [`write_dataset_csv`].
pub fn read_dataset_csv<R: BufRead>(input: &mut R) -> Result<Dataset> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty input".into(),
    })?;
    let header = header?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    let d = cols.len().saturating_sub(1);
    if d == 0 || cols[d] != "y" || (0..d).any(|j| cols[j] != format!("x{}", j + 1)) {
        return Err(Error::Parse {
            line: 1,
            message: format!("bad header {header:?}, expected x1,...,xd,y"),
        });
    }
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != d + 1 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected {} fields, got {}", d + 1, fields.len()),
            });
        }
        for (col, tok) in fields.iter().enumerate() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad number {tok:?}"),
            })?;
            if col < d {
                inputs.push(v);
            } else {
                outputs.push(v);
            }
        }
    }
    Dataset::new(d, inputs, outputs)
}
