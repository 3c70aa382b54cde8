//! Dense real symmetric matrices, spectral decomposition, and the exact
//! classical oracles (Cholesky log-determinant, SPD solve) that every
//! estimator in this crate is validated against.
//!
//! Matrices here are real and symmetric: covariance matrices are symmetric
//! positive semi-definite by construction, so the complex Hermitian case
//! never arises. Everything is stored dense; sparse inputs arrive as
//! coordinate lists and are expanded. At the dimensions this crate targets
//! (n <= 2^10) the O(n^3) decompositions are the cheap part of any run.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

/// Relative symmetry tolerance used by constructors that do not take an
/// explicit one: entries must satisfy |a_ij - a_ji| <= 1e-12 * max|a|.
pub const DEFAULT_SYMMETRY_REL_TOL: f64 = 1e-12;

/// Iteration cap passed to the symmetric QR eigensolver, per matrix row.
const EIGEN_MAX_ITER_PER_DIM: usize = 200;

/// A real symmetric matrix stored dense row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSymmetricMatrix {
    n: usize,
    entries: Vec<f64>,
    symmetry_tolerance: f64,
}

impl RealSymmetricMatrix {
    /// Builds a matrix from `n * n` row-major entries, validating symmetry
    /// against `symmetry_tolerance` (absolute) and finiteness.
    pub fn new(n: usize, entries: Vec<f64>, symmetry_tolerance: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("matrix dimension must be >= 1".into()));
        }
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: entries.len(),
            });
        }
        if !(symmetry_tolerance >= 0.0) {
            return Err(Error::OutOfRange {
                what: "symmetry_tolerance",
                value: symmetry_tolerance,
                constraint: "must be >= 0",
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "matrix entries",
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let deviation = (entries[i * n + j] - entries[j * n + i]).abs();
                if deviation > symmetry_tolerance {
                    return Err(Error::NotSymmetric {
                        row: i,
                        col: j,
                        deviation,
                        tolerance: symmetry_tolerance,
                    });
                }
            }
        }
        Ok(Self {
            n,
            entries,
            symmetry_tolerance,
        })
    }

    /// Builds a matrix from row-major entries with the default relative
    /// symmetry tolerance.
    pub fn from_dense(n: usize, entries: Vec<f64>) -> Result<Self> {
        let max_abs = entries.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        Self::new(n, entries, DEFAULT_SYMMETRY_REL_TOL * max_abs)
    }

    /// Builds a matrix from a sparse coordinate list. Each `(i, j, v)` triplet
    /// assigns both `a[i,j]` and `a[j,i]`; unlisted entries are zero.
    pub fn from_coordinates(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut entries = vec![0.0; n * n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange {
                    index: i.max(j),
                    size: n,
                });
            }
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
        Self::new(n, entries, 0.0)
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    /// `c * I`.
    pub fn scaled_identity(n: usize, c: f64) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = c;
        }
        Self {
            n,
            entries,
            symmetry_tolerance: 0.0,
        }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut entries = vec![0.0; n * n];
        for (i, &v) in values.iter().enumerate() {
            entries[i * n + i] = v;
        }
        Self {
            n,
            entries,
            symmetry_tolerance: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn symmetry_tolerance(&self) -> f64 {
        self.symmetry_tolerance
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `A + c * I`, reusing this matrix's symmetry tolerance.
    pub fn add_scaled_identity(&self, c: f64) -> Self {
        let mut entries = self.entries.clone();
        for i in 0..self.n {
            entries[i * self.n + i] += c;
        }
        Self {
            n: self.n,
            entries,
            symmetry_tolerance: self.symmetry_tolerance,
        }
    }

    /// `A * x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: x.len(),
            });
        }
        Ok((0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }

    pub(crate) fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.entries)
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric
/// matrix. Serves as the simulator's ground-truth spectrum.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    /// Column-major: eigenvector i occupies `[i * n, (i + 1) * n)`.
    eigenvectors: Vec<f64>,
    source_dimension: usize,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.source_dimension
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, i: usize) -> f64 {
        self.eigenvalues[i]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.source_dimension - 1]
    }

    /// Eigenvector associated with `eigenvalue(i)`, unit norm.
    pub fn eigenvector(&self, i: usize) -> &[f64] {
        let n = self.source_dimension;
        &self.eigenvectors[i * n..(i + 1) * n]
    }

    /// Expands `y` in the eigenbasis: coefficients `gamma_i = e_i . y`.
    pub fn project(&self, y: &[f64]) -> Result<ProjectedVector> {
        let n = self.source_dimension;
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "vector" });
        }
        let coefficients = (0..n)
            .map(|i| {
                self.eigenvector(i)
                    .iter()
                    .zip(y)
                    .map(|(e, v)| e * v)
                    .sum::<f64>()
            })
            .collect();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(ProjectedVector {
            original: y.to_vec(),
            coefficients,
            norm,
        })
    }

    /// Spectral form of `y^T A^{-1} y`: sum of `gamma_i^2 / lambda_i`.
    pub fn inverse_quadratic_form(&self, py: &ProjectedVector) -> f64 {
        py.coefficients
            .iter()
            .zip(&self.eigenvalues)
            .map(|(g, l)| g * g / l)
            .sum()
    }

    /// Spectral form of `log det A`: sum of `log lambda_i`.
    pub fn log_determinant(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.ln()).sum()
    }
}

/// A vector together with its eigenbasis expansion.
#[derive(Debug, Clone)]
pub struct ProjectedVector {
    original: Vec<f64>,
    coefficients: Vec<f64>,
    norm: f64,
}

impl ProjectedVector {
    pub fn original(&self) -> &[f64] {
        &self.original
    }

    /// `gamma_i = e_i . y`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn squared_norm(&self) -> f64 {
        self.norm * self.norm
    }
}

/// Full symmetric eigendecomposition via tridiagonalization + implicit QR.
///
/// Eigenvalues come back ascending with matching eigenvector columns.
pub fn eigendecompose(a: &RealSymmetricMatrix) -> Result<SpectralDecomposition> {
    let n = a.dim();
    let eigen =
        nalgebra::SymmetricEigen::try_new(a.to_dmatrix(), f64::EPSILON, EIGEN_MAX_ITER_PER_DIM * n)
            .ok_or(Error::EigenConvergence)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eigen.eigenvalues[i].total_cmp(&eigen.eigenvalues[j]));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = Vec::with_capacity(n * n);
    for &src in &order {
        eigenvalues.push(eigen.eigenvalues[src]);
        eigenvectors.extend(eigen.eigenvectors.column(src).iter());
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        source_dimension: n,
    })
}

/// `log det A = 2 sum_i log L_ii` from the Cholesky factor `A = L L^T`.
///
/// This is the exact classical oracle for the model-complexity penalty term;
/// it never touches the eigendecomposition path.
pub fn cholesky_logdet(a: &RealSymmetricMatrix) -> Result<f64> {
    let chol = nalgebra::Cholesky::new(a.to_dmatrix()).ok_or(Error::NotPositiveDefinite)?;
    Ok(2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>())
}

/// Solves `A x = y` for symmetric positive-definite `A` via Cholesky.
pub fn solve_spd(a: &RealSymmetricMatrix, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: y.len(),
        });
    }
    let chol = nalgebra::Cholesky::new(a.to_dmatrix()).ok_or(Error::NotPositiveDefinite)?;
    let x = chol.solve(&DVector::from_column_slice(y));
    Ok(x.iter().copied().collect())
}

/// Cheap upper bound on the largest eigenvalue: the smaller of the Gershgorin
/// row bound and the trace. The trace part assumes positive semi-definiteness,
/// which holds for every covariance-derived matrix this crate constructs.
/// Only `bound >= lambda_max` is contractual; no tightness is promised.
pub fn spectral_upper_bound(a: &RealSymmetricMatrix) -> f64 {
    let n = a.dim();
    let mut gershgorin = f64::NEG_INFINITY;
    let mut trace = 0.0;
    for i in 0..n {
        let diag = a.get(i, i);
        trace += diag;
        let radius: f64 = a
            .row(i)
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, v)| v.abs())
            .sum();
        gershgorin = gershgorin.max(diag + radius);
    }
    gershgorin.min(trace)
}

/// Writes the text fixture format: first line `n`, then `n` rows of `n`
/// whitespace-separated decimals at 17 significant digits (bit-exact
/// round-trip for finite f64).
pub fn write_matrix_text<W: Write>(a: &RealSymmetricMatrix, out: &mut W) -> Result<()> {
    writeln!(out, "{}", a.dim())?;
    for i in 0..a.dim() {
        let row: Vec<String> = a.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Parses the text fixture format written by [`write_matrix_text`].
pub fn read_matrix_text<R: BufRead>(input: &mut R) -> Result<RealSymmetricMatrix> {
    let mut lines = input.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty input".into(),
    })?;
    let first = first?;
    let n: usize = first.trim().parse().map_err(|_| Error::Parse {
        line: 1,
        message: format!("expected dimension, got {first:?}"),
    })?;
    let mut entries = Vec::with_capacity(n * n);
    for expected_row in 0..n {
        let (idx, line) = lines.next().ok_or_else(|| Error::Parse {
            line: expected_row + 2,
            message: "unexpected end of input".into(),
        })?;
        let line = line?;
        let mut count = 0;
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad number {tok:?}"),
            })?;
            entries.push(v);
            count += 1;
        }
        if count != n {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected {n} entries, got {count}"),
            });
        }
    }
    let max_abs = entries.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    RealSymmetricMatrix::new(n, entries, DEFAULT_SYMMETRY_REL_TOL * max_abs)
}

/// Random SPD test instance `B^T B + floor * I` with `B` uniform in
/// [-1, 1]^{n x n} scaled by 1/sqrt(n). The smallest eigenvalue is at least
/// `floor`.
pub fn random_spd_matrix<R: Rng>(n: usize, floor: f64, rng: &mut R) -> RealSymmetricMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    let b: Vec<f64> = (0..n * n)
        .map(|_| rng.random_range(-1.0..1.0) * scale)
        .collect();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let mut dot = 0.0;
            for k in 0..n {
                dot += b[k * n + i] * b[k * n + j];
            }
            entries[i * n + j] = dot;
            entries[j * n + i] = dot;
        }
        entries[i * n + i] += floor;
    }
    RealSymmetricMatrix {
        n,
        entries,
        symmetry_tolerance: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    fn residual_norm(a: &RealSymmetricMatrix, sd: &SpectralDecomposition, i: usize) -> f64 {
        let v = sd.eigenvector(i);
        let av = a.matvec(v).unwrap();
        av.iter()
            .zip(v)
            .map(|(x, e)| {
                let r = x - sd.eigenvalue(i) * e;
                r * r
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn identity_eigenvalues_are_ones() {
        let sd = eigendecompose(&RealSymmetricMatrix::identity(4)).unwrap();
        for &l in sd.eigenvalues() {
            assert!((l - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_matrix_gives_sorted_standard_basis() {
        let a = RealSymmetricMatrix::diagonal(&[3.0, 1.0, 4.0, 2.0]);
        let sd = eigendecompose(&a).unwrap();
        assert_eq!(sd.eigenvalues(), &[1.0, 2.0, 3.0, 4.0]);
        // eigenvector for lambda = 1 must be +-e_1, etc.
        let expected_axis = [1usize, 3, 0, 2];
        for (i, &axis) in expected_axis.iter().enumerate() {
            let v = sd.eigenvector(i);
            for (j, &c) in v.iter().enumerate() {
                let want = if j == axis { 1.0 } else { 0.0 };
                assert!((c.abs() - want).abs() < 1e-12, "i={i} j={j} c={c}");
            }
        }
    }

    #[test]
    fn random_spd_residual_and_orthonormality() {
        let mut rng = trial_rng(11, 99, 0);
        let a = random_spd_matrix(8, 1e-3, &mut rng);
        let sd = eigendecompose(&a).unwrap();
        let scale = a.frobenius_norm();
        for i in 0..8 {
            assert!(residual_norm(&a, &sd, i) <= 1e-10 * scale);
        }
        // Gram matrix of eigenvectors is the identity.
        for i in 0..8 {
            for j in 0..8 {
                let dot: f64 = sd
                    .eigenvector(i)
                    .iter()
                    .zip(sd.eigenvector(j))
                    .map(|(x, y)| x * y)
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ascending_order_on_random_instances() {
        let mut rng = trial_rng(12, 99, 1);
        for _ in 0..10 {
            let a = random_spd_matrix(6, 0.1, &mut rng);
            let sd = eigendecompose(&a).unwrap();
            for w in sd.eigenvalues().windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn cholesky_logdet_identity_is_zero() {
        assert_eq!(
            cholesky_logdet(&RealSymmetricMatrix::identity(8)).unwrap(),
            0.0
        );
    }

    #[test]
    fn cholesky_logdet_scaled_identity() {
        let v = cholesky_logdet(&RealSymmetricMatrix::scaled_identity(4, 2.0)).unwrap();
        assert!((v - 4.0 * 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cholesky_matches_spectral_sum() {
        let mut rng = trial_rng(13, 99, 2);
        let a = random_spd_matrix(16, 1e-3, &mut rng);
        let chol = cholesky_logdet(&a).unwrap();
        let spectral = eigendecompose(&a).unwrap().log_determinant();
        assert!((chol - spectral).abs() <= 1e-9 * chol.abs().max(1.0));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = RealSymmetricMatrix::diagonal(&[1.0, -1.0]);
        assert!(matches!(
            cholesky_logdet(&a),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn solve_identity_returns_input() {
        let y = vec![3.0, -1.0, 0.5];
        let x = solve_spd(&RealSymmetricMatrix::identity(3), &y).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn solve_diagonal_analytic() {
        let a = RealSymmetricMatrix::diagonal(&[2.0, 4.0]);
        let y = [1.0, 1.0];
        let x = solve_spd(&a, &y).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15);
        assert!((x[1] - 0.25).abs() < 1e-15);
        let fit: f64 = y.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((fit - 0.75).abs() < 1e-15);
    }

    #[test]
    fn solve_residual_random_spd() {
        let mut rng = trial_rng(14, 99, 3);
        let a = random_spd_matrix(32, 1e-2, &mut rng);
        let y: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = solve_spd(&a, &y).unwrap();
        let ax = a.matvec(&x).unwrap();
        let res: f64 = ax
            .iter()
            .zip(&y)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        let ynorm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res <= 1e-9 * ynorm);
    }

    #[test]
    fn solve_dimension_mismatch() {
        let a = RealSymmetricMatrix::identity(3);
        assert!(matches!(
            solve_spd(&a, &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn quadratic_form_matches_spectral_route() {
        // y^T A^{-1} y computed by Cholesky solve equals sum gamma_i^2/lambda_i.
        let mut rng = trial_rng(15, 99, 4);
        let a = random_spd_matrix(16, 1e-2, &mut rng);
        let y: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = solve_spd(&a, &y).unwrap();
        let direct: f64 = y.iter().zip(&x).map(|(p, q)| p * q).sum();
        let sd = eigendecompose(&a).unwrap();
        let py = sd.project(&y).unwrap();
        let spectral = sd.inverse_quadratic_form(&py);
        assert!((direct - spectral).abs() <= 1e-8 * direct.abs());
    }

    #[test]
    fn projection_satisfies_parseval() {
        let mut rng = trial_rng(16, 99, 5);
        let a = random_spd_matrix(12, 1e-2, &mut rng);
        let sd = eigendecompose(&a).unwrap();
        let y: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
        let py = sd.project(&y).unwrap();
        let coeff_sq: f64 = py.coefficients().iter().map(|g| g * g).sum();
        assert!((coeff_sq - py.squared_norm()).abs() <= 1e-10 * py.squared_norm());
    }

    #[test]
    fn upper_bound_examples() {
        assert!(spectral_upper_bound(&RealSymmetricMatrix::identity(4)) >= 1.0);
        let d = RealSymmetricMatrix::diagonal(&[1.0, 5.0]);
        assert_eq!(spectral_upper_bound(&d), 5.0);
    }

    #[test]
    fn upper_bound_dominates_max_eigenvalue() {
        let mut rng = trial_rng(17, 99, 6);
        for trial in 0..100 {
            let n = 2 + (trial % 7);
            let a = random_spd_matrix(n, 0.01, &mut rng);
            let sd = eigendecompose(&a).unwrap();
            assert!(spectral_upper_bound(&a) >= sd.max_eigenvalue());
        }
    }

    #[test]
    fn rejects_asymmetric_and_nonfinite() {
        let r = RealSymmetricMatrix::new(2, vec![0.0, 1.0, 2.0, 0.0], 1e-9);
        assert!(matches!(r, Err(Error::NotSymmetric { .. })));
        let r = RealSymmetricMatrix::new(2, vec![0.0, f64::NAN, f64::NAN, 0.0], 1e-9);
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn coordinate_list_expands_symmetrically() {
        let a = RealSymmetricMatrix::from_coordinates(3, &[(0, 1, 2.5), (2, 2, 1.0)]).unwrap();
        assert_eq!(a.get(0, 1), 2.5);
        assert_eq!(a.get(1, 0), 2.5);
        assert_eq!(a.get(2, 2), 1.0);
        assert_eq!(a.get(0, 0), 0.0);
    }

    #[test]
    fn matrix_text_round_trip_is_bit_exact() {
        let mut rng = trial_rng(18, 99, 7);
        let a = random_spd_matrix(5, 1e-3, &mut rng);
        let mut buf = Vec::new();
        write_matrix_text(&a, &mut buf).unwrap();
        let b = read_matrix_text(&mut buf.as_slice()).unwrap();
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn matrix_text_rejects_malformed() {
        let text = "2\n1.0 0.0\n0.0\n";
        assert!(matches!(
            read_matrix_text(&mut text.as_bytes()),
            Err(Error::Parse { .. })
        ));
    }
}
