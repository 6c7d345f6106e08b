//! Design-matrix construction and the small dense linear algebra used by
//! the linear learners.
//!
//! Categorical covariates enter as one-hot indicator columns with the first
//! level as reference. Screening restricts which schema entries contribute
//! columns; the declaration flag is not a schema entry and is always
//! honored by the mask regardless of screening.

use std::collections::HashSet;

use crate::panel::{CovariateKind, CovariateRole, CovariateSchema, Observation};

use super::LearnerError;

/// Source of one design column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Column {
    XContinuous(usize),
    XCategoryLevel { x_index: usize, level: u8 },
    Z(usize),
}

/// One boosting candidate: a single covariate, possibly spanning a one-hot
/// block.
#[derive(Debug, Clone)]
pub(crate) enum Candidate {
    Continuous { column: usize },
    Categorical { x_index: usize, levels: u8 },
}

#[derive(Debug, Clone)]
pub(crate) struct DesignLayout {
    pub columns: Vec<Column>,
    /// Candidates in schema-entry order (the boosting tie-break order).
    pub candidates: Vec<Candidate>,
}

impl DesignLayout {
    pub fn new(schema: &CovariateSchema, screen: Option<&[String]>) -> Result<Self, LearnerError> {
        let subset: Option<HashSet<&str>> = match screen {
            Some(names) => {
                if names.is_empty() {
                    return Err(LearnerError::EmptyScreen);
                }
                for name in names {
                    if !schema.contains(name) {
                        return Err(LearnerError::UnknownCovariate(name.clone()));
                    }
                }
                Some(names.iter().map(String::as_str).collect())
            }
            None => None,
        };
        let keep = |name: &str| subset.as_ref().is_none_or(|s| s.contains(name));

        let mut columns = Vec::new();
        let mut candidates = Vec::new();
        let mut x_index = 0;
        let mut z_index = 0;
        for entry in schema.entries() {
            match entry.role {
                CovariateRole::X => {
                    if keep(&entry.name) {
                        match entry.kind {
                            CovariateKind::Continuous => {
                                candidates.push(Candidate::Continuous {
                                    column: columns.len(),
                                });
                                columns.push(Column::XContinuous(x_index));
                            }
                            CovariateKind::Categorical { levels } => {
                                candidates.push(Candidate::Categorical { x_index, levels });
                                for level in 1..levels {
                                    columns.push(Column::XCategoryLevel { x_index, level });
                                }
                            }
                        }
                    }
                    x_index += 1;
                }
                CovariateRole::Z => {
                    if keep(&entry.name) {
                        candidates.push(Candidate::Continuous {
                            column: columns.len(),
                        });
                        columns.push(Column::Z(z_index));
                    }
                    z_index += 1;
                }
            }
        }
        Ok(DesignLayout {
            columns,
            candidates,
        })
    }

    pub fn fill_row(&self, obs: &Observation, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.columns.len());
        for (slot, column) in out.iter_mut().zip(&self.columns) {
            *slot = match *column {
                Column::XContinuous(i) => obs.x[i],
                Column::XCategoryLevel { x_index, level } => {
                    if obs.x[x_index] == level as f64 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Column::Z(i) => obs.z[i],
            };
        }
    }

    pub fn row(&self, obs: &Observation) -> Vec<f64> {
        let mut out = vec![0.0; self.columns.len()];
        self.fill_row(obs, &mut out);
        out
    }
}

/// Column-wise standardization statistics (population convention).
#[derive(Debug, Clone)]
pub(crate) struct Standardizer {
    pub means: Vec<f64>,
    /// Zero-variance columns get scale 1 so they standardize to zero.
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>], n_cols: usize) -> Standardizer {
        let n = rows.len().max(1) as f64;
        let mut means = vec![0.0; n_cols];
        for row in rows {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut scales = vec![0.0; n_cols];
        for row in rows {
            for ((s, v), m) in scales.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut scales {
            *s = (*s / n).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Standardizer { means, scales }
    }

    pub fn apply(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.means).zip(&self.scales) {
            *v = (*v - m) / s;
        }
    }
}

/// In-place Cholesky solve of the SPD system `A x = b`.
pub(crate) fn cholesky_solve(
    mut a: Vec<Vec<f64>>,
    mut b: Vec<f64>,
) -> Result<Vec<f64>, LearnerError> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    for j in 0..n {
        for k in 0..j {
            let l_jk = a[j][k];
            for row in a.iter_mut().skip(j) {
                row[j] -= row[k] * l_jk;
            }
        }
        let diag = a[j][j];
        if diag <= 0.0 || !diag.is_finite() {
            return Err(LearnerError::SingularDesign);
        }
        let root = diag.sqrt();
        for row in a.iter_mut().skip(j) {
            row[j] /= root;
        }
    }
    // forward substitution: L y = b
    for i in 0..n {
        for k in 0..i {
            b[i] -= a[i][k] * b[k];
        }
        b[i] /= a[i][i];
    }
    // back substitution: L^T x = y
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            b[i] -= a[k][i] * b[k];
        }
        b[i] /= a[i][i];
    }
    Ok(b)
}

/// Ridge fit on standardized columns with an unpenalized intercept.
///
/// Returns `(intercept, coefficients, standardizer)` where the prediction
/// at a raw row is `intercept + sum(coef * standardized value)`. The
/// intercept equals the response mean, so coefficients vanish (and the
/// prediction tends to the training mean) as `lambda` grows.
#[allow(clippy::needless_range_loop)]
pub(crate) fn ridge_fit(
    rows: &[Vec<f64>],
    targets: &[f64],
    lambda: f64,
) -> Result<(f64, Vec<f64>, Standardizer), LearnerError> {
    debug_assert_eq!(rows.len(), targets.len());
    let n_cols = rows.first().map_or(0, Vec::len);
    let y_mean = targets.iter().sum::<f64>() / targets.len().max(1) as f64;
    if n_cols == 0 {
        return Ok((
            y_mean,
            Vec::new(),
            Standardizer {
                means: vec![],
                scales: vec![],
            },
        ));
    }
    let standardizer = Standardizer::fit(rows, n_cols);
    let mut gram = vec![vec![0.0; n_cols]; n_cols];
    let mut rhs = vec![0.0; n_cols];
    let mut buffer = vec![0.0; n_cols];
    for (row, y) in rows.iter().zip(targets) {
        buffer.copy_from_slice(row);
        standardizer.apply(&mut buffer);
        let centered_y = y - y_mean;
        for i in 0..n_cols {
            rhs[i] += buffer[i] * centered_y;
            for j in 0..=i {
                gram[i][j] += buffer[i] * buffer[j];
            }
        }
    }
    // mirror the lower triangle and add the penalty along the diagonal
    for i in 0..n_cols {
        for j in (i + 1)..n_cols {
            gram[i][j] = gram[j][i];
        }
        gram[i][i] += lambda;
    }
    let coefs = cholesky_solve(gram, rhs)?;
    Ok((y_mean, coefs, standardizer))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_recovers_known_solution() {
        // A = [[4,2],[2,3]], x = [1, -2] => b = [0, -4]
        let a = vec![vec![4.0, 2.0], vec![2.0, 3.0]];
        let x = cholesky_solve(a, vec![0.0, -4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_semidefinite() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(cholesky_solve(a, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn ridge_with_huge_penalty_returns_mean() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let targets: Vec<f64> = (0..20).map(|i| 3.0 + 2.0 * i as f64).collect();
        let (intercept, coefs, std) = ridge_fit(&rows, &targets, 1e8).unwrap();
        let y_mean = targets.iter().sum::<f64>() / 20.0;
        assert!((intercept - y_mean).abs() < 1e-12);
        for (row, _) in rows.iter().zip(&targets) {
            let mut buf = row.clone();
            std.apply(&mut buf);
            let pred = intercept + coefs.iter().zip(&buf).map(|(c, v)| c * v).sum::<f64>();
            assert!((pred - y_mean).abs() < 1e-4);
        }
    }

    #[test]
    fn ridge_small_penalty_recovers_linear_target() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 50.0]).collect();
        let targets: Vec<f64> = rows.iter().map(|r| 1.0 + 4.0 * r[0]).collect();
        let (intercept, coefs, std) = ridge_fit(&rows, &targets, 1e-9).unwrap();
        for (row, y) in rows.iter().zip(&targets) {
            let mut buf = row.clone();
            std.apply(&mut buf);
            let pred = intercept + coefs[0] * buf[0];
            assert!((pred - y).abs() < 1e-6);
        }
    }
}
