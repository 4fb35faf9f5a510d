//! Small dense helpers for vectors in R^d.

use serde::{Deserialize, Serialize};

/// Norm used when measuring prefix sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Euclidean,
    /// The sup norm, `max_i |x_i|`.
    Max,
}

impl Norm {
    pub fn of(self, x: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Norm::Max => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclidean" | "l2" => Ok(Norm::Euclidean),
            "max" | "linf" => Ok(Norm::Max),
            other => Err(format!("unknown norm `{other}`")),
        }
    }
}

pub fn norm(x: &[f64]) -> f64 {
    Norm::Euclidean.of(x)
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// `acc += scale * x`
pub fn axpy(acc: &mut [f64], scale: f64, x: &[f64]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += scale * v;
    }
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// Gram determinant `det(U U^T)` of the given rows.
pub fn gram_determinant(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let mut g: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| dot(&rows[i], &rows[j])).collect())
        .collect();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| g[a][col].abs().total_cmp(&g[b][col].abs()))
            .unwrap();
        if g[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            g.swap(pivot, col);
            det = -det;
        }
        det *= g[col][col];
        for r in col + 1..n {
            let f = g[r][col] / g[col][col];
            for c in col..n {
                g[r][c] -= f * g[col][c];
            }
        }
    }
    det
}

/// Solves `sum_i beta_i * basis[i] = x` for `beta` by Gaussian elimination
/// with partial pivoting. Returns `None` when a pivot falls below `tol`.
pub fn solve_in_basis(basis: &[Vec<f64>], x: &[f64], tol: f64) -> Option<Vec<f64>> {
    let d = x.len();
    if basis.len() != d || basis.iter().any(|u| u.len() != d) {
        return None;
    }
    // columns of the system matrix are the basis vectors
    let mut a: Vec<Vec<f64>> = (0..d)
        .map(|r| {
            let mut row: Vec<f64> = basis.iter().map(|u| u[r]).collect();
            row.push(x[r]);
            row
        })
        .collect();
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < tol {
            return None;
        }
        a.swap(pivot, col);
        for r in 0..d {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=d {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    Some((0..d).map(|i| a[i][d] / a[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms() {
        assert_eq!(Norm::Euclidean.of(&[3.0, 4.0]), 5.0);
        assert_eq!(Norm::Max.of(&[3.0, -4.0]), 4.0);
    }

    #[test]
    fn solve_recovers_coefficients() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let basis = vec![vec![1.0, 0.0], vec![s, s]];
        let beta = solve_in_basis(&basis, &[3.0, 2.0], 1e-12).unwrap();
        assert!((beta[0] - 1.0).abs() < 1e-12);
        assert!((beta[1] - 2.0 / s).abs() < 1e-12);
    }

    #[test]
    fn dependent_basis_is_degenerate() {
        let basis = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(gram_determinant(&basis), 0.0);
        assert!(solve_in_basis(&basis, &[1.0, 1.0], 1e-12).is_none());
        let ortho = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!((gram_determinant(&ortho) - 1.0).abs() < 1e-15);
    }
}
