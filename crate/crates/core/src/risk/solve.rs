//! Solving for risk-equilibrium priors on explicit loss matrices.
//!
//! The equality system stacks one row per action, `Σ_M L(M, M̂) π(M) = r`,
//! with the normalization `Σ π = 1`, in unknowns `(π, r)`. The solution set
//! is classified as unique / none / underdetermined from the rank and
//! residual of the system; nonnegativity of `π` is then verified, using a
//! nonnegative least-squares pass when the system is underdetermined.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{LossMatrix, LossSpec};

const RESIDUAL_TOL: f64 = 1e-8;
const NEGATIVITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionStatus {
    /// Exactly one equilibrium prior exists.
    Unique,
    /// No equilibrium prior exists (inconsistent equalities, or the only
    /// solutions require negative probabilities).
    None,
    /// An affine family of equilibrium priors exists; a basis of its
    /// direction space is returned.
    Underdetermined,
}

/// Outcome of [`solve_equilibrium`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub status: SolutionStatus,
    /// A nonnegative equilibrium prior, when one exists.
    pub prior: Option<Vec<f64>>,
    /// The constant risk attained by `prior`.
    pub risk_value: Option<f64>,
    /// Basis of the direction space of the affine solution set (π part),
    /// nonempty only in the underdetermined case.
    pub basis: Vec<Vec<f64>>,
    /// Rank of the stacked equality system.
    pub rank: usize,
    /// Residual norm of the least-squares solution of the equality system.
    pub residual: f64,
}

/// Solve `{R^π constant, Σ π = 1, π >= 0}` for an explicit loss matrix.
pub fn solve_equilibrium(loss: &LossSpec) -> Result<EquilibriumSolution> {
    let LossSpec::Matrix(matrix) = loss else {
        return Err(Error::Argument("solve_equilibrium requires a matrix loss".into()));
    };
    solve_equilibrium_matrix(matrix)
}

pub fn solve_equilibrium_matrix(matrix: &LossMatrix) -> Result<EquilibriumSolution> {
    let m = matrix.len();
    let dim = m + 1;
    // Row i (< m): sum_j L(j, i) pi_j - r = 0. Row m: sum_j pi_j = 1.
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..m {
        for j in 0..m {
            a[(i, j)] = matrix.entry(j, i);
        }
        a[(i, m)] = -1.0;
    }
    for j in 0..m {
        a[(m, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(dim);
    b[m] = 1.0;

    let scale = a.amax().max(1.0);
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let rank_tol = sigma_max * dim as f64 * f64::EPSILON * 16.0;
    let rank = svd.singular_values.iter().filter(|&&s| s > rank_tol).count();
    let x = svd
        .solve(&b, rank_tol)
        .map_err(|e| Error::Argument(format!("svd solve failed: {e}")))?;
    let residual = (&a * &x - &b).norm();

    if residual > RESIDUAL_TOL * scale {
        return Ok(EquilibriumSolution {
            status: SolutionStatus::None,
            prior: None,
            risk_value: None,
            basis: Vec::new(),
            rank,
            residual,
        });
    }

    if rank == dim {
        let mut pi: Vec<f64> = x.iter().take(m).copied().collect();
        let min = pi.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -NEGATIVITY_TOL {
            return Ok(EquilibriumSolution {
                status: SolutionStatus::None,
                prior: None,
                risk_value: None,
                basis: Vec::new(),
                rank,
                residual,
            });
        }
        pi.iter_mut().for_each(|v| *v = v.max(0.0));
        return Ok(EquilibriumSolution {
            status: SolutionStatus::Unique,
            prior: Some(pi),
            risk_value: Some(x[m]),
            basis: Vec::new(),
            rank,
            residual,
        });
    }

    // Underdetermined: report the direction basis and search for a
    // nonnegative representative. Since every loss entry is nonnegative,
    // any nonnegative prior forces r >= 0, so all variables can be
    // constrained at once.
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let basis: Vec<Vec<f64>> = (rank..dim)
        .map(|row| v_t.row(row).iter().take(m).copied().collect())
        .collect();
    let nn = nnls(&a, &b, 200 * dim);
    let nn_residual = (&a * &nn - &b).norm();
    if nn_residual > RESIDUAL_TOL * scale {
        // The affine set misses the nonnegative orthant.
        return Ok(EquilibriumSolution {
            status: SolutionStatus::None,
            prior: None,
            risk_value: None,
            basis,
            rank,
            residual: nn_residual,
        });
    }
    let pi: Vec<f64> = nn.iter().take(m).copied().collect();
    Ok(EquilibriumSolution {
        status: SolutionStatus::Underdetermined,
        prior: Some(pi),
        risk_value: Some(nn[m]),
        basis,
        rank,
        residual,
    })
}

/// Lawson–Hanson nonnegative least squares: minimize ‖Ax − b‖ over x >= 0.
fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: usize) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.amax().max(1.0) * b.amax().max(1.0);

    for _ in 0..max_iter {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
        match candidate {
            Some(j) if w[j] > tol => passive[j] = true,
            _ => break,
        }

        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = a.select_columns(idx.iter());
            let z_sub = sub
                .clone()
                .svd(true, true)
                .solve(b, 1e-13)
                .expect("nnls subproblem");
            if z_sub.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = z_sub[k];
                }
                break;
            }
            // Step back to the boundary and drop the blocking variables.
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if z_sub[k] <= 0.0 {
                    let denom = x[j] - z_sub[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z_sub[k] - x[j]);
                if x[j] <= 1e-14 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn appendix_l1() -> LossMatrix {
        LossMatrix::new(
            vec!["00".into(), "01".into(), "10".into(), "11".into()],
            vec![
                0.0, 1.0, 1.0, 2.0, //
                1.0, 0.0, 3.0, 4.0, //
                1.0, 3.0, 0.0, 4.0, //
                2.0, 4.0, 4.0, 0.0,
            ],
        )
        .unwrap()
    }

    fn appendix_l2() -> LossMatrix {
        LossMatrix::new(
            vec!["00".into(), "01".into(), "10".into(), "11".into()],
            vec![
                0.0, 1.0, 1.0, 3.0, //
                1.0, 0.0, 1.0, 2.0, //
                1.0, 1.0, 0.0, 2.0, //
                3.0, 2.0, 2.0, 0.0,
            ],
        )
        .unwrap()
    }

    #[test]
    fn pathological_loss_has_no_equilibrium() {
        let sol = solve_equilibrium_matrix(&appendix_l1()).unwrap();
        assert_eq!(sol.status, SolutionStatus::None);
        assert!(sol.prior.is_none());
    }

    #[test]
    fn half_support_equilibrium_is_unique() {
        let sol = solve_equilibrium_matrix(&appendix_l2()).unwrap();
        assert_eq!(sol.status, SolutionStatus::Unique);
        let pi = sol.prior.unwrap();
        let expect = [0.5, 0.0, 0.0, 0.5];
        for (got, want) in pi.iter().zip(expect) {
            assert_abs_diff_eq!(got, &want, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(sol.risk_value.unwrap(), 1.5, epsilon = 1e-10);
    }

    #[test]
    fn zero_one_matrix_gives_uniform() {
        let m = 5;
        let ids: Vec<String> = (0..m).map(|i| format!("m{i}")).collect();
        let vals: Vec<f64> = (0..m * m)
            .map(|k| if k / m == k % m { 0.0 } else { 1.0 })
            .collect();
        let sol = solve_equilibrium_matrix(&LossMatrix::new(ids, vals).unwrap()).unwrap();
        assert_eq!(sol.status, SolutionStatus::Unique);
        for v in sol.prior.unwrap() {
            assert_abs_diff_eq!(v, 1.0 / m as f64, epsilon = 1e-10);
        }
    }

    #[test]
    fn hamming_matrix_on_two_bits_is_underdetermined() {
        // GH(1) on {0,1}^2 characterizes a marginal constraint, not a point.
        let ids = vec!["00".into(), "01".into(), "10".into(), "11".into()];
        let vals = vec![
            0.0, 1.0, 1.0, 2.0, //
            1.0, 0.0, 2.0, 1.0, //
            1.0, 2.0, 0.0, 1.0, //
            2.0, 1.0, 1.0, 0.0,
        ];
        let matrix = LossMatrix::new(ids, vals).unwrap();
        let sol = solve_equilibrium_matrix(&matrix).unwrap();
        assert_eq!(sol.status, SolutionStatus::Underdetermined);
        assert_eq!(sol.basis.len(), 1);

        // The uniform prior lies in the solution set: constant risk.
        let uniform = [0.25; 4];
        let risks: Vec<f64> = (0..4)
            .map(|i| (0..4).map(|j| matrix.entry(j, i) * uniform[j]).sum())
            .collect();
        let spread = risks.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - risks.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread <= 1e-12);

        // The returned representative is a valid nonnegative prior.
        let pi = sol.prior.unwrap();
        assert!(pi.iter().all(|&v| v >= 0.0));
        assert_abs_diff_eq!(pi.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }
}
