//! Dense strictly convex QP: minimize `½ xᵀHx + fᵀx` subject to `Ax ≤ b`.
//!
//! Dual active-set method of Goldfarb and Idnani. Starts from the unconstrained minimizer and
//! adds violated constraints one at a time, dropping active ones whose multiplier would turn
//! negative. Every iterate after an addition is optimal for the constraints added so far, so the
//! method needs no feasible starting point and detects infeasibility directly.
//!
//! The active-set factorization is recomputed from scratch each iteration; the problems this
//! crate builds are tiny (n ≤ ~10, l ≤ ~40), which keeps that cheap.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, QR};

use crate::error::{Error, Result};

/// Smallest admissible eigenvalue of `H`.
pub const MIN_EIGENVALUE: f64 = 1e-12;
/// Normalized violation `(a·x − b)/‖a‖` below which a constraint counts as satisfied.
const FEAS_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    h: DMatrix<f64>,
    f: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl QpProblem {
    pub fn new(h: DMatrix<f64>, f: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = h.nrows();
        if h.ncols() != n || f.len() != n {
            return Err(Error::InvalidProblem(format!(
                "H is {}x{} and f has {} entries",
                h.nrows(),
                h.ncols(),
                f.len()
            )));
        }
        if a.nrows() != b.len() || (a.nrows() > 0 && a.ncols() != n) {
            return Err(Error::InvalidProblem(format!(
                "A is {}x{} but b has {} entries and x has {n}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        let all_finite = h
            .iter()
            .chain(f.iter())
            .chain(a.iter())
            .chain(b.iter())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidProblem("non-finite entries".into()));
        }
        let asym = (&h - h.transpose()).amax();
        if asym > 1e-12 * (1.0 + h.amax()) {
            return Err(Error::InvalidProblem(format!(
                "H is not symmetric (max asymmetry {asym})"
            )));
        }
        let min_eig = SymmetricEigen::new(h.clone()).eigenvalues.min();
        if !(min_eig >= MIN_EIGENVALUE) {
            return Err(Error::InvalidProblem(format!(
                "H is not positive definite (min eigenvalue {min_eig})"
            )));
        }
        let a = if a.nrows() == 0 { DMatrix::zeros(0, n) } else { a };
        Ok(Self { h, f, a, b })
    }

    /// Problem with no inequality rows.
    pub fn unconstrained(h: DMatrix<f64>, f: DVector<f64>) -> Result<Self> {
        let n = h.nrows();
        Self::new(h, f, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn num_constraints(&self) -> usize {
        self.b.len()
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn f(&self) -> &DVector<f64> {
        &self.f
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.f.dot(x)
    }

    /// KKT residuals of a candidate primal/dual pair.
    pub fn residuals(&self, x: &DVector<f64>, multipliers: &DVector<f64>) -> KktResiduals {
        let slack = &self.b - &self.a * x;
        let primal = slack.iter().fold(0.0f64, |acc, s| acc.max(-s));
        let stationarity = (&self.h * x + &self.f + self.a.transpose() * multipliers).norm();
        let complementarity = slack
            .iter()
            .zip(multipliers.iter())
            .fold(0.0f64, |acc, (s, m)| acc.max((s * m).abs()));
        let dual = multipliers.iter().fold(0.0f64, |acc, m| acc.max(-m));
        KktResiduals {
            primal,
            dual,
            stationarity,
            complementarity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    /// Largest constraint violation `max(Ax − b)₊`.
    pub primal: f64,
    /// Largest negative multiplier magnitude.
    pub dual: f64,
    /// `‖Hx + f + Aᵀμ‖`.
    pub stationarity: f64,
    /// `max |μᵢ (bᵢ − aᵢ·x)|`.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal
            .max(self.dual)
            .max(self.stationarity)
            .max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub status: QpStatus,
    /// Indices of the constraints active at `x`, in the order they were added.
    pub active_set: Vec<usize>,
    /// One multiplier per constraint row, zero for inactive rows.
    pub multipliers: DVector<f64>,
    pub residuals: KktResiduals,
    pub iterations: usize,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

/// Solver instance; one solve at a time, instances are independent.
#[derive(Debug, Clone, Default)]
pub struct QpSolver {
    max_iter: Option<usize>,
}

impl QpSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Caps the number of active-set iterations (default `10·(n + l)`).
    pub fn with_max_iter(max_iter: usize) -> Self {
        Self {
            max_iter: Some(max_iter),
        }
    }

    pub fn solve(&mut self, problem: &QpProblem) -> QpSolution {
        let n = problem.dim();
        let l = problem.num_constraints();
        let max_iter = self.max_iter.unwrap_or(10 * (n + l)).max(1);

        // H = L Lᵀ; with J = L⁻ᵀ we have H⁻¹ = J Jᵀ.
        let chol = Cholesky::new(problem.h.clone()).expect("QpProblem guarantees H is SPD");
        let l_inv = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("Cholesky factor is non-singular");
        let j = l_inv.transpose();

        let mut x = -chol.solve(&problem.f);
        let row_norms: Vec<f64> = (0..l).map(|i| problem.a.row(i).norm()).collect();

        // GI form: n_i = −a_i, constraint n_iᵀx ≥ −b_i.
        let mut active: Vec<usize> = Vec::new();
        let mut u: Vec<f64> = Vec::new();
        let mut iterations = 0;

        let status = 'outer: loop {
            // Most violated constraint, normalized so row scaling does not change the choice.
            let mut worst: Option<(usize, f64)> = None;
            for (i, &norm) in row_norms.iter().enumerate() {
                if active.contains(&i) {
                    continue;
                }
                let s = problem.b[i] - (problem.a.row(i) * &x)[0];
                let v = if norm > 0.0 { s / norm } else { s };
                if v < -FEAS_TOL && worst.is_none_or(|(_, w)| v < w) {
                    worst = Some((i, v));
                }
            }
            let Some((p, _)) = worst else {
                break QpStatus::Optimal;
            };
            let np: DVector<f64> = -problem.a.row(p).transpose();
            let mut u_p = 0.0;

            loop {
                iterations += 1;
                if iterations > max_iter {
                    break 'outer QpStatus::MaxIter;
                }
                let (z, r) = step_directions(&j, &problem.a, &active, &np);

                // Partial step: largest dual step keeping active multipliers non-negative.
                let mut t1 = f64::INFINITY;
                let mut drop_k = None;
                for (k, (&rk, &uk)) in r.iter().zip(u.iter()).enumerate() {
                    if rk > 0.0 {
                        let t = uk / rk;
                        if t < t1 {
                            t1 = t;
                            drop_k = Some(k);
                        }
                    }
                }

                // Full step: primal step making constraint p active.
                let jt_np = j.transpose() * &np;
                let zn = z.dot(&np);
                let s_p = np.dot(&x) + problem.b[p];
                let t2 = if zn > 1e-12 * jt_np.norm_squared() {
                    -s_p / zn
                } else {
                    f64::INFINITY
                };

                if t1.is_infinite() && t2.is_infinite() {
                    break 'outer QpStatus::Infeasible;
                }

                if t2.is_infinite() {
                    for (uk, rk) in u.iter_mut().zip(r.iter()) {
                        *uk -= t1 * rk;
                    }
                    u_p += t1;
                    let k = drop_k.expect("finite t1 has an index");
                    active.remove(k);
                    u.remove(k);
                    continue;
                }

                let t = t1.min(t2);
                x += &z * t;
                for (uk, rk) in u.iter_mut().zip(r.iter()) {
                    *uk -= t * rk;
                }
                u_p += t;

                if t2 <= t1 {
                    active.push(p);
                    u.push(u_p);
                    break;
                }
                let k = drop_k.expect("finite t1 has an index");
                active.remove(k);
                u.remove(k);
            }
        };

        let mut multipliers = DVector::zeros(l);
        for (&i, &ui) in active.iter().zip(u.iter()) {
            multipliers[i] = ui.max(0.0);
        }
        let residuals = problem.residuals(&x, &multipliers);
        QpSolution {
            x,
            status,
            active_set: active,
            multipliers,
            residuals,
            iterations,
        }
    }
}

/// Primal direction `z = J₂J₂ᵀ n_p` and dual direction `r = R⁻¹J₁ᵀ n_p` for the current
/// active set, where `JᵀN = Q [R; 0]` and `[J₁ J₂] = J Q`.
fn step_directions(
    j: &DMatrix<f64>,
    a: &DMatrix<f64>,
    active: &[usize],
    np: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let n = j.nrows();
    let q = active.len();
    if q == 0 {
        let jt_np = j.transpose() * np;
        return (j * jt_np, DVector::zeros(0));
    }
    // Pad to square so the QR yields a full orthogonal Q.
    let mut b = DMatrix::zeros(n, n);
    for (c, &i) in active.iter().enumerate() {
        let ni = -a.row(i).transpose();
        b.set_column(c, &(j.transpose() * ni));
    }
    let qr = QR::<f64, Dyn, Dyn>::new(b);
    let qmat = qr.q();
    let rmat = qr.r();
    let jq = j * &qmat;
    let d = jq.transpose() * np;
    let d1 = d.rows(0, q).into_owned();
    let d2 = d.rows(q, n - q).into_owned();
    let z = jq.columns(q, n - q) * d2;
    let r = rmat
        .view((0, 0), (q, q))
        .into_owned()
        .solve_upper_triangular(&d1)
        .unwrap_or_else(|| DVector::from_element(q, f64::NAN));
    (z, r)
}

/// Solves with a fresh solver and the default iteration cap.
pub fn solve(problem: &QpProblem) -> QpSolution {
    QpSolver::new().solve(problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unconstrained_identity() {
        let p = QpProblem::unconstrained(DMatrix::identity(3, 3), DVector::zeros(3)).unwrap();
        let s = solve(&p);
        assert_eq!(s.status, QpStatus::Optimal);
        assert_eq!(s.x, DVector::zeros(3));
    }

    #[test]
    fn clipped_optimum() {
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::from_column_slice(&[-2.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::from_column_slice(&[0.5]),
        )
        .unwrap();
        let s = solve(&p);
        assert_eq!(s.status, QpStatus::Optimal);
        assert_relative_eq!(s.x, DVector::from_column_slice(&[0.5, 0.0]), epsilon = 1e-14);
        assert_eq!(s.active_set, vec![0]);
        assert_relative_eq!(s.multipliers[0], 1.5, epsilon = 1e-14);
        assert!(s.residuals.max() < 1e-12);
    }

    #[test]
    fn quadprog_readme_example() {
        // min ½x² + ½y² + x  s.t.  x + 2y ≥ 1  →  (−0.6, 0.8)
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::from_column_slice(&[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[-1.0, -2.0]),
            DVector::from_column_slice(&[-1.0]),
        )
        .unwrap();
        let s = solve(&p);
        assert_relative_eq!(s.x, DVector::from_column_slice(&[-0.6, 0.8]), epsilon = 1e-14);
    }

    #[test]
    fn infeasible_is_reported() {
        // x ≤ −1 and −x ≤ −1 (x ≥ 1)
        let p = QpProblem::new(
            DMatrix::identity(1, 1),
            DVector::zeros(1),
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DVector::from_column_slice(&[-1.0, -1.0]),
        )
        .unwrap();
        assert_eq!(solve(&p).status, QpStatus::Infeasible);

        // zero row with negative right-hand side
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DMatrix::zeros(1, 2),
            DVector::from_column_slice(&[-1e-3]),
        )
        .unwrap();
        assert_eq!(solve(&p).status, QpStatus::Infeasible);
    }

    #[test]
    fn zero_row_with_positive_rhs_is_inactive() {
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::from_column_slice(&[1.0, -1.0]),
            DMatrix::zeros(1, 2),
            DVector::from_column_slice(&[0.01]),
        )
        .unwrap();
        let s = solve(&p);
        assert!(s.is_optimal());
        assert_relative_eq!(s.x, DVector::from_column_slice(&[-1.0, 1.0]));
    }

    #[test]
    fn duplicate_and_parallel_rows() {
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::from_column_slice(&[-2.0, -2.0]),
            DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 1.0, 1.0]),
            DVector::from_column_slice(&[1.0, 2.0, 1.0]),
        )
        .unwrap();
        let s = solve(&p);
        assert!(s.is_optimal());
        assert_relative_eq!(s.x, DVector::from_column_slice(&[0.5, 0.5]), epsilon = 1e-12);
        assert!(s.residuals.max() < 1e-12);
    }

    #[test]
    fn max_iter_cap() {
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::from_column_slice(&[-2.0, -2.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            DVector::from_column_slice(&[0.0, 0.0]),
        )
        .unwrap();
        let s = QpSolver::with_max_iter(1).solve(&p);
        assert_eq!(s.status, QpStatus::MaxIter);
        assert!(QpSolver::new().solve(&p).is_optimal());
    }

    #[test]
    fn rejects_bad_problems() {
        let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(QpProblem::unconstrained(not_pd, DVector::zeros(2)).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(QpProblem::unconstrained(asym, DVector::zeros(2)).is_err());
        assert!(QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DMatrix::zeros(2, 2),
            DVector::zeros(1)
        )
        .is_err());
    }
}
