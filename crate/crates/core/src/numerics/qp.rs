//! Convex quadratic programming with linear equalities and lower bounds,
//! solved by a primal-dual interior-point method on the full KKT system.
//!
//! ```text
//!     min ½ xᵀQx + cᵀx   s.t.  A x = b,  x ≥ lower
//! ```

use ndarray::{Array1, Array2};

use super::dense::{inf_norm, norm2, Lu};
use super::{SolverReport, SolverStatus, IPM_MAX_ITER, QP_KKT_TOL};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct QpProblem<T> {
    pub q: Array2<T>,
    pub c: Array1<T>,
    pub a_eq: Array2<T>,
    pub b_eq: Array1<T>,
    pub lower: Array1<T>,
}

#[derive(Debug, Clone)]
pub struct QpOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions {
            max_iter: IPM_MAX_ITER,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution<T> {
    pub x: Array1<T>,
    /// Equality multipliers.
    pub y: Array1<T>,
    /// Bound multipliers (`z ≥ 0`, complementary to `x − lower`).
    pub z: Array1<T>,
    pub report: SolverReport,
}

impl<T: Real> QpProblem<T> {
    pub fn objective(&self, x: &Array1<T>) -> T {
        T::lit(0.5) * x.dot(&self.q.dot(x)) + self.c.dot(x)
    }

    /// Scaled KKT residuals `(primal, dual, complementarity)` at `(x, y, z)`.
    pub fn kkt_residuals(&self, x: &Array1<T>, y: &Array1<T>, z: &Array1<T>) -> (T, T, T) {
        let primal = if self.a_eq.nrows() > 0 {
            inf_norm((&self.a_eq.dot(x) - &self.b_eq).view()) / (T::one() + inf_norm(self.b_eq.view()))
        } else {
            T::zero()
        };
        let grad = &self.q.dot(x) + &self.c;
        let dual_vec = &(&grad - &self.a_eq.t().dot(y)) - z;
        let dual = inf_norm(dual_vec.view()) / (T::one() + inf_norm(self.c.view()));
        let comp = x
            .iter()
            .zip(self.lower.iter())
            .zip(z.iter())
            .fold(T::zero(), |acc, ((&xi, &li), &zi)| acc.max(((xi - li) * zi).abs()));
        (primal, dual, comp)
    }
}

/// Solves the QP. `Err(Infeasible)` if the equalities cannot be met within
/// the bounds; `Err(SolverFailure)` if the iteration cap is hit without
/// satisfying the KKT tolerance.
pub fn solve_qp<T: Real>(p: &QpProblem<T>, opts: &QpOptions) -> Result<QpSolution<T>> {
    let n = p.q.nrows();
    let m = p.a_eq.nrows();
    assert_eq!(p.q.ncols(), n);
    assert_eq!(p.c.len(), n);
    assert_eq!(p.lower.len(), n);
    if m > 0 {
        assert_eq!(p.a_eq.ncols(), n);
    }
    assert_eq!(p.b_eq.len(), m);

    // shift to w = x − lower ≥ 0
    let c_w = &p.c + &p.q.dot(&p.lower);
    let b_w = if m > 0 {
        &p.b_eq - &p.a_eq.dot(&p.lower)
    } else {
        Array1::zeros(0)
    };
    let tol = T::lit(opts.tol);
    let nn = T::from_usize_lossy(n);

    let mut w = Array1::from_elem(n, T::one());
    let mut z = Array1::from_elem(n, T::one());
    let mut y = Array1::<T>::zeros(m);
    let bscale = T::one() + inf_norm(b_w.view());
    let cscale = T::one() + inf_norm(c_w.view());

    let mut last = (T::infinity(), T::infinity());
    for it in 0..opts.max_iter {
        let rd = &(&(&p.q.dot(&w) + &c_w) - &p.a_eq.t().dot(&y)) - &z;
        let rp = if m > 0 { &p.a_eq.dot(&w) - &b_w } else { Array1::zeros(0) };
        let mu = w.dot(&z) / nn;
        let pr = inf_norm(rp.view()) / bscale;
        let dr = inf_norm(rd.view()) / cscale;
        last = (pr, dr);
        if pr <= tol && dr <= tol && mu <= tol {
            return Ok(finish(p, w, y, z, it, SolverStatus::Optimal));
        }

        // K = [[Q + W⁻¹Z, −Aᵀ], [A, 0]]
        let mut k = Array2::<T>::zeros((n + m, n + m));
        for i in 0..n {
            for j in 0..n {
                k[[i, j]] = p.q[[i, j]];
            }
            k[[i, i]] += z[i] / w[i];
        }
        for r in 0..m {
            for j in 0..n {
                k[[j, n + r]] = -p.a_eq[[r, j]];
                k[[n + r, j]] = p.a_eq[[r, j]];
            }
        }
        // tiny dual regularization keeps K nonsingular with redundant rows
        for r in 0..m {
            k[[n + r, n + r]] = -T::epsilon() * T::lit(1e3);
        }
        let lu = Lu::new(k);

        let solve = |rxs: &Array1<T>| -> (Array1<T>, Array1<T>, Array1<T>) {
            let mut rhs = Array1::zeros(n + m);
            for i in 0..n {
                rhs[i] = -rd[i] + rxs[i] / w[i];
            }
            for r in 0..m {
                rhs[n + r] = -rp[r];
            }
            let sol = lu.solve(&rhs);
            let dw = sol.slice(ndarray::s![..n]).to_owned();
            let dy = sol.slice(ndarray::s![n..]).to_owned();
            let dz: Array1<T> = (0..n).map(|i| (rxs[i] - z[i] * dw[i]) / w[i]).collect();
            (dw, dy, dz)
        };

        let rxs_aff: Array1<T> = (0..n).map(|i| -w[i] * z[i]).collect();
        let (dw_a, _, dz_a) = solve(&rxs_aff);
        let ap = max_step(&w, &dw_a);
        let ad = max_step(&z, &dz_a);
        let mu_aff = (0..n)
            .map(|i| (w[i] + ap * dw_a[i]) * (z[i] + ad * dz_a[i]))
            .sum::<T>()
            / nn;
        let sigma = (mu_aff / mu).powi(3).min(T::one());
        let rxs: Array1<T> = (0..n)
            .map(|i| -w[i] * z[i] - dw_a[i] * dz_a[i] + sigma * mu)
            .collect();
        let (dw, dy, dz) = solve(&rxs);
        let eta = T::lit(0.995);
        let ap = (eta * max_step(&w, &dw)).min(T::one());
        let ad = (eta * max_step(&z, &dz)).min(T::one());
        w.scaled_add(ap, &dw);
        y.scaled_add(ad, &dy);
        z.scaled_add(ad, &dz);
        if norm2(w.view()) > T::lit(1e14) {
            return Err(Error::Infeasible {
                max_violation: pr.as_f64(),
            });
        }
    }

    let sol = finish(p, w, y, z, opts.max_iter, SolverStatus::MaxIter);
    let (pr, dr, comp) = p.kkt_residuals(&sol.x, &sol.y, &sol.z);
    let kkt = T::lit(QP_KKT_TOL);
    if pr <= kkt && dr <= kkt && comp <= kkt {
        let mut sol = sol;
        sol.report.status = SolverStatus::Optimal;
        return Ok(sol);
    }
    if last.0 > kkt {
        return Err(Error::Infeasible {
            max_violation: last.0.as_f64(),
        });
    }
    Err(Error::SolverFailure {
        iterations: opts.max_iter,
        primal: last.0.as_f64(),
        dual: last.1.as_f64(),
    })
}

fn finish<T: Real>(
    p: &QpProblem<T>,
    w: Array1<T>,
    y: Array1<T>,
    z: Array1<T>,
    iterations: usize,
    status: SolverStatus,
) -> QpSolution<T> {
    let x = &w + &p.lower;
    let (pr, dr, _) = p.kkt_residuals(&x, &y, &z);
    let objective = p.objective(&x);
    QpSolution {
        report: SolverReport {
            status,
            iterations,
            primal_residual: pr.as_f64(),
            dual_residual: dr.as_f64(),
            objective: objective.as_f64(),
            rank: None,
        },
        x,
        y,
        z,
    }
}

fn max_step<T: Real>(v: &Array1<T>, dv: &Array1<T>) -> T {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, &d)| d < T::zero())
        .map(|(&vi, &d)| -vi / d)
        .fold(T::lit(1e30), |acc, r| acc.min(r))
}
