//! Standard-form linear programming by a dense primal-dual interior-point
//! method (Mehrotra predictor-corrector).
//!
//! ```text
//!     min cᵀx   s.t.  A x = b,  x ≥ 0
//! ```
//!
//! A small presolve removes columns that appear in no constraint and rows
//! that are linearly dependent on the others; the full system is re-checked
//! at the end.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::dense::{cholesky_in_place, cholesky_solve, norm2};
use super::{SolverReport, SolverStatus, IPM_MAX_ITER, LP_FEASIBILITY_TOL, LP_GAP_TOL};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct LpOptions {
    pub max_iter: usize,
    /// Convergence tolerance on scaled residuals and the relative gap.
    pub tol: f64,
    /// Relative threshold for discarding dependent constraint rows.
    pub rank_tol: f64,
    /// Loosest threshold tried after a breakdown.
    pub max_rank_tol: f64,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            max_iter: IPM_MAX_ITER,
            tol: 1e-9,
            rank_tol: 1e-9,
            max_rank_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub x: Array1<T>,
    /// Equality multipliers on the rows kept by presolve (zero on dropped rows).
    pub y: Array1<T>,
    pub report: SolverReport,
}

/// Solves `min cᵀx s.t. A x = b, x ≥ 0`.
///
/// Returns `Err(Infeasible)` when the final point violates `A x = b` beyond
/// `LP_FEASIBILITY_TOL · (1 + ‖b‖)`, and `Err(Unbounded)` when a free
/// direction of negative cost exists.
///
/// If the iteration breaks down or ends infeasible on a nearly rank-deficient
/// system, presolve is repeated with a looser rank threshold, up to
/// `max_rank_tol`; only the last attempt's error is reported.
pub fn solve_lp<T: Real>(
    c: ArrayView1<'_, T>,
    a: ArrayView2<'_, T>,
    b: ArrayView1<'_, T>,
    opts: &LpOptions,
) -> Result<LpSolution<T>> {
    let (m, n) = a.dim();
    assert_eq!(c.len(), n, "solve_lp: cost length");
    assert_eq!(b.len(), m, "solve_lp: rhs length");
    let mut rank_tol = opts.rank_tol;
    loop {
        match solve_presolved(c, a, b, opts, rank_tol) {
            Err(Error::SolverFailure { .. } | Error::Infeasible { .. }) if rank_tol * 10.0 <= opts.max_rank_tol => {
                log::debug!("lp: retrying with rank threshold {:e}", rank_tol * 10.0);
                rank_tol *= 10.0;
            }
            other => return other,
        }
    }
}

fn solve_presolved<T: Real>(
    c: ArrayView1<'_, T>,
    a: ArrayView2<'_, T>,
    b: ArrayView1<'_, T>,
    opts: &LpOptions,
    rank_tol: f64,
) -> Result<LpSolution<T>> {
    let (m, n) = a.dim();

    // columns that touch no constraint
    let mut active_cols = Vec::with_capacity(n);
    for j in 0..n {
        if a.column(j).iter().any(|&v| v != T::zero()) {
            active_cols.push(j);
        } else if c[j] < T::zero() {
            return Err(Error::Unbounded);
        }
    }
    let a_cols = a.select(Axis(1), &active_cols);
    let rows = independent_rows(a_cols.view(), T::lit(rank_tol));
    let a_red = a_cols.select(Axis(0), &rows);
    let b_red: Array1<T> = rows.iter().map(|&i| b[i]).collect();
    let c_red: Array1<T> = active_cols.iter().map(|&j| c[j]).collect();

    let (x_red, y_red, iterations, converged) = if a_red.nrows() == 0 || a_red.ncols() == 0 {
        // nothing constrains the remaining columns: all costs are ≥ 0 here
        if c_red.iter().any(|&v| v < T::zero()) {
            return Err(Error::Unbounded);
        }
        (Array1::zeros(c_red.len()), Array1::zeros(a_red.nrows()), 0, true)
    } else {
        mehrotra(c_red.view(), a_red.view(), b_red.view(), opts)?
    };

    let mut x = Array1::zeros(n);
    for (k, &j) in active_cols.iter().enumerate() {
        x[j] = x_red[k].max(T::zero());
    }
    let mut y = Array1::zeros(m);
    for (k, &i) in rows.iter().enumerate() {
        y[i] = y_red[k];
    }
    polish(a, b, &mut x);

    let resid = &a.dot(&x) - &b;
    let primal = norm2(resid.view());
    let bnorm = norm2(b);
    let objective = c.dot(&x);
    let dual_slack = &c - &a.t().dot(&y);
    let dual = dual_slack
        .iter()
        .fold(T::zero(), |acc, &v| acc + v.min(T::zero()) * v.min(T::zero()))
        .sqrt();

    if primal > T::lit(LP_FEASIBILITY_TOL) * (T::one() + bnorm) {
        return Err(Error::Infeasible {
            max_violation: resid.iter().fold(0.0, |acc: f64, v| acc.max(v.abs().as_f64())),
        });
    }
    let gap = (objective - b.dot(&y)).abs();
    let status = if converged && gap <= T::lit(LP_GAP_TOL) * (T::one() + objective.abs()) {
        SolverStatus::Optimal
    } else {
        SolverStatus::MaxIter
    };
    Ok(LpSolution {
        x,
        y,
        report: SolverReport {
            status,
            iterations,
            primal_residual: primal.as_f64(),
            dual_residual: dual.as_f64(),
            objective: objective.as_f64(),
            rank: Some(rows.len()),
        },
    })
}

/// Pulls `x` back onto `A x = b` against all rows, including any dropped by
/// presolve, with affine-scaled least-squares steps that keep `x ≥ 0` and
/// leave zero entries at zero.
fn polish<T: Real>(a: ArrayView2<'_, T>, b: ArrayView1<'_, T>, x: &mut Array1<T>) {
    let m = a.nrows();
    let mut resid = &b - &a.dot(x);
    let mut best = norm2(resid.view());
    for _ in 0..POLISH_STEPS {
        if best == T::zero() {
            return;
        }
        let x2 = x.mapv(|v| v * v);
        let ax = &a * &x2.view().insert_axis(Axis(0));
        let normal: Array2<T> = ax.dot(&a.t());
        let maxdiag = (0..m).fold(T::zero(), |acc, i| acc.max(normal[[i, i]]));
        let reg = maxdiag * T::lit(1e-12);
        let mut mat = normal.clone();
        for i in 0..m {
            mat[[i, i]] += reg;
        }
        cholesky_in_place(&mut mat, reg.max(T::min_positive_value()));
        let mut w = cholesky_solve(&mat, &resid);
        for _ in 0..REFINE_SWEEPS {
            let r = &resid - &normal.dot(&w);
            w += &cholesky_solve(&mat, &r);
        }
        let dx = &x2 * &a.t().dot(&w);
        let alpha = (T::lit(0.9) * max_step(x, &dx)).min(T::one());
        let trial = x.clone() + &dx.mapv(|v| v * alpha);
        let trial_resid = &b - &a.dot(&trial);
        let r = norm2(trial_resid.view());
        if !(r < best) {
            return;
        }
        *x = trial.mapv(|v| v.max(T::zero()));
        resid = &b - &a.dot(x);
        best = norm2(resid.view());
    }
}

const POLISH_STEPS: usize = 10;
const REFINE_SWEEPS: usize = 20;

/// Greedy pivoted Gram-Schmidt over the rows of `a`; returns the indices of a
/// maximal well-conditioned independent subset, in ascending order.
pub(crate) fn independent_rows<T: Real>(a: ArrayView2<'_, T>, rel_tol: T) -> Vec<usize> {
    let m = a.nrows();
    let mut work = a.to_owned();
    let mut norms: Vec<T> = (0..m).map(|i| norm2(work.row(i))).collect();
    let top = norms.iter().fold(T::zero(), |acc, &v| acc.max(v));
    let mut chosen = Vec::new();
    let mut remaining: Vec<usize> = (0..m).collect();
    if top == T::zero() {
        return chosen;
    }
    while !remaining.is_empty() {
        let (pos, &best) = remaining
            .iter()
            .enumerate()
            .max_by(|x, y| norms[*x.1].partial_cmp(&norms[*y.1]).unwrap())
            .expect("nonempty");
        if norms[best] <= rel_tol * top {
            break;
        }
        remaining.swap_remove(pos);
        chosen.push(best);
        let q = work.row(best).mapv(|v| v / norms[best]);
        for &i in &remaining {
            // two passes keep the basis orthogonal in finite precision
            for _ in 0..2 {
                let proj = work.row(i).dot(&q);
                work.row_mut(i).scaled_add(-proj, &q);
            }
            norms[i] = norm2(work.row(i));
        }
    }
    chosen.sort_unstable();
    chosen
}

type IpmOut<T> = (Array1<T>, Array1<T>, usize, bool);

fn mehrotra<T: Real>(
    c: ArrayView1<'_, T>,
    a: ArrayView2<'_, T>,
    b: ArrayView1<'_, T>,
    opts: &LpOptions,
) -> Result<IpmOut<T>> {
    let (m, n) = a.dim();
    let tol = T::lit(opts.tol);
    let nn = T::from_usize_lossy(n);
    let bnorm = norm2(b);
    let cnorm = norm2(c);

    let solve_normal = |d: &Array1<T>, rhs: &Array1<T>| -> Array1<T> {
        let ad = &a * &d.view().insert_axis(Axis(0));
        let mut mat: Array2<T> = ad.dot(&a.t());
        let maxdiag = (0..m).fold(T::zero(), |acc, i| acc.max(mat[[i, i]]));
        let reg = maxdiag * T::epsilon() * T::lit(100.0);
        for i in 0..m {
            mat[[i, i]] += reg;
        }
        cholesky_in_place(&mut mat, reg.max(T::min_positive_value()));
        cholesky_solve(&mat, rhs)
    };

    // starting point
    let ones = Array1::from_elem(n, T::one());
    let lam0 = solve_normal(&ones, &b.to_owned());
    let mut x = a.t().dot(&lam0);
    let mut y = solve_normal(&ones, &a.dot(&c));
    let mut s = &c - &a.t().dot(&y);
    let dx = (-T::lit(1.5) * x.iter().fold(T::infinity(), |acc, &v| acc.min(v))).max(T::zero());
    let ds = (-T::lit(1.5) * s.iter().fold(T::infinity(), |acc, &v| acc.min(v))).max(T::zero());
    x.mapv_inplace(|v| v + dx);
    s.mapv_inplace(|v| v + ds);
    let xs = x.dot(&s);
    let dx2 = T::lit(0.5) * xs / s.sum().max(T::min_positive_value());
    let ds2 = T::lit(0.5) * xs / x.sum().max(T::min_positive_value());
    // near-zero costs would otherwise start the iterates far off the central path
    let x_floor = T::lit(1e-2) * (x.sum() / nn).max(T::one());
    let s_floor = T::lit(1e-2) * (c.iter().fold(T::zero(), |m, &v| m.max(v.abs()))).max(T::one());
    x.mapv_inplace(|v| (v + dx2).max(x_floor));
    s.mapv_inplace(|v| (v + ds2).max(s_floor));

    let mut best_prel = T::infinity();
    let mut stalled = 0;

    for it in 0..opts.max_iter {
        let rb = &a.dot(&x) - &b;
        let rc = a.t().dot(&y) + &s - c;
        let mu = x.dot(&s) / nn;
        let pobj = c.dot(&x);
        let dobj = b.dot(&y);
        let prel = norm2(rb.view()) / (T::one() + bnorm);
        let drel = norm2(rc.view()) / (T::one() + cnorm);
        let gap = (pobj - dobj).abs() / (T::one() + pobj.abs());
        if prel <= tol && drel <= tol && gap <= tol {
            return Ok((x, y, it, true));
        }
        // a rank-deficient system can leave the primal residual at a floor
        // above `tol` once the gap has closed; the caller re-checks feasibility
        if prel < best_prel * T::lit(0.9) {
            best_prel = prel;
            stalled = 0;
        } else {
            stalled += 1;
        }
        if stalled >= 5 && drel <= tol && gap <= tol {
            return Ok((x, y, it, prel <= tol.sqrt()));
        }
        if !x.iter().chain(s.iter()).all(|v| v.is_finite()) || norm2(x.view()) > T::lit(1e15) {
            return Err(Error::SolverFailure {
                iterations: it,
                primal: prel.as_f64(),
                dual: drel.as_f64(),
            });
        }

        let d: Array1<T> = x.iter().zip(s.iter()).map(|(&xi, &si)| xi / si).collect();
        let step = |rxs: &Array1<T>| -> (Array1<T>, Array1<T>, Array1<T>) {
            // Δx = S⁻¹rxs + D rc + D Aᵀ Δy;  A D Aᵀ Δy = −rb − A(S⁻¹rxs + D rc)
            let base: Array1<T> = (0..n).map(|i| rxs[i] / s[i] + d[i] * rc[i]).collect();
            let rhs = rb.mapv(|v| -v) - a.dot(&base);
            let dy = solve_normal(&d, &rhs);
            let atdy = a.t().dot(&dy);
            let dxv: Array1<T> = (0..n).map(|i| base[i] + d[i] * atdy[i]).collect();
            let dsv = rc.mapv(|v| -v) - &atdy;
            (dxv, dy, dsv)
        };

        let rxs_aff: Array1<T> = x.iter().zip(s.iter()).map(|(&xi, &si)| -xi * si).collect();
        let (dx_a, _, ds_a) = step(&rxs_aff);
        let ap = max_step(&x, &dx_a);
        let ad = max_step(&s, &ds_a);
        let mu_aff = (0..n)
            .map(|i| (x[i] + ap * dx_a[i]) * (s[i] + ad * ds_a[i]))
            .sum::<T>()
            / nn;
        let sigma = (mu_aff / mu).powi(3).min(T::one());

        let rxs: Array1<T> = (0..n)
            .map(|i| -x[i] * s[i] - dx_a[i] * ds_a[i] + sigma * mu)
            .collect();
        let (dxv, dy, dsv) = step(&rxs);
        let eta = T::lit(0.995);
        let ap = (eta * max_step(&x, &dxv)).min(T::one());
        let ad = (eta * max_step(&s, &dsv)).min(T::one());
        x.scaled_add(ap, &dxv);
        y.scaled_add(ad, &dy);
        s.scaled_add(ad, &dsv);
    }
    Ok((x, y, opts.max_iter, false))
}

/// Largest `α` keeping `v + α dv ≥ 0`.
fn max_step<T: Real>(v: &Array1<T>, dv: &Array1<T>) -> T {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, &d)| d < T::zero())
        .map(|(&vi, &d)| -vi / d)
        .fold(T::lit(1e30), |acc, r| acc.min(r))
}
