//! Complex linear least squares by Householder QR with column pivoting.
//!
//! Rank-deficient systems fall back to a complete orthogonal decomposition so
//! the returned solution is the minimum-norm minimizer.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex;

use super::dense::{adjoint_times_vec, cnorm2};
use super::{SolverReport, SolverStatus};
use crate::scalar::{abs2, Real};

struct Reflector<T> {
    v: Vec<Complex<T>>,
    /// first row the reflector acts on
    start: usize,
}

impl<T: Real> Reflector<T> {
    /// Builds `H = I − 2 v vᴴ` with `H x = α e₁`. Returns `None` for `x = 0`.
    fn new(x: &[Complex<T>], start: usize) -> Option<(Self, Complex<T>)> {
        let norm = x.iter().map(|&z| abs2(z)).sum::<T>().sqrt();
        if norm == T::zero() {
            return None;
        }
        let x0 = x[0];
        let r0 = x0.norm();
        let phase = if r0 > T::zero() {
            x0 / r0
        } else {
            Complex::new(T::one(), T::zero())
        };
        let alpha = -phase * norm;
        let mut v: Vec<Complex<T>> = x.to_vec();
        v[0] = v[0] - alpha;
        let vn = v.iter().map(|&z| abs2(z)).sum::<T>().sqrt();
        if vn == T::zero() {
            return None;
        }
        for z in v.iter_mut() {
            *z = *z / vn;
        }
        Some((Reflector { v, start }, alpha))
    }

    fn apply_vec(&self, b: &mut [Complex<T>]) {
        let two = T::lit(2.0);
        let mut dot = Complex::new(T::zero(), T::zero());
        for (k, &vk) in self.v.iter().enumerate() {
            dot = dot + vk.conj() * b[self.start + k];
        }
        let dot = dot * two;
        for (k, &vk) in self.v.iter().enumerate() {
            b[self.start + k] = b[self.start + k] - vk * dot;
        }
    }

    fn apply_cols(&self, a: &mut Array2<Complex<T>>, from_col: usize) {
        let two = T::lit(2.0);
        for j in from_col..a.ncols() {
            let mut dot = Complex::new(T::zero(), T::zero());
            for (k, &vk) in self.v.iter().enumerate() {
                dot = dot + vk.conj() * a[[self.start + k, j]];
            }
            let dot = dot * two;
            for (k, &vk) in self.v.iter().enumerate() {
                let cur = a[[self.start + k, j]];
                a[[self.start + k, j]] = cur - vk * dot;
            }
        }
    }
}

/// Minimizes `‖b − A x‖₂`.
///
/// The report carries the numerical rank, the residual norm as
/// `primal_residual`, `‖Aᴴ(b − Ax)‖` as `dual_residual` and `‖b − Ax‖²` as the
/// objective. Rank deficiency is not an error.
pub fn least_squares<T: Real>(
    a: ArrayView2<'_, Complex<T>>,
    b: ArrayView1<'_, Complex<T>>,
) -> (Array1<Complex<T>>, SolverReport) {
    let (m, n) = a.dim();
    assert_eq!(b.len(), m, "least_squares: rhs length");
    let zero = Complex::new(T::zero(), T::zero());
    if n == 0 {
        let r = cnorm2(b);
        return (
            Array1::from_elem(0, zero),
            report(r, T::zero(), Some(0)),
        );
    }

    let mut r = a.to_owned();
    let mut qtb: Vec<Complex<T>> = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut col_norms: Vec<T> = (0..n).map(|j| cnorm2(r.column(j))).collect();
    let steps = m.min(n);
    let mut diag = Vec::with_capacity(steps);

    for k in 0..steps {
        // pivot on largest remaining column norm
        let (p, _) = (k..n).fold((k, T::neg_infinity()), |best, j| {
            if col_norms[j] > best.1 {
                (j, col_norms[j])
            } else {
                best
            }
        });
        if p != k {
            perm.swap(p, k);
            col_norms.swap(p, k);
            for i in 0..m {
                let t = r[[i, k]];
                r[[i, k]] = r[[i, p]];
                r[[i, p]] = t;
            }
        }
        let x: Vec<Complex<T>> = (k..m).map(|i| r[[i, k]]).collect();
        match Reflector::new(&x, k) {
            Some((h, alpha)) => {
                h.apply_cols(&mut r, k);
                r[[k, k]] = alpha;
                for i in (k + 1)..m {
                    r[[i, k]] = zero;
                }
                h.apply_vec(&mut qtb);
                diag.push(alpha.norm());
            }
            None => diag.push(T::zero()),
        }
        for j in (k + 1)..n {
            col_norms[j] = (k + 1..m).map(|i| abs2(r[[i, j]])).sum::<T>().sqrt();
        }
    }

    let tol = diag.first().copied().unwrap_or(T::zero())
        * T::epsilon()
        * T::from_usize_lossy(m.max(n))
        * T::lit(10.0);
    let rank = diag.iter().take_while(|&&d| d > tol).count();

    let mut xp = vec![zero; n];
    if rank == n {
        back_substitute(&r, &qtb, n, &mut xp);
    } else if rank > 0 {
        // R₁ = [R11 R12] is rank × n; solve the minimum-norm system R₁ x = c
        // through a QR factorization of R₁ᴴ.
        let mut rt = Array2::from_elem((n, rank), zero);
        for i in 0..rank {
            for j in i..n {
                rt[[j, i]] = r[[i, j]].conj();
            }
        }
        let mut refl = Vec::with_capacity(rank);
        for k in 0..rank {
            let x: Vec<Complex<T>> = (k..n).map(|i| rt[[i, k]]).collect();
            if let Some((h, alpha)) = Reflector::new(&x, k) {
                h.apply_cols(&mut rt, k);
                rt[[k, k]] = alpha;
                for i in (k + 1)..n {
                    rt[[i, k]] = zero;
                }
                refl.push(h);
            }
        }
        // R₁ᴴ = Z [Tᵤ; 0] ⇒ R₁ = [Tᵤᴴ 0] Zᴴ; solve Tᵤᴴ w = c (lower-triangular).
        let mut w = vec![zero; n];
        for i in 0..rank {
            let mut v = qtb[i];
            for k in 0..i {
                v = v - rt[[k, i]].conj() * w[k];
            }
            w[i] = v / rt[[i, i]].conj();
        }
        for h in refl.iter().rev() {
            h.apply_vec(&mut w);
        }
        xp = w;
    }

    let mut x = Array1::from_elem(n, zero);
    for (k, &p) in perm.iter().enumerate() {
        x[p] = xp[k];
    }
    let resid = &b - &a.dot(&x);
    let rn = cnorm2(resid.view());
    let grad = cnorm2(adjoint_times_vec(a, resid.view()).view());
    (x, report(rn, grad, Some(rank)))
}

fn back_substitute<T: Real>(
    r: &Array2<Complex<T>>,
    qtb: &[Complex<T>],
    n: usize,
    out: &mut [Complex<T>],
) {
    for i in (0..n).rev() {
        let mut v = qtb[i];
        for k in (i + 1)..n {
            v = v - r[[i, k]] * out[k];
        }
        out[i] = v / r[[i, i]];
    }
}

fn report<T: Real>(resid: T, grad: T, rank: Option<usize>) -> SolverReport {
    SolverReport {
        status: SolverStatus::Optimal,
        iterations: 0,
        primal_residual: resid.as_f64(),
        dual_residual: grad.as_f64(),
        objective: (resid * resid).as_f64(),
        rank,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::dense::cfrobenius;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn random_cmat(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Array2<Complex<f64>> {
        Array2::from_shape_fn((m, n), |_| c(rng.random_range(-1.0f64..1.0), rng.random_range(-1.0f64..1.0)))
    }

    /// Gauss-Jordan inverse, used as an independent route.
    fn inverse(a: &Array2<Complex<f64>>) -> Array2<Complex<f64>> {
        let n = a.nrows();
        let mut aug = Array2::from_elem((n, 2 * n), c(0.0, 0.0));
        for i in 0..n {
            for j in 0..n {
                aug[[i, j]] = a[[i, j]];
            }
            aug[[i, n + i]] = c(1.0, 0.0);
        }
        for k in 0..n {
            let p = (k..n).max_by(|&x, &y| aug[[x, k]].norm().partial_cmp(&aug[[y, k]].norm()).unwrap()).unwrap();
            for j in 0..2 * n {
                let t = aug[[k, j]];
                aug[[k, j]] = aug[[p, j]];
                aug[[p, j]] = t;
            }
            let piv = aug[[k, k]];
            for j in 0..2 * n {
                aug[[k, j]] /= piv;
            }
            for i in 0..n {
                if i != k {
                    let f = aug[[i, k]];
                    for j in 0..2 * n {
                        let v = aug[[k, j]];
                        aug[[i, j]] -= f * v;
                    }
                }
            }
        }
        aug.slice(ndarray::s![.., n..]).to_owned()
    }

    #[test]
    fn square_nonsingular_matches_inverse() {
        let a = array![[c(2.0, 0.0), c(1.0, 1.0)], [c(0.0, -1.0), c(3.0, 0.5)]];
        let b = array![c(1.0, 2.0), c(-1.0, 0.0)];
        let (x, rep) = least_squares(a.view(), b.view());
        let expect = inverse(&a).dot(&b);
        assert!(cfrobenius((&x - &expect).insert_axis(ndarray::Axis(1)).view()) < 1e-10);
        assert_eq!(rep.rank, Some(2));
    }

    #[test]
    fn consistent_tall_system_has_zero_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_cmat(&mut rng, 12, 4);
        let x0 = array![c(1.0, 0.0), c(0.0, 1.0), c(-2.0, 0.5), c(0.3, -0.3)];
        let b = a.dot(&x0);
        let (x, rep) = least_squares(a.view(), b.view());
        assert!(rep.primal_residual < 1e-12);
        for i in 0..4 {
            assert!((x[i] - x0[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn random_system_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_cmat(&mut rng, 20, 5);
        let b = Array1::from_shape_fn(20, |_| c(rng.random_range(-1.0f64..1.0), rng.random_range(-1.0f64..1.0)));
        let (x, rep) = least_squares(a.view(), b.view());
        let ah = a.t().mapv(|z| z.conj());
        let expect = inverse(&ah.dot(&a)).dot(&ah.dot(&b));
        for i in 0..5 {
            assert!((x[i] - expect[i]).norm() < 1e-8, "{} vs {}", x[i], expect[i]);
        }
        let anorm = cfrobenius(a.view());
        let bnorm = cnorm2(b.view());
        assert!(rep.dual_residual <= 1e-8 * anorm * bnorm);
    }

    #[test]
    fn rank_deficient_returns_minimum_norm() {
        // duplicate column: x1 + x2 is determined, min-norm splits evenly
        let a = array![[c(1.0, 0.0), c(1.0, 0.0)], [c(0.0, 1.0), c(0.0, 1.0)], [c(1.0, 1.0), c(1.0, 1.0)]];
        let b = array![c(2.0, 0.0), c(0.0, 2.0), c(2.0, 2.0)];
        let (x, rep) = least_squares(a.view(), b.view());
        assert_eq!(rep.rank, Some(1));
        assert!((x[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((x[1] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_cmat(&mut rng, 6, 3);
        let b = Array1::from_elem(6, c(0.0, 0.0));
        let (x, _) = least_squares(a.view(), b.view());
        assert!(x.iter().all(|z| z.norm() == 0.0));
    }
}
