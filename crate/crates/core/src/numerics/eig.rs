//! Symmetric eigendecomposition by cyclic Jacobi rotations, plus the
//! Hermitian helpers built on it.

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex;

use super::dense::adjoint_times;
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    /// Sorted in descending order.
    pub values: Array1<T>,
    /// Column `i` is the unit eigenvector of `values[i]`.
    pub vectors: Array2<T>,
}

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposes `(S + Sᵀ)/2`.
pub fn eig_sym<T: Real>(s: ArrayView2<'_, T>) -> SymmetricEigen<T> {
    let n = s.nrows();
    assert_eq!(n, s.ncols(), "eig_sym needs a square matrix");
    let half = T::lit(0.5);
    let mut a = Array2::from_shape_fn((n, n), |(i, j)| half * (s[[i, j]] + s[[j, i]]));
    let mut v = Array2::<T>::eye(n);
    let scale = a.iter().map(|&x| x * x).sum::<T>().sqrt();

    if scale > T::zero() {
        for _ in 0..MAX_SWEEPS {
            let off: T = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[[i, j]] * a[[i, j]])
                .sum::<T>()
                .sqrt();
            if off <= scale * T::epsilon() * T::lit(0.5) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[[p, q]];
                    if apq.abs() <= T::min_positive_value() {
                        continue;
                    }
                    let app = a[[p, p]];
                    let aqq = a[[q, q]];
                    let theta = (aqq - app) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let sn = t * c;
                    for k in 0..n {
                        let akp = a[[k, p]];
                        let akq = a[[k, q]];
                        a[[k, p]] = c * akp - sn * akq;
                        a[[k, q]] = sn * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[[p, k]];
                        let aqk = a[[q, k]];
                        a[[p, k]] = c * apk - sn * aqk;
                        a[[q, k]] = sn * apk + c * aqk;
                    }
                    a[[p, q]] = T::zero();
                    a[[q, p]] = T::zero();
                    for k in 0..n {
                        let vkp = v[[k, p]];
                        let vkq = v[[k, q]];
                        v[[k, p]] = c * vkp - sn * vkq;
                        v[[k, q]] = sn * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].partial_cmp(&a[[i, i]]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[[i, i]]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    SymmetricEigen { values, vectors }
}

/// Eigenvalues of a Hermitian matrix, descending.
///
/// Uses the real embedding `[[X, −Y], [Y, X]]` of `H = X + jY`, whose spectrum
/// is that of `H` with every eigenvalue doubled.
pub fn hermitian_eigenvalues<T: Real>(h: ArrayView2<'_, Complex<T>>) -> Vec<T> {
    let n = h.nrows();
    let mut emb = Array2::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            let z = h[[i, j]];
            emb[[i, j]] = z.re;
            emb[[i + n, j + n]] = z.re;
            emb[[i, j + n]] = -z.im;
            emb[[i + n, j]] = z.im;
        }
    }
    let eig = eig_sym(emb.view());
    eig.values.iter().step_by(2).copied().collect()
}

/// Spectral norm `ρ(G) = √λ_max(Gᴴ G)`.
pub fn spectral_norm<T: Real>(g: ArrayView2<'_, Complex<T>>) -> T {
    if g.is_empty() {
        return T::zero();
    }
    // work with the smaller Gram matrix
    let gram = if g.nrows() < g.ncols() {
        let gh = g.t().mapv(|z| z.conj());
        adjoint_times(gh.view(), gh.view())
    } else {
        adjoint_times(g, g)
    };
    let top = hermitian_eigenvalues(gram.view())
        .first()
        .copied()
        .unwrap_or(T::zero());
    top.max(T::zero()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::dense::frobenius;
    use crate::numerics::{EIG_ORTHO_TOL, EIG_RESIDUAL_TOL};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_matrix_sorted_descending() {
        let s = array![[3.0f64, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]];
        let e = eig_sym(s.view());
        assert_eq!(e.values.to_vec(), vec![3.0, 2.0, 1.0]);
        assert!((e.vectors[[0, 0]].abs() - 1.0).abs() < 1e-15);
        assert!((e.vectors[[2, 1]].abs() - 1.0).abs() < 1e-15);
        assert!((e.vectors[[1, 2]].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let e = eig_sym(Array2::<f64>::eye(5).view());
        assert!(e.values.iter().all(|&l| (l - 1.0).abs() < 1e-15));
    }

    #[test]
    fn random_symmetric_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [1usize, 2, 7, 30] {
            let b = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0f64..1.0));
            let s = &b + &b.t();
            let e = eig_sym(s.view());
            let lam = Array2::from_diag(&e.values);
            let rec = e.vectors.dot(&lam).dot(&e.vectors.t());
            assert!(frobenius((&rec - &s).view()) < 1e-8);
            let vtv = e.vectors.t().dot(&e.vectors);
            assert!(frobenius((&vtv - &Array2::<f64>::eye(n)).view()) < EIG_ORTHO_TOL);
            let sn = frobenius(s.view());
            for i in 0..n {
                let v = e.vectors.column(i);
                let r = s.dot(&v) - &v * e.values[i];
                assert!(r.iter().map(|x| x * x).sum::<f64>().sqrt() <= EIG_RESIDUAL_TOL * sn.max(1.0));
            }
            for w in e.values.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    /// Power iteration on `Gᴴ G`, independent of the Jacobi route.
    fn power_spectral_norm(g: &Array2<Complex<f64>>) -> f64 {
        let gh = g.t().mapv(|z| z.conj());
        let m = gh.dot(g);
        let mut v = Array1::from_shape_fn(m.nrows(), |i| Complex::new(1.0 + i as f64 * 0.1, 0.3));
        let mut lam = 0.0;
        for _ in 0..5000 {
            let w = m.dot(&v);
            let n = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if n == 0.0 {
                return 0.0;
            }
            lam = n / v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v = w.mapv(|z| z / n);
        }
        lam.sqrt()
    }

    #[test]
    fn spectral_norm_matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (m, n) in [(5, 3), (3, 5), (4, 4), (1, 1)] {
            let g = Array2::from_shape_fn((m, n), |_| {
                Complex::new(rng.random_range(-1.0f64..1.0), rng.random_range(-1.0f64..1.0))
            });
            let a = spectral_norm(g.view());
            let b = power_spectral_norm(&g);
            assert!((a - b).abs() < 1e-8 * b.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn hermitian_eigenvalues_of_pauli_y() {
        let h = array![
            [Complex::new(0.0f64, 0.0), Complex::new(0.0, -1.0)],
            [Complex::new(0.0, 1.0), Complex::new(0.0, 0.0)]
        ];
        let ev = hermitian_eigenvalues(h.view());
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] + 1.0).abs() < 1e-14);
    }
}
