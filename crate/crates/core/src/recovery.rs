//! Greedy block-sparse recovery (BMP, BOMP) and block-coherence diagnostics.

use ndarray::{Array1, ArrayView1, ArrayView2};
use num_complex::Complex;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::measurement::SensingMatrix;
use crate::numerics::dense::{adjoint_times, adjoint_times_vec, cnorm2, gather_blocks};
use crate::numerics::{least_squares, spectral_norm};
use crate::scalar::Real;
use crate::scene::BlockSparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Algorithm {
    Bmp,
    Bomp,
}

/// When to stop iterating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule<T> {
    /// Exactly this many iterations.
    Iterations(usize),
    /// Stop once the residual norm drops below `tol`, or after `max_iter`.
    Residual { tol: T, max_iter: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoverySolution<T> {
    /// Selection order; BMP may list a block more than once.
    pub selected_blocks: Vec<usize>,
    /// One coefficient block per entry of `selected_blocks`, in the
    /// un-normalized scale of the dictionary.
    pub coefficients: Vec<Array1<Complex<T>>>,
    /// Residual norm after each iteration.
    pub residual_norms: Vec<T>,
    pub iterations: usize,
    /// Set when a least-squares solve was rank deficient.
    pub rank_deficient: bool,
}

impl<T: Real> RecoverySolution<T> {
    /// Distinct selected blocks, ascending.
    pub fn support(&self) -> Vec<usize> {
        let mut s = self.selected_blocks.clone();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn final_residual(&self) -> T {
        self.residual_norms.last().copied().unwrap_or(T::zero())
    }

    /// Dense estimate; later selections of a block overwrite earlier ones.
    pub fn to_vector(&self, blocks: usize, block_len: usize) -> BlockSparseVector<T> {
        let mut v = BlockSparseVector::zeros(blocks, block_len);
        for (&b, c) in self.selected_blocks.iter().zip(&self.coefficients) {
            v.values
                .slice_mut(ndarray::s![b * block_len..(b + 1) * block_len])
                .assign(c);
        }
        v
    }
}

/// `θ[0..L]` as column views.
pub fn block_partition<T: Real>(theta: &SensingMatrix<T>) -> Vec<ArrayView2<'_, Complex<T>>> {
    (0..theta.blocks()).map(|l| theta.block(l)).collect()
}

fn block_scores<T: Real>(theta: &SensingMatrix<T>, residual: ArrayView1<'_, Complex<T>>) -> Vec<T> {
    let corr = adjoint_times_vec(theta.matrix.view(), residual);
    let d = theta.block_len;
    (0..theta.blocks())
        .map(|l| {
            corr.slice(ndarray::s![l * d..(l + 1) * d])
                .iter()
                .map(|z| z.norm_sqr())
                .sum()
        })
        .collect()
}

fn argmax_excluding<T: Real>(scores: &[T], excluded: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (l, &s) in scores.iter().enumerate() {
        if excluded.contains(&l) {
            continue;
        }
        // strict comparison keeps the smallest index on ties
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((l, s));
        }
    }
    best.map(|(l, _)| l)
}

/// Block whose columns best match `residual`: `argmax_l ‖θ[l]ᴴ r‖₂`, ties to
/// the smallest index.
pub fn select_block<T: Real>(
    theta: &SensingMatrix<T>,
    residual: ArrayView1<'_, Complex<T>>,
) -> Result<usize> {
    check_rows(theta, residual.len())?;
    Ok(argmax_excluding(&block_scores(theta, residual), &[]).expect("at least one block"))
}

fn check_rows<T: Real>(theta: &SensingMatrix<T>, len: usize) -> Result<()> {
    if len != theta.rows() {
        return Err(Error::Dimension {
            context: "measurement vector",
            expected: theta.rows(),
            got: len,
        });
    }
    Ok(())
}

fn denormalize<T: Real>(theta: &SensingMatrix<T>, block: usize, c: Array1<Complex<T>>) -> Array1<Complex<T>> {
    if !theta.normalized {
        return c;
    }
    let d = theta.block_len;
    Array1::from_iter(
        c.iter()
            .enumerate()
            .map(|(k, &v)| v / theta.column_norms[block * d + k]),
    )
}

fn limits<T: Real>(stop: StopRule<T>) -> Result<(usize, Option<T>)> {
    let (n, tol) = match stop {
        StopRule::Iterations(k) => (k, None),
        StopRule::Residual { tol, max_iter } => (max_iter, Some(tol)),
    };
    if n == 0 {
        return Err(invalid("iterations", "need at least one"));
    }
    Ok((n, tol))
}

/// Block matching pursuit with exactly `k` iterations.
pub fn bmp<T: Real>(theta: &SensingMatrix<T>, y: ArrayView1<'_, Complex<T>>, k: usize) -> Result<RecoverySolution<T>> {
    bmp_with(theta, y, StopRule::Iterations(k))
}

/// Block matching pursuit.
///
/// Each iteration picks the best-matched block, fits its coefficients to `y`
/// by least squares and deflates the residual as `r ← r − θ[l]θ[l]ᴴ r`. The
/// deflation equals the least-squares residual only when the block's
/// columns are orthonormal. A block may be picked again.
pub fn bmp_with<T: Real>(
    theta: &SensingMatrix<T>,
    y: ArrayView1<'_, Complex<T>>,
    stop: StopRule<T>,
) -> Result<RecoverySolution<T>> {
    check_rows(theta, y.len())?;
    let (max_iter, tol) = limits(stop)?;
    let mut r = y.to_owned();
    let mut sol = RecoverySolution {
        selected_blocks: Vec::new(),
        coefficients: Vec::new(),
        residual_norms: Vec::new(),
        iterations: 0,
        rank_deficient: false,
    };
    for _ in 0..max_iter {
        let l = argmax_excluding(&block_scores(theta, r.view()), &[]).expect("at least one block");
        let blk = theta.block(l);
        let (c, rep) = least_squares(blk, y);
        sol.rank_deficient |= rep.rank.is_some_and(|rk| rk < theta.block_len);
        let proj = adjoint_times_vec(blk, r.view());
        r = r - blk.dot(&proj);
        sol.selected_blocks.push(l);
        sol.coefficients.push(denormalize(theta, l, c));
        sol.residual_norms.push(cnorm2(r.view()));
        sol.iterations += 1;
        if tol.is_some_and(|t| cnorm2(r.view()) < t) {
            break;
        }
    }
    Ok(sol)
}

/// Block orthogonal matching pursuit with exactly `k` iterations.
pub fn bomp<T: Real>(theta: &SensingMatrix<T>, y: ArrayView1<'_, Complex<T>>, k: usize) -> Result<RecoverySolution<T>> {
    bomp_with(theta, y, StopRule::Iterations(k))
}

/// Block orthogonal matching pursuit.
///
/// After each selection all chosen blocks are refit jointly and the residual
/// is `y` minus that fit, so it stays orthogonal to every chosen column.
/// Chosen blocks are never selected again; rank-deficient joint systems get
/// the minimum-norm solution and set `rank_deficient`.
pub fn bomp_with<T: Real>(
    theta: &SensingMatrix<T>,
    y: ArrayView1<'_, Complex<T>>,
    stop: StopRule<T>,
) -> Result<RecoverySolution<T>> {
    check_rows(theta, y.len())?;
    let (max_iter, tol) = limits(stop)?;
    if max_iter > theta.blocks() {
        return Err(invalid(
            "iterations",
            format!("{max_iter} exceeds the {} available blocks", theta.blocks()),
        ));
    }
    let d = theta.block_len;
    let mut r = y.to_owned();
    let mut chosen: Vec<usize> = Vec::with_capacity(max_iter);
    let mut coeffs = Array1::zeros(0);
    let mut residual_norms = Vec::with_capacity(max_iter);
    let mut rank_deficient = false;
    for _ in 0..max_iter {
        let l = argmax_excluding(&block_scores(theta, r.view()), &chosen).expect("unselected block left");
        chosen.push(l);
        let sub = gather_blocks(theta.matrix.view(), &chosen, d);
        let (c, rep) = least_squares(sub.view(), y);
        rank_deficient |= rep.rank.is_some_and(|rk| rk < sub.ncols());
        r = &y - &sub.dot(&c);
        coeffs = c;
        residual_norms.push(cnorm2(r.view()));
        if tol.is_some_and(|t| cnorm2(r.view()) < t) {
            break;
        }
    }
    let coefficients = chosen
        .iter()
        .enumerate()
        .map(|(j, &l)| denormalize(theta, l, coeffs.slice(ndarray::s![j * d..(j + 1) * d]).to_owned()))
        .collect();
    Ok(RecoverySolution {
        iterations: chosen.len(),
        selected_blocks: chosen,
        coefficients,
        residual_norms,
        rank_deficient,
    })
}

pub fn recover<T: Real>(
    algorithm: Algorithm,
    theta: &SensingMatrix<T>,
    y: ArrayView1<'_, Complex<T>>,
    k: usize,
) -> Result<RecoverySolution<T>> {
    match algorithm {
        Algorithm::Bmp => bmp(theta, y, k),
        Algorithm::Bomp => bomp(theta, y, k),
    }
}

/// Spectral norm of every block.
pub fn block_spectral_norms<T: Real>(theta: &SensingMatrix<T>) -> Vec<T> {
    block_partition(theta).into_iter().map(spectral_norm).collect()
}

/// `E_b`: the largest block spectral norm.
pub fn common_block_norm<T: Real>(theta: &SensingMatrix<T>) -> T {
    let norms = block_spectral_norms(theta);
    let max = norms.iter().copied().fold(T::zero(), T::max);
    let min = norms.iter().copied().fold(T::infinity(), T::min);
    log::debug!("block spectral norms span [{min}, {max}]");
    max
}

/// `ρ(θ[l]ᴴ θ[r]) / e_b`.
pub fn block_coherence_with<T: Real>(theta: &SensingMatrix<T>, l: usize, r: usize, e_b: T) -> T {
    spectral_norm(adjoint_times(theta.block(l), theta.block(r)).view()) / e_b
}

/// Block coherence with `E_b` taken as the largest block spectral norm.
pub fn block_coherence<T: Real>(theta: &SensingMatrix<T>, l: usize, r: usize) -> T {
    block_coherence_with(theta, l, r, common_block_norm(theta))
}

/// `Σ_{l≠r} μ(l, r)`.
pub fn coherence_sum<T: Real>(theta: &SensingMatrix<T>) -> T {
    let e_b = common_block_norm(theta);
    let n = theta.blocks();
    let mut total = T::zero();
    for l in 0..n {
        for r in (l + 1)..n {
            // ρ(Aᴴ B) = ρ(Bᴴ A)
            total += T::lit(2.0) * block_coherence_with(theta, l, r, e_b);
        }
    }
    total
}

/// Sum of absolute entries of `θ[l]ᴴ θ[l]`.
pub fn gram_abs_sum<T: Real>(block: ArrayView2<'_, Complex<T>>) -> T {
    adjoint_times(block, block).iter().map(|z| z.norm()).sum()
}

/// `(1/E_b)·Σ_l ‖θ[l]ᴴ θ[l]‖₁`: upper bound surrogate for the summed block
/// coherence of a column-normalized sensing matrix.
pub fn bound_cost<T: Real>(theta: &SensingMatrix<T>) -> T {
    let total: T = block_partition(theta).into_iter().map(gram_abs_sum).sum();
    total / common_block_norm(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::eig_sym;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type C64 = Complex<f64>;

    fn random_theta(rng: &mut ChaCha8Rng, m: usize, blocks: usize, d: usize) -> SensingMatrix<f64> {
        let mat = Array2::from_shape_simple_fn((m, blocks * d), || {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        SensingMatrix::from_matrix(mat, d).unwrap().normalize().unwrap()
    }

    /// Columns of a unitary matrix from Gram-Schmidt on random vectors.
    fn orthonormal_columns(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Array2<C64> {
        let mut q = Array2::<C64>::zeros((m, n));
        for j in 0..n {
            let mut v = Array1::from_shape_simple_fn(m, || C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            for _ in 0..2 {
                for k in 0..j {
                    let qk = q.column(k);
                    let dot: C64 = qk.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                    v = &v - &qk.mapv(|z| z * dot);
                }
            }
            let n2 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            q.column_mut(j).assign(&v.mapv(|z| z / n2));
        }
        q
    }

    fn orthogonal_instance(seed: u64, blocks: usize, d: usize, support: &[usize]) -> (SensingMatrix<f64>, Array1<C64>, Vec<Array1<C64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = blocks * d + 3;
        let theta = SensingMatrix::from_matrix(orthonormal_columns(&mut rng, m, blocks * d), d).unwrap();
        let mut y = Array1::zeros(m);
        let mut truth = Vec::new();
        for &l in support {
            let u = Array1::from_shape_simple_fn(d, || C64::new(rng.random::<f64>() + 0.5, rng.random::<f64>() - 0.5));
            y = y + theta.block(l).dot(&u);
            truth.push(u);
        }
        (theta, y, truth)
    }

    #[test]
    fn partition_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let theta = random_theta(&mut rng, 96, 144, 4);
        let parts = block_partition(&theta);
        assert_eq!(parts.len(), 144);
        assert!(parts.iter().all(|b| b.dim() == (96, 4)));
        let joined = ndarray::concatenate(ndarray::Axis(1), &parts).unwrap();
        assert_eq!(joined, theta.matrix);
        let one = SensingMatrix::from_matrix(theta.matrix.clone(), 576).unwrap();
        assert_eq!(block_partition(&one).len(), 1);
        assert!(SensingMatrix::from_matrix(theta.matrix.clone(), 7).is_err());
    }

    #[test]
    fn select_on_orthogonal_blocks() {
        let (theta, y, _) = orthogonal_instance(1, 6, 3, &[4]);
        assert_eq!(select_block(&theta, y.view()).unwrap(), 4);
        let zero = Array1::<C64>::zeros(theta.rows());
        assert_eq!(select_block(&theta, zero.view()).unwrap(), 0);
    }

    #[test]
    fn select_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let theta = random_theta(&mut rng, 12, 9, 2);
            let r = Array1::from_shape_simple_fn(12, || C64::new(rng.random(), rng.random()));
            let mut best = (0, -1.0);
            for l in 0..9 {
                let blk = theta.block(l);
                let s: f64 = (0..2)
                    .map(|k| blk.column(k).iter().zip(r.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr())
                    .sum();
                if s > best.1 {
                    best = (l, s);
                }
            }
            assert_eq!(select_block(&theta, r.view()).unwrap(), best.0);
        }
    }

    #[test]
    fn single_block_exact_recovery() {
        let (theta, y, truth) = orthogonal_instance(3, 5, 2, &[2]);
        for sol in [bmp(&theta, y.view(), 1).unwrap(), bomp(&theta, y.view(), 1).unwrap()] {
            assert_eq!(sol.selected_blocks, vec![2]);
            assert!(sol.final_residual() < 1e-10);
            for (a, b) in sol.coefficients[0].iter().zip(truth[0].iter()) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn two_orthogonal_blocks_recovered() {
        let (theta, y, _) = orthogonal_instance(4, 8, 3, &[1, 6]);
        for sol in [bmp(&theta, y.view(), 2).unwrap(), bomp(&theta, y.view(), 2).unwrap()] {
            assert_eq!(sol.support(), vec![1, 6]);
            assert_eq!(sol.iterations, 2);
            assert!(sol.final_residual() < 1e-10);
        }
    }

    #[test]
    fn zero_measurement_gives_zero_coefficients() {
        let (theta, _, _) = orthogonal_instance(5, 4, 2, &[]);
        let y = Array1::<C64>::zeros(theta.rows());
        let sol = bmp(&theta, y.view(), 3).unwrap();
        assert!(sol.coefficients.iter().flatten().all(|z| z.norm() == 0.0));
        assert!(sol.residual_norms.iter().all(|&r| r == 0.0));
        assert_eq!(sol.selected_blocks, vec![0, 0, 0]);
    }

    #[test]
    fn bomp_matches_support_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let theta = random_theta(&mut rng, 40, 10, 2);
        let u1 = Array1::from(vec![C64::new(1.0, 0.5), C64::new(-0.8, 0.2)]);
        let u2 = Array1::from(vec![C64::new(0.3, -1.1), C64::new(0.9, 0.9)]);
        let y = theta.block(3).dot(&u1) + theta.block(7).dot(&u2);
        let sol = bomp(&theta, y.view(), 2).unwrap();
        assert_eq!(sol.support(), vec![3, 7]);
        // oracle: normal equations on the true support, solved by Gauss-Jordan
        let sub = gather_blocks(theta.matrix.view(), &sol.selected_blocks, 2);
        let g = adjoint_times(sub.view(), sub.view());
        let rhs = adjoint_times_vec(sub.view(), y.view());
        let x = gauss_jordan(g, rhs);
        let got: Vec<C64> = sol.coefficients.iter().flatten().copied().collect();
        // coefficients are reported in the un-normalized scale
        let norms: Vec<f64> = sol
            .selected_blocks
            .iter()
            .flat_map(|&l| (0..2).map(move |k| l * 2 + k))
            .map(|j| theta.column_norms[j])
            .collect();
        for k in 0..4 {
            assert!((got[k] - x[k] / norms[k]).norm() < 1e-8);
        }
    }

    fn gauss_jordan(mut a: Array2<C64>, mut b: Array1<C64>) -> Array1<C64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[[i, c]].norm().total_cmp(&a[[j, c]].norm())).unwrap();
            for k in 0..n {
                a.swap([c, k], [p, k]);
            }
            b.swap(c, p);
            let piv = a[[c, c]];
            for r in 0..n {
                if r != c {
                    let f = a[[r, c]] / piv;
                    for k in 0..n {
                        let v = a[[c, k]];
                        a[[r, k]] -= f * v;
                    }
                    let v = b[c];
                    b[r] -= f * v;
                }
            }
        }
        Array1::from_iter((0..n).map(|i| b[i] / a[[i, i]]))
    }

    /// Random blocks, each with orthonormal columns.
    fn blockwise_orthonormal(rng: &mut ChaCha8Rng, m: usize, blocks: usize, d: usize) -> SensingMatrix<f64> {
        let views: Vec<Array2<C64>> = (0..blocks).map(|_| orthonormal_columns(rng, m, d)).collect();
        let v: Vec<_> = views.iter().map(|b| b.view()).collect();
        SensingMatrix::from_matrix(ndarray::concatenate(ndarray::Axis(1), &v).unwrap(), d).unwrap()
    }

    #[test]
    fn bomp_residual_beats_bmp() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worse = 0;
        for _ in 0..200 {
            let theta = blockwise_orthonormal(&mut rng, 16, 8, 2);
            let y = Array1::from_shape_simple_fn(16, || C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let k = rng.random_range(1..=4);
            let a = bomp(&theta, y.view(), k).unwrap();
            let b = bmp(&theta, y.view(), k).unwrap();
            if a.final_residual() > b.final_residual() + 1e-12 {
                worse += 1;
            }
        }
        assert_eq!(worse, 0);
    }

    #[test]
    fn bomp_residual_orthogonal_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..40 {
            let theta = random_theta(&mut rng, 20, 10, 3);
            let y = Array1::from_shape_simple_fn(20, || C64::new(rng.random::<f64>(), rng.random::<f64>() - 0.5));
            let sol = bomp(&theta, y.view(), 4).unwrap();
            assert!(sol.residual_norms.windows(2).all(|w| w[1] <= w[0] + 1e-12));
            let mut chosen = sol.selected_blocks.clone();
            chosen.sort_unstable();
            chosen.dedup();
            assert_eq!(chosen.len(), 4);
            let sub = gather_blocks(theta.matrix.view(), &sol.selected_blocks, 3);
            let est = sol.to_vector(10, 3);
            let fit = theta.matrix.dot(&est.values.iter().enumerate().map(|(j, &c)| c * theta.column_norms[j]).collect::<Array1<_>>());
            let r = &y - &fit;
            let corr = adjoint_times_vec(sub.view(), r.view());
            assert!(cnorm2(corr.view()) <= 1e-8 * cnorm2(y.view()));
        }
    }

    #[test]
    fn residual_stop_rule() {
        let (theta, y, _) = orthogonal_instance(9, 6, 2, &[3]);
        let sol = bomp_with(&theta, y.view(), StopRule::Residual { tol: 1e-9, max_iter: 5 }).unwrap();
        assert_eq!(sol.iterations, 1);
        let sol = bmp_with(&theta, y.view(), StopRule::Residual { tol: 1e-9, max_iter: 5 }).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(bmp(&theta, y.view(), 0).is_err());
        assert!(bomp(&theta, y.view(), 7).is_err());
    }

    #[test]
    fn coherence_examples() {
        let (theta, _, _) = orthogonal_instance(10, 5, 2, &[]);
        assert!(block_coherence(&theta, 0, 3) < 1e-12);
        // blocks with orthonormal columns: Gram is the identity
        assert!((bound_cost(&theta) - 10.0).abs() < 1e-9);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let base = random_theta(&mut rng, 10, 1, 3);
        let dup = ndarray::concatenate(ndarray::Axis(1), &[base.matrix.view(), base.matrix.view()]).unwrap();
        let theta = SensingMatrix::from_matrix(dup, 3).unwrap();
        let e_b = spectral_norm(theta.block(0));
        assert!((block_coherence(&theta, 0, 1) - e_b).abs() < 1e-9 * e_b);

        let single = random_theta(&mut rng, 6, 1, 2);
        assert_eq!(coherence_sum(&single), 0.0);
        assert!(bound_cost(&single) > 0.0);
    }

    #[test]
    fn coherence_matches_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let theta = random_theta(&mut rng, 9, 4, 3);
            let (l, r) = (rng.random_range(0..4), rng.random_range(0..4));
            let g = adjoint_times(theta.block(l), theta.block(r));
            let gg = adjoint_times(g.view(), g.view());
            // real symmetric embedding of the Hermitian d×d product
            let d = gg.nrows();
            let mut emb = Array2::<f64>::zeros((2 * d, 2 * d));
            for i in 0..d {
                for j in 0..d {
                    emb[[i, j]] = gg[[i, j]].re;
                    emb[[i + d, j + d]] = gg[[i, j]].re;
                    emb[[i, j + d]] = -gg[[i, j]].im;
                    emb[[i + d, j]] = gg[[i, j]].im;
                }
            }
            let lam = eig_sym(emb.view()).values[0];
            let e_b = common_block_norm(&theta);
            assert!((block_coherence(&theta, l, r) - lam.sqrt() / e_b).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gram_bounds_hold(seed in any::<u64>(), d in 1usize..4, m in 2usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let theta = random_theta(&mut rng, m, 3, d);
            let g = adjoint_times(theta.block(0), theta.block(1));
            let gg = adjoint_times(g.view(), g.view());
            let lam = spectral_norm(g.view()).powi(2);
            let abs_sum: f64 = gg.iter().map(|z| z.norm()).sum();
            prop_assert!(lam <= abs_sum * (1.0 + 1e-9));
            let lhs = spectral_norm(g.view());
            let rhs = spectral_norm(theta.block(0)) * spectral_norm(theta.block(1));
            prop_assert!(lhs <= rhs * (1.0 + 1e-9));
        }

        #[test]
        fn selection_is_index_stable(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let theta = random_theta(&mut rng, 8, 5, 2);
            let r = Array1::from_shape_simple_fn(8, || C64::new(rng.random(), rng.random()));
            let scores = block_scores(&theta, r.view());
            let pick = select_block(&theta, r.view()).unwrap();
            prop_assert!(scores.iter().all(|&s| s <= scores[pick]));
            prop_assert!(scores[..pick].iter().all(|&s| s < scores[pick]));
        }
    }
}
