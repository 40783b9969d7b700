//! Small dense helpers over `ndarray`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use num_complex::Complex;

use crate::scalar::{abs2, Real};

pub fn norm2<T: Real>(v: ArrayView1<'_, T>) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

pub fn cnorm2<T: Real>(v: ArrayView1<'_, Complex<T>>) -> T {
    v.iter().map(|&z| abs2(z)).sum::<T>().sqrt()
}

pub fn frobenius<T: Real>(a: ArrayView2<'_, T>) -> T {
    a.iter().map(|&x| x * x).sum::<T>().sqrt()
}

pub fn cfrobenius<T: Real>(a: ArrayView2<'_, Complex<T>>) -> T {
    a.iter().map(|&z| abs2(z)).sum::<T>().sqrt()
}

pub fn inf_norm<T: Real>(v: ArrayView1<'_, T>) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Splits a complex matrix into its real and imaginary parts.
pub fn split<T: Real>(a: ArrayView2<'_, Complex<T>>) -> (Array2<T>, Array2<T>) {
    (a.mapv(|z| z.re), a.mapv(|z| z.im))
}

pub fn join<T: Real>(re: &Array2<T>, im: &Array2<T>) -> Array2<Complex<T>> {
    let mut out = Array2::from_elem(re.dim(), Complex::new(T::zero(), T::zero()));
    ndarray::Zip::from(&mut out)
        .and(re)
        .and(im)
        .for_each(|o, &r, &i| *o = Complex::new(r, i));
    out
}

/// `real · complex` using two real products.
pub fn real_times_complex<T: Real>(
    a: ArrayView2<'_, T>,
    b: ArrayView2<'_, Complex<T>>,
) -> Array2<Complex<T>> {
    let (re, im) = split(b);
    join(&a.dot(&re), &a.dot(&im))
}

/// `real · complex vector`.
pub fn real_times_cvec<T: Real>(
    a: ArrayView2<'_, T>,
    v: ArrayView1<'_, Complex<T>>,
) -> Array1<Complex<T>> {
    let re = a.dot(&v.mapv(|z| z.re));
    let im = a.dot(&v.mapv(|z| z.im));
    re.iter()
        .zip(im.iter())
        .map(|(&r, &i)| Complex::new(r, i))
        .collect()
}

/// `Aᴴ B` for complex matrices.
pub fn adjoint_times<T: Real>(
    a: ArrayView2<'_, Complex<T>>,
    b: ArrayView2<'_, Complex<T>>,
) -> Array2<Complex<T>> {
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let re = ar.t().dot(&br) + ai.t().dot(&bi);
    let im = ar.t().dot(&bi) - ai.t().dot(&br);
    join(&re, &im)
}

/// `Aᴴ v`.
pub fn adjoint_times_vec<T: Real>(
    a: ArrayView2<'_, Complex<T>>,
    v: ArrayView1<'_, Complex<T>>,
) -> Array1<Complex<T>> {
    a.t().dot(&v.mapv(|z| z.conj())).mapv(|z| z.conj())
}

pub fn cmat_vec<T: Real>(
    a: ArrayView2<'_, Complex<T>>,
    v: ArrayView1<'_, Complex<T>>,
) -> Array1<Complex<T>> {
    a.dot(&v)
}

/// Cholesky factor `L` with `L Lᵀ = S` for symmetric positive definite `S`.
///
/// Non-positive pivots are replaced by `floor`, so the result is always a
/// usable preconditioned factor. Returns the number of pivots that needed it.
pub fn cholesky_in_place<T: Real>(s: &mut Array2<T>, floor: T) -> usize {
    let n = s.nrows();
    let mut fixed = 0;
    for j in 0..n {
        let mut d = s[[j, j]];
        for k in 0..j {
            d -= s[[j, k]] * s[[j, k]];
        }
        if !(d > floor) {
            d = floor.max(T::min_positive_value());
            fixed += 1;
        }
        let d = d.sqrt();
        s[[j, j]] = d;
        for i in (j + 1)..n {
            let mut v = s[[i, j]];
            for k in 0..j {
                v -= s[[i, k]] * s[[j, k]];
            }
            s[[i, j]] = v / d;
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            s[[i, j]] = T::zero();
        }
    }
    fixed
}

/// Solves `L Lᵀ x = b` given the lower factor.
pub fn cholesky_solve<T: Real>(l: &Array2<T>, b: &Array1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        let mut v = y[i];
        for k in 0..i {
            v -= l[[i, k]] * y[k];
        }
        y[i] = v / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut v = y[i];
        for k in (i + 1)..n {
            v -= l[[k, i]] * y[k];
        }
        y[i] = v / l[[i, i]];
    }
    y
}

/// LU factorization with partial pivoting.
pub struct Lu<T> {
    lu: Array2<T>,
    perm: Vec<usize>,
    singular: bool,
}

impl<T: Real> Lu<T> {
    pub fn new(mut a: Array2<T>) -> Self {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU needs a square matrix");
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = T::min_positive_value();
        let mut singular = false;
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, a[[i, k]].abs()))
                .fold((k, T::neg_infinity()), |b, c| if c.1 > b.1 { c } else { b });
            if pv <= tiny {
                singular = true;
                a[[k, k]] = tiny;
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = a[[k, j]];
                    a[[k, j]] = a[[p, j]];
                    a[[p, j]] = t;
                }
            }
            let piv = a[[k, k]];
            for i in (k + 1)..n {
                let f = a[[i, k]] / piv;
                a[[i, k]] = f;
                if f != T::zero() {
                    for j in (k + 1)..n {
                        let akj = a[[k, j]];
                        a[[i, j]] -= f * akj;
                    }
                }
            }
        }
        Lu { lu: a, perm, singular }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn solve(&self, b: &Array1<T>) -> Array1<T> {
        let n = self.lu.nrows();
        let mut x: Array1<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut v = x[i];
            for k in 0..i {
                v -= self.lu[[i, k]] * x[k];
            }
            x[i] = v;
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in (i + 1)..n {
                v -= self.lu[[i, k]] * x[k];
            }
            x[i] = v / self.lu[[i, i]];
        }
        x
    }
}

/// Concatenates the column ranges of `a` listed in `blocks`, each `width` wide.
pub fn gather_blocks<T: Clone>(a: ArrayView2<'_, T>, blocks: &[usize], width: usize) -> Array2<T> {
    let views: Vec<_> = blocks
        .iter()
        .map(|&b| a.slice(s![.., b * width..(b + 1) * width]))
        .collect();
    ndarray::concatenate(Axis(1), &views).expect("blocks share row count")
}
