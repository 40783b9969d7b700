//! Measurement matrices (random Gaussian or designed), compression of the
//! received stack and the sensing matrix `θ = φΨ`.
//!
//! Design minimizes the sum over blocks of the off-diagonal absolute Gram
//! entries `Σ_l Σ_{k≠k'} |Ψ_kᴴ[l] F Ψ_k'[l]|`, linearized for entrywise
//! nonnegative `F = φᵀφ`, subject to unit diagonal `Ψ_iᴴ F Ψ_i = 1` for every
//! dictionary column. `φ` is then read off the dominant eigenpairs of `F`.

use ndarray::{s, Array1, Array2, ArrayView1};
use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dictionary::BlockDictionary;
use crate::error::{invalid, Error, Result};
use crate::numerics::dense::{cnorm2, real_times_complex, real_times_cvec};
use crate::numerics::{eig_sym, solve_lp, LpOptions, SolverReport};
use crate::scalar::Real;

/// Tolerance on `real(Ψ_iᴴ F Ψ_i) = 1` accepted from the design LP.
pub const DESIGN_CONSTRAINT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasurementKind {
    Gaussian {
        seed: Option<u64>,
    },
    Designed {
        /// Eigenvalues of `F` used for the rows (before clipping).
        eigenvalues: Vec<f64>,
        /// Sum of negative eigenvalues clipped to zero among the kept ones.
        clipped_mass: f64,
        /// Rows that had no positive eigenvalue left and were zero-filled.
        zero_rows: usize,
    },
    Other,
}

/// Real `M × N` measurement matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix<T> {
    pub matrix: Array2<T>,
    pub kind: MeasurementKind,
}

impl<T: Real> MeasurementMatrix<T> {
    pub fn new(matrix: Array2<T>, kind: MeasurementKind) -> Result<Self> {
        let (m, n) = matrix.dim();
        if m == 0 || m > n {
            return Err(invalid("measurement matrix", format!("need 1 <= M <= N, got {m} x {n}")));
        }
        Ok(MeasurementMatrix { matrix, kind })
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// `F = φᵀφ`.
    pub fn gram(&self) -> Array2<T> {
        self.matrix.t().dot(&self.matrix)
    }
}

/// I.i.d. standard normal entries.
pub fn sample_gaussian_phi<T: Real, R: Rng + ?Sized>(
    m: usize,
    cols: usize,
    rng: &mut R,
) -> Result<MeasurementMatrix<T>> {
    if m == 0 || m > cols {
        return Err(invalid("measurement count", format!("M = {m} not in [1, {cols}]")));
    }
    let matrix = Array2::from_shape_simple_fn((m, cols), || {
        let v: f64 = StandardNormal.sample(rng);
        T::lit(v)
    });
    MeasurementMatrix::new(matrix, MeasurementKind::Gaussian { seed: None })
}

/// `y = φ z`.
pub fn compress<T: Real>(
    phi: &MeasurementMatrix<T>,
    z: ArrayView1<'_, Complex<T>>,
) -> Result<Array1<Complex<T>>> {
    if z.len() != phi.cols() {
        return Err(Error::Dimension {
            context: "compress",
            expected: phi.cols(),
            got: z.len(),
        });
    }
    Ok(real_times_cvec(phi.matrix.view(), z))
}

/// `θ = φΨ`, optionally with unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix<T> {
    pub matrix: Array2<Complex<T>>,
    pub block_len: usize,
    /// Column norms of `φΨ` before normalization.
    pub column_norms: Vec<T>,
    pub normalized: bool,
}

impl<T: Real> SensingMatrix<T> {
    /// Wraps an arbitrary complex matrix (columns taken as-is).
    pub fn from_matrix(matrix: Array2<Complex<T>>, block_len: usize) -> Result<Self> {
        if block_len == 0 || !matrix.ncols().is_multiple_of(block_len) {
            return Err(invalid(
                "block length",
                format!("{} columns not divisible by {block_len}", matrix.ncols()),
            ));
        }
        let column_norms = matrix.columns().into_iter().map(cnorm2).collect();
        Ok(SensingMatrix {
            matrix,
            block_len,
            column_norms,
            normalized: false,
        })
    }

    /// Scales columns to unit norm, remembering the original norms.
    pub fn normalize(mut self) -> Result<Self> {
        if self.normalized {
            return Ok(self);
        }
        for (j, mut col) in self.matrix.columns_mut().into_iter().enumerate() {
            let n = self.column_norms[j];
            if !(n > T::zero()) {
                return Err(Error::DegenerateColumn {
                    column: j,
                    norm: n.as_f64(),
                });
            }
            col.mapv_inplace(|z| z / n);
        }
        self.normalized = true;
        Ok(self)
    }

    pub fn blocks(&self) -> usize {
        self.matrix.ncols() / self.block_len
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn block(&self, l: usize) -> ndarray::ArrayView2<'_, Complex<T>> {
        self.matrix
            .slice(s![.., l * self.block_len..(l + 1) * self.block_len])
    }
}

pub fn sensing_matrix<T: Real>(
    phi: &MeasurementMatrix<T>,
    dict: &BlockDictionary<T>,
    normalize: bool,
) -> Result<SensingMatrix<T>> {
    if dict.rows() != phi.cols() {
        return Err(Error::Dimension {
            context: "sensing matrix",
            expected: phi.cols(),
            got: dict.rows(),
        });
    }
    let theta = SensingMatrix::from_matrix(
        real_times_complex(phi.matrix.view(), dict.matrix.view()),
        dict.block_len,
    )?;
    if normalize {
        theta.normalize()
    } else {
        Ok(theta)
    }
}

/// Linear program for `F` over its upper triangle.
///
/// Variable `k = packed_index(a, b)` (`a ≤ b`) stands for `F_ab = F_ba`, so
/// symmetry holds by construction. Row `k` of `a` holds that variable's
/// coefficient in each column constraint `real(Ψ_iᴴ F Ψ_i) = 1`; `g[k]` is its
/// cost.
#[derive(Debug, Clone)]
pub struct DesignProblem<T> {
    /// `n(n+1)/2 × L·d`: one column per dictionary column.
    pub a: Array2<T>,
    pub g: Array1<T>,
    pub n_rows: usize,
}

pub fn packed_index(n: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    a * n - a * (a + 1) / 2 + b
}

pub fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn unpack<T: Real>(n: usize, x: &Array1<T>) -> Array2<T> {
    let mut f = Array2::zeros((n, n));
    for a in 0..n {
        for b in a..n {
            let v = x[packed_index(n, a, b)];
            f[[a, b]] = v;
            f[[b, a]] = v;
        }
    }
    f
}

fn pack<T: Real>(f: &Array2<T>) -> Array1<T> {
    let n = f.nrows();
    let mut x = Array1::zeros(packed_len(n));
    for a in 0..n {
        for b in a..n {
            x[packed_index(n, a, b)] = f[[a, b]];
        }
    }
    x
}

impl<T: Real> DesignProblem<T> {
    /// `g · vec(F)` for a symmetric `F`.
    pub fn objective(&self, f: &Array2<T>) -> T {
        self.g.dot(&pack(f))
    }

    /// `real(Ψ_iᴴ F Ψ_i)` for every column `i`.
    pub fn constraint_values(&self, f: &Array2<T>) -> Array1<T> {
        self.a.t().dot(&pack(f))
    }

    pub fn variables(&self) -> usize {
        self.a.nrows()
    }

    pub fn constraints(&self) -> usize {
        self.a.ncols()
    }
}

/// Assembles constraint and cost data from a unit-power dictionary.
pub fn build_design_problem<T: Real>(dict_unit: &BlockDictionary<T>) -> DesignProblem<T> {
    let n = dict_unit.rows();
    let cols = dict_unit.matrix.ncols();
    let d = dict_unit.block_len;
    let two = T::lit(2.0);
    let mut a = Array2::zeros((packed_len(n), cols));
    for c in 0..cols {
        let psi = dict_unit.matrix.column(c);
        let nz: Vec<usize> = (0..n).filter(|&r| psi[r] != Complex::new(T::zero(), T::zero())).collect();
        for (ia, &ra) in nz.iter().enumerate() {
            for &rb in &nz[ia..] {
                let v = (psi[ra].conj() * psi[rb]).re;
                a[[packed_index(n, ra, rb), c]] = if ra == rb { v } else { two * v };
            }
        }
    }

    // Σ_l Σ_{k≠k'} |ψ_k|_b |ψ_k'|_a = Σ_l (s sᵀ − B Bᵀ)_{ab}, B = |Ψ[l]|, s = B·1
    let mut g_full = Array2::<T>::zeros((n, n));
    for l in 0..dict_unit.blocks {
        let b = dict_unit.block(l).mapv(|z| z.norm());
        let srow = b.sum_axis(ndarray::Axis(1));
        let outer = srow
            .view()
            .insert_axis(ndarray::Axis(1))
            .dot(&srow.view().insert_axis(ndarray::Axis(0)));
        g_full = g_full + outer - b.dot(&b.t());
    }
    let mut g = Array1::zeros(packed_len(n));
    for ra in 0..n {
        for rb in ra..n {
            let v = g_full[[ra, rb]].max(T::zero());
            g[packed_index(n, ra, rb)] = if ra == rb { v } else { v + g_full[[rb, ra]].max(T::zero()) };
        }
    }
    let _ = d;
    DesignProblem { a, g, n_rows: n }
}

#[derive(Debug, Clone)]
pub struct DesignedF<T> {
    pub f: Array2<T>,
    pub objective: T,
    /// Largest `|real(Ψ_iᴴ F Ψ_i) − 1|`.
    pub max_violation: T,
    pub report: SolverReport,
}

/// Solves the design LP: minimize `g·vec(F)` subject to the unit-diagonal
/// constraints and `F ≥ 0` entrywise.
pub fn design_f<T: Real>(problem: &DesignProblem<T>) -> Result<DesignedF<T>> {
    let aeq = problem.a.t().to_owned();
    let beq = Array1::from_elem(problem.constraints(), T::one());
    let sol = solve_lp(problem.g.view(), aeq.view(), beq.view(), &LpOptions::default())?;
    let f = unpack(problem.n_rows, &sol.x);
    let vals = problem.constraint_values(&f);
    let max_violation = vals.iter().fold(T::zero(), |m, &v| m.max((v - T::one()).abs()));
    if max_violation > T::lit(DESIGN_CONSTRAINT_TOL) {
        return Err(Error::Infeasible {
            max_violation: max_violation.as_f64(),
        });
    }
    Ok(DesignedF {
        objective: problem.objective(&f),
        f,
        max_violation,
        report: sol.report,
    })
}

/// `φ = Λ_M^{1/2} V_Mᵀ` from the `M` largest eigenpairs of `(F + Fᵀ)/2`,
/// negative eigenvalues clipped to zero.
pub fn extract_phi<T: Real>(f: &Array2<T>, m: usize) -> Result<MeasurementMatrix<T>> {
    let n = f.nrows();
    if m == 0 || m > n {
        return Err(invalid("measurement count", format!("M = {m} not in [1, {n}]")));
    }
    let eig = eig_sym(f.view());
    let mut phi = Array2::zeros((m, n));
    let mut clipped = 0.0;
    let mut zero_rows = 0;
    for r in 0..m {
        let lam = eig.values[r];
        if lam > T::zero() {
            let s = lam.sqrt();
            phi.row_mut(r).assign(&eig.vectors.column(r).mapv(|v| v * s));
        } else {
            clipped += lam.as_f64();
            zero_rows += 1;
        }
    }
    if zero_rows > 0 {
        log::warn!("design: only {} of {m} requested eigenvalues are positive; {zero_rows} rows zero-filled", m - zero_rows);
    }
    MeasurementMatrix::new(
        phi,
        MeasurementKind::Designed {
            eigenvalues: eig.values.iter().take(m).map(|v| v.as_f64()).collect(),
            clipped_mass: -clipped,
            zero_rows,
        },
    )
}
