//! Transmit-energy allocation by minimizing the block-coherence upper bound.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dictionary::BlockDictionary;
use crate::error::{invalid, Error, Result};
use crate::measurement::MeasurementMatrix;
use crate::numerics::dense::{adjoint_times, real_times_complex};
use crate::numerics::{eig_sym, solve_qp, QpOptions, QpProblem};
use crate::scalar::Real;

/// Transmit amplitudes `p_i` with `Σ p_i² = Pt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation<T> {
    amplitudes: Vec<T>,
    total_energy: T,
}

impl<T: Real> PowerAllocation<T> {
    /// Equal amplitudes `√(Pt/Mt)`.
    pub fn uniform(mt: usize, total_energy: T) -> Self {
        let a = (total_energy / T::from_usize_lossy(mt)).sqrt();
        PowerAllocation {
            amplitudes: vec![a; mt],
            total_energy,
        }
    }

    /// Validates `Σ p_i² = Pt` (1e-9 relative) and `p_i > 0`.
    pub fn new(amplitudes: Vec<T>, total_energy: T) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(invalid("power allocation", "no transmitters"));
        }
        if amplitudes.iter().any(|&p| !(p > T::zero()) || !p.is_finite()) {
            return Err(invalid("power allocation", "amplitudes must be positive"));
        }
        let e: T = amplitudes.iter().map(|&p| p * p).sum();
        if (e - total_energy).abs() > T::lit(1e-9) * total_energy.abs().max(T::one()) {
            return Err(invalid(
                "power allocation",
                format!("energy {e} differs from total {total_energy}"),
            ));
        }
        Ok(PowerAllocation {
            amplitudes,
            total_energy,
        })
    }

    /// Rescales arbitrary positive amplitudes onto `Σ p_i² = Pt`.
    pub fn normalized(amplitudes: Vec<T>, total_energy: T) -> Result<Self> {
        let e: T = amplitudes.iter().map(|&p| p * p).sum();
        if !(e > T::zero()) {
            return Err(invalid("power allocation", "zero energy"));
        }
        let k = (total_energy / e).sqrt();
        Self::new(amplitudes.into_iter().map(|p| p * k).collect(), total_energy)
    }

    pub fn amplitudes(&self) -> &[T] {
        &self.amplitudes
    }

    pub fn total_energy(&self) -> T {
        self.total_energy
    }

    pub fn energy(&self) -> T {
        self.amplitudes.iter().map(|&p| p * p).sum()
    }

    /// Amplitudes repeated over receivers in block order (`H₁` diagonal).
    pub fn block_diagonal(&self, nr: usize) -> Vec<T> {
        (0..nr).flat_map(|_| self.amplitudes.iter().copied()).collect()
    }
}

/// Default amplitude floor of the relaxed quadratic program.
pub const DEFAULT_P_MIN: f64 = 0.1;

/// Floor fraction of the direct search giving an amplitude floor of
/// `DEFAULT_P_MIN` when `Pt = Mt`.
pub fn default_floor_frac(mt: usize) -> f64 {
    DEFAULT_P_MIN / (mt as f64).sqrt()
}

/// Nonnegative `d × d` coupling between transmitter-receiver pairs, such
/// that `p̄ᵀ Ā p̄` is the summed absolute block Gram mass of `φΨ̄H₁` for a
/// receiver-repeated amplitude vector `p̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix<T> {
    pub abar: Array2<T>,
    pub transmitters: usize,
    pub receivers: usize,
    pub phi_hash: Option<String>,
    pub scenario_hash: Option<String>,
}

fn check_dims<T: Real>(dict_unit: &BlockDictionary<T>, phi: &MeasurementMatrix<T>) -> Result<()> {
    if phi.cols() != dict_unit.rows() {
        return Err(Error::Dimension {
            context: "coupling matrix",
            expected: dict_unit.rows(),
            got: phi.cols(),
        });
    }
    Ok(())
}

/// `Ā = Σ_l abs(W[l]ᴴ W[l])` with `W = φΨ̄`.
pub fn build_coupling<T: Real>(
    dict_unit: &BlockDictionary<T>,
    phi: &MeasurementMatrix<T>,
) -> Result<CouplingMatrix<T>> {
    check_dims(dict_unit, phi)?;
    let w = real_times_complex(phi.matrix.view(), dict_unit.matrix.view());
    let d = dict_unit.block_len;
    let mut abar = Array2::zeros((d, d));
    for l in 0..dict_unit.blocks {
        let blk = w.slice(ndarray::s![.., l * d..(l + 1) * d]);
        abar += &adjoint_times(blk, blk).mapv(|z| z.norm());
    }
    Ok(coupling(abar, dict_unit))
}

/// `abs(Σ_l W[l]ᴴ W[l])`: phases are summed before the modulus, which
/// underestimates the block Gram mass whenever they disagree.
pub fn build_coupling_abs_of_sum<T: Real>(
    dict_unit: &BlockDictionary<T>,
    phi: &MeasurementMatrix<T>,
) -> Result<CouplingMatrix<T>> {
    check_dims(dict_unit, phi)?;
    let w = real_times_complex(phi.matrix.view(), dict_unit.matrix.view());
    let d = dict_unit.block_len;
    let mut acc = Array2::from_elem((d, d), num_complex::Complex::new(T::zero(), T::zero()));
    for l in 0..dict_unit.blocks {
        let blk = w.slice(ndarray::s![.., l * d..(l + 1) * d]);
        acc.zip_mut_with(&adjoint_times(blk, blk), |a, &b| *a = *a + b);
    }
    Ok(coupling(acc.mapv(|z| z.norm()), dict_unit))
}

fn coupling<T: Real>(abar: Array2<T>, dict_unit: &BlockDictionary<T>) -> CouplingMatrix<T> {
    CouplingMatrix {
        abar,
        transmitters: dict_unit.layout.transmitters,
        receivers: dict_unit.layout.receivers,
        phi_hash: None,
        scenario_hash: None,
    }
}

impl<T: Real> CouplingMatrix<T> {
    /// Wraps an explicit matrix; `d` must equal `transmitters · receivers`.
    pub fn from_matrix(abar: Array2<T>, transmitters: usize, receivers: usize) -> Result<Self> {
        let d = transmitters * receivers;
        if abar.dim() != (d, d) {
            return Err(Error::Dimension {
                context: "coupling matrix",
                expected: d,
                got: abar.nrows(),
            });
        }
        Ok(CouplingMatrix {
            abar,
            transmitters,
            receivers,
            phi_hash: None,
            scenario_hash: None,
        })
    }

    /// `p̄ᵀ Ā p̄` with `p̄` the amplitudes repeated over receivers.
    pub fn cost(&self, amplitudes: &[T]) -> T {
        let p = Array1::from_iter((0..self.receivers).flat_map(|_| amplitudes.iter().copied()));
        p.dot(&self.abar.dot(&p))
    }

    /// `B_ij = Σ Ā_ab` over `a ≡ i`, `b ≡ j (mod Mt)`, so that
    /// `qᵀBq = p̄ᵀĀp̄`.
    pub fn fold(&self) -> Array2<T> {
        let mt = self.transmitters;
        let mut b = Array2::zeros((mt, mt));
        for ((a, c), &v) in self.abar.indexed_iter() {
            b[[a % mt, c % mt]] += v;
        }
        b
    }

    /// `qᵀBq / ‖q‖²`.
    pub fn normalized_cost(&self, amplitudes: &[T]) -> T {
        let e: T = amplitudes.iter().map(|&p| p * p).sum();
        self.cost(amplitudes) / e
    }
}

/// Minimizes `pᵀĀp` over receiver-repeated `p ≥ p_min`, then rescales to
/// total energy `Pt`.
///
/// Copies of one transmitter's amplitude are tied by `p_i − p_{i+l·Mt} = 0`.
/// With a nonnegative `Ā` the minimum sits at the floor, so the result is
/// uniform.
pub fn allocate_qp<T: Real>(
    abar: &CouplingMatrix<T>,
    p_min: T,
    total_energy: T,
) -> Result<PowerAllocation<T>> {
    if !(p_min > T::zero()) {
        return Err(invalid("p_min", "must be positive"));
    }
    let (mt, nr) = (abar.transmitters, abar.receivers);
    let d = mt * nr;
    let scale = abar.abar.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let mut q = if scale > T::zero() {
        abar.abar.mapv(|v| v / scale)
    } else {
        abar.abar.clone()
    };
    q = (&q + &q.t()) * T::lit(0.5);
    let lmin = *eig_sym(q.view()).values.last().expect("nonempty");
    if lmin < T::lit(-1e-9) {
        let shift = lmin.abs() + T::lit(1e-9);
        log::debug!("coupling matrix not PSD (λ_min = {lmin}); shifting by {shift}");
        for i in 0..d {
            q[[i, i]] += shift;
        }
    }
    let rows = mt * (nr - 1);
    let mut a_eq = Array2::zeros((rows, d));
    for l in 1..nr {
        for i in 0..mt {
            let r = (l - 1) * mt + i;
            a_eq[[r, i]] = T::one();
            a_eq[[r, l * mt + i]] = -T::one();
        }
    }
    let problem = QpProblem {
        q: q * T::lit(2.0),
        c: Array1::zeros(d),
        a_eq,
        b_eq: Array1::zeros(rows),
        lower: Array1::from_elem(d, p_min),
    };
    let sol = solve_qp(&problem, &QpOptions::default())?;
    let norm = sol.x.dot(&sol.x).sqrt();
    let alpha = (total_energy * T::from_usize_lossy(nr)).sqrt() / norm;
    let amps: Vec<T> = (0..mt)
        .map(|i| {
            let copies: T = (0..nr).map(|l| sol.x[l * mt + i]).sum();
            alpha * copies / T::from_usize_lossy(nr)
        })
        .collect();
    PowerAllocation::normalized(amps, total_energy)
}

/// Search resolution of [`allocate_direct`].
#[derive(Debug, Clone, Copy)]
pub struct DirectSearch {
    /// Angular grid step (rad) when `Mt = 2`.
    pub step: f64,
    /// Upper bound on grid points for `Mt > 2`; the step grows to respect it.
    pub max_points: usize,
    /// Final angular resolution of the local zoom.
    pub refine_to: f64,
}

impl Default for DirectSearch {
    fn default() -> Self {
        DirectSearch {
            step: 1e-3,
            max_points: 2_000_000,
            refine_to: 1e-9,
        }
    }
}

/// Point on the positive unit sphere from `Mt − 1` hyperspherical angles.
fn sphere_point(angles: &[f64]) -> Vec<f64> {
    let mut u = Vec::with_capacity(angles.len() + 1);
    let mut sin_prod = 1.0;
    for &a in angles {
        u.push(sin_prod * a.cos());
        sin_prod *= a.sin();
    }
    u.push(sin_prod);
    u
}

fn quad(b: &Array2<f64>, u: &[f64]) -> f64 {
    let n = u.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += u[i] * b[[i, j]] * u[j];
        }
    }
    s
}

struct Best {
    cost: f64,
    u: Vec<f64>,
    angles: Vec<f64>,
}

impl Best {
    fn offer(&mut self, cost: f64, u: Vec<f64>, angles: &[f64]) {
        // uniform is offered first and kept on ties
        let tol = 1e-12 * self.cost.abs();
        let better = cost < self.cost - tol
            || (!self.angles.is_empty()
                && (cost - self.cost).abs() <= tol
                && u.iter().zip(&self.u).find(|(a, b)| a != b).is_some_and(|(a, b)| a < b));
        if better {
            self.cost = cost;
            self.u = u;
            self.angles = angles.to_vec();
        }
    }
}

fn scan(b: &Array2<f64>, floor: f64, lo: &[f64], hi: &[f64], steps: usize, best: &mut Best) {
    let dims = lo.len();
    let mut idx = vec![0usize; dims];
    let mut angles = lo.to_vec();
    loop {
        for k in 0..dims {
            angles[k] = if steps == 0 { lo[k] } else { lo[k] + (hi[k] - lo[k]) * idx[k] as f64 / steps as f64 };
        }
        let u = sphere_point(&angles);
        if u.iter().all(|&v| v >= floor) {
            best.offer(quad(b, &u), u, &angles);
        }
        let mut k = dims;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] <= steps {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Minimizes `qᵀBq` over `Σ q_i² = Pt`, `q_i ≥ floor_frac·√Pt`, by a grid
/// over the positive sphere patch followed by local zooming.
pub fn allocate_direct<T: Real>(
    abar: &CouplingMatrix<T>,
    total_energy: T,
    floor_frac: T,
) -> Result<PowerAllocation<T>> {
    allocate_direct_with(abar, total_energy, floor_frac, &DirectSearch::default())
}

pub fn allocate_direct_with<T: Real>(
    abar: &CouplingMatrix<T>,
    total_energy: T,
    floor_frac: T,
    search: &DirectSearch,
) -> Result<PowerAllocation<T>> {
    let mt = abar.transmitters;
    if mt > 4 {
        return Err(invalid("transmitters", format!("direct search supports Mt <= 4, got {mt}")));
    }
    let floor = floor_frac.as_f64();
    if !(floor > 0.0) || floor * floor * mt as f64 > 1.0 + 1e-12 {
        return Err(Error::EmptyFeasibleSet(format!(
            "floor fraction {floor} outside (0, 1/sqrt({mt})]"
        )));
    }
    if mt == 1 {
        return PowerAllocation::new(vec![total_energy.sqrt()], total_energy);
    }
    let b = abar.fold().mapv(|v| v.as_f64());
    let dims = mt - 1;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut steps = (half_pi / search.step).ceil() as usize;
    while (steps + 1).pow(dims as u32) > search.max_points {
        steps = (steps as f64 / 1.5).floor() as usize;
    }
    let uniform = vec![1.0 / (mt as f64).sqrt(); mt];
    let mut best = Best {
        cost: quad(&b, &uniform),
        u: uniform,
        angles: Vec::new(),
    };
    scan(&b, floor, &vec![0.0; dims], &vec![half_pi; dims], steps, &mut best);
    let mut width = half_pi / steps as f64;
    while !best.angles.is_empty() && width > search.refine_to {
        let centre = best.angles.clone();
        let lo: Vec<f64> = centre.iter().map(|&a| (a - 2.0 * width).max(0.0)).collect();
        let hi: Vec<f64> = centre.iter().map(|&a| (a + 2.0 * width).min(half_pi)).collect();
        scan(&b, floor, &lo, &hi, 20, &mut best);
        width /= 5.0;
    }
    // an empty angle list means nothing beat the uniform start
    let amps: Vec<T> = best.u.iter().map(|&v| T::lit(v) * total_energy.sqrt()).collect();
    PowerAllocation::normalized(amps, total_energy)
}
