//! Radar geometry, waveform timing, the discretized estimation space, target
//! truth and the noise model.

use ndarray::Array1;
use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::power::PowerAllocation;
use crate::scalar::Real;

pub type Point<T> = [T; 2];

pub(crate) fn dist<T: Real>(a: Point<T>, b: Point<T>) -> T {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadarGeometry<T> {
    tx: Vec<Point<T>>,
    rx: Vec<Point<T>>,
}

impl<T: Real> RadarGeometry<T> {
    pub fn new(tx: Vec<Point<T>>, rx: Vec<Point<T>>) -> Result<Self> {
        if tx.is_empty() {
            return Err(invalid("geometry", "at least one transmitter required"));
        }
        if rx.is_empty() {
            return Err(invalid("geometry", "at least one receiver required"));
        }
        if tx.iter().chain(rx.iter()).flatten().any(|v| !v.is_finite()) {
            return Err(invalid("geometry", "non-finite antenna coordinate"));
        }
        Ok(RadarGeometry { tx, rx })
    }

    pub fn tx(&self) -> &[Point<T>] {
        &self.tx
    }

    pub fn rx(&self) -> &[Point<T>] {
        &self.rx
    }

    /// Transmitter count `Mt`.
    pub fn mt(&self) -> usize {
        self.tx.len()
    }

    /// Receiver count `Nr`.
    pub fn nr(&self) -> usize {
        self.rx.len()
    }

    /// Block width `d = Mt·Nr`.
    pub fn block_len(&self) -> usize {
        self.mt() * self.nr()
    }

    /// Position of `(tx i, rx l)` inside a block: receiver-major.
    pub fn pair_index(&self, tx: usize, rx: usize) -> usize {
        rx * self.mt() + tx
    }
}

/// Which time step multiplies the pulse index in the slow-time Doppler phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DopplerTimeBase {
    /// `(m−1)·Tp + n·Ts`.
    #[default]
    #[serde(rename = "Tp")]
    PulseDuration,
    /// `(m−1)·T + n·Ts`.
    #[serde(rename = "T")]
    Pri,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformParams<T> {
    /// Carrier frequency (Hz).
    pub carrier: T,
    /// Pulse repetition interval `T` (s).
    pub pri: T,
    /// Pulse duration `Tp` (s).
    pub pulse_duration: T,
    /// Sample period `Ts` (s).
    pub sample_period: T,
    /// Samples per PRI `Ns`.
    pub samples: usize,
    /// Pulse count `Np`.
    pub pulses: usize,
    pub time_base: DopplerTimeBase,
}

impl<T: Real> WaveformParams<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !pos(self.carrier) {
            return Err(invalid("waveform", "fc must be positive"));
        }
        if !pos(self.sample_period) {
            return Err(invalid("waveform", "Ts must be positive"));
        }
        if !pos(self.pulse_duration) || self.pulse_duration > self.pri {
            return Err(invalid("waveform", "need 0 < Tp <= T"));
        }
        if self.samples == 0 || self.pulses == 0 {
            return Err(invalid("waveform", "Ns and Np must be at least 1"));
        }
        if T::from_usize_lossy(self.samples) * self.sample_period > self.pri {
            return Err(invalid("waveform", "Ns*Ts exceeds the PRI"));
        }
        Ok(())
    }

    /// Slow-time + fast-time instant of sample `n` in pulse `m` (both 0-based).
    pub fn sample_time(&self, m: usize, n: usize) -> T {
        let base = match self.time_base {
            DopplerTimeBase::PulseDuration => self.pulse_duration,
            DopplerTimeBase::Pri => self.pri,
        };
        T::from_usize_lossy(m) * base + T::from_usize_lossy(n) * self.sample_period
    }

    /// Samples per matched-filter output, `Np·Ns`.
    pub fn time_samples(&self) -> usize {
        self.samples * self.pulses
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint<T> {
    pub position: Point<T>,
    pub velocity: Point<T>,
}

/// Four-axis grid over `(x, y, vx, vy)`.
///
/// Flat index `h` runs with `x` slowest and `vy` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationGrid<T> {
    axes: [Vec<T>; 4],
}

impl<T: Real> EstimationGrid<T> {
    pub fn new(x: Vec<T>, y: Vec<T>, vx: Vec<T>, vy: Vec<T>) -> Result<Self> {
        let axes = [x, y, vx, vy];
        for (name, ax) in ["x", "y", "vx", "vy"].iter().zip(axes.iter()) {
            if ax.is_empty() {
                return Err(invalid("grid", format!("axis {name} is empty")));
            }
            if ax.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(invalid("grid", format!("axis {name} must be strictly increasing")));
            }
        }
        Ok(EstimationGrid { axes })
    }

    pub fn axes(&self) -> &[Vec<T>; 4] {
        &self.axes
    }

    /// Number of grid points `L`.
    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-axis tick indices of flat index `h`.
    pub fn unravel(&self, h: usize) -> [usize; 4] {
        let mut rest = h;
        let mut idx = [0; 4];
        for a in (0..4).rev() {
            let n = self.axes[a].len();
            idx[a] = rest % n;
            rest /= n;
        }
        idx
    }

    pub fn ravel(&self, idx: [usize; 4]) -> usize {
        idx.iter()
            .zip(self.axes.iter())
            .fold(0, |acc, (&i, ax)| acc * ax.len() + i)
    }

    pub fn point(&self, h: usize) -> GridPoint<T> {
        let [i, j, k, l] = self.unravel(h);
        GridPoint {
            position: [self.axes[0][i], self.axes[1][j]],
            velocity: [self.axes[2][k], self.axes[3][l]],
        }
    }

    /// All grid points in canonical order.
    pub fn enumerate(&self) -> Vec<GridPoint<T>> {
        (0..self.len()).map(|h| self.point(h)).collect()
    }

    /// Flat index of an exact grid point (to a relative tolerance of 1e-9 of
    /// the axis span), if any.
    pub fn locate(&self, position: Point<T>, velocity: Point<T>) -> Option<usize> {
        let coords = [position[0], position[1], velocity[0], velocity[1]];
        let mut idx = [0; 4];
        for a in 0..4 {
            let ax = &self.axes[a];
            let tol = T::lit(1e-9) * self.spacing(a).max(T::one());
            idx[a] = ax.iter().position(|&t| (t - coords[a]).abs() <= tol)?;
        }
        Some(self.ravel(idx))
    }

    /// Mean tick spacing of an axis; 1 for single-tick axes.
    pub fn spacing(&self, axis: usize) -> T {
        let ax = &self.axes[axis];
        if ax.len() < 2 {
            T::one()
        } else {
            (ax[ax.len() - 1] - ax[0]) / T::from_usize_lossy(ax.len() - 1)
        }
    }

    /// Grid point closest to `(position, velocity)` under the per-axis
    /// spacing-normalized Euclidean distance. Ties go to the smaller index.
    pub fn nearest_block(&self, position: Point<T>, velocity: Point<T>) -> usize {
        let coords = [position[0], position[1], velocity[0], velocity[1]];
        let scale: [T; 4] = std::array::from_fn(|a| self.spacing(a));
        let mut best = (0, T::infinity());
        for h in 0..self.len() {
            let idx = self.unravel(h);
            let d2 = (0..4)
                .map(|a| {
                    let d = (self.axes[a][idx[a]] - coords[a]) / scale[a];
                    d * d
                })
                .sum::<T>();
            if d2 < best.1 {
                best = (h, d2);
            }
        }
        best.0
    }
}

/// Complex Gaussian attenuation law: each quadrature independently
/// `N(mean, var)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaDistribution<T> {
    pub mean: T,
    pub var: T,
}

impl<T: Real> Default for BetaDistribution<T> {
    fn default() -> Self {
        BetaDistribution {
            mean: T::lit(0.407),
            var: T::lit(0.0907),
        }
    }
}

impl<T: Real> BetaDistribution<T> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex<T> {
        let sd = self.var.sqrt();
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex::new(self.mean + sd * T::lit(re), self.mean + sd * T::lit(im))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Attenuation<T> {
    /// `β` per transmitter-receiver pair, receiver-major (length `Mt·Nr`).
    Fixed(Vec<Complex<T>>),
    /// Drawn per realization.
    Random(BetaDistribution<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Target<T> {
    pub position: Point<T>,
    pub velocity: Point<T>,
    pub attenuation: Attenuation<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub geometry: RadarGeometry<T>,
    pub waveform: WaveformParams<T>,
    pub grid: EstimationGrid<T>,
    pub targets: Vec<Target<T>>,
    pub enr_db: T,
    pub powers: PowerAllocation<T>,
}

impl<T: Real> Scenario<T> {
    pub fn validate(&self) -> Result<()> {
        self.waveform.validate()?;
        if self.powers.amplitudes().len() != self.geometry.mt() {
            return Err(Error::Dimension {
                context: "transmit powers",
                expected: self.geometry.mt(),
                got: self.powers.amplitudes().len(),
            });
        }
        if self.targets.len() > self.grid.len() {
            return Err(invalid("scenario", "more targets than grid points"));
        }
        let d = self.geometry.block_len();
        for t in &self.targets {
            if let Attenuation::Fixed(b) = &t.attenuation {
                if b.len() != d {
                    return Err(Error::Dimension {
                        context: "target attenuation",
                        expected: d,
                        got: b.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Target count `K`.
    pub fn target_count(&self) -> usize {
        self.targets.len()
    }

    /// Copy of the scenario with every random attenuation drawn from its law.
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R) -> Scenario<T> {
        let d = self.geometry.block_len();
        let mut out = self.clone();
        for t in &mut out.targets {
            if let Attenuation::Random(law) = t.attenuation {
                t.attenuation = Attenuation::Fixed((0..d).map(|_| law.sample(rng)).collect());
            }
        }
        out
    }

    /// Grid block of each target, if all are on the grid.
    pub fn target_blocks(&self) -> Result<Vec<usize>> {
        let mut blocks: Vec<usize> = Vec::with_capacity(self.targets.len());
        for (k, t) in self.targets.iter().enumerate() {
            let h = self
                .grid
                .locate(t.position, t.velocity)
                .ok_or(Error::OffGrid { index: k })?;
            if let Some(first) = blocks.iter().position(|&b| b == h) {
                return Err(Error::DuplicateGridPoint {
                    first,
                    second: k,
                    block: h,
                });
            }
            blocks.push(h);
        }
        Ok(blocks)
    }

    /// Nearest grid block of each target.
    pub fn nearest_blocks(&self) -> Vec<usize> {
        self.targets
            .iter()
            .map(|t| self.grid.nearest_block(t.position, t.velocity))
            .collect()
    }
}

/// Pulse duration `Tp` used by [`Scenario::reference`] (s).
pub const REFERENCE_PULSE_DURATION: f64 = 0.05;

impl<T: Real> Scenario<T> {
    /// Two transmitters at (100,0), (200,0), two receivers at (0,200),
    /// (0,100); fc = 1 GHz, T = 200 ms, Ts = 0.2 ms, Ns = 10; a 3×3×4×4
    /// grid of 144 points; two on-grid targets with random attenuations;
    /// uniform unit powers and ENR 10 dB.
    pub fn reference(pulses: usize) -> Self {
        let l = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        let p = |x: f64, y: f64| [T::lit(x), T::lit(y)];
        let geometry = RadarGeometry::new(vec![p(100.0, 0.0), p(200.0, 0.0)], vec![p(0.0, 200.0), p(0.0, 100.0)])
            .expect("reference geometry");
        let waveform = WaveformParams {
            carrier: T::lit(1e9),
            pri: T::lit(0.2),
            pulse_duration: T::lit(REFERENCE_PULSE_DURATION),
            sample_period: T::lit(2e-4),
            samples: 10,
            pulses,
            time_base: DopplerTimeBase::PulseDuration,
        };
        let grid = EstimationGrid::new(
            l(&[80.0, 90.0, 100.0]),
            l(&[260.0, 270.0, 280.0]),
            l(&[100.0, 110.0, 120.0, 130.0]),
            l(&[100.0, 110.0, 120.0, 130.0]),
        )
        .expect("reference grid");
        let target = |pos: Point<T>, vel: Point<T>| Target {
            position: pos,
            velocity: vel,
            attenuation: Attenuation::Random(BetaDistribution::default()),
        };
        Scenario {
            geometry,
            waveform,
            grid,
            targets: vec![
                target(p(100.0, 260.0), p(120.0, 100.0)),
                target(p(80.0, 280.0), p(110.0, 120.0)),
            ],
            enr_db: T::lit(10.0),
            powers: PowerAllocation::uniform(2, T::lit(2.0)),
        }
    }

    /// [`Scenario::reference`] with both targets moved off the grid to
    /// (101,262) at (123,104) m/s and (81,282) at (113,124) m/s.
    pub fn reference_off_grid(pulses: usize) -> Self {
        let mut s = Self::reference(pulses);
        let p = |x: f64, y: f64| [T::lit(x), T::lit(y)];
        s.targets[0].position = p(101.0, 262.0);
        s.targets[0].velocity = p(123.0, 104.0);
        s.targets[1].position = p(81.0, 282.0);
        s.targets[1].velocity = p(113.0, 124.0);
        s
    }
}

/// Canonical enumeration of the grid.
pub fn enumerate_grid<T: Real>(grid: &EstimationGrid<T>) -> Vec<GridPoint<T>> {
    grid.enumerate()
}

pub fn nearest_grid_block<T: Real>(grid: &EstimationGrid<T>, target: &Target<T>) -> usize {
    grid.nearest_block(target.position, target.velocity)
}

/// Complex vector partitioned into equal-width blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSparseVector<T> {
    pub values: Array1<Complex<T>>,
    pub block_len: usize,
}

impl<T: Real> BlockSparseVector<T> {
    pub fn zeros(blocks: usize, block_len: usize) -> Self {
        BlockSparseVector {
            values: Array1::from_elem(blocks * block_len, Complex::new(T::zero(), T::zero())),
            block_len,
        }
    }

    pub fn block_count(&self) -> usize {
        self.values.len() / self.block_len
    }

    pub fn block(&self, l: usize) -> ndarray::ArrayView1<'_, Complex<T>> {
        self.values
            .slice(ndarray::s![l * self.block_len..(l + 1) * self.block_len])
    }

    pub fn block_norm(&self, l: usize) -> T {
        crate::numerics::dense::cnorm2(self.block(l))
    }

    /// Indices of blocks with nonzero Euclidean norm, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.block_count())
            .filter(|&l| self.block_norm(l) > T::zero())
            .collect()
    }
}

/// Block-sparse coefficient vector of an on-grid scenario: block `h` holds the
/// attenuations of the target sitting at grid point `h`.
pub fn ground_truth_vector<T: Real>(scenario: &Scenario<T>) -> Result<BlockSparseVector<T>> {
    let blocks = scenario.target_blocks()?;
    let d = scenario.geometry.block_len();
    let mut s = BlockSparseVector::zeros(scenario.grid.len(), d);
    for (t, &h) in scenario.targets.iter().zip(&blocks) {
        let beta = match &t.attenuation {
            Attenuation::Fixed(b) => b,
            Attenuation::Random(_) => {
                return Err(invalid("target attenuation", "draw random attenuations first (Scenario::realize)"))
            }
        };
        if beta.len() != d {
            return Err(Error::Dimension {
                context: "target attenuation",
                expected: d,
                got: beta.len(),
            });
        }
        for (k, &b) in beta.iter().enumerate() {
            s.values[h * d + k] = b;
        }
    }
    Ok(s)
}

/// Per-sample complex noise variance for a given ENR:
/// `var = 1 / (Nr · 10^(ENR/10))`.
pub fn noise_variance<T: Real>(enr_db: T, nr: usize) -> T {
    T::one() / (T::from_usize_lossy(nr) * T::lit(10.0).powf(enr_db / T::lit(10.0)))
}

/// Circular complex Gaussian sample with total variance `var`.
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R, var: T) -> Complex<T> {
    let sd = (var / T::lit(2.0)).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(sd * T::lit(re), sd * T::lit(im))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_grid() -> EstimationGrid<f64> {
        EstimationGrid::new(
            vec![80.0, 90.0, 100.0],
            vec![260.0, 270.0, 280.0],
            vec![100.0, 110.0, 120.0, 130.0],
            vec![100.0, 110.0, 120.0, 130.0],
        )
        .unwrap()
    }

    #[test]
    fn reference_grid_has_144_points() {
        assert_eq!(enumerate_grid(&reference_grid()).len(), 144);
    }

    #[test]
    fn single_tick_grid() {
        let g = EstimationGrid::new(vec![5.0], vec![6.0], vec![7.0], vec![8.0]).unwrap();
        let pts = g.enumerate();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].position, [5.0, 6.0]);
        assert_eq!(pts[0].velocity, [7.0, 8.0]);
    }

    #[test]
    fn x_is_slowest_axis() {
        let g = EstimationGrid::new(vec![0.0, 1.0], vec![0.0], vec![0.0], vec![0.0]).unwrap();
        let pts = g.enumerate();
        assert_eq!(pts[0].position, [0.0, 0.0]);
        assert_eq!(pts[1].position, [1.0, 0.0]);
        let g = reference_grid();
        // vy fastest
        assert_eq!(g.point(1).velocity, [100.0, 110.0]);
        assert_eq!(g.point(4).velocity, [110.0, 100.0]);
    }

    #[test]
    fn ravel_unravel_round_trip() {
        let g = reference_grid();
        for h in 0..g.len() {
            assert_eq!(g.ravel(g.unravel(h)), h);
            let p = g.point(h);
            assert_eq!(g.locate(p.position, p.velocity), Some(h));
        }
    }

    #[test]
    fn rejects_unsorted_axis() {
        assert!(EstimationGrid::new(vec![1.0, 0.0], vec![0.0], vec![0.0], vec![0.0]).is_err());
        assert!(EstimationGrid::<f64>::new(vec![], vec![0.0], vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn noise_variance_examples() {
        assert!((noise_variance::<f64>(10.0, 2) - 0.05).abs() < 1e-15);
        assert!((noise_variance::<f64>(0.0, 1) - 1.0).abs() < 1e-15);
        assert!((noise_variance::<f64>(3.0, 2) - 1.0 / (2.0 * 10f64.powf(0.3))).abs() < 1e-15);
        assert!((noise_variance::<f64>(3.0, 2) - 0.2506).abs() < 1e-4);
    }

    #[test]
    fn noise_variance_decreasing() {
        assert!(noise_variance::<f64>(4.0, 2) < noise_variance(3.0, 2));
        assert!(noise_variance::<f64>(3.0, 3) < noise_variance(3.0, 2));
    }

    #[test]
    fn nearest_block_on_grid_is_exact() {
        let g = reference_grid();
        for h in [0, 17, 143] {
            let p = g.point(h);
            assert_eq!(g.nearest_block(p.position, p.velocity), h);
        }
    }

    #[test]
    fn nearest_block_tie_goes_to_lower_index() {
        let g = reference_grid();
        let h = g.nearest_block([85.0, 260.0], [100.0, 100.0]);
        assert_eq!(g.point(h).position, [80.0, 260.0]);
    }

    #[test]
    fn nearest_block_reference_off_grid_target() {
        let g = reference_grid();
        let h = g.nearest_block([101.0, 262.0], [123.0, 104.0]);
        let p = g.point(h);
        assert_eq!(p.position, [100.0, 260.0]);
        assert_eq!(p.velocity, [120.0, 100.0]);
        // exhaustive check of the normalized distance
        let d = |q: GridPoint<f64>| {
            ((q.position[0] - 101.0) / 10.0).powi(2)
                + ((q.position[1] - 262.0) / 10.0).powi(2)
                + ((q.velocity[0] - 123.0) / 10.0).powi(2)
                + ((q.velocity[1] - 104.0) / 10.0).powi(2)
        };
        assert!(g.enumerate().into_iter().all(|q| d(q) >= d(p)));
    }
}
