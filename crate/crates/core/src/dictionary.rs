//! Basis matrix Ψ of the stacked matched-filter outputs and synthesis of
//! noisy received vectors.
//!
//! Row layout: pulse `m` (slowest), sample `n`, receiver `l`, transmitter `i`
//! (fastest). Column layout: grid block `h` (slowest), receiver `l`,
//! transmitter `i`. Column `(h, l, i)` is nonzero only on the rows of matched
//! filter `(i, l)`.

use ndarray::{s, Array1, Array2};
use num_complex::Complex;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::scalar::{cis, Real};
use crate::scene::{
    complex_gaussian, dist, noise_variance, Attenuation, BlockSparseVector, Point, Scenario,
    WaveformParams,
};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Bistatic Doppler shift `(fc/c)·(v·u_r − v·u_t)`.
///
/// `u_t` points from the transmitter to the target, `u_r` from the target to
/// the receiver.
pub fn doppler_shift_with<T: Real>(
    velocity: Point<T>,
    target: Point<T>,
    tx: Point<T>,
    rx: Point<T>,
    carrier: T,
    c: T,
) -> Result<T> {
    let dt = dist(target, tx);
    let dr = dist(rx, target);
    if dt == T::zero() || dr == T::zero() {
        return Err(Error::DegenerateGeometry(
            "target coincides with an antenna".into(),
        ));
    }
    let ut = [(target[0] - tx[0]) / dt, (target[1] - tx[1]) / dt];
    let ur = [(rx[0] - target[0]) / dr, (rx[1] - target[1]) / dr];
    let vr = velocity[0] * ur[0] + velocity[1] * ur[1];
    let vt = velocity[0] * ut[0] + velocity[1] * ut[1];
    Ok(carrier / c * (vr - vt))
}

pub fn doppler_shift<T: Real>(
    velocity: Point<T>,
    target: Point<T>,
    tx: Point<T>,
    rx: Point<T>,
    carrier: T,
) -> Result<T> {
    doppler_shift_with(velocity, target, tx, rx, carrier, T::lit(SPEED_OF_LIGHT))
}

/// Bistatic delay `(‖p − t‖ + ‖p − r‖)/c`.
pub fn path_delay_with<T: Real>(target: Point<T>, tx: Point<T>, rx: Point<T>, c: T) -> T {
    (dist(target, tx) + dist(target, rx)) / c
}

pub fn path_delay<T: Real>(target: Point<T>, tx: Point<T>, rx: Point<T>) -> T {
    path_delay_with(target, tx, rx, T::lit(SPEED_OF_LIGHT))
}

/// Matched-filter output sample for a unit attenuation:
/// `p·exp(j2π(f·t(m,n) − fc·τ))`, `pulse` and `sample` 0-based.
pub fn atom_entry<T: Real>(
    amplitude: T,
    doppler: T,
    delay: T,
    pulse: usize,
    sample: usize,
    wf: &WaveformParams<T>,
) -> Complex<T> {
    let cycles = doppler * wf.sample_time(pulse, sample) - wf.carrier * delay;
    // reduce to one turn before scaling by 2π
    let frac = cycles - cycles.round();
    cis(T::lit(2.0) * T::PI() * frac) * amplitude
}

/// Row-stacking convention of a [`BlockDictionary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowLayout {
    pub pulses: usize,
    pub samples: usize,
    pub receivers: usize,
    pub transmitters: usize,
}

impl RowLayout {
    pub fn rows(&self) -> usize {
        self.pulses * self.samples * self.receivers * self.transmitters
    }

    pub fn row(&self, pulse: usize, sample: usize, rx: usize, tx: usize) -> usize {
        ((pulse * self.samples + sample) * self.receivers + rx) * self.transmitters + tx
    }

    /// Rows belonging to matched filter `(tx, rx)`, in time order.
    pub fn pair_rows(&self, tx: usize, rx: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.pulses)
            .flat_map(move |m| (0..self.samples).map(move |n| self.row(m, n, rx, tx)))
    }

    /// Tag stored in file headers.
    pub const TAG: &'static str = "pulse>sample>rx>tx";
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockDictionary<T> {
    pub matrix: Array2<Complex<T>>,
    pub blocks: usize,
    pub block_len: usize,
    pub layout: RowLayout,
}

impl<T: Real> BlockDictionary<T> {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn block(&self, l: usize) -> ndarray::ArrayView2<'_, Complex<T>> {
        self.matrix
            .slice(s![.., l * self.block_len..(l + 1) * self.block_len])
    }

    /// `Ψ̄[l]·H₁` for every block: scales each column by its transmitter's
    /// amplitude.
    pub fn with_powers(&self, amplitudes: &[T]) -> Result<Self> {
        let mt = self.layout.transmitters;
        if amplitudes.len() != mt {
            return Err(Error::Dimension {
                context: "transmit amplitudes",
                expected: mt,
                got: amplitudes.len(),
            });
        }
        let mut out = self.clone();
        for (j, mut col) in out.matrix.columns_mut().into_iter().enumerate() {
            let p = amplitudes[(j % self.block_len) % mt];
            col.mapv_inplace(|z| z * p);
        }
        Ok(out)
    }
}

fn layout_of<T: Real>(scenario: &Scenario<T>) -> RowLayout {
    RowLayout {
        pulses: scenario.waveform.pulses,
        samples: scenario.waveform.samples,
        receivers: scenario.geometry.nr(),
        transmitters: scenario.geometry.mt(),
    }
}

/// Columns (`rows × d`) that a unit-attenuation target at `(position,
/// velocity)` contributes to the stacked observation.
pub fn response_block<T: Real>(
    scenario: &Scenario<T>,
    amplitudes: &[T],
    position: Point<T>,
    velocity: Point<T>,
) -> Result<Array2<Complex<T>>> {
    let geo = &scenario.geometry;
    let wf = &scenario.waveform;
    let layout = layout_of(scenario);
    let d = geo.block_len();
    let mut out = Array2::from_elem((layout.rows(), d), Complex::new(T::zero(), T::zero()));
    for (l, &rx) in geo.rx().iter().enumerate() {
        for (i, &tx) in geo.tx().iter().enumerate() {
            let f = doppler_shift(velocity, position, tx, rx, wf.carrier)?;
            let tau = path_delay(position, tx, rx);
            let col = geo.pair_index(i, l);
            for m in 0..wf.pulses {
                for n in 0..wf.samples {
                    out[[layout.row(m, n, l, i), col]] = atom_entry(amplitudes[i], f, tau, m, n, wf);
                }
            }
        }
    }
    Ok(out)
}

/// Ψ for the given transmit amplitudes.
pub fn build_basis<T: Real>(scenario: &Scenario<T>, amplitudes: &[T]) -> Result<BlockDictionary<T>> {
    scenario.validate()?;
    let mt = scenario.geometry.mt();
    if amplitudes.len() != mt {
        return Err(Error::Dimension {
            context: "transmit amplitudes",
            expected: mt,
            got: amplitudes.len(),
        });
    }
    let layout = layout_of(scenario);
    let d = scenario.geometry.block_len();
    let blocks = scenario.grid.len();
    let mut matrix = Array2::from_elem((layout.rows(), blocks * d), Complex::new(T::zero(), T::zero()));
    for h in 0..blocks {
        let gp = scenario.grid.point(h);
        let blk = response_block(scenario, amplitudes, gp.position, gp.velocity)?;
        matrix.slice_mut(s![.., h * d..(h + 1) * d]).assign(&blk);
    }
    Ok(BlockDictionary {
        matrix,
        blocks,
        block_len: d,
        layout,
    })
}

/// Ψ̄: the basis with every amplitude set to 1.
pub fn unit_power_basis<T: Real>(scenario: &Scenario<T>) -> Result<BlockDictionary<T>> {
    build_basis(scenario, &vec![T::one(); scenario.geometry.mt()])
}

fn add_noise<T: Real, R: Rng + ?Sized>(z: &mut Array1<Complex<T>>, var: T, rng: &mut R) {
    if var > T::zero() {
        for v in z.iter_mut() {
            *v = *v + complex_gaussian(rng, var);
        }
    }
}

/// `z = Ψ s + e` with circular Gaussian noise at the scenario's ENR.
pub fn synthesize_received<T: Real, R: Rng + ?Sized>(
    scenario: &Scenario<T>,
    dict: &BlockDictionary<T>,
    truth: &BlockSparseVector<T>,
    rng: &mut R,
) -> Result<Array1<Complex<T>>> {
    if truth.values.len() != dict.matrix.ncols() {
        return Err(Error::Dimension {
            context: "synthesize_received",
            expected: dict.matrix.ncols(),
            got: truth.values.len(),
        });
    }
    let mut z = dict.matrix.dot(&truth.values);
    add_noise(&mut z, noise_variance(scenario.enr_db, scenario.geometry.nr()), rng);
    Ok(z)
}

/// Received vector generated from the targets' true (possibly off-grid)
/// parameters, with the scenario's noise level.
pub fn synthesize_from_targets<T: Real, R: Rng + ?Sized>(
    scenario: &Scenario<T>,
    amplitudes: &[T],
    rng: &mut R,
) -> Result<Array1<Complex<T>>> {
    let layout = layout_of(scenario);
    let mut z = Array1::from_elem(layout.rows(), Complex::new(T::zero(), T::zero()));
    for t in &scenario.targets {
        let beta = match &t.attenuation {
            Attenuation::Fixed(b) => Array1::from(b.clone()),
            Attenuation::Random(_) => {
                return Err(invalid("target attenuation", "draw random attenuations first"))
            }
        };
        let blk = response_block(scenario, amplitudes, t.position, t.velocity)?;
        z = z + blk.dot(&beta);
    }
    add_noise(&mut z, noise_variance(scenario.enr_db, scenario.geometry.nr()), rng);
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::ground_truth_vector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const C3: f64 = 3e8;

    fn tiny_scenario() -> Scenario<f64> {
        use crate::scene::{DopplerTimeBase, EstimationGrid, RadarGeometry};
        Scenario {
            geometry: RadarGeometry::new(vec![[100.0, 0.0]], vec![[0.0, 100.0]]).unwrap(),
            waveform: WaveformParams {
                carrier: 1e9,
                pri: 0.2,
                pulse_duration: 0.05,
                sample_period: 2e-4,
                samples: 1,
                pulses: 1,
                time_base: DopplerTimeBase::PulseDuration,
            },
            grid: EstimationGrid::new(vec![80.0], vec![260.0], vec![100.0], vec![110.0]).unwrap(),
            targets: vec![],
            enr_db: 10.0,
            powers: crate::power::PowerAllocation::uniform(1, 1.0),
        }
    }

    #[test]
    fn doppler_of_stationary_target_is_zero() {
        let f = doppler_shift([0.0, 0.0], [10.0, 20.0], [0.0, 0.0], [5.0, 0.0], 1e9).unwrap();
        assert_eq!(f, 0.0);
    }

    #[test]
    fn doppler_hand_substitution() {
        let f = doppler_shift_with([0.0, 150.0], [0.0, 300.0], [0.0, 0.0], [0.0, 0.0], 1e9, C3).unwrap();
        assert!((f + 1000.0).abs() < 1e-9);
    }

    #[test]
    fn doppler_of_crossing_motion_is_zero() {
        let f: f64 = doppler_shift([0.0, 7.0], [50.0, 0.0], [0.0, 0.0], [100.0, 0.0], 1e9).unwrap();
        assert!(f.abs() < 1e-12);
    }

    #[test]
    fn doppler_rejects_coincident_points() {
        assert!(doppler_shift([1.0, 1.0], [0.0, 0.0], [0.0, 0.0], [5.0, 5.0], 1e9).is_err());
        assert!(doppler_shift([1.0, 1.0], [5.0, 5.0], [0.0, 0.0], [5.0, 5.0], 1e9).is_err());
    }

    #[test]
    fn doppler_antisymmetry() {
        let (p, t, r, v) = ([30.0, 70.0], [0.0, 0.0], [90.0, -10.0], [4.0, -3.0]);
        let f: f64 = doppler_shift(v, p, t, r, 1e9).unwrap();
        let g = doppler_shift([-v[0], -v[1]], p, r, t, 1e9).unwrap();
        assert!((f + g).abs() < 1e-9 * f.abs().max(1.0));
    }

    #[test]
    fn delay_examples() {
        assert_eq!(path_delay([3.0, 4.0], [3.0, 4.0], [3.0, 4.0]), 0.0);
        let tau = path_delay_with([100.0, 260.0], [100.0, 0.0], [0.0, 100.0], C3);
        let expect = (260.0 + 35600f64.sqrt()) / C3;
        assert!((tau - expect).abs() < 1e-18);
    }

    #[test]
    fn delay_symmetric_and_homogeneous() {
        let (p, t, r) = ([12.0, 40.0], [-3.0, 5.0], [60.0, 1.0]);
        assert_eq!(path_delay(p, t, r), path_delay(p, r, t));
        let two = |a: [f64; 2]| [2.0 * a[0], 2.0 * a[1]];
        let ratio = path_delay(two(p), two(t), two(r)) / path_delay(p, t, r);
        assert!((ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn atom_entry_examples() {
        let wf = tiny_scenario().waveform;
        // integer carrier cycles wrap to zero phase
        let z = atom_entry(0.7, 0.0, 3.0 / wf.carrier, 0, 0, &wf);
        assert!((z - Complex::new(0.7, 0.0)).norm() < 1e-12);
        assert_eq!(atom_entry(0.0, 12.0, 1e-6, 0, 3, &wf).norm(), 0.0);
        let z = atom_entry(1.0, 100.0, 0.0, 0, 5, &wf);
        let expect = Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * 0.1);
        assert!((z - expect).norm() < 1e-12);
        assert!((z.arg() - 0.6283).abs() < 1e-4);
    }

    #[test]
    fn reference_basis_dimensions() {
        let sc = Scenario::<f64>::reference(4);
        let dict = unit_power_basis(&sc).unwrap();
        assert_eq!(dict.matrix.dim(), (160, 576));
        assert_eq!((dict.blocks, dict.block_len), (144, 4));
    }

    #[test]
    fn single_entry_basis() {
        let sc = tiny_scenario();
        let dict = build_basis(&sc, &[0.8]).unwrap();
        assert_eq!(dict.matrix.dim(), (1, 1));
        let (t, r) = (sc.geometry.tx()[0], sc.geometry.rx()[0]);
        let g = sc.grid.point(0);
        let f = doppler_shift(g.velocity, g.position, t, r, 1e9).unwrap();
        let tau = path_delay(g.position, t, r);
        assert_eq!(dict.matrix[[0, 0]], atom_entry(0.8, f, tau, 0, 0, &sc.waveform));
    }

    #[test]
    fn unit_powers_match_unit_basis() {
        let sc = Scenario::<f64>::reference(2);
        assert_eq!(build_basis(&sc, &[1.0, 1.0]).unwrap(), unit_power_basis(&sc).unwrap());
    }

    #[test]
    fn column_structure() {
        let sc = Scenario::<f64>::reference(2);
        let amps = [1.2, 0.6];
        let dict = build_basis(&sc, &amps).unwrap();
        let unit = unit_power_basis(&sc).unwrap();
        let np_ns = sc.waveform.time_samples();
        for (j, col) in dict.matrix.columns().into_iter().enumerate() {
            let pair = j % dict.block_len;
            let (tx, rx) = (pair % 2, pair / 2);
            let support: Vec<usize> = dict.layout.pair_rows(tx, rx).collect();
            let nz: Vec<usize> = (0..col.len()).filter(|&r| col[r].norm() > 0.0).collect();
            assert_eq!(nz, {
                let mut s = support.clone();
                s.sort();
                s
            });
            assert_eq!(nz.len(), np_ns);
            for &r in &nz {
                assert!((col[r].norm() - amps[tx]).abs() < 1e-12);
            }
            let unorm = crate::numerics::dense::cnorm2(unit.matrix.column(j));
            assert!((unorm - (np_ns as f64).sqrt()).abs() < 1e-12);
        }
        // Ψ = Ψ̄·H₁ entrywise
        let scaled = unit.with_powers(&amps).unwrap();
        for (a, b) in dict.matrix.iter().zip(scaled.matrix.iter()) {
            assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
        }
    }

    #[test]
    fn row_layout_order() {
        let lay = RowLayout { pulses: 2, samples: 3, receivers: 2, transmitters: 2 };
        assert_eq!(lay.row(0, 0, 0, 1), 1);
        assert_eq!(lay.row(0, 0, 1, 0), 2);
        assert_eq!(lay.row(0, 1, 0, 0), 4);
        assert_eq!(lay.row(1, 0, 0, 0), 12);
        assert_eq!(lay.rows(), 24);
    }

    fn realized(seed: u64) -> (Scenario<f64>, BlockDictionary<f64>, BlockSparseVector<f64>) {
        let sc = Scenario::<f64>::reference(2).realize(&mut ChaCha8Rng::seed_from_u64(seed));
        let dict = unit_power_basis(&sc).unwrap();
        let s = ground_truth_vector(&sc).unwrap();
        (sc, dict, s)
    }

    #[test]
    fn noiseless_synthesis_is_exact() {
        let (mut sc, dict, s) = realized(3);
        sc.enr_db = f64::INFINITY;
        let z = synthesize_received(&sc, &dict, &s, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(z, dict.matrix.dot(&s.values));
    }

    #[test]
    fn pure_noise_variance() {
        let (mut sc, dict, _) = realized(3);
        sc.enr_db = 10.0;
        let zero = BlockSparseVector::zeros(dict.blocks, dict.block_len);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut acc = Vec::new();
        while acc.len() < 20_000 {
            let z = synthesize_received(&sc, &dict, &zero, &mut rng).unwrap();
            acc.extend(z.iter().map(|v| v.norm_sqr()));
        }
        let n = acc.len() as f64;
        let mean = acc.iter().sum::<f64>() / n;
        let var = 0.05;
        // |e|² is exponential with mean var and sd var
        assert!((mean - var).abs() < 3.0 * var / n.sqrt(), "{mean}");
    }

    #[test]
    fn synthesis_is_seeded() {
        let (sc, dict, s) = realized(5);
        let a = synthesize_received(&sc, &dict, &s, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = synthesize_received(&sc, &dict, &s, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let short = BlockSparseVector::<f64>::zeros(3, 4);
        assert!(synthesize_received(&sc, &dict, &short, &mut ChaCha8Rng::seed_from_u64(9)).is_err());
    }

    #[test]
    fn on_grid_targets_synthesize_like_truth() {
        let (mut sc, dict, s) = realized(8);
        sc.enr_db = f64::INFINITY;
        let z1 = synthesize_from_targets(&sc, &[1.0, 1.0], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let z2 = dict.matrix.dot(&s.values);
        for (a, b) in z1.iter().zip(z2.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
