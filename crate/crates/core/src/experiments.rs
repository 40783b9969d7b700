//! Monte-Carlo success-rate sweeps and timing benches.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use ndarray::Array1;
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dictionary::{synthesize_from_targets, synthesize_received, unit_power_basis, BlockDictionary};
use crate::error::{invalid, Error, Result};
use crate::measurement::{
    build_design_problem, compress, design_f, extract_phi, sample_gaussian_phi, sensing_matrix, DesignedF,
    MeasurementMatrix,
};
use crate::power::{allocate_direct, allocate_qp, build_coupling, default_floor_frac, PowerAllocation, DEFAULT_P_MIN};
use crate::recovery::{recover, Algorithm, RecoverySolution};
use crate::scalar::Real;
use crate::scene::{ground_truth_vector, RadarGeometry, Scenario, WaveformParams};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Recovery algorithm combined with an energy allocation (`-E`) and a
/// designed measurement matrix (`-M`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Method {
    pub algorithm: Algorithm,
    pub allocate: bool,
    pub designed: bool,
}

impl Method {
    pub const fn new(algorithm: Algorithm, allocate: bool, designed: bool) -> Self {
        Method {
            algorithm,
            allocate,
            designed,
        }
    }

    pub const BMP: Method = Method::new(Algorithm::Bmp, false, false);
    pub const BOMP: Method = Method::new(Algorithm::Bomp, false, false);
    pub const BMP_E: Method = Method::new(Algorithm::Bmp, true, false);
    pub const BOMP_E: Method = Method::new(Algorithm::Bomp, true, false);
    pub const BMP_M: Method = Method::new(Algorithm::Bmp, false, true);
    pub const BOMP_M: Method = Method::new(Algorithm::Bomp, false, true);
    pub const BMP_EM: Method = Method::new(Algorithm::Bmp, true, true);
    pub const BOMP_EM: Method = Method::new(Algorithm::Bomp, true, true);

    pub const ALL: [Method; 8] = [
        Method::BMP,
        Method::BOMP,
        Method::BMP_E,
        Method::BOMP_E,
        Method::BMP_M,
        Method::BOMP_M,
        Method::BMP_EM,
        Method::BOMP_EM,
    ];

    /// Methods plotted by default.
    pub const DEFAULT: [Method; 6] = [
        Method::BMP,
        Method::BOMP,
        Method::BMP_E,
        Method::BOMP_E,
        Method::BMP_M,
        Method::BOMP_M,
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.algorithm {
            Algorithm::Bmp => "BMP",
            Algorithm::Bomp => "BOMP",
        })?;
        match (self.allocate, self.designed) {
            (false, false) => Ok(()),
            (true, false) => f.write_str("-E"),
            (false, true) => f.write_str("-M"),
            (true, true) => f.write_str("-EM"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        let (alg, tag) = upper.split_once('-').unwrap_or((&upper, ""));
        let algorithm = match alg {
            "BMP" => Algorithm::Bmp,
            "BOMP" => Algorithm::Bomp,
            _ => return Err(invalid("method", format!("unknown algorithm in {s:?}"))),
        };
        let (allocate, designed) = match tag {
            "" => (false, false),
            "E" => (true, false),
            "M" => (false, true),
            "EM" | "ME" => (true, true),
            _ => return Err(invalid("method", format!("unknown suffix in {s:?}"))),
        };
        Ok(Method::new(algorithm, allocate, designed))
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>>>()?;
    if methods.is_empty() {
        return Err(invalid("methods", "empty list"));
    }
    Ok(methods)
}

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($name::$variant),)+
                    _ => Err(invalid(stringify!($name), format!("unknown value {s:?}"))),
                }
            }
        }
    };
}

/// How `-E` methods choose transmit amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocEngine {
    /// Relaxed quadratic program with an amplitude floor.
    Qp,
    /// Exhaustive search over the energy sphere.
    #[default]
    Direct,
    Uniform,
}
keyword_enum!(AllocEngine { Qp => "qp", Direct => "direct", Uniform => "uniform" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Measurements as a percentage of the stacked observation length.
    Percent,
    EnrDb,
}
keyword_enum!(SweepAxis { Percent => "percent", EnrDb => "enr" });

impl SweepAxis {
    /// Column label written to the CSV.
    pub fn column_name(self) -> &'static str {
        match self {
            SweepAxis::Percent => "measurement_percent",
            SweepAxis::EnrDb => "enr_db",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessMode {
    /// The selected blocks are exactly the targets' grid points.
    #[default]
    OnGrid,
    /// The selected blocks are exactly the grid points nearest the targets.
    OffGrid,
}
keyword_enum!(SuccessMode { OnGrid => "on_grid", OffGrid => "off_grid" });

#[derive(Debug, Clone)]
pub struct ExperimentConfig<T> {
    pub scenario: Scenario<T>,
    pub methods: Vec<Method>,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Measurement percentage used when sweeping ENR.
    pub percent: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub success: SuccessMode,
    pub alloc: AllocEngine,
    /// Amplitude floor of [`AllocEngine::Qp`].
    pub p_min: f64,
    /// Floor fraction of [`AllocEngine::Direct`].
    pub floor_frac: f64,
    /// Fill `mean_runtime_ms`; off by default so the CSV is reproducible.
    pub record_runtime: bool,
}

impl<T: Real> ExperimentConfig<T> {
    /// Percent sweep at the scenario's ENR with the default method set.
    pub fn new(scenario: Scenario<T>, values: Vec<f64>) -> Self {
        let mt = scenario.geometry.mt();
        ExperimentConfig {
            scenario,
            methods: Method::DEFAULT.to_vec(),
            axis: SweepAxis::Percent,
            values,
            percent: 60.0,
            trials: 200,
            base_seed: 0,
            success: SuccessMode::OnGrid,
            alloc: AllocEngine::Direct,
            p_min: DEFAULT_P_MIN,
            floor_frac: default_floor_frac(mt),
            record_runtime: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.trials == 0 {
            return Err(invalid("trials", "need at least one"));
        }
        if self.methods.is_empty() {
            return Err(invalid("methods", "empty list"));
        }
        if self.values.is_empty() {
            return Err(invalid("sweep values", "empty list"));
        }
        let pct_ok = |p: f64| p > 0.0 && p <= 100.0;
        if !pct_ok(self.percent) {
            return Err(invalid("measurement percent", format!("{} not in (0, 100]", self.percent)));
        }
        for &v in &self.values {
            let ok = match self.axis {
                SweepAxis::Percent => pct_ok(v),
                SweepAxis::EnrDb => !v.is_nan(),
            };
            if !ok {
                return Err(invalid("sweep value", format!("{v} is out of range for {}", self.axis)));
            }
        }
        if self.scenario.targets.is_empty() {
            return Err(invalid("scenario", "no targets"));
        }
        Ok(())
    }

    /// `(M, ENR)` at a sweep value.
    pub fn operating_point(&self, value: f64) -> (usize, T) {
        let (pct, enr) = match self.axis {
            SweepAxis::Percent => (value, self.scenario.enr_db),
            SweepAxis::EnrDb => (self.percent, T::lit(value)),
        };
        (measurement_count(pct, &self.scenario.waveform, &self.scenario.geometry), enr)
    }
}

/// `round(percent/100 · Mt·Nr·Ns·Np)`, clamped to `[1, total]`.
pub fn measurement_count<T: Real>(percent: f64, wf: &WaveformParams<T>, geo: &RadarGeometry<T>) -> usize {
    let total = geo.block_len() * wf.time_samples();
    ((percent / 100.0 * total as f64).round() as usize).clamp(1, total)
}

/// Whether the recovered support is the correct set of grid points.
pub fn score_success<T: Real>(solution: &RecoverySolution<T>, scenario: &Scenario<T>, mode: SuccessMode) -> bool {
    let truth = match mode {
        SuccessMode::OnGrid => match scenario.target_blocks() {
            Ok(b) => b,
            Err(_) => return false,
        },
        SuccessMode::OffGrid => scenario.nearest_blocks(),
    };
    let mut truth = truth;
    truth.sort_unstable();
    truth.dedup();
    solution.selected_blocks.len() == scenario.target_count() && solution.support() == truth
}

/// Independent random stream of one trial; every method sees the same
/// streams for the same `(seed, value, trial)`.
pub fn trial_rng(base_seed: u64, axis_value: f64, trial: usize, stream: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"bcs-radar trial");
    h.update(base_seed.to_le_bytes());
    h.update(axis_value.to_bits().to_le_bytes());
    h.update((trial as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
    rng.set_stream(stream);
    rng
}

pub const STREAM_BETA: u64 = 0;
pub const STREAM_NOISE: u64 = 1;
pub const STREAM_PHI: u64 = 2;

/// Transmit amplitudes minimizing the coupling cost of `φΨ̄`.
pub fn allocate<T: Real>(
    engine: AllocEngine,
    unit: &BlockDictionary<T>,
    phi: &MeasurementMatrix<T>,
    total_energy: T,
    p_min: f64,
    floor_frac: f64,
) -> Result<PowerAllocation<T>> {
    let mt = unit.layout.transmitters;
    match engine {
        AllocEngine::Uniform => Ok(PowerAllocation::uniform(mt, total_energy)),
        AllocEngine::Qp => allocate_qp(&build_coupling(unit, phi)?, T::lit(p_min), total_energy),
        AllocEngine::Direct => allocate_direct(&build_coupling(unit, phi)?, total_energy, T::lit(floor_frac)),
    }
}

/// Scenario-level state shared by every trial of a sweep.
#[derive(Debug, Clone)]
pub struct Prepared<T> {
    pub unit: BlockDictionary<T>,
    pub design: Option<DesignedF<T>>,
    /// Designed φ and its `-EM` allocation, keyed by `M`.
    pub designed: BTreeMap<usize, (MeasurementMatrix<T>, Option<PowerAllocation<T>>)>,
}

pub fn prepare<T: Real>(config: &ExperimentConfig<T>) -> Result<Prepared<T>> {
    config.validate()?;
    let unit = unit_power_basis(&config.scenario)?;
    let needs_design = config.methods.iter().any(|m| m.designed);
    let needs_em = config.methods.iter().any(|m| m.designed && m.allocate);
    let mut designed = BTreeMap::new();
    let design = if needs_design {
        let d = design_f(&build_design_problem(&unit))?;
        for &v in &config.values {
            let (m, _) = config.operating_point(v);
            if designed.contains_key(&m) {
                continue;
            }
            let phi = extract_phi(&d.f, m)?;
            let alloc = if needs_em {
                Some(allocate(
                    config.alloc,
                    &unit,
                    &phi,
                    config.scenario.powers.total_energy(),
                    config.p_min,
                    config.floor_frac,
                )?)
            } else {
                None
            };
            designed.insert(m, (phi, alloc));
        }
        Some(d)
    } else {
        None
    };
    Ok(Prepared { unit, design, designed })
}

/// Everything one trial produced.
#[derive(Debug, Clone)]
pub struct TrialOutcome<T> {
    pub success: bool,
    pub solution: RecoverySolution<T>,
    pub measurements: usize,
    pub amplitudes: Vec<T>,
    pub y: Array1<Complex<T>>,
    /// Time spent in the recovery algorithm alone.
    pub runtime: Duration,
}

/// One Monte-Carlo trial: fresh attenuations and noise, a fresh Gaussian φ
/// or the prepared designed φ, allocation, compression, recovery, scoring.
pub fn run_trial<T: Real>(
    config: &ExperimentConfig<T>,
    prepared: &Prepared<T>,
    method: Method,
    axis_value: f64,
    trial: usize,
) -> Result<TrialOutcome<T>> {
    let (m, enr) = config.operating_point(axis_value);
    let mut scenario = config.scenario.clone();
    scenario.enr_db = enr;
    let scenario = scenario.realize(&mut trial_rng(config.base_seed, axis_value, trial, STREAM_BETA));
    let total = scenario.powers.total_energy();
    let unit = &prepared.unit;

    let gaussian;
    let (phi, em_alloc) = if method.designed {
        let (phi, alloc) = prepared
            .designed
            .get(&m)
            .ok_or_else(|| invalid("designed measurement matrix", format!("none prepared for M = {m}")))?;
        (phi, alloc.as_ref())
    } else {
        gaussian = sample_gaussian_phi(m, unit.rows(), &mut trial_rng(config.base_seed, axis_value, trial, STREAM_PHI))?;
        (&gaussian, None)
    };

    let powers = match (method.allocate, em_alloc) {
        (false, _) => scenario.powers.clone(),
        (true, Some(a)) => a.clone(),
        (true, None) => allocate(config.alloc, unit, phi, total, config.p_min, config.floor_frac)?,
    };
    let dict = unit.with_powers(powers.amplitudes())?;

    let mut noise = trial_rng(config.base_seed, axis_value, trial, STREAM_NOISE);
    let z = match ground_truth_vector(&scenario) {
        Ok(s) => synthesize_received(&scenario, &dict, &s, &mut noise)?,
        Err(Error::OffGrid { .. }) => synthesize_from_targets(&scenario, powers.amplitudes(), &mut noise)?,
        Err(e) => return Err(e),
    };

    let theta = sensing_matrix(phi, &dict, true)?;
    let y = compress(phi, z.view())?;
    let start = Instant::now();
    let solution = recover(method.algorithm, &theta, y.view(), scenario.target_count())?;
    let runtime = start.elapsed();
    Ok(TrialOutcome {
        success: score_success(&solution, &scenario, config.success),
        solution,
        measurements: m,
        amplitudes: powers.amplitudes().to_vec(),
        y,
        runtime,
    })
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the bounds are exactly 0 and 1 at the extremes; rounding would leave dust
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub method: String,
    pub axis_name: String,
    pub axis_value: f64,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_runtime_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuccessCurve {
    /// Ordered by sweep value, then by method in configuration order.
    pub rows: Vec<CurveRow>,
}

impl SuccessCurve {
    pub fn get(&self, method: Method, axis_value: f64) -> Option<&CurveRow> {
        let name = method.to_string();
        self.rows.iter().find(|r| r.method == name && r.axis_value == axis_value)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    /// Gnuplot data: one index block per method with columns
    /// `value rate ci_low ci_high`.
    pub fn write_gnuplot<W: Write>(&self, mut out: W) -> Result<()> {
        let mut methods: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !methods.contains(&r.method.as_str()) {
                methods.push(&r.method);
            }
        }
        for (i, m) in methods.iter().enumerate() {
            if i > 0 {
                writeln!(out, "\n")?;
            }
            writeln!(out, "# {m}")?;
            for r in self.rows.iter().filter(|r| r.method == *m) {
                writeln!(out, "{} {} {} {}", r.axis_value, r.rate, r.ci_low, r.ci_high)?;
            }
        }
        Ok(())
    }
}

/// Runs every (value, method, trial) combination in parallel and aggregates
/// the success rates in a fixed order.
pub fn sweep<T: Real>(config: &ExperimentConfig<T>) -> Result<SuccessCurve> {
    let prepared = prepare(config)?;
    sweep_prepared(config, &prepared)
}

pub fn sweep_prepared<T: Real>(config: &ExperimentConfig<T>, prepared: &Prepared<T>) -> Result<SuccessCurve> {
    let tasks: Vec<(f64, Method, usize)> = config
        .values
        .iter()
        .flat_map(|&v| {
            config
                .methods
                .iter()
                .flat_map(move |&m| (0..config.trials).map(move |t| (v, m, t)))
        })
        .collect();
    let outcomes: Vec<(bool, Duration)> = tasks
        .par_iter()
        .map(|&(v, m, t)| {
            run_trial(config, prepared, m, v, t)
                .map(|o| (o.success, o.runtime))
                .map_err(|e| Error::Trial {
                    method: m.to_string(),
                    axis_value: v,
                    trial: t,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    let rows = tasks
        .chunks(config.trials)
        .zip(outcomes.chunks(config.trials))
        .map(|(task, out)| {
            let (v, m, _) = task[0];
            let successes = out.iter().filter(|o| o.0).count();
            let (ci_low, ci_high) = wilson_interval(successes, config.trials, Z_95);
            let total: Duration = out.iter().map(|o| o.1).sum();
            CurveRow {
                method: m.to_string(),
                axis_name: config.axis.column_name().to_string(),
                axis_value: v,
                trials: config.trials,
                successes,
                rate: successes as f64 / config.trials as f64,
                ci_low,
                ci_high,
                mean_runtime_ms: config
                    .record_runtime
                    .then(|| total.as_secs_f64() * 1e3 / config.trials as f64),
            }
        })
        .collect();
    Ok(SuccessCurve { rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub method: String,
    pub mean_ms: f64,
    /// Mean time divided by BMP's.
    pub normalized: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub measurements: usize,
    pub trials: usize,
    pub rows: Vec<BenchRow>,
    /// Design LP plus eigen-extraction of φ.
    pub design_ms: f64,
    /// Coupling matrix plus the allocation search, for one φ.
    pub allocation_ms: f64,
}

impl BenchReport {
    pub fn normalized(&self, method: Method) -> Option<f64> {
        let name = method.to_string();
        self.rows.iter().find(|r| r.method == name).map(|r| r.normalized)
    }
}

/// Recovery time per method at the first sweep value, normalized by BMP,
/// plus the one-off preprocessing costs of design and allocation.
///
/// Trials run serially; each method's recovery is timed on the same inputs.
pub fn bench<T: Real>(config: &ExperimentConfig<T>) -> Result<BenchReport> {
    config.validate()?;
    let value = config.values[0];
    let (m, _) = config.operating_point(value);
    let unit = unit_power_basis(&config.scenario)?;

    let start = Instant::now();
    let design = design_f(&build_design_problem(&unit))?;
    let designed_phi = extract_phi(&design.f, m)?;
    let design_ms = start.elapsed().as_secs_f64() * 1e3;

    let total = config.scenario.powers.total_energy();
    let start = Instant::now();
    let engine = match config.alloc {
        AllocEngine::Uniform => AllocEngine::Direct,
        e => e,
    };
    let em = allocate(engine, &unit, &designed_phi, total, config.p_min, config.floor_frac)?;
    let allocation_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut methods = vec![Method::BMP];
    methods.extend(config.methods.iter().copied().filter(|&x| x != Method::BMP));
    let mut designed = BTreeMap::new();
    designed.insert(m, (designed_phi, Some(em)));
    let prepared = Prepared {
        unit,
        design: Some(design),
        designed,
    };
    let mut totals = vec![Duration::ZERO; methods.len()];
    for t in 0..config.trials {
        for (k, &method) in methods.iter().enumerate() {
            totals[k] += run_trial(config, &prepared, method, value, t)?.runtime;
        }
    }
    let ms: Vec<f64> = totals
        .iter()
        .map(|d| d.as_secs_f64() * 1e3 / config.trials as f64)
        .collect();
    let rows = methods
        .iter()
        .zip(&ms)
        .map(|(method, &t)| BenchRow {
            method: method.to_string(),
            mean_ms: t,
            normalized: t / ms[0],
        })
        .collect();
    Ok(BenchReport {
        measurements: m,
        trials: config.trials,
        rows,
        design_ms,
        allocation_ms,
    })
}
