//! Scenario files, binary matrix files and their JSON sidecars.
//!
//! Binary matrices share one header: magic `BCSM`, format version, element
//! type, row and column counts, a length-prefixed ordering tag and the
//! 32-byte SHA-256 of the scenario they were built for. The payload follows
//! in row-major little-endian order.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dictionary::{unit_power_basis, BlockDictionary, RowLayout};
use crate::error::{invalid, Error, Result};
use crate::measurement::{MeasurementKind, MeasurementMatrix};
use crate::numerics::SolverReport;
use crate::power::PowerAllocation;
use crate::scalar::Real;
use crate::scene::{
    Attenuation, BetaDistribution, DopplerTimeBase, EstimationGrid, Point, RadarGeometry, Scenario, Target,
    WaveformParams,
};

const MAGIC: &[u8; 4] = b"BCSM";
const VERSION: u32 = 1;

/// Ordering tag of measurement matrix files.
pub const PHI_TAG: &str = "phi:row-major";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryFile {
    pub tx: Vec<[f64; 2]>,
    pub rx: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformFile {
    pub fc: f64,
    #[serde(rename = "T")]
    pub pri: f64,
    #[serde(rename = "Tp")]
    pub pulse_duration: f64,
    #[serde(rename = "Ts")]
    pub sample_period: f64,
    #[serde(rename = "Ns")]
    pub samples: usize,
    #[serde(rename = "Np")]
    pub pulses: usize,
    #[serde(default)]
    pub time_base: DopplerTimeBase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
}

/// One target; `beta` (receiver-major `[re, im]` pairs) wins over
/// `beta_dist`, and the default attenuation law applies when both are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetFile {
    pub p: [f64; 2],
    pub v: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<Complex<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_dist: Option<BetaDistribution<f64>>,
}

/// On-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub geometry: GeometryFile,
    pub waveform: WaveformFile,
    pub grid: GridFile,
    pub targets: Vec<TargetFile>,
    pub enr_db: f64,
    /// Transmit amplitudes; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub powers: Option<Vec<f64>>,
    /// Total transmit energy; defaults to the transmitter count.
    #[serde(rename = "Pt", default, skip_serializing_if = "Option::is_none")]
    pub total_energy: Option<f64>,
}

fn pts<T: Real>(v: &[[f64; 2]]) -> Vec<Point<T>> {
    v.iter().map(|p| [T::lit(p[0]), T::lit(p[1])]).collect()
}

fn lits<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

fn f64s<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn pair<T: Real>(p: Point<T>) -> [f64; 2] {
    [p[0].as_f64(), p[1].as_f64()]
}

impl ScenarioFile {
    pub fn to_scenario<T: Real>(&self) -> Result<Scenario<T>> {
        let geometry = RadarGeometry::new(pts(&self.geometry.tx), pts(&self.geometry.rx))?;
        let w = &self.waveform;
        let waveform = WaveformParams {
            carrier: T::lit(w.fc),
            pri: T::lit(w.pri),
            pulse_duration: T::lit(w.pulse_duration),
            sample_period: T::lit(w.sample_period),
            samples: w.samples,
            pulses: w.pulses,
            time_base: w.time_base,
        };
        let g = &self.grid;
        let grid = EstimationGrid::new(lits(&g.x), lits(&g.y), lits(&g.vx), lits(&g.vy))?;
        let targets = self
            .targets
            .iter()
            .map(|t| Target {
                position: [T::lit(t.p[0]), T::lit(t.p[1])],
                velocity: [T::lit(t.v[0]), T::lit(t.v[1])],
                attenuation: match (&t.beta, &t.beta_dist) {
                    (Some(b), _) => Attenuation::Fixed(b.iter().map(|z| Complex::new(T::lit(z.re), T::lit(z.im))).collect()),
                    (None, Some(law)) => Attenuation::Random(BetaDistribution {
                        mean: T::lit(law.mean),
                        var: T::lit(law.var),
                    }),
                    (None, None) => Attenuation::Random(BetaDistribution::default()),
                },
            })
            .collect();
        let mt = geometry.mt();
        let total = T::lit(self.total_energy.unwrap_or(mt as f64));
        let powers = match &self.powers {
            Some(p) => PowerAllocation::new(lits(p), total)?,
            None => PowerAllocation::uniform(mt, total),
        };
        let scenario = Scenario {
            geometry,
            waveform,
            grid,
            targets,
            enr_db: T::lit(self.enr_db),
            powers,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_scenario<T: Real>(s: &Scenario<T>) -> Self {
        let w = &s.waveform;
        let [x, y, vx, vy] = s.grid.axes();
        let uniform = PowerAllocation::uniform(s.geometry.mt(), s.powers.total_energy());
        ScenarioFile {
            geometry: GeometryFile {
                tx: s.geometry.tx().iter().map(|&p| pair(p)).collect(),
                rx: s.geometry.rx().iter().map(|&p| pair(p)).collect(),
            },
            waveform: WaveformFile {
                fc: w.carrier.as_f64(),
                pri: w.pri.as_f64(),
                pulse_duration: w.pulse_duration.as_f64(),
                sample_period: w.sample_period.as_f64(),
                samples: w.samples,
                pulses: w.pulses,
                time_base: w.time_base,
            },
            grid: GridFile {
                x: f64s(x),
                y: f64s(y),
                vx: f64s(vx),
                vy: f64s(vy),
            },
            targets: s
                .targets
                .iter()
                .map(|t| {
                    let (beta, beta_dist) = match &t.attenuation {
                        Attenuation::Fixed(b) => (
                            Some(b.iter().map(|z| Complex::new(z.re.as_f64(), z.im.as_f64())).collect()),
                            None,
                        ),
                        Attenuation::Random(law) => (
                            None,
                            Some(BetaDistribution {
                                mean: law.mean.as_f64(),
                                var: law.var.as_f64(),
                            }),
                        ),
                    };
                    TargetFile {
                        p: pair(t.position),
                        v: pair(t.velocity),
                        beta,
                        beta_dist,
                    }
                })
                .collect(),
            enr_db: s.enr_db.as_f64(),
            powers: (s.powers != uniform).then(|| f64s(s.powers.amplitudes())),
            total_energy: Some(s.powers.total_energy().as_f64()),
        }
    }

    /// SHA-256 of the compact JSON encoding.
    pub fn hash(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        Sha256::digest(&bytes).into()
    }
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioFile> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn load_scenario<T: Real>(path: &Path) -> Result<Scenario<T>> {
    load_scenario_file(path)?.to_scenario()
}

pub fn save_scenario<T: Real>(path: &Path, scenario: &Scenario<T>) -> Result<()> {
    let text = serde_json::to_string_pretty(&ScenarioFile::from_scenario(scenario))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn scenario_hash<T: Real>(scenario: &Scenario<T>) -> [u8; 32] {
    ScenarioFile::from_scenario(scenario).hash()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Element types storable in a matrix file.
pub trait MatrixElement: Copy {
    const DTYPE: u8;
    const SIZE: usize;
    fn put(self, out: &mut Vec<u8>);
    fn get(bytes: &[u8]) -> Self;
}

macro_rules! real_element {
    ($t:ty, $tag:expr) => {
        impl MatrixElement for $t {
            const DTYPE: u8 = $tag;
            const SIZE: usize = std::mem::size_of::<$t>();
            fn put(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
            fn get(bytes: &[u8]) -> Self {
                <$t>::from_le_bytes(bytes.try_into().expect("element width"))
            }
        }

        impl MatrixElement for Complex<$t> {
            const DTYPE: u8 = $tag + 1;
            const SIZE: usize = 2 * std::mem::size_of::<$t>();
            fn put(self, out: &mut Vec<u8>) {
                self.re.put(out);
                self.im.put(out);
            }
            fn get(bytes: &[u8]) -> Self {
                let h = bytes.len() / 2;
                Complex::new(<$t>::get(&bytes[..h]), <$t>::get(&bytes[h..]))
            }
        }
    };
}

real_element!(f64, 1);
real_element!(f32, 3);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixHeader {
    pub dtype: u8,
    pub rows: usize,
    pub cols: usize,
    pub tag: String,
    pub scenario_hash: [u8; 32],
}

pub fn encode_matrix<E: MatrixElement>(m: &Array2<E>, tag: &str, scenario_hash: &[u8; 32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + tag.len() + m.len() * E::SIZE);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(E::DTYPE);
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    out.extend_from_slice(&(tag.len() as u32).to_le_bytes());
    out.extend_from_slice(tag.as_bytes());
    out.extend_from_slice(scenario_hash);
    for &v in m.iter() {
        v.put(&mut out);
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated matrix file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_header(bytes: &[u8]) -> Result<(MatrixHeader, usize)> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dtype = c.take(1)?[0];
    let to_usize = |v: u64| usize::try_from(v).map_err(|_| Error::Format("dimension overflow".into()));
    let rows = to_usize(c.u64()?)?;
    let cols = to_usize(c.u64()?)?;
    let tag_len = c.u32()? as usize;
    let tag = String::from_utf8(c.take(tag_len)?.to_vec()).map_err(|_| Error::Format("tag is not UTF-8".into()))?;
    let scenario_hash: [u8; 32] = c.take(32)?.try_into().expect("32 bytes");
    Ok((
        MatrixHeader {
            dtype,
            rows,
            cols,
            tag,
            scenario_hash,
        },
        c.pos,
    ))
}

pub fn decode_matrix<E: MatrixElement>(bytes: &[u8]) -> Result<(Array2<E>, MatrixHeader)> {
    let (header, start) = decode_header(bytes)?;
    if header.dtype != E::DTYPE {
        return Err(Error::Format(format!(
            "element type {} does not match the requested type {}",
            header.dtype,
            E::DTYPE
        )));
    }
    let count = header
        .rows
        .checked_mul(header.cols)
        .ok_or_else(|| Error::Format("dimension overflow".into()))?;
    let payload = &bytes[start..];
    if payload.len() != count * E::SIZE {
        return Err(Error::Format(format!(
            "payload holds {} bytes, header implies {}",
            payload.len(),
            count * E::SIZE
        )));
    }
    let data = payload.chunks_exact(E::SIZE).map(E::get).collect();
    let m = Array2::from_shape_vec((header.rows, header.cols), data).map_err(|e| Error::Format(e.to_string()))?;
    Ok((m, header))
}

pub fn write_matrix<E: MatrixElement>(path: &Path, m: &Array2<E>, tag: &str, scenario_hash: &[u8; 32]) -> Result<()> {
    fs::write(path, encode_matrix(m, tag, scenario_hash))?;
    Ok(())
}

pub fn read_matrix<E: MatrixElement>(path: &Path) -> Result<(Array2<E>, MatrixHeader)> {
    decode_matrix(&fs::read(path)?)
}

fn check_hash(header: &MatrixHeader, expected: &[u8; 32]) -> Result<()> {
    if &header.scenario_hash != expected {
        return Err(Error::HashMismatch {
            expected: hex(&header.scenario_hash),
            found: hex(expected),
        });
    }
    Ok(())
}

pub fn save_dictionary<T: Real>(path: &Path, dict: &BlockDictionary<T>, scenario: &Scenario<T>) -> Result<()>
where
    Complex<T>: MatrixElement,
{
    write_matrix(path, &dict.matrix, RowLayout::TAG, &scenario_hash(scenario))
}

/// Reads a cached dictionary after checking it was built for `scenario`.
pub fn load_dictionary<T: Real>(path: &Path, scenario: &Scenario<T>) -> Result<BlockDictionary<T>>
where
    Complex<T>: MatrixElement,
{
    let (matrix, header) = read_matrix::<Complex<T>>(path)?;
    check_hash(&header, &scenario_hash(scenario))?;
    if header.tag != RowLayout::TAG {
        return Err(Error::Format(format!("unexpected row ordering {:?}", header.tag)));
    }
    let layout = RowLayout {
        pulses: scenario.waveform.pulses,
        samples: scenario.waveform.samples,
        receivers: scenario.geometry.nr(),
        transmitters: scenario.geometry.mt(),
    };
    let d = scenario.geometry.block_len();
    if matrix.nrows() != layout.rows() || matrix.ncols() != scenario.grid.len() * d {
        return Err(Error::Format(format!(
            "dictionary is {}x{}, scenario implies {}x{}",
            matrix.nrows(),
            matrix.ncols(),
            layout.rows(),
            scenario.grid.len() * d
        )));
    }
    Ok(BlockDictionary {
        matrix,
        blocks: scenario.grid.len(),
        block_len: d,
        layout,
    })
}

/// Loads the cached unit-power dictionary if present and valid, otherwise
/// builds it and refreshes the cache.
pub fn cached_unit_basis<T: Real>(path: &Path, scenario: &Scenario<T>) -> Result<BlockDictionary<T>>
where
    Complex<T>: MatrixElement,
{
    match load_dictionary(path, scenario) {
        Ok(d) => Ok(d),
        Err(e) => {
            log::info!("rebuilding dictionary cache {}: {e}", path.display());
            let d = unit_power_basis(scenario)?;
            save_dictionary(path, &d, scenario)?;
            Ok(d)
        }
    }
}

/// JSON written next to a measurement matrix file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiSidecar {
    pub rows: usize,
    pub cols: usize,
    pub scenario_hash: String,
    #[serde(flatten)]
    pub kind: MeasurementKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_violation: Option<f64>,
    /// Full eigenvalue spectrum of the designed `F`, descending.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverReport>,
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    p.into()
}

pub fn save_phi<T: Real + MatrixElement>(
    path: &Path,
    phi: &MeasurementMatrix<T>,
    scenario: &Scenario<T>,
    sidecar: &PhiSidecar,
) -> Result<()> {
    write_matrix(path, &phi.matrix, PHI_TAG, &scenario_hash(scenario))?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(sidecar)? + "\n")?;
    Ok(())
}

/// Reads φ, checking the scenario hash and the column count.
pub fn load_phi<T: Real + MatrixElement>(path: &Path, scenario: &Scenario<T>) -> Result<MeasurementMatrix<T>> {
    let (matrix, header) = read_matrix::<T>(path)?;
    check_hash(&header, &scenario_hash(scenario))?;
    if header.tag != PHI_TAG {
        return Err(Error::Format(format!("unexpected matrix tag {:?}", header.tag)));
    }
    let rows = scenario.waveform.pulses * scenario.waveform.samples * scenario.geometry.block_len();
    if matrix.ncols() != rows {
        return Err(invalid("measurement matrix", format!("{} columns, scenario has {rows} rows", matrix.ncols())));
    }
    let kind = fs::read_to_string(sidecar_path(path))
        .ok()
        .and_then(|s| serde_json::from_str::<PhiSidecar>(&s).ok())
        .map_or(MeasurementKind::Other, |s| s.kind);
    MeasurementMatrix::new(matrix, kind)
}
