//! Array geometry, canonical antenna numbering and the dataset container.
//!
//! A dataset is a directory holding `manifest.json` and one raw binary file
//! per position. Binary files are little-endian interleaved `(re, im)` pairs
//! in `[n][f][m]` order, either `f64` (`.cf64`) or `f32` (`.cf32`). The
//! antenna axis is in physical element order, `row * cols + col`.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{ChannelTensor, TensorError};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse manifest {path}: {message}")]
    ManifestParse { path: PathBuf, message: String },
    #[error("manifest version {found:?} is not supported (expected {expected:?})")]
    VersionMismatch { found: String, expected: String },
    #[error("invalid array geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("duplicate position id {0:?}")]
    DuplicateId(String),
    #[error("position {id}: file {path} is missing")]
    MissingFile { id: String, path: PathBuf },
    #[error("position {id}: unsupported file extension in {path} (expected .cf64 or .cf32)")]
    UnsupportedFileType { id: String, path: PathBuf },
    #[error("position {id}: file is {actual} bytes, expected {expected}")]
    SizeMismatch { id: String, expected: u64, actual: u64 },
    #[error("position {id}: non-finite sample at (n={snapshot}, f={freq}, m={antenna})")]
    NonFinite {
        id: String,
        snapshot: usize,
        freq: usize,
        antenna: usize,
    },
    #[error("position {id}: tensor shape {got:?} does not match manifest {expected:?}")]
    ShapeMismatch {
        id: String,
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
    #[error("unknown position {0:?}")]
    UnknownPosition(String),
    #[error("position {id}: {source}")]
    Tensor {
        id: String,
        #[source]
        source: TensorError,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrayKind {
    Ula,
    Ura,
}

/// Element layout of the base-station array together with the canonical
/// numbering used for subsequent-element selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArraySpec", into = "ArraySpec")]
pub struct ArrayGeometry {
    kind: ArrayKind,
    rows: usize,
    cols: usize,
    spacing_wavelengths: f64,
    /// `numbering[i]` is the `(row, col)` of canonical antenna `i`.
    numbering: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArraySpec {
    kind: ArrayKind,
    rows: usize,
    cols: usize,
    #[serde(default = "default_spacing")]
    spacing_wavelengths: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    numbering: Option<Vec<[usize; 2]>>,
}

fn default_spacing() -> f64 {
    0.5
}

impl TryFrom<ArraySpec> for ArrayGeometry {
    type Error = IngestError;

    fn try_from(spec: ArraySpec) -> Result<Self, Self::Error> {
        let mut g = ArrayGeometry {
            kind: spec.kind,
            rows: spec.rows,
            cols: spec.cols,
            spacing_wavelengths: spec.spacing_wavelengths,
            numbering: Vec::new(),
        };
        g.numbering = match spec.numbering {
            Some(n) => n.into_iter().map(|[r, c]| (r, c)).collect(),
            None => default_numbering(spec.kind, spec.rows, spec.cols),
        };
        g.validate()?;
        Ok(g)
    }
}

impl From<ArrayGeometry> for ArraySpec {
    fn from(g: ArrayGeometry) -> Self {
        ArraySpec {
            kind: g.kind,
            rows: g.rows,
            cols: g.cols,
            spacing_wavelengths: g.spacing_wavelengths,
            numbering: Some(g.numbering.iter().map(|&(r, c)| [r, c]).collect()),
        }
    }
}

fn default_numbering(kind: ArrayKind, rows: usize, cols: usize) -> Vec<(usize, usize)> {
    match kind {
        ArrayKind::Ula => (0..rows * cols).map(|i| (0, i)).collect(),
        // Column by column, ascending within each column.
        ArrayKind::Ura => (0..cols)
            .flat_map(|c| (0..rows).map(move |r| (r, c)))
            .collect(),
    }
}

/// Builds the default geometry and numbering for an array. A ULA is always
/// laid out as a single row of `rows * cols` elements.
pub fn canonical_numbering(kind: ArrayKind, rows: usize, cols: usize) -> ArrayGeometry {
    let (rows, cols) = match kind {
        ArrayKind::Ula => (1, rows * cols),
        ArrayKind::Ura => (rows, cols),
    };
    ArrayGeometry {
        kind,
        rows,
        cols,
        spacing_wavelengths: default_spacing(),
        numbering: default_numbering(kind, rows, cols),
    }
}

impl ArrayGeometry {
    pub fn ula(elements: usize) -> Self {
        canonical_numbering(ArrayKind::Ula, 1, elements)
    }

    pub fn ura(rows: usize, cols: usize) -> Self {
        canonical_numbering(ArrayKind::Ura, rows, cols)
    }

    /// Replaces the canonical numbering, e.g. with one read off a
    /// hardware drawing.
    pub fn with_numbering(mut self, numbering: Vec<(usize, usize)>) -> Result<Self, IngestError> {
        self.numbering = numbering;
        self.validate()?;
        Ok(self)
    }

    pub fn with_spacing(mut self, spacing_wavelengths: f64) -> Self {
        self.spacing_wavelengths = spacing_wavelengths;
        self
    }

    pub fn kind(&self) -> ArrayKind {
        self.kind
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn spacing_wavelengths(&self) -> f64 {
        self.spacing_wavelengths
    }

    pub fn num_elements(&self) -> usize {
        self.rows * self.cols
    }

    pub fn numbering(&self) -> &[(usize, usize)] {
        &self.numbering
    }

    /// `(row, col)` of canonical antenna `index`.
    pub fn element(&self, index: usize) -> (usize, usize) {
        self.numbering[index]
    }

    /// Position of canonical antenna `index` on the stored antenna axis.
    pub fn physical_index(&self, index: usize) -> usize {
        let (r, c) = self.numbering[index];
        r * self.cols + c
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(IngestError::InvalidGeometry(format!(
                "array must have at least one row and column (got {}x{})",
                self.rows, self.cols
            )));
        }
        if self.kind == ArrayKind::Ula && self.rows != 1 {
            return Err(IngestError::InvalidGeometry(format!(
                "ULA must have exactly one row (got {})",
                self.rows
            )));
        }
        if !(self.spacing_wavelengths.is_finite() && self.spacing_wavelengths > 0.0) {
            return Err(IngestError::InvalidGeometry(
                "element spacing must be positive".into(),
            ));
        }
        let m = self.num_elements();
        if self.numbering.len() != m {
            return Err(IngestError::InvalidGeometry(format!(
                "numbering has {} entries for {m} elements",
                self.numbering.len()
            )));
        }
        let mut seen = vec![false; m];
        for &(r, c) in &self.numbering {
            if r >= self.rows || c >= self.cols {
                return Err(IngestError::InvalidGeometry(format!(
                    "numbering entry ({r}, {c}) outside {}x{} array",
                    self.rows, self.cols
                )));
            }
            let idx = r * self.cols + c;
            if seen[idx] {
                return Err(IngestError::InvalidGeometry(format!(
                    "element ({r}, {c}) numbered twice"
                )));
            }
            seen[idx] = true;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionEntry {
    pub id: String,
    #[serde(default)]
    pub label: String,
    pub los: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_label: Option<String>,
    pub num_snapshots: usize,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: String,
    pub carrier_hz: f64,
    pub num_freqs: usize,
    pub num_antennas: usize,
    pub snapshot_interval_s: f64,
    pub array: ArrayGeometry,
    pub positions: Vec<PositionEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SampleFormat {
    F64,
    F32,
}

impl SampleFormat {
    fn from_path(path: &str) -> Option<Self> {
        match Path::new(path).extension().and_then(|e| e.to_str()) {
            Some("cf64") => Some(SampleFormat::F64),
            Some("cf32") => Some(SampleFormat::F32),
            _ => None,
        }
    }

    fn bytes_per_sample(self) -> u64 {
        match self {
            SampleFormat::F64 => 16,
            SampleFormat::F32 => 8,
        }
    }
}

impl DatasetManifest {
    /// Manifest skeleton with the current format version and no positions.
    pub fn new(array: ArrayGeometry, num_freqs: usize, carrier_hz: f64, snapshot_interval_s: f64) -> Self {
        Self {
            version: FORMAT_VERSION.to_string(),
            carrier_hz,
            num_freqs,
            num_antennas: array.num_elements(),
            snapshot_interval_s,
            array,
            positions: Vec::new(),
        }
    }

    pub fn position(&self, id: &str) -> Option<&PositionEntry> {
        self.positions.iter().find(|p| p.id == id)
    }

    /// Checks everything that does not require touching the binary files.
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.version != FORMAT_VERSION {
            return Err(IngestError::VersionMismatch {
                found: self.version.clone(),
                expected: FORMAT_VERSION.to_string(),
            });
        }
        self.array.validate()?;
        if self.array.num_elements() != self.num_antennas {
            return Err(IngestError::InvalidManifest(format!(
                "array has {}x{} = {} elements but num_antennas is {}",
                self.array.rows(),
                self.array.cols(),
                self.array.num_elements(),
                self.num_antennas
            )));
        }
        if self.num_freqs == 0 {
            return Err(IngestError::InvalidManifest("num_freqs must be positive".into()));
        }
        if !(self.carrier_hz.is_finite() && self.carrier_hz > 0.0) {
            return Err(IngestError::InvalidManifest("carrier_hz must be positive".into()));
        }
        if !(self.snapshot_interval_s.is_finite() && self.snapshot_interval_s > 0.0) {
            return Err(IngestError::InvalidManifest(
                "snapshot_interval_s must be positive".into(),
            ));
        }
        let mut ids = HashSet::new();
        for p in &self.positions {
            if !ids.insert(p.id.as_str()) {
                return Err(IngestError::DuplicateId(p.id.clone()));
            }
            if p.num_snapshots == 0 {
                return Err(IngestError::InvalidManifest(format!(
                    "position {} has zero snapshots",
                    p.id
                )));
            }
            if SampleFormat::from_path(&p.file).is_none() {
                return Err(IngestError::UnsupportedFileType {
                    id: p.id.clone(),
                    path: PathBuf::from(&p.file),
                });
            }
        }
        Ok(())
    }

    fn expected_bytes(&self, p: &PositionEntry) -> u64 {
        let fmt = SampleFormat::from_path(&p.file).unwrap_or(SampleFormat::F64);
        fmt.bytes_per_sample() * (p.num_snapshots * self.num_freqs * self.num_antennas) as u64
    }
}

/// A dataset on disk. Tensors are decoded on demand and never cached.
#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    manifest: DatasetManifest,
}

fn read_manifest(root: &Path) -> Result<DatasetManifest, IngestError> {
    let path = root.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| IngestError::ManifestParse {
        path,
        message: e.to_string(),
    })
}

/// Opens a dataset, checking the manifest and the existence and size of
/// every binary file.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Dataset, IngestError> {
    let root = root.as_ref().to_path_buf();
    let manifest = read_manifest(&root)?;
    manifest.validate()?;
    let dataset = Dataset { root, manifest };
    for p in &dataset.manifest.positions {
        dataset.check_file(p)?;
    }
    Ok(dataset)
}

impl Dataset {
    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.manifest.array
    }

    pub fn position_ids(&self) -> impl Iterator<Item = &str> {
        self.manifest.positions.iter().map(|p| p.id.as_str())
    }

    pub fn len(&self) -> usize {
        self.manifest.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.positions.is_empty()
    }

    fn check_file(&self, p: &PositionEntry) -> Result<(), IngestError> {
        let path = self.root.join(&p.file);
        let meta = match fs::metadata(&path) {
            Ok(m) => m,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(IngestError::MissingFile {
                    id: p.id.clone(),
                    path,
                })
            }
            Err(e) => return Err(io_err(&path)(e)),
        };
        let expected = self.manifest.expected_bytes(p);
        if meta.len() != expected {
            return Err(IngestError::SizeMismatch {
                id: p.id.clone(),
                expected,
                actual: meta.len(),
            });
        }
        Ok(())
    }

    /// Reads and decodes the tensor of position `id`.
    pub fn tensor(&self, id: &str) -> Result<ChannelTensor, IngestError> {
        let p = self
            .manifest
            .position(id)
            .ok_or_else(|| IngestError::UnknownPosition(id.to_string()))?;
        self.check_file(p)?;
        let path = self.root.join(&p.file);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let expected = self.manifest.expected_bytes(p);
        if bytes.len() as u64 != expected {
            return Err(IngestError::SizeMismatch {
                id: p.id.clone(),
                expected,
                actual: bytes.len() as u64,
            });
        }
        let format = SampleFormat::from_path(&p.file).ok_or_else(|| IngestError::UnsupportedFileType {
            id: p.id.clone(),
            path: path.clone(),
        })?;
        let data = decode_samples(&bytes, format);
        let (n, f, m) = (p.num_snapshots, self.manifest.num_freqs, self.manifest.num_antennas);
        ChannelTensor::new(&p.id, n, f, m, data).map_err(|e| match e {
            TensorError::NonFinite {
                snapshot,
                freq,
                antenna,
            } => IngestError::NonFinite {
                id: p.id.clone(),
                snapshot,
                freq,
                antenna,
            },
            other => IngestError::Tensor {
                id: p.id.clone(),
                source: other,
            },
        })
    }
}

fn decode_samples(bytes: &[u8], format: SampleFormat) -> Vec<Complex64> {
    match format {
        SampleFormat::F64 => bytes
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect(),
        SampleFormat::F32 => bytes
            .chunks_exact(8)
            .map(|c| {
                Complex64::new(
                    f32::from_le_bytes(c[..4].try_into().unwrap()) as f64,
                    f32::from_le_bytes(c[4..].try_into().unwrap()) as f64,
                )
            })
            .collect(),
    }
}

fn encode_samples(data: &[Complex64], format: SampleFormat, out: &mut impl Write) -> std::io::Result<()> {
    for z in data {
        match format {
            SampleFormat::F64 => {
                out.write_all(&z.re.to_le_bytes())?;
                out.write_all(&z.im.to_le_bytes())?;
            }
            SampleFormat::F32 => {
                out.write_all(&(z.re as f32).to_le_bytes())?;
                out.write_all(&(z.im as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn write_atomically(path: &Path, write: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<(), IngestError> {
    let mut tmp_name = path.as_os_str().to_owned();
    tmp_name.push(".tmp");
    let tmp = PathBuf::from(tmp_name);
    let file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    let mut w = BufWriter::new(file);
    write(&mut w).map_err(io_err(&tmp))?;
    w.flush().map_err(io_err(&tmp))?;
    drop(w);
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Writes `manifest.json` and one binary file per position under `root`.
pub fn write_dataset(
    manifest: &DatasetManifest,
    tensors: &BTreeMap<String, ChannelTensor>,
    root: impl AsRef<Path>,
) -> Result<(), IngestError> {
    let root = root.as_ref();
    manifest.validate()?;
    for p in &manifest.positions {
        let t = tensors
            .get(&p.id)
            .ok_or_else(|| IngestError::UnknownPosition(p.id.clone()))?;
        let expected = (p.num_snapshots, manifest.num_freqs, manifest.num_antennas);
        let got = (t.snapshots(), t.freqs(), t.antennas());
        if expected != got {
            return Err(IngestError::ShapeMismatch {
                id: p.id.clone(),
                expected,
                got,
            });
        }
    }
    fs::create_dir_all(root).map_err(io_err(root))?;
    for p in &manifest.positions {
        let t = &tensors[&p.id];
        let format = SampleFormat::from_path(&p.file).unwrap_or(SampleFormat::F64);
        let path = root.join(&p.file);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        write_atomically(&path, |w| encode_samples(t.data(), format, w))?;
    }
    let json = serde_json::to_string_pretty(manifest).map_err(|e| IngestError::InvalidManifest(e.to_string()))?;
    write_atomically(&root.join(MANIFEST_FILE), |w| {
        w.write_all(json.as_bytes())?;
        w.write_all(b"\n")
    })
}

/// Outcome of checking one position.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionCheck {
    pub id: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    /// Manifest-level failure; when set no positions were checked.
    pub manifest_error: Option<String>,
    pub positions: Vec<PositionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.manifest_error.is_none() && self.positions.iter().all(|p| p.error.is_none())
    }
}

/// Runs every manifest, size and finiteness check, reporting per position
/// instead of stopping at the first failure.
pub fn validate_dataset(root: impl AsRef<Path>) -> ValidationReport {
    let root = root.as_ref().to_path_buf();
    let manifest = match read_manifest(&root).and_then(|m| m.validate().map(|_| m)) {
        Ok(m) => m,
        Err(e) => {
            return ValidationReport {
                manifest_error: Some(e.to_string()),
                positions: Vec::new(),
            }
        }
    };
    let dataset = Dataset { root, manifest };
    let positions = dataset
        .manifest
        .positions
        .iter()
        .map(|p| PositionCheck {
            id: p.id.clone(),
            error: dataset.tensor(&p.id).err().map(|e| e.to_string()),
        })
        .collect();
    ValidationReport {
        manifest_error: None,
        positions,
    }
}
