//! Complex channel tensors indexed `[snapshot][frequency][antenna]`.
//!
//! The antenna axis is stored in physical element order (row-major over the
//! array, `row * cols + col`). [`select_antennas`] maps canonical antenna
//! numbers onto that axis through an [`ArrayGeometry`], and its output is a
//! tensor whose antenna axis follows the canonical order of the selection.

use num_complex::Complex64;
use thiserror::Error;

use crate::ingest::ArrayGeometry;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("tensor dimensions must be positive (got N={snapshots}, F={freqs}, M={antennas})")]
    EmptyShape {
        snapshots: usize,
        freqs: usize,
        antennas: usize,
    },
    #[error("data length {got} does not match N*F*M = {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite sample at (n={snapshot}, f={freq}, m={antenna})")]
    NonFinite {
        snapshot: usize,
        freq: usize,
        antenna: usize,
    },
    #[error("antenna range {start}..{end} out of bounds for {antennas} antennas")]
    AntennaOutOfBounds {
        start: usize,
        end: usize,
        antennas: usize,
    },
    #[error("geometry has {geometry} elements but tensor has {tensor} antennas")]
    GeometryMismatch { geometry: usize, tensor: usize },
    #[error("window {start}+{length} exceeds {snapshots} snapshots")]
    WindowOutOfBounds {
        start: usize,
        length: usize,
        snapshots: usize,
    },
    #[error("frequency index {freq} out of bounds for {freqs} frequencies")]
    FreqOutOfBounds { freq: usize, freqs: usize },
}

/// Channel estimates for one node position.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    position_id: String,
    snapshots: usize,
    freqs: usize,
    antennas: usize,
    data: Vec<Complex64>,
}

impl ChannelTensor {
    /// Builds a tensor from snapshot-major data, rejecting empty shapes and
    /// non-finite samples.
    pub fn new(
        position_id: impl Into<String>,
        snapshots: usize,
        freqs: usize,
        antennas: usize,
        data: Vec<Complex64>,
    ) -> Result<Self, TensorError> {
        if snapshots == 0 || freqs == 0 || antennas == 0 {
            return Err(TensorError::EmptyShape {
                snapshots,
                freqs,
                antennas,
            });
        }
        let expected = snapshots * freqs * antennas;
        if data.len() != expected {
            return Err(TensorError::LengthMismatch {
                expected,
                got: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(TensorError::NonFinite {
                snapshot: idx / (freqs * antennas),
                freq: (idx / antennas) % freqs,
                antenna: idx % antennas,
            });
        }
        Ok(Self {
            position_id: position_id.into(),
            snapshots,
            freqs,
            antennas,
            data,
        })
    }

    /// Builds a tensor by evaluating `f(n, f, m)` for every index.
    pub fn from_fn(
        position_id: impl Into<String>,
        snapshots: usize,
        freqs: usize,
        antennas: usize,
        mut f: impl FnMut(usize, usize, usize) -> Complex64,
    ) -> Result<Self, TensorError> {
        let mut data = Vec::with_capacity(snapshots * freqs * antennas);
        for n in 0..snapshots {
            for fi in 0..freqs {
                for m in 0..antennas {
                    data.push(f(n, fi, m));
                }
            }
        }
        Self::new(position_id, snapshots, freqs, antennas, data)
    }

    pub fn position_id(&self) -> &str {
        &self.position_id
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn freqs(&self) -> usize {
        self.freqs
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    #[inline]
    pub fn sample(&self, n: usize, f: usize, m: usize) -> Complex64 {
        self.data[(n * self.freqs + f) * self.antennas + m]
    }

    /// The antenna vector observed at snapshot `n`, frequency `f`.
    #[inline]
    pub fn vector(&self, n: usize, f: usize) -> &[Complex64] {
        let start = (n * self.freqs + f) * self.antennas;
        &self.data[start..start + self.antennas]
    }

    /// Iterates over all `(n, f)` antenna vectors in snapshot-major order.
    pub fn vectors(&self) -> std::slice::ChunksExact<'_, Complex64> {
        self.data.chunks_exact(self.antennas)
    }

    pub fn with_position_id(mut self, id: impl Into<String>) -> Self {
        self.position_id = id.into();
        self
    }

    /// Copies the snapshots covered by `window`.
    pub fn slice_window(&self, window: TimeWindow) -> Result<ChannelTensor, TensorError> {
        window.check(self.snapshots)?;
        let stride = self.freqs * self.antennas;
        let data = self.data[window.start * stride..(window.start + window.length) * stride].to_vec();
        Ok(ChannelTensor {
            position_id: self.position_id.clone(),
            snapshots: window.length,
            freqs: self.freqs,
            antennas: self.antennas,
            data,
        })
    }

    /// Keeps the leading `count` antennas of the stored axis.
    pub fn leading_antennas(&self, count: usize) -> Result<ChannelTensor, TensorError> {
        if count == 0 || count > self.antennas {
            return Err(TensorError::AntennaOutOfBounds {
                start: 0,
                end: count,
                antennas: self.antennas,
            });
        }
        let data = self
            .vectors()
            .flat_map(|v| v[..count].iter().copied())
            .collect();
        Ok(ChannelTensor {
            position_id: self.position_id.clone(),
            snapshots: self.snapshots,
            freqs: self.freqs,
            antennas: count,
            data,
        })
    }

    pub(crate) fn map_samples(&self, f: impl Fn(Complex64) -> Complex64) -> ChannelTensor {
        ChannelTensor {
            position_id: self.position_id.clone(),
            snapshots: self.snapshots,
            freqs: self.freqs,
            antennas: self.antennas,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }
}

/// A contiguous run of snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeWindow {
    pub start: usize,
    pub length: usize,
}

impl TimeWindow {
    pub fn new(start: usize, length: usize) -> Self {
        Self { start, length }
    }

    pub fn check(&self, snapshots: usize) -> Result<(), TensorError> {
        if self.length == 0 || self.start + self.length > snapshots {
            return Err(TensorError::WindowOutOfBounds {
                start: self.start,
                length: self.length,
                snapshots,
            });
        }
        Ok(())
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.length
    }
}

/// Restricts `tensor` to the antennas numbered `start_index..start_index + count`
/// under the geometry's canonical numbering.
pub fn select_antennas(
    tensor: &ChannelTensor,
    geometry: &ArrayGeometry,
    count: usize,
    start_index: usize,
) -> Result<ChannelTensor, TensorError> {
    let m = tensor.antennas;
    if geometry.num_elements() != m {
        return Err(TensorError::GeometryMismatch {
            geometry: geometry.num_elements(),
            tensor: m,
        });
    }
    if count == 0 || start_index + count > m {
        return Err(TensorError::AntennaOutOfBounds {
            start: start_index,
            end: start_index + count,
            antennas: m,
        });
    }
    let physical: Vec<usize> = (start_index..start_index + count)
        .map(|idx| geometry.physical_index(idx))
        .collect();
    let mut data = Vec::with_capacity(tensor.snapshots * tensor.freqs * count);
    for v in tensor.vectors() {
        data.extend(physical.iter().map(|&p| v[p]));
    }
    Ok(ChannelTensor {
        position_id: tensor.position_id.clone(),
        snapshots: tensor.snapshots,
        freqs: tensor.freqs,
        antennas: count,
        data,
    })
}

/// Splits the snapshot axis into consecutive non-overlapping windows of
/// `window_length`; a shorter trailing remainder is dropped.
pub fn segment_windows(tensor: &ChannelTensor, window_length: usize) -> Vec<TimeWindow> {
    segment_snapshots(tensor.snapshots, window_length)
}

pub(crate) fn segment_snapshots(snapshots: usize, window_length: usize) -> Vec<TimeWindow> {
    if window_length == 0 {
        return Vec::new();
    }
    (0..snapshots / window_length)
        .map(|i| TimeWindow::new(i * window_length, window_length))
        .collect()
}
