//! Channel metrics: normalization, gain statistics and hardening, pairwise
//! correlation, joint orthogonality, eigenstructure and chordal distance.

use num_complex::Complex64;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::ingest::ArrayGeometry;
use crate::linalg::{self, CMatrix, EigenSpectrum, HermitianMatrix, LinalgError};
use crate::tensor::{select_antennas, ChannelTensor, TensorError, TimeWindow};

/// Columns of an eigenspace basis must be orthonormal to this Frobenius
/// tolerance.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("eigenspace of dimension {requested} requested but rank is {rank}")]
    InsufficientRank { rank: usize, requested: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Summation by recursive halving, so the rounding error grows with
/// `log n` and the result depends only on the input order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        values.iter().sum()
    } else {
        let (a, b) = values.split_at(values.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Power expressed in dB, with an explicit marker for values at or below
/// the reporting floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decibel {
    Value(f64),
    Floor,
}

/// Linear power below which dB values are reported as [`Decibel::Floor`].
pub const DB_FLOOR_LINEAR: f64 = 1e-15;
/// Numeric stand-in written to output files for [`Decibel::Floor`].
pub const DB_FLOOR_SENTINEL: f64 = -150.0;

impl Decibel {
    /// `10 log10(power)`, or `Floor` when the power is not positive.
    pub fn from_power(power: f64) -> Self {
        if power > 0.0 {
            Decibel::Value(10.0 * power.log10())
        } else {
            Decibel::Floor
        }
    }

    pub fn from_power_floored(power: f64, floor: f64) -> Self {
        if power < floor {
            Decibel::Floor
        } else {
            Self::from_power(power)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Decibel::Value(v) => Some(v),
            Decibel::Floor => None,
        }
    }

    /// The value written to files.
    pub fn reported(self) -> f64 {
        self.value().unwrap_or(DB_FLOOR_SENTINEL)
    }
}

impl Serialize for Decibel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.reported())
    }
}

/// A channel tensor scaled to unit average gain.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedTensor(ChannelTensor);

impl NormalizedTensor {
    pub fn tensor(&self) -> &ChannelTensor {
        &self.0
    }

    pub fn into_tensor(self) -> ChannelTensor {
        self.0
    }

    /// Snapshots of `window`, still normalized with the parent's factor.
    pub fn window(&self, window: TimeWindow) -> Result<NormalizedTensor, MetricsError> {
        Ok(NormalizedTensor(self.0.slice_window(window)?))
    }

    pub(crate) fn assume_normalized(tensor: ChannelTensor) -> Self {
        NormalizedTensor(tensor)
    }
}

fn mean_power(tensor: &ChannelTensor) -> f64 {
    let powers: Vec<f64> = tensor.data().iter().map(|z| z.norm_sqr()).collect();
    pairwise_sum(&powers) / powers.len() as f64
}

/// Scales the tensor so that the mean of `|h|^2` over snapshots,
/// frequencies and antennas equals one.
pub fn normalize(tensor: &ChannelTensor) -> Result<NormalizedTensor, MetricsError> {
    let p = mean_power(tensor);
    if p <= 0.0 {
        return Err(MetricsError::Degenerate(format!(
            "position {} has zero channel energy",
            tensor.position_id()
        )));
    }
    let inv = 1.0 / p.sqrt();
    Ok(NormalizedTensor(tensor.map_samples(|z| z * inv)))
}

/// Instantaneous channel gain per `(n, f)`, snapshot-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSeries {
    pub values: Vec<f64>,
    pub antenna_count: usize,
}

/// `G(n, f) = (1/M) sum_m |h_m(n, f)|^2` for every `(n, f)`.
pub fn instantaneous_gain(tensor: &NormalizedTensor) -> GainSeries {
    let t = tensor.tensor();
    let m = t.antennas() as f64;
    GainSeries {
        values: t
            .vectors()
            .map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>() / m)
            .collect(),
        antenna_count: t.antennas(),
    }
}

pub fn mean_gain(series: &GainSeries) -> Result<f64, MetricsError> {
    if series.values.is_empty() {
        return Err(MetricsError::Degenerate("empty gain series".into()));
    }
    Ok(pairwise_sum(&series.values) / series.values.len() as f64)
}

/// Population standard deviation of the gain (divisor `N F`).
pub fn gain_std(series: &GainSeries) -> Result<f64, MetricsError> {
    if series.values.len() < 2 {
        return Err(MetricsError::Degenerate(format!(
            "gain series needs at least 2 values, got {}",
            series.values.len()
        )));
    }
    let mu = mean_gain(series)?;
    let sq: Vec<f64> = series.values.iter().map(|g| (g - mu) * (g - mu)).collect();
    Ok((pairwise_sum(&sq) / sq.len() as f64).sqrt())
}

/// Gain series of the first `m` canonical antennas, rescaled to unit mean.
pub fn subset_gain(
    tensor: &NormalizedTensor,
    geometry: &ArrayGeometry,
    m: usize,
) -> Result<GainSeries, MetricsError> {
    let subset = NormalizedTensor(select_antennas(tensor.tensor(), geometry, m, 0)?);
    let mut series = instantaneous_gain(&subset);
    let mu = mean_gain(&series)?;
    if mu <= 0.0 {
        return Err(MetricsError::Degenerate(format!(
            "first {m} antennas carry no energy"
        )));
    }
    series.values.iter_mut().for_each(|g| *g /= mu);
    Ok(series)
}

/// Channel hardening of `m` antennas relative to one: `10 log10(sigma_1 / sigma_m)`.
pub fn hardening_db(
    tensor: &NormalizedTensor,
    geometry: &ArrayGeometry,
    m: usize,
) -> Result<f64, MetricsError> {
    if m == 0 || m > tensor.tensor().antennas() {
        return Err(MetricsError::InvalidInput(format!(
            "antenna count {m} outside 1..={}",
            tensor.tensor().antennas()
        )));
    }
    let sigma_1 = gain_std(&subset_gain(tensor, geometry, 1)?)?;
    let sigma_m = gain_std(&subset_gain(tensor, geometry, m)?)?;
    if sigma_m == 0.0 || sigma_1 == 0.0 {
        return Err(MetricsError::Degenerate(
            "gain standard deviation is zero".into(),
        ));
    }
    Ok(10.0 * (sigma_1 / sigma_m).log10())
}

/// `Var(||h||^2) / E[||h||^2]^2` over `(n, f)` for the first `m` antennas,
/// the quantity whose decay to zero defines channel hardening.
pub fn hardening_ratio(
    tensor: &NormalizedTensor,
    geometry: &ArrayGeometry,
    m: usize,
) -> Result<f64, MetricsError> {
    let series = subset_gain(tensor, geometry, m)?;
    let sigma = gain_std(&series)?;
    // The series has unit mean, so the ratio is the variance itself.
    Ok(sigma * sigma)
}

/// `|hi^H hj| / (||hi|| ||hj||)`.
pub fn correlation_coefficient(hi: &[Complex64], hj: &[Complex64]) -> Result<f64, MetricsError> {
    if hi.len() != hj.len() || hi.is_empty() {
        return Err(MetricsError::InvalidInput(format!(
            "vectors must have equal nonzero length ({} vs {})",
            hi.len(),
            hj.len()
        )));
    }
    let ni: f64 = hi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nj: f64 = hj.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if ni == 0.0 || nj == 0.0 {
        return Err(MetricsError::Degenerate("zero-norm channel vector".into()));
    }
    if hi.len() == 1 {
        // Nonzero scalars are always parallel.
        return Ok(1.0);
    }
    let inner: Complex64 = hi.iter().zip(hj).map(|(a, b)| a.conj() * b).sum();
    Ok((inner.norm() / (ni * nj)).min(1.0))
}

/// `R = (1/L) sum_{n in window} h(n, f) h(n, f)^H`.
pub fn correlation_matrix(
    tensor: &NormalizedTensor,
    window: TimeWindow,
    f: usize,
) -> Result<HermitianMatrix, MetricsError> {
    let t = tensor.tensor();
    window.check(t.snapshots())?;
    if f >= t.freqs() {
        return Err(TensorError::FreqOutOfBounds {
            freq: f,
            freqs: t.freqs(),
        }
        .into());
    }
    let m = t.antennas();
    let mut r = CMatrix::zeros(m, m);
    for n in window.range() {
        let h = t.vector(n, f);
        for i in 0..m {
            r[(i, i)].re += h[i].norm_sqr();
            for j in i + 1..m {
                r[(i, j)] += h[i] * h[j].conj();
            }
        }
    }
    let inv = 1.0 / window.length as f64;
    for i in 0..m {
        r[(i, i)] *= inv;
        for j in i + 1..m {
            r[(i, j)] *= inv;
            r[(j, i)] = r[(i, j)].conj();
        }
    }
    Ok(HermitianMatrix::from_exact(r))
}

/// `lambda_min / lambda_max` of the Gram matrix of the stacked channels.
pub fn inverse_condition_number(channels: &CMatrix) -> Result<f64, MetricsError> {
    for j in 0..channels.cols() {
        if (0..channels.rows()).all(|i| channels[(i, j)] == Complex64::new(0.0, 0.0)) {
            return Err(MetricsError::Degenerate(format!("channel column {j} is zero")));
        }
    }
    let spectrum = linalg::eigh(&linalg::gram(channels)?)?;
    let values = spectrum.nonnegative_values();
    let max = values[0];
    let min = values[values.len() - 1];
    if min == max {
        return Ok(1.0);
    }
    Ok((min / max).clamp(0.0, 1.0))
}

fn check_orthonormal(u: &CMatrix, name: &str) -> Result<(), MetricsError> {
    let p = u.cols();
    let err = linalg::frobenius_norm_sq(&u.adjoint_mul(u)?.sub(&CMatrix::identity(p))?).sqrt();
    if !(err <= ORTHONORMAL_TOL) {
        return Err(MetricsError::InvalidInput(format!(
            "{name} columns are not orthonormal (error {err:e})"
        )));
    }
    Ok(())
}

fn check_subspace_pair(ui: &CMatrix, uj: &CMatrix) -> Result<(), MetricsError> {
    if ui.rows() != uj.rows() || ui.cols() != uj.cols() {
        return Err(MetricsError::InvalidInput(format!(
            "eigenspace shapes differ: {}x{} vs {}x{}",
            ui.rows(),
            ui.cols(),
            uj.rows(),
            uj.cols()
        )));
    }
    check_orthonormal(ui, "Ui")?;
    check_orthonormal(uj, "Uj")
}

/// Chordal distance `||Ui Ui^H - Uj Uj^H||_F^2` between the column spaces
/// of two orthonormal `M x p` bases, evaluated as `2p - 2 ||Ui^H Uj||_F^2`.
pub fn chordal_distance(ui: &CMatrix, uj: &CMatrix) -> Result<f64, MetricsError> {
    check_subspace_pair(ui, uj)?;
    let p = ui.cols() as f64;
    let overlap = linalg::frobenius_norm_sq(&ui.adjoint_mul(uj)?);
    Ok((2.0 * p - 2.0 * overlap).clamp(0.0, 2.0 * p))
}

/// Chordal distance through the explicit `M x M` projectors.
pub fn chordal_distance_projector(ui: &CMatrix, uj: &CMatrix) -> Result<f64, MetricsError> {
    check_subspace_pair(ui, uj)?;
    let pi = ui.matmul(&ui.adjoint())?;
    let pj = uj.matmul(&uj.adjoint())?;
    Ok(linalg::frobenius_norm_sq(&pi.sub(&pj)?))
}

/// The `p` eigenvectors with the largest eigenvalues, as columns.
pub fn dominant_eigenspace(spectrum: &EigenSpectrum, p: usize) -> Result<CMatrix, MetricsError> {
    if p == 0 || p > spectrum.dim() {
        return Err(MetricsError::InvalidInput(format!(
            "eigenspace dimension {p} outside 1..={}",
            spectrum.dim()
        )));
    }
    if spectrum.values()[p - 1] <= 0.0 {
        return Err(MetricsError::InsufficientRank {
            rank: spectrum.rank(),
            requested: p,
        });
    }
    Ok(spectrum.basis().leading_columns(p))
}

/// Share of the total eigenvalue mass carried by the `p` largest values.
pub fn eigen_energy_fraction(spectrum: &EigenSpectrum, p: usize) -> Result<f64, MetricsError> {
    if p == 0 || p > spectrum.dim() {
        return Err(MetricsError::InvalidInput(format!(
            "eigenspace dimension {p} outside 1..={}",
            spectrum.dim()
        )));
    }
    let values = spectrum.nonnegative_values();
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(MetricsError::Degenerate("spectrum has zero total energy".into()));
    }
    Ok((values[..p].iter().sum::<f64>() / total).min(1.0))
}

/// Time-averaged gain of each antenna on the un-normalized tensor, in dB.
pub fn per_antenna_mean_gain_db(tensor: &ChannelTensor) -> Vec<Decibel> {
    let m = tensor.antennas();
    let count = (tensor.snapshots() * tensor.freqs()) as f64;
    let mut acc = vec![0.0; m];
    for v in tensor.vectors() {
        for (a, z) in acc.iter_mut().zip(v) {
            *a += z.norm_sqr();
        }
    }
    acc.into_iter().map(|p| Decibel::from_power(p / count)).collect()
}

/// Coherent combining gain of `m` antennas, `10 log10(m)`.
pub fn array_gain_db(m: usize) -> f64 {
    10.0 * (m as f64).log10()
}
