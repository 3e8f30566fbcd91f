//! Seeded synthetic channels and pilot-based channel estimation.
//!
//! Randomness comes from ChaCha8 keyed by `(seed, stream_id)`: the seed
//! selects the key and the stream id selects an independent keystream, so
//! any shard of a Monte Carlo run can be regenerated in isolation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMatrix, HermitianMatrix, LinalgError};
use crate::tensor::ChannelTensor;

/// Tolerance on the pilot energy `sum |phi_t|^2 = 1`.
pub const PILOT_ENERGY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid channel model: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Key of a reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    #[serde(default)]
    pub stream_id: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl RngSeed {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Derives the key of sub-stream `index`; distinct `(stream_id, index)`
    /// pairs map to distinct streams with overwhelming probability.
    pub fn child(&self, index: u64) -> RngSeed {
        RngSeed {
            seed: self.seed,
            stream_id: splitmix64(splitmix64(self.stream_id) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03)),
        }
    }
}

/// One circularly-symmetric complex Gaussian sample, `CN(0, 1)`, by
/// Box-Muller on two uniforms.
#[inline]
pub fn complex_normal(rng: &mut impl Rng) -> Complex64 {
    // 1 - U lies in (0, 1], keeping the logarithm finite.
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    let r = (-u1.ln()).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    Complex64::new(r * c, r * s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelKind {
    /// Independent `CN(0, 1)` samples on every axis.
    IidRayleigh,
    /// Antenna correlation `rho^|i - j|`, independent across `(n, f)`.
    KroneckerExponential { rho: f64 },
    /// Few plane waves on a half-wavelength ULA with fresh random phases
    /// per snapshot, plus white noise of power `noise_floor`.
    SparseMultipath {
        steering_angles: Vec<f64>,
        path_powers: Vec<f64>,
        noise_floor: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub kind: ModelKind,
    pub antennas: usize,
    pub snapshots: usize,
    pub freqs: usize,
}

impl ChannelModel {
    pub fn iid(antennas: usize, snapshots: usize, freqs: usize) -> Self {
        Self {
            kind: ModelKind::IidRayleigh,
            antennas,
            snapshots,
            freqs,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.antennas == 0 || self.snapshots == 0 || self.freqs == 0 {
            return Err(SynthError::Config(format!(
                "antennas, snapshots and freqs must be positive (got {}, {}, {})",
                self.antennas, self.snapshots, self.freqs
            )));
        }
        match &self.kind {
            ModelKind::IidRayleigh => Ok(()),
            ModelKind::KroneckerExponential { rho } => {
                if (0.0..1.0).contains(rho) {
                    Ok(())
                } else {
                    Err(SynthError::Config(format!("rho must lie in [0, 1), got {rho}")))
                }
            }
            ModelKind::SparseMultipath {
                steering_angles,
                path_powers,
                noise_floor,
            } => {
                if steering_angles.is_empty() {
                    return Err(SynthError::Config("multipath model needs at least one path".into()));
                }
                if steering_angles.len() != path_powers.len() {
                    return Err(SynthError::Config(format!(
                        "{} steering angles but {} path powers",
                        steering_angles.len(),
                        path_powers.len()
                    )));
                }
                if steering_angles.iter().any(|a| !a.is_finite()) {
                    return Err(SynthError::Config("steering angles must be finite".into()));
                }
                if path_powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(SynthError::Config("path powers must be non-negative".into()));
                }
                if !(noise_floor.is_finite() && *noise_floor >= 0.0) {
                    return Err(SynthError::Config("noise floor must be non-negative".into()));
                }
                Ok(())
            }
        }
    }
}

/// Half-wavelength ULA steering vector `a_m = exp(i pi m sin(theta))`.
pub fn steering_vector(antennas: usize, theta: f64) -> Vec<Complex64> {
    let k = PI * theta.sin();
    (0..antennas)
        .map(|m| Complex64::from_polar(1.0, k * m as f64))
        .collect()
}

/// A channel model with its derived quantities precomputed.
#[derive(Debug, Clone)]
pub struct ChannelGenerator {
    model: ChannelModel,
    prepared: Prepared,
}

#[derive(Debug, Clone)]
enum Prepared {
    Iid,
    Correlated { sqrt_corr: CMatrix },
    Multipath {
        /// Steering vectors already scaled by the path amplitude.
        paths: Vec<Vec<Complex64>>,
        noise_amp: f64,
    },
}

impl ChannelGenerator {
    pub fn new(model: &ChannelModel) -> Result<Self, SynthError> {
        model.validate()?;
        let m = model.antennas;
        let prepared = match &model.kind {
            ModelKind::IidRayleigh => Prepared::Iid,
            ModelKind::KroneckerExponential { rho } => {
                let r = CMatrix::from_fn(m, m, |i, j| {
                    Complex64::new(rho.powi(i.abs_diff(j) as i32), 0.0)
                });
                let spectrum = linalg::eigh(&HermitianMatrix::new(r)?)?;
                let u = spectrum.basis();
                let roots: Vec<f64> = spectrum.values().iter().map(|v| v.max(0.0).sqrt()).collect();
                let sqrt_corr = CMatrix::from_fn(m, m, |i, j| {
                    (0..m).map(|k| u[(i, k)] * roots[k] * u[(j, k)].conj()).sum()
                });
                Prepared::Correlated { sqrt_corr }
            }
            ModelKind::SparseMultipath {
                steering_angles,
                path_powers,
                noise_floor,
            } => Prepared::Multipath {
                paths: steering_angles
                    .iter()
                    .zip(path_powers)
                    .map(|(&theta, &p)| {
                        let amp = p.sqrt();
                        steering_vector(m, theta).into_iter().map(|a| a * amp).collect()
                    })
                    .collect(),
                noise_amp: noise_floor.sqrt(),
            },
        };
        Ok(Self {
            model: model.clone(),
            prepared,
        })
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    fn fill_gaussian(&self, rng: &mut impl Rng, out: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        match &self.prepared {
            Prepared::Iid | Prepared::Multipath { .. } => {
                out.iter_mut().for_each(|z| *z = complex_normal(rng));
            }
            Prepared::Correlated { sqrt_corr } => {
                scratch.clear();
                scratch.extend((0..out.len()).map(|_| complex_normal(rng)));
                for (i, z) in out.iter_mut().enumerate() {
                    *z = (0..scratch.len()).map(|k| sqrt_corr[(i, k)] * scratch[k]).sum();
                }
            }
        }
    }

    fn fill_multipath(
        paths: &[Vec<Complex64>],
        noise_amp: f64,
        phases: &[Complex64],
        rng: &mut impl Rng,
        out: &mut [Complex64],
    ) {
        for (m, z) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (path, ph) in paths.iter().zip(phases) {
                acc += path[m] * ph;
            }
            *z = acc + complex_normal(rng) * noise_amp;
        }
    }

    /// One full `[N][F][M]` tensor drawn from `rng`.
    pub fn tensor(&self, position_id: &str, rng: &mut impl Rng) -> ChannelTensor {
        let ChannelModel {
            antennas: m,
            snapshots: n,
            freqs: f,
            ..
        } = self.model;
        let mut data = vec![Complex64::new(0.0, 0.0); n * f * m];
        let mut scratch = Vec::with_capacity(m);
        match &self.prepared {
            Prepared::Multipath { paths, noise_amp } => {
                let mut phases = vec![Complex64::new(0.0, 0.0); paths.len()];
                for snapshot in data.chunks_exact_mut(f * m) {
                    for ph in phases.iter_mut() {
                        *ph = Complex64::from_polar(1.0, 2.0 * PI * rng.gen::<f64>());
                    }
                    for v in snapshot.chunks_exact_mut(m) {
                        Self::fill_multipath(paths, *noise_amp, &phases, rng, v);
                    }
                }
            }
            _ => {
                for v in data.chunks_exact_mut(m) {
                    self.fill_gaussian(rng, v, &mut scratch);
                }
            }
        }
        ChannelTensor::new(position_id, n, f, m, data).expect("generated samples are finite")
    }

    /// One independent channel vector of length `M`, as seen at a single
    /// `(n, f)` of a fresh position.
    pub fn vector(&self, rng: &mut impl Rng) -> Vec<Complex64> {
        let m = self.model.antennas;
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        match &self.prepared {
            Prepared::Multipath { paths, noise_amp } => {
                let phases: Vec<Complex64> = paths
                    .iter()
                    .map(|_| Complex64::from_polar(1.0, 2.0 * PI * rng.gen::<f64>()))
                    .collect();
                Self::fill_multipath(paths, *noise_amp, &phases, rng, &mut out);
            }
            _ => {
                let mut scratch = Vec::with_capacity(m);
                self.fill_gaussian(rng, &mut out, &mut scratch);
            }
        }
        out
    }
}

/// Draws a channel tensor from `model` on the stream keyed by `seed`.
pub fn generate(model: &ChannelModel, seed: RngSeed) -> Result<ChannelTensor, SynthError> {
    let gen = ChannelGenerator::new(model)?;
    Ok(gen.tensor(&format!("synth-{}-{}", seed.seed, seed.stream_id), &mut seed.rng()))
}

/// Simulates uplink pilot reception `y_m = h_m phi + w_m` with
/// `w ~ CN(0, noise_std^2)` per sample and returns the correlator output
/// `y_m phi^H`.
pub fn pilot_estimate(
    true_channel: &[Complex64],
    pilot: &[Complex64],
    noise_std: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>, SynthError> {
    let energy: f64 = pilot.iter().map(|p| p.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(SynthError::InvalidInput("pilot has zero energy".into()));
    }
    if (energy - 1.0).abs() > PILOT_ENERGY_TOL {
        return Err(SynthError::InvalidInput(format!(
            "pilot energy must be 1, got {energy}"
        )));
    }
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(SynthError::InvalidInput(format!(
            "noise_std must be non-negative, got {noise_std}"
        )));
    }
    Ok(true_channel
        .iter()
        .map(|&h| {
            // sum_t (h phi_t + w_t) conj(phi_t), with the signal term
            // collected as h * sum_t |phi_t|^2.
            let signal = h * energy;
            if noise_std == 0.0 {
                return signal;
            }
            let noise: Complex64 = pilot
                .iter()
                .map(|p| complex_normal(rng) * noise_std * p.conj())
                .sum();
            signal + noise
        })
        .collect())
}
