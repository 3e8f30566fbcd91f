//! Node grouping from dominant eigenspaces.
//!
//! Each position is summarized by the `p` dominant eigenvectors of its
//! channel correlation matrix. [`greedy_group`] then forms groups whose
//! members are pairwise well separated in chordal distance.

use serde::Serialize;
use thiserror::Error;

use crate::experiments::{ExperimentError, Source};
use crate::linalg::{self, CMatrix};
use crate::metrics::{
    chordal_distance, correlation_coefficient, correlation_matrix, dominant_eigenspace,
    eigen_energy_fraction, MetricsError,
};
use crate::synth::RngSeed;
use crate::tensor::segment_windows;

pub const DEFAULT_SUBSPACE_DIM: usize = 3;

/// Separations closer than this are treated as ties.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("insufficient input: {0}")]
    InsufficientInput(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSignature {
    pub position_id: String,
    /// `M x p` orthonormal basis of the dominant eigenspace.
    pub eigenspace: CMatrix,
    pub energy_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchedulingGroup {
    pub members: Vec<String>,
    /// Smallest chordal distance between two members; `None` for a
    /// single-member group.
    pub min_pairwise_chordal: Option<f64>,
    pub group_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedPosition {
    pub position_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignatureSet {
    pub signatures: Vec<NodeSignature>,
    pub skipped: Vec<SkippedPosition>,
}

/// One signature per position from its first complete window at
/// frequency index 0. Positions without a complete window or with rank
/// below `p` are skipped and reported.
pub fn build_signatures(
    source: &Source,
    window_length: usize,
    p: usize,
    seed: RngSeed,
) -> Result<SignatureSet, ScheduleError> {
    if p == 0 || window_length == 0 {
        return Err(ScheduleError::InvalidInput(
            "p and window_length must be positive".into(),
        ));
    }
    let mut signatures = Vec::new();
    let mut skipped = Vec::new();
    for loc in source.locations(seed)? {
        let Some(&window) = segment_windows(loc.tensor.tensor(), window_length).first() else {
            skipped.push(SkippedPosition {
                position_id: loc.id,
                reason: format!("no complete window of {window_length} snapshots"),
            });
            continue;
        };
        let r = correlation_matrix(&loc.tensor, window, 0)?;
        let spectrum = linalg::eigh(&r).map_err(MetricsError::from)?;
        match dominant_eigenspace(&spectrum, p) {
            Ok(eigenspace) => signatures.push(NodeSignature {
                energy_fraction: eigen_energy_fraction(&spectrum, p)?,
                position_id: loc.id,
                eigenspace,
            }),
            Err(e @ (MetricsError::InsufficientRank { .. } | MetricsError::InvalidInput(_))) => {
                skipped.push(SkippedPosition {
                    position_id: loc.id,
                    reason: e.to_string(),
                })
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(SignatureSet { signatures, skipped })
}

/// How far apart two signatures are; larger means better co-scheduling.
pub trait Separation {
    fn separation(&self, a: &NodeSignature, b: &NodeSignature) -> Result<f64, ScheduleError>;
}

/// Chordal distance between the dominant eigenspaces.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChordalSeparation;

impl Separation for ChordalSeparation {
    fn separation(&self, a: &NodeSignature, b: &NodeSignature) -> Result<f64, ScheduleError> {
        Ok(chordal_distance(&a.eigenspace, &b.eigenspace)?)
    }
}

/// `1 - delta` between the strongest eigenvectors.
#[derive(Debug, Clone, Copy, Default)]
pub struct CorrelationSeparation;

impl Separation for CorrelationSeparation {
    fn separation(&self, a: &NodeSignature, b: &NodeSignature) -> Result<f64, ScheduleError> {
        let delta = correlation_coefficient(&a.eigenspace.column(0), &b.eigenspace.column(0))?;
        Ok(1.0 - delta)
    }
}

/// Greedy max-min grouping by chordal distance.
pub fn greedy_group(
    signatures: &[NodeSignature],
    group_size: usize,
) -> Result<Vec<SchedulingGroup>, ScheduleError> {
    greedy_group_by(signatures, group_size, &ChordalSeparation)
}

/// Greedy max-min grouping under an arbitrary separation measure.
///
/// Each group starts from the most separated unassigned pair and grows by
/// the unassigned signature whose smallest separation to the current
/// members is largest. Ties go to the lowest position id. The reported
/// `min_pairwise_chordal` is always the chordal distance.
pub fn greedy_group_by(
    signatures: &[NodeSignature],
    group_size: usize,
    metric: &dyn Separation,
) -> Result<Vec<SchedulingGroup>, ScheduleError> {
    if group_size < 2 {
        return Err(ScheduleError::InvalidInput(format!(
            "group_size must be at least 2, got {group_size}"
        )));
    }
    if signatures.len() < group_size {
        return Err(ScheduleError::InsufficientInput(format!(
            "{} signatures cannot fill a group of {group_size}",
            signatures.len()
        )));
    }
    let shape = (signatures[0].eigenspace.rows(), signatures[0].eigenspace.cols());
    if signatures
        .iter()
        .any(|s| (s.eigenspace.rows(), s.eigenspace.cols()) != shape)
    {
        return Err(ScheduleError::InvalidInput("signatures have different shapes".into()));
    }

    // Work in position-id order so that "first found" means "lowest id".
    let mut order: Vec<usize> = (0..signatures.len()).collect();
    order.sort_by(|&a, &b| signatures[a].position_id.cmp(&signatures[b].position_id));
    if order
        .windows(2)
        .any(|w| signatures[w[0]].position_id == signatures[w[1]].position_id)
    {
        return Err(ScheduleError::InvalidInput("duplicate position ids".into()));
    }
    let sigs: Vec<&NodeSignature> = order.iter().map(|&i| &signatures[i]).collect();
    let n = sigs.len();

    let mut sep = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = metric.separation(sigs[i], sigs[j])?;
            sep[i][j] = d;
            sep[j][i] = d;
        }
    }

    let mut assigned = vec![false; n];
    let mut remaining = n;
    let mut groups = Vec::new();
    while remaining > 0 {
        let mut members = Vec::with_capacity(group_size);
        if remaining == 1 {
            let i = assigned.iter().position(|a| !a).unwrap();
            members.push(i);
        } else {
            let mut best: Option<(usize, usize, f64)> = None;
            for i in (0..n).filter(|&i| !assigned[i]) {
                for j in (i + 1..n).filter(|&j| !assigned[j]) {
                    if best.is_none_or(|(_, _, d)| sep[i][j] > d + TIE_TOL) {
                        best = Some((i, j, sep[i][j]));
                    }
                }
            }
            let (i, j, _) = best.unwrap();
            members.extend([i, j]);
        }
        for &i in &members {
            assigned[i] = true;
        }
        remaining -= members.len();

        while members.len() < group_size && remaining > 0 {
            let mut best: Option<(usize, f64)> = None;
            for c in (0..n).filter(|&c| !assigned[c]) {
                let worst = members
                    .iter()
                    .map(|&m| sep[c][m])
                    .fold(f64::INFINITY, f64::min);
                if best.is_none_or(|(_, d)| worst > d + TIE_TOL) {
                    best = Some((c, worst));
                }
            }
            let (c, _) = best.unwrap();
            assigned[c] = true;
            remaining -= 1;
            members.push(c);
        }

        let mut min_chordal: Option<f64> = None;
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                let d = chordal_distance(&sigs[i].eigenspace, &sigs[j].eigenspace)?;
                min_chordal = Some(min_chordal.map_or(d, |m| m.min(d)));
            }
        }
        groups.push(SchedulingGroup {
            group_size: members.len(),
            members: members.iter().map(|&i| sigs[i].position_id.clone()).collect(),
            min_pairwise_chordal: min_chordal,
        });
    }
    Ok(groups)
}
