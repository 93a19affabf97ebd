//! Sampling designs: simple random and spatially clustered.

use rand::seq::index;

use crate::error::{AoaError, Result};
use crate::grid::{Grid, PredictorStack};
use crate::rng::{derived_rng, stream};
use crate::samples::SampleTable;

fn candidate_cells(stack: &PredictorStack, truth: &Grid) -> Result<Vec<usize>> {
    stack.geometry().ensure_same(&truth.geometry, "truth grid")?;
    Ok(stack
        .valid_indices()
        .into_iter()
        .filter(|&c| !truth.values[c].is_nan())
        .collect())
}

/// `n` distinct non-missing cells drawn uniformly without replacement.
pub fn sample_random(stack: &PredictorStack, truth: &Grid, n: usize, seed: u64) -> Result<SampleTable> {
    let cells = candidate_cells(stack, truth)?;
    if n == 0 || n > cells.len() {
        return Err(AoaError::invalid(format!(
            "cannot draw {n} samples from {} valid cells",
            cells.len()
        )));
    }
    let mut rng = derived_rng(seed, &[stream::SAMPLE]);
    let picked: Vec<usize> = index::sample(&mut rng, cells.len(), n).iter().map(|i| cells[i]).collect();
    SampleTable::from_cells(stack, truth, &picked)
}

/// Cells chosen by a clustered design.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDesign {
    pub parents: Vec<usize>,
    pub members: Vec<usize>,
    /// Cluster index of each member.
    pub labels: Vec<i64>,
}

/// `n_clusters` random parent cells, each with `per_cluster` distinct member
/// cells drawn uniformly from the valid cells within Euclidean distance
/// `radius` (in cells) of the parent. Members are distinct across clusters.
pub fn sample_clustered(
    stack: &PredictorStack,
    truth: &Grid,
    n_clusters: usize,
    per_cluster: usize,
    radius: f64,
    seed: u64,
) -> Result<SampleTable> {
    let design = clustered_design(stack, truth, n_clusters, per_cluster, radius, seed)?;
    SampleTable::from_cells(stack, truth, &design.members)?.with_clusters(design.labels)
}

pub fn clustered_design(
    stack: &PredictorStack,
    truth: &Grid,
    n_clusters: usize,
    per_cluster: usize,
    radius: f64,
    seed: u64,
) -> Result<ClusterDesign> {
    if n_clusters < 2 {
        return Err(AoaError::invalid("clustered design needs at least 2 clusters"));
    }
    if per_cluster == 0 {
        return Err(AoaError::invalid("clusters need at least one member"));
    }
    if !(radius >= 1.0) {
        return Err(AoaError::invalid(format!("cluster radius must be at least 1 cell, got {radius}")));
    }
    let cells = candidate_cells(stack, truth)?;
    if n_clusters > cells.len() {
        return Err(AoaError::invalid(format!(
            "cannot place {n_clusters} clusters in {} valid cells",
            cells.len()
        )));
    }
    let geom = *stack.geometry();
    let mut valid = vec![false; geom.len()];
    for &c in &cells {
        valid[c] = true;
    }
    let mut taken = vec![false; geom.len()];
    let mut rng = derived_rng(seed, &[stream::SAMPLE]);
    let parents: Vec<usize> = index::sample(&mut rng, cells.len(), n_clusters).iter().map(|i| cells[i]).collect();

    let reach = radius.floor() as isize;
    let mut members = Vec::with_capacity(n_clusters * per_cluster);
    let mut labels = Vec::with_capacity(n_clusters * per_cluster);
    for (k, &parent) in parents.iter().enumerate() {
        let (pr, pc) = geom.row_col(parent);
        let mut disc = Vec::new();
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                if ((dr * dr + dc * dc) as f64).sqrt() > radius {
                    continue;
                }
                let (r, c) = (pr as isize + dr, pc as isize + dc);
                if r < 0 || c < 0 || r >= geom.nrows as isize || c >= geom.ncols as isize {
                    continue;
                }
                let idx = geom.index(r as usize, c as usize);
                if valid[idx] && !taken[idx] {
                    disc.push(idx);
                }
            }
        }
        if disc.len() < per_cluster {
            return Err(AoaError::invalid(format!(
                "cluster {k}: only {} free cells within radius {radius}, need {per_cluster}",
                disc.len()
            )));
        }
        for i in index::sample(&mut rng, disc.len(), per_cluster).iter() {
            taken[disc[i]] = true;
            members.push(disc[i]);
            labels.push(k as i64);
        }
    }
    Ok(ClusterDesign {
        parents,
        members,
        labels,
    })
}
