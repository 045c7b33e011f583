//! Per-segment chain from raw samples to the feature vector.

use serde::{Deserialize, Serialize};

use crate::dimred::{dyca, pca, DycaOptions, Method, Trajectory};
use crate::features::{extract_features, FeatureVector, SegmentRef};
use crate::homology::{rips_persistence, PersistenceDiagram};
use crate::io::Segment;
use crate::landscape::{build_landscape, PersistenceLandscape, DEFAULT_LEVELS};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReduceOptions {
    pub method: Method,
    pub n: usize,
    /// DyCA only.
    pub m: usize,
    /// DyCA only.
    pub eig_threshold: Option<f64>,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions {
            method: Method::Dyca,
            n: 3,
            m: 2,
            eig_threshold: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopoOptions {
    /// `None` uses the full diameter of the point cloud.
    pub max_length: Option<f64>,
    pub levels: usize,
}

impl Default for TopoOptions {
    fn default() -> Self {
        TopoOptions {
            max_length: None,
            levels: DEFAULT_LEVELS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub trajectory: Trajectory,
    /// DyCA generalized eigenvalues or PCA covariance eigenvalues.
    pub eigenvalues: Vec<f64>,
}

pub fn reduce(data: &nalgebra::DMatrix<f64>, rate: f64, opts: &ReduceOptions) -> Result<Reduction> {
    match opts.method {
        Method::Dyca => {
            let r = dyca(
                data,
                rate,
                &DycaOptions {
                    n: opts.n,
                    m: opts.m,
                    eig_threshold: opts.eig_threshold,
                },
            )?;
            Ok(Reduction {
                trajectory: r.trajectory,
                eigenvalues: r.eigenvalues,
            })
        }
        Method::Pca => {
            let r = pca(data, rate, opts.n)?;
            Ok(Reduction {
                trajectory: r.trajectory,
                eigenvalues: r.eigenvalues,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub diagram: PersistenceDiagram,
    /// Indexed by homology dimension.
    pub landscapes: [PersistenceLandscape; 2],
}

pub fn topology(trajectory: &Trajectory, opts: &TopoOptions) -> Result<Topology> {
    let diagram = rips_persistence(&trajectory.points, opts.max_length)?;
    let landscapes = [
        build_landscape(&diagram, 0, opts.levels),
        build_landscape(&diagram, 1, opts.levels),
    ];
    Ok(Topology {
        diagram,
        landscapes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentAnalysis {
    pub reduction: Reduction,
    pub topology: Topology,
    pub features: FeatureVector,
}

/// Reduction, persistence, landscapes and features of one segment; the
/// feature vector carries the segment reference and label.
pub fn analyze_segment(
    seg: &Segment,
    reduce_opts: &ReduceOptions,
    topo: &TopoOptions,
) -> Result<SegmentAnalysis> {
    let reduction = reduce(&seg.data, seg.rate, reduce_opts)?;
    let topology = topology(&reduction.trajectory, topo)?;
    let mut features = extract_features(&topology.diagram, &topology.landscapes);
    features.segment = Some(SegmentRef {
        source_id: seg.source_id.clone(),
        start_sample: seg.start_sample,
    });
    features.label = seg.label;
    Ok(SegmentAnalysis {
        reduction,
        topology,
        features,
    })
}
