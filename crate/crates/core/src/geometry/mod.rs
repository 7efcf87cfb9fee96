//! Procedural point clouds and reconstruction metrics.

mod io;
mod metrics;
mod shapes;

pub use io::{read_pcl, read_pcl_file, read_xyz, write_pcl, write_pcl_file, write_xyz, PCL_MAGIC};
pub use metrics::{chamfer, knn_spread, nearest_neighbors, pointsim};
pub use shapes::{
    gen_shape, gen_shape_with_transform, random_shape_spec, sample_surface, shape_dataset,
    DatasetSplit, Primitive, ShapeKind, ShapeSpec,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate shape: {0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("malformed point-cloud file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `N×3` points, `N ≥ 1`, all coordinates finite.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 3]>,
}

/// `x ↦ (x − center) / scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity {
    pub center: [f64; 3],
    pub scale: f64,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::Invalid(
                "point cloud needs at least one point".into(),
            ));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::Invalid("non-finite coordinate".into()));
        }
        Ok(Self { points })
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self, GeometryError> {
        if !flat.len().is_multiple_of(3) {
            return Err(GeometryError::Invalid(format!(
                "{} values is not a multiple of 3",
                flat.len()
            )));
        }
        Self::new(flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.points.iter().flatten().copied().collect()
    }

    /// Size of the cloud stored as `N×3` little-endian `f32`.
    pub fn raw_bytes(&self) -> usize {
        self.points.len() * 3 * 4
    }

    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.points {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Centers the bounding box on the origin and scales the largest half
    /// extent to 1. A cloud whose points all coincide collapses to the origin.
    pub fn normalize(&self) -> PointCloud {
        self.normalize_with_transform().0
    }

    pub fn normalize_with_transform(&self) -> (PointCloud, Similarity) {
        let (lo, hi) = self.bounding_box();
        let center = [0, 1, 2].map(|k| 0.5 * (lo[k] + hi[k]));
        let half = (0..3).map(|k| 0.5 * (hi[k] - lo[k])).fold(0.0, f64::max);
        if half == 0.0 {
            let sim = Similarity { center, scale: 1.0 };
            return (
                PointCloud {
                    points: vec![[0.0; 3]; self.points.len()],
                },
                sim,
            );
        }
        let points = self
            .points
            .iter()
            .map(|p| [0, 1, 2].map(|k| (p[k] - center[k]) / half))
            .collect();
        (
            PointCloud { points },
            Similarity {
                center,
                scale: half,
            },
        )
    }

    pub fn map(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Result<PointCloud, GeometryError> {
        PointCloud::new(self.points.iter().map(|&p| f(p)).collect())
    }

    pub fn within_box(&self, bound: f64) -> bool {
        self.points.iter().flatten().all(|v| v.abs() <= bound)
    }
}
