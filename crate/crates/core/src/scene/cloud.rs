use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::real::Real;

use super::kdtree::KdTree;

/// Scene points in the camera frame, metres.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePointCloud<T> {
    points: Vec<Vec3<T>>,
}

impl<T: Real> ScenePointCloud<T> {
    /// Requires at least one point, all finite and in front of the camera.
    pub fn new(points: Vec<Vec3<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("scene point cloud is empty"));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("scene point {i}"),
                });
            }
            if p.z <= T::zero() {
                return Err(Error::invalid(format!(
                    "scene point {i} has non-positive depth {}",
                    p.z
                )));
            }
        }
        Ok(ScenePointCloud { points })
    }

    pub fn points(&self) -> &[Vec3<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Vec3<T>> {
        self.points
    }

    /// Builds the nearest-neighbour index.
    pub fn index(&self) -> SceneIndex<T> {
        SceneIndex::new(self.clone())
    }

    pub fn cast<U: Real>(&self) -> ScenePointCloud<U> {
        ScenePointCloud {
            points: self.points.iter().map(|p| p.cast()).collect(),
        }
    }
}

/// Immutable scene with an exact nearest-neighbour structure.
#[derive(Debug, Clone)]
pub struct SceneIndex<T> {
    cloud: ScenePointCloud<T>,
    tree: KdTree<T>,
}

impl<T: Real> SceneIndex<T> {
    pub fn new(cloud: ScenePointCloud<T>) -> Self {
        let tree = KdTree::new(cloud.points());
        SceneIndex { cloud, tree }
    }

    pub fn cloud(&self) -> &ScenePointCloud<T> {
        &self.cloud
    }

    pub fn points(&self) -> &[Vec3<T>] {
        self.cloud.points()
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    /// Exact nearest scene point `(index, squared distance)`; ties go to the
    /// lowest index.
    pub fn nearest(&self, q: Vec3<T>) -> (usize, T) {
        self.tree.nearest(q).expect("scene index is never empty")
    }

    pub fn k_nearest(&self, q: Vec3<T>, k: usize) -> Vec<(usize, T)> {
        self.tree.k_nearest(q, k)
    }

    pub fn for_each_in_aabb<F: FnMut(usize, Vec3<T>)>(&self, lo: Vec3<T>, hi: Vec3<T>, f: F) {
        self.tree.for_each_in_aabb(lo, hi, f)
    }

    /// Index over a subset of scene points; results carry original indices.
    /// Duplicates in `subset` are ignored.
    pub fn subset(&self, subset: &[usize]) -> Result<KdTree<T>> {
        let mut ids = subset.to_vec();
        ids.sort_unstable();
        ids.dedup();
        if let Some(&bad) = ids.last().filter(|&&i| i >= self.len()) {
            return Err(Error::invalid(format!(
                "scene index {bad} out of range for {} points",
                self.len()
            )));
        }
        Ok(KdTree::with_ids(
            ids.into_iter().map(|i| (i, self.cloud.points[i])).collect(),
        ))
    }
}
