//! Perspective-normalised occupancy grid, pixel-aligned with the image.
//!
//! Bin `(i, j, k)`: `i` spans image columns, `j` image rows (both 32 bins over
//! the full image), `k` metric depth (256 bins over `[z_near, z_far)`).

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::io::write_atomic;
use crate::kinematics::CameraIntrinsics;
use crate::real::Real;

use super::ScenePointCloud;

pub const GRID_DIMS: [usize; 3] = [32, 32, 256];
pub const DEFAULT_DEPTH_RANGE: [f64; 2] = [0.5, 8.0];
const GRID_MAGIC: &[u8; 8] = b"SMFGRID1";

/// `(fx x / z, fy y / z, z)`.
pub fn frustum_normalize<T: Real>(p: Vec3<T>, cam: &CameraIntrinsics<T>) -> Result<Vec3<T>> {
    if !(p.z > T::zero()) {
        return Err(Error::invalid(format!("frustum_normalize needs z > 0, got {}", p.z)));
    }
    Ok(Vec3::new(cam.fx * p.x / p.z, cam.fy * p.y / p.z, p.z))
}

/// Bin of a point, or `None` when it falls outside the image or depth range.
pub fn bin_of<T: Real>(p: Vec3<T>, cam: &CameraIntrinsics<T>, depth_range: [T; 2]) -> Option<[usize; 3]> {
    let q = frustum_normalize(p, cam).ok()?;
    let u = (q.x + cam.cx) / cam.image_w;
    let v = (q.y + cam.cy) / cam.image_h;
    let w = (q.z - depth_range[0]) / (depth_range[1] - depth_range[0]);
    let bin = |t: T, n: usize| {
        if t >= T::zero() && t < T::one() {
            Some(((t * T::from_usize_lossy(n)).floor().to_f64_lossy() as usize).min(n - 1))
        } else {
            None
        }
    };
    Some([bin(u, GRID_DIMS[0])?, bin(v, GRID_DIMS[1])?, bin(w, GRID_DIMS[2])?])
}

/// Dense 32×32×256 grid of values in `[0, 1]`, flattened row-major over
/// `(i, j, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrustumGrid<T> {
    data: Vec<T>,
    depth_range: [T; 2],
    cam: CameraIntrinsics<T>,
}

impl<T: Real> FrustumGrid<T> {
    pub fn zeros(cam: CameraIntrinsics<T>, depth_range: [T; 2]) -> Result<Self> {
        cam.validate()?;
        if !(depth_range[0] > T::zero() && depth_range[0] < depth_range[1]) || !depth_range[1].is_finite() {
            return Err(Error::invalid(format!(
                "invalid depth range [{}, {}]",
                depth_range[0], depth_range[1]
            )));
        }
        Ok(FrustumGrid {
            data: vec![T::zero(); GRID_DIMS.iter().product()],
            depth_range,
            cam,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        GRID_DIMS
    }

    pub fn depth_range(&self) -> [T; 2] {
        self.depth_range
    }

    pub fn cam(&self) -> &CameraIntrinsics<T> {
        &self.cam
    }

    #[inline]
    pub fn flat_index(b: [usize; 3]) -> usize {
        (b[0] * GRID_DIMS[1] + b[1]) * GRID_DIMS[2] + b[2]
    }

    pub fn get(&self, b: [usize; 3]) -> T {
        self.data[Self::flat_index(b)]
    }

    /// Stores `v` clamped to `[0, 1]`.
    pub fn set(&mut self, b: [usize; 3], v: T) {
        self.data[Self::flat_index(b)] = v.max(T::zero()).min(T::one());
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Replaces the contents; values are clamped to `[0, 1]`.
    pub fn set_data(&mut self, data: Vec<T>) -> Result<()> {
        if data.len() != self.data.len() {
            return Err(Error::invalid(format!(
                "grid data has {} values, expected {}",
                data.len(),
                self.data.len()
            )));
        }
        self.data = data.into_iter().map(|v| v.max(T::zero()).min(T::one())).collect();
        Ok(())
    }

    pub fn bin_of(&self, p: Vec3<T>) -> Option<[usize; 3]> {
        bin_of(p, &self.cam, self.depth_range)
    }

    /// Bins with a non-zero value, in row-major order.
    pub fn occupied(&self) -> Vec<[usize; 3]> {
        let [_, nj, nk] = GRID_DIMS;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > T::zero())
            .map(|(f, _)| [f / (nj * nk), (f / nk) % nj, f % nk])
            .collect()
    }

    pub fn max_value(&self) -> T {
        self.data.iter().copied().fold(T::zero(), T::max)
    }

    /// Binary dump. Layout, little endian:
    /// magic `SMFGRID1` (8 bytes), dims (3 × u32), z_near and z_far (2 × f64),
    /// dtype (u32: 4 = f32, 8 = f64), then the values row-major in dtype.
    pub fn to_bytes(&self) -> Vec<u8> {
        let width = std::mem::size_of::<T>();
        let mut out = Vec::with_capacity(40 + self.data.len() * width);
        out.extend_from_slice(GRID_MAGIC);
        for d in GRID_DIMS {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for z in self.depth_range {
            out.extend_from_slice(&z.to_f64_lossy().to_le_bytes());
        }
        out.extend_from_slice(&(width as u32).to_le_bytes());
        for v in &self.data {
            if width == 4 {
                out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
            } else {
                out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
            }
        }
        out
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }
}

/// Header and values of a grid dump, values widened to f64.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDump {
    pub dims: [usize; 3],
    pub depth_range: [f64; 2],
    pub dtype_bytes: usize,
    pub values: Vec<f64>,
}

pub fn read_grid_dump(mut r: impl Read) -> Result<GridDump> {
    let err = |m: &str| Error::parse("grid dump", m);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| err("truncated header"))?;
    if &magic != GRID_MAGIC {
        return Err(err("bad magic"));
    }
    let mut u = [0u8; 4];
    let mut f = [0u8; 8];
    let mut dims = [0usize; 3];
    for d in &mut dims {
        r.read_exact(&mut u).map_err(|_| err("truncated header"))?;
        *d = u32::from_le_bytes(u) as usize;
    }
    let mut depth_range = [0.0; 2];
    for z in &mut depth_range {
        r.read_exact(&mut f).map_err(|_| err("truncated header"))?;
        *z = f64::from_le_bytes(f);
    }
    r.read_exact(&mut u).map_err(|_| err("truncated header"))?;
    let dtype_bytes = u32::from_le_bytes(u) as usize;
    if dtype_bytes != 4 && dtype_bytes != 8 {
        return Err(err("unknown dtype"));
    }
    let n: usize = dims.iter().product();
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        if dtype_bytes == 4 {
            r.read_exact(&mut u).map_err(|_| err("truncated data"))?;
            values.push(f32::from_le_bytes(u) as f64);
        } else {
            r.read_exact(&mut f).map_err(|_| err("truncated data"))?;
            values.push(f64::from_le_bytes(f));
        }
    }
    Ok(GridDump {
        dims,
        depth_range,
        dtype_bytes,
        values,
    })
}

/// Occupancy grid of a cloud and the number of points dropped for lying
/// outside the image or depth range.
#[derive(Debug, Clone)]
pub struct Voxelized<T> {
    pub grid: FrustumGrid<T>,
    pub dropped: usize,
}

pub fn voxelize<T: Real>(
    cloud: &ScenePointCloud<T>,
    cam: &CameraIntrinsics<T>,
    depth_range: [T; 2],
) -> Result<Voxelized<T>> {
    if cloud.is_empty() {
        return Err(Error::invalid("cannot voxelize an empty cloud"));
    }
    let mut grid = FrustumGrid::zeros(*cam, depth_range)?;
    let mut dropped = 0;
    for p in cloud.points() {
        match grid.bin_of(*p) {
            Some(b) => grid.set(b, T::one()),
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        log::debug!("voxelize: {dropped} of {} points outside the grid", cloud.len());
    }
    Ok(Voxelized { grid, dropped })
}
