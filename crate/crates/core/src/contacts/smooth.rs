//! Scene contact labels on the frustum grid and their Gaussian smoothing.

use crate::error::Result;
use crate::real::Real;
use crate::scene::{FrustumGrid, ScenePointCloud, GRID_DIMS};

/// Unnormalised 1D Gaussian taps `exp(-d^2 / (2 sigma^2))` for
/// `d = -r..=r`, `r = ceil(3 sigma)`; the centre tap is 1.
pub fn gaussian_taps<T: Real>(sigma: T) -> Vec<T> {
    if !(sigma > T::zero()) {
        return vec![T::one()];
    }
    let r = (T::lit(3.0) * sigma).ceil().to_f64_lossy() as i64;
    let two_s2 = T::lit(2.0) * sigma * sigma;
    (-r..=r)
        .map(|d| {
            let d = T::lit(d as f64);
            (-(d * d) / two_s2).exp()
        })
        .collect()
}

/// Separable zero-padded convolution of a row-major `dims` volume with the
/// taps of [`gaussian_taps`] along every axis.
pub fn gaussian_filter_3d<T: Real>(data: &[T], dims: [usize; 3], sigma: T) -> Vec<T> {
    let taps = gaussian_taps(sigma);
    let r = (taps.len() / 2) as isize;
    let strides = [dims[1] * dims[2], dims[2], 1];
    let mut cur = data.to_vec();
    let mut next = vec![T::zero(); cur.len()];
    for axis in 0..3 {
        let (n, stride) = (dims[axis] as isize, strides[axis]);
        for (flat, out) in next.iter_mut().enumerate() {
            let pos = ((flat / stride) % dims[axis]) as isize;
            let mut acc = T::zero();
            for (ti, w) in taps.iter().enumerate() {
                let q = pos + ti as isize - r;
                if q >= 0 && q < n {
                    acc += *w * cur[(flat as isize + (q - pos) * stride as isize) as usize];
                }
            }
            *out = acc;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Smooths a label grid. When the input peaks at exactly 1 the output is
/// rescaled to peak at 1; otherwise values are clamped to `[0, 1]`.
pub fn smooth_env_labels<T: Real>(grid: &FrustumGrid<T>, sigma_bins: T) -> Result<FrustumGrid<T>> {
    let mut out = grid.clone();
    let mut data = gaussian_filter_3d(grid.data(), GRID_DIMS, sigma_bins);
    let peak = data.iter().copied().fold(T::zero(), T::max);
    if grid.max_value() == T::one() && peak > T::zero() {
        for v in &mut data {
            *v /= peak;
        }
    }
    out.set_data(data)?;
    Ok(out)
}

/// Scatters per-point labels into the grid, keeping the maximum per bin.
/// Points outside the grid are ignored.
pub fn env_labels_to_grid<T: Real>(cloud: &ScenePointCloud<T>, env: &[T], grid: &mut FrustumGrid<T>) {
    for (p, &v) in cloud.points().iter().zip(env) {
        if let Some(b) = grid.bin_of(*p) {
            if v > grid.get(b) {
                grid.set(b, v);
            }
        }
    }
}

/// Reads each point's bin value; points outside the grid get 0.
pub fn grid_to_env_labels<T: Real>(cloud: &ScenePointCloud<T>, grid: &FrustumGrid<T>) -> Vec<T> {
    cloud
        .points()
        .iter()
        .map(|p| grid.bin_of(*p).map_or(T::zero(), |b| grid.get(b)))
        .collect()
}

/// Grid round trip of scene labels with optional smoothing.
pub fn smooth_point_labels<T: Real>(
    cloud: &ScenePointCloud<T>,
    env: &[T],
    grid_template: &FrustumGrid<T>,
    sigma_bins: T,
) -> Result<Vec<T>> {
    let mut grid = FrustumGrid::zeros(*grid_template.cam(), grid_template.depth_range())?;
    env_labels_to_grid(cloud, env, &mut grid);
    let smoothed = smooth_env_labels(&grid, sigma_bins)?;
    Ok(grid_to_env_labels(cloud, &smoothed))
}
