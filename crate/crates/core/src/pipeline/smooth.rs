use crate::kinematics::KinematicState;
use crate::real::Real;

/// Normalised Gaussian taps `k = -r..=r` with `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if !(sigma > 0.0) {
        return vec![1.0];
    }
    let r = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-r..=r).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|w| w / sum).collect()
}

/// Mirror index into `0..n` with the edge sample repeated (`d c b a | a b c d`).
pub(crate) fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

/// 1D Gaussian convolution of `x` with reflective boundaries.
pub fn gaussian_smooth_1d<T: Real>(x: &[T], sigma: f64) -> Vec<T> {
    let taps = gaussian_kernel(sigma);
    let r = (taps.len() / 2) as i64;
    (0..x.len() as i64)
        .map(|i| {
            let acc: f64 = taps
                .iter()
                .enumerate()
                .map(|(k, w)| w * x[reflect(i + k as i64 - r, x.len())].to_f64_lossy())
                .sum();
            T::lit(acc)
        })
        .collect()
}

/// Smooths every state DoF independently along time.
pub fn gaussian_smooth_trajectory<T: Real>(states: &[KinematicState<T>], sigma_frames: f64) -> Vec<KinematicState<T>> {
    if states.is_empty() {
        return Vec::new();
    }
    let flats: Vec<Vec<T>> = states.iter().map(|s| s.to_flat()).collect();
    let dof = flats[0].len();
    let mut out = flats.clone();
    let mut series = Vec::with_capacity(states.len());
    for c in 0..dof {
        series.clear();
        series.extend(flats.iter().map(|f| f[c]));
        for (t, v) in gaussian_smooth_1d(&series, sigma_frames).into_iter().enumerate() {
            out[t][c] = v;
        }
    }
    out.iter().map(|f| KinematicState::from_flat(f)).collect()
}
