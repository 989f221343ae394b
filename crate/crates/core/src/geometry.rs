//! Small fixed-size vector and rotation types.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::real::Real;

/// A point or direction in 3D, serialised as `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 3]", into = "[T; 3]")]
#[serde(bound = "T: Real")]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> From<[T; 3]> for Vec3<T> {
    fn from(a: [T; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl<T: Real> From<Vec3<T>> for [T; 3] {
    fn from(v: Vec3<T>) -> Self {
        [v.x, v.y, v.z]
    }
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub const fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Vec3::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn from_slice(s: &[T]) -> Self {
        Vec3::new(s[0], s[1], s[2])
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn distance_squared(self, o: Self) -> T {
        (self - o).norm_squared()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn component_min(self, o: Self) -> Self {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    #[inline]
    pub fn component_max(self, o: Self) -> Self {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    #[inline]
    pub fn splat(v: T) -> Self {
        Vec3::new(v, v, v)
    }

    #[inline]
    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn cast<U: Real>(self) -> Vec3<U> {
        Vec3::new(
            U::lit(self.x.to_f64_lossy()),
            U::lit(self.y.to_f64_lossy()),
            U::lit(self.z.to_f64_lossy()),
        )
    }
}

impl<T: Real> Index<usize> for Vec3<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major 3x3 matrix, used for rotations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3<T> {
    pub rows: [[T; 3]; 3],
}

impl<T: Real> Mat3<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Mat3 {
            rows: [[o, z, z], [z, o, z], [z, z, o]],
        }
    }

    /// Rotation matrix of an axis-angle vector (Rodrigues), with a series
    /// expansion near the identity.
    pub fn from_axis_angle(v: Vec3<T>) -> Self {
        let t2 = v.norm_squared();
        let (a, b) = if t2 < T::lit(1e-8) {
            // sin(t)/t and (1 - cos t)/t^2 to second order
            (
                T::one() - t2 / T::lit(6.0),
                T::lit(0.5) - t2 / T::lit(24.0),
            )
        } else {
            let t = t2.sqrt();
            (t.sin() / t, (T::one() - t.cos()) / t2)
        };
        let (x, y, z) = (v.x, v.y, v.z);
        let o = T::one();
        Mat3 {
            rows: [
                [o - b * (y * y + z * z), -a * z + b * x * y, a * y + b * x * z],
                [a * z + b * x * y, o - b * (x * x + z * z), -a * x + b * y * z],
                [-a * y + b * x * z, a * x + b * y * z, o - b * (x * x + y * y)],
            ],
        }
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        let r = &self.rows;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut out = [[T::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.rows[i][0] * o.rows[0][j]
                    + self.rows[i][1] * o.rows[1][j]
                    + self.rows[i][2] * o.rows[2][j];
            }
        }
        Mat3 { rows: out }
    }

    pub fn transpose(&self) -> Self {
        let r = &self.rows;
        Mat3 {
            rows: [
                [r[0][0], r[1][0], r[2][0]],
                [r[0][1], r[1][1], r[2][1]],
                [r[0][2], r[1][2], r[2][2]],
            ],
        }
    }
}

/// Wraps an axis-angle vector so that its angle lies in `[0, pi]`.
pub fn normalize_axis_angle<T: Real>(v: Vec3<T>) -> Vec3<T> {
    let t = v.norm();
    if t <= T::PI() {
        return v;
    }
    let two_pi = T::PI() + T::PI();
    let mut wrapped = t % two_pi;
    if wrapped > T::PI() {
        wrapped -= two_pi;
    }
    v * (wrapped / t)
}

/// Squared distance from `p` to the segment `[a, b]`.
#[inline]
pub fn point_segment_distance_squared<T: Real>(p: Vec3<T>, a: Vec3<T>, b: Vec3<T>) -> T {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let ap = p - a;
    if len2 <= T::zero() {
        return ap.norm_squared();
    }
    let s = (ap.dot(ab) / len2).max(T::zero()).min(T::one());
    (ap - ab * s).norm_squared()
}

/// Two unit vectors completing `axis` to a right-handed orthonormal frame.
pub fn orthonormal_complement<T: Real>(axis: Vec3<T>) -> (Vec3<T>, Vec3<T>) {
    let a = axis * (T::one() / axis.norm());
    let helper = if a.x.abs() < T::lit(0.9) {
        Vec3::new(T::one(), T::zero(), T::zero())
    } else {
        Vec3::new(T::zero(), T::one(), T::zero())
    };
    let e1 = a.cross(helper);
    let e1 = e1 * (T::one() / e1.norm());
    let e2 = a.cross(e1);
    (e1, e2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rodrigues_quarter_turn_about_z() {
        let r = Mat3::from_axis_angle(Vec3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2));
        let v = r.mul_vec(Vec3::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(v.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.y, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rodrigues_is_orthonormal_and_series_branch_is_continuous() {
        for v in [
            Vec3::new(0.3, -0.2, 0.9),
            Vec3::new(1e-5, 2e-5, -1e-5),
            Vec3::new(0.0, 0.0, 0.0),
        ] {
            let r = Mat3::from_axis_angle(v);
            let rrt = r.mul_mat(&r.transpose());
            for i in 0..3 {
                for j in 0..3 {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(rrt.rows[i][j], e, epsilon = 1e-14);
                }
            }
        }
        let t = 0.99e-4;
        let inside = Mat3::from_axis_angle(Vec3::new(t, 0.0, 0.0));
        let outside = Mat3::from_axis_angle(Vec3::new(1.01e-4, 0.0, 0.0));
        assert_abs_diff_eq!(inside.rows[1][2], -t, epsilon = 1e-12);
        assert_abs_diff_eq!(outside.rows[1][2], -1.01e-4, epsilon = 1e-12);
    }

    #[test]
    fn axis_angle_wraps_above_pi() {
        let v = normalize_axis_angle(Vec3::new(0.0, 0.0, 1.5 * std::f64::consts::PI));
        assert_abs_diff_eq!(v.z, -0.5 * std::f64::consts::PI, epsilon = 1e-12);
        let same_rot = Mat3::from_axis_angle(v);
        let orig = Mat3::from_axis_angle(Vec3::new(0.0, 0.0, 1.5 * std::f64::consts::PI));
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(same_rot.rows[i][j], orig.rows[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn segment_distance_clamps_to_endpoints() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(point_segment_distance_squared(Vec3::new(0.5, 2.0, 0.0), a, b), 4.0);
        assert_eq!(point_segment_distance_squared(Vec3::new(-1.0, 0.0, 0.0), a, b), 1.0);
        assert_eq!(point_segment_distance_squared(Vec3::new(3.0, 0.0, 0.0), a, a), 9.0);
    }
}
