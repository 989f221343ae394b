//! Capsule skeleton standing in for a parametric body mesh.
//!
//! Every non-root joint owns one bone, the segment from its parent to itself,
//! dressed with a capsule. The `N` surface samples are spread over the bones in
//! proportion to the capsules' lateral area and addressed by cylindrical
//! coordinates `(bone, axial fraction, angle)`, so posing a sample is one rigid
//! transform of a precomputed rest-frame vector.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{orthonormal_complement, Vec3};
use crate::io::{check_version, read_json, write_json};
use crate::real::Real;

pub const NUM_JOINTS: usize = 21;
pub const NUM_SURFACE_POINTS: usize = 655;
pub const TEMPLATE_VERSION: &str = "1.0";

const DEFAULT_TEMPLATE_JSON: &str = include_str!("../../assets/default_template.json");

/// One surface sample: which bone carries it and where on the cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SurfaceSample<T> {
    /// Child joint index of the bone.
    pub bone: usize,
    /// Position along the bone axis, 0 at the parent joint, 1 at the child.
    pub axial: T,
    /// Angle around the bone axis, radians.
    pub angle: T,
}

/// On-disk form of a template.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TemplateFile<T> {
    pub version: String,
    pub joints: Vec<String>,
    pub parents: Vec<Option<usize>>,
    /// Rest translation of each joint from its parent, metres.
    pub offsets: Vec<Vec3<T>>,
    /// Capsule radius per bone, indexed by `child joint - 1`, metres.
    pub radii: Vec<T>,
    /// Per joint, per rotation DoF: `[low, high]` in radians.
    pub limits: Vec<[[T; 2]; 3]>,
    pub surface: Vec<SurfaceSample<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonTemplate<T> {
    joint_names: Vec<String>,
    parents: Vec<Option<usize>>,
    offsets: Vec<Vec3<T>>,
    radii: Vec<T>,
    limits: Vec<[[T; 2]; 3]>,
    surface: Vec<SurfaceSample<T>>,
    // Derived: rest-frame vector of each sample relative to its bone's parent
    // joint at unit scale, and that parent's index.
    surface_local: Vec<Vec3<T>>,
    surface_parent: Vec<usize>,
    children: Vec<Vec<usize>>,
}

impl<T: Real> SkeletonTemplate<T> {
    pub fn from_file_data(file: TemplateFile<T>) -> Result<Self> {
        check_version("template", &file.version, 1)?;
        let k = file.joints.len();
        if k != NUM_JOINTS {
            return Err(Error::invalid(format!(
                "template must have {NUM_JOINTS} joints, found {k}"
            )));
        }
        if file.parents.len() != k || file.offsets.len() != k || file.limits.len() != k {
            return Err(Error::invalid("per-joint arrays have inconsistent lengths"));
        }
        if file.radii.len() != k - 1 {
            return Err(Error::invalid(format!(
                "expected {} bone radii, found {}",
                k - 1,
                file.radii.len()
            )));
        }
        if file.parents[0].is_some() {
            return Err(Error::invalid("joint 0 must be the root"));
        }
        for (j, p) in file.parents.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < j => {}
                _ => {
                    return Err(Error::invalid(format!(
                        "joint {j} must have a parent with a smaller index"
                    )))
                }
            }
        }
        if !file.offsets.iter().all(|o| o.is_finite()) {
            return Err(Error::NonFinite {
                what: "template offsets".into(),
            });
        }
        if !file.radii.iter().all(|r| r.is_finite() && *r > T::zero()) {
            return Err(Error::invalid("bone radii must be positive and finite"));
        }
        for (j, o) in file.offsets.iter().enumerate().skip(1) {
            if o.norm() <= T::zero() {
                return Err(Error::invalid(format!("bone {j} has zero length")));
            }
        }
        if file.surface.len() != NUM_SURFACE_POINTS {
            return Err(Error::invalid(format!(
                "template must have {NUM_SURFACE_POINTS} surface samples, found {}",
                file.surface.len()
            )));
        }
        for s in &file.surface {
            if s.bone == 0 || s.bone >= k || !s.axial.is_finite() || !s.angle.is_finite() {
                return Err(Error::invalid("surface sample references an invalid bone"));
            }
        }

        let mut children = vec![Vec::new(); k];
        for (j, p) in file.parents.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(j);
            }
        }
        let mut surface_local = Vec::with_capacity(file.surface.len());
        let mut surface_parent = Vec::with_capacity(file.surface.len());
        for s in &file.surface {
            let off = file.offsets[s.bone];
            let (e1, e2) = orthonormal_complement(off);
            let r = file.radii[s.bone - 1];
            let radial = e1 * s.angle.cos() + e2 * s.angle.sin();
            surface_local.push(off * s.axial + radial * r);
            surface_parent.push(file.parents[s.bone].expect("validated"));
        }

        Ok(SkeletonTemplate {
            joint_names: file.joints,
            parents: file.parents,
            offsets: file.offsets,
            radii: file.radii,
            limits: file.limits,
            surface: file.surface,
            surface_local,
            surface_parent,
            children,
        })
    }

    pub fn to_file_data(&self) -> TemplateFile<T> {
        TemplateFile {
            version: TEMPLATE_VERSION.to_string(),
            joints: self.joint_names.clone(),
            parents: self.parents.clone(),
            offsets: self.offsets.clone(),
            radii: self.radii.clone(),
            limits: self.limits.clone(),
            surface: self.surface.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_file_data(read_json(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, &self.to_file_data())
    }

    /// The template shipped with the crate (`assets/default_template.json`).
    pub fn shipped() -> Self {
        let file: TemplateFile<T> =
            serde_json::from_str(DEFAULT_TEMPLATE_JSON).expect("shipped template parses");
        Self::from_file_data(file).expect("shipped template is valid")
    }

    pub fn num_joints(&self) -> usize {
        self.parents.len()
    }

    pub fn num_surface_points(&self) -> usize {
        self.surface.len()
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| n == name)
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    pub fn children(&self, joint: usize) -> &[usize] {
        &self.children[joint]
    }

    pub fn offset(&self, joint: usize) -> Vec3<T> {
        self.offsets[joint]
    }

    /// Capsule radius of the bone ending at `child`.
    pub fn bone_radius(&self, child: usize) -> T {
        self.radii[child - 1]
    }

    pub fn limits(&self, joint: usize) -> [[T; 2]; 3] {
        self.limits[joint]
    }

    pub fn surface_samples(&self) -> &[SurfaceSample<T>] {
        &self.surface
    }

    pub(crate) fn surface_local(&self, i: usize) -> Vec3<T> {
        self.surface_local[i]
    }

    pub(crate) fn surface_parent(&self, i: usize) -> usize {
        self.surface_parent[i]
    }

    /// Bone child indices `1..K`.
    pub fn bones(&self) -> impl Iterator<Item = usize> + '_ {
        1..self.num_joints()
    }

    /// Total rest length of all bones at unit scale.
    pub fn total_bone_length(&self) -> T {
        self.offsets.iter().skip(1).map(|o| o.norm()).sum()
    }

    /// Builds the default 21-joint humanoid from its joint table.
    pub fn default_humanoid() -> Self {
        let file = default_humanoid_file();
        Self::from_file_data(file).expect("default humanoid is valid")
    }
}

struct JointSpec {
    name: &'static str,
    parent: Option<usize>,
    offset: [f64; 3],
    radius: f64,
    limits: [[f64; 2]; 3],
}

const FIXED: [[f64; 2]; 3] = [[0.0, 0.0]; 3];

fn sym(a: f64, b: f64, c: f64) -> [[f64; 2]; 3] {
    [[-a, a], [-b, b], [-c, c]]
}

// Rest pose is a T-pose facing the camera: y points down, the body's front is
// -z and its left side is +x.
fn joint_table() -> Vec<JointSpec> {
    let hip = [[-1.8, 0.6], [-0.5, 0.5], [-0.6, 0.6]];
    let knee = [[-0.05, 2.4], [-0.1, 0.1], [-0.1, 0.1]];
    let l_elbow = [[-0.2, 0.2], [0.0, 2.3], [-0.2, 0.2]];
    let r_elbow = [[-0.2, 0.2], [-2.3, 0.0], [-0.2, 0.2]];
    let j = |name, parent, offset, radius, limits| JointSpec {
        name,
        parent,
        offset,
        radius,
        limits,
    };
    vec![
        j("pelvis", None, [0.0, 0.0, 0.0], 0.0, FIXED),
        j("left_hip", Some(0), [0.09, 0.07, 0.0], 0.07, hip),
        j("right_hip", Some(0), [-0.09, 0.07, 0.0], 0.07, hip),
        j("spine1", Some(0), [0.0, -0.12, 0.01], 0.11, sym(0.4, 0.4, 0.4)),
        j("left_knee", Some(1), [0.01, 0.40, 0.0], 0.07, knee),
        j("right_knee", Some(2), [-0.01, 0.40, 0.0], 0.07, knee),
        j("spine2", Some(3), [0.0, -0.16, 0.0], 0.12, sym(0.4, 0.4, 0.4)),
        j("left_ankle", Some(4), [0.0, 0.40, 0.02], 0.05, sym(0.5, 0.3, 0.3)),
        j("right_ankle", Some(5), [0.0, 0.40, 0.02], 0.05, sym(0.5, 0.3, 0.3)),
        j("left_foot", Some(7), [0.0, 0.05, -0.13], 0.04, FIXED),
        j("right_foot", Some(8), [0.0, 0.05, -0.13], 0.04, FIXED),
        j("neck", Some(6), [0.0, -0.20, 0.0], 0.05, sym(0.5, 0.5, 0.5)),
        j("left_collar", Some(6), [0.07, -0.15, 0.0], 0.06, sym(0.3, 0.3, 0.3)),
        j("right_collar", Some(6), [-0.07, -0.15, 0.0], 0.06, sym(0.3, 0.3, 0.3)),
        j("head", Some(11), [0.0, -0.20, -0.02], 0.09, FIXED),
        j("left_shoulder", Some(12), [0.10, 0.02, 0.0], 0.05, sym(1.6, 1.6, 1.6)),
        j("right_shoulder", Some(13), [-0.10, 0.02, 0.0], 0.05, sym(1.6, 1.6, 1.6)),
        j("left_elbow", Some(15), [0.26, 0.0, 0.0], 0.045, l_elbow),
        j("right_elbow", Some(16), [-0.26, 0.0, 0.0], 0.045, r_elbow),
        j("left_wrist", Some(17), [0.24, 0.0, 0.0], 0.04, FIXED),
        j("right_wrist", Some(18), [-0.24, 0.0, 0.0], 0.04, FIXED),
    ]
}

/// Distributes `NUM_SURFACE_POINTS` samples over the bones in proportion to
/// capsule lateral area (largest-remainder rounding) and lays them out on a
/// golden-angle spiral along each bone.
fn default_humanoid_file<T: Real>() -> TemplateFile<T> {
    let table = joint_table();
    let areas: Vec<f64> = table
        .iter()
        .skip(1)
        .map(|j| {
            let len = (j.offset[0].powi(2) + j.offset[1].powi(2) + j.offset[2].powi(2)).sqrt();
            j.radius * len
        })
        .collect();
    let total: f64 = areas.iter().sum();
    let exact: Vec<f64> = areas
        .iter()
        .map(|a| a / total * NUM_SURFACE_POINTS as f64)
        .collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut remaining = NUM_SURFACE_POINTS - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &b in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        counts[b] += 1;
        remaining -= 1;
    }

    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    let mut surface = Vec::with_capacity(NUM_SURFACE_POINTS);
    for (b, &n) in counts.iter().enumerate() {
        for i in 0..n {
            let axial = (i as f64 + 0.5) / n as f64;
            let angle = (i as f64 * golden) % (2.0 * std::f64::consts::PI);
            surface.push(SurfaceSample {
                bone: b + 1,
                axial: T::lit(axial),
                angle: T::lit(angle),
            });
        }
    }

    let lit3 = |a: [f64; 3]| Vec3::new(T::lit(a[0]), T::lit(a[1]), T::lit(a[2]));
    let lim = |l: [[f64; 2]; 3]| l.map(|d| d.map(T::lit));
    TemplateFile {
        version: TEMPLATE_VERSION.to_string(),
        joints: table.iter().map(|j| j.name.to_string()).collect(),
        parents: table.iter().map(|j| j.parent).collect(),
        offsets: table.iter().map(|j| lit3(j.offset)).collect(),
        radii: table.iter().skip(1).map(|j| T::lit(j.radius)).collect(),
        limits: table.iter().map(|j| lim(j.limits)).collect(),
        surface,
    }
}
