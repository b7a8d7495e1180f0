//! Cuboid geometry: 6D rotations, labelled parts, containment tests, and
//! area-weighted sampling of the union surface.
//!
//! Everything here is exact, pure f64 math. These routines back dataset
//! construction, occupancy supervision, and the point-cloud metrics, so they
//! are deliberately free of any model state.

use rand::Rng;

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

pub fn vec_sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn vec_add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn vec_scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn vec_dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn vec_cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn vec_norm(a: Vec3) -> f64 {
    vec_dot(a, a).sqrt()
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub fn identity() -> Self {
        Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn from_columns(x: Vec3, y: Vec3, z: Vec3) -> Self {
        Mat3([
            [x[0], y[0], z[0]],
            [x[1], y[1], z[1]],
            [x[2], y[2], z[2]],
        ])
    }

    pub fn column(&self, j: usize) -> Vec3 {
        [self.0[0][j], self.0[1][j], self.0[2][j]]
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        [
            vec_dot(self.0[0], v),
            vec_dot(self.0[1], v),
            vec_dot(self.0[2], v),
        ]
    }

    /// R^T v without materializing the transpose.
    pub fn tr_mul_vec(&self, v: Vec3) -> Vec3 {
        [
            self.column(0)[0] * v[0] + self.column(0)[1] * v[1] + self.column(0)[2] * v[2],
            self.column(1)[0] * v[0] + self.column(1)[1] * v[1] + self.column(1)[2] * v[2],
            self.column(2)[0] * v[0] + self.column(2)[1] * v[1] + self.column(2)[2] * v[2],
        ]
    }

    pub fn mul(&self, other: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        Mat3(out)
    }

    pub fn transpose(&self) -> Mat3 {
        Mat3::from_columns(self.0[0], self.0[1], self.0[2])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Rotation by `angle` radians about a coordinate axis (0=x, 1=y, 2=z).
    pub fn rotation_about_axis(axis: usize, angle: f64) -> Mat3 {
        let (s, c) = angle.sin_cos();
        match axis {
            0 => Mat3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]),
            1 => Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]),
            2 => Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]),
            _ => panic!("axis must be 0, 1 or 2"),
        }
    }
}

/// Continuous 6D rotation parametrization: the first two columns of a
/// rotation matrix, concatenated as [x0,x1,x2, y0,y1,y2]. Decoding
/// orthonormalizes, so any pair of non-parallel, non-zero columns is valid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation6D(pub [f64; 6]);

impl Rotation6D {
    pub fn identity() -> Self {
        Rotation6D([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let mut r = [0.0; 6];
        r.copy_from_slice(&v[..6]);
        Rotation6D(r)
    }
}

const DEGENERATE_EPS: f64 = 1e-12;

/// Decode a 6D rotation into a proper rotation matrix: normalize the first
/// column, Gram-Schmidt the second against it, and complete with the cross
/// product.
pub fn rot6d_to_matrix(r: &Rotation6D) -> Result<Mat3> {
    let a = [r.0[0], r.0[1], r.0[2]];
    let b = [r.0[3], r.0[4], r.0[5]];
    if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
        return Err(Error::DegenerateRotation("non-finite components".into()));
    }
    let na = vec_norm(a);
    if na < DEGENERATE_EPS {
        return Err(Error::DegenerateRotation("first column is zero".into()));
    }
    let x = vec_scale(a, 1.0 / na);
    let y_raw = vec_sub(b, vec_scale(x, vec_dot(x, b)));
    let ny = vec_norm(y_raw);
    if ny < DEGENERATE_EPS {
        return Err(Error::DegenerateRotation(
            "columns are parallel or second column is zero".into(),
        ));
    }
    let y = vec_scale(y_raw, 1.0 / ny);
    let z = vec_cross(x, y);
    Ok(Mat3::from_columns(x, y, z))
}

/// Encode a rotation matrix as its first two columns.
pub fn matrix_to_rot6d(m: &Mat3) -> Rotation6D {
    let x = m.column(0);
    let y = m.column(1);
    Rotation6D([x[0], x[1], x[2], y[0], y[1], y[2]])
}

/// One labelled cuboid. Sizes are full extents (width, height, depth);
/// half-extents are derived where needed.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub label: usize,
    pub size: Vec3,
    pub translation: Vec3,
    pub rotation: Rotation6D,
}

/// The object's bounding box: a cuboid without a label.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub size: Vec3,
    pub translation: Vec3,
    pub rotation: Rotation6D,
}

impl Part {
    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        if !self.size.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "part size must be positive, got {:?}",
                self.size
            )));
        }
        if self.label >= vocab_size {
            return Err(Error::InvalidArgument(format!(
                "part label {} out of range (vocabulary size {})",
                self.label, vocab_size
            )));
        }
        rot6d_to_matrix(&self.rotation)?;
        Ok(())
    }

    pub fn rotation_matrix(&self) -> Result<Mat3> {
        rot6d_to_matrix(&self.rotation)
    }

    /// The 8 world-space corners.
    pub fn corners(&self) -> Result<[Vec3; 8]> {
        let rot = self.rotation_matrix()?;
        Ok(cuboid_corners(&rot, self.translation, self.size))
    }
}

impl BoundingBox {
    pub fn validate(&self) -> Result<()> {
        if !self.size.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bounding box size must be positive, got {:?}",
                self.size
            )));
        }
        rot6d_to_matrix(&self.rotation)?;
        Ok(())
    }

    pub fn rotation_matrix(&self) -> Result<Mat3> {
        rot6d_to_matrix(&self.rotation)
    }

    /// True iff `point` lies inside the box, with sizes inflated by
    /// `slack` on every side.
    pub fn contains_with_slack(&self, point: Vec3, slack: f64) -> Result<bool> {
        let rot = self.rotation_matrix()?;
        let local = rot.tr_mul_vec(vec_sub(point, self.translation));
        Ok((0..3).all(|k| local[k].abs() <= self.size[k] / 2.0 + slack))
    }
}

fn cuboid_corners(rot: &Mat3, translation: Vec3, size: Vec3) -> [Vec3; 8] {
    let h = vec_scale(size, 0.5);
    let mut corners = [[0.0; 3]; 8];
    for (i, corner) in corners.iter_mut().enumerate() {
        let local = [
            if i & 1 == 0 { -h[0] } else { h[0] },
            if i & 2 == 0 { -h[1] } else { h[1] },
            if i & 4 == 0 { -h[2] } else { h[2] },
        ];
        *corner = vec_add(rot.mul_vec(local), translation);
    }
    corners
}

/// Point-in-cuboid test. The boundary counts as inside.
pub fn cuboid_contains(part: &Part, point: Vec3) -> bool {
    let rot = match part.rotation_matrix() {
        Ok(r) => r,
        Err(_) => return false,
    };
    let local = rot.tr_mul_vec(vec_sub(point, part.translation));
    (0..3).all(|k| local[k].abs() <= part.size[k] / 2.0)
}

/// Strict interior test with the cuboid shrunk by `eps` on every side.
fn strictly_inside_shrunk(part: &Part, rot: &Mat3, point: Vec3, eps: f64) -> bool {
    let local = rot.tr_mul_vec(vec_sub(point, part.translation));
    (0..3).all(|k| local[k].abs() < part.size[k] / 2.0 - eps)
}

/// Occupancy of the union: true iff any cuboid contains the point.
pub fn union_contains(parts: &[Part], point: Vec3) -> Result<bool> {
    if parts.is_empty() {
        return Err(Error::EmptyParts);
    }
    Ok(parts.iter().any(|p| cuboid_contains(p, point)))
}

/// Axis-aligned bounds of all part corners.
pub fn parts_aabb(parts: &[Part]) -> Result<(Vec3, Vec3)> {
    if parts.is_empty() {
        return Err(Error::EmptyParts);
    }
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for part in parts {
        for corner in part.corners()? {
            for k in 0..3 {
                min[k] = min[k].min(corner[k]);
                max[k] = max[k].max(corner[k]);
            }
        }
    }
    Ok((min, max))
}

struct Face {
    part: usize,
    axis: usize,
    sign: f64,
    cumulative_area: f64,
}

/// Minimum attempts before the acceptance-rate guard may fire.
const ACCEPTANCE_WARMUP: usize = 10_000;
const MIN_ACCEPTANCE: f64 = 1e-3;

/// Sample `n` points uniformly (by area) on the boundary of the cuboid
/// union. Candidate points are drawn area-weighted across every face of
/// every cuboid and rejected when they fall strictly inside another cuboid;
/// strictness uses an inward epsilon of 1e-6 of the union's bounding
/// diagonal so that touching faces still count as boundary.
pub fn sample_union_surface(parts: &[Part], n: usize, rng: &mut impl Rng) -> Result<Vec<Vec3>> {
    if parts.is_empty() {
        return Err(Error::EmptyParts);
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be > 0".into()));
    }
    let rotations: Vec<Mat3> = parts
        .iter()
        .map(|p| p.rotation_matrix())
        .collect::<Result<_>>()?;

    let (lo, hi) = parts_aabb(parts)?;
    let eps = 1e-6 * vec_norm(vec_sub(hi, lo));

    let mut faces = Vec::with_capacity(parts.len() * 6);
    let mut total = 0.0;
    for (pi, part) in parts.iter().enumerate() {
        for axis in 0..3 {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            let area = part.size[u] * part.size[v];
            for sign in [-1.0, 1.0] {
                total += area;
                faces.push(Face {
                    part: pi,
                    axis,
                    sign,
                    cumulative_area: total,
                });
            }
        }
    }

    let mut points = Vec::with_capacity(n);
    let mut attempted = 0usize;
    while points.len() < n {
        attempted += 1;
        let target = rng.gen::<f64>() * total;
        let idx = faces.partition_point(|f| f.cumulative_area < target);
        let face = &faces[idx.min(faces.len() - 1)];
        let part = &parts[face.part];
        let rot = &rotations[face.part];

        let (u, v) = ((face.axis + 1) % 3, (face.axis + 2) % 3);
        let mut local = [0.0; 3];
        local[face.axis] = face.sign * part.size[face.axis] / 2.0;
        local[u] = (rng.gen::<f64>() - 0.5) * part.size[u];
        local[v] = (rng.gen::<f64>() - 0.5) * part.size[v];
        let world = vec_add(rot.mul_vec(local), part.translation);

        let occluded = parts.iter().enumerate().any(|(oi, other)| {
            oi != face.part && strictly_inside_shrunk(other, &rotations[oi], world, eps)
        });
        if !occluded {
            points.push(world);
        }
        if attempted >= ACCEPTANCE_WARMUP {
            let rate = points.len() as f64 / attempted as f64;
            if rate < MIN_ACCEPTANCE {
                return Err(Error::LowAcceptance {
                    rate,
                    accepted: points.len(),
                    attempted,
                });
            }
        }
    }
    Ok(points)
}

/// Similarity transform that maps a record's bounding box into the
/// normalized cube [-1,1]^3 centered at the origin (isotropic scale by the
/// largest box extent).
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub rotation: Mat3,
    pub translation: Vec3,
    pub scale: f64,
}

impl Frame {
    pub fn from_bbox(bbox: &BoundingBox) -> Result<Frame> {
        bbox.validate()?;
        let max_extent = bbox.size.iter().cloned().fold(f64::MIN, f64::max);
        Ok(Frame {
            rotation: bbox.rotation_matrix()?,
            translation: bbox.translation,
            scale: 2.0 / max_extent,
        })
    }

    pub fn to_normalized(&self, point: Vec3) -> Vec3 {
        vec_scale(
            self.rotation.tr_mul_vec(vec_sub(point, self.translation)),
            self.scale,
        )
    }

    pub fn to_world(&self, point: Vec3) -> Vec3 {
        vec_add(
            self.rotation.mul_vec(vec_scale(point, 1.0 / self.scale)),
            self.translation,
        )
    }

    /// Express a part in the normalized frame.
    pub fn normalize_part(&self, part: &Part) -> Result<Part> {
        let rot = part.rotation_matrix()?;
        let local_rot = self.rotation.transpose().mul(&rot);
        Ok(Part {
            label: part.label,
            size: vec_scale(part.size, self.scale),
            translation: self.to_normalized(part.translation),
            rotation: matrix_to_rot6d(&local_rot),
        })
    }
}
