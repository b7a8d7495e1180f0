//! Occupancy supervision: query points with inside/outside labels and
//! importance weights, generated in the record's normalized frame.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{sample_union_surface, union_contains, Frame, Part, Vec3};

use super::ObjectRecord;

/// Occupancy pairs for one record. Points live in the normalized frame
/// where the record's bounding box fills [-1,1]^3. `labels` and `weights`
/// cover the uniform points first, then the surface points.
#[derive(Debug, Clone)]
pub struct OccupancySet {
    pub uniform_points: Vec<Vec3>,
    pub surface_points: Vec<Vec3>,
    pub labels: Vec<bool>,
    pub weights: Vec<f64>,
}

impl OccupancySet {
    pub fn len(&self) -> usize {
        self.uniform_points.len() + self.surface_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> Vec3 {
        if i < self.uniform_points.len() {
            self.uniform_points[i]
        } else {
            self.surface_points[i - self.uniform_points.len()]
        }
    }
}

/// One supervised query point.
#[derive(Debug, Clone, Copy)]
pub struct OccupancyPoint {
    pub point: Vec3,
    pub inside: bool,
    pub weight: f64,
}

/// Normalize the record, draw `n_uniform` points in [-1,1]^3 plus
/// `n_surface` points on the part-union surface, label everything with the
/// union occupancy, and attach importance weights that make balanced
/// resampling an unbiased estimator of the uniform loss over the set:
/// weight = true class frequency / sampled class frequency (0.5).
pub fn make_occupancy_pairs(
    record: &ObjectRecord,
    n_uniform: usize,
    n_surface: usize,
    rng: &mut impl Rng,
) -> Result<OccupancySet> {
    let frame = Frame::from_bbox(&record.bbox)?;
    let parts: Vec<Part> = record
        .parts
        .iter()
        .map(|p| frame.normalize_part(p))
        .collect::<Result<_>>()?;

    let mut uniform_points = Vec::with_capacity(n_uniform);
    for _ in 0..n_uniform {
        uniform_points.push([
            rng.gen::<f64>() * 2.0 - 1.0,
            rng.gen::<f64>() * 2.0 - 1.0,
            rng.gen::<f64>() * 2.0 - 1.0,
        ]);
    }
    let surface_points = if n_surface > 0 {
        sample_union_surface(&parts, n_surface, rng)?
    } else {
        Vec::new()
    };

    let mut labels = Vec::with_capacity(n_uniform + n_surface);
    for p in uniform_points.iter().chain(surface_points.iter()) {
        labels.push(union_contains(&parts, *p)?);
    }

    let total = labels.len() as f64;
    let inside = labels.iter().filter(|&&l| l).count() as f64;
    let f_in = inside / total;
    let f_out = 1.0 - f_in;
    let weights = labels
        .iter()
        .map(|&l| if l { f_in / 0.5 } else { f_out / 0.5 })
        .collect();

    Ok(OccupancySet {
        uniform_points,
        surface_points,
        labels,
        weights,
    })
}

/// Draw a class-balanced batch (with replacement): n/2 inside, n/2 outside,
/// carrying the set's importance weights.
pub fn balanced_batch(
    set: &OccupancySet,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<OccupancyPoint>> {
    let inside_idx: Vec<usize> = (0..set.len()).filter(|&i| set.labels[i]).collect();
    let outside_idx: Vec<usize> = (0..set.len()).filter(|&i| !set.labels[i]).collect();
    if inside_idx.is_empty() || outside_idx.is_empty() {
        return Err(Error::InvalidArgument(
            "occupancy set lacks one class entirely; cannot draw a balanced batch".into(),
        ));
    }
    let mut batch = Vec::with_capacity(n);
    for pool in [&inside_idx, &outside_idx] {
        for _ in 0..n / 2 {
            let i = pool[rng.gen_range(0..pool.len())];
            batch.push(OccupancyPoint {
                point: set.point(i),
                inside: set.labels[i],
                weight: set.weights[i],
            });
        }
    }
    Ok(batch)
}
