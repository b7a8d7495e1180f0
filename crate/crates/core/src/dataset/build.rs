//! Procedural construction of chair/table/lamp objects.
//!
//! Objects stand on the y=0 plane with y up. All parts are axis-aligned
//! except an optional global yaw (an exact multiple of 90 degrees about y)
//! and a small tilt on lamp arms, so the rotation heads see non-identity
//! targets.

use rand::Rng;

use crate::geometry::{matrix_to_rot6d, parts_aabb, Mat3, Part, Rotation6D, Vec3};

use super::text::text_description;
use super::{
    Category, ObjectRecord, LABEL_ARM, LABEL_BACK, LABEL_BASE, LABEL_DRAWER, LABEL_LEG,
    LABEL_PEDESTAL, LABEL_POLE, LABEL_SEAT, LABEL_SHADE, LABEL_STRETCHER, LABEL_TOP,
};

/// Knobs for the optional structure of each category. Probabilities are
/// evaluated once per object.
#[derive(Debug, Clone)]
pub struct StyleParams {
    pub chair_arm_prob: f64,
    pub chair_min_stretchers: usize,
    pub chair_max_stretchers: usize,
    pub table_pedestal_prob: f64,
    pub table_stretcher_prob: f64,
    pub table_drawer_prob: f64,
    pub lamp_arm_prob: f64,
    pub global_yaw: bool,
}

impl Default for StyleParams {
    fn default() -> Self {
        StyleParams {
            chair_arm_prob: 0.5,
            chair_min_stretchers: 1,
            chair_max_stretchers: 4,
            table_pedestal_prob: 0.25,
            table_stretcher_prob: 0.3,
            table_drawer_prob: 0.2,
            lamp_arm_prob: 0.4,
            global_yaw: true,
        }
    }
}

impl StyleParams {
    /// A style with every optional feature disabled.
    pub fn plain() -> Self {
        StyleParams {
            chair_arm_prob: 0.0,
            chair_min_stretchers: 1,
            chair_max_stretchers: 1,
            table_pedestal_prob: 0.0,
            table_stretcher_prob: 0.0,
            table_drawer_prob: 0.0,
            lamp_arm_prob: 0.0,
            global_yaw: false,
        }
    }
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

fn axis_part(label: usize, size: Vec3, center: Vec3) -> Part {
    Part {
        label,
        size,
        translation: center,
        rotation: Rotation6D::identity(),
    }
}

/// Exact yaw matrices for multiples of 90 degrees about y.
fn yaw_matrix(quarter_turns: usize) -> Mat3 {
    match quarter_turns % 4 {
        0 => Mat3::identity(),
        1 => Mat3([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]]),
        2 => Mat3([[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]),
        _ => Mat3([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]),
    }
}

fn build_chair(style: &StyleParams, rng: &mut impl Rng) -> Vec<Part> {
    let seat_w = uniform(rng, 0.45, 0.65);
    let seat_d = uniform(rng, 0.45, 0.60);
    let seat_t = uniform(rng, 0.05, 0.09);
    let seat_h = uniform(rng, 0.35, 0.55);
    let back_h = uniform(rng, 0.40, 0.70);
    let back_t = uniform(rng, 0.04, 0.08);
    let leg_c = uniform(rng, 0.035, 0.06);
    let inset = uniform(rng, 0.0, 0.04);

    let mut parts = vec![
        axis_part(
            LABEL_SEAT,
            [seat_w, seat_t, seat_d],
            [0.0, seat_h - seat_t / 2.0, 0.0],
        ),
        axis_part(
            LABEL_BACK,
            [seat_w, back_h, back_t],
            [0.0, seat_h + back_h / 2.0, -seat_d / 2.0 + back_t / 2.0],
        ),
    ];

    let leg_h = seat_h - seat_t;
    let leg_x = seat_w / 2.0 - leg_c / 2.0 - inset;
    let leg_z = seat_d / 2.0 - leg_c / 2.0 - inset;
    for sx in [-1.0, 1.0] {
        for sz in [-1.0, 1.0] {
            parts.push(axis_part(
                LABEL_LEG,
                [leg_c, leg_h, leg_c],
                [sx * leg_x, leg_h / 2.0, sz * leg_z],
            ));
        }
    }

    let with_arms = rng.gen_bool(style.chair_arm_prob);
    let stretchers = rng.gen_range(style.chair_min_stretchers..=style.chair_max_stretchers);

    if with_arms {
        let arm_c = uniform(rng, 0.04, 0.07);
        let arm_lift = uniform(rng, 0.15, 0.25);
        for sx in [-1.0, 1.0] {
            parts.push(axis_part(
                LABEL_ARM,
                [arm_c, arm_c, seat_d * 0.8],
                [sx * (seat_w / 2.0 - arm_c / 2.0), seat_h + arm_lift, 0.0],
            ));
        }
    }

    // Stretcher slots: front/back bars run along x, left/right along z.
    let bar_c = uniform(rng, 0.02, 0.04);
    let bar_y = uniform(rng, 0.08, 0.25).min(leg_h * 0.8);
    let span_x = 2.0 * leg_x - leg_c;
    let span_z = 2.0 * leg_z - leg_c;
    let mut slots = [0usize, 1, 2, 3];
    for i in (1..slots.len()).rev() {
        let j = rng.gen_range(0..=i);
        slots.swap(i, j);
    }
    for &slot in slots.iter().take(stretchers) {
        let part = match slot {
            0 => axis_part(LABEL_STRETCHER, [span_x, bar_c, bar_c], [0.0, bar_y, leg_z]),
            1 => axis_part(LABEL_STRETCHER, [span_x, bar_c, bar_c], [0.0, bar_y, -leg_z]),
            2 => axis_part(LABEL_STRETCHER, [bar_c, bar_c, span_z], [leg_x, bar_y, 0.0]),
            _ => axis_part(LABEL_STRETCHER, [bar_c, bar_c, span_z], [-leg_x, bar_y, 0.0]),
        };
        parts.push(part);
    }
    parts
}

fn build_table(style: &StyleParams, rng: &mut impl Rng) -> Vec<Part> {
    let top_w = uniform(rng, 0.7, 1.5);
    let top_d = uniform(rng, 0.6, 1.2);
    let top_t = uniform(rng, 0.04, 0.10);
    let height = uniform(rng, 0.5, 1.5);

    let mut parts = vec![axis_part(
        LABEL_TOP,
        [top_w, top_t, top_d],
        [0.0, height - top_t / 2.0, 0.0],
    )];

    let pedestal = rng.gen_bool(style.table_pedestal_prob);
    if pedestal {
        let base_t = uniform(rng, 0.02, 0.05);
        let base_w = top_w * uniform(rng, 0.35, 0.6);
        let base_d = top_d * uniform(rng, 0.35, 0.6);
        let column_c = uniform(rng, 0.08, 0.18);
        let column_h = height - top_t - base_t;
        parts.push(axis_part(
            LABEL_PEDESTAL,
            [column_c, column_h, column_c],
            [0.0, base_t + column_h / 2.0, 0.0],
        ));
        parts.push(axis_part(
            LABEL_BASE,
            [base_w, base_t, base_d],
            [0.0, base_t / 2.0, 0.0],
        ));
    } else {
        let leg_c = uniform(rng, 0.04, 0.09);
        let inset = uniform(rng, 0.02, 0.08);
        let leg_h = height - top_t;
        let leg_x = top_w / 2.0 - leg_c / 2.0 - inset;
        let leg_z = top_d / 2.0 - leg_c / 2.0 - inset;
        for sx in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                parts.push(axis_part(
                    LABEL_LEG,
                    [leg_c, leg_h, leg_c],
                    [sx * leg_x, leg_h / 2.0, sz * leg_z],
                ));
            }
        }
        if rng.gen_bool(style.table_stretcher_prob) {
            let bar_c = uniform(rng, 0.025, 0.045);
            let bar_y = uniform(rng, 0.1, 0.3) * height;
            let span_x = 2.0 * leg_x - leg_c;
            for sz in [-1.0, 1.0] {
                parts.push(axis_part(
                    LABEL_STRETCHER,
                    [span_x, bar_c, bar_c],
                    [0.0, bar_y, sz * leg_z],
                ));
            }
        }
        if rng.gen_bool(style.table_drawer_prob) {
            let drawer_h = uniform(rng, 0.08, 0.14).min(height * 0.25);
            let drawer_w = top_w * uniform(rng, 0.3, 0.5);
            let drawer_d = top_d * uniform(rng, 0.5, 0.7);
            parts.push(axis_part(
                LABEL_DRAWER,
                [drawer_w, drawer_h, drawer_d],
                [0.0, height - top_t - drawer_h / 2.0, 0.0],
            ));
        }
    }
    parts
}

fn build_lamp(style: &StyleParams, rng: &mut impl Rng) -> Vec<Part> {
    let base_w = uniform(rng, 0.18, 0.40);
    let base_t = uniform(rng, 0.02, 0.06);
    let pole_c = uniform(rng, 0.03, 0.06);
    let pole_h = uniform(rng, 0.5, 1.2);
    let shade_w = uniform(rng, 0.16, 0.42);
    let shade_h = uniform(rng, 0.12, 0.30);

    let mut parts = vec![
        axis_part(LABEL_BASE, [base_w, base_t, base_w], [0.0, base_t / 2.0, 0.0]),
        axis_part(
            LABEL_POLE,
            [pole_c, pole_h, pole_c],
            [0.0, base_t + pole_h / 2.0, 0.0],
        ),
        axis_part(
            LABEL_SHADE,
            [shade_w, shade_h, shade_w],
            [0.0, base_t + pole_h + shade_h / 2.0, 0.0],
        ),
    ];

    if rng.gen_bool(style.lamp_arm_prob) {
        let arm_len = uniform(rng, 0.15, 0.35);
        let arm_c = uniform(rng, 0.025, 0.05);
        let arm_y = base_t + pole_h * uniform(rng, 0.75, 0.95);
        let tilt = uniform(rng, -5.0, 5.0).to_radians();
        let rot = Mat3::rotation_about_axis(2, tilt);
        parts.push(Part {
            label: LABEL_ARM,
            size: [arm_len, arm_c, arm_c],
            translation: [arm_len / 2.0, arm_y, 0.0],
            rotation: matrix_to_rot6d(&rot),
        });
    }
    parts
}

/// Generate one structurally plausible object. The record's bounding box is
/// the tight axis-aligned box of all parts inflated by 2%.
pub fn generate_object(
    category: Category,
    style: &StyleParams,
    id: String,
    rng: &mut impl Rng,
) -> ObjectRecord {
    let mut parts = match category {
        Category::Chair => build_chair(style, rng),
        Category::Table => build_table(style, rng),
        Category::Lamp => build_lamp(style, rng),
    };

    if style.global_yaw {
        let turns = rng.gen_range(0..4usize);
        if turns != 0 {
            let yaw = yaw_matrix(turns);
            for part in &mut parts {
                part.translation = yaw.mul_vec(part.translation);
                let rot = part.rotation_matrix().expect("generator rotations valid");
                part.rotation = matrix_to_rot6d(&yaw.mul(&rot));
            }
        }
    }

    let (lo, hi) = parts_aabb(&parts).expect("generator emits at least one part");
    let center = [
        (lo[0] + hi[0]) / 2.0,
        (lo[1] + hi[1]) / 2.0,
        (lo[2] + hi[2]) / 2.0,
    ];
    let size = [
        (hi[0] - lo[0]) * 1.02,
        (hi[1] - lo[1]) * 1.02,
        (hi[2] - lo[2]) * 1.02,
    ];
    let bbox = crate::geometry::BoundingBox {
        size,
        translation: center,
        rotation: Rotation6D::identity(),
    };

    let mut record = ObjectRecord {
        id,
        category,
        bbox,
        parts,
        description: String::new(),
        truncated: false,
    };
    record.description = text_description(&record);
    record
}
