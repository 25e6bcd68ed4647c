//! Seeded generator of crossroads and T-junctions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CameraModel, CameraPose, Layout, Pedestrian, RectFootprint, TruthObject};
use crate::geo::{vector_heading, GeoPoint, LocalPoint};
use crate::scene::{LightKind, ObjectCategory};

const HALF_ROAD_M: f64 = 6.0;
const LANE_OFFSET_M: f64 = 1.75;
const POLE_OFFSET_M: f64 = 2.5;
const JITTER_M: f64 = 0.75;
const FRONTAGE_END_M: f64 = 70.0;

const SUBTYPES: [&str; 12] = [
    "stop",
    "yield",
    "no_entry",
    "priority_road",
    "speed_limit_30",
    "speed_limit_50",
    "no_parking",
    "one_way",
    "pedestrian_crossing",
    "turn_right_only",
    "no_left_turn",
    "no_u_turn",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureOptions {
    pub pedestrians: bool,
    pub t_junction_frac: f64,
    pub signalized_frac: f64,
    pub camera: CameraModel,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        FixtureOptions {
            pedestrians: true,
            t_junction_frac: 0.3,
            signalized_frac: 0.75,
            camera: CameraModel::default(),
        }
    }
}

/// `n` layouts from `seed` with default options.
pub fn standard_fixtures(n: usize, seed: u64) -> Vec<Layout> {
    fixtures_with(n, seed, &FixtureOptions::default())
}

pub fn fixtures_with(n: usize, seed: u64, opts: &FixtureOptions) -> Vec<Layout> {
    (0..n).map(|i| fixture(i, seed, opts)).collect()
}

fn left_of(h: LocalPoint) -> LocalPoint {
    LocalPoint::new(-h.y, h.x)
}

fn rect(id: String, pts: [LocalPoint; 2], height_m: f64) -> RectFootprint {
    RectFootprint {
        id,
        min: LocalPoint::new(pts[0].x.min(pts[1].x), pts[0].y.min(pts[1].y)),
        max: LocalPoint::new(pts[0].x.max(pts[1].x), pts[0].y.max(pts[1].y)),
        height_m,
    }
}

fn jitter(rng: &mut ChaCha8Rng) -> LocalPoint {
    let r = JITTER_M * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    LocalPoint::new(r * a.cos(), r * a.sin())
}

struct Approach {
    /// Direction of travel towards the centre.
    heading: LocalPoint,
    left_corner: LocalPoint,
    right_corner: LocalPoint,
}

fn fixture(index: usize, seed: u64, opts: &FixtureOptions) -> Layout {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let iid = format!("x{index:03}");
    let center = GeoPoint {
        lat: 52.40 + 0.01 * (index / 20) as f64,
        lon: 13.20 + 0.015 * (index % 20) as f64,
    };
    let t_junction = rng.random_bool(opts.t_junction_frac);
    let signalized = rng.random_bool(opts.signalized_frac);
    let c = HALF_ROAD_M + 2.5;

    // corner blocks, then frontage along each arm
    let mut footprints = Vec::new();
    let mut fid = 0;
    let mut next_id = || {
        fid += 1;
        format!("{iid}-b{fid:02}")
    };
    // (arm direction, side normal, distance along the arm where the frontage starts)
    let mut frontage: Vec<(LocalPoint, LocalPoint, f64)> = Vec::new();
    let quadrants: &[(f64, f64)] = if t_junction {
        &[(-1.0, -1.0), (1.0, -1.0)]
    } else {
        &[(-1.0, -1.0), (-1.0, 1.0), (1.0, 1.0), (1.0, -1.0)]
    };
    for &(sx, sy) in quadrants {
        let w = rng.random_range(16.0..24.0);
        let d = rng.random_range(16.0..24.0);
        let h = rng.random_range(10.0..20.0);
        footprints.push(rect(
            next_id(),
            [LocalPoint::new(sx * c, sy * c), LocalPoint::new(sx * (c + w), sy * (c + d))],
            h,
        ));
        frontage.push((LocalPoint::new(sx, 0.0), LocalPoint::new(0.0, sy), c + w));
        frontage.push((LocalPoint::new(0.0, sy), LocalPoint::new(sx, 0.0), c + d));
    }
    if t_junction {
        // the through road's far side: two blocks meeting opposite the stem
        for sx in [-1.0, 1.0] {
            // low enough that the stem's high light stays against the sky
            let w = rng.random_range(26.0..34.0);
            let d = rng.random_range(16.0..24.0);
            let h = rng.random_range(7.5..9.0);
            footprints.push(rect(
                next_id(),
                [LocalPoint::new(0.0, c), LocalPoint::new(sx * w, c + d)],
                h,
            ));
            frontage.push((LocalPoint::new(sx, 0.0), LocalPoint::new(0.0, 1.0), w));
        }
    }
    for (arm, side, start) in frontage {
        let mut s = start + rng.random_range(3.0..6.0);
        while s < FRONTAGE_END_M {
            let w = rng.random_range(12.0..24.0);
            let d = rng.random_range(10.0..20.0);
            let h = rng.random_range(8.0..16.0);
            footprints.push(rect(
                next_id(),
                [arm.scale(s).add(side.scale(c)), arm.scale(s + w).add(side.scale(c + d))],
                h,
            ));
            s += w + rng.random_range(3.0..6.0);
        }
    }

    let mut headings = vec![
        LocalPoint::new(1.0, 0.0),
        LocalPoint::new(0.0, 1.0),
        LocalPoint::new(-1.0, 0.0),
    ];
    if !t_junction {
        headings.push(LocalPoint::new(0.0, -1.0));
    }
    let approaches: Vec<Approach> = headings
        .into_iter()
        .map(|h| {
            let snap = |k: LocalPoint| {
                if t_junction && k.y > 0.0 {
                    LocalPoint::new(0.0, c)
                } else {
                    k
                }
            };
            let back = h.scale(-c);
            Approach {
                heading: h,
                left_corner: snap(back.add(left_of(h).scale(c))),
                right_corner: snap(back.sub(left_of(h).scale(c))),
            }
        })
        .collect();

    // one pole per distinct corner
    let mut corners: Vec<LocalPoint> = Vec::new();
    for a in &approaches {
        for k in [a.left_corner, a.right_corner] {
            if !corners.contains(&k) {
                corners.push(k);
            }
        }
    }
    let poles: Vec<LocalPoint> = corners
        .iter()
        .map(|k| {
            let toward = LocalPoint::ORIGIN.sub(*k).unit().expect("corner off centre");
            k.add(toward.scale(POLE_OFFSET_M)).add(jitter(&mut rng))
        })
        .collect();
    let facing = |a: &Approach| vector_heading(a.heading.scale(-1.0));

    let mut truth = Vec::new();
    let light = |position, kind: LightKind, facing_deg| TruthObject {
        category: ObjectCategory::TrafficLight,
        subtype: None,
        light_kind: Some(kind),
        position,
        height_m: Some(kind.height_m()),
        center_z_m: kind.height_m() - 0.45,
        facing_deg,
    };
    let sign = |position, subtype: &str, z: f64, facing_deg: f64| TruthObject {
        category: ObjectCategory::TrafficSign,
        subtype: Some(subtype.to_string()),
        light_kind: None,
        position,
        height_m: None,
        center_z_m: z,
        facing_deg: vec![facing_deg],
    };
    if signalized {
        for (k, pole) in corners.iter().zip(&poles) {
            let served: Vec<f64> = approaches
                .iter()
                .filter(|a| a.left_corner == *k || a.right_corner == *k)
                .map(facing)
                .collect();
            truth.push(light(*pole, LightKind::Low, served));
        }
        for a in &approaches {
            let mid = a.left_corner.midpoint(a.right_corner).add(jitter(&mut rng));
            truth.push(light(mid, LightKind::High, vec![facing(a)]));
        }
    }
    for a in &approaches {
        let pole = poles[corners.iter().position(|k| *k == a.right_corner).expect("corner")];
        let mut pool = SUBTYPES.to_vec();
        pool.shuffle(&mut rng);
        let f = facing(a);
        let zs: &[f64] = if signalized {
            match rng.random_range(0..4) {
                0 => &[],
                1 => &[4.4],
                2 => &[4.4, 2.6],
                _ => &[2.6],
            }
        } else if rng.random_bool(0.5) {
            &[2.6]
        } else {
            &[3.1, 2.4]
        };
        for (z, sub) in zs.iter().zip(pool) {
            truth.push(sign(pole, sub, *z, f));
        }
    }

    // cameras: right lane, far to near
    let mut cameras = Vec::new();
    for a in &approaches {
        let dir = match vector_heading(a.heading).round() as i64 {
            90 => "we",
            0 => "sn",
            270 => "ew",
            _ => "ns",
        };
        let n = rng.random_range(3..=6);
        let near = rng.random_range(19.0..23.0);
        let far = rng.random_range(34.0..38.0);
        let sequences = rng.random_range(1..=2);
        let lane = a.heading.scale(-1.0);
        let right = LocalPoint::new(a.heading.y, -a.heading.x);
        for k in 0..n {
            let d = far - (far - near) * k as f64 / (n - 1) as f64;
            let position = lane.scale(d).add(right.scale(LANE_OFFSET_M));
            let seq = k % sequences;
            cameras.push(CameraPose {
                image_id: format!("{iid}_{dir}_{k:02}"),
                sequence_id: format!("{iid}_{dir}_s{seq}"),
                captured_at: format!("2024-05-{:02}T10:{:02}:{:02}Z", 1 + seq, index % 60, 2 * k),
                position,
                heading_deg: vector_heading(a.heading),
                gps_offset: LocalPoint::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)),
                heading_noise_deg: rng.random_range(-2.0..2.0),
            });
        }
    }

    let mut pedestrians = Vec::new();
    if opts.pedestrians {
        let want = rng.random_range(2..=4);
        let mut tries = 0;
        while pedestrians.len() < want && tries < 200 {
            tries += 1;
            let a = &approaches[rng.random_range(0..approaches.len())];
            let arm = a.heading.scale(-1.0);
            let side = if rng.random_bool(0.5) { left_of(arm) } else { left_of(arm).scale(-1.0) };
            let p = arm
                .scale(rng.random_range(12.0..40.0))
                .add(side.scale(c - 1.25));
            let clear_of_cams = cameras.iter().all(|cp| cp.position.sub(p).norm() >= 8.0);
            let clear_of_objs = truth.iter().all(|o| o.position.sub(p).norm() >= 2.0);
            if clear_of_cams && clear_of_objs {
                pedestrians.push(Pedestrian {
                    position: p,
                    height_m: rng.random_range(1.6..1.9),
                });
            }
        }
    }

    Layout {
        intersection_id: iid,
        center,
        radius_m: 50.0,
        sidewalk_width_m: 2.5,
        footprints,
        truth_objects: truth,
        pedestrians,
        occluders: Vec::new(),
        cameras,
        camera: opts.camera,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let a = standard_fixtures(12, 1);
        assert_eq!(a, standard_fixtures(12, 1));
        assert_ne!(a, standard_fixtures(12, 2));
        for l in &a {
            l.validate().unwrap();
        }
    }

    #[test]
    fn track_counts() {
        for l in standard_fixtures(30, 5) {
            let dirs: std::collections::BTreeSet<&str> =
                l.cameras.iter().map(|c| &c.image_id[5..7]).collect();
            let t = l.footprints.iter().any(|f| f.min == LocalPoint::new(0.0, 8.5) || f.max.x == 0.0 && f.min.y == 8.5);
            assert_eq!(dirs.len(), if t { 3 } else { 4 });
            for d in &dirs {
                let n = l.cameras.iter().filter(|c| &c.image_id[5..7] == *d).count();
                assert!((3..=6).contains(&n));
            }
        }
    }

    /// Every low light has a partner across each road it serves.
    #[test]
    fn low_lights_pair_up() {
        for l in standard_fixtures(40, 3) {
            let lows: Vec<&TruthObject> = l
                .truth_objects
                .iter()
                .filter(|o| o.light_kind == Some(LightKind::Low))
                .collect();
            for o in &lows {
                assert!(matches!(o.height_m, Some(h) if h == 4.0));
                for f in &o.facing_deg {
                    let partners = lows
                        .iter()
                        .filter(|p| p.facing_deg.iter().any(|g| (g - f).abs() < 1e-9))
                        .count();
                    assert_eq!(partners, 2, "{} facing {f}", l.intersection_id);
                }
            }
            for o in l.truth_objects.iter().filter(|o| o.category == ObjectCategory::TrafficLight) {
                assert!(o.height_m == Some(4.0) || o.height_m == Some(7.0));
            }
        }
    }
}
