use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ImageMeta, IntersectionBuffer};
use crate::geo::{dist, make_frame, LocalFrame, LocalPoint};

/// Rough driving direction of a track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// west to east, heading in `[45, 135)`
    WE,
    /// north to south, heading in `[135, 225)`
    NS,
    /// east to west, heading in `[225, 315)`
    EW,
    /// south to north, heading in `[315, 360) ∪ [0, 45)`
    SN,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::WE, Direction::NS, Direction::EW, Direction::SN];

    pub fn from_heading(heading_deg: f64) -> Direction {
        let h = heading_deg.rem_euclid(360.0);
        if (45.0..135.0).contains(&h) {
            Direction::WE
        } else if (135.0..225.0).contains(&h) {
            Direction::NS
        } else if (225.0..315.0).contains(&h) {
            Direction::EW
        } else {
            Direction::SN
        }
    }

    /// Unit vector of travel.
    pub fn axis(self) -> LocalPoint {
        match self {
            Direction::WE => LocalPoint::new(1.0, 0.0),
            Direction::EW => LocalPoint::new(-1.0, 0.0),
            Direction::SN => LocalPoint::new(0.0, 1.0),
            Direction::NS => LocalPoint::new(0.0, -1.0),
        }
    }

    pub fn heading_deg(self) -> f64 {
        match self {
            Direction::SN => 0.0,
            Direction::WE => 90.0,
            Direction::NS => 180.0,
            Direction::EW => 270.0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Ordered images travelling one rough direction through an intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: String,
    pub intersection_id: String,
    pub direction: Direction,
    pub images: Vec<ImageMeta>,
}

/// An image left out of track building.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrackWarning {
    pub image_id: String,
    pub reason: String,
}

/// Result of drift correction.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedTrack {
    pub track: Track,
    /// Mean distance each image was moved, metres.
    pub mean_displacement_m: f64,
    /// `false` when the track was too short to fit a line.
    pub corrected: bool,
}

/// Images whose projected position lies within `buffer.radius_m` of its centre.
pub fn images_in_buffer(images: &[ImageMeta], buffer: &IntersectionBuffer) -> Vec<ImageMeta> {
    let Ok(frame) = make_frame(buffer.center) else {
        return Vec::new();
    };
    images
        .iter()
        .filter(|img| {
            frame
                .project(img.position)
                .is_ok_and(|p| p.norm() <= buffer.radius_m)
        })
        .cloned()
        .collect()
}

fn along(frame: &LocalFrame, dir: Direction, img: &ImageMeta) -> f64 {
    frame
        .project(img.position)
        .map(|p| p.dot(dir.axis()))
        .unwrap_or(f64::NAN)
}

fn sort_along(frame: &LocalFrame, dir: Direction, images: &mut [ImageMeta]) {
    images.sort_by(|a, b| {
        along(frame, dir, a)
            .total_cmp(&along(frame, dir, b))
            .then_with(|| a.image_id.cmp(&b.image_id))
    });
}

/// Bin images by heading into at most four tracks, each ordered along its
/// direction of travel. Images without a heading are reported and skipped.
pub fn build_tracks(
    images: &[ImageMeta],
    buffer: &IntersectionBuffer,
) -> (Vec<Track>, Vec<TrackWarning>) {
    let mut warnings = Vec::new();
    let Ok(frame) = make_frame(buffer.center) else {
        warnings.extend(images.iter().map(|i| TrackWarning {
            image_id: i.image_id.clone(),
            reason: "intersection centre cannot host a local frame".into(),
        }));
        return (Vec::new(), warnings);
    };
    let mut bins: [Vec<ImageMeta>; 4] = Default::default();
    for img in images {
        let Some(h) = img.heading_deg else {
            warnings.push(TrackWarning {
                image_id: img.image_id.clone(),
                reason: "missing heading".into(),
            });
            continue;
        };
        if frame.project(img.position).is_err() {
            warnings.push(TrackWarning {
                image_id: img.image_id.clone(),
                reason: "position outside local frame".into(),
            });
            continue;
        }
        let dir = Direction::from_heading(h);
        let slot = Direction::ALL.iter().position(|d| *d == dir).unwrap();
        bins[slot].push(img.clone());
    }
    let tracks = Direction::ALL
        .iter()
        .zip(bins)
        .filter(|(_, imgs)| !imgs.is_empty())
        .map(|(dir, mut imgs)| {
            sort_along(&frame, *dir, &mut imgs);
            Track {
                track_id: format!("{}-{}", buffer.intersection_id, dir),
                intersection_id: buffer.intersection_id.clone(),
                direction: *dir,
                images: imgs,
            }
        })
        .collect();
    (tracks, warnings)
}

/// Total-least-squares line through `pts`: (centroid, unit direction).
/// Falls back to `fallback_dir` when the points do not define a direction.
fn fit_line(pts: &[LocalPoint], fallback_dir: LocalPoint) -> (LocalPoint, LocalPoint) {
    let n = pts.len() as f64;
    let c = pts
        .iter()
        .fold(LocalPoint::ORIGIN, |acc, p| acc.add(*p))
        .scale(1.0 / n);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in pts {
        let d = p.sub(c);
        sxx += d.x * d.x;
        syy += d.y * d.y;
        sxy += d.x * d.y;
    }
    if sxx + syy <= 1e-18 {
        return (c, fallback_dir);
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let mut u = LocalPoint::new(theta.cos(), theta.sin());
    if u.dot(fallback_dir) < 0.0 {
        u = u.scale(-1.0);
    }
    (c, u)
}

/// Straighten GPS drift by projecting every position onto the track's
/// total-least-squares line. Tracks with fewer than three images come back
/// unchanged with `corrected == false`.
pub fn correct_track(track: &Track, frame: &LocalFrame) -> CorrectedTrack {
    let unchanged = || CorrectedTrack {
        track: track.clone(),
        mean_displacement_m: 0.0,
        corrected: false,
    };
    if track.images.len() < 3 {
        return unchanged();
    }
    let Ok(pts) = track
        .images
        .iter()
        .map(|i| frame.project(i.position))
        .collect::<crate::Result<Vec<_>>>()
    else {
        return unchanged();
    };
    let (c, u) = fit_line(&pts, track.direction.axis());
    let mut images = track.images.clone();
    let mut moved = 0.0;
    for (img, p) in images.iter_mut().zip(&pts) {
        let q = c.add(u.scale(p.sub(c).dot(u)));
        moved += dist(*p, q);
        match frame.unproject(q) {
            Ok(g) => img.position = g,
            Err(_) => return unchanged(),
        }
    }
    sort_along(frame, track.direction, &mut images);
    CorrectedTrack {
        track: Track {
            images,
            ..track.clone()
        },
        mean_displacement_m: moved / pts.len() as f64,
        corrected: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use proptest::prelude::*;

    fn center() -> GeoPoint {
        GeoPoint::new(52.52, 13.405).unwrap()
    }

    fn buffer() -> IntersectionBuffer {
        IntersectionBuffer {
            intersection_id: "x".into(),
            center: center(),
            radius_m: 50.0,
        }
    }

    fn img_at(id: &str, seq: &str, x: f64, y: f64, heading: Option<f64>) -> ImageMeta {
        let f = make_frame(center()).unwrap();
        ImageMeta {
            image_id: id.into(),
            position: f.unproject(LocalPoint::new(x, y)).unwrap(),
            heading_deg: heading,
            sequence_id: seq.into(),
            captured_at: "2020-01-01T00:00:00Z".into(),
            width_px: 1024,
            height_px: 768,
        }
    }

    fn local(img: &ImageMeta) -> LocalPoint {
        make_frame(center()).unwrap().project(img.position).unwrap()
    }

    #[test]
    fn heading_bins() {
        assert_eq!(Direction::from_heading(45.0), Direction::WE);
        assert_eq!(Direction::from_heading(134.9), Direction::WE);
        assert_eq!(Direction::from_heading(135.0), Direction::NS);
        assert_eq!(Direction::from_heading(225.0), Direction::EW);
        assert_eq!(Direction::from_heading(315.0), Direction::SN);
        assert_eq!(Direction::from_heading(44.9), Direction::SN);
        assert_eq!(Direction::from_heading(0.0), Direction::SN);
    }

    #[test]
    fn buffer_membership() {
        let f = make_frame(center()).unwrap();
        let at_center = img_at("c", "s", 0.0, 0.0, Some(90.0));
        // one metre outside the radius, measured along a meridian
        let outside = ImageMeta {
            position: GeoPoint::new(center().lat + 51.0 / f.m_per_deg_lat, center().lon).unwrap(),
            ..img_at("o", "s", 0.0, 0.0, Some(90.0))
        };
        let inside = img_at("i", "s", 30.0, -35.0, Some(90.0));
        let got = images_in_buffer(&[at_center, outside, inside], &buffer());
        let ids: Vec<_> = got.iter().map(|i| i.image_id.as_str()).collect();
        assert_eq!(ids, ["c", "i"]);
    }

    #[test]
    fn sequences_merge_into_one_track() {
        let images = vec![
            img_at("a2", "A", -10.0, -2.0, Some(91.0)),
            img_at("b1", "B", -35.0, -1.5, Some(88.0)),
            img_at("a1", "A", -30.0, -2.0, Some(90.0)),
            img_at("c1", "C", -20.0, -1.8, Some(95.0)),
        ];
        let (tracks, warnings) = build_tracks(&images, &buffer());
        assert!(warnings.is_empty());
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].direction, Direction::WE);
        let xs: Vec<f64> = tracks[0].images.iter().map(|i| local(i).x).collect();
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(xs, sorted);
        assert_eq!(tracks[0].images[0].image_id, "b1");
    }

    #[test]
    fn opposite_headings_split() {
        let images = vec![
            img_at("e", "A", -10.0, -2.0, Some(90.0)),
            img_at("w", "B", 10.0, 2.0, Some(270.0)),
        ];
        let (tracks, _) = build_tracks(&images, &buffer());
        let dirs: Vec<_> = tracks.iter().map(|t| t.direction).collect();
        assert_eq!(dirs, [Direction::WE, Direction::EW]);
        // EW orders by decreasing x
        let (t, _) = build_tracks(
            &[
                img_at("w1", "B", 30.0, 2.0, Some(270.0)),
                img_at("w2", "B", 10.0, 2.0, Some(270.0)),
            ],
            &buffer(),
        );
        assert_eq!(t[0].images[0].image_id, "w1");
    }

    #[test]
    fn single_image_track_and_missing_heading() {
        let (tracks, warnings) = build_tracks(
            &[
                img_at("a", "A", 0.0, -20.0, Some(2.0)),
                img_at("b", "A", 0.0, -10.0, None),
            ],
            &buffer(),
        );
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].images.len(), 1);
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].image_id, "b");
    }

    fn zigzag_track() -> Track {
        let images = (0..6)
            .map(|i| {
                let x = -40.0 + 6.0 * i as f64;
                let off = if i % 2 == 0 { 2.0 } else { -2.0 };
                img_at(&format!("z{i}"), "Z", x, -1.75 + off, Some(90.0))
            })
            .collect();
        Track {
            track_id: "x-WE".into(),
            intersection_id: "x".into(),
            direction: Direction::WE,
            images,
        }
    }

    #[test]
    fn zigzag_straightened() {
        let f = make_frame(center()).unwrap();
        let out = correct_track(&zigzag_track(), &f);
        assert!(out.corrected);
        let pts: Vec<LocalPoint> = out.track.images.iter().map(local).collect();
        // all points collinear: cross products against the first segment vanish
        let d = pts[pts.len() - 1].sub(pts[0]);
        for p in &pts {
            assert!(d.cross(p.sub(pts[0])).abs() / d.norm() < 1e-6);
        }
        // the fitted line stays inside the ±2 m drift band around y = -1.75
        for p in &pts {
            assert!((p.y + 1.75).abs() < 2.0, "{p:?}");
        }
        assert!(out.mean_displacement_m > 1.5);
    }

    #[test]
    fn collinear_track_unchanged() {
        let f = make_frame(center()).unwrap();
        let images: Vec<ImageMeta> = (0..4)
            .map(|i| img_at(&format!("s{i}"), "S", -30.0 + 5.0 * i as f64, -1.75, Some(90.0)))
            .collect();
        let t = Track {
            track_id: "t".into(),
            intersection_id: "x".into(),
            direction: Direction::WE,
            images: images.clone(),
        };
        let out = correct_track(&t, &f);
        for (a, b) in out.track.images.iter().zip(&images) {
            assert!(dist(local(a), local(b)) < 1e-9);
        }
    }

    #[test]
    fn short_track_flagged() {
        let f = make_frame(center()).unwrap();
        let mut t = zigzag_track();
        t.images.truncate(2);
        let out = correct_track(&t, &f);
        assert!(!out.corrected);
        assert_eq!(out.track, t);
    }

    proptest! {
        #[test]
        fn tracks_partition_images(headings in prop::collection::vec(prop::option::weighted(0.9, 0.0..360.0f64), 1..30)) {
            let images: Vec<ImageMeta> = headings.iter().enumerate()
                .map(|(i, h)| img_at(&format!("i{i:02}"), "S", (i as f64) - 15.0, (i as f64 * 0.7) - 10.0, *h))
                .collect();
            let (tracks, warnings) = build_tracks(&images, &buffer());
            let mut ids: Vec<String> = tracks.iter().flat_map(|t| t.images.iter().map(|i| i.image_id.clone())).collect();
            ids.extend(warnings.iter().map(|w| w.image_id.clone()));
            ids.sort();
            let mut want: Vec<String> = images.iter().map(|i| i.image_id.clone()).collect();
            want.sort();
            prop_assert_eq!(ids, want);
            for t in &tracks {
                let f = make_frame(center()).unwrap();
                let a: Vec<f64> = t.images.iter().map(|i| along(&f, t.direction, i)).collect();
                prop_assert!(a.windows(2).all(|w| w[0] <= w[1]));
                for i in &t.images {
                    prop_assert_eq!(Direction::from_heading(i.heading_deg.unwrap()), t.direction);
                }
            }
        }

        #[test]
        fn correction_idempotent(offsets in prop::collection::vec(-3.0..3.0f64, 3..8), slope in -0.2..0.2f64) {
            let f = make_frame(center()).unwrap();
            let images: Vec<ImageMeta> = offsets.iter().enumerate()
                .map(|(i, o)| { let x = -45.0 + 7.0 * i as f64; img_at(&format!("p{i}"), "P", x, slope * x + o, Some(90.0)) })
                .collect();
            let t = Track { track_id: "t".into(), intersection_id: "x".into(), direction: Direction::WE, images };
            let once = correct_track(&t, &f);
            let twice = correct_track(&once.track, &f);
            for (a, b) in once.track.images.iter().zip(&twice.track.images) {
                prop_assert_eq!(&a.image_id, &b.image_id);
                prop_assert!(dist(local(a), local(b)) < 1e-9);
            }
        }
    }
}
