//! Footprint-corner matching and geographic placement.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::atbt::{build_atbt, fuse_track, Atbt, FusedObject, ViewInfo};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geo::{dist, heading_vector, make_frame, nearest_of, polygon_centroid, Footprint, GeoPoint, LocalFrame, LocalPoint};
use crate::grammar::{apply_rules, Side};
use crate::ingest::{build_tracks, correct_track, images_in_buffer, Bundle, CategoryRegistry, ImageMeta, IntersectionBuffer};
use crate::scene::{scene_objects, LightKind, ObjectCategory};

/// Where a camera stands relative to the intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Case {
    /// Approaching.
    C1,
    /// Inside.
    C2,
    /// Leaving.
    C3,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CameraCase {
    pub image_id: String,
    pub case: Case,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlacerConfig {
    /// Cameras this close to the centre are inside the intersection.
    pub inner_radius_m: f64,
    /// Footprints need a vertex this close to the camera to be considered.
    pub corner_radius_m: f64,
    /// Distance from a footprint corner to a pole.
    pub offset_m: f64,
    /// Placements of the same kind closer than this are one object.
    pub dedup_radius_m: f64,
}

impl Default for PlacerConfig {
    fn default() -> Self {
        PlacerConfig {
            inner_radius_m: 10.0,
            corner_radius_m: 26.0,
            offset_m: 2.5,
            dedup_radius_m: 1.5,
        }
    }
}

impl PlacerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.inner_radius_m, self.corner_radius_m, self.offset_m, self.dedup_radius_m]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0);
        if !ok || self.corner_radius_m == 0.0 {
            return Err(Error::Config("placer: distances must be finite and >= 0".into()));
        }
        Ok(())
    }
}

pub fn classify_local(cam: LocalPoint, heading: LocalPoint, center: LocalPoint, inner_radius_m: f64) -> Result<Case> {
    let h = heading.unit().ok_or(Error::ZeroHeading)?;
    let v = center.sub(cam);
    Ok(if v.norm() <= inner_radius_m {
        Case::C2
    } else if h.dot(v) > 0.0 {
        Case::C1
    } else {
        Case::C3
    })
}

pub fn classify_camera(
    img: &ImageMeta,
    center: GeoPoint,
    frame: &LocalFrame,
    inner_radius_m: f64,
) -> Result<CameraCase> {
    let heading = img.heading_deg.ok_or(Error::ZeroHeading)?;
    let case = classify_local(
        frame.project(img.position)?,
        heading_vector(heading),
        frame.project(center)?,
        inner_radius_m,
    )?;
    Ok(CameraCase {
        image_id: img.image_id.clone(),
        case,
    })
}

/// A footprint in local metres.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFootprint {
    pub id: String,
    pub vertices: Vec<LocalPoint>,
    pub centroid: LocalPoint,
}

impl LocalFootprint {
    pub fn new(fp: &Footprint, frame: &LocalFrame) -> Result<Self> {
        let vertices = fp.local_vertices(frame)?;
        let centroid = polygon_centroid(&vertices).ok_or_else(|| Error::InvalidFootprint {
            id: fp.id.clone(),
            reason: "zero area".into(),
        })?;
        Ok(LocalFootprint {
            id: fp.id.clone(),
            vertices,
            centroid,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerPair {
    /// Left corner.
    pub a1: LocalPoint,
    /// Right corner.
    pub a2: LocalPoint,
    pub left_fp: String,
    pub right_fp: String,
}

impl CornerPair {
    pub fn corner(&self, side: Side) -> LocalPoint {
        match side {
            Side::Left => self.a1,
            Side::Right => self.a2,
        }
    }
}

/// Pick the anchor corner on each side of the road ahead.
///
/// Footprints with a vertex within `radius_m` of the camera are split by
/// which side of the heading line their centroid falls on. Each offers its
/// vertex nearest the intersection centre, provided that vertex lies ahead of
/// the camera; per side the footprint closest to the camera wins (ties by id).
/// Leaving cameras never get corners.
pub fn select_corners(
    cam: LocalPoint,
    heading: LocalPoint,
    case: Case,
    footprints: &[LocalFootprint],
    center: LocalPoint,
    radius_m: f64,
) -> Option<CornerPair> {
    if case == Case::C3 {
        return None;
    }
    let h = heading.unit()?;
    let mut best: [Option<(f64, &str, LocalPoint)>; 2] = [None, None];
    for fp in footprints {
        let Some((_, near)) = nearest_of(&fp.vertices, cam) else {
            continue;
        };
        if near > radius_m {
            continue;
        }
        let s = h.cross(fp.centroid.sub(cam));
        let slot = match s {
            s if s > 0.0 => 0,
            s if s < 0.0 => 1,
            _ => continue,
        };
        let Some((corner, _)) = nearest_of(&fp.vertices, center) else {
            continue;
        };
        if h.dot(corner.sub(cam)) <= 0.0 {
            continue;
        }
        let better = match best[slot] {
            None => true,
            Some((d, id, _)) => near < d || (near == d && fp.id.as_str() < id),
        };
        if better {
            best[slot] = Some((near, fp.id.as_str(), corner));
        }
    }
    let [Some(l), Some(r)] = best else {
        return None;
    };
    Some(CornerPair {
        a1: l.2,
        a2: r.2,
        left_fp: l.1.to_string(),
        right_fp: r.1.to_string(),
    })
}

/// One placed light or sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub category: ObjectCategory,
    pub subtype: Option<String>,
    pub light_kind: Option<LightKind>,
    pub position: GeoPoint,
    pub height_m: Option<f64>,
    pub source_images: Vec<String>,
    pub support: u32,
    pub inferred_only: bool,
    pub intersection_id: String,
    pub confidence: f64,
}

/// A non-fatal problem met while processing an intersection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub intersection_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub track_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_id: Option<String>,
    pub kind: String,
    pub message: String,
}

impl Diagnostic {
    fn new(intersection_id: &str, kind: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            intersection_id: intersection_id.to_string(),
            track_id: None,
            image_id: None,
            kind: kind.to_string(),
            message: message.into(),
        }
    }

    fn track(mut self, id: &str) -> Self {
        self.track_id = Some(id.to_string());
        self
    }

    fn image(mut self, id: &str) -> Self {
        self.image_id = Some(id.to_string());
        self
    }
}

/// Where on the ground a fused object goes, in local metres.
pub fn local_position(
    obj: &FusedObject,
    corners: &CornerPair,
    center: LocalPoint,
    offset_m: f64,
) -> Option<LocalPoint> {
    match obj.key.category {
        ObjectCategory::Sidewalk => None,
        ObjectCategory::TrafficLight if obj.light_kind == Some(LightKind::High) => {
            Some(corners.a1.midpoint(corners.a2))
        }
        _ => {
            let c = corners.corner(obj.key.side);
            center.sub(c).unit().map(|u| c.add(u.scale(offset_m)))
        }
    }
}

/// Context shared by all objects placed from one track.
#[derive(Debug, Clone, Copy)]
pub struct PlacementContext<'a> {
    pub frame: &'a LocalFrame,
    pub center: LocalPoint,
    pub buffer_radius_m: f64,
    pub track_images: usize,
    pub intersection_id: &'a str,
}

/// Place every light and sign of a fused track. Sidewalks are anchors only
/// and are not emitted.
pub fn place_objects(
    fused: &[FusedObject],
    corners: &CornerPair,
    ctx: &PlacementContext,
    cfg: &PlacerConfig,
) -> (Vec<PlacedObject>, Vec<Diagnostic>) {
    let mut placed = Vec::new();
    let mut diags = Vec::new();
    for obj in fused {
        if obj.key.category == ObjectCategory::Sidewalk {
            continue;
        }
        let what = format!("{} {:?} {:?}", obj.key.category, obj.key.side, obj.subtype);
        let Some(p) = local_position(obj, corners, ctx.center, cfg.offset_m) else {
            diags.push(Diagnostic::new(ctx.intersection_id, "unplaced", format!("{what}: corner coincides with centre")));
            continue;
        };
        if dist(p, ctx.center) > ctx.buffer_radius_m {
            diags.push(Diagnostic::new(ctx.intersection_id, "unplaced", format!("{what}: position outside buffer")));
            continue;
        }
        let Ok(position) = ctx.frame.unproject(p) else {
            diags.push(Diagnostic::new(ctx.intersection_id, "unplaced", format!("{what}: outside local frame")));
            continue;
        };
        let light_kind = match obj.key.category {
            ObjectCategory::TrafficLight => Some(obj.light_kind.unwrap_or(LightKind::Low)),
            _ => None,
        };
        let mut confidence = obj.support as f64 / ctx.track_images.max(1) as f64;
        if obj.inferred_only {
            confidence *= 0.5;
        }
        placed.push(PlacedObject {
            category: obj.key.category,
            subtype: obj.subtype.clone(),
            light_kind,
            position,
            height_m: light_kind.map(LightKind::height_m),
            source_images: obj.sources.clone(),
            support: obj.support,
            inferred_only: obj.inferred_only,
            intersection_id: ctx.intersection_id.to_string(),
            confidence: confidence.clamp(f64::MIN_POSITIVE, 1.0),
        });
    }
    (placed, diags)
}

fn object_order(a: &PlacedObject, b: &PlacedObject) -> std::cmp::Ordering {
    a.intersection_id
        .cmp(&b.intersection_id)
        .then(a.category.cmp(&b.category))
        .then_with(|| a.subtype.cmp(&b.subtype))
        .then(a.light_kind.cmp(&b.light_kind))
        .then(a.position.lat.total_cmp(&b.position.lat))
        .then(a.position.lon.total_cmp(&b.position.lon))
        .then(b.support.cmp(&a.support))
        .then_with(|| a.source_images.cmp(&b.source_images))
}

/// Merge placements of the same category and subtype lying within `radius_m`
/// of each other (transitively). The merged position is the
/// confidence-weighted mean.
pub fn dedup(objs: Vec<PlacedObject>, frame: &LocalFrame, radius_m: f64) -> Vec<PlacedObject> {
    let mut objs = objs;
    objs.sort_by(object_order);
    let local: Vec<LocalPoint> = objs
        .iter()
        .map(|o| frame.project(o.position).unwrap_or(LocalPoint::new(f64::NAN, f64::NAN)))
        .collect();
    let n = objs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if objs[i].category == objs[j].category
                && objs[i].subtype == objs[j].subtype
                && dist(local[i], local[j]) <= radius_m
            {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut out = Vec::new();
    for root in 0..n {
        if find(&mut parent, root) != root {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|i| find(&mut parent, *i) == root).collect();
        if members.len() == 1 {
            out.push(objs[root].clone());
            continue;
        }
        let wsum: f64 = members.iter().map(|i| objs[*i].confidence).sum();
        let mean = members
            .iter()
            .fold(LocalPoint::ORIGIN, |acc, i| acc.add(local[*i].scale(objs[*i].confidence)))
            .scale(1.0 / wsum);
        let lead = members
            .iter()
            .copied()
            .max_by(|a, b| objs[*a].confidence.total_cmp(&objs[*b].confidence).then(b.cmp(a)))
            .expect("non-empty");
        let mut merged = objs[lead].clone();
        merged.position = frame.unproject(mean).unwrap_or(merged.position);
        merged.support = members.iter().map(|i| objs[*i].support).sum();
        merged.inferred_only = members.iter().all(|i| objs[*i].inferred_only);
        merged.source_images = members
            .iter()
            .flat_map(|i| objs[*i].source_images.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        out.push(merged);
    }
    out.sort_by(object_order);
    out
}

/// Everything produced for one intersection.
#[derive(Debug, Clone, Default)]
pub struct IntersectionOutput {
    pub placed: Vec<PlacedObject>,
    pub diagnostics: Vec<Diagnostic>,
    pub trees: Vec<Atbt>,
    pub cases: Vec<CameraCase>,
}

/// Tree of one image: regions, rules, then the tree itself.
pub fn image_tree(img: &ImageMeta, bundle: &Bundle, registry: &CategoryRegistry, cfg: &RunConfig) -> Result<Atbt> {
    let lm = bundle.masks.get(&img.image_id)?;
    let (objs, tallest) = scene_objects(&lm, registry, bundle.detections_for(&img.image_id), &cfg.scene)?;
    let ruled = apply_rules(&objs, &lm, registry, tallest, &cfg.grammar);
    build_atbt(&ruled.objects, &ruled.groups, &img.image_id, lm.width)
}

/// Full pipeline for one intersection.
pub fn run_intersection(
    bundle: &Bundle,
    buffer: &IntersectionBuffer,
    registry: &CategoryRegistry,
    cfg: &RunConfig,
) -> Result<IntersectionOutput> {
    let iid = buffer.intersection_id.as_str();
    let frame = make_frame(buffer.center)?;
    let center = LocalPoint::ORIGIN;
    let pc = &cfg.placer;
    let mut out = IntersectionOutput::default();

    let reach = buffer.radius_m + pc.corner_radius_m;
    let footprints: Vec<LocalFootprint> = bundle
        .footprints
        .iter()
        .filter_map(|fp| LocalFootprint::new(fp, &frame).ok())
        .filter(|fp| fp.vertices.iter().any(|v| v.norm() <= reach))
        .collect();

    let images = images_in_buffer(&bundle.images, buffer);
    let (tracks, warnings) = build_tracks(&images, buffer);
    for w in warnings {
        out.diagnostics.push(Diagnostic::new(iid, "image_skipped", w.reason).image(&w.image_id));
    }

    let mut placed = Vec::new();
    for track in &tracks {
        let corrected = correct_track(track, &frame);
        let imgs = &corrected.track.images;
        let mut trees = Vec::with_capacity(imgs.len());
        let mut views = Vec::with_capacity(imgs.len());
        let mut poses = Vec::with_capacity(imgs.len());
        for img in imgs {
            let cam = frame.project(img.position)?;
            let heading = heading_vector(img.heading_deg.ok_or(Error::ZeroHeading)?);
            let case = classify_local(cam, heading, center, pc.inner_radius_m)?;
            trees.push(image_tree(img, bundle, registry, cfg)?);
            views.push(ViewInfo {
                case,
                distance_m: dist(cam, center),
            });
            poses.push((cam, heading));
            out.cases.push(CameraCase {
                image_id: img.image_id.clone(),
                case,
            });
        }
        let fused = fuse_track(&trees, &views);

        let mut order: Vec<usize> = (0..imgs.len()).filter(|i| views[*i].case == Case::C1).collect();
        order.sort_by(|a, b| views[*a].distance_m.total_cmp(&views[*b].distance_m).then(a.cmp(b)));
        order.extend((0..imgs.len()).filter(|i| views[*i].case == Case::C2));
        let corners = order.iter().find_map(|i| {
            let (cam, h) = poses[*i];
            select_corners(cam, h, views[*i].case, &footprints, center, pc.corner_radius_m)
        });
        out.trees.extend(trees);
        let Some(corners) = corners else {
            if fused.iter().any(|f| f.key.category != ObjectCategory::Sidewalk) {
                out.diagnostics.push(
                    Diagnostic::new(iid, "no_corners", "no image of the track yields a corner pair")
                        .track(&track.track_id),
                );
            }
            continue;
        };
        let ctx = PlacementContext {
            frame: &frame,
            center,
            buffer_radius_m: buffer.radius_m,
            track_images: imgs.len(),
            intersection_id: iid,
        };
        let (p, d) = place_objects(&fused, &corners, &ctx, pc);
        placed.extend(p);
        out.diagnostics
            .extend(d.into_iter().map(|d| d.track(&track.track_id)));
    }
    out.placed = dedup(placed, &frame, pc.dedup_radius_m);
    if out.placed.is_empty() {
        out.diagnostics.push(Diagnostic::new(iid, "empty", "no objects placed"));
    }
    Ok(out)
}

/// Run every intersection of a bundle, in parallel, keeping buffer order.
pub fn run_bundle(bundle: &Bundle, registry: &CategoryRegistry, cfg: &RunConfig) -> Result<(Vec<PlacedObject>, Vec<Diagnostic>)> {
    use rayon::prelude::*;
    let results: Vec<Result<IntersectionOutput>> = bundle
        .buffers
        .par_iter()
        .map(|b| run_intersection(bundle, b, registry, cfg))
        .collect();
    let mut placed = Vec::new();
    let mut diags = Vec::new();
    for r in results {
        let r = r?;
        placed.extend(r.placed);
        diags.extend(r.diagnostics);
    }
    Ok((placed, diags))
}

pub fn placed_to_geojson(objs: &[PlacedObject]) -> geojson::FeatureCollection {
    let features = objs
        .iter()
        .map(|o| {
            let mut props = geojson::JsonObject::new();
            props.insert("category".into(), serde_json::json!(o.category));
            props.insert("subtype".into(), serde_json::json!(o.subtype));
            props.insert("light_kind".into(), serde_json::json!(o.light_kind));
            props.insert("height_m".into(), serde_json::json!(o.height_m));
            props.insert("support".into(), serde_json::json!(o.support));
            props.insert("confidence".into(), serde_json::json!(o.confidence));
            props.insert("inferred_only".into(), serde_json::json!(o.inferred_only));
            props.insert("source_images".into(), serde_json::json!(o.source_images));
            props.insert("intersection_id".into(), serde_json::json!(o.intersection_id));
            geojson::Feature {
                bbox: None,
                geometry: Some(geojson::Geometry::new(geojson::Value::Point(vec![
                    o.position.lon,
                    o.position.lat,
                ]))),
                id: None,
                properties: Some(props),
                foreign_members: None,
            }
        })
        .collect();
    geojson::FeatureCollection {
        bbox: None,
        features,
        foreign_members: None,
    }
}

pub fn write_placed(path: &Path, objs: &[PlacedObject]) -> Result<()> {
    let text = geojson::GeoJson::from(placed_to_geojson(objs)).to_string() + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_placed(path: &Path) -> Result<Vec<PlacedObject>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let gj: geojson::GeoJson = text
        .parse()
        .map_err(|e: geojson::Error| Error::schema(path, "root", e.to_string()))?;
    let geojson::GeoJson::FeatureCollection(fc) = gj else {
        return Err(Error::schema(path, "type", "expected FeatureCollection"));
    };
    let mut out = Vec::with_capacity(fc.features.len());
    for (i, f) in fc.features.into_iter().enumerate() {
        let field = |s: &str| format!("features[{i}].{s}");
        let Some(geojson::Value::Point(pt)) = f.geometry.map(|g| g.value) else {
            return Err(Error::schema(path, field("geometry"), "expected Point"));
        };
        if pt.len() < 2 {
            return Err(Error::schema(path, field("geometry"), "short position"));
        }
        let position = GeoPoint::new(pt[1], pt[0])
            .map_err(|_| Error::schema(path, field("geometry"), "outside WGS84 range"))?;
        let mut props = serde_json::Value::Object(f.properties.unwrap_or_default());
        props["position"] = serde_json::json!({"lat": position.lat, "lon": position.lon});
        let obj = props.as_object_mut().expect("object");
        obj.entry("subtype").or_insert(serde_json::Value::Null);
        obj.entry("light_kind").or_insert(serde_json::Value::Null);
        obj.entry("height_m").or_insert(serde_json::Value::Null);
        obj.entry("source_images").or_insert(serde_json::json!([]));
        obj.entry("support").or_insert(serde_json::json!(1));
        obj.entry("inferred_only").or_insert(serde_json::json!(false));
        obj.entry("intersection_id").or_insert(serde_json::json!(""));
        obj.entry("confidence").or_insert(serde_json::json!(1.0));
        let p: PlacedObject = serde_json::from_value(props)
            .map_err(|e| Error::schema(path, field("properties"), e.to_string()))?;
        out.push(p);
    }
    Ok(out)
}

pub fn write_diagnostics(path: &Path, diags: &[Diagnostic]) -> Result<()> {
    let mut text = String::new();
    for d in diags {
        text.push_str(&serde_json::to_string(d).expect("serializable"));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atbt::FusionKey;
    use proptest::prelude::*;

    fn rect(id: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> LocalFootprint {
        let vertices = vec![
            LocalPoint::new(x0, y0),
            LocalPoint::new(x1, y0),
            LocalPoint::new(x1, y1),
            LocalPoint::new(x0, y1),
        ];
        LocalFootprint {
            id: id.into(),
            centroid: polygon_centroid(&vertices).unwrap(),
            vertices,
        }
    }

    fn crossroad() -> Vec<LocalFootprint> {
        vec![
            rect("sw", -28.5, -28.5, -8.5, -8.5),
            rect("nw", -28.5, 8.5, -8.5, 28.5),
            rect("ne", 8.5, 8.5, 28.5, 28.5),
            rect("se", 8.5, -28.5, 28.5, -8.5),
        ]
    }

    const EAST: LocalPoint = LocalPoint::new(1.0, 0.0);

    #[test]
    fn camera_cases() {
        let o = LocalPoint::ORIGIN;
        assert_eq!(classify_local(LocalPoint::new(-20.0, 0.0), EAST, o, 10.0).unwrap(), Case::C1);
        assert_eq!(classify_local(LocalPoint::new(-5.0, 0.0), EAST, o, 10.0).unwrap(), Case::C2);
        assert_eq!(classify_local(LocalPoint::new(20.0, 0.0), EAST, o, 10.0).unwrap(), Case::C3);
        assert!(matches!(classify_local(o, LocalPoint::ORIGIN, o, 10.0), Err(Error::ZeroHeading)));
    }

    #[test]
    fn classify_from_metadata() {
        let center = GeoPoint::new(52.52, 13.40).unwrap();
        let frame = make_frame(center).unwrap();
        let img = ImageMeta {
            image_id: "a".into(),
            position: frame.unproject(LocalPoint::new(-20.0, 0.0)).unwrap(),
            heading_deg: Some(90.0),
            sequence_id: "s".into(),
            captured_at: "t".into(),
            width_px: 10,
            height_px: 10,
        };
        assert_eq!(classify_camera(&img, center, &frame, 10.0).unwrap().case, Case::C1);
        let no_heading = ImageMeta { heading_deg: None, ..img };
        assert!(classify_camera(&no_heading, center, &frame, 10.0).is_err());
    }

    #[test]
    fn approaching_corners() {
        let cp = select_corners(LocalPoint::new(-20.0, -1.75), EAST, Case::C1, &crossroad(), LocalPoint::ORIGIN, 26.0).unwrap();
        assert_eq!((cp.left_fp.as_str(), cp.right_fp.as_str()), ("nw", "sw"));
        assert_eq!(cp.a1, LocalPoint::new(-8.5, 8.5));
        assert_eq!(cp.a2, LocalPoint::new(-8.5, -8.5));
    }

    #[test]
    fn inside_uses_corners_ahead() {
        let cp = select_corners(LocalPoint::new(-4.0, -1.75), EAST, Case::C2, &crossroad(), LocalPoint::ORIGIN, 26.0).unwrap();
        assert_eq!((cp.left_fp.as_str(), cp.right_fp.as_str()), ("ne", "se"));
        assert_eq!(cp.a1, LocalPoint::new(8.5, 8.5));
    }

    #[test]
    fn leaving_has_none() {
        let cam = LocalPoint::new(20.0, -1.75);
        assert!(select_corners(cam, EAST, Case::C3, &crossroad(), LocalPoint::ORIGIN, 26.0).is_none());
        // even ignoring the case, nothing lies ahead
        assert!(select_corners(cam, EAST, Case::C1, &crossroad(), LocalPoint::ORIGIN, 26.0).is_none());
    }

    fn fused(cat: ObjectCategory, side: Side, kind: Option<LightKind>, sub: Option<&str>) -> FusedObject {
        FusedObject {
            key: FusionKey {
                side,
                category: cat,
                stack_ordinal: 0,
                depth_in_stack: 0,
                subtype: sub.map(String::from),
            },
            support: 2,
            best_image: "a".into(),
            subtype: sub.map(String::from),
            light_kind: kind,
            inferred_only: false,
            sources: vec!["a".into(), "b".into()],
        }
    }

    fn pair() -> CornerPair {
        CornerPair {
            a1: LocalPoint::new(-10.0, 8.0),
            a2: LocalPoint::new(10.0, 8.0),
            left_fp: "l".into(),
            right_fp: "r".into(),
        }
    }

    #[test]
    fn offsets_and_midpoint() {
        let mut cp = pair();
        let low = fused(ObjectCategory::TrafficLight, Side::Right, Some(LightKind::Low), None);
        let p = local_position(&low, &cp, LocalPoint::ORIGIN, 2.5).unwrap();
        let n = (100.0f64 + 64.0).sqrt();
        assert!((p.x - (10.0 - 2.5 * 10.0 / n)).abs() < 1e-12);
        assert!((p.y - (8.0 - 2.5 * 8.0 / n)).abs() < 1e-12);
        assert!((dist(p, cp.a2) - 2.5).abs() < 1e-12);
        let high = fused(ObjectCategory::TrafficLight, Side::Left, Some(LightKind::High), None);
        assert_eq!(local_position(&high, &cp, LocalPoint::ORIGIN, 2.5), Some(LocalPoint::new(0.0, 8.0)));
        cp.a2 = LocalPoint::ORIGIN;
        assert_eq!(local_position(&low, &cp, LocalPoint::ORIGIN, 2.5), None);
    }

    #[test]
    fn stack_shares_position() {
        let frame = make_frame(GeoPoint::new(48.0, 11.0).unwrap()).unwrap();
        let ctx = PlacementContext {
            frame: &frame,
            center: LocalPoint::ORIGIN,
            buffer_radius_m: 50.0,
            track_images: 4,
            intersection_id: "x",
        };
        let objs = [
            fused(ObjectCategory::TrafficSign, Side::Right, None, Some("stop")),
            fused(ObjectCategory::TrafficSign, Side::Right, None, Some("no_entry")),
            fused(ObjectCategory::TrafficLight, Side::Right, Some(LightKind::Low), None),
            fused(ObjectCategory::Sidewalk, Side::Right, None, None),
        ];
        let (placed, diags) = place_objects(&objs, &pair(), &ctx, &PlacerConfig::default());
        assert!(diags.is_empty());
        assert_eq!(placed.len(), 3);
        assert!(placed.iter().all(|p| p.position == placed[0].position));
        assert_eq!(placed[2].height_m, Some(4.0));
        assert_eq!(placed[0].height_m, None);
        assert_eq!(placed[0].confidence, 0.5);
    }

    fn placed_at(frame: &LocalFrame, p: LocalPoint, conf: f64) -> PlacedObject {
        PlacedObject {
            category: ObjectCategory::TrafficSign,
            subtype: Some("stop".into()),
            light_kind: None,
            position: frame.unproject(p).unwrap(),
            height_m: None,
            source_images: vec![format!("{conf}")],
            support: 1,
            inferred_only: true,
            intersection_id: "x".into(),
            confidence: conf,
        }
    }

    #[test]
    fn dedup_weighted_mean() {
        let frame = make_frame(GeoPoint::new(48.0, 11.0).unwrap()).unwrap();
        let a = placed_at(&frame, LocalPoint::new(0.0, 0.0), 0.75);
        let mut b = placed_at(&frame, LocalPoint::new(0.8, 0.0), 0.25);
        b.inferred_only = false;
        let far = placed_at(&frame, LocalPoint::new(5.0, 0.0), 0.5);
        let out = dedup(vec![a, b, far], &frame, 1.5);
        assert_eq!(out.len(), 2);
        let m = out.iter().find(|o| o.support == 2).unwrap();
        let p = frame.project(m.position).unwrap();
        assert!((p.x - 0.2).abs() < 1e-6 && p.y.abs() < 1e-6);
        assert_eq!(m.confidence, 0.75);
        assert!(!m.inferred_only);
        assert_eq!(m.source_images.len(), 2);
    }

    /// Independent scan over every (footprint, vertex) pair.
    fn brute(cam: LocalPoint, h: LocalPoint, fps: &[LocalFootprint], radius: f64) -> Option<(String, String, LocalPoint, LocalPoint)> {
        let h = h.unit()?;
        let mut per_side: [Vec<(f64, String, LocalPoint)>; 2] = [vec![], vec![]];
        for fp in fps {
            let dists: Vec<f64> = fp.vertices.iter().map(|v| ((v.x - cam.x).powi(2) + (v.y - cam.y).powi(2)).sqrt()).collect();
            let near = dists.iter().cloned().fold(f64::INFINITY, f64::min);
            if near > radius {
                continue;
            }
            let cd: Vec<f64> = fp.vertices.iter().map(|v| (v.x * v.x + v.y * v.y).sqrt()).collect();
            let m = cd.iter().cloned().fold(f64::INFINITY, f64::min);
            let corner = fp.vertices[cd.iter().position(|d| *d == m).unwrap()];
            if (corner.x - cam.x) * h.x + (corner.y - cam.y) * h.y <= 0.0 {
                continue;
            }
            let s = h.x * (fp.centroid.y - cam.y) - h.y * (fp.centroid.x - cam.x);
            if s != 0.0 {
                per_side[(s < 0.0) as usize].push((near, fp.id.clone(), corner));
            }
        }
        let pick = |v: &mut Vec<(f64, String, LocalPoint)>| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            v.first().cloned()
        };
        let l = pick(&mut per_side[0])?;
        let r = pick(&mut per_side[1])?;
        Some((l.1, r.1, l.2, r.2))
    }

    proptest! {
        #[test]
        fn matches_brute_force_and_is_order_free(
            boxes in prop::collection::vec((-40.0..40.0f64, -40.0..40.0f64, 3.0..20.0f64, 3.0..20.0f64), 0..8),
            cam in (-30.0..30.0f64, -30.0..30.0f64),
            heading in 0.0..360.0f64,
        ) {
            let fps: Vec<LocalFootprint> = boxes.iter().enumerate()
                .map(|(i, (x, y, w, h))| rect(&format!("f{i}"), *x, *y, x + w, y + h)).collect();
            let cam = LocalPoint::new(cam.0, cam.1);
            let h = heading_vector(heading);
            let got = select_corners(cam, h, Case::C1, &fps, LocalPoint::ORIGIN, 26.0)
                .map(|c| (c.left_fp, c.right_fp, c.a1, c.a2));
            prop_assert_eq!(&got, &brute(cam, h, &fps, 26.0));
            let mut rev = fps.clone();
            rev.reverse();
            let again = select_corners(cam, h, Case::C1, &rev, LocalPoint::ORIGIN, 26.0)
                .map(|c| (c.left_fp, c.right_fp, c.a1, c.a2));
            prop_assert_eq!(got, again);
        }

        #[test]
        fn corner_offset_is_exact(cx in -30.0..30.0f64, cy in -30.0..30.0f64) {
            prop_assume!(cx.hypot(cy) > 1e-3);
            let cp = CornerPair { a1: LocalPoint::new(cx, cy), a2: LocalPoint::new(cy, -cx), left_fp: "l".into(), right_fp: "r".into() };
            for side in [Side::Left, Side::Right] {
                let o = fused(ObjectCategory::TrafficSign, side, None, Some("x"));
                let p = local_position(&o, &cp, LocalPoint::ORIGIN, 2.5).unwrap();
                prop_assert!((dist(p, cp.corner(side)) - 2.5).abs() < 1e-6);
            }
        }
    }
}
