//! Synthetic intersections: declarative layouts rendered into complete input
//! bundles with known ground truth.

mod fixtures;
mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use fixtures::{fixtures_with, standard_fixtures, FixtureOptions};
pub use render::{render_view, Camera, RenderedView, Visibility};

use crate::error::{Error, Result};
use crate::geo::{make_frame, Footprint, GeoPoint, LocalPoint};
use crate::ingest::{
    write_buffers, write_detections, write_footprints, write_images, Bundle, CategoryRegistry,
    Detection, ImageMeta, IntersectionBuffer, LabelMap, MaskStore,
};
use crate::placer::{write_placed, PlacedObject};
use crate::scene::{LightKind, ObjectCategory};

pub const LIGHT_SIZE_M: (f64, f64) = (0.3, 0.9);
pub const SIGN_SIZE_M: (f64, f64) = (0.6, 0.6);
pub const PEDESTRIAN_WIDTH_M: f64 = 0.5;
/// A billboard is seen only from within this angle of one of its facings.
pub const FACING_HALF_ANGLE_DEG: f64 = 70.0;
const MAX_EXTENT_M: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraModel {
    pub hfov_deg: f64,
    pub width_px: u32,
    pub height_px: u32,
    pub cam_height_m: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            hfov_deg: 90.0,
            width_px: 1024,
            height_px: 768,
            cam_height_m: 1.6,
        }
    }
}

impl CameraModel {
    pub fn focal_px(&self) -> f64 {
        0.5 * self.width_px as f64 / (0.5 * self.hfov_deg.to_radians()).tan()
    }
}

/// Axis-aligned building block in local metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectFootprint {
    pub id: String,
    pub min: LocalPoint,
    pub max: LocalPoint,
    pub height_m: f64,
}

impl RectFootprint {
    pub fn contains(&self, p: LocalPoint) -> bool {
        p.x > self.min.x && p.x < self.max.x && p.y > self.min.y && p.y < self.max.y
    }

    /// Corners counter-clockwise from the south-west one.
    pub fn corners(&self) -> [LocalPoint; 4] {
        [
            self.min,
            LocalPoint::new(self.max.x, self.min.y),
            self.max,
            LocalPoint::new(self.min.x, self.max.y),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthObject {
    pub category: ObjectCategory,
    #[serde(default)]
    pub subtype: Option<String>,
    #[serde(default)]
    pub light_kind: Option<LightKind>,
    pub position: LocalPoint,
    /// Mounting height for lights (top of the housing).
    #[serde(default)]
    pub height_m: Option<f64>,
    /// Height of the billboard centre above ground.
    pub center_z_m: f64,
    /// Compass directions the object faces; empty means all round.
    #[serde(default)]
    pub facing_deg: Vec<f64>,
}

impl TruthObject {
    pub fn size_m(&self) -> (f64, f64) {
        match self.category {
            ObjectCategory::TrafficLight => LIGHT_SIZE_M,
            _ => SIGN_SIZE_M,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pedestrian {
    pub position: LocalPoint,
    pub height_m: f64,
}

/// A parked vehicle, drawn as an upright board facing the camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occluder {
    pub position: LocalPoint,
    pub width_m: f64,
    pub height_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraPose {
    pub image_id: String,
    pub sequence_id: String,
    pub captured_at: String,
    /// True position, used for rendering.
    pub position: LocalPoint,
    pub heading_deg: f64,
    /// Error added to the reported position.
    #[serde(default)]
    pub gps_offset: LocalPoint,
    /// Error added to the reported heading.
    #[serde(default)]
    pub heading_noise_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layout {
    pub intersection_id: String,
    pub center: GeoPoint,
    #[serde(default = "default_radius")]
    pub radius_m: f64,
    #[serde(default = "default_sidewalk")]
    pub sidewalk_width_m: f64,
    pub footprints: Vec<RectFootprint>,
    pub truth_objects: Vec<TruthObject>,
    #[serde(default)]
    pub pedestrians: Vec<Pedestrian>,
    #[serde(default)]
    pub occluders: Vec<Occluder>,
    pub cameras: Vec<CameraPose>,
    #[serde(default)]
    pub camera: CameraModel,
}

fn default_radius() -> f64 {
    50.0
}

fn default_sidewalk() -> f64 {
    2.5
}

impl Layout {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidLayout(format!("{}: {m}", self.intersection_id)));
        let cm = &self.camera;
        if !(cm.hfov_deg > 1.0 && cm.hfov_deg < 179.0) || cm.width_px == 0 || cm.height_px == 0 || cm.cam_height_m <= 0.0 {
            return bad("camera model out of range".into());
        }
        if !self.center.is_valid() || self.center.lat.abs() > 89.0 {
            return bad("centre unusable".into());
        }
        if !(self.radius_m > 0.0) || !(self.sidewalk_width_m >= 0.0) {
            return bad("radius and sidewalk width must be positive".into());
        }
        let far = |p: LocalPoint| !(p.norm() <= MAX_EXTENT_M);
        let mut ids = BTreeSet::new();
        for fp in &self.footprints {
            if !ids.insert(&fp.id) {
                return bad(format!("duplicate footprint id {}", fp.id));
            }
            if !(fp.min.x < fp.max.x && fp.min.y < fp.max.y) {
                return bad(format!("footprint {} is empty", fp.id));
            }
            if !(fp.height_m > cm.cam_height_m) {
                return bad(format!("footprint {} lower than the camera", fp.id));
            }
            if fp.corners().iter().any(|c| far(*c)) {
                return bad(format!("footprint {} beyond {MAX_EXTENT_M} m", fp.id));
            }
        }
        for (i, o) in self.truth_objects.iter().enumerate() {
            if far(o.position) || !(o.center_z_m > 0.0) {
                return bad(format!("truth object {i} misplaced"));
            }
            match o.category {
                ObjectCategory::TrafficLight => {
                    let (Some(k), Some(h)) = (o.light_kind, o.height_m) else {
                        return bad(format!("light {i} needs light_kind and height_m"));
                    };
                    if h != k.height_m() {
                        return bad(format!("light {i} height {h} does not match its kind"));
                    }
                }
                ObjectCategory::TrafficSign => {
                    if o.light_kind.is_some() || o.height_m.is_some() {
                        return bad(format!("sign {i} carries light attributes"));
                    }
                }
                ObjectCategory::Sidewalk => return bad(format!("truth object {i} is a sidewalk")),
            }
        }
        if self.pedestrians.iter().any(|p| far(p.position) || !(p.height_m > 0.0))
            || self.occluders.iter().any(|o| far(o.position) || !(o.height_m > 0.0 && o.width_m > 0.0))
        {
            return bad("pedestrian or occluder misplaced".into());
        }
        let mut cam_ids = BTreeSet::new();
        for c in &self.cameras {
            if !cam_ids.insert(&c.image_id) {
                return bad(format!("duplicate image id {}", c.image_id));
            }
            if far(c.position) || far(c.position.add(c.gps_offset)) || !c.heading_deg.is_finite() {
                return bad(format!("camera {} misplaced", c.image_id));
            }
            if let Some(fp) = self.footprints.iter().find(|f| f.contains(c.position)) {
                return bad(format!("camera {} inside footprint {}", c.image_id, fp.id));
            }
        }
        Ok(())
    }

    pub fn buffer(&self) -> IntersectionBuffer {
        IntersectionBuffer {
            intersection_id: self.intersection_id.clone(),
            center: self.center,
            radius_m: self.radius_m,
        }
    }

    pub fn read(path: &Path) -> Result<Vec<Layout>> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let json = |source| Error::Json {
            path: path.to_path_buf(),
            source,
        };
        let value: serde_json::Value = serde_json::from_str(&text).map_err(json)?;
        let layouts: Vec<Layout> = if value.is_array() {
            serde_json::from_value(value).map_err(json)?
        } else {
            vec![serde_json::from_value(value).map_err(json)?]
        };
        for l in &layouts {
            l.validate()?;
        }
        Ok(layouts)
    }
}

/// One rendered intersection in the ingest formats, plus its truth.
#[derive(Debug, Clone)]
pub struct RenderedIntersection {
    pub buffer: IntersectionBuffer,
    pub images: Vec<ImageMeta>,
    pub masks: BTreeMap<String, LabelMap>,
    pub detections: Vec<Detection>,
    pub footprints: Vec<Footprint>,
    pub truth: Vec<PlacedObject>,
}

impl RenderedIntersection {
    pub fn into_bundle(self) -> Bundle {
        let mut detections: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
        for d in self.detections {
            detections.entry(d.image_id.clone()).or_default().push(d);
        }
        Bundle {
            images: self.images,
            detections,
            footprints: self.footprints,
            buffers: vec![self.buffer],
            masks: MaskStore::Memory(self.masks),
        }
    }
}

/// Truth objects as placed objects, for evaluation.
pub fn truth_of(layout: &Layout) -> Result<Vec<PlacedObject>> {
    let frame = make_frame(layout.center)?;
    layout
        .truth_objects
        .iter()
        .map(|o| {
            Ok(PlacedObject {
                category: o.category,
                subtype: o.subtype.clone(),
                light_kind: o.light_kind,
                position: frame.unproject(o.position)?,
                height_m: o.height_m,
                source_images: Vec::new(),
                support: 1,
                inferred_only: false,
                intersection_id: layout.intersection_id.clone(),
                confidence: 1.0,
            })
        })
        .collect()
}

/// Render every camera of `layout`.
pub fn render_bundle(layout: &Layout) -> Result<RenderedIntersection> {
    layout.validate()?;
    let registry = CategoryRegistry::default();
    let frame = make_frame(layout.center)?;
    let mut images = Vec::with_capacity(layout.cameras.len());
    let mut masks = BTreeMap::new();
    let mut detections = Vec::new();
    for (i, cam) in layout.cameras.iter().enumerate() {
        let view = render_view(layout, i, &registry)?;
        images.push(ImageMeta {
            image_id: cam.image_id.clone(),
            position: frame.unproject(cam.position.add(cam.gps_offset))?,
            heading_deg: Some((cam.heading_deg + cam.heading_noise_deg).rem_euclid(360.0)),
            sequence_id: cam.sequence_id.clone(),
            captured_at: cam.captured_at.clone(),
            width_px: layout.camera.width_px,
            height_px: layout.camera.height_px,
        });
        masks.insert(cam.image_id.clone(), view.label_map);
        detections.extend(view.detections);
    }
    let footprints = layout
        .footprints
        .iter()
        .map(|f| {
            let ring = f
                .corners()
                .iter()
                .map(|c| frame.unproject(*c))
                .collect::<Result<Vec<_>>>()?;
            Footprint::new(f.id.clone(), ring)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RenderedIntersection {
        buffer: layout.buffer(),
        images,
        masks,
        detections,
        footprints,
        truth: truth_of(layout)?,
    })
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    seed: Option<u64>,
    intersections: Vec<&'a str>,
    images: usize,
    truth_objects: usize,
}

/// Write rendered intersections as one bundle directory:
/// `images.json`, `masks/`, `detections.jsonl`, `footprints.geojson`,
/// `buffers.json`, `truth.geojson` and `manifest.json`.
pub fn write_bundle(dir: &Path, rendered: &[RenderedIntersection], seed: Option<u64>) -> Result<()> {
    let masks_dir = dir.join("masks");
    std::fs::create_dir_all(&masks_dir).map_err(|e| Error::io(&masks_dir, e))?;
    let images: Vec<ImageMeta> = rendered.iter().flat_map(|r| r.images.clone()).collect();
    for r in rendered {
        for (id, lm) in &r.masks {
            lm.write_pgm(&masks_dir.join(format!("{id}.pgm")))?;
        }
    }
    write_images(&dir.join("images.json"), &images)?;
    let dets: Vec<Detection> = rendered.iter().flat_map(|r| r.detections.clone()).collect();
    write_detections(&dir.join("detections.jsonl"), &dets)?;
    let fps: Vec<Footprint> = rendered.iter().flat_map(|r| r.footprints.clone()).collect();
    write_footprints(&dir.join("footprints.geojson"), &fps)?;
    let buffers: Vec<IntersectionBuffer> = rendered.iter().map(|r| r.buffer.clone()).collect();
    write_buffers(&dir.join("buffers.json"), &buffers)?;
    let truth: Vec<PlacedObject> = rendered.iter().flat_map(|r| r.truth.clone()).collect();
    write_placed(&dir.join("truth.geojson"), &truth)?;
    let manifest = Manifest {
        seed,
        intersections: rendered.iter().map(|r| r.buffer.intersection_id.as_str()).collect(),
        images: images.len(),
        truth_objects: truth.len(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
