//! Label-map regions and their reconciliation with sign detections.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::{Category, CategoryRegistry, Detection, LabelMap};

/// Axis-aligned box in continuous pixel coordinates; pixel `(c, r)` covers
/// `[c, c+1) × [r, r+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    pub fn contains(&self, (c, r): (f64, f64)) -> bool {
        c >= self.x && c <= self.right() && r >= self.y && r <= self.bottom()
    }

    pub fn union(&self, o: &BBox) -> BBox {
        let x = self.x.min(o.x);
        let y = self.y.min(o.y);
        BBox::new(x, y, self.right().max(o.right()) - x, self.bottom().max(o.bottom()) - y)
    }

    pub fn iou(&self, o: &BBox) -> f64 {
        let iw = self.right().min(o.right()) - self.x.max(o.x);
        let ih = self.bottom().min(o.bottom()) - self.y.max(o.y);
        if iw <= 0.0 || ih <= 0.0 {
            return 0.0;
        }
        let inter = iw * ih;
        inter / (self.area() + o.area() - inter)
    }

    /// Horizontal gap between the two boxes; 0 when their column ranges overlap.
    pub fn h_gap(&self, o: &BBox) -> f64 {
        (o.x - self.right()).max(self.x - o.right()).max(0.0)
    }
}

/// One 4-connected component of a single category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub category: Category,
    pub pixels: u32,
    /// Mean pixel centre `(col, row)`.
    pub centroid_px: (f64, f64),
    pub bbox_px: BBox,
}

/// The three kinds of tree node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectCategory {
    TrafficLight,
    TrafficSign,
    Sidewalk,
}

impl ObjectCategory {
    pub fn name(self) -> &'static str {
        match self {
            ObjectCategory::TrafficLight => "traffic_light",
            ObjectCategory::TrafficSign => "traffic_sign",
            ObjectCategory::Sidewalk => "sidewalk",
        }
    }
}

impl std::fmt::Display for ObjectCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Mounting of a traffic light.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightKind {
    /// Suspended over the carriageway.
    High,
    /// On a sidewalk pole.
    Low,
}

impl LightKind {
    pub const HIGH_HEIGHT_M: f64 = 7.0;
    pub const LOW_HEIGHT_M: f64 = 4.0;

    pub fn height_m(self) -> f64 {
        match self {
            LightKind::High => Self::HIGH_HEIGHT_M,
            LightKind::Low => Self::LOW_HEIGHT_M,
        }
    }
}

/// A light, sign or sidewalk seen in one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub object_id: u32,
    pub category: ObjectCategory,
    pub centroid_px: (f64, f64),
    pub area_px: f64,
    /// Absent for inferred objects.
    pub bbox_px: Option<BBox>,
    pub subtype: Option<String>,
    #[serde(default)]
    pub inferred: bool,
    #[serde(default)]
    pub light_kind: Option<LightKind>,
    /// Set when a rule had to fall back to a weaker cue.
    #[serde(default)]
    pub low_confidence: bool,
}

impl SceneObject {
    pub fn is_low_light(&self) -> bool {
        self.category == ObjectCategory::TrafficLight && self.light_kind == Some(LightKind::Low)
    }

    pub fn is_high_light(&self) -> bool {
        self.category == ObjectCategory::TrafficLight && self.light_kind == Some(LightKind::High)
    }
}

/// Region extraction and detection matching thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// Components smaller than this are noise.
    pub min_region_px: u32,
    /// Least IoU for a detection to claim a sign region.
    pub iou_min: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            min_region_px: 25,
            iou_min: 0.3,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_min > 0.0 && self.iou_min <= 1.0) {
            return Err(crate::Error::Config("scene: iou_min must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Scene objects of one image plus the tallest pedestrian seen, in pixels.
pub fn scene_objects(
    label_map: &LabelMap,
    registry: &CategoryRegistry,
    detections: &[Detection],
    cfg: &SceneConfig,
) -> Result<(Vec<SceneObject>, Option<f64>)> {
    let regions = extract_regions_where(label_map, registry, cfg.min_region_px, |c| {
        matches!(
            c,
            Category::TrafficLight | Category::TrafficSign | Category::Sidewalk | Category::Pedestrian
        )
    })?;
    Ok((reconcile(&regions, detections, cfg.iou_min), tallest_pedestrian_in(&regions)))
}

#[derive(Default)]
struct Acc {
    pixels: u32,
    sum_c: f64,
    sum_r: f64,
    min_c: u32,
    min_r: u32,
    max_c: u32,
    max_r: u32,
}

/// 4-connected components of every category except `other`, dropping those
/// smaller than `min_region_px`. Ordered by category pixel id, then by the
/// row-major position of each component's first pixel.
pub fn extract_regions(
    label_map: &LabelMap,
    registry: &CategoryRegistry,
    min_region_px: u32,
) -> Result<Vec<Region>> {
    extract_regions_where(label_map, registry, min_region_px, |c| c != Category::Other)
}

/// [`extract_regions`] restricted to the categories accepted by `keep`.
pub fn extract_regions_where(
    label_map: &LabelMap,
    registry: &CategoryRegistry,
    min_region_px: u32,
    keep: impl Fn(Category) -> bool,
) -> Result<Vec<Region>> {
    let w = label_map.width as usize;
    let h = label_map.height as usize;
    let mut wanted = [false; 256];
    for id in 0..=255u8 {
        if let Some(c) = registry.lookup(id) {
            wanted[id as usize] = keep(c);
        }
    }
    // validate ids up front so errors do not depend on traversal order
    let mut seen_id = [false; 256];
    for &px in &label_map.data {
        seen_id[px as usize] = true;
    }
    for (id, seen) in seen_id.iter().enumerate() {
        if *seen {
            registry.category(id as u8)?;
        }
    }

    let mut visited = vec![false; w * h];
    let mut found: Vec<(u8, usize, Acc)> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        let id = label_map.data[start];
        if visited[start] || !wanted[id as usize] {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        let mut acc = Acc {
            min_c: u32::MAX,
            min_r: u32::MAX,
            ..Default::default()
        };
        while let Some(i) = stack.pop() {
            let (c, r) = (i % w, i / w);
            acc.pixels += 1;
            acc.sum_c += c as f64 + 0.5;
            acc.sum_r += r as f64 + 0.5;
            acc.min_c = acc.min_c.min(c as u32);
            acc.min_r = acc.min_r.min(r as u32);
            acc.max_c = acc.max_c.max(c as u32);
            acc.max_r = acc.max_r.max(r as u32);
            let mut push = |j: usize| {
                if !visited[j] && label_map.data[j] == id {
                    visited[j] = true;
                    stack.push(j);
                }
            };
            if c > 0 {
                push(i - 1);
            }
            if c + 1 < w {
                push(i + 1);
            }
            if r > 0 {
                push(i - w);
            }
            if r + 1 < h {
                push(i + w);
            }
        }
        if acc.pixels >= min_region_px.max(1) {
            found.push((id, start, acc));
        }
    }
    found.sort_by_key(|(id, start, _)| (*id, *start));
    Ok(found
        .into_iter()
        .map(|(id, _, a)| Region {
            category: registry.lookup(id).expect("validated"),
            pixels: a.pixels,
            centroid_px: (a.sum_c / a.pixels as f64, a.sum_r / a.pixels as f64),
            bbox_px: BBox::new(
                a.min_c as f64,
                a.min_r as f64,
                (a.max_c - a.min_c + 1) as f64,
                (a.max_r - a.min_r + 1) as f64,
            ),
        })
        .collect())
}

fn det_bbox(d: &Detection) -> BBox {
    BBox::new(d.bbox[0], d.bbox[1], d.bbox[2], d.bbox[3])
}

/// Cross-check segmentation regions against sign detections.
///
/// Every sign detection yields one sign object. A detection that is the only
/// one overlapping a sign region (IoU ≥ `iou_min`) takes the region's centroid
/// and area; detections sharing a region, or matching none, use their own box.
/// Sign regions with no detection are dropped. Light and sidewalk regions pass
/// through unchanged.
pub fn reconcile(regions: &[Region], detections: &[Detection], iou_min: f64) -> Vec<SceneObject> {
    let mut out = Vec::new();
    let mut next_id = 0u32;
    let mut push = |out: &mut Vec<SceneObject>, mut o: SceneObject| {
        o.object_id = next_id;
        next_id += 1;
        out.push(o);
    };
    let from_region = |r: &Region, category| SceneObject {
        object_id: 0,
        category,
        centroid_px: r.centroid_px,
        area_px: r.pixels as f64,
        bbox_px: Some(r.bbox_px),
        subtype: None,
        inferred: false,
        light_kind: None,
        low_confidence: false,
    };

    for r in regions.iter().filter(|r| r.category == Category::TrafficLight) {
        push(&mut out, from_region(r, ObjectCategory::TrafficLight));
    }

    let sign_regions: Vec<&Region> = regions
        .iter()
        .filter(|r| r.category == Category::TrafficSign)
        .collect();
    let mut dets: Vec<&Detection> = detections
        .iter()
        .filter(|d| d.category == Category::TrafficSign.name())
        .collect();
    dets.sort_by(|a, b| {
        let (ba, bb) = (det_bbox(a), det_bbox(b));
        ba.y.total_cmp(&bb.y)
            .then(ba.x.total_cmp(&bb.x))
            .then(ba.w.total_cmp(&bb.w))
            .then(ba.h.total_cmp(&bb.h))
            .then_with(|| a.subtype.cmp(&b.subtype))
    });
    let best: Vec<Option<usize>> = dets
        .iter()
        .map(|d| {
            let bb = det_bbox(d);
            let mut best: Option<(usize, f64)> = None;
            for (i, r) in sign_regions.iter().enumerate() {
                let iou = r.bbox_px.iou(&bb);
                if iou >= iou_min && best.is_none_or(|(_, b)| iou > b) {
                    best = Some((i, iou));
                }
            }
            best.map(|(i, _)| i)
        })
        .collect();
    let mut claims = vec![0usize; sign_regions.len()];
    for i in best.iter().flatten() {
        claims[*i] += 1;
    }
    for (d, m) in dets.iter().zip(&best) {
        let bb = det_bbox(d);
        let mut o = match m {
            Some(i) if claims[*i] == 1 => from_region(sign_regions[*i], ObjectCategory::TrafficSign),
            _ => SceneObject {
                object_id: 0,
                category: ObjectCategory::TrafficSign,
                centroid_px: bb.center(),
                area_px: bb.area(),
                bbox_px: Some(bb),
                subtype: None,
                inferred: false,
                light_kind: None,
                low_confidence: false,
            },
        };
        o.subtype = d.subtype.clone();
        push(&mut out, o);
    }

    for r in regions.iter().filter(|r| r.category == Category::Sidewalk) {
        push(&mut out, from_region(r, ObjectCategory::Sidewalk));
    }
    out
}

/// Height in pixels of the tallest pedestrian component in `regions`.
pub fn tallest_pedestrian_in(regions: &[Region]) -> Option<f64> {
    regions
        .iter()
        .filter(|r| r.category == Category::Pedestrian)
        .map(|r| r.bbox_px.h)
        .reduce(f64::max)
}

/// Height in pixels of the tallest pedestrian component of at least
/// `min_region_px` pixels.
pub fn tallest_pedestrian_px(
    label_map: &LabelMap,
    registry: &CategoryRegistry,
    min_region_px: u32,
) -> Result<Option<f64>> {
    let regions =
        extract_regions_where(label_map, registry, min_region_px, |c| c == Category::Pedestrian)?;
    Ok(tallest_pedestrian_in(&regions))
}
