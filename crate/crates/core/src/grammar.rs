//! Urban layout rules applied to the objects of a single image.
//!
//! * light height: a light framed by sky with a long drop to the road hangs
//!   over the carriageway; one framed by buildings with a short drop to the
//!   sidewalk sits on a pole
//! * sidewalk blocks on the same side of the image belong to one sidewalk
//! * low lights come in pairs, so a lone one implies a partner across the road
//! * signs stack alone, with each other, or above/below a low light

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Category, CategoryRegistry, LabelMap};
use crate::scene::{BBox, LightKind, ObjectCategory, SceneObject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn of(obj: &SceneObject, width_px: u32) -> Side {
        if obj.centroid_px.0 < 0.5 * width_px as f64 {
            Side::Left
        } else {
            Side::Right
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrammarConfig {
    /// Drop longer than this many pedestrian heights reads as a high light.
    pub high_factor: f64,
    /// Drop up to this many pedestrian heights reads as a low light.
    pub low_factor: f64,
    /// Width of the band around a light inspected for sky/building.
    pub ring_px: u32,
    /// Largest horizontal gap bridged when joining sidewalk blocks.
    pub sidewalk_gap_px: f64,
    /// Column tolerance for a vertical stack, as a fraction of image width.
    pub stack_dx_frac: f64,
    /// Assumed pedestrian height, as a fraction of image height, when none is segmented.
    pub pedestrian_fallback_frac: f64,
    pub high_height_m: f64,
    pub low_height_m: f64,
}

impl Default for GrammarConfig {
    fn default() -> Self {
        GrammarConfig {
            high_factor: 3.0,
            low_factor: 2.0,
            ring_px: 15,
            sidewalk_gap_px: 40.0,
            stack_dx_frac: 0.04,
            pedestrian_fallback_frac: 0.22,
            high_height_m: LightKind::HIGH_HEIGHT_M,
            low_height_m: LightKind::LOW_HEIGHT_M,
        }
    }
}

impl GrammarConfig {
    pub fn validate(&self) -> Result<()> {
        let frac = |v: f64| v > 0.0 && v < 1.0;
        if !(self.high_factor > self.low_factor && self.low_factor > 0.0) {
            return Err(Error::Config("grammar: need high_factor > low_factor > 0".into()));
        }
        if !frac(self.stack_dx_frac) || !frac(self.pedestrian_fallback_frac) {
            return Err(Error::Config("grammar: fractions must lie in (0, 1)".into()));
        }
        if self.sidewalk_gap_px < 0.0 || self.high_height_m <= 0.0 || self.low_height_m <= 0.0 {
            return Err(Error::Config("grammar: negative gap or height".into()));
        }
        Ok(())
    }

    pub fn height_for(&self, kind: LightKind) -> f64 {
        match kind {
            LightKind::High => self.high_height_m,
            LightKind::Low => self.low_height_m,
        }
    }
}

/// Outcome of the light-height rules for one light.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LightClassification {
    pub kind: LightKind,
    pub height_m: f64,
    /// Dominant of sky/building around the light, if either was seen.
    pub surround: Option<Category>,
    /// Length of the downward ray, if it reached its target surface.
    pub ray_px: Option<f64>,
    /// Reference pedestrian height in pixels.
    pub pedestrian_px: f64,
    pub low_confidence: bool,
}

fn surround_of(bb: &BBox, lm: &LabelMap, reg: &CategoryRegistry, ring: u32) -> Option<Category> {
    let (w, h) = (lm.width as i64, lm.height as i64);
    let x0 = bb.x.floor() as i64;
    let y0 = bb.y.floor() as i64;
    let x1 = bb.right().ceil() as i64;
    let y1 = bb.bottom().ceil() as i64;
    let ring = ring as i64;
    let (sky, building) = (reg.id(Category::Sky), reg.id(Category::Building));
    let (mut n_sky, mut n_bld) = (0u32, 0u32);
    for r in (y0 - ring).max(0)..(y1 + ring).min(h) {
        for c in (x0 - ring).max(0)..(x1 + ring).min(w) {
            if c >= x0 && c < x1 && r >= y0 && r < y1 {
                continue;
            }
            let v = lm.get(c as u32, r as u32);
            if v == sky {
                n_sky += 1;
            } else if v == building {
                n_bld += 1;
            }
        }
    }
    match n_sky.cmp(&n_bld) {
        std::cmp::Ordering::Greater => Some(Category::Sky),
        std::cmp::Ordering::Less => Some(Category::Building),
        std::cmp::Ordering::Equal => None,
    }
}

/// Distance in rows from `(col, row)` straight down to the first pixel of a
/// target category.
fn ray_down(
    lm: &LabelMap,
    reg: &CategoryRegistry,
    (col, row): (f64, f64),
    targets: &[Category],
) -> Option<f64> {
    let c = col.floor();
    if c < 0.0 || c >= lm.width as f64 {
        return None;
    }
    let ids: Vec<u8> = targets.iter().map(|t| reg.id(*t)).collect();
    let start = row.floor().max(0.0) as u32;
    (start..lm.height)
        .find(|r| ids.contains(&lm.get(c as u32, *r)))
        .map(|r| r as f64 + 0.5 - row)
}

/// Decide whether a light hangs over the road or sits on a sidewalk pole.
///
/// The surround cue (sky vs buildings) decides whenever the two cues
/// disagree or the drop falls between the two thresholds. Without any
/// surround the drop alone decides, and a drop inside the ambiguous band
/// resolves to low with `low_confidence` set.
pub fn classify_light(
    obj: &SceneObject,
    label_map: &LabelMap,
    registry: &CategoryRegistry,
    tallest_pedestrian_px: Option<f64>,
    cfg: &GrammarConfig,
) -> LightClassification {
    let bb = obj.bbox_px.unwrap_or(BBox::new(obj.centroid_px.0, obj.centroid_px.1, 1.0, 1.0));
    let surround = surround_of(&bb, label_map, registry, cfg.ring_px);
    let targets: &[Category] = match surround {
        Some(Category::Sky) => &[Category::Road],
        Some(_) => &[Category::Sidewalk],
        None => &[Category::Road, Category::Sidewalk],
    };
    let ray_px = ray_down(label_map, registry, obj.centroid_px, targets);
    let ped = tallest_pedestrian_px
        .filter(|h| *h > 0.0)
        .unwrap_or(cfg.pedestrian_fallback_frac * label_map.height as f64);

    let by_drop = ray_px.and_then(|d| {
        if d > cfg.high_factor * ped {
            Some(LightKind::High)
        } else if d <= cfg.low_factor * ped {
            Some(LightKind::Low)
        } else {
            None
        }
    });
    let (kind, low_confidence) = match (surround, by_drop) {
        (Some(Category::Sky), _) => (LightKind::High, ray_px.is_none()),
        (Some(_), _) => (LightKind::Low, ray_px.is_none()),
        (None, Some(k)) => (k, false),
        (None, None) => (LightKind::Low, true),
    };
    LightClassification {
        kind,
        height_m: cfg.height_for(kind),
        surround,
        ray_px,
        pedestrian_px: ped,
        low_confidence,
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let p = self.0[i];
        if p == i {
            return i;
        }
        let r = self.find(p);
        self.0[i] = r;
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Join sidewalk blocks on the same side of the image whose boxes are at most
/// `sidewalk_gap_px` apart horizontally (transitively). Output is sorted by
/// object id; a merged sidewalk keeps the smallest member id.
pub fn merge_sidewalks(objs: &[SceneObject], width_px: u32, cfg: &GrammarConfig) -> Vec<SceneObject> {
    let mut walks: Vec<&SceneObject> = objs
        .iter()
        .filter(|o| o.category == ObjectCategory::Sidewalk)
        .collect();
    walks.sort_by_key(|o| o.object_id);
    let mut uf = UnionFind((0..walks.len()).collect());
    for i in 0..walks.len() {
        for j in i + 1..walks.len() {
            let (a, b) = (walks[i], walks[j]);
            if Side::of(a, width_px) != Side::of(b, width_px) {
                continue;
            }
            match (a.bbox_px, b.bbox_px) {
                (Some(ba), Some(bb)) if ba.h_gap(&bb) <= cfg.sidewalk_gap_px => uf.union(i, j),
                _ => {}
            }
        }
    }
    let mut out: Vec<SceneObject> = objs
        .iter()
        .filter(|o| o.category != ObjectCategory::Sidewalk)
        .cloned()
        .collect();
    for root in 0..walks.len() {
        if uf.find(root) != root {
            continue;
        }
        let members: Vec<&SceneObject> = (0..walks.len())
            .filter(|i| uf.find(*i) == root)
            .map(|i| walks[i])
            .collect();
        let mut merged = members[0].clone();
        if members.len() > 1 {
            let area: f64 = members.iter().map(|m| m.area_px).sum();
            let cx = members.iter().map(|m| m.centroid_px.0 * m.area_px).sum::<f64>() / area;
            let cy = members.iter().map(|m| m.centroid_px.1 * m.area_px).sum::<f64>() / area;
            merged.area_px = area;
            merged.centroid_px = (cx, cy);
            merged.bbox_px = members
                .iter()
                .filter_map(|m| m.bbox_px)
                .reduce(|a, b| a.union(&b));
        }
        out.push(merged);
    }
    out.sort_by_key(|o| o.object_id);
    out
}

/// If exactly one side shows a low light and the other shows a sidewalk but no
/// low light, infer the missing partner there: centroid mirrored about the
/// image's vertical midline, marked `inferred`.
pub fn infer_pair(
    left_objs: &[SceneObject],
    right_objs: &[SceneObject],
    width_px: u32,
    next_id: u32,
) -> Option<SceneObject> {
    let low = |objs: &[SceneObject]| -> Option<SceneObject> {
        objs.iter()
            .filter(|o| o.is_low_light())
            .max_by(|a, b| {
                a.area_px
                    .total_cmp(&b.area_px)
                    .then(b.centroid_px.0.total_cmp(&a.centroid_px.0))
            })
            .cloned()
    };
    let has_walk = |objs: &[SceneObject]| objs.iter().any(|o| o.category == ObjectCategory::Sidewalk);
    let (source, target) = match (low(left_objs), low(right_objs)) {
        (Some(l), None) if has_walk(right_objs) => (l, Side::Right),
        (None, Some(r)) if has_walk(left_objs) => (r, Side::Left),
        _ => return None,
    };
    let mut col = width_px as f64 - source.centroid_px.0;
    // keep the mirrored point strictly on the target side
    let mid = 0.5 * width_px as f64;
    if target == Side::Right && col < mid {
        col = mid;
    } else if target == Side::Left && col >= mid {
        col = mid - 0.5;
    }
    Some(SceneObject {
        object_id: next_id,
        category: ObjectCategory::TrafficLight,
        centroid_px: (col, source.centroid_px.1),
        area_px: source.area_px,
        bbox_px: None,
        subtype: None,
        inferred: true,
        light_kind: Some(LightKind::Low),
        low_confidence: false,
    })
}

/// Sign/light combination found in one vertical stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    SignAlone,
    SignAboveLight,
    SignBelowLight,
    SignsAboveAndBelowLight,
    SignStack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternGroup {
    pub side: Side,
    /// Object ids, top to bottom.
    pub members: Vec<u32>,
    pub kind: PatternKind,
}

pub(crate) fn canonical_cmp(a: &SceneObject, b: &SceneObject) -> std::cmp::Ordering {
    a.centroid_px
        .0
        .total_cmp(&b.centroid_px.0)
        .then(a.centroid_px.1.total_cmp(&b.centroid_px.1))
        .then(a.category.cmp(&b.category))
        .then(a.area_px.total_cmp(&b.area_px))
        .then_with(|| a.subtype.cmp(&b.subtype))
        .then(a.object_id.cmp(&b.object_id))
}

/// Group signs and low lights that share a column (within
/// `stack_dx_frac · width`) into stacks, at most one light per stack. Stacks
/// without a sign are not patterns and are left out. High and inferred lights
/// never join.
pub fn group_patterns(objs: &[SceneObject], width_px: u32, cfg: &GrammarConfig) -> Vec<PatternGroup> {
    let dx = cfg.stack_dx_frac * width_px as f64;
    let mut groups = Vec::new();
    for side in [Side::Left, Side::Right] {
        let mut cands: Vec<&SceneObject> = objs
            .iter()
            .filter(|o| Side::of(o, width_px) == side)
            .filter(|o| {
                o.category == ObjectCategory::TrafficSign || (o.is_low_light() && !o.inferred)
            })
            .collect();
        cands.sort_by(|a, b| canonical_cmp(a, b));
        let mut current: Vec<&SceneObject> = Vec::new();
        let flush = |current: &mut Vec<&SceneObject>, groups: &mut Vec<PatternGroup>| {
            if let Some(g) = make_group(side, current) {
                groups.push(g);
            }
            current.clear();
        };
        for o in cands {
            let fits = current.first().is_some_and(|a| o.centroid_px.0 - a.centroid_px.0 <= dx)
                && !(o.category == ObjectCategory::TrafficLight
                    && current.iter().any(|m| m.category == ObjectCategory::TrafficLight));
            if !fits {
                flush(&mut current, &mut groups);
            }
            current.push(o);
        }
        flush(&mut current, &mut groups);
    }
    groups
}

fn make_group(side: Side, members: &[&SceneObject]) -> Option<PatternGroup> {
    if !members.iter().any(|m| m.category == ObjectCategory::TrafficSign) {
        return None;
    }
    let mut sorted: Vec<&SceneObject> = members.to_vec();
    sorted.sort_by(|a, b| {
        a.centroid_px
            .1
            .total_cmp(&b.centroid_px.1)
            .then_with(|| canonical_cmp(a, b))
    });
    let light_at = sorted
        .iter()
        .position(|m| m.category == ObjectCategory::TrafficLight);
    let kind = match light_at {
        None if sorted.len() == 1 => PatternKind::SignAlone,
        None => PatternKind::SignStack,
        Some(i) => match (i > 0, i + 1 < sorted.len()) {
            (true, true) => PatternKind::SignsAboveAndBelowLight,
            (true, false) => PatternKind::SignAboveLight,
            _ => PatternKind::SignBelowLight,
        },
    };
    Some(PatternGroup {
        side,
        members: sorted.iter().map(|m| m.object_id).collect(),
        kind,
    })
}

/// Objects of one image after all rules, with their pattern groups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuledScene {
    pub objects: Vec<SceneObject>,
    pub groups: Vec<PatternGroup>,
    pub classifications: Vec<(u32, LightClassification)>,
}

/// Run every per-image rule in order: light height, sidewalk merging,
/// pair inference, stack grouping.
pub fn apply_rules(
    objects: &[SceneObject],
    label_map: &LabelMap,
    registry: &CategoryRegistry,
    tallest_pedestrian_px: Option<f64>,
    cfg: &GrammarConfig,
) -> RuledScene {
    let width = label_map.width;
    let mut classifications = Vec::new();
    let mut objs: Vec<SceneObject> = objects
        .iter()
        .cloned()
        .map(|mut o| {
            if o.category == ObjectCategory::TrafficLight && !o.inferred {
                let c = classify_light(&o, label_map, registry, tallest_pedestrian_px, cfg);
                o.light_kind = Some(c.kind);
                o.low_confidence = c.low_confidence;
                classifications.push((o.object_id, c));
            }
            o
        })
        .collect();
    objs = merge_sidewalks(&objs, width, cfg);
    let (left, right): (Vec<SceneObject>, Vec<SceneObject>) = objs
        .iter()
        .cloned()
        .partition(|o| Side::of(o, width) == Side::Left);
    let next_id = objs.iter().map(|o| o.object_id + 1).max().unwrap_or(0);
    if let Some(inferred) = infer_pair(&left, &right, width, next_id) {
        objs.push(inferred);
    }
    let groups = group_patterns(&objs, width, cfg);
    RuledScene {
        objects: objs,
        groups,
        classifications,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reg() -> CategoryRegistry {
        CategoryRegistry::default()
    }

    fn paint(m: &mut LabelMap, c0: u32, r0: u32, c1: u32, r1: u32, cat: Category) {
        let id = reg().id(cat);
        for r in r0..r1 {
            for c in c0..c1 {
                m.set(c, r, id);
            }
        }
    }

    fn light_at(col: f64, row: f64) -> SceneObject {
        SceneObject {
            object_id: 0,
            category: ObjectCategory::TrafficLight,
            centroid_px: (col, row),
            area_px: 60.0,
            bbox_px: Some(BBox::new(col - 3.0, row - 5.0, 6.0, 10.0)),
            subtype: None,
            inferred: false,
            light_kind: None,
            low_confidence: false,
        }
    }

    /// Background `upper` above `horizon`, road below; a light at
    /// (`col`, `row`) with `ground` reached after exactly `drop` rows.
    fn scene(upper: Category, ground: Category, row: u32, drop: u32) -> (LabelMap, SceneObject) {
        let mut m = LabelMap::new(1024, 768, 0);
        let ground_row = row + drop;
        paint(&mut m, 0, 0, 1024, ground_row, upper);
        paint(&mut m, 0, ground_row, 1024, 768, ground);
        let light = light_at(500.5, row as f64 + 0.5);
        let bb = light.bbox_px.unwrap();
        paint(
            &mut m,
            bb.x as u32,
            bb.y as u32,
            bb.right() as u32,
            bb.bottom() as u32,
            Category::TrafficLight,
        );
        (m, light)
    }

    #[test]
    fn sky_and_long_drop_is_high() {
        let (m, light) = scene(Category::Sky, Category::Road, 100, 200);
        let c = classify_light(&light, &m, &reg(), Some(40.0), &GrammarConfig::default());
        assert_eq!(c.kind, LightKind::High);
        assert_eq!(c.height_m, 7.0);
        assert_eq!(c.ray_px, Some(200.0));
        assert!(!c.low_confidence);
    }

    #[test]
    fn building_and_short_drop_is_low() {
        let (m, light) = scene(Category::Building, Category::Sidewalk, 300, 60);
        let c = classify_light(&light, &m, &reg(), Some(40.0), &GrammarConfig::default());
        assert_eq!(c.kind, LightKind::Low);
        assert_eq!(c.height_m, 4.0);
        assert_eq!(c.ray_px, Some(60.0));
    }

    #[test]
    fn fallback_pedestrian_height() {
        let (m, light) = scene(Category::Sky, Category::Road, 100, 600);
        let c = classify_light(&light, &m, &reg(), None, &GrammarConfig::default());
        assert!((c.pedestrian_px - 0.22 * 768.0).abs() < 1e-9);
        assert_eq!(c.kind, LightKind::High);
        assert_eq!(c.ray_px, Some(600.0));
    }

    #[test]
    fn surround_wins_disagreement() {
        // framed by sky but only a short drop
        let (m, light) = scene(Category::Sky, Category::Road, 300, 50);
        let c = classify_light(&light, &m, &reg(), Some(40.0), &GrammarConfig::default());
        assert_eq!(c.kind, LightKind::High);
        // framed by buildings with a long drop
        let (m, light) = scene(Category::Building, Category::Sidewalk, 50, 500);
        let c = classify_light(&light, &m, &reg(), Some(40.0), &GrammarConfig::default());
        assert_eq!(c.kind, LightKind::Low);
    }

    #[test]
    fn ray_miss_is_low_confidence() {
        let mut m = LabelMap::new(200, 200, reg().id(Category::Sky));
        let light = light_at(100.5, 50.5);
        paint(&mut m, 97, 45, 103, 55, Category::TrafficLight);
        let c = classify_light(&light, &m, &reg(), Some(20.0), &GrammarConfig::default());
        assert_eq!(c.kind, LightKind::High);
        assert!(c.low_confidence);
        assert_eq!(c.ray_px, None);
    }

    #[test]
    fn no_surround_uses_drop() {
        let mut m = LabelMap::new(200, 400, 0);
        paint(&mut m, 0, 350, 200, 400, Category::Road);
        let light = light_at(100.5, 20.5);
        let c = classify_light(&light, &m, &reg(), Some(20.0), &GrammarConfig::default());
        assert_eq!(c.surround, None);
        assert_eq!(c.kind, LightKind::High);
        // inside the ambiguous band with nothing to break the tie
        let c = classify_light(&light, &m, &reg(), Some(130.0), &GrammarConfig::default());
        assert_eq!(c.kind, LightKind::Low);
        assert!(c.low_confidence);
    }

    fn walk(id: u32, x: f64, w: f64, area: f64) -> SceneObject {
        SceneObject {
            object_id: id,
            category: ObjectCategory::Sidewalk,
            centroid_px: (x + w / 2.0, 600.0),
            area_px: area,
            bbox_px: Some(BBox::new(x, 580.0, w, 40.0)),
            subtype: None,
            inferred: false,
            light_kind: None,
            low_confidence: false,
        }
    }

    #[test]
    fn sidewalk_blocks_merge() {
        let cfg = GrammarConfig::default();
        let merged = merge_sidewalks(&[walk(0, 600.0, 100.0, 400.0), walk(1, 730.0, 100.0, 600.0)], 1024, &cfg);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].area_px, 1000.0);
        assert_eq!(merged[0].bbox_px.unwrap(), BBox::new(600.0, 580.0, 230.0, 40.0));
        // pixel-weighted centroid: (650*400 + 780*600) / 1000
        assert!((merged[0].centroid_px.0 - 728.0).abs() < 1e-9);
        let apart = merge_sidewalks(&[walk(0, 550.0, 100.0, 400.0), walk(1, 850.0, 100.0, 400.0)], 1024, &cfg);
        assert_eq!(apart.len(), 2);
    }

    #[test]
    fn sidewalk_chain_merges_transitively() {
        let cfg = GrammarConfig::default();
        let objs = [
            walk(0, 520.0, 50.0, 10.0),
            walk(1, 600.0, 50.0, 10.0),
            walk(2, 680.0, 50.0, 10.0),
        ];
        let out = merge_sidewalks(&objs, 1024, &cfg);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].object_id, 0);
    }

    fn low_light(id: u32, col: f64) -> SceneObject {
        SceneObject {
            object_id: id,
            light_kind: Some(LightKind::Low),
            ..light_at(col, 300.0)
        }
    }

    #[test]
    fn pair_inference() {
        let right_walk = walk(2, 700.0, 200.0, 500.0);
        let left_walk = walk(3, 100.0, 200.0, 500.0);
        let inferred = infer_pair(&[low_light(1, 200.0)], std::slice::from_ref(&right_walk), 1024, 9).unwrap();
        assert!(inferred.inferred);
        assert_eq!(inferred.light_kind, Some(LightKind::Low));
        assert_eq!(inferred.centroid_px, (824.0, 300.0));
        assert_eq!(inferred.object_id, 9);
        assert!(inferred.bbox_px.is_none());
        // both sides lit
        assert!(infer_pair(
            &[low_light(1, 200.0), left_walk.clone()],
            &[low_light(4, 800.0), right_walk],
            1024,
            9
        )
        .is_none());
        // nothing to anchor to
        assert!(infer_pair(&[low_light(1, 200.0), left_walk], &[], 1024, 9).is_none());
    }

    fn sign(id: u32, col: f64, row: f64, sub: &str) -> SceneObject {
        SceneObject {
            object_id: id,
            category: ObjectCategory::TrafficSign,
            centroid_px: (col, row),
            area_px: 80.0,
            bbox_px: Some(BBox::new(col - 5.0, row - 5.0, 10.0, 10.0)),
            subtype: Some(sub.into()),
            inferred: false,
            light_kind: None,
            low_confidence: false,
        }
    }

    #[test]
    fn pattern_kinds() {
        let cfg = GrammarConfig::default();
        let mut light = low_light(1, 800.0);
        light.centroid_px.1 = 300.0;
        let g = group_patterns(&[sign(0, 802.0, 260.0, "a"), light.clone()], 1024, &cfg);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].kind, PatternKind::SignAboveLight);
        assert_eq!(g[0].members, [0, 1]);

        let g = group_patterns(&[sign(0, 300.0, 200.0, "a")], 1024, &cfg);
        assert_eq!(g[0].kind, PatternKind::SignAlone);

        let g = group_patterns(
            &[sign(0, 802.0, 260.0, "a"), light.clone(), sign(2, 799.0, 340.0, "b")],
            1024,
            &cfg,
        );
        assert_eq!(g[0].kind, PatternKind::SignsAboveAndBelowLight);
        assert_eq!(g[0].members, [0, 1, 2]);

        let g = group_patterns(&[light.clone(), sign(2, 799.0, 340.0, "b")], 1024, &cfg);
        assert_eq!(g[0].kind, PatternKind::SignBelowLight);

        let g = group_patterns(&[sign(0, 700.0, 260.0, "a"), sign(2, 705.0, 290.0, "b")], 1024, &cfg);
        assert_eq!(g[0].kind, PatternKind::SignStack);
    }

    #[test]
    fn high_lights_and_distant_signs_stay_out() {
        let cfg = GrammarConfig::default();
        let mut high = light_at(900.0, 100.0);
        high.object_id = 5;
        high.light_kind = Some(LightKind::High);
        let g = group_patterns(&[high, sign(0, 902.0, 160.0, "a"), sign(1, 600.0, 160.0, "b")], 1024, &cfg);
        assert_eq!(g.len(), 2);
        assert!(g.iter().all(|g| g.kind == PatternKind::SignAlone));
    }

    proptest! {
        #[test]
        fn merge_is_idempotent_and_order_free(
            boxes in prop::collection::vec((0.0..1000.0f64, 5.0..120.0f64, 1.0..500.0f64), 0..8),
            seed in any::<u64>(),
        ) {
            let cfg = GrammarConfig::default();
            let objs: Vec<SceneObject> = boxes.iter().enumerate()
                .map(|(i, (x, w, a))| walk(i as u32, *x, *w, *a)).collect();
            let once = merge_sidewalks(&objs, 1024, &cfg);
            let twice = merge_sidewalks(&once, 1024, &cfg);
            prop_assert_eq!(&once, &twice);
            let mut shuffled = objs.clone();
            // deterministic Fisher-Yates driven by the seed
            let mut s = seed;
            for i in (1..shuffled.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            let again = merge_sidewalks(&shuffled, 1024, &cfg);
            prop_assert_eq!(once.len(), again.len());
            for (a, b) in once.iter().zip(&again) {
                prop_assert_eq!(a.object_id, b.object_id);
                prop_assert!((a.area_px - b.area_px).abs() < 1e-9);
                prop_assert!((a.centroid_px.0 - b.centroid_px.0).abs() < 1e-9);
                prop_assert_eq!(a.bbox_px, b.bbox_px);
            }
        }

        #[test]
        fn every_sign_in_one_group(cols in prop::collection::vec((0.0..1024.0f64, 0.0..700.0f64), 0..12)) {
            let cfg = GrammarConfig::default();
            let objs: Vec<SceneObject> = cols.iter().enumerate()
                .map(|(i, (c, r))| sign(i as u32, *c, *r, "s")).collect();
            let groups = group_patterns(&objs, 1024, &cfg);
            let mut ids: Vec<u32> = groups.iter().flat_map(|g| g.members.clone()).collect();
            ids.sort();
            prop_assert_eq!(ids, (0..objs.len() as u32).collect::<Vec<_>>());
            for g in &groups {
                let cs: Vec<f64> = g.members.iter().map(|m| objs[*m as usize].centroid_px.0).collect();
                let span = cs.iter().cloned().fold(f64::MIN, f64::max) - cs.iter().cloned().fold(f64::MAX, f64::min);
                prop_assert!(span <= cfg.stack_dx_frac * 1024.0 + 1e-9);
            }
        }
    }
}
