//! Z-buffered rasterisation of ground, building walls and upright boards.

use serde::Serialize;

use super::{CameraModel, Layout, FACING_HALF_ANGLE_DEG, PEDESTRIAN_WIDTH_M};
use crate::error::{Error, Result};
use crate::geo::{heading_vector, vector_heading, LocalPoint};
use crate::ingest::{Category, CategoryRegistry, Detection, LabelMap};
use crate::scene::ObjectCategory;

const NEAR_M: f64 = 0.05;

/// Pinhole camera with a level optical axis.
#[derive(Debug, Clone, Copy)]
pub struct Camera {
    pub pos: LocalPoint,
    pub forward: LocalPoint,
    pub right: LocalPoint,
    pub z: f64,
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn new(model: &CameraModel, pos: LocalPoint, heading_deg: f64) -> Self {
        let forward = heading_vector(heading_deg);
        Camera {
            pos,
            forward,
            right: LocalPoint::new(forward.y, -forward.x),
            z: model.cam_height_m,
            focal: model.focal_px(),
            cx: 0.5 * model.width_px as f64,
            cy: 0.5 * model.height_px as f64,
            width: model.width_px,
            height: model.height_px,
        }
    }

    /// Continuous pixel coordinates `(col, row)` of a world point, if it lies
    /// in front of the camera.
    pub fn project(&self, p: LocalPoint, z: f64) -> Option<(f64, f64)> {
        let d = p.sub(self.pos);
        let depth = d.dot(self.forward);
        (depth > NEAR_M).then(|| {
            (
                self.cx + self.focal * d.dot(self.right) / depth,
                self.cy - self.focal * (z - self.z) / depth,
            )
        })
    }

    /// Horizontal ray through the centre of pixel column `c`, scaled to unit
    /// forward component.
    fn column_dir(&self, c: u32) -> LocalPoint {
        let u = (c as f64 + 0.5 - self.cx) / self.focal;
        self.forward.add(self.right.scale(u))
    }
}

struct Quad {
    a: LocalPoint,
    b: LocalPoint,
    z0: f64,
    z1: f64,
    label: u8,
    /// 1-based index into the truth objects; 0 for scenery.
    instance: u32,
}

fn board(cam: &Camera, at: LocalPoint, width: f64, z0: f64, z1: f64, label: u8, instance: u32) -> Option<Quad> {
    let n = at.sub(cam.pos).unit()?;
    let side = LocalPoint::new(-n.y, n.x).scale(0.5 * width);
    Some(Quad {
        a: at.sub(side),
        b: at.add(side),
        z0,
        z1,
        label,
        instance,
    })
}

fn faces(cam: LocalPoint, at: LocalPoint, facing_deg: &[f64]) -> bool {
    if facing_deg.is_empty() {
        return true;
    }
    let to_cam = vector_heading(cam.sub(at));
    facing_deg.iter().any(|f| {
        let d = (to_cam - f).rem_euclid(360.0);
        d.min(360.0 - d) <= FACING_HALF_ANGLE_DEG
    })
}

/// Pixel counts of one truth object in one view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Visibility {
    /// Pixels the object would cover with nothing in front of it.
    pub covered: u32,
    /// Pixels where it is the nearest surface.
    pub visible: u32,
}

#[derive(Debug, Clone)]
pub struct RenderedView {
    pub label_map: LabelMap,
    pub detections: Vec<Detection>,
    /// Indexed like the layout's truth objects.
    pub visibility: Vec<Visibility>,
    pub camera: Camera,
}

/// Columns `c` with `p0 + c·d` inside the box, as an inclusive range.
fn row_span(p0: LocalPoint, d: LocalPoint, min: LocalPoint, max: LocalPoint, width: u32) -> Option<(u32, u32)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (p, dd, mn, mx) in [(p0.x, d.x, min.x, max.x), (p0.y, d.y, min.y, max.y)] {
        if dd.abs() < 1e-15 {
            if p < mn || p > mx {
                return None;
            }
        } else {
            let (a, b) = ((mn - p) / dd, (mx - p) / dd);
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
    }
    let lo = lo.ceil().max(0.0);
    let hi = hi.floor().min(width as f64 - 1.0);
    (lo <= hi).then_some((lo as u32, hi as u32))
}

/// Render camera `index` of `layout`.
pub fn render_view(layout: &Layout, index: usize, registry: &CategoryRegistry) -> Result<RenderedView> {
    let pose = layout
        .cameras
        .get(index)
        .ok_or_else(|| Error::InvalidLayout(format!("no camera {index}")))?;
    let cam = Camera::new(&layout.camera, pose.position, pose.heading_deg);
    let (w, h) = (cam.width as usize, cam.height as usize);
    let id = |c: Category| registry.id(c);
    let mut labels = LabelMap::new(cam.width, cam.height, id(Category::Sky));
    let mut depth = vec![f64::INFINITY; w * h];
    let mut instance = vec![0u32; w * h];

    // ground, one row at a time: every pixel of a row sees the ground at the same depth
    let sw = layout.sidewalk_width_m;
    let walks: Vec<(LocalPoint, LocalPoint)> = layout
        .footprints
        .iter()
        .map(|f| (f.min.sub(LocalPoint::new(sw, sw)), f.max.add(LocalPoint::new(sw, sw))))
        .collect();
    let (road, walk, building) = (id(Category::Road), id(Category::Sidewalk), id(Category::Building));
    for r in 0..h {
        let v = (cam.cy - (r as f64 + 0.5)) / cam.focal;
        if v >= 0.0 {
            continue;
        }
        let t = cam.z / -v;
        let d = cam.right.scale(t / cam.focal);
        let p0 = cam
            .pos
            .add(cam.forward.scale(t))
            .add(cam.right.scale(t * (0.5 - cam.cx) / cam.focal));
        let row = &mut labels.data[r * w..(r + 1) * w];
        row.fill(road);
        depth[r * w..(r + 1) * w].fill(t);
        for (mn, mx) in &walks {
            if let Some((a, b)) = row_span(p0, d, *mn, *mx, cam.width) {
                row[a as usize..=b as usize].fill(walk);
            }
        }
        for f in &layout.footprints {
            if let Some((a, b)) = row_span(p0, d, f.min, f.max, cam.width) {
                row[a as usize..=b as usize].fill(building);
            }
        }
    }

    let mut quads = Vec::new();
    for f in &layout.footprints {
        let c = f.corners();
        let normals = [
            LocalPoint::new(0.0, -1.0),
            LocalPoint::new(1.0, 0.0),
            LocalPoint::new(0.0, 1.0),
            LocalPoint::new(-1.0, 0.0),
        ];
        for k in 0..4 {
            let (a, b) = (c[k], c[(k + 1) % 4]);
            if cam.pos.sub(a.midpoint(b)).dot(normals[k]) <= 0.0 {
                continue;
            }
            quads.push(Quad {
                a,
                b,
                z0: 0.0,
                z1: f.height_m,
                label: building,
                instance: 0,
            });
        }
    }
    for (i, o) in layout.truth_objects.iter().enumerate() {
        if !faces(cam.pos, o.position, &o.facing_deg) {
            continue;
        }
        let (bw, bh) = o.size_m();
        let label = match o.category {
            ObjectCategory::TrafficLight => id(Category::TrafficLight),
            _ => id(Category::TrafficSign),
        };
        quads.extend(board(&cam, o.position, bw, o.center_z_m - 0.5 * bh, o.center_z_m + 0.5 * bh, label, i as u32 + 1));
    }
    for p in &layout.pedestrians {
        quads.extend(board(&cam, p.position, PEDESTRIAN_WIDTH_M, 0.0, p.height_m, id(Category::Pedestrian), 0));
    }
    for o in &layout.occluders {
        quads.extend(board(&cam, o.position, o.width_m, 0.0, o.height_m, id(Category::Vehicle), 0));
    }

    let mut covered = vec![0u32; layout.truth_objects.len()];
    for c in 0..cam.width {
        let dir = cam.column_dir(c);
        for q in &quads {
            let e = q.b.sub(q.a);
            let den = dir.cross(e);
            if den.abs() < 1e-12 {
                continue;
            }
            let wv = q.a.sub(cam.pos);
            let t = wv.cross(e) / den;
            let s = wv.cross(dir) / den;
            if t <= NEAR_M || !(0.0..=1.0).contains(&s) {
                continue;
            }
            let vmin = (q.z0 - cam.z) / t;
            let vmax = (q.z1 - cam.z) / t;
            let r_lo = (cam.cy - 0.5 - cam.focal * vmax).ceil().max(0.0);
            let r_hi = (cam.cy - 0.5 - cam.focal * vmin).floor().min(h as f64 - 1.0);
            if r_lo > r_hi {
                continue;
            }
            if q.instance > 0 {
                covered[q.instance as usize - 1] += (r_hi - r_lo) as u32 + 1;
            }
            for r in r_lo as usize..=r_hi as usize {
                let k = r * w + c as usize;
                if t < depth[k] {
                    depth[k] = t;
                    labels.data[k] = q.label;
                    instance[k] = q.instance;
                }
            }
        }
    }

    let mut visible = vec![0u32; layout.truth_objects.len()];
    for &i in &instance {
        if i > 0 {
            visible[i as usize - 1] += 1;
        }
    }
    let visibility: Vec<Visibility> = covered
        .iter()
        .zip(&visible)
        .map(|(c, v)| Visibility {
            covered: *c,
            visible: *v,
        })
        .collect();

    let mut detections = Vec::new();
    for (i, o) in layout.truth_objects.iter().enumerate() {
        let vis = visibility[i];
        if o.category != ObjectCategory::TrafficSign || vis.visible < 4 || 2 * vis.visible < vis.covered {
            continue;
        }
        let (bw, bh) = o.size_m();
        let Some(q) = board(&cam, o.position, bw, o.center_z_m - 0.5 * bh, o.center_z_m + 0.5 * bh, 0, 0) else {
            continue;
        };
        let corners: Vec<(f64, f64)> = [(q.a, q.z0), (q.a, q.z1), (q.b, q.z0), (q.b, q.z1)]
            .iter()
            .filter_map(|(p, z)| cam.project(*p, *z))
            .collect();
        if corners.len() < 4 {
            continue;
        }
        let x0 = corners.iter().map(|c| c.0).fold(f64::INFINITY, f64::min).max(0.0);
        let x1 = corners.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max).min(cam.width as f64);
        let y0 = corners.iter().map(|c| c.1).fold(f64::INFINITY, f64::min).max(0.0);
        let y1 = corners.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max).min(cam.height as f64);
        if x1 <= x0 || y1 <= y0 {
            continue;
        }
        detections.push(Detection {
            image_id: pose.image_id.clone(),
            category: Category::TrafficSign.name().to_string(),
            subtype: o.subtype.clone(),
            bbox: [x0, y0, x1 - x0, y1 - y0],
            score: 1.0,
        });
    }

    Ok(RenderedView {
        label_map: labels,
        detections,
        visibility,
        camera: cam,
    })
}
