use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use geojson::{Feature, FeatureCollection, GeoJson, Geometry, JsonObject, Value};
use serde::{Deserialize, Serialize};

use super::{Detection, ImageMeta, IntersectionBuffer};
use crate::error::{Error, Result};
use crate::geo::{Footprint, GeoPoint};

#[derive(Debug, Serialize, Deserialize)]
struct ImageRecord {
    image_id: String,
    lat: f64,
    lon: f64,
    #[serde(default)]
    heading_deg: Option<f64>,
    sequence_id: String,
    captured_at: String,
    width_px: u32,
    height_px: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct BufferRecord {
    intersection_id: String,
    lat: f64,
    lon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius_m: Option<f64>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_images(path: &Path) -> Result<Vec<ImageMeta>> {
    let records: Vec<ImageRecord> = read_json(path)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (i, r) in records.into_iter().enumerate() {
        let field = |f: &str| format!("[{i}].{f}");
        if !seen.insert(r.image_id.clone()) {
            return Err(Error::schema(path, field("image_id"), "duplicate id"));
        }
        let position = GeoPoint::new(r.lat, r.lon)
            .map_err(|_| Error::schema(path, field("lat/lon"), "outside WGS84 range"))?;
        let heading_deg = match r.heading_deg {
            Some(h) if !h.is_finite() => {
                return Err(Error::schema(path, field("heading_deg"), "not finite"))
            }
            Some(h) => Some(h.rem_euclid(360.0)),
            None => None,
        };
        if r.width_px == 0 || r.height_px == 0 {
            return Err(Error::schema(path, field("width_px/height_px"), "must be > 0"));
        }
        out.push(ImageMeta {
            image_id: r.image_id,
            position,
            heading_deg,
            sequence_id: r.sequence_id,
            captured_at: r.captured_at,
            width_px: r.width_px,
            height_px: r.height_px,
        });
    }
    Ok(out)
}

pub fn write_images(path: &Path, images: &[ImageMeta]) -> Result<()> {
    let records: Vec<ImageRecord> = images
        .iter()
        .map(|m| ImageRecord {
            image_id: m.image_id.clone(),
            lat: m.position.lat,
            lon: m.position.lon,
            heading_deg: m.heading_deg,
            sequence_id: m.sequence_id.clone(),
            captured_at: m.captured_at.clone(),
            width_px: m.width_px,
            height_px: m.height_px,
        })
        .collect();
    write_text(path, &(serde_json::to_string_pretty(&records).expect("serializable") + "\n"))
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = format!("line {}", n + 1);
        let d: Detection =
            serde_json::from_str(&line).map_err(|e| Error::schema(path, &at, e.to_string()))?;
        if !(0.0..=1.0).contains(&d.score) {
            return Err(Error::schema(path, format!("{at}: score"), "outside [0, 1]"));
        }
        let [x, y, w, h] = d.bbox;
        if ![x, y, w, h].iter().all(|v| v.is_finite()) || w <= 0.0 || h <= 0.0 {
            return Err(Error::schema(path, format!("{at}: bbox"), "need finite x,y and w,h > 0"));
        }
        out.push(d);
    }
    Ok(out)
}

pub fn write_detections(path: &Path, detections: &[Detection]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for d in detections {
        let line = serde_json::to_string(d).expect("serializable");
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn id_of(feature: &Feature) -> Option<String> {
    let from_props = feature
        .properties
        .as_ref()
        .and_then(|p| p.get("id"))
        .and_then(|v| match v {
            serde_json::Value::String(s) => Some(s.clone()),
            serde_json::Value::Number(n) => Some(n.to_string()),
            _ => None,
        });
    from_props.or_else(|| match &feature.id {
        Some(geojson::feature::Id::String(s)) => Some(s.clone()),
        Some(geojson::feature::Id::Number(n)) => Some(n.to_string()),
        None => None,
    })
}

/// Polygon features only; the exterior ring is used and holes are ignored.
pub fn read_footprints(path: &Path) -> Result<Vec<Footprint>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let gj: GeoJson = text
        .parse()
        .map_err(|e: geojson::Error| Error::schema(path, "root", e.to_string()))?;
    let GeoJson::FeatureCollection(fc) = gj else {
        return Err(Error::schema(path, "type", "expected FeatureCollection"));
    };
    let mut out = Vec::with_capacity(fc.features.len());
    for (i, feature) in fc.features.iter().enumerate() {
        let field = |f: &str| format!("features[{i}].{f}");
        let id = id_of(feature).ok_or_else(|| Error::schema(path, field("properties.id"), "missing"))?;
        let geom = feature
            .geometry
            .as_ref()
            .ok_or_else(|| Error::schema(path, field("geometry"), "missing"))?;
        let Value::Polygon(rings) = &geom.value else {
            log::warn!("{}: footprint {id} is not a Polygon; skipped", path.display());
            continue;
        };
        let exterior = rings
            .first()
            .ok_or_else(|| Error::schema(path, field("geometry.coordinates"), "no rings"))?;
        let mut ring = Vec::with_capacity(exterior.len());
        for pos in exterior {
            if pos.len() < 2 {
                return Err(Error::schema(path, field("geometry.coordinates"), "short position"));
            }
            let p = GeoPoint::new(pos[1], pos[0]).map_err(|_| {
                Error::schema(path, field("geometry.coordinates"), "outside WGS84 range")
            })?;
            ring.push(p);
        }
        let fp = Footprint::new(id, ring)
            .map_err(|e| Error::schema(path, field("geometry"), e.to_string()))?;
        out.push(fp);
    }
    Ok(out)
}

pub fn write_footprints(path: &Path, footprints: &[Footprint]) -> Result<()> {
    let features = footprints
        .iter()
        .map(|fp| {
            let ring: Vec<Vec<f64>> = fp.ring.iter().map(|p| vec![p.lon, p.lat]).collect();
            let mut props = JsonObject::new();
            props.insert("id".into(), serde_json::Value::String(fp.id.clone()));
            Feature {
                bbox: None,
                geometry: Some(Geometry::new(Value::Polygon(vec![ring]))),
                id: None,
                properties: Some(props),
                foreign_members: None,
            }
        })
        .collect();
    let fc = FeatureCollection {
        bbox: None,
        features,
        foreign_members: None,
    };
    write_text(path, &(GeoJson::from(fc).to_string() + "\n"))
}

pub fn read_buffers(path: &Path, default_radius_m: f64) -> Result<Vec<IntersectionBuffer>> {
    let records: Vec<BufferRecord> = read_json(path)?;
    let mut seen = BTreeSet::new();
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let field = |f: &str| format!("[{i}].{f}");
            if !seen.insert(r.intersection_id.clone()) {
                return Err(Error::schema(path, field("intersection_id"), "duplicate id"));
            }
            let center = GeoPoint::new(r.lat, r.lon)
                .map_err(|_| Error::schema(path, field("lat/lon"), "outside WGS84 range"))?;
            let radius_m = r.radius_m.unwrap_or(default_radius_m);
            if !(radius_m > 0.0 && radius_m.is_finite()) {
                return Err(Error::schema(path, field("radius_m"), "must be > 0"));
            }
            Ok(IntersectionBuffer {
                intersection_id: r.intersection_id,
                center,
                radius_m,
            })
        })
        .collect()
}

pub fn write_buffers(path: &Path, buffers: &[IntersectionBuffer]) -> Result<()> {
    let records: Vec<BufferRecord> = buffers
        .iter()
        .map(|b| BufferRecord {
            intersection_id: b.intersection_id.clone(),
            lat: b.center.lat,
            lon: b.center.lon,
            radius_m: Some(b.radius_m),
        })
        .collect();
    write_text(path, &(serde_json::to_string_pretty(&records).expect("serializable") + "\n"))
}
