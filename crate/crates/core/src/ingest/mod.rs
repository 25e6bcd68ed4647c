//! Input artifacts: image metadata, label maps, detections, footprints and
//! intersection buffers, plus direction-binned tracks built from them.

mod io;
pub mod pgm;
mod registry;
mod tracks;

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{Footprint, GeoPoint};

pub use io::{
    read_buffers, read_detections, read_footprints, read_images, write_buffers, write_detections,
    write_footprints, write_images,
};
pub use pgm::LabelMap;
pub use registry::{Category, CategoryRegistry};
pub use tracks::{
    build_tracks, correct_track, images_in_buffer, CorrectedTrack, Direction, Track, TrackWarning,
};

/// Camera pose record for one street-level image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMeta {
    pub image_id: String,
    pub position: GeoPoint,
    /// Degrees clockwise from north in `[0, 360)`; `None` when the source had none.
    pub heading_deg: Option<f64>,
    pub sequence_id: String,
    pub captured_at: String,
    pub width_px: u32,
    pub height_px: u32,
}

/// Circular area of interest around one road intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionBuffer {
    pub intersection_id: String,
    pub center: GeoPoint,
    pub radius_m: f64,
}

/// One object-detector output box, in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    pub category: String,
    #[serde(default)]
    pub subtype: Option<String>,
    /// `[x, y, w, h]` with `(x, y)` the top-left corner.
    pub bbox: [f64; 4],
    pub score: f64,
}

/// File locations of an input bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundlePaths {
    pub images: PathBuf,
    pub masks: PathBuf,
    pub detections: PathBuf,
    pub footprints: PathBuf,
    pub buffers: PathBuf,
}

impl BundlePaths {
    /// The conventional layout written by the synthetic generator.
    pub fn in_dir(dir: &Path) -> Self {
        BundlePaths {
            images: dir.join("images.json"),
            masks: dir.join("masks"),
            detections: dir.join("detections.jsonl"),
            footprints: dir.join("footprints.geojson"),
            buffers: dir.join("buffers.json"),
        }
    }
}

/// Where label maps come from.
#[derive(Debug, Clone)]
pub enum MaskStore {
    /// `<dir>/<image_id>.pgm`, read on demand.
    Dir(PathBuf),
    Memory(BTreeMap<String, LabelMap>),
}

impl MaskStore {
    pub fn get(&self, image_id: &str) -> Result<Cow<'_, LabelMap>> {
        match self {
            MaskStore::Dir(dir) => {
                pgm::read_pgm(&dir.join(format!("{image_id}.pgm"))).map(Cow::Owned)
            }
            MaskStore::Memory(m) => m
                .get(image_id)
                .map(Cow::Borrowed)
                .ok_or_else(|| Error::MissingLabelMap(image_id.to_string())),
        }
    }
}

/// Everything needed to process a set of intersections.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub images: Vec<ImageMeta>,
    /// Detections grouped by image id.
    pub detections: BTreeMap<String, Vec<Detection>>,
    pub footprints: Vec<Footprint>,
    pub buffers: Vec<IntersectionBuffer>,
    pub masks: MaskStore,
}

impl Bundle {
    pub fn detections_for(&self, image_id: &str) -> &[Detection] {
        self.detections
            .get(image_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Check referential integrity and label-map dimensions.
    pub fn validate(&self) -> Result<()> {
        let dims: BTreeMap<&str, (u32, u32)> = self
            .images
            .iter()
            .map(|i| (i.image_id.as_str(), (i.width_px, i.height_px)))
            .collect();
        for id in self.detections.keys() {
            if !dims.contains_key(id.as_str()) {
                return Err(Error::UnknownImage(id.clone()));
            }
        }
        for img in &self.images {
            let (w, h) = match &self.masks {
                MaskStore::Dir(dir) => {
                    let path = dir.join(format!("{}.pgm", img.image_id));
                    if !path.exists() {
                        return Err(Error::MissingLabelMap(img.image_id.clone()));
                    }
                    let hdr = pgm::read_pgm_header(&path)?;
                    (hdr.width, hdr.height)
                }
                MaskStore::Memory(m) => {
                    let lm = m
                        .get(&img.image_id)
                        .ok_or_else(|| Error::MissingLabelMap(img.image_id.clone()))?;
                    (lm.width, lm.height)
                }
            };
            if (w, h) != (img.width_px, img.height_px) {
                return Err(Error::DimensionMismatch {
                    image_id: img.image_id.clone(),
                    got_w: w,
                    got_h: h,
                    want_w: img.width_px,
                    want_h: img.height_px,
                });
            }
        }
        Ok(())
    }
}

/// Parse and validate a bundle from disk. Buffers without an explicit radius
/// get `default_radius_m`.
pub fn load_inputs(paths: &BundlePaths, default_radius_m: f64) -> Result<Bundle> {
    let images = read_images(&paths.images)?;
    let mut detections: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for d in read_detections(&paths.detections)? {
        detections.entry(d.image_id.clone()).or_default().push(d);
    }
    let footprints = read_footprints(&paths.footprints)?;
    let buffers = read_buffers(&paths.buffers, default_radius_m)?;
    if !paths.masks.is_dir() {
        return Err(Error::schema(&paths.masks, "masks", "not a directory"));
    }
    let bundle = Bundle {
        images,
        detections,
        footprints,
        buffers,
        masks: MaskStore::Dir(paths.masks.clone()),
    };
    bundle.validate()?;
    Ok(bundle)
}
