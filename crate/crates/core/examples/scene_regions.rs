//! Connected regions of one rendered label map, then the scene objects that
//! survive cross-checking against the sign detections.

use rop::config::RunConfig;
use rop::ingest::CategoryRegistry;
use rop::scene::{extract_regions, scene_objects};
use rop::synth::{render_view, standard_fixtures};

fn main() -> rop::Result<()> {
    let layout = &standard_fixtures(1, 1)[0];
    let registry = CategoryRegistry::default();
    let cfg = RunConfig::default();
    let view = render_view(layout, layout.cameras.len() - 1, &registry)?;

    for r in extract_regions(&view.label_map, &registry, cfg.scene.min_region_px)? {
        println!(
            "{:<14} {:>7} px at ({:6.1}, {:6.1})",
            r.category.to_string(),
            r.pixels,
            r.centroid_px.0,
            r.centroid_px.1
        );
    }
    let (objs, tallest) = scene_objects(&view.label_map, &registry, &view.detections, &cfg.scene)?;
    println!("tallest pedestrian: {tallest:?} px");
    for o in objs {
        println!("#{} {} {:?} area {}", o.object_id, o.category, o.subtype, o.area_px);
    }
    Ok(())
}
