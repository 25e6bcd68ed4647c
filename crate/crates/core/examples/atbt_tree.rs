//! Build the tree of every image along one track and fuse them.

use rop::atbt::{build_atbt, fuse_track, ViewInfo};
use rop::config::RunConfig;
use rop::geo::{dist, heading_vector, make_frame, LocalPoint};
use rop::grammar::apply_rules;
use rop::ingest::{build_tracks, CategoryRegistry};
use rop::placer::classify_local;
use rop::scene::scene_objects;
use rop::synth::{render_bundle, standard_fixtures};

fn main() -> rop::Result<()> {
    let layout = &standard_fixtures(1, 2)[0];
    let cfg = RunConfig::default();
    let registry = CategoryRegistry::default();
    let rendered = render_bundle(layout)?;
    let frame = make_frame(rendered.buffer.center)?;
    let (tracks, _) = build_tracks(&rendered.images, &rendered.buffer);
    let track = &tracks[0];
    let bundle = rendered.clone().into_bundle();

    let mut trees = Vec::new();
    let mut views = Vec::new();
    for img in &track.images {
        let lm = bundle.masks.get(&img.image_id)?;
        let (objs, tallest) = scene_objects(&lm, &registry, bundle.detections_for(&img.image_id), &cfg.scene)?;
        let ruled = apply_rules(&objs, &lm, &registry, tallest, &cfg.grammar);
        let tree = build_atbt(&ruled.objects, &ruled.groups, &img.image_id, lm.width)?;
        let cam = frame.project(img.position)?;
        let heading = heading_vector(img.heading_deg.unwrap_or(0.0));
        views.push(ViewInfo {
            case: classify_local(cam, heading, LocalPoint::ORIGIN, cfg.placer.inner_radius_m)?,
            distance_m: dist(cam, LocalPoint::ORIGIN),
        });
        trees.push(tree);
    }
    println!("{}", serde_json::to_string_pretty(&trees.last().unwrap().to_debug_json()).unwrap());
    for f in fuse_track(&trees, &views) {
        println!(
            "{:?} {:?} stack {} depth {}: seen {} times, best view {}",
            f.key.side, f.key.category, f.key.stack_ordinal, f.key.depth_in_stack, f.support, f.best_image
        );
    }
    Ok(())
}
