//! Light heights, paired-light inference and sign stacks on one image.

use rop::config::RunConfig;
use rop::grammar::apply_rules;
use rop::ingest::CategoryRegistry;
use rop::scene::scene_objects;
use rop::synth::{render_view, standard_fixtures};

fn main() -> rop::Result<()> {
    let layout = &standard_fixtures(3, 1)[2];
    let registry = CategoryRegistry::default();
    let cfg = RunConfig::default();
    let view = render_view(layout, layout.cameras.len() - 1, &registry)?;
    let (objs, tallest) = scene_objects(&view.label_map, &registry, &view.detections, &cfg.scene)?;
    let ruled = apply_rules(&objs, &view.label_map, &registry, tallest, &cfg.grammar);

    for (id, c) in &ruled.classifications {
        println!(
            "light #{id}: {:?} ({} m), surround {:?}, drop {:?} px vs pedestrian {:.0} px",
            c.kind, c.height_m, c.surround, c.ray_px, c.pedestrian_px
        );
    }
    for o in ruled.objects.iter().filter(|o| o.inferred) {
        println!("inferred #{} at column {:.0}", o.object_id, o.centroid_px.0);
    }
    for g in &ruled.groups {
        println!("{:?} stack {:?}: {:?}", g.side, g.kind, g.members);
    }
    Ok(())
}
