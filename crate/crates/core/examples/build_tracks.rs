//! Bin the images of one intersection into direction tracks and correct the
//! drifted positions along each.

use rop::geo::make_frame;
use rop::ingest::{build_tracks, correct_track};
use rop::synth::{render_bundle, standard_fixtures};

fn main() -> rop::Result<()> {
    let layout = &standard_fixtures(1, 4)[0];
    let rendered = render_bundle(layout)?;
    let frame = make_frame(rendered.buffer.center)?;
    let (tracks, warnings) = build_tracks(&rendered.images, &rendered.buffer);
    for w in &warnings {
        println!("skipped {}: {}", w.image_id, w.reason);
    }
    for t in &tracks {
        let c = correct_track(t, &frame);
        println!(
            "{} {:?}: {} images, moved {:.2} m on average",
            t.track_id,
            t.direction,
            t.images.len(),
            c.mean_displacement_m
        );
        for img in &c.track.images {
            let p = frame.project(img.position)?;
            println!("    {} at ({:7.2}, {:7.2})", img.image_id, p.x, p.y);
        }
    }
    Ok(())
}
