//! Full pipeline on one synthetic intersection, printed as GeoJSON.

use rop::config::RunConfig;
use rop::ingest::CategoryRegistry;
use rop::placer::{placed_to_geojson, run_intersection};
use rop::synth::{render_bundle, standard_fixtures};

fn main() -> rop::Result<()> {
    let layout = &standard_fixtures(1, 1)[0];
    let rendered = render_bundle(layout)?;
    let buffer = rendered.buffer.clone();
    let bundle = rendered.into_bundle();
    let out = run_intersection(&bundle, &buffer, &CategoryRegistry::default(), &RunConfig::default())?;
    for c in &out.cases {
        eprintln!("{} {:?}", c.image_id, c.case);
    }
    for d in &out.diagnostics {
        eprintln!("{}: {}", d.kind, d.message);
    }
    println!("{}", placed_to_geojson(&out.placed));
    Ok(())
}
