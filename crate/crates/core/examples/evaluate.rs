//! Render seeded fixtures, run the pipeline on each and score it against the
//! generator's ground truth.
//!
//! `cargo run --release --example evaluate -- [fixtures] [seed]`

use rop::config::RunConfig;
use rop::evalx::{match_objects, report};
use rop::ingest::CategoryRegistry;
use rop::placer::run_intersection;
use rop::synth::{render_bundle, standard_fixtures};

fn main() -> rop::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = RunConfig::default();
    let registry = CategoryRegistry::default();

    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for layout in standard_fixtures(n, seed) {
        let rendered = render_bundle(&layout)?;
        let t = rendered.truth.clone();
        let buffer = rendered.buffer.clone();
        let bundle = rendered.into_bundle();
        let out = run_intersection(&bundle, &buffer, &registry, &cfg)?;
        let pairing = match_objects(&out.placed, &t, cfg.eval.match_radius_m);
        if !pairing.unmatched_ref.is_empty() || !pairing.unmatched_pred.is_empty() {
            println!(
                "{}: {} missed, {} spurious",
                layout.intersection_id,
                pairing.unmatched_ref.len(),
                pairing.unmatched_pred.len()
            );
        }
        pred.extend(out.placed);
        truth.extend(t);
    }
    let pairing = match_objects(&pred, &truth, cfg.eval.match_radius_m);
    print!("{}", report(&pairing, &pred, &truth).to_table());
    Ok(())
}
