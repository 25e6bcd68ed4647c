//! Write a seeded synthetic bundle to disk, ready for `rop place`.
//!
//! `cargo run --example synth_bundle -- <out-dir> [fixtures] [seed]`

use std::path::PathBuf;

use rop::synth::{render_bundle, standard_fixtures, write_bundle};

fn main() -> rop::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synth-bundle".into()));
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let rendered = standard_fixtures(n, seed)
        .iter()
        .map(render_bundle)
        .collect::<rop::Result<Vec<_>>>()?;
    write_bundle(&out, &rendered, Some(seed))?;
    let images: usize = rendered.iter().map(|r| r.images.len()).sum();
    println!("{} intersections, {images} images in {}", rendered.len(), out.display());
    Ok(())
}
