//! Local metric frame around an intersection, and the footprint helpers
//! built on it.

use rop::geo::{dist, footprint_centroid, make_frame, nearest_vertex, Footprint, GeoPoint, LocalPoint};

fn main() -> rop::Result<()> {
    let center = GeoPoint::new(52.52, 13.405)?;
    let frame = make_frame(center)?;
    let north = GeoPoint::new(52.521, 13.405)?;
    let q = frame.project(north)?;
    println!("0.001 deg north of the centre is {:.2} m away", dist(LocalPoint::ORIGIN, q));
    let back = frame.unproject(q)?;
    println!("round trip error {:.1e} deg", (back.lat - north.lat).abs());

    // a 20 m block in the north-east quadrant
    let ring: rop::Result<Vec<GeoPoint>> = [(8.5, 8.5), (28.5, 8.5), (28.5, 28.5), (8.5, 28.5)]
        .iter()
        .map(|&(x, y)| frame.unproject(LocalPoint::new(x, y)))
        .collect();
    let block = Footprint::new("ne", ring?)?;
    let (corner, d) = nearest_vertex(&block, &frame, LocalPoint::ORIGIN)?;
    println!("corner nearest the centre: ({:.2}, {:.2}), {d:.2} m", corner.x, corner.y);
    let c = footprint_centroid(&block, &frame)?;
    println!("centroid: ({:.2}, {:.2})", c.x, c.y);
    Ok(())
}
