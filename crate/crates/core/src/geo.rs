//! Geodetic and local-metric geometry.
//!
//! Everything at one intersection happens in an equirectangular tangent frame
//! centred on the intersection. The frame is only valid close to its origin
//! (within 0.05 degrees on either axis), which comfortably covers the few
//! hundred metres around a junction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metres per degree of latitude on the spherical earth used by [`LocalFrame`].
pub const M_PER_DEG_LAT: f64 = 111_320.0;

/// Largest latitude/longitude offset from the frame origin that may be projected.
pub const FRAME_VALIDITY_DEG: f64 = 0.05;

/// WGS84 latitude/longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = GeoPoint { lat, lon };
        if p.is_valid() {
            Ok(p)
        } else {
            Err(Error::InvalidGeoPoint { lat, lon })
        }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Metres east (`x`) and north (`y`) of a frame origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalPoint {
    pub x: f64,
    pub y: f64,
}

impl LocalPoint {
    pub const ORIGIN: LocalPoint = LocalPoint { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        LocalPoint { x, y }
    }

    pub fn sub(self, o: LocalPoint) -> LocalPoint {
        LocalPoint::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: LocalPoint) -> LocalPoint {
        LocalPoint::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, k: f64) -> LocalPoint {
        LocalPoint::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: LocalPoint) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 2D cross product `self × o`.
    pub fn cross(self, o: LocalPoint) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Unit vector, or `None` for the zero vector.
    pub fn unit(self) -> Option<LocalPoint> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self.scale(1.0 / n))
    }

    pub fn midpoint(self, o: LocalPoint) -> LocalPoint {
        LocalPoint::new(0.5 * (self.x + o.x), 0.5 * (self.y + o.y))
    }
}

/// Euclidean distance in metres.
pub fn dist(a: LocalPoint, b: LocalPoint) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Unit vector for a compass heading (degrees clockwise from north).
pub fn heading_vector(heading_deg: f64) -> LocalPoint {
    let r = heading_deg.to_radians();
    LocalPoint::new(r.sin(), r.cos())
}

/// Compass heading of a local direction vector, in `[0, 360)`.
pub fn vector_heading(v: LocalPoint) -> f64 {
    let h = v.x.atan2(v.y).to_degrees();
    if h < 0.0 {
        h + 360.0
    } else {
        h
    }
}

/// Equirectangular tangent frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalFrame {
    pub origin: GeoPoint,
    pub m_per_deg_lat: f64,
    pub m_per_deg_lon: f64,
}

impl LocalFrame {
    pub fn new(center: GeoPoint) -> Result<Self> {
        if !center.is_valid() {
            return Err(Error::InvalidGeoPoint {
                lat: center.lat,
                lon: center.lon,
            });
        }
        if center.lat.abs() > 89.0 {
            return Err(Error::DegenerateFrame(center.lat));
        }
        Ok(LocalFrame {
            origin: center,
            m_per_deg_lat: M_PER_DEG_LAT,
            m_per_deg_lon: M_PER_DEG_LAT * center.lat.to_radians().cos(),
        })
    }

    pub fn project(&self, p: GeoPoint) -> Result<LocalPoint> {
        let dlat = p.lat - self.origin.lat;
        let dlon = p.lon - self.origin.lon;
        if !p.is_valid() || dlat.abs() >= FRAME_VALIDITY_DEG || dlon.abs() >= FRAME_VALIDITY_DEG {
            return Err(Error::OutOfFrame {
                lat: p.lat,
                lon: p.lon,
            });
        }
        Ok(LocalPoint::new(dlon * self.m_per_deg_lon, dlat * self.m_per_deg_lat))
    }

    pub fn unproject(&self, q: LocalPoint) -> Result<GeoPoint> {
        let dlat = q.y / self.m_per_deg_lat;
        let dlon = q.x / self.m_per_deg_lon;
        if !dlat.is_finite()
            || !dlon.is_finite()
            || dlat.abs() >= FRAME_VALIDITY_DEG
            || dlon.abs() >= FRAME_VALIDITY_DEG
        {
            return Err(Error::OutOfFrame {
                lat: self.origin.lat + dlat,
                lon: self.origin.lon + dlon,
            });
        }
        Ok(GeoPoint {
            lat: self.origin.lat + dlat,
            lon: self.origin.lon + dlon,
        })
    }
}

/// Build the tangent frame centred on `center`.
pub fn make_frame(center: GeoPoint) -> Result<LocalFrame> {
    LocalFrame::new(center)
}

/// An OSM building outline. The ring is closed (first vertex == last vertex).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub id: String,
    pub ring: Vec<GeoPoint>,
}

impl Footprint {
    /// Validate and build a footprint. An open ring is closed automatically.
    pub fn new(id: impl Into<String>, mut ring: Vec<GeoPoint>) -> Result<Self> {
        let id = id.into();
        let bad = |reason: &str| Error::InvalidFootprint {
            id: id.clone(),
            reason: reason.to_string(),
        };
        if ring.iter().any(|p| !p.is_valid()) {
            return Err(bad("vertex outside WGS84 range"));
        }
        if let (Some(first), Some(last)) = (ring.first().copied(), ring.last().copied()) {
            if first != last {
                ring.push(first);
            }
        }
        if ring.len() < 4 {
            return Err(bad("ring needs at least 4 vertices (closed)"));
        }
        if !ring_is_simple(&ring) {
            return Err(bad("ring self-intersects"));
        }
        Ok(Footprint { id, ring })
    }

    /// Distinct vertices (the closing duplicate dropped).
    pub fn vertices(&self) -> &[GeoPoint] {
        match self.ring.len() {
            0 => &[],
            n if self.ring[0] == self.ring[n - 1] => &self.ring[..n - 1],
            _ => &self.ring,
        }
    }

    /// Distinct vertices projected into `frame`.
    pub fn local_vertices(&self, frame: &LocalFrame) -> Result<Vec<LocalPoint>> {
        self.vertices().iter().map(|p| frame.project(*p)).collect()
    }
}

/// The ring vertex nearest to `q`. Ties go to the lowest vertex index.
pub fn nearest_vertex(
    fp: &Footprint,
    frame: &LocalFrame,
    q: LocalPoint,
) -> Result<(LocalPoint, f64)> {
    let verts = fp.local_vertices(frame)?;
    nearest_of(&verts, q).ok_or_else(|| Error::InvalidFootprint {
        id: fp.id.clone(),
        reason: "empty ring".into(),
    })
}

pub(crate) fn nearest_of(verts: &[LocalPoint], q: LocalPoint) -> Option<(LocalPoint, f64)> {
    let mut best: Option<(LocalPoint, f64)> = None;
    for v in verts {
        let d = dist(*v, q);
        // strict `<` keeps the earliest vertex on ties
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((*v, d));
        }
    }
    best
}

/// Area-weighted (shoelace) centroid of the footprint in local coordinates.
pub fn footprint_centroid(fp: &Footprint, frame: &LocalFrame) -> Result<LocalPoint> {
    let verts = fp.local_vertices(frame)?;
    polygon_centroid(&verts).ok_or_else(|| Error::InvalidFootprint {
        id: fp.id.clone(),
        reason: "zero area".into(),
    })
}

pub(crate) fn polygon_centroid(verts: &[LocalPoint]) -> Option<LocalPoint> {
    if verts.len() < 3 {
        return None;
    }
    // shift to the first vertex for numerical stability
    let o = verts[0];
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..verts.len() {
        let p = verts[i].sub(o);
        let q = verts[(i + 1) % verts.len()].sub(o);
        let c = p.cross(q);
        a2 += c;
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    let scale = verts
        .iter()
        .map(|v| v.sub(o).norm())
        .fold(0.0_f64, f64::max);
    if a2.abs() <= 1e-12 * scale * scale || !a2.is_finite() {
        return None;
    }
    Some(LocalPoint::new(o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2)))
}

fn ring_is_simple(ring: &[GeoPoint]) -> bool {
    // planar test in degree space is sufficient for topology near one point
    let pts: Vec<(f64, f64)> = ring.iter().map(|p| (p.lon, p.lat)).collect();
    let n = pts.len() - 1;
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(pts[i], pts[i + 1], pts[j], pts[j + 1]) {
                return false;
            }
        }
    }
    true
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn segments_intersect(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EARTH_R: f64 = 6_371_008.8;

    // great-circle distance on a sphere whose meridian degree matches M_PER_DEG_LAT
    fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
        let r = M_PER_DEG_LAT * 180.0 / std::f64::consts::PI;
        let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
        let dp = p2 - p1;
        let dl = (b.lon - a.lon).to_radians();
        let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * r * h.sqrt().asin()
    }

    fn berlin() -> GeoPoint {
        GeoPoint::new(52.52, 13.405).unwrap()
    }

    fn local_square(frame: &LocalFrame, x0: f64, y0: f64, side: f64) -> Footprint {
        let pts = [(0.0, 0.0), (side, 0.0), (side, side), (0.0, side), (0.0, 0.0)];
        let ring = pts
            .iter()
            .map(|(x, y)| frame.unproject(LocalPoint::new(x0 + x, y0 + y)).unwrap())
            .collect();
        Footprint::new("sq", ring).unwrap()
    }

    #[test]
    fn frame_scale_matches_haversine() {
        let c = berlin();
        let f = make_frame(c).unwrap();
        assert!((f.m_per_deg_lon - 111_320.0 * 52.52_f64.to_radians().cos()).abs() < 1e-9);
        let p = GeoPoint::new(c.lat, c.lon + 0.001).unwrap();
        let q = f.project(p).unwrap();
        let h = haversine(c, p);
        assert!((q.norm() - h).abs() / h < 1e-3, "{} vs {}", q.norm(), h);
        // sanity against the true mean earth radius too
        let rh = h * EARTH_R / (M_PER_DEG_LAT * 180.0 / std::f64::consts::PI);
        assert!((q.norm() - rh).abs() / rh < 2e-3);
    }

    #[test]
    fn equator_frame_is_isotropic() {
        let f = make_frame(GeoPoint::new(0.0, 0.0).unwrap()).unwrap();
        assert_eq!(f.m_per_deg_lat, f.m_per_deg_lon);
    }

    #[test]
    fn origin_maps_to_origin() {
        let f = make_frame(berlin()).unwrap();
        assert_eq!(f.project(berlin()).unwrap(), LocalPoint::ORIGIN);
    }

    #[test]
    fn polar_frame_rejected() {
        assert!(matches!(
            make_frame(GeoPoint::new(89.5, 0.0).unwrap()),
            Err(Error::DegenerateFrame(_))
        ));
        assert!(GeoPoint::new(91.0, 0.0).is_err());
    }

    #[test]
    fn north_offset_projects_to_y() {
        let c = berlin();
        let f = make_frame(c).unwrap();
        let p = GeoPoint::new(c.lat + 0.001, c.lon).unwrap();
        let q = f.project(p).unwrap();
        assert!(q.x.abs() < 1e-9);
        assert!((q.y - 111.32).abs() < 1e-6);
        let h = haversine(c, p);
        assert!((q.y - h).abs() / h < 1e-3);
    }

    #[test]
    fn out_of_range_rejected() {
        let c = berlin();
        let f = make_frame(c).unwrap();
        let far = GeoPoint::new(c.lat + 0.06, c.lon).unwrap();
        assert!(matches!(f.project(far), Err(Error::OutOfFrame { .. })));
        assert!(f.unproject(LocalPoint::new(0.0, 10_000.0)).is_err());
    }

    #[test]
    fn dist_basics() {
        assert_eq!(dist(LocalPoint::new(0.0, 0.0), LocalPoint::new(3.0, 4.0)), 5.0);
        let a = LocalPoint::new(1.5, -2.0);
        assert_eq!(dist(a, a), 0.0);
    }

    #[test]
    fn nearest_vertex_unit_square() {
        let f = make_frame(berlin()).unwrap();
        let sq = local_square(&f, 0.0, 0.0, 1.0);
        let (v, d) = nearest_vertex(&sq, &f, LocalPoint::new(0.1, 0.1)).unwrap();
        assert!(v.norm() < 1e-9);
        assert!((d - 0.02_f64.sqrt()).abs() < 1e-9);
        let (v2, d2) = nearest_vertex(&sq, &f, LocalPoint::new(1.0, 1.0)).unwrap();
        assert!(dist(v2, LocalPoint::new(1.0, 1.0)) < 1e-9);
        assert!(d2 < 1e-9);
    }

    #[test]
    fn nearest_vertex_tie_takes_lowest_index() {
        let verts = [
            LocalPoint::new(1.0, 0.0),
            LocalPoint::new(-1.0, 0.0),
            LocalPoint::new(0.0, 1.0),
        ];
        let (v, _) = nearest_of(&verts, LocalPoint::ORIGIN).unwrap();
        assert_eq!(v, verts[0]);
    }

    #[test]
    fn centroid_of_squares() {
        let f = make_frame(berlin()).unwrap();
        let c = footprint_centroid(&local_square(&f, 0.0, 0.0, 1.0), &f).unwrap();
        assert!((c.x - 0.5).abs() < 1e-9 && (c.y - 0.5).abs() < 1e-9);
        let c = footprint_centroid(&local_square(&f, 10.0, -4.0, 2.0), &f).unwrap();
        assert!((c.x - 11.0).abs() < 1e-8 && (c.y + 3.0).abs() < 1e-8);
    }

    #[test]
    fn degenerate_rings_rejected() {
        let p = GeoPoint::new(1.0, 1.0).unwrap();
        assert!(Footprint::new("a", vec![p, p]).is_err());
        // bow-tie
        let bow = [(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)]
            .iter()
            .map(|(a, b)| GeoPoint::new(*a, *b).unwrap())
            .collect();
        assert!(Footprint::new("bow", bow).is_err());
        // collinear ring has zero area
        let line: Vec<GeoPoint> = [(0.0, 0.0), (0.0, 0.0001), (0.0, 0.0002)]
            .iter()
            .map(|(a, b)| GeoPoint::new(*a, *b).unwrap())
            .collect();
        let f = make_frame(GeoPoint::new(0.0, 0.0).unwrap()).unwrap();
        let fp = Footprint {
            id: "line".into(),
            ring: line,
        };
        assert!(footprint_centroid(&fp, &f).is_err());
    }

    fn convex_polygon(n: usize, r: f64, cx: f64, cy: f64, phase: f64) -> Vec<LocalPoint> {
        (0..n)
            .map(|i| {
                let a = phase + std::f64::consts::TAU * i as f64 / n as f64;
                LocalPoint::new(cx + r * a.cos(), cy + r * a.sin())
            })
            .collect()
    }

    // fan triangulation oracle: area-weighted mean of triangle centroids
    fn triangulation_centroid(v: &[LocalPoint]) -> LocalPoint {
        let mut area = 0.0;
        let mut acc = LocalPoint::ORIGIN;
        for i in 1..v.len() - 1 {
            let a = 0.5 * v[i].sub(v[0]).cross(v[i + 1].sub(v[0]));
            let c = LocalPoint::new(
                (v[0].x + v[i].x + v[i + 1].x) / 3.0,
                (v[0].y + v[i].y + v[i + 1].y) / 3.0,
            );
            acc = acc.add(c.scale(a));
            area += a;
        }
        acc.scale(1.0 / area)
    }

    proptest! {
        #[test]
        fn project_round_trip(dlat in -0.0049..0.0049f64, dlon in -0.0049..0.0049f64) {
            let c = berlin();
            let f = make_frame(c).unwrap();
            let p = GeoPoint::new(c.lat + dlat, c.lon + dlon).unwrap();
            let back = f.unproject(f.project(p).unwrap()).unwrap();
            prop_assert!((back.lat - p.lat).abs() < 1e-9);
            prop_assert!((back.lon - p.lon).abs() < 1e-9);
        }

        #[test]
        fn distances_match_haversine(
            a in (-0.0009..0.0009f64, -0.0014..0.0014f64),
            b in (-0.0009..0.0009f64, -0.0014..0.0014f64),
        ) {
            let c = berlin();
            let f = make_frame(c).unwrap();
            let pa = GeoPoint::new(c.lat + a.0, c.lon + a.1).unwrap();
            let pb = GeoPoint::new(c.lat + b.0, c.lon + b.1).unwrap();
            let h = haversine(pa, pb);
            prop_assume!(h > 1.0 && h < 200.0);
            let d = dist(f.project(pa).unwrap(), f.project(pb).unwrap());
            prop_assert!((d - h).abs() / h < 1e-3, "{} vs {}", d, h);
        }

        #[test]
        fn triangle_inequality(
            a in (-100.0..100.0f64, -100.0..100.0f64),
            b in (-100.0..100.0f64, -100.0..100.0f64),
            c in (-100.0..100.0f64, -100.0..100.0f64),
        ) {
            let (a, b, c) = (LocalPoint::new(a.0, a.1), LocalPoint::new(b.0, b.1), LocalPoint::new(c.0, c.1));
            prop_assert!(dist(a, c) <= dist(a, b) + dist(b, c) + 1e-9);
            prop_assert_eq!(dist(a, b), dist(b, a));
        }

        #[test]
        fn nearest_vertex_matches_scan(
            n in 3usize..12, r in 1.0..40.0f64, cx in -50.0..50.0f64, cy in -50.0..50.0f64,
            phase in 0.0..std::f64::consts::TAU, qx in -80.0..80.0f64, qy in -80.0..80.0f64,
        ) {
            let f = make_frame(berlin()).unwrap();
            let local = convex_polygon(n, r, cx, cy, phase);
            let mut ring: Vec<GeoPoint> = local.iter().map(|p| f.unproject(*p).unwrap()).collect();
            ring.push(ring[0]);
            let fp = Footprint::new("p", ring).unwrap();
            let q = LocalPoint::new(qx, qy);
            let (v, d) = nearest_vertex(&fp, &f, q).unwrap();
            let brute = local.iter().map(|p| dist(*p, q)).fold(f64::INFINITY, f64::min);
            prop_assert!((d - brute).abs() < 1e-6);
            prop_assert!((dist(v, q) - d).abs() < 1e-9);
        }

        #[test]
        fn centroid_matches_triangulation(
            n in 3usize..10, r in 1.0..30.0f64, cx in -40.0..40.0f64, cy in -40.0..40.0f64, phase in 0.0..std::f64::consts::TAU,
        ) {
            let local = convex_polygon(n, r, cx, cy, phase);
            let got = polygon_centroid(&local).unwrap();
            let want = triangulation_centroid(&local);
            prop_assert!(dist(got, want) < 1e-8);
        }
    }
}
