//! Planar primitives: bounding boxes, the sparse point/box membership matrix
//! and the batched crossing-number point-in-polygon kernel.
//!
//! Coordinates are plain lon/lat degrees treated as Euclidean.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("polygon has no vertices")]
    EmptyPolygon,
    #[error("non-finite coordinate ({0}, {1})")]
    NonFinite(f64, f64),
    #[error("edge {edge} references vertex {vertex}, but polygon has {n_nodes} vertices")]
    EdgeOutOfRange {
        edge: usize,
        vertex: u32,
        n_nodes: usize,
    },
    #[error("vertex {0} has odd edge degree; rings are not closed")]
    OpenRing(usize),
}

/// A lon/lat location in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub lon: f64,
    pub lat: f64,
}

impl Point {
    pub const fn new(lon: f64, lat: f64) -> Self {
        Point { lon, lat }
    }

    /// Builds a point, rejecting NaN and infinities.
    pub fn checked(lon: f64, lat: f64) -> Result<Self, GeometryError> {
        if lon.is_finite() && lat.is_finite() {
            Ok(Point { lon, lat })
        } else {
            Err(GeometryError::NonFinite(lon, lat))
        }
    }
}

/// Axis-aligned box `(x_min, x_max, y_min, y_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BBox {
    pub const fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        BBox {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    /// Strict containment; points on the border are outside.
    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        p.lon > self.x_min && p.lon < self.x_max && p.lat > self.y_min && p.lat < self.y_max
    }

    /// Closed containment, border included.
    #[inline]
    pub fn contains_closed(&self, p: Point) -> bool {
        p.lon >= self.x_min && p.lon <= self.x_max && p.lat >= self.y_min && p.lat <= self.y_max
    }

    #[inline]
    pub fn intersects(&self, other: &BBox) -> bool {
        self.x_min <= other.x_max
            && other.x_min <= self.x_max
            && self.y_min <= other.y_max
            && other.y_min <= self.y_max
    }

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn diagonal(&self) -> f64 {
        (self.x_max - self.x_min).hypot(self.y_max - self.y_min)
    }

    /// Whether the closed segment `a`-`b` touches the closed box.
    ///
    /// Separating-axis test over the two box axes and the segment normal.
    pub fn intersects_segment(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        if a[0].max(b[0]) < self.x_min
            || a[0].min(b[0]) > self.x_max
            || a[1].max(b[1]) < self.y_min
            || a[1].min(b[1]) > self.y_max
        {
            return false;
        }
        let dx = b[0] - a[0];
        let dy = b[1] - a[1];
        let side = |x: f64, y: f64| dx * (y - a[1]) - dy * (x - a[0]);
        let s = [
            side(self.x_min, self.y_min),
            side(self.x_max, self.y_min),
            side(self.x_min, self.y_max),
            side(self.x_max, self.y_max),
        ];
        !(s.iter().all(|&v| v > 0.0) || s.iter().all(|&v| v < 0.0))
    }
}

pub fn bbox_contains(b: &BBox, p: Point) -> bool {
    b.contains(p)
}

/// Vertex/edge representation of a region boundary. Several rings (outer
/// boundaries, holes, islands) may share one geometry; inside-ness follows
/// the even-odd rule.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolygonGeometry {
    nodes: Vec<[f64; 2]>,
    edges: Vec<[u32; 2]>,
}

impl PolygonGeometry {
    /// Validates indices and ring closure (every vertex has even degree).
    pub fn new(nodes: Vec<[f64; 2]>, edges: Vec<[u32; 2]>) -> Result<Self, GeometryError> {
        let mut degree = vec![0u32; nodes.len()];
        for (e, &[i, j]) in edges.iter().enumerate() {
            for v in [i, j] {
                if v as usize >= nodes.len() {
                    return Err(GeometryError::EdgeOutOfRange {
                        edge: e,
                        vertex: v,
                        n_nodes: nodes.len(),
                    });
                }
                degree[v as usize] += 1;
            }
        }
        if let Some(v) = degree.iter().position(|d| d % 2 == 1) {
            return Err(GeometryError::OpenRing(v));
        }
        if let Some(&[x, y]) = nodes
            .iter()
            .find(|n| !(n[0].is_finite() && n[1].is_finite()))
        {
            return Err(GeometryError::NonFinite(x, y));
        }
        Ok(PolygonGeometry { nodes, edges })
    }

    /// Joins rings into one geometry. A trailing vertex equal to the first
    /// (GeoJSON style closure) is dropped; each ring becomes its own loop.
    pub fn from_rings<R: AsRef<[[f64; 2]]>>(rings: &[R]) -> Result<Self, GeometryError> {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for ring in rings {
            let mut ring = ring.as_ref();
            if ring.len() > 1 && ring.first() == ring.last() {
                ring = &ring[..ring.len() - 1];
            }
            if ring.is_empty() {
                continue;
            }
            let start = nodes.len() as u32;
            let n = ring.len() as u32;
            nodes.extend_from_slice(ring);
            edges.extend((0..n).map(|k| [start + k, start + (k + 1) % n]));
        }
        Self::new(nodes, edges)
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn edges(&self) -> &[[u32; 2]] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Traces the edges into closed vertex loops (without repeating the
    /// first vertex). Loops come out in edge order.
    pub fn rings(&self) -> Vec<Vec<[f64; 2]>> {
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for (e, &[i, j]) in self.edges.iter().enumerate() {
            incident[i as usize].push(e);
            incident[j as usize].push(e);
        }
        let mut cursor = vec![0usize; self.nodes.len()];
        let mut used = vec![false; self.edges.len()];
        let mut rings = Vec::new();
        for e0 in 0..self.edges.len() {
            if used[e0] {
                continue;
            }
            used[e0] = true;
            let start = self.edges[e0][0] as usize;
            let mut ring = vec![self.nodes[start]];
            let mut cur = self.edges[e0][1] as usize;
            while cur != start {
                ring.push(self.nodes[cur]);
                let list = &incident[cur];
                while used[list[cursor[cur]]] {
                    cursor[cur] += 1;
                }
                let e = list[cursor[cur]];
                used[e] = true;
                let [a, b] = self.edges[e];
                cur = if a as usize == cur {
                    b as usize
                } else {
                    a as usize
                };
            }
            rings.push(ring);
        }
        rings
    }

    /// Edge endpoints as coordinate pairs.
    pub fn segments(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        self.edges
            .iter()
            .map(|&[i, j]| (self.nodes[i as usize], self.nodes[j as usize]))
    }

    /// Even-odd test for one point; same arithmetic as [`points_in_polygon`].
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.segments() {
            let (lo, hi) = if a[1] <= b[1] { (a, b) } else { (b, a) };
            if lo[1] < p.lat && p.lat <= hi[1] && crosses(lo, hi, p) {
                inside = !inside;
            }
        }
        inside
    }

    /// Euclidean distance from `p` to the region; zero inside.
    pub fn distance_to(&self, p: Point) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        self.segments()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from `p` to the nearest edge, ignoring inside-ness.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.segments()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Whether the rightward ray from `p` crosses the edge `lo`-`hi`, given
/// `lo.y < p.y <= hi.y`. An endpoint level with `p` counts as above it.
#[inline(always)]
fn crosses(lo: [f64; 2], hi: [f64; 2], p: Point) -> bool {
    let x_left = lo[0].min(hi[0]);
    if p.lon < x_left {
        return true;
    }
    if p.lon >= lo[0].max(hi[0]) {
        return false;
    }
    (hi[0] - lo[0]) * (p.lat - lo[1]) - (p.lon - lo[0]) * (hi[1] - lo[1]) > 0.0
}

pub fn point_segment_distance(p: Point, a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.lon - a[0]) * dx + (p.lat - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.lon - (a[0] + t * dx)).hypot(p.lat - (a[1] + t * dy))
}

/// Tight box over all vertices.
pub fn polygon_bbox(poly: &PolygonGeometry) -> Result<BBox, GeometryError> {
    let mut it = poly.nodes.iter();
    let first = it.next().ok_or(GeometryError::EmptyPolygon)?;
    let init = BBox::new(first[0], first[0], first[1], first[1]);
    Ok(it.fold(init, |b, n| {
        BBox::new(
            b.x_min.min(n[0]),
            b.x_max.max(n[0]),
            b.y_min.min(n[1]),
            b.y_max.max(n[1]),
        )
    }))
}

/// Polygons with at most this many edges are tested point by point, which
/// beats sorting the batch.
const DIRECT_EDGES: usize = 16;

/// Batched crossing-number test.
///
/// Points are ordered by latitude once; each edge then binary-searches the
/// run of points whose latitude falls in its half-open span and toggles the
/// parity of those lying left of it. Cost is `O((N_pt + N_edge) log N_pt)`
/// plus the number of point/edge span overlaps. Small polygons are tested
/// point by point instead.
pub fn points_in_polygon(points: &[Point], poly: &PolygonGeometry) -> Vec<bool> {
    let mut inside = vec![false; points.len()];
    let Ok(bb) = polygon_bbox(poly) else {
        return inside;
    };
    if poly.edges.len() <= DIRECT_EDGES {
        for (flag, &p) in inside.iter_mut().zip(points) {
            *flag = bb.contains_closed(p) && poly.contains(p);
        }
        return inside;
    }
    let mut by_lat: Vec<(f64, u32)> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| bb.contains_closed(**p))
        .map(|(i, p)| (p.lat, i as u32))
        .collect();
    if by_lat.is_empty() {
        return inside;
    }
    by_lat.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let ys: Vec<f64> = by_lat.iter().map(|e| e.0).collect();
    let order: Vec<u32> = by_lat.iter().map(|e| e.1).collect();

    for (a, b) in poly.segments() {
        let (lo, hi) = if a[1] <= b[1] { (a, b) } else { (b, a) };
        if lo[1] == hi[1] {
            continue;
        }
        let start = ys.partition_point(|&y| y <= lo[1]);
        let end = ys.partition_point(|&y| y <= hi[1]);
        for &i in &order[start..end] {
            let i = i as usize;
            if crosses(lo, hi, points[i]) {
                inside[i] = !inside[i];
            }
        }
    }
    inside
}

/// Counting transpose of a compressed sparse layout with `n_out` outer
/// entries on the other side. Inner lists of the result are ascending.
fn transpose(n_out: usize, ptr: &[u32], idx: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let mut out_ptr = vec![0u32; n_out + 1];
    for &i in idx {
        out_ptr[i as usize + 1] += 1;
    }
    for k in 0..n_out {
        out_ptr[k + 1] += out_ptr[k];
    }
    let mut fill = out_ptr.clone();
    let mut out_idx = vec![0u32; idx.len()];
    for j in 0..ptr.len() - 1 {
        for &i in &idx[ptr[j] as usize..ptr[j + 1] as usize] {
            out_idx[fill[i as usize] as usize] = j as u32;
            fill[i as usize] += 1;
        }
    }
    (out_ptr, out_idx)
}

/// Sparse boolean points x boxes matrix with both row and column views.
/// Entry `(i, j)` is set iff point `i` lies strictly inside box `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<u32>,
    row_cols: Vec<u32>,
    col_ptr: Vec<u32>,
    col_rows: Vec<u32>,
}

impl MembershipMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.row_cols.len()
    }

    /// Boxes containing point `i`, ascending.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.row_cols[self.row_ptr[i] as usize..self.row_ptr[i + 1] as usize]
    }

    /// Points inside box `j`, ascending.
    pub fn col(&self, j: usize) -> &[u32] {
        &self.col_rows[self.col_ptr[j] as usize..self.col_ptr[j + 1] as usize]
    }

    pub fn row_count(&self, i: usize) -> usize {
        (self.row_ptr[i + 1] - self.row_ptr[i]) as usize
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&(j as u32)).is_ok()
    }
}

/// Sparse outer-product membership of every point against every box.
///
/// Points are sorted by longitude once, each box selects its strict
/// longitude slab by binary search and filters by latitude; the column
/// lists are then transposed into row lists with a counting pass.
pub fn bbox_membership(points: &[Point], boxes: &[BBox]) -> MembershipMatrix {
    let mut by_lon: Vec<(f64, f64, u32)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.lon, p.lat, i as u32))
        .collect();
    by_lon.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    // Slab order first; both ascending views come from counting transposes.
    let mut slab_ptr = Vec::with_capacity(boxes.len() + 1);
    let mut slab_rows: Vec<u32> = Vec::new();
    slab_ptr.push(0u32);
    for b in boxes {
        let start = by_lon.partition_point(|e| e.0 <= b.x_min);
        let end = start + by_lon[start..].partition_point(|e| e.0 < b.x_max);
        slab_rows.extend(
            by_lon[start..end]
                .iter()
                .filter(|e| e.1 > b.y_min && e.1 < b.y_max)
                .map(|e| e.2),
        );
        slab_ptr.push(slab_rows.len() as u32);
    }

    let (row_ptr, row_cols) = transpose(points.len(), &slab_ptr, &slab_rows);
    let (col_ptr, col_rows) = transpose(boxes.len(), &row_ptr, &row_cols);

    MembershipMatrix {
        n_rows: points.len(),
        n_cols: boxes.len(),
        row_ptr,
        row_cols,
        col_ptr,
        col_rows,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook even-odd count: every edge against every point, with the
    /// intersection abscissa computed by division.
    pub(crate) fn naive_inside(p: Point, poly: &PolygonGeometry) -> bool {
        let mut count = 0usize;
        for (a, b) in poly.segments() {
            if (a[1] >= p.lat) != (b[1] >= p.lat) {
                let x = a[0] + (p.lat - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p.lon < x {
                    count += 1;
                }
            }
        }
        count % 2 == 1
    }

    pub(crate) fn star_polygon(rng: &mut impl Rng, n: usize, cx: f64, cy: f64) -> PolygonGeometry {
        let ring: Vec<[f64; 2]> = (0..n)
            .map(|k| {
                let t = k as f64 / n as f64 * std::f64::consts::TAU;
                let r = rng.gen_range(0.2..1.0);
                [cx + r * t.cos(), cy + r * t.sin()]
            })
            .collect();
        PolygonGeometry::from_rings(&[ring]).unwrap()
    }

    fn unit_square() -> PolygonGeometry {
        PolygonGeometry::from_rings(&[vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]])
            .unwrap()
    }

    #[test]
    fn bbox_contains_examples() {
        let ma = BBox::new(-73.5081, -69.9284, 41.2380, 42.8866);
        assert!(bbox_contains(&ma, Point::new(-71.095, 42.363)));
        let unit = BBox::new(0.0, 1.0, 0.0, 1.0);
        assert!(!bbox_contains(&unit, Point::new(0.0, 0.5)));
        assert!(!bbox_contains(&unit, Point::new(2.0, 2.0)));
    }

    #[test]
    fn membership_single_entry() {
        let m = bbox_membership(&[Point::new(0.5, 0.5)], &[BBox::new(0.0, 1.0, 0.0, 1.0)]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.row(0), &[0]);
        assert_eq!(m.col(0), &[0]);
    }

    #[test]
    fn membership_overlapping_state_boxes() {
        // MA box and an NH-like box whose southern edge dips below MA's
        // northern edge.
        let ma = BBox::new(-73.5081, -69.9284, 41.2380, 42.8866);
        let nh = BBox::new(-72.5572, -70.6106, 42.6970, 45.3055);
        let p = Point::new(-71.3, 42.75);
        let m = bbox_membership(&[p], &[ma, nh]);
        assert_eq!(m.row(0), &[0, 1]);
    }

    #[test]
    fn membership_matches_pairwise_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let points: Vec<Point> = (0..1000)
            .map(|_| Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let boxes: Vec<BBox> = (0..20)
            .map(|_| {
                let (x, y) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let (w, h) = (rng.gen_range(0.0..0.8), rng.gen_range(0.0..0.8));
                BBox::new(x, x + w, y, y + h)
            })
            .collect();
        let m = bbox_membership(&points, &boxes);
        let mut nnz = 0;
        for (i, p) in points.iter().enumerate() {
            let expected: Vec<u32> = (0..boxes.len() as u32)
                .filter(|&j| bbox_contains(&boxes[j as usize], *p))
                .collect();
            assert_eq!(m.row(i), expected.as_slice());
            nnz += expected.len();
        }
        assert_eq!(m.nnz(), nnz);
        for j in 0..boxes.len() {
            for &i in m.col(j) {
                assert!(m.contains(i as usize, j));
            }
        }
    }

    #[test]
    fn unit_square_pip() {
        let sq = unit_square();
        let r = points_in_polygon(&[Point::new(0.5, 0.5), Point::new(1.5, 0.5)], &sq);
        assert_eq!(r, vec![true, false]);
    }

    #[test]
    fn square_with_hole() {
        let poly = PolygonGeometry::from_rings(&[
            vec![[0.0, 0.0], [3.0, 0.0], [3.0, 3.0], [0.0, 3.0], [0.0, 0.0]],
            vec![[1.0, 1.0], [1.0, 2.0], [2.0, 2.0], [2.0, 1.0], [1.0, 1.0]],
        ])
        .unwrap();
        let r = points_in_polygon(&[Point::new(1.5, 1.5), Point::new(0.5, 1.5)], &poly);
        assert_eq!(r, vec![false, true]);
    }

    #[test]
    fn empty_polygon_is_all_false() {
        let poly = PolygonGeometry::default();
        assert_eq!(
            points_in_polygon(&[Point::new(0.0, 0.0)], &poly),
            vec![false]
        );
        assert_eq!(polygon_bbox(&poly), Err(GeometryError::EmptyPolygon));
    }

    #[test]
    fn vertex_level_with_query_counts_once() {
        // Diamond: the query row passes exactly through the left and right
        // vertices.
        let poly =
            PolygonGeometry::from_rings(&[vec![[0.0, 1.0], [1.0, 0.0], [2.0, 1.0], [1.0, 2.0]]])
                .unwrap();
        let pts = [
            Point::new(1.0, 1.0),
            Point::new(-1.0, 1.0),
            Point::new(3.0, 1.0),
        ];
        assert_eq!(points_in_polygon(&pts, &poly), vec![true, false, false]);
    }

    #[test]
    fn random_star_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let poly = star_polygon(&mut rng, 50, 0.0, 0.0);
        let pts: Vec<Point> = (0..500)
            .map(|_| Point::new(rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2)))
            .filter(|p| poly.boundary_distance(*p) > 1e-9)
            .collect();
        let batched = points_in_polygon(&pts, &poly);
        for (p, got) in pts.iter().zip(batched) {
            assert_eq!(got, naive_inside(*p, &poly), "{p:?}");
            assert_eq!(got, poly.contains(*p));
        }
    }

    #[test]
    fn bbox_examples() {
        assert_eq!(
            polygon_bbox(&unit_square()).unwrap(),
            BBox::new(0.0, 1.0, 0.0, 1.0)
        );
        let single = PolygonGeometry::new(vec![[2.0, 3.0]], vec![]).unwrap();
        assert_eq!(
            polygon_bbox(&single).unwrap(),
            BBox::new(2.0, 2.0, 3.0, 3.0)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let poly = star_polygon(&mut rng, 37, 5.0, -2.0);
        let bb = polygon_bbox(&poly).unwrap();
        assert!(poly
            .nodes()
            .iter()
            .all(|&[x, y]| bb.contains_closed(Point::new(x, y))));
        assert!(poly.nodes().iter().any(|n| n[0] == bb.x_min));
        assert!(poly.nodes().iter().any(|n| n[1] == bb.y_max));
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert!(matches!(
            PolygonGeometry::new(vec![[0.0, 0.0]], vec![[0, 1]]),
            Err(GeometryError::EdgeOutOfRange { .. })
        ));
        assert_eq!(
            PolygonGeometry::new(vec![[0.0, 0.0], [1.0, 0.0]], vec![[0, 1]]),
            Err(GeometryError::OpenRing(0))
        );
        assert!(Point::checked(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn segment_box_intersection() {
        let b = BBox::new(0.0, 1.0, 0.0, 1.0);
        assert!(b.intersects_segment([-1.0, 0.5], [2.0, 0.5]));
        assert!(b.intersects_segment([0.5, 0.5], [0.6, 0.6]));
        assert!(b.intersects_segment([1.0, 1.0], [2.0, 3.0]));
        assert!(!b.intersects_segment([1.5, -1.0], [3.0, 2.0]));
        // Diagonal passing just outside the corner.
        assert!(!b.intersects_segment([1.2, 0.0], [2.0, 1.0]));
        assert!(!b.intersects_segment([-0.5, 1.6], [1.6, -0.5 + 2.2]));
    }

    proptest! {
        #[test]
        fn parity_invariances(seed in any::<u64>(), shift in -4i32..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let poly = star_polygon(&mut rng, 24, 0.0, 0.0);
            let pts: Vec<Point> = (0..64)
                .map(|_| Point::new(rng.gen_range(-1.1..1.1), rng.gen_range(-1.1..1.1)))
                .filter(|p| poly.boundary_distance(*p) > 1e-9)
                .collect();
            let base = points_in_polygon(&pts, &poly);

            let mut edges = poly.edges().to_vec();
            edges.reverse();
            edges.rotate_left(5);
            let permuted = PolygonGeometry::new(poly.nodes().to_vec(), edges).unwrap();
            prop_assert_eq!(&points_in_polygon(&pts, &permuted), &base);

            let off = 2f64.powi(shift);
            let moved = PolygonGeometry::new(
                poly.nodes().iter().map(|n| [n[0] + off, n[1] - off]).collect(),
                poly.edges().to_vec(),
            ).unwrap();
            let moved_pts: Vec<Point> = pts.iter().map(|p| Point::new(p.lon + off, p.lat - off)).collect();
            prop_assert_eq!(&points_in_polygon(&moved_pts, &moved), &base);

            for (p, b) in pts.iter().zip(&base) {
                prop_assert_eq!(poly.contains(*p), *b);
            }
        }

        #[test]
        fn bbox_filter_keeps_interior_points(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let poly = star_polygon(&mut rng, 16, 0.0, 0.0);
            let bb = polygon_bbox(&poly).unwrap();
            for _ in 0..64 {
                let p = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                if poly.contains(p) && poly.boundary_distance(p) > 1e-9 {
                    prop_assert!(bb.contains(p));
                }
            }
        }
    }
}
