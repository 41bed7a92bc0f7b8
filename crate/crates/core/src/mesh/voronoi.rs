//! Clipped Voronoi meshes with Lloyd smoothing.
//!
//! Each cell is computed independently by clipping the domain boundary
//! polygon with the bisector half-planes of nearby seeds, visited ring by
//! ring on a bucket grid until no farther seed can reach the cell. Cell
//! vertices are then welded into shared nodes so that neighbouring cells
//! reference the same node ids.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;

use nalgebra::{Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Mesh, MeshError};
use crate::geometry::{point_in_loop, segments_touch, signed_area, Polygon};

/// Number of straight segments approximating the quarter-circle hole.
pub const ARC_SEGMENTS: usize = 32;

/// Relative (to the domain diameter) tolerance for welding cell vertices and
/// detecting coincident seeds.
const WELD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// `[0, width] × [0, height]`.
    Rectangle { width: f64, height: f64 },
    /// `[0, width] × [0, height]` minus the disc of `radius` centred at the
    /// origin; the arc is a polyline of [`ARC_SEGMENTS`] segments.
    QuarterPlate { width: f64, height: f64, radius: f64 },
}

impl Domain {
    pub fn check(&self) -> Result<(), MeshError> {
        let (w, h) = self.extent();
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(MeshError::Parameter(format!("domain must be non-degenerate, got {w} x {h}")));
        }
        if let Domain::QuarterPlate { radius, .. } = *self {
            if !(radius > 0.0 && radius < w.min(h)) {
                return Err(MeshError::Parameter(format!(
                    "hole radius must lie in (0, {}), got {radius}",
                    w.min(h)
                )));
            }
        }
        Ok(())
    }

    pub fn extent(&self) -> (f64, f64) {
        match *self {
            Domain::Rectangle { width, height } | Domain::QuarterPlate { width, height, .. } => {
                (width, height)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        let (w, h) = self.extent();
        w.hypot(h)
    }

    /// CCW boundary loop.
    pub fn boundary(&self) -> Vec<Point2<f64>> {
        match *self {
            Domain::Rectangle { width, height } => vec![
                Point2::new(0.0, 0.0),
                Point2::new(width, 0.0),
                Point2::new(width, height),
                Point2::new(0.0, height),
            ],
            Domain::QuarterPlate {
                width,
                height,
                radius,
            } => {
                let mut pts = vec![
                    Point2::new(radius, 0.0),
                    Point2::new(width, 0.0),
                    Point2::new(width, height),
                    Point2::new(0.0, height),
                    Point2::new(0.0, radius),
                ];
                // clockwise around the hole keeps the material on the left
                for k in 1..ARC_SEGMENTS {
                    let t = FRAC_PI_2 * (1.0 - k as f64 / ARC_SEGMENTS as f64);
                    pts.push(Point2::new(radius * t.cos(), radius * t.sin()));
                }
                pts
            }
        }
    }

    /// Convex CCW polygon whose removal from the bounding rectangle leaves
    /// the domain: the arc chords closed by a square reaching past the
    /// rectangle corner.
    fn hole_polygon(&self) -> Option<Vec<Point2<f64>>> {
        match *self {
            Domain::Rectangle { .. } => None,
            Domain::QuarterPlate {
                width,
                height,
                radius,
            } => {
                let far = -(width + height);
                let mut pts: Vec<_> = (0..=ARC_SEGMENTS)
                    .map(|k| {
                        let t = FRAC_PI_2 * k as f64 / ARC_SEGMENTS as f64;
                        Point2::new(radius * t.cos(), radius * t.sin())
                    })
                    .collect();
                pts[ARC_SEGMENTS] = Point2::new(0.0, radius);
                pts.extend([
                    Point2::new(far, radius),
                    Point2::new(far, far),
                    Point2::new(radius, far),
                ]);
                Some(pts)
            }
        }
    }

    /// Area of the polygonal domain.
    pub fn area(&self) -> f64 {
        signed_area(&self.boundary())
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        point_in_loop(&self.boundary(), p)
    }

    /// Adds `left`, `right`, `bottom`, `top` (and `arc` for the plate) node
    /// sets: nodes within `1e-9 × max(width, height)` of each side.
    fn assign_node_sets(&self, mesh: &mut Mesh) {
        let (w, h) = self.extent();
        let tol = 1e-9 * w.max(h);
        let sets: [(&str, Box<dyn Fn(&Point2<f64>) -> bool>); 4] = [
            ("left", Box::new(move |p| p.x.abs() <= tol)),
            ("right", Box::new(move |p| (p.x - w).abs() <= tol)),
            ("bottom", Box::new(move |p| p.y.abs() <= tol)),
            ("top", Box::new(move |p| (p.y - h).abs() <= tol)),
        ];
        for (name, pred) in sets {
            let ids = mesh.nodes_where(pred);
            mesh.node_sets.insert(name.to_string(), ids);
        }
        if let Domain::QuarterPlate { .. } = self {
            let b = self.boundary();
            let arc: Vec<_> = std::iter::once(b[4])
                .chain(b[5..].iter().copied())
                .chain(std::iter::once(b[0]))
                .collect();
            let ids = mesh.nodes_where(|p| {
                arc.windows(2)
                    .any(|s| segments_touch(s[0], s[1], *p, *p, tol))
            });
            mesh.node_sets.insert("arc".to_string(), ids);
        }
    }
}

/// Voronoi mesh of `n_seeds` uniformly sampled seeds after `lloyd_iters`
/// centroidal smoothing passes. Deterministic for a fixed `rng_seed`.
pub fn generate_voronoi(
    domain: &Domain,
    n_seeds: usize,
    lloyd_iters: usize,
    rng_seed: u64,
) -> Result<Mesh, MeshError> {
    domain.check()?;
    if n_seeds == 0 {
        return Err(MeshError::Parameter("need at least one seed".into()));
    }
    let (w, h) = domain.extent();
    let boundary = domain.boundary();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut seeds = Vec::with_capacity(n_seeds);
    while seeds.len() < n_seeds {
        let p = Point2::new(rng.gen::<f64>() * w, rng.gen::<f64>() * h);
        if point_in_loop(&boundary, &p) {
            seeds.push(p);
        }
    }
    voronoi_mesh(domain, &seeds, lloyd_iters)
}

/// Voronoi mesh of explicit seeds, optionally Lloyd-smoothed.
pub fn voronoi_mesh(
    domain: &Domain,
    seeds: &[Point2<f64>],
    lloyd_iters: usize,
) -> Result<Mesh, MeshError> {
    domain.check()?;
    if seeds.is_empty() {
        return Err(MeshError::Parameter("need at least one seed".into()));
    }
    let boundary = domain.boundary();
    if let Some(i) = seeds.iter().position(|s| !point_in_loop(&boundary, s)) {
        return Err(MeshError::Parameter(format!("seed {} lies outside the domain", i + 1)));
    }
    let tol = WELD_TOLERANCE * domain.diameter();
    let mut seeds = seeds.to_vec();
    for _ in 0..lloyd_iters {
        let cells = clipped_cells(domain, &seeds, tol)?;
        for (seed, cell) in seeds.iter_mut().zip(&cells) {
            if let Ok(poly) = Polygon::new(cell.clone()) {
                let c = poly.centroid();
                // a concave cell by the hole can have its centroid outside
                if point_in_loop(&boundary, &c) {
                    *seed = c;
                }
            }
        }
    }
    let cells = clipped_cells(domain, &seeds, tol)?;
    let mut mesh = weld(&cells, tol);
    domain.assign_node_sets(&mut mesh);
    let report = mesh.validate();
    if !report.is_valid() {
        return Err(MeshError::Invalid(report.to_string()));
    }
    Ok(mesh)
}

struct SeedGrid {
    origin: Point2<f64>,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl SeedGrid {
    fn new(seeds: &[Point2<f64>], lo: Point2<f64>, hi: Point2<f64>) -> Self {
        let ext = hi - lo;
        let cell = (ext.x * ext.y / seeds.len() as f64).sqrt().max(f64::MIN_POSITIVE);
        let nx = ((ext.x / cell).ceil() as usize).max(1);
        let ny = ((ext.y / cell).ceil() as usize).max(1);
        let mut grid = Self {
            origin: lo,
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        };
        for (i, s) in seeds.iter().enumerate() {
            let (ci, cj) = grid.cell_of(s);
            grid.buckets[cj * nx + ci].push(i);
        }
        grid
    }

    fn cell_of(&self, p: &Point2<f64>) -> (usize, usize) {
        let ci = ((p.x - self.origin.x) / self.cell).floor().max(0.0) as usize;
        let cj = ((p.y - self.origin.y) / self.cell).floor().max(0.0) as usize;
        (ci.min(self.nx - 1), cj.min(self.ny - 1))
    }

    /// Seeds in the buckets at Chebyshev distance exactly `ring`.
    fn ring(&self, (ci, cj): (usize, usize), ring: usize) -> impl Iterator<Item = usize> + '_ {
        let r = ring as isize;
        let (ci, cj) = (ci as isize, cj as isize);
        (-r..=r)
            .flat_map(move |dj| (-r..=r).map(move |di| (di, dj)))
            .filter(move |&(di, dj)| di.abs().max(dj.abs()) == r)
            .filter_map(move |(di, dj)| {
                let (i, j) = (ci + di, cj + dj);
                (i >= 0 && j >= 0 && (i as usize) < self.nx && (j as usize) < self.ny)
                    .then(|| j as usize * self.nx + i as usize)
            })
            .flat_map(move |b| self.buckets[b].iter().copied())
    }
}

/// Keeps the part of `poly` where `(x - m) · d <= 0`.
fn clip_half_plane(poly: Vec<Point2<f64>>, m: Point2<f64>, d: Vector2<f64>) -> Vec<Point2<f64>> {
    let side: Vec<f64> = poly.iter().map(|p| (p - m).dot(&d)).collect();
    if side.iter().all(|&s| s <= 0.0) {
        return poly;
    }
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 2);
    for k in 0..n {
        let (p, q) = (poly[k], poly[(k + 1) % n]);
        let (fp, fq) = (side[k], side[(k + 1) % n]);
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let t = fp / (fp - fq);
            out.push(p + (q - p) * t);
        }
    }
    out
}

fn dedup_loop(poly: &mut Vec<Point2<f64>>, tol: f64) {
    poly.dedup_by(|a, b| (*a - *b).norm() <= tol);
    while poly.len() > 1 && (poly[0] - poly[poly.len() - 1]).norm() <= tol {
        poly.pop();
    }
}

fn clipped_cells(
    domain: &Domain,
    seeds: &[Point2<f64>],
    tol: f64,
) -> Result<Vec<Vec<Point2<f64>>>, MeshError> {
    let (w, h) = domain.extent();
    let bbox = Domain::Rectangle { width: w, height: h }.boundary();
    let hole = domain.hole_polygon();
    let grid = SeedGrid::new(seeds, bbox[0], bbox[2]);
    let max_ring = grid.nx.max(grid.ny);
    let mut cells = Vec::with_capacity(seeds.len());
    for (i, s) in seeds.iter().enumerate() {
        let home = grid.cell_of(s);
        let mut poly = bbox.clone();
        for ring in 0..=max_ring {
            for j in grid.ring(home, ring) {
                if j == i {
                    continue;
                }
                let d = seeds[j] - s;
                if d.norm() <= tol {
                    return Err(MeshError::SeedCollapse(i.min(j) + 1, i.max(j) + 1));
                }
                poly = clip_half_plane(poly, Point2::from((s.coords + seeds[j].coords) * 0.5), d);
                if poly.len() < 3 {
                    return Err(MeshError::DegenerateCell(i + 1));
                }
            }
            let reach = poly.iter().map(|v| (v - s).norm()).fold(0.0, f64::max);
            if ring as f64 * grid.cell >= 2.0 * reach {
                break;
            }
        }
        if let Some(hole) = &hole {
            poly = subtract_convex(&poly, hole, tol).ok_or(MeshError::DegenerateCell(i + 1))?;
        }
        dedup_loop(&mut poly, tol);
        let ok = match Polygon::new(poly.clone()) {
            Ok(p) => hole.is_none() || p.check_simple().is_ok(),
            Err(_) => false,
        };
        if !ok {
            return Err(MeshError::DegenerateCell(i + 1));
        }
        cells.push(poly);
    }
    Ok(cells)
}

/// `c \ h` for convex CCW polygons, or `None` when the difference is not a
/// single simply connected piece.
fn subtract_convex(c: &[Point2<f64>], h: &[Point2<f64>], tol: f64) -> Option<Vec<Point2<f64>>> {
    #[derive(Clone, Copy)]
    struct Crossing {
        pos: f64,
        point: Point2<f64>,
        hole_edge: usize,
        entering: bool,
    }
    let n = c.len();
    let m = h.len();
    let normals: Vec<Vector2<f64>> = (0..m)
        .map(|j| {
            let d = h[(j + 1) % m] - h[j];
            Vector2::new(d.y, -d.x).normalize()
        })
        .collect();
    let mut crossings = Vec::new();
    let mut any_inside = false;
    for k in 0..n {
        let (p, q) = (c[k], c[(k + 1) % n]);
        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
        let (mut enter, mut exit) = (None, None);
        let mut empty = false;
        for j in 0..m {
            let fp = (p - h[j]).dot(&normals[j]);
            let fq = (q - h[j]).dot(&normals[j]);
            if fp == fq {
                if fp >= -tol {
                    empty = true;
                    break;
                }
                continue;
            }
            let t = fp / (fp - fq);
            if fq < fp {
                if t > t0 {
                    t0 = t;
                    enter = Some(j);
                }
            } else if t < t1 {
                t1 = t;
                exit = Some(j);
            }
        }
        if empty || (t1 - t0) * (q - p).norm() <= tol {
            continue;
        }
        any_inside = true;
        let at = |t: f64| p + (q - p) * t;
        if let Some(j) = enter {
            crossings.push(Crossing {
                pos: k as f64 + t0,
                point: at(t0),
                hole_edge: j,
                entering: true,
            });
        }
        if let Some(j) = exit {
            crossings.push(Crossing {
                pos: k as f64 + t1,
                point: at(t1),
                hole_edge: j,
                entering: false,
            });
        }
    }
    if crossings.is_empty() {
        // the seed keeps c from lying inside h
        return (!any_inside).then(|| c.to_vec());
    }
    if crossings.len() != 2 {
        return None;
    }
    let (b, a) = match (crossings[0].entering, crossings[1].entering) {
        (false, true) => (crossings[0], crossings[1]),
        (true, false) => (crossings[1], crossings[0]),
        _ => return None,
    };
    let nf = n as f64;
    let span = (a.pos - b.pos).rem_euclid(nf);
    let mut out = vec![b.point];
    for v in 1..=n {
        let idx = (b.pos.floor() as usize + v) % n;
        let d = (idx as f64 - b.pos).rem_euclid(nf);
        if d > 0.0 && d < span {
            out.push(c[idx]);
        }
    }
    out.push(a.point);
    // back along the hole boundary, clockwise
    let mut j = a.hole_edge;
    while j != b.hole_edge {
        out.push(h[j]);
        j = (j + m - 1) % m;
    }
    Some(out)
}

/// Merges cell vertices closer than `tol` into shared nodes.
fn weld(cells: &[Vec<Point2<f64>>], tol: f64) -> Mesh {
    let mut nodes: Vec<Point2<f64>> = Vec::new();
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let key = |p: &Point2<f64>| ((p.x / tol).floor() as i64, (p.y / tol).floor() as i64);
    let mut elements = Vec::with_capacity(cells.len());
    for cell in cells {
        let mut ids: Vec<usize> = Vec::with_capacity(cell.len());
        for p in cell {
            let (kx, ky) = key(p);
            let found = (-1..=1)
                .flat_map(|dx| (-1..=1).map(move |dy| (kx + dx, ky + dy)))
                .filter_map(|k| buckets.get(&k))
                .flatten()
                .copied()
                .find(|&n| (nodes[n] - p).norm() <= tol);
            let id = found.unwrap_or_else(|| {
                nodes.push(*p);
                buckets.entry((kx, ky)).or_default().push(nodes.len() - 1);
                nodes.len() - 1
            });
            ids.push(id);
        }
        ids.dedup();
        while ids.len() > 1 && ids[0] == ids[ids.len() - 1] {
            ids.pop();
        }
        elements.push(ids);
    }
    Mesh::new(nodes, elements)
}
