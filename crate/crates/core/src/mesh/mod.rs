//! Polygonal mesh data model, validation and generators.
//!
//! Node and element indices are 0-based in memory. Files and user-facing
//! messages use 1-based ids.

mod structured;
mod voronoi;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use nalgebra::Point2;
use thiserror::Error;

use crate::geometry::{segments_touch, GeometryError, Polygon};

pub use structured::generate_structured;
pub use voronoi::{generate_voronoi, voronoi_mesh, Domain, ARC_SEGMENTS};

/// Relative tolerance (against the domain diameter) for duplicate nodes.
pub const DUPLICATE_NODE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("invalid generator parameter: {0}")]
    Parameter(String),
    #[error("seeds {0} and {1} collapse onto the same point; try a different rng seed")]
    SeedCollapse(usize, usize),
    #[error("Voronoi cell of seed {0} is degenerate or disconnected; try a different rng seed")]
    DegenerateCell(usize),
    #[error("generated mesh failed validation ({0}); try a different rng seed")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point2<f64>>,
    /// CCW node loops, one per element.
    pub elements: Vec<Vec<usize>>,
    /// Named node groups used to target constraints and loads.
    pub node_sets: BTreeMap<String, Vec<usize>>,
}

impl Mesh {
    pub fn new(nodes: Vec<Point2<f64>>, elements: Vec<Vec<usize>>) -> Self {
        Self {
            nodes,
            elements,
            node_sets: BTreeMap::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn element_polygon(&self, element: usize) -> Result<Polygon, GeometryError> {
        Polygon::new(self.elements[element].iter().map(|&n| self.nodes[n]).collect())
    }

    /// Global dof indices `2 n, 2 n + 1` of the element's nodes, in order.
    pub fn element_dofs(&self, element: usize) -> Vec<usize> {
        self.elements[element]
            .iter()
            .flat_map(|&n| [2 * n, 2 * n + 1])
            .collect()
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounding_box(&self) -> Option<(Point2<f64>, Point2<f64>)> {
        let first = *self.nodes.first()?;
        Some(self.nodes.iter().fold((first, first), |(lo, hi), p| {
            (
                Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        }))
    }

    pub fn diameter(&self) -> f64 {
        self.bounding_box()
            .map(|(lo, hi)| (hi - lo).norm())
            .unwrap_or(0.0)
    }

    /// Sum of element areas (signed, so inverted elements reduce it).
    pub fn total_area(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| {
                let pts: Vec<_> = e.iter().map(|&n| self.nodes[n]).collect();
                crate::geometry::signed_area(&pts)
            })
            .sum()
    }

    pub fn nearest_node(&self, p: &Point2<f64>) -> Option<usize> {
        self.nodes
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - p).norm().total_cmp(&(b.1 - p).norm()))
            .map(|(i, _)| i)
    }

    /// Indices of the nodes satisfying `pred`, in increasing order.
    pub fn nodes_where(&self, pred: impl Fn(&Point2<f64>) -> bool) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, p)| pred(p))
            .map(|(i, _)| i)
            .collect()
    }

    /// Checks every structural invariant; violations are collected rather
    /// than returned as errors.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.elements.is_empty() {
            violations.push(Violation::EmptyMesh);
        }

        let mut edges: HashMap<(usize, usize), Vec<(usize, bool)>> = HashMap::new();
        for (e, loop_) in self.elements.iter().enumerate() {
            if loop_.len() < 3 {
                violations.push(Violation::TooFewNodes { element: e });
                continue;
            }
            if let Some(&node) = loop_.iter().find(|&&n| n >= self.nodes.len()) {
                violations.push(Violation::NodeOutOfRange { element: e, node });
                continue;
            }
            let mut seen = loop_.clone();
            seen.sort_unstable();
            if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
                violations.push(Violation::RepeatedNode {
                    element: e,
                    node: w[0],
                });
                continue;
            }
            match self.element_polygon(e).and_then(|p| p.check_simple()) {
                Ok(()) => {}
                Err(error) => violations.push(Violation::InvalidPolygon { element: e, error }),
            }
            for k in 0..loop_.len() {
                let (a, b) = (loop_[k], loop_[(k + 1) % loop_.len()]);
                edges
                    .entry((a.min(b), a.max(b)))
                    .or_default()
                    .push((e, a < b));
            }
        }

        let mut interior_edges = 0;
        let mut boundary = Vec::new();
        let mut sorted_edges: Vec<_> = edges.into_iter().collect();
        sorted_edges.sort_unstable_by_key(|(k, _)| *k);
        for ((a, b), users) in sorted_edges {
            match users.len() {
                1 => boundary.push((a, b)),
                2 if users[0].1 != users[1].1 => interior_edges += 1,
                2 => violations.push(Violation::OverlappingEdge { a, b }),
                count => violations.push(Violation::NonConformingEdge { a, b, count }),
            }
        }

        // A hanging node sits on another element's boundary edge without
        // being one of its endpoints.
        let diam = self.diameter();
        let tol = 1e-9 * diam;
        let mut boundary_nodes: Vec<usize> = boundary.iter().flat_map(|&(a, b)| [a, b]).collect();
        boundary_nodes.sort_unstable();
        boundary_nodes.dedup();
        for &(a, b) in &boundary {
            let (pa, pb) = (self.nodes[a], self.nodes[b]);
            let (lo_x, hi_x) = (pa.x.min(pb.x) - tol, pa.x.max(pb.x) + tol);
            let (lo_y, hi_y) = (pa.y.min(pb.y) - tol, pa.y.max(pb.y) + tol);
            for &n in &boundary_nodes {
                let p = self.nodes[n];
                if n == a || n == b || p.x < lo_x || p.x > hi_x || p.y < lo_y || p.y > hi_y {
                    continue;
                }
                if segments_touch(pa, pb, p, p, tol) {
                    violations.push(Violation::HangingNode { node: n, a, b });
                }
            }
        }

        let dup_tol = DUPLICATE_NODE_TOLERANCE * diam;
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_unstable_by(|&i, &j| self.nodes[i].x.total_cmp(&self.nodes[j].x));
        for (k, &i) in order.iter().enumerate() {
            for &j in &order[k + 1..] {
                if self.nodes[j].x - self.nodes[i].x > dup_tol {
                    break;
                }
                if (self.nodes[j] - self.nodes[i]).norm() <= dup_tol {
                    violations.push(Violation::DuplicateNodes {
                        a: i.min(j),
                        b: i.max(j),
                    });
                }
            }
        }

        ValidationReport {
            violations,
            interior_edges,
            boundary_edges: boundary.len(),
        }
    }
}

/// One broken mesh invariant. Ids are 0-based; `Display` prints 1-based ids.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyMesh,
    TooFewNodes { element: usize },
    NodeOutOfRange { element: usize, node: usize },
    RepeatedNode { element: usize, node: usize },
    InvalidPolygon { element: usize, error: GeometryError },
    NonConformingEdge { a: usize, b: usize, count: usize },
    OverlappingEdge { a: usize, b: usize },
    HangingNode { node: usize, a: usize, b: usize },
    DuplicateNodes { a: usize, b: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyMesh => write!(f, "mesh has no elements"),
            Violation::TooFewNodes { element } => {
                write!(f, "element {} has fewer than 3 nodes", element + 1)
            }
            Violation::NodeOutOfRange { element, node } => {
                write!(f, "element {} references missing node {}", element + 1, node + 1)
            }
            Violation::RepeatedNode { element, node } => {
                write!(f, "element {} repeats node {}", element + 1, node + 1)
            }
            Violation::InvalidPolygon { element, error } => {
                write!(f, "element {}: {error}", element + 1)
            }
            Violation::NonConformingEdge { a, b, count } => {
                write!(f, "edge {}-{} is shared by {count} elements", a + 1, b + 1)
            }
            Violation::OverlappingEdge { a, b } => write!(
                f,
                "edge {}-{} is traversed in the same direction by two elements",
                a + 1,
                b + 1
            ),
            Violation::HangingNode { node, a, b } => {
                write!(f, "node {} hangs on edge {}-{}", node + 1, a + 1, b + 1)
            }
            Violation::DuplicateNodes { a, b } => {
                write!(f, "nodes {} and {} coincide", a + 1, b + 1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub interior_edges: usize,
    pub boundary_edges: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(
                f,
                "valid ({} interior edges, {} boundary edges)",
                self.interior_edges, self.boundary_edges
            );
        }
        let msgs: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        write!(f, "{} violation(s): {}", msgs.len(), msgs.join("; "))
    }
}
