//! Line-oriented problem file: material, mesh, node sets, constraints and
//! point loads.
//!
//! ```text
//! # vem2d problem v1
//! material E=1000 nu=0.3 mode=plane_stress thickness=1
//! nodes 3
//! 1 0 0
//! 2 1 0
//! 3 0 1
//! elements 1
//! 1 1 2 3
//! nodeset base 1 2
//! dirichlet base ux=0 uy=0
//! load 3 fx=1 fy=0
//! ```
//!
//! Node and element ids are 1-based and sequential. Everything after `#` is a
//! comment. Unknown keywords and keys are rejected.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use nalgebra::Point2;
use thiserror::Error;

use crate::assembly::LoadCase;
use crate::element::Formulation;
use crate::material::{Material, PlaneMode};
use crate::mesh::Mesh;
use crate::{Error, Result};

pub const HEADER: &str = "# vem2d problem v1";

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

/// A node (0-based) or a named node set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Node(usize),
    Set(String),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Node(n) => write!(f, "{}", n + 1),
            Target::Set(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dirichlet {
    pub target: Target,
    pub ux: Option<f64>,
    pub uy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub target: Target,
    pub fx: f64,
    pub fy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub material: Material,
    pub thickness: f64,
    pub mesh: Mesh,
    /// Applied in order; later lines override earlier ones per dof.
    pub dirichlet: Vec<Dirichlet>,
    /// Accumulated.
    pub loads: Vec<Load>,
}

impl Problem {
    pub fn new(material: Material, mesh: Mesh) -> Self {
        Self {
            material,
            thickness: 1.0,
            mesh,
            dirichlet: Vec::new(),
            loads: Vec::new(),
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(text.parse()?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }

    pub fn formulation(&self) -> Formulation {
        Formulation::new(self.material).with_thickness(self.thickness)
    }

    /// End-loaded cantilever: the `left` set is pinned and `-load` acts in y
    /// at the node nearest to the middle of the right end.
    pub fn cantilever(mesh: Mesh, material: Material, load: f64) -> Result<Self> {
        let (lo, hi) = mesh
            .bounding_box()
            .ok_or_else(|| Error::Invalid("empty mesh".into()))?;
        let tip = mesh
            .nearest_node(&Point2::new(hi.x, 0.5 * (lo.y + hi.y)))
            .expect("non-empty mesh");
        require_set(&mesh, "left")?;
        let mut p = Problem::new(material, mesh);
        p.dirichlet.push(Dirichlet {
            target: Target::Set("left".into()),
            ux: Some(0.0),
            uy: Some(0.0),
        });
        p.loads.push(Load {
            target: Target::Node(tip),
            fx: 0.0,
            fy: -load,
        });
        Ok(p)
    }

    /// Symmetry quadrant in x tension: `left` is held in x, `bottom` in y and
    /// a uniform traction acts on `right`.
    pub fn plate_in_tension(mesh: Mesh, material: Material, traction: f64) -> Result<Self> {
        require_set(&mesh, "left")?;
        require_set(&mesh, "bottom")?;
        let loads = edge_loads(&mesh, "right", [traction, 0.0])?;
        let mut p = Problem::new(material, mesh);
        p.dirichlet.push(Dirichlet {
            target: Target::Set("left".into()),
            ux: Some(0.0),
            uy: None,
        });
        p.dirichlet.push(Dirichlet {
            target: Target::Set("bottom".into()),
            ux: None,
            uy: Some(0.0),
        });
        p.loads = loads;
        Ok(p)
    }

    fn resolve(&self, target: &Target) -> Result<Vec<usize>> {
        match target {
            Target::Node(n) if *n < self.mesh.num_nodes() => Ok(vec![*n]),
            Target::Node(n) => Err(Error::Invalid(format!("node {} does not exist", n + 1))),
            Target::Set(name) => self
                .mesh
                .node_sets
                .get(name)
                .cloned()
                .ok_or_else(|| Error::Invalid(format!("unknown node set '{name}'"))),
        }
    }

    /// Resolves set targets into per-node constraints and loads.
    pub fn load_case(&self) -> Result<LoadCase> {
        let mut lc = LoadCase::default();
        for d in &self.dirichlet {
            for n in self.resolve(&d.target)? {
                if let Some(v) = d.ux {
                    lc.constrain(n, 0, v);
                }
                if let Some(v) = d.uy {
                    lc.constrain(n, 1, v);
                }
            }
        }
        for l in &self.loads {
            for n in self.resolve(&l.target)? {
                lc.add_load(n, l.fx, l.fy);
            }
        }
        lc.check(self.mesh.num_nodes())?;
        Ok(lc)
    }
}

fn require_set(mesh: &Mesh, name: &str) -> Result<()> {
    match mesh.node_sets.get(name) {
        Some(ids) if !ids.is_empty() => Ok(()),
        _ => Err(Error::Invalid(format!("mesh has no '{name}' node set"))),
    }
}

/// Consistent nodal loads of a uniform traction (force per unit length)
/// along the straight edge through the nodes of `set`.
pub fn edge_loads(mesh: &Mesh, set: &str, traction: [f64; 2]) -> Result<Vec<Load>> {
    require_set(mesh, set)?;
    let mut ids = mesh.node_sets[set].clone();
    let pts: Vec<_> = ids.iter().map(|&n| mesh.nodes[n]).collect();
    let spread = |f: fn(&Point2<f64>) -> f64| {
        let v = pts.iter().map(f);
        v.clone().fold(f64::NEG_INFINITY, f64::max) - v.fold(f64::INFINITY, f64::min)
    };
    let along_y = spread(|p| p.y) >= spread(|p| p.x);
    let key = move |p: &Point2<f64>| if along_y { p.y } else { p.x };
    ids.sort_by(|&a, &b| key(&mesh.nodes[a]).total_cmp(&key(&mesh.nodes[b])));
    let mut share = vec![0.0; ids.len()];
    for k in 1..ids.len() {
        let len = (mesh.nodes[ids[k]] - mesh.nodes[ids[k - 1]]).norm();
        share[k - 1] += 0.5 * len;
        share[k] += 0.5 * len;
    }
    Ok(ids
        .iter()
        .zip(share)
        .map(|(&n, w)| Load {
            target: Target::Node(n),
            fx: traction[0] * w,
            fy: traction[1] * w,
        })
        .collect())
}

/// 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let m = &self.material;
        writeln!(s, "{HEADER}")?;
        writeln!(
            s,
            "material E={} nu={} mode={} thickness={}",
            format_float(m.youngs_modulus()),
            format_float(m.poisson_ratio()),
            m.plane_mode(),
            format_float(self.thickness)
        )?;
        writeln!(s, "nodes {}", self.mesh.num_nodes())?;
        for (i, p) in self.mesh.nodes.iter().enumerate() {
            writeln!(s, "{} {} {}", i + 1, format_float(p.x), format_float(p.y))?;
        }
        writeln!(s, "elements {}", self.mesh.num_elements())?;
        for (e, ids) in self.mesh.elements.iter().enumerate() {
            write!(s, "{}", e + 1)?;
            for n in ids {
                write!(s, " {}", n + 1)?;
            }
            s.push('\n');
        }
        for (name, ids) in &self.mesh.node_sets {
            write!(s, "nodeset {name}")?;
            for n in ids {
                write!(s, " {}", n + 1)?;
            }
            s.push('\n');
        }
        for d in &self.dirichlet {
            write!(s, "dirichlet {}", d.target)?;
            if let Some(v) = d.ux {
                write!(s, " ux={}", format_float(v))?;
            }
            if let Some(v) = d.uy {
                write!(s, " uy={}", format_float(v))?;
            }
            s.push('\n');
        }
        for l in &self.loads {
            writeln!(
                s,
                "load {} fx={} fy={}",
                l.target,
                format_float(l.fx),
                format_float(l.fy)
            )?;
        }
        f.write_str(&s)
    }
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

fn number<T: FromStr>(line: usize, tok: &str, what: &str) -> Result<T, ParseError> {
    tok.parse()
        .map_err(|_| err(line, format!("invalid {what} '{tok}'")))
}

fn float(line: usize, tok: &str, what: &str) -> Result<f64, ParseError> {
    let v: f64 = number(line, tok, what)?;
    if !v.is_finite() {
        return Err(err(line, format!("{what} must be finite, got '{tok}'")));
    }
    Ok(v)
}

/// `key=value` pairs restricted to `allowed`; duplicates are errors.
fn key_values<'a>(
    line: usize,
    toks: &[&'a str],
    allowed: &[&str],
) -> Result<BTreeMap<&'a str, &'a str>, ParseError> {
    let mut out = BTreeMap::new();
    for t in toks {
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected key=value, got '{t}'")))?;
        if !allowed.contains(&k) {
            return Err(err(line, format!("unknown key '{k}'")));
        }
        if out.insert(k, v).is_some() {
            return Err(err(line, format!("duplicate key '{k}'")));
        }
    }
    Ok(out)
}

fn id(line: usize, tok: &str, count: usize, what: &str) -> Result<usize, ParseError> {
    let v: usize = number(line, tok, what)?;
    if v == 0 || v > count {
        return Err(err(line, format!("{what} {v} out of range 1..={count}")));
    }
    Ok(v - 1)
}

fn is_set_name(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-')
}

impl FromStr for Problem {
    type Err = ParseError;

    fn from_str(text: &str) -> Result<Self, ParseError> {
        let first = text.lines().next().unwrap_or("").trim();
        if first != HEADER {
            return Err(err(1, format!("expected header '{HEADER}'")));
        }
        let mut lines = text
            .lines()
            .enumerate()
            .skip(1)
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").split_whitespace().collect::<Vec<_>>()))
            .filter(|(_, t)| !t.is_empty());
        let mut material: Option<(Material, f64)> = None;
        let mut nodes: Option<Vec<Point2<f64>>> = None;
        let mut elements: Option<Vec<Vec<usize>>> = None;
        let mut node_sets = BTreeMap::new();
        let mut raw_targets: Vec<(usize, bool, String, Option<f64>, Option<f64>)> = Vec::new();

        while let Some((ln, toks)) = lines.next() {
            match toks[0] {
                "material" => {
                    if material.is_some() {
                        return Err(err(ln, "duplicate material line"));
                    }
                    let kv = key_values(ln, &toks[1..], &["E", "nu", "mode", "thickness"])?;
                    let e = float(ln, kv.get("E").ok_or_else(|| err(ln, "missing E"))?, "E")?;
                    let nu = float(ln, kv.get("nu").ok_or_else(|| err(ln, "missing nu"))?, "nu")?;
                    let mode = match kv.get("mode") {
                        Some(m) => m.parse::<PlaneMode>().map_err(|e| err(ln, e.to_string()))?,
                        None => PlaneMode::PlaneStress,
                    };
                    let t = match kv.get("thickness") {
                        Some(t) => float(ln, t, "thickness")?,
                        None => 1.0,
                    };
                    if t <= 0.0 {
                        return Err(err(ln, format!("thickness must be positive, got {t}")));
                    }
                    let m = Material::new(e, nu, mode).map_err(|e| err(ln, e.to_string()))?;
                    material = Some((m, t));
                }
                "nodes" => {
                    if nodes.is_some() {
                        return Err(err(ln, "duplicate nodes section"));
                    }
                    if toks.len() != 2 {
                        return Err(err(ln, "expected 'nodes N'"));
                    }
                    let n: usize = number(ln, toks[1], "node count")?;
                    let mut pts = Vec::with_capacity(n);
                    for k in 0..n {
                        let (l, t) = lines
                            .next()
                            .ok_or_else(|| err(ln, format!("expected {n} nodes, found {k}")))?;
                        if t.len() != 3 {
                            return Err(err(l, "expected 'id x y'"));
                        }
                        let i: usize = number(l, t[0], "node id")?;
                        if i != k + 1 {
                            return Err(err(l, format!("node ids must be sequential, expected {}", k + 1)));
                        }
                        pts.push(Point2::new(float(l, t[1], "x")?, float(l, t[2], "y")?));
                    }
                    nodes = Some(pts);
                }
                "elements" => {
                    if elements.is_some() {
                        return Err(err(ln, "duplicate elements section"));
                    }
                    let n_nodes = nodes
                        .as_ref()
                        .ok_or_else(|| err(ln, "elements must follow nodes"))?
                        .len();
                    if toks.len() != 2 {
                        return Err(err(ln, "expected 'elements M'"));
                    }
                    let m: usize = number(ln, toks[1], "element count")?;
                    let mut els = Vec::with_capacity(m);
                    for k in 0..m {
                        let (l, t) = lines
                            .next()
                            .ok_or_else(|| err(ln, format!("expected {m} elements, found {k}")))?;
                        let i: usize = number(l, t[0], "element id")?;
                        if i != k + 1 {
                            return Err(err(l, format!("element ids must be sequential, expected {}", k + 1)));
                        }
                        if t.len() < 4 {
                            return Err(err(l, "an element needs at least 3 nodes"));
                        }
                        let ids = t[1..]
                            .iter()
                            .map(|s| id(l, s, n_nodes, "node"))
                            .collect::<Result<Vec<_>, _>>()?;
                        els.push(ids);
                    }
                    elements = Some(els);
                }
                "nodeset" => {
                    let n_nodes = nodes
                        .as_ref()
                        .ok_or_else(|| err(ln, "nodeset must follow nodes"))?
                        .len();
                    let name = *toks.get(1).ok_or_else(|| err(ln, "missing set name"))?;
                    if !is_set_name(name) {
                        return Err(err(ln, format!("invalid set name '{name}'")));
                    }
                    let ids = toks[2..]
                        .iter()
                        .map(|s| id(ln, s, n_nodes, "node"))
                        .collect::<Result<Vec<_>, _>>()?;
                    if node_sets.insert(name.to_string(), ids).is_some() {
                        return Err(err(ln, format!("duplicate node set '{name}'")));
                    }
                }
                kw @ ("dirichlet" | "load") => {
                    let target = *toks.get(1).ok_or_else(|| err(ln, "missing target"))?;
                    let is_dir = kw == "dirichlet";
                    let keys: &[&str] = if is_dir { &["ux", "uy"] } else { &["fx", "fy"] };
                    let kv = key_values(ln, &toks[2..], keys)?;
                    if kv.is_empty() {
                        return Err(err(ln, format!("{kw} needs at least one of {}", keys.join(", "))));
                    }
                    let a = kv.get(keys[0]).map(|v| float(ln, v, keys[0])).transpose()?;
                    let b = kv.get(keys[1]).map(|v| float(ln, v, keys[1])).transpose()?;
                    raw_targets.push((ln, is_dir, target.to_string(), a, b));
                }
                other => return Err(err(ln, format!("unknown keyword '{other}'"))),
            }
        }

        let (material, thickness) = material.ok_or_else(|| err(0, "missing material line"))?;
        let nodes = nodes.ok_or_else(|| err(0, "missing nodes section"))?;
        let elements = elements.ok_or_else(|| err(0, "missing elements section"))?;
        let n_nodes = nodes.len();
        let mut mesh = Mesh::new(nodes, elements);
        mesh.node_sets = node_sets;
        let mut problem = Problem {
            material,
            thickness,
            mesh,
            dirichlet: Vec::new(),
            loads: Vec::new(),
        };
        for (ln, is_dir, t, a, b) in raw_targets {
            let target = if is_set_name(&t) {
                if !problem.mesh.node_sets.contains_key(&t) {
                    return Err(err(ln, format!("unknown node set '{t}'")));
                }
                Target::Set(t)
            } else {
                Target::Node(id(ln, &t, n_nodes, "node")?)
            };
            if is_dir {
                problem.dirichlet.push(Dirichlet { target, ux: a, uy: b });
            } else {
                problem.loads.push(Load {
                    target,
                    fx: a.unwrap_or(0.0),
                    fy: b.unwrap_or(0.0),
                });
            }
        }
        Ok(problem)
    }
}
