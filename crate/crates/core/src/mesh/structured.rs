use nalgebra::Point2;

use super::{Mesh, MeshError};

/// `nx × ny` axis-aligned quadrilaterals covering `[0, width] × [0, height]`.
///
/// Nodes are numbered row by row from the bottom-left corner. The node sets
/// `left`, `right`, `bottom` and `top` hold the nodes on each side.
pub fn generate_structured(width: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh, MeshError> {
    if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
        return Err(MeshError::Parameter(format!(
            "width and height must be positive, got {width} x {height}"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(MeshError::Parameter(format!(
            "need at least one element per direction, got {nx} x {ny}"
        )));
    }
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        // exact end coordinates so boundary sets are exact
        let y = if j == ny { height } else { height * j as f64 / ny as f64 };
        for i in 0..=nx {
            let x = if i == nx { width } else { width * i as f64 / nx as f64 };
            nodes.push(Point2::new(x, y));
        }
    }
    let row = nx + 1;
    let mut elements = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let n0 = j * row + i;
            elements.push(vec![n0, n0 + 1, n0 + row + 1, n0 + row]);
        }
    }
    let mut mesh = Mesh::new(nodes, elements);
    let sides = [
        ("bottom", (0..=nx).collect::<Vec<_>>()),
        ("top", (0..=nx).map(|i| ny * row + i).collect()),
        ("left", (0..=ny).map(|j| j * row).collect()),
        ("right", (0..=ny).map(|j| j * row + nx).collect()),
    ];
    for (name, ids) in sides {
        mesh.node_sets.insert(name.to_string(), ids);
    }
    Ok(mesh)
}
