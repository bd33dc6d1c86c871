//! Conforming triangulations of the rectangular fluid and solid channels.
//!
//! Meshes are plain values: deformation and averaging return new meshes and
//! leave connectivity and boundary tags untouched, so a field's coefficient
//! vector stays valid on every snapshot of the same topology.

use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Area ratio (deformed / reference) below which a deformation is rejected.
pub const MIN_AREA_RATIO: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("invalid mesh dimension: {0}")]
    InvalidDimension(String),
    #[error("tangled mesh: element {element} has area ratio {ratio:.3e}")]
    TangledMesh { element: usize, ratio: f64 },
    #[error("connectivity mismatch between meshes")]
    ConnectivityMismatch,
    #[error("edge {0} is not a boundary edge")]
    NotBoundary(usize),
    #[error("displacement has {got} nodal values, mesh has {expected} nodes")]
    DisplacementSize { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Fluid,
    Solid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryTag {
    Inlet,
    Outlet,
    Interface,
    SolidExternal,
    SolidClamped,
    FluidWall,
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoundaryTag::Inlet => "inlet",
            BoundaryTag::Outlet => "outlet",
            BoundaryTag::Interface => "interface",
            BoundaryTag::SolidExternal => "solid_external",
            BoundaryTag::SolidClamped => "solid_clamped",
            BoundaryTag::FluidWall => "fluid_wall",
        };
        f.write_str(s)
    }
}

/// A boundary edge together with the triangle that owns it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
    pub element: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    region: Region,
}

/// Pairs of (fluid node, solid node) sharing reference coordinates on the interface,
/// ordered by increasing x.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceMap {
    pairs: Vec<(usize, usize)>,
}

impl InterfaceMap {
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn fluid_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.pairs.iter().map(|p| p.0)
    }

    pub fn solid_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.pairs.iter().map(|p| p.1)
    }

    /// Largest coordinate mismatch over all pairs, relative to the coordinate scale.
    pub fn max_mismatch(&self, fluid: &Mesh, solid: &Mesh) -> f64 {
        self.pairs
            .iter()
            .map(|&(f, s)| {
                let a = fluid.nodes[f];
                let b = solid.nodes[s];
                let scale = 1.0_f64.max(a[0].abs()).max(a[1].abs());
                ((a[0] - b[0]).abs().max((a[1] - b[1]).abs())) / scale
            })
            .fold(0.0, f64::max)
    }
}

/// Structured triangulation of `[x0, x0+lx] x [y0, y0+ly]`, every cell split along
/// the same (lower-left to upper-right) diagonal.
fn structured_rectangle(
    origin: [f64; 2],
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
    region: Region,
    tags: [BoundaryTag; 4], // bottom, right, top, left
) -> Mesh {
    let node = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([
                origin[0] + lx * i as f64 / nx as f64,
                origin[1] + ly * j as f64 / ny as f64,
            ]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let n00 = node(i, j);
            let n10 = node(i + 1, j);
            let n01 = node(i, j + 1);
            let n11 = node(i + 1, j + 1);
            triangles.push([n00, n10, n11]);
            triangles.push([n00, n11, n01]);
        }
    }
    let cell = |i: usize, j: usize| 2 * (j * nx + i);
    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    // bottom: owned by the lower triangle of the cell
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge {
            nodes: [node(i, 0), node(i + 1, 0)],
            tag: tags[0],
            element: cell(i, 0),
        });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge {
            nodes: [node(nx, j), node(nx, j + 1)],
            tag: tags[1],
            element: cell(nx - 1, j),
        });
    }
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge {
            nodes: [node(i, ny), node(i + 1, ny)],
            tag: tags[2],
            element: cell(i, ny - 1) + 1,
        });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge {
            nodes: [node(0, j), node(0, j + 1)],
            tag: tags[3],
            element: cell(0, j) + 1,
        });
    }
    Mesh {
        nodes,
        triangles,
        boundary_edges,
        region,
    }
}

/// Fluid channel `(0, length) x (0, fluid_height)` below a solid layer
/// `(0, length) x (fluid_height, fluid_height + solid_height)`, conforming along the
/// interface `y = fluid_height`.
pub fn generate_channel_meshes(
    length: f64,
    fluid_height: f64,
    solid_height: f64,
    nx: usize,
    ny_fluid: usize,
    ny_solid: usize,
) -> Result<(Mesh, Mesh, InterfaceMap), MeshError> {
    for (name, v) in [
        ("length", length),
        ("fluid_height", fluid_height),
        ("solid_height", solid_height),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(MeshError::InvalidDimension(format!("{name} = {v}")));
        }
    }
    for (name, n) in [("nx", nx), ("ny_fluid", ny_fluid), ("ny_solid", ny_solid)] {
        if n == 0 {
            return Err(MeshError::InvalidDimension(format!("{name} = 0")));
        }
    }
    let fluid = structured_rectangle(
        [0.0, 0.0],
        length,
        fluid_height,
        nx,
        ny_fluid,
        Region::Fluid,
        [
            BoundaryTag::FluidWall,
            BoundaryTag::Outlet,
            BoundaryTag::Interface,
            BoundaryTag::Inlet,
        ],
    );
    let solid = structured_rectangle(
        [0.0, fluid_height],
        length,
        solid_height,
        nx,
        ny_solid,
        Region::Solid,
        [
            BoundaryTag::Interface,
            BoundaryTag::SolidClamped,
            BoundaryTag::SolidExternal,
            BoundaryTag::SolidClamped,
        ],
    );
    let pairs = (0..=nx)
        .map(|i| (ny_fluid * (nx + 1) + i, i))
        .collect::<Vec<_>>();
    let mut map = InterfaceMap::new(pairs);
    // snap solid interface coordinates onto the fluid ones so the pairing is exact
    let mut solid = solid;
    for &(f, s) in &map.pairs {
        solid.nodes[s] = fluid.nodes[f];
    }
    map.pairs.shrink_to_fit();
    Ok((fluid, solid, map))
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Build a mesh from raw parts. Triangles must be counter-clockwise.
    pub fn from_parts(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        region: Region,
    ) -> Self {
        Self {
            nodes,
            triangles,
            boundary_edges,
            region,
        }
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        signed_area(a, b, c)
    }

    pub fn areas(&self) -> Vec<f64> {
        (0..self.n_triangles()).map(|t| self.area(t)).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.areas().iter().sum()
    }

    /// Longest edge over all triangles.
    pub fn max_diameter(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| {
                let p = self.triangle_coords(t);
                (0..3)
                    .map(|k| {
                        let a = p[k];
                        let b = p[(k + 1) % 3];
                        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
                    })
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> + '_ {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    /// Sorted, deduplicated list of nodes lying on edges with `tag`.
    pub fn nodes_with_tag(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .edges_with_tag(tag)
            .flat_map(|e| e.nodes.into_iter())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn edge_length(&self, edge: &BoundaryEdge) -> f64 {
        let a = self.nodes[edge.nodes[0]];
        let b = self.nodes[edge.nodes[1]];
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    /// Outward unit normal of boundary edge number `edge`.
    pub fn boundary_normal(&self, edge: usize) -> Result<[f64; 2], MeshError> {
        let e = self
            .boundary_edges
            .get(edge)
            .ok_or(MeshError::NotBoundary(edge))?;
        Ok(self.outward_normal(e))
    }

    /// Outward unit normal of an edge belonging to this mesh's boundary.
    pub fn outward_normal(&self, e: &BoundaryEdge) -> [f64; 2] {
        let a = self.nodes[e.nodes[0]];
        let b = self.nodes[e.nodes[1]];
        let tri = self.triangles[e.element];
        let third = tri
            .iter()
            .copied()
            .find(|n| *n != e.nodes[0] && *n != e.nodes[1])
            .expect("owning triangle has a vertex off the edge");
        let c = self.nodes[third];
        let t = [b[0] - a[0], b[1] - a[1]];
        let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
        let mut n = [t[1] / len, -t[0] / len];
        let to_third = [c[0] - a[0], c[1] - a[1]];
        if n[0] * to_third[0] + n[1] * to_third[1] > 0.0 {
            n = [-n[0], -n[1]];
        }
        n
    }

    /// Check positive orientation of every triangle.
    pub fn check_orientation(&self) -> Result<(), MeshError> {
        for t in 0..self.n_triangles() {
            if self.area(t) <= 0.0 {
                return Err(MeshError::TangledMesh {
                    element: t,
                    ratio: 0.0,
                });
            }
        }
        Ok(())
    }

    /// Shift node coordinates by nodal displacement values.
    pub fn deform(&self, displacement: &[[f64; 2]]) -> Result<Mesh, MeshError> {
        if displacement.len() != self.nodes.len() {
            return Err(MeshError::DisplacementSize {
                expected: self.nodes.len(),
                got: displacement.len(),
            });
        }
        let nodes = self
            .nodes
            .iter()
            .zip(displacement)
            .map(|(x, d)| [x[0] + d[0], x[1] + d[1]])
            .collect();
        let out = Mesh {
            nodes,
            triangles: self.triangles.clone(),
            boundary_edges: self.boundary_edges.clone(),
            region: self.region,
        };
        for t in 0..self.n_triangles() {
            let ratio = out.area(t) / self.area(t);
            if !(ratio >= MIN_AREA_RATIO) {
                return Err(MeshError::TangledMesh { element: t, ratio });
            }
        }
        Ok(out)
    }

    /// Node-wise average of two snapshots of the same topology.
    pub fn midpoint(&self, other: &Mesh) -> Result<Mesh, MeshError> {
        if self.triangles != other.triangles || self.nodes.len() != other.nodes.len() {
            return Err(MeshError::ConnectivityMismatch);
        }
        let nodes = self
            .nodes
            .iter()
            .zip(&other.nodes)
            .map(|(a, b)| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])])
            .collect();
        Ok(Mesh {
            nodes,
            triangles: self.triangles.clone(),
            boundary_edges: self.boundary_edges.clone(),
            region: self.region,
        })
    }

    /// Apply an arbitrary map to every node (used for rotations in tests and for
    /// building analytically deformed meshes).
    pub fn map_nodes(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Mesh {
        Mesh {
            nodes: self.nodes.iter().map(|&x| f(x)).collect(),
            triangles: self.triangles.clone(),
            boundary_edges: self.boundary_edges.clone(),
            region: self.region,
        }
    }

    /// Minimum and maximum element area ratio against `reference`.
    pub fn area_ratio_range(&self, reference: &Mesh) -> (f64, f64) {
        (0..self.n_triangles())
            .map(|t| self.area(t) / reference.area(t))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r), hi.max(r))
            })
    }

    /// Plain-text node/element dump: header line, nodes, triangles, tagged edges.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "{} {} {}",
            self.nodes.len(),
            self.triangles.len(),
            self.boundary_edges.len()
        )?;
        for p in &self.nodes {
            writeln!(w, "{:.17e} {:.17e}", p[0], p[1])?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        for e in &self.boundary_edges {
            writeln!(w, "{} {} {}", e.nodes[0], e.nodes[1], e.tag)?;
        }
        Ok(())
    }

    /// Legacy VTK ASCII unstructured grid with optional point data.
    pub fn write_vtk<W: Write>(
        &self,
        mut w: W,
        title: &str,
        scalars: &[(&str, &[f64])],
        vectors: &[(&str, &[[f64; 2]])],
    ) -> io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "{title}")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", self.nodes.len())?;
        for p in &self.nodes {
            writeln!(w, "{:.12e} {:.12e} 0", p[0], p[1])?;
        }
        writeln!(w, "CELLS {} {}", self.triangles.len(), 4 * self.triangles.len())?;
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "CELL_TYPES {}", self.triangles.len())?;
        for _ in &self.triangles {
            writeln!(w, "5")?;
        }
        if !scalars.is_empty() || !vectors.is_empty() {
            writeln!(w, "POINT_DATA {}", self.nodes.len())?;
        }
        for (name, data) in scalars {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in data.iter() {
                writeln!(w, "{v:.12e}")?;
            }
        }
        for (name, data) in vectors {
            writeln!(w, "VECTORS {name} double")?;
            for v in data.iter() {
                writeln!(w, "{:.12e} {:.12e} 0", v[0], v[1])?;
            }
        }
        Ok(())
    }
}
