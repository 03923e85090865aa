//! Triangle meshes of reconstructed surfaces, OBJ export and λ-family sweeps.

use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use crate::catalog::JetSource;
use crate::error::{Error, Result};
use crate::fields::{same_grid, Grid2D, Mat3, ScalarField2D};
use crate::frames::{integrate_frame, SweepOrder};
use crate::wdvv::Case;

/// Vertices in grid order (index i + j·nx), two triangles per cell.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SurfaceMesh {
    pub vertices: Vec<[f64; 3]>,
    /// Zero-based vertex indices.
    pub faces: Vec<[usize; 3]>,
    /// Named per-vertex scalars.
    pub attributes: Vec<(String, Vec<f64>)>,
    /// Faces with two coincident vertices.
    pub degenerate: Vec<usize>,
}

impl SurfaceMesh {
    pub fn add_attribute(&mut self, name: &str, values: &ScalarField2D) -> Result<()> {
        if values.values.len() != self.vertices.len() {
            return Err(Error::GridMismatch);
        }
        self.attributes.push((name.to_string(), values.values.clone()));
        Ok(())
    }

    /// Unnormalized normals (v1 − v0) × (v2 − v0).
    pub fn face_normals(&self) -> Vec<[f64; 3]> {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|k| self.vertices[k]);
                let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
                [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
            })
            .collect()
    }
}

/// Mesh of a position field. Cell (i, j) is split along the diagonal from
/// (i, j) to (i+1, j+1) into two triangles, counterclockwise in (x, y).
pub fn mesh_from_field(position: &[ScalarField2D; 3]) -> Result<SurfaceMesh> {
    let g: Grid2D = same_grid(&[&position[0], &position[1], &position[2]])?;
    if g.nx < 2 || g.ny < 2 {
        return Err(Error::InvalidGrid("a mesh needs at least 2×2 nodes".into()));
    }
    let vertices: Vec<[f64; 3]> =
        (0..g.len()).map(|k| [position[0].values[k], position[1].values[k], position[2].values[k]]).collect();
    let mut faces = Vec::with_capacity(2 * (g.nx - 1) * (g.ny - 1));
    for j in 0..g.ny - 1 {
        for i in 0..g.nx - 1 {
            let (v00, v10, v01, v11) = (g.index(i, j), g.index(i + 1, j), g.index(i, j + 1), g.index(i + 1, j + 1));
            faces.push([v00, v10, v11]);
            faces.push([v00, v11, v01]);
        }
    }
    let degenerate = faces
        .iter()
        .enumerate()
        .filter(|(_, f)| {
            let [a, b, c] = f.map(|k| vertices[k]);
            a == b || b == c || a == c
        })
        .map(|(k, _)| k)
        .collect();
    Ok(SurfaceMesh { vertices, faces, attributes: Vec::new(), degenerate })
}

/// `v x y z` and `f i j k` lines, one-based, nine significant digits.
pub fn write_obj<W: Write>(mesh: &SurfaceMesh, mut out: W) -> Result<()> {
    for v in &mesh.vertices {
        writeln!(out, "v {:.8e} {:.8e} {:.8e}", v[0], v[1], v[2])?;
    }
    for f in &mesh.faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

pub fn write_obj_file(mesh: &SurfaceMesh, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_obj(mesh, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Reads `v` and `f` lines; other records are skipped and `f` entries may
/// carry `/vt/vn` suffixes.
pub fn read_obj<R: BufRead>(input: R) -> Result<SurfaceMesh> {
    let mut mesh = SurfaceMesh::default();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let mut it = line.split_whitespace();
        let err = |msg: &str| Error::Parse { line: n + 1, msg: msg.to_string() };
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it.take(3).map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| err("bad vertex"))?;
                if c.len() != 3 {
                    return Err(err("vertex needs three coordinates"));
                }
                mesh.vertices.push([c[0], c[1], c[2]]);
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|t| t.split('/').next().unwrap_or("").parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| err("bad face index"))?;
                if idx.len() != 3 || idx.iter().any(|&k| k == 0 || k > mesh.vertices.len()) {
                    return Err(err("face needs three in-range indices"));
                }
                mesh.faces.push([idx[0] - 1, idx[1] - 1, idx[2] - 1]);
            }
            _ => {}
        }
    }
    Ok(mesh)
}

/// Sidecar `vertex_index,attr...` with one row per vertex.
pub fn write_attributes_csv<W: Write>(mesh: &SurfaceMesh, mut out: W) -> Result<()> {
    write!(out, "vertex_index")?;
    for (name, _) in &mesh.attributes {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for k in 0..mesh.vertices.len() {
        write!(out, "{k}")?;
        for (_, v) in &mesh.attributes {
            write!(out, ",{:.8e}", v[k])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// One reconstructed mesh per λ together with its cross-derivative defect.
pub fn sweep_lambda(
    src: &dyn JetSource,
    case: Case,
    lambdas: &[f64],
    grid: Grid2D,
    psi0: Mat3,
) -> Result<Vec<(f64, SurfaceMesh, f64)>> {
    lambdas
        .iter()
        .map(|&l| {
            let rec = integrate_frame(src, case, l, grid, psi0, SweepOrder::RowFirst)?;
            Ok((l, mesh_from_field(&rec.position)?, rec.cross_defect))
        })
        .collect()
}
