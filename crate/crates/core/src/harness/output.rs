//! CSV writers.

use std::path::Path;

use serde::Serialize;

use crate::mesh::{Axis, Mesh};
use crate::transport::{SimState, GAS, LIQUID};
use crate::VofError;

/// Serialize `rows` to `path` with a header row.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), VofError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of `fields_<step>.csv`: a cell (`alpha_l` is the cell fraction,
/// no face values) or an x/y face (`alpha_l` is the staggered fraction).
#[derive(Serialize)]
struct FieldRow {
    location: &'static str,
    i: usize,
    j: usize,
    x: f64,
    y: f64,
    alpha_l: f64,
    phi_l: Option<f64>,
    phi_g: Option<f64>,
}

pub fn write_fields(path: &Path, mesh: &Mesh, st: &SimState) -> Result<(), VofError> {
    let mut w = csv::Writer::from_path(path)?;
    for j in 0..mesh.ny {
        for i in 0..mesh.nx {
            let x = mesh.cell_center(i, j);
            let alpha_l = st.alpha.data[mesh.cell_index(i, j)];
            w.serialize(FieldRow { location: "cell", i, j, x: x.x, y: x.y, alpha_l, phi_l: None, phi_g: None })?;
        }
    }
    let sa = super::stag_liquid(mesh, st);
    for axis in Axis::BOTH {
        let (np, nq) = mesh.dims(axis);
        let location = if axis == Axis::X { "xface" } else { "yface" };
        for q in 0..nq {
            for p in 0..=np {
                let (i, j) = if axis == Axis::X { (p, q) } else { (q, p) };
                let x = mesh.face_center(axis, p, q);
                w.serialize(FieldRow {
                    location,
                    i,
                    j,
                    x: x.x,
                    y: x.y,
                    alpha_l: sa.get(mesh, axis, p, q),
                    phi_l: Some(st.phi[LIQUID].get(mesh, axis, p, q)),
                    phi_g: Some(st.phi[GAS].get(mesh, axis, p, q)),
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
