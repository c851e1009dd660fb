use std::io::Write;

use super::ScalarField;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::plot;

/// `vertex_index value` lines.
pub fn write_field_text<W: Write>(field: &ScalarField, mut out: W) -> Result<()> {
    for (i, v) in field.values.iter().enumerate() {
        writeln!(out, "{i} {}", crate::output::fmt_f64(*v))?;
    }
    Ok(())
}

/// Filled-triangle heatmap with a linear colour map and the boundary drawn on
/// top.
pub fn write_field_svg<W: Write>(mesh: &Mesh, field: &ScalarField, mut out: W) -> Result<()> {
    if field.mesh_id != mesh.id() {
        return Err(Error::MeshMismatch);
    }
    out.write_all(plot::heatmap_svg(mesh, &field.values).as_bytes())?;
    Ok(())
}
