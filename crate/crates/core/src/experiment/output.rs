use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{RunOutcome, RunReport, SweepAxis};
use crate::inverse::sample_exact;
use crate::mesh::{write_elements, write_nodes, write_vtk, VtkData};

fn create(path: &Path) -> std::io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Write every artifact of a run into `dir`:
///
/// * `report.json`: the full [`RunReport`]
/// * `errors.csv`, `eigenvalues.csv`, `cells.csv`, `condition_map.csv`
/// * `reconstruction.txt`: `cx cy mu_1 … mu_n` per cell, as scored
/// * `reconstruction.vtk`: hexagonal cells with reconstructed and exact maps
/// * `data_<ℓ>.txt`, `data_<ℓ>.vtk`: displacement data on the inversion mesh
/// * `mesh_nodes.txt`, `mesh_elements.txt`: the inversion sub-triangulation,
///   tagged with the cell index of each triangle
pub fn write_outputs(dir: &Path, out: &RunOutcome) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let report = &out.report;
    let pair = &out.pair;
    let n = report.n;
    let nc = pair.n_cells();

    let mut w = create(&dir.join("report.json"))?;
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    w.flush()?;

    let mut w = create(&dir.join("errors.csv"))?;
    writeln!(w, "parameter,percent")?;
    for (k, e) in report.errors.per_parameter.iter().enumerate() {
        writeln!(w, "mu_{},{e:.16e}", k + 1)?;
    }
    writeln!(w, "joint,{:.16e}", report.errors.joint)?;
    w.flush()?;

    let mut w = create(&dir.join("eigenvalues.csv"))?;
    writeln!(w, "index,value")?;
    for (i, a) in report.spectral.eigenvalues.iter().enumerate() {
        writeln!(w, "{},{a:.16e}", i + 1)?;
    }
    w.flush()?;

    // Reconstruction scaled as it was scored.
    let scale = report.errors.scale;
    let recon: Vec<Vec<f64>> =
        (0..n).map(|k| out.reconstruction.map(k).iter().map(|v| scale * v).collect()).collect();
    let exact_flat = sample_exact(&report.config.exact(), pair);
    let exact: Vec<&[f64]> = (0..n).map(|k| &exact_flat[k * nc..(k + 1) * nc]).collect();

    let mut w = create(&dir.join("cells.csv"))?;
    let mut header = String::from("cell,x,y,area");
    (1..=n).for_each(|k| header.push_str(&format!(",recon_{k}")));
    (1..=n).for_each(|k| header.push_str(&format!(",exact_{k}")));
    writeln!(w, "{header}")?;
    for (c, cell) in pair.cells.iter().enumerate() {
        write!(w, "{c},{:.16e},{:.16e},{:.16e}", cell.centroid[0], cell.centroid[1], pair.cell_area[c])?;
        for r in &recon {
            write!(w, ",{:.16e}", r[c])?;
        }
        for e in &exact {
            write!(w, ",{:.16e}", e[c])?;
        }
        writeln!(w)?;
    }
    w.flush()?;

    let mut w = create(&dir.join("reconstruction.txt"))?;
    for (c, cell) in pair.cells.iter().enumerate() {
        write!(w, "{:.16e} {:.16e}", cell.centroid[0], cell.centroid[1])?;
        for r in &recon {
            write!(w, " {:.16e}", r[c])?;
        }
        writeln!(w)?;
    }
    w.flush()?;

    let mesh = &pair.sub_tri;
    let mut w = create(&dir.join("condition_map.csv"))?;
    writeln!(w, "triangle,x,y,condition")?;
    for (t, c) in out.condition.iter().enumerate() {
        let b = mesh.barycenter(t);
        writeln!(w, "{t},{:.16e},{:.16e},{c:.16e}", b[0], b[1])?;
    }
    w.flush()?;

    let names: Vec<(String, String)> = (1..=n).map(|k| (format!("recon_{k}"), format!("exact_{k}"))).collect();
    let mut cell_scalars: Vec<(&str, &[f64])> = Vec::new();
    for (k, (rn, en)) in names.iter().enumerate() {
        cell_scalars.push((rn.as_str(), recon[k].as_slice()));
        cell_scalars.push((en.as_str(), exact[k]));
    }
    let data = VtkData { cell_scalars, ..Default::default() };
    let mut w = create(&dir.join("reconstruction.vtk"))?;
    write_vtk(&mut w, &report.name, &mesh.vertices, &pair.polygons(), &data)?;
    w.flush()?;

    let tags: Vec<usize> = pair.cell_of_triangle.clone();
    let mut w = create(&dir.join("mesh_nodes.txt"))?;
    write_nodes(&mut w, mesh)?;
    w.flush()?;
    let mut w = create(&dir.join("mesh_elements.txt"))?;
    write_elements(&mut w, mesh, Some(&tags))?;
    w.flush()?;

    let tris: Vec<Vec<usize>> = mesh.triangles.iter().map(|t| t.to_vec()).collect();
    for (l, u) in out.data.fields.iter().enumerate() {
        let mut w = create(&dir.join(format!("data_{l}.txt")))?;
        u.write_text(&mut w)?;
        w.flush()?;
        let vectors = u.nodal_vectors();
        let data = VtkData { point_vectors: vec![("displacement", &vectors)], ..Default::default() };
        let mut w = create(&dir.join(format!("data_{l}.vtk")))?;
        write_vtk(&mut w, &format!("{} field {l}", report.name), &mesh.vertices, &tris, &data)?;
        w.flush()?;
    }
    Ok(())
}

/// One row per sweep value: errors, leading eigenvalues, gap and condition.
pub fn write_sweep_table(path: &Path, axis: SweepAxis, values: &[f64], reports: &[RunReport]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let n = reports.first().map_or(0, |r| r.n);
    let mut w = create(path)?;
    let mut header = format!("{axis},m,joint_error");
    (1..=n).for_each(|k| header.push_str(&format!(",error_{k}")));
    header.push_str(",alpha_1,alpha_2,spectral_gap,max_condition");
    writeln!(w, "{header}")?;
    for (v, r) in values.iter().zip(reports) {
        write!(w, "{v:.16e},{},{:.16e}", r.m, r.errors.joint)?;
        for e in &r.errors.per_parameter {
            write!(w, ",{e:.16e}")?;
        }
        let alpha = |i: usize| r.spectral.eigenvalues.get(i).copied().unwrap_or(f64::NAN);
        writeln!(w, ",{:.16e},{:.16e},{:.16e},{:.16e}", alpha(0), alpha(1), r.spectral_gap, r.max_condition)?;
    }
    w.flush()
}
