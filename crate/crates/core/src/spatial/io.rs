//! Plain-text velocity matrices: one line per grid row, starting at `y_min`,
//! `nx` whitespace-separated values per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Grid2D, VelocityField};
use crate::error::{Error, Result};

fn write_matrix(path: &Path, grid: &Grid2D, values: &[f64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for row in values.chunks(grid.nx) {
        let line: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

fn read_matrix(path: &Path, grid: &Grid2D) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::with_capacity(grid.cells());
    let mut rows = 0;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| {
                    Error::Config(format!("{}:{}: bad number {t:?}", path.display(), n + 1))
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != grid.nx {
            return Err(Error::Config(format!(
                "{}:{}: expected {} values, found {}",
                path.display(),
                n + 1,
                grid.nx,
                row.len()
            )));
        }
        values.extend(row);
        rows += 1;
    }
    if rows != grid.ny {
        return Err(Error::Config(format!(
            "{}: expected {} rows, found {rows}",
            path.display(),
            grid.ny
        )));
    }
    Ok(values)
}

pub fn write_velocity(u_path: &Path, z_path: &Path, grid: &Grid2D, vel: &VelocityField) -> Result<()> {
    write_matrix(u_path, grid, &vel.u)?;
    write_matrix(z_path, grid, &vel.z)
}

/// Loads `u` and `z`; the diffusion rate is set to the constant `d`.
pub fn read_velocity(u_path: &Path, z_path: &Path, grid: &Grid2D, d: f64) -> Result<VelocityField> {
    let u = read_matrix(u_path, grid)?;
    let z = read_matrix(z_path, grid)?;
    VelocityField::new(grid, u, z, vec![d; grid.cells()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid2D::new(3, 2, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let v = VelocityField::new(
            &g,
            vec![0.1, -0.2, 1.0 / 3.0, 4.0, 5e-20, -6.0],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![0.5; 6],
        )
        .unwrap();
        let (a, b) = (dir.path().join("u.txt"), dir.path().join("z.txt"));
        write_velocity(&a, &b, &g, &v).unwrap();
        assert_eq!(read_velocity(&a, &b, &g, 0.5).unwrap(), v);
        let wrong = Grid2D::new(2, 3, (0.0, 1.0), (0.0, 1.0)).unwrap();
        assert!(matches!(read_velocity(&a, &b, &wrong, 0.5), Err(Error::Config(_))));
    }
}
