use std::fmt::Write as _;
use std::path::Path;

use super::{make_grid, DensityField};
use crate::error::{Error, Result};

/// Plain-text snapshot: a header line
/// `t=<time> grid=<n1>x<n2> bounds=<lo1>,<hi1>,<lo2>,<hi2>` followed by one
/// cell value per line in row-major order.
pub fn format_dump(density: &DensityField) -> String {
    let g = density.grid();
    let counts: Vec<String> = g.cells().iter().map(|n| n.to_string()).collect();
    let bounds: Vec<String> = g
        .lower()
        .iter()
        .zip(g.upper())
        .flat_map(|(lo, hi)| [format!("{lo:e}"), format!("{hi:e}")])
        .collect();
    let mut out = format!(
        "t={:.16e} grid={} bounds={}\n",
        density.time(),
        counts.join("x"),
        bounds.join(",")
    );
    for v in density.values() {
        let _ = writeln!(out, "{v:.16e}");
    }
    out
}

pub fn write_dump(path: &Path, density: &DensityField) -> Result<()> {
    std::fs::write(path, format_dump(density)).map_err(|e| Error::io(path, e))
}

pub fn parse_dump(text: &str) -> Result<DensityField> {
    let bad = |m: &str| Error::InvalidInput(format!("density dump: {m}"));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file"))?;
    let (mut t, mut counts, mut bounds) = (None, None, None);
    for field in header.split_whitespace() {
        let (key, value) = field.split_once('=').ok_or_else(|| bad("malformed header"))?;
        match key {
            "t" => t = Some(value.parse::<f64>().map_err(|_| bad("bad time"))?),
            "grid" => {
                counts = Some(
                    value
                        .split('x')
                        .map(|s| s.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("bad grid counts"))?,
                )
            }
            "bounds" => {
                bounds = Some(
                    value
                        .split(',')
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("bad bounds"))?,
                )
            }
            _ => return Err(bad(&format!("unknown header key {key}"))),
        }
    }
    let (t, counts, bounds) = match (t, counts, bounds) {
        (Some(t), Some(c), Some(b)) => (t, c, b),
        _ => return Err(bad("header needs t, grid and bounds")),
    };
    if bounds.len() != 2 * counts.len() {
        return Err(bad("bounds do not match grid dimension"));
    }
    let pairs: Vec<(f64, f64)> = bounds.chunks(2).map(|c| (c[0], c[1])).collect();
    let grid = make_grid(&pairs, &counts)?;
    let values = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| bad("bad cell value"))?;
    if values.len() != grid.len() {
        return Err(bad("cell count does not match header"));
    }
    Ok(DensityField::raw(grid, values, t))
}
