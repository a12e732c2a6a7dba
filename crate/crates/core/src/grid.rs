//! Ratio values on a regular grid over the parameter region, for plotting.

use std::io::Write;

use crate::bounds::{certified_ratio_with, BracketOptions};
use crate::certificate::f17;
use crate::error::{invalid, Result};
use crate::moduli::{in_region, ModuliPoint, RegionSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub p: f64,
    pub q: f64,
    /// Certified upper bound on the ratio.
    pub xi_h: f64,
}

/// Evaluates the certified bound at the admissible points of a
/// `resolution × resolution` grid spanning the region's bounding box. Points
/// outside the region are skipped. Rows run in q, columns in p.
pub fn ratio_grid(spec: &RegionSpec<f64>, resolution: usize, opts: &BracketOptions) -> Result<Vec<GridPoint>> {
    spec.validate()?;
    if resolution < 2 {
        return invalid("grid resolution must be at least 2");
    }
    let q_hi = if spec.unit_disk { spec.q_max.min(1.0) } else { spec.q_max };
    let at = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / (resolution - 1) as f64;
    let mut out = Vec::new();
    for iq in 0..resolution {
        for ip in 0..resolution {
            let pt = ModuliPoint::new(at(spec.p_min, spec.p_max, ip), at(spec.q_min, q_hi, iq));
            if !in_region(pt, spec) {
                continue;
            }
            let b = certified_ratio_with(pt.triangle(), opts)?;
            out.push(GridPoint { p: pt.p, q: pt.q, xi_h: b.xi_h });
        }
    }
    Ok(out)
}

/// Writes `p,q,xi_h` rows with 17 significant digits.
pub fn write_grid_csv<W: Write>(points: &[GridPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "p,q,xi_h")?;
    for g in points {
        writeln!(out, "{},{},{}", f17::format(g.p), f17::format(g.q), f17::format(g.xi_h))?;
    }
    out.flush()
}

/// [`ratio_grid`] followed by [`write_grid_csv`] into `path`.
pub fn export_ratio_grid(
    spec: &RegionSpec<f64>,
    resolution: usize,
    opts: &BracketOptions,
    path: &std::path::Path,
) -> Result<usize> {
    let points = ratio_grid(spec, resolution, opts)?;
    let io = |e: std::io::Error| crate::Error::Io(format!("{}: {e}", path.display()));
    let file = std::fs::File::create(path).map_err(io)?;
    write_grid_csv(&points, std::io::BufWriter::new(file)).map_err(io)?;
    Ok(points.len())
}
