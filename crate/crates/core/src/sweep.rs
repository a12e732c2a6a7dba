//! Grid-marching certification of the triangle parameter region.
//!
//! Rows are horizontal lines `q = q_j`. Along a row the apex moves right by
//! the certified step `t*` of each point; once the row leaves the region the
//! next row sits `t** = min t*` higher. Each point `(p, q)` therefore owns the
//! closed rectangle `[p, p + t*] × [q, q + t**]`, and every triangle in it has
//! ratio below 7/3.

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::bounds::{certified_ratio_with, BracketOptions, SpectralBracket};
use crate::certificate::{CertificateRecord, RecordStatus};
use crate::continuity::{equilateral_ratio, ContinuityEstimate, StepResult};
use crate::error::{invalid, Error, Result};
use crate::moduli::{reentry_p, ModuliPoint, RegionSpec};

/// Distance below 7/3 a bound must keep before the sweep steps from it. The
/// step rules lose their rounding slack closer than this.
pub const CERTIFY_MARGIN: f64 = 1e-6;

/// Everything that determines a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub region: RegionSpec<f64>,
    /// Refinement depth tried first at every point.
    pub levels: u32,
    /// Deepest refinement tried before a point is declared a failure.
    pub max_levels: u32,
    /// Eigenvalue padding.
    pub eps: f64,
    pub safety: f64,
    pub tol: f64,
    pub estimate: ContinuityEstimate,
    /// Steps shorter than this abort the sweep as stalled.
    pub min_step: f64,
    /// Steps shorter than this send the point one level deeper, up to `max_levels`.
    pub refine_below: f64,
    /// Offset of the first row and of every row start below and left of the region.
    pub start_offset: f64,
    pub inertia_check: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            region: RegionSpec::default(),
            levels: 6,
            max_levels: 6,
            eps: 1e-9,
            safety: 0.9,
            tol: 1e-10,
            estimate: ContinuityEstimate::default(),
            min_step: 1e-6,
            refine_below: 1e-4,
            start_offset: 1e-9,
            inertia_check: true,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.region.validate()?;
        if self.levels < 2 || self.max_levels < self.levels {
            return invalid("need 2 ≤ levels ≤ max_levels");
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return invalid("safety must lie in (0, 1]");
        }
        if !(self.eps >= 0.0
            && self.tol > 0.0
            && self.min_step > 0.0
            && self.start_offset >= 0.0
            && self.refine_below >= 0.0)
        {
            return invalid(
                "eps, tol, min_step, refine_below and start_offset must be non-negative (tol, min_step positive)",
            );
        }
        Ok(())
    }

    fn bracket_options(&self, levels: u32) -> BracketOptions {
        BracketOptions { levels, eps: self.eps, tol: self.tol, inertia_check: self.inertia_check }
    }

    /// Right end of the region on the horizontal line at height `q`.
    pub fn right_edge(&self, q: f64) -> f64 {
        let spec = &self.region;
        if spec.unit_disk {
            spec.p_max.min((1.0 - q * q).max(0.0).sqrt())
        } else {
            spec.p_max
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOutcome {
    Complete,
    /// A point reached `ξ_h ≥ 7/3` at the deepest level.
    CertificationFailure,
    /// A certified step fell below the floor.
    Stall,
}

/// Where the sweep stands between rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowStart {
    Row { j: u32, p: f64, q: f64 },
    Done,
}

/// The first row: `(p_min − offset, q_min − offset)`, or its re-entry point
/// when that lies in the excised disk.
pub fn first_row(config: &SweepConfig) -> Result<RowStart> {
    let spec = &config.region;
    row_at(config, 0, spec.q_min - config.start_offset)
}

/// The row following one at height `q` whose step minimum was `t_row_min`.
pub fn next_row(config: &SweepConfig, j: u32, q: f64, t_row_min: f64) -> Result<RowStart> {
    let q_next = q + t_row_min;
    if !(q_next > q) {
        return Err(Error::InvalidArgument(format!("row step {t_row_min:e} does not advance q = {q}")));
    }
    row_at(config, j + 1, q_next)
}

fn row_at(config: &SweepConfig, j: u32, q: f64) -> Result<RowStart> {
    let spec = &config.region;
    if q > spec.q_max {
        return Ok(RowStart::Done);
    }
    let p0 = spec.p_min - config.start_offset;
    // membership is tested at the clamped start, the offset only pads coverage
    let probe = ModuliPoint::new(spec.p_min, q.max(spec.q_min));
    let v = spec.violations(probe);
    if v.none() {
        return Ok(RowStart::Row { j, p: p0, q });
    }
    if !v.only_excision() {
        return Ok(RowStart::Done);
    }
    let p = reentry_p(q, spec)?;
    if 2.0 * spec.excision_center[0] - p > spec.p_min {
        warn!("row at q = {q} re-enters right of the disk; the band left of it is not swept");
    }
    if p > config.right_edge(q) {
        debug!("re-entry point p = {p} at q = {q} lies outside the region, sweep done");
        return Ok(RowStart::Done);
    }
    Ok(RowStart::Row { j, p, q })
}

/// Certified bracket and step at one point, deepening the mesh until the
/// step clears both `min_step` and `refine_below` or `max_levels` is reached.
pub fn evaluate_point(
    config: &SweepConfig,
    pt: ModuliPoint<f64>,
) -> Result<(SpectralBracket<f64>, Option<StepResult<f64>>)> {
    let limit = equilateral_ratio::<f64>() - CERTIFY_MARGIN;
    let mut level = config.levels;
    loop {
        let bracket = certified_ratio_with(pt.triangle(), &config.bracket_options(level))?;
        let step =
            if bracket.xi_h < limit { Some(config.estimate.step(bracket.xi_h, pt.q, config.safety)?) } else { None };
        let good = matches!(step, Some(s) if s.t_star >= config.min_step.max(config.refine_below));
        if good || level >= config.max_levels {
            return Ok((bracket, step));
        }
        debug!("deepening at ({}, {}) to level {}, xi_h = {}", pt.p, pt.q, level + 1, bracket.xi_h);
        level += 1;
    }
}

/// Result of a sweep run held in memory.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub records: Vec<CertificateRecord>,
    pub outcome: SweepOutcome,
}

/// Runs the sweep from its first row and collects every record.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepRun> {
    let mut records = Vec::new();
    let outcome = run_sweep_from(config, first_row(config)?, |row| {
        records.extend_from_slice(row);
        Ok(())
    })?;
    Ok(SweepRun { records, outcome })
}

/// Runs the sweep starting at `start`, handing each finished row (or the
/// partial row ending in a failure) to `emit`.
pub fn run_sweep_from<F>(config: &SweepConfig, start: RowStart, mut emit: F) -> Result<SweepOutcome>
where
    F: FnMut(&[CertificateRecord]) -> Result<()>,
{
    config.validate()?;
    let spec = &config.region;
    let mut cursor = start;
    while let RowStart::Row { j, p: p_start, q } = cursor {
        let right = config.right_edge(q);
        let mut row: Vec<CertificateRecord> = Vec::new();
        let mut t_row_min = f64::INFINITY;
        let mut p = p_start;
        let mut i = 0u32;
        loop {
            let pt = ModuliPoint::new(p, q);
            if i > 0 && spec.violations(pt).excision {
                warn!("row {j} entered the excision disk at p = {p}; the point is still certified numerically");
            }
            let (bracket, step) = evaluate_point(config, pt)?;
            let status = match step {
                None => RecordStatus::CannotCertify,
                Some(s) if s.t_star < config.min_step => RecordStatus::Stalled,
                Some(_) => RecordStatus::Certified,
            };
            let mut rec = CertificateRecord::new(i, j, pt, &bracket, step, config.safety, status);
            if status != RecordStatus::Certified {
                warn!("sweep stopped at ({p}, {q}): {status:?}, xi_h = {}", bracket.xi_h);
                rec.row_end = true;
                row.push(rec);
                emit(&row)?;
                return Ok(match status {
                    RecordStatus::Stalled => SweepOutcome::Stall,
                    _ => SweepOutcome::CertificationFailure,
                });
            }
            t_row_min = t_row_min.min(rec.t_star);
            let p_next = p + rec.t_star;
            row.push(rec);
            if !(p_next > p) {
                return Err(Error::InvalidArgument(format!("step does not advance p = {p}")));
            }
            if p_next > right {
                break;
            }
            p = p_next;
            i += 1;
        }
        for rec in &mut row {
            rec.t_row_min = Some(t_row_min);
        }
        row.last_mut().expect("row has a point").row_end = true;
        info!("row {j}: q = {q:.9}, {} points, t** = {t_row_min:.3e}", row.len());
        emit(&row)?;
        cursor = next_row(config, j, q, t_row_min)?;
    }
    Ok(SweepOutcome::Complete)
}

/// A point of the region not covered by any rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub covered: bool,
    pub gap_witness: Option<ModuliPoint<f64>>,
    pub rectangles_checked: usize,
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    p0: f64,
    p1: f64,
    q0: f64,
    q1: f64,
}

/// Closed rectangles owned by certified records of completed rows.
fn rectangles(records: &[CertificateRecord]) -> Result<Vec<Rect>> {
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        let finite = [rec.p, rec.q, rec.t_star].iter().all(|v| v.is_finite());
        if !finite || rec.t_star < 0.0 || (rec.status == RecordStatus::Certified && rec.t_star <= 0.0) {
            return Err(Error::Schema(format!("record ({}, {}) has a malformed position or step", rec.i, rec.j)));
        }
        if rec.status != RecordStatus::Certified {
            continue;
        }
        let Some(h) = rec.t_row_min else { continue };
        if !(h.is_finite() && h > 0.0 && h <= rec.t_star) {
            return Err(Error::Schema(format!(
                "record ({}, {}) has row minimum {h:e} outside (0, t_star = {:e}]",
                rec.i, rec.j, rec.t_star
            )));
        }
        out.push(Rect { p0: rec.p, p1: rec.p + rec.t_star, q0: rec.q, q1: rec.q + h });
    }
    Ok(out)
}

/// Horizontal cross-section of the closed region at height `y`, as at most
/// two intervals.
fn cross_section(spec: &RegionSpec<f64>, right: impl Fn(f64) -> f64, y: f64) -> Vec<(f64, f64)> {
    let (lo, hi) = (spec.p_min, right(y));
    let (cx, cy) = (spec.excision_center[0], spec.excision_center[1]);
    let r = spec.excision_radius;
    let dq = y - cy;
    if dq.abs() > r {
        return vec![(lo, hi)];
    }
    // the same expression as the re-entry point, so a row starting there is
    // never judged short of the disk by rounding
    let w = (r * r - dq * dq).max(0.0).sqrt();
    vec![(lo, hi.min(cx - w)), (lo.max(cx + w), hi)]
}

/// Sorted union of closed intervals.
fn merge(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Midpoint of a positive-length piece of `[a, b]` outside `union`.
fn uncovered_in(a: f64, b: f64, union: &[(f64, f64)]) -> Option<f64> {
    if !(a < b) {
        return None;
    }
    let mut cursor = a;
    for &(u0, u1) in union {
        if u0 > cursor {
            let end = u0.min(b);
            if end > cursor {
                return Some(0.5 * (cursor + end));
            }
        }
        cursor = cursor.max(u1);
        if cursor >= b {
            return None;
        }
    }
    (cursor < b).then_some(0.5 * (cursor + b))
}

/// Decides whether the rectangles of `records` cover `spec`.
///
/// Between consecutive rectangle edges the covering set is a fixed union of
/// intervals and every endpoint of the region's cross-section is monotone in
/// `y`, so the cross-section over a slab is bounded by its values at the slab
/// ends. Slabs failing that bound are bisected until a genuinely uncovered
/// point is found. Coverage is decided up to sets of zero area, which for a
/// closed union of rectangles and a region equal to the closure of its
/// interior is exact.
pub fn verify_coverage(records: &[CertificateRecord], spec: &RegionSpec<f64>) -> Result<CoverageReport> {
    spec.validate()?;
    let rects = rectangles(records)?;
    let right = |y: f64| {
        if spec.unit_disk {
            spec.p_max.min((1.0 - y * y).max(0.0).sqrt())
        } else {
            spec.p_max
        }
    };
    let y_lo = spec.q_min;
    let y_hi = if spec.unit_disk { spec.q_max.min(1.0) } else { spec.q_max };
    let (cx, cy) = (spec.excision_center[0], spec.excision_center[1]);
    let r = spec.excision_radius;

    let mut ys = vec![y_lo, y_hi, cy - r, cy, cy + r];
    // above the center the left piece ends at min(right(y), cx − w(y)) whose
    // two arguments move in opposite directions; split at their crossing
    let gap = |y: f64| right(y) - (cx - (r * r - (y - cy) * (y - cy)).max(0.0).sqrt());
    if gap(cy) > 0.0 && gap(cy + r) < 0.0 {
        let (mut a, mut b) = (cy, cy + r);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if gap(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        ys.push(a);
    }
    for rc in &rects {
        ys.push(rc.q0);
        ys.push(rc.q1);
    }
    ys.retain(|&y| y >= y_lo && y <= y_hi);
    ys.sort_by(f64::total_cmp);
    ys.dedup();

    let mut by_bottom: Vec<&Rect> = rects.iter().collect();
    by_bottom.sort_by(|a, b| a.q0.total_cmp(&b.q0));
    let mut next = 0;
    let mut active: Vec<&Rect> = Vec::new();
    for w in ys.windows(2) {
        let (y0, y1) = (w[0], w[1]);
        while next < by_bottom.len() && by_bottom[next].q0 <= y0 {
            active.push(by_bottom[next]);
            next += 1;
        }
        active.retain(|rc| rc.q1 >= y1);
        let union = merge(active.iter().filter(|rc| rc.q0 <= y0).map(|rc| (rc.p0, rc.p1)).collect());
        if let Some(pt) = slab_gap(spec, &right, &union, y0, y1) {
            return Ok(CoverageReport { covered: false, gap_witness: Some(pt), rectangles_checked: rects.len() });
        }
    }
    Ok(CoverageReport { covered: true, gap_witness: None, rectangles_checked: rects.len() })
}

fn slab_gap(
    spec: &RegionSpec<f64>,
    right: &impl Fn(f64) -> f64,
    union: &[(f64, f64)],
    y0: f64,
    y1: f64,
) -> Option<ModuliPoint<f64>> {
    let mut stack = vec![(y0, y1, 0u32)];
    let mut fallback = None;
    while let Some((a, b, depth)) = stack.pop() {
        let lower = cross_section(spec, right, a);
        let upper = cross_section(spec, right, b);
        let pieces = lower.len().max(upper.len());
        let mut suspect = None;
        for k in 0..pieces {
            let at = |cs: &Vec<(f64, f64)>| cs.get(k).copied().or_else(|| cs.first().copied());
            let (Some(lo), Some(hi)) = (at(&lower), at(&upper)) else { continue };
            suspect = suspect.or(uncovered_in(lo.0.min(hi.0), lo.1.max(hi.1), union));
        }
        let Some(p_box) = suspect else { continue };
        let mid = 0.5 * (a + b);
        for y in [mid, 0.5 * (a + mid), 0.5 * (mid + b)] {
            if y > y0 && y < y1 {
                for (lo, hi) in cross_section(spec, right, y) {
                    if let Some(p) = uncovered_in(lo, hi, union) {
                        return Some(ModuliPoint::new(p, y));
                    }
                }
            }
        }
        if depth >= 60 || mid <= a || mid >= b {
            fallback.get_or_insert(ModuliPoint::new(p_box, mid));
            continue;
        }
        stack.push((mid, b, depth + 1));
        stack.push((a, mid, depth + 1));
    }
    fallback
}
