//! The certificate stream: one JSON object per line, a header first, then the
//! sweep points row by row, then a summary.
//!
//! Floating-point fields are written with 17 significant digits so every
//! value reads back to the identical double.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use crate::bounds::{certified_ratio_with, BracketOptions, SpectralBracket};
use crate::continuity::{equilateral_ratio, StepResult};
use crate::error::{Error, Result};
use crate::moduli::ModuliPoint;
use crate::sweep::{first_row, next_row, run_sweep_from, verify_coverage, CoverageReport, SweepConfig, SweepOutcome};

pub const SCHEMA_VERSION: u32 = 1;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Serializes an `f64` as a 17-significant-digit literal.
pub mod f17 {
    use serde::{de, ser, Deserialize, Deserializer, Serialize, Serializer};
    use serde_json::value::RawValue;

    pub fn format(v: f64) -> String {
        format!("{v:.16e}")
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if !v.is_finite() {
            return s.serialize_none();
        }
        RawValue::from_string(format(*v)).map_err(ser::Error::custom)?.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Option::<f64>::deserialize(d)?.ok_or_else(|| de::Error::custom("non-finite value"))
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(x) => super::serialize(x, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Option::<f64>::deserialize(d)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Certified,
    /// `ξ_h` too close to 7/3 at the deepest level.
    CannotCertify,
    /// Step below the floor.
    Stalled,
}

/// One sweep point with its bracket and step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub i: u32,
    pub j: u32,
    #[serde(with = "f17")]
    pub p: f64,
    #[serde(with = "f17")]
    pub q: f64,
    pub levels: u32,
    #[serde(with = "f17")]
    pub h: f64,
    pub dofs_cr: usize,
    pub dofs_p1: usize,
    #[serde(with = "f17")]
    pub lam1_h: f64,
    #[serde(with = "f17")]
    pub lam1_h_floor: f64,
    #[serde(with = "f17")]
    pub lam1_low: f64,
    #[serde(with = "f17")]
    pub lam1_up: f64,
    #[serde(with = "f17")]
    pub lam2_h: f64,
    #[serde(with = "f17")]
    pub lam2_low: f64,
    #[serde(with = "f17")]
    pub rayleigh_sum: f64,
    #[serde(with = "f17")]
    pub lam2_up: f64,
    #[serde(with = "f17")]
    pub xi_h: f64,
    #[serde(with = "f17")]
    pub xi_low: f64,
    #[serde(with = "f17")]
    pub orthonormality_defect: f64,
    #[serde(with = "f17")]
    pub t_root: f64,
    #[serde(with = "f17")]
    pub t_star: f64,
    /// Filled once the row is complete.
    #[serde(with = "f17::option")]
    pub t_row_min: Option<f64>,
    #[serde(with = "f17")]
    pub eps: f64,
    #[serde(with = "f17")]
    pub safety: f64,
    pub status: RecordStatus,
    /// Last record of its row.
    pub row_end: bool,
}

impl CertificateRecord {
    pub fn new(
        i: u32,
        j: u32,
        pt: ModuliPoint<f64>,
        b: &SpectralBracket<f64>,
        step: Option<StepResult<f64>>,
        safety: f64,
        status: RecordStatus,
    ) -> Self {
        let (t_root, t_star) = step.map_or((0.0, 0.0), |s| (s.t_root, s.t_star));
        Self {
            i,
            j,
            p: pt.p,
            q: pt.q,
            levels: b.levels,
            h: b.h,
            dofs_cr: b.dofs_cr,
            dofs_p1: b.dofs_p1,
            lam1_h: b.lam1_h,
            lam1_h_floor: b.lam1_h_floor,
            lam1_low: b.lam1_low,
            lam1_up: b.lam1_up,
            lam2_h: b.lam2_h,
            lam2_low: b.lam2_low,
            rayleigh_sum: b.rayleigh_sum,
            lam2_up: b.lam2_up,
            xi_h: b.xi_h,
            xi_low: b.xi_low,
            orthonormality_defect: b.orthonormality_defect,
            t_root,
            t_star,
            t_row_min: None,
            eps: b.eps,
            safety,
            status,
            row_end: false,
        }
    }

    pub fn point(&self) -> ModuliPoint<f64> {
        ModuliPoint::new(self.p, self.q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema_version: u32,
    pub code_version: String,
    pub config: SweepConfig,
}

impl Header {
    pub fn new(config: SweepConfig) -> Self {
        Self { schema_version: SCHEMA_VERSION, code_version: CODE_VERSION.to_string(), config }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub outcome: SweepOutcome,
    pub points: usize,
    pub rows: usize,
    pub max_levels_used: u32,
    #[serde(with = "f17::option")]
    pub min_t_star: Option<f64>,
}

impl Summary {
    pub fn of(records: &[CertificateRecord], outcome: SweepOutcome) -> Self {
        let certified = records.iter().filter(|r| r.status == RecordStatus::Certified);
        Self {
            outcome,
            points: records.len(),
            rows: records.iter().filter(|r| r.row_end).count(),
            max_levels_used: records.iter().map(|r| r.levels).max().unwrap_or(0),
            min_t_star: certified.map(|r| r.t_star).reduce(f64::min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Line {
    Header(Header),
    Point(CertificateRecord),
    Summary(Summary),
}

pub fn to_line(line: &Line) -> String {
    serde_json::to_string(line).expect("certificate lines always serialize")
}

pub fn parse_line(text: &str) -> Result<Line> {
    serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
}

/// A fully parsed certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub header: Header,
    pub records: Vec<CertificateRecord>,
    pub summary: Summary,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Header and point records of a possibly unfinished certificate, with the
/// byte length of each line.
struct Partial {
    header: Header,
    points: Vec<(CertificateRecord, u64)>,
    header_len: u64,
    summary: Option<Summary>,
    broken_tail: bool,
}

fn read_partial(path: &Path, strict: bool) -> Result<Partial> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = BufReader::new(file);
    let mut header = None;
    let mut header_len = 0;
    let mut points = Vec::new();
    let mut summary = None;
    let mut buf = String::new();
    let mut lineno = 0usize;
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf).map_err(|e| io_err(path, e))?;
        if n == 0 {
            break;
        }
        lineno += 1;
        let complete = buf.ends_with('\n');
        let parsed =
            if complete { parse_line(buf.trim_end()) } else { Err(Error::Schema("line is not terminated".into())) };
        let line = match parsed {
            Ok(line) => line,
            Err(e) if !strict && !complete => {
                return finish(header, points, header_len, summary, true, path).map_err(|_| e);
            }
            Err(Error::Schema(msg)) => return Err(Error::Schema(format!("{}:{lineno}: {msg}", path.display()))),
            Err(e) => return Err(e),
        };
        if summary.is_some() {
            return Err(Error::Schema(format!("{}:{lineno}: record after the summary", path.display())));
        }
        match (line, header.is_some()) {
            (Line::Header(h), false) => {
                if h.schema_version != SCHEMA_VERSION {
                    return Err(Error::Schema(format!("unsupported schema version {}", h.schema_version)));
                }
                header = Some(h);
                header_len = n as u64;
            }
            (Line::Header(_), true) => {
                return Err(Error::Schema(format!("{}:{lineno}: second header", path.display())))
            }
            (_, false) => return Err(Error::Schema(format!("{}: first line is not a header", path.display()))),
            (Line::Point(r), true) => points.push((r, n as u64)),
            (Line::Summary(s), true) => summary = Some(s),
        }
    }
    finish(header, points, header_len, summary, false, path)
}

fn finish(
    header: Option<Header>,
    points: Vec<(CertificateRecord, u64)>,
    header_len: u64,
    summary: Option<Summary>,
    broken_tail: bool,
    path: &Path,
) -> Result<Partial> {
    let header = header.ok_or_else(|| Error::Schema(format!("{}: missing header", path.display())))?;
    Ok(Partial { header, points, header_len, summary, broken_tail })
}

/// Reads a complete certificate. Truncated or malformed files are schema
/// errors.
pub fn read_certificate(path: &Path) -> Result<Certificate> {
    let partial = read_partial(path, true)?;
    let summary = partial
        .summary
        .ok_or_else(|| Error::Schema(format!("{}: missing summary, the certificate is truncated", path.display())))?;
    let records: Vec<_> = partial.points.into_iter().map(|(r, _)| r).collect();
    if summary.points != records.len() {
        return Err(Error::Schema(format!(
            "summary counts {} points but the file holds {}",
            summary.points,
            records.len()
        )));
    }
    Ok(Certificate { header: partial.header, records, summary })
}

/// Writes certificate lines, flushing after each row.
pub struct CertificateWriter<W: Write> {
    out: W,
}

impl<W: Write> CertificateWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, line: &Line) -> std::io::Result<()> {
        self.out.write_all(to_line(line).as_bytes())?;
        self.out.write_all(b"\n")
    }

    pub fn write_rows(&mut self, records: &[CertificateRecord]) -> std::io::Result<()> {
        for r in records {
            self.write(&Line::Point(*r))?;
        }
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Runs a sweep writing its certificate to `path`.
///
/// With `resume`, an existing certificate for the same configuration is cut
/// back to its last complete row and the sweep continues from there; the
/// result is byte-identical to an uninterrupted run.
pub fn certify_to_file(config: &SweepConfig, path: &Path, resume: bool) -> Result<Summary> {
    config.validate()?;
    let mut records = Vec::new();
    let mut start = first_row(config)?;
    let file = if resume && path.exists() {
        let partial = read_partial(path, false)?;
        if partial.header.config != *config {
            return Err(Error::Schema(
                "resume requested but the certificate was made with a different configuration".into(),
            ));
        }
        if let Some(summary) = partial.summary.filter(|s| s.outcome == SweepOutcome::Complete) {
            info!("certificate is already complete");
            return Ok(summary);
        }
        // keep every record up to the last row end
        let keep = partial.points.iter().rposition(|(r, _)| r.row_end && r.t_row_min.is_some()).map_or(0, |k| k + 1);
        let kept: Vec<_> = partial.points[..keep].to_vec();
        let offset = partial.header_len + kept.iter().map(|(_, n)| n).sum::<u64>();
        if partial.broken_tail || keep < partial.points.len() || partial.summary.is_some() {
            info!("discarding everything after byte {offset}");
        }
        records = kept.into_iter().map(|(r, _)| r).collect();
        if let Some(last) = records.last() {
            start = next_row(config, last.j, last.q, last.t_row_min.expect("complete row"))?;
        }
        let file = OpenOptions::new().write(true).open(path).map_err(|e| io_err(path, e))?;
        file.set_len(offset).map_err(|e| io_err(path, e))?;
        let mut file = file;
        std::io::Seek::seek(&mut file, std::io::SeekFrom::End(0)).map_err(|e| io_err(path, e))?;
        info!("resuming after {} records", records.len());
        file
    } else {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = CertificateWriter::new(BufWriter::new(&file));
        w.write(&Line::Header(Header::new(*config))).map_err(|e| io_err(path, e))?;
        w.into_inner().flush().map_err(|e| io_err(path, e))?;
        file
    };
    let mut writer = CertificateWriter::new(BufWriter::new(file));
    let outcome = run_sweep_from(config, start, |row| {
        records.extend_from_slice(row);
        writer.write_rows(row).map_err(|e| io_err(path, e))
    })?;
    let summary = Summary::of(&records, outcome);
    writer.write(&Line::Summary(summary)).map_err(|e| io_err(path, e))?;
    writer.into_inner().flush().map_err(|e| io_err(path, e))?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    /// Geometry only.
    Coverage,
    /// Geometry plus a fresh certified evaluation at every point.
    Full,
}

/// A record that failed re-verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordFailure {
    pub i: u32,
    pub j: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub mode: VerifyMode,
    pub outcome: SweepOutcome,
    pub coverage: CoverageReport,
    pub records_checked: usize,
    pub failures: Vec<RecordFailure>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.outcome == SweepOutcome::Complete && self.coverage.covered && self.failures.is_empty()
    }
}

/// Relative slack for comparing replayed values with recorded ones.
const REPLAY_TOLERANCE: f64 = 1e-12;

/// Re-checks one record: the recorded bound must be below 7/3, a fresh
/// evaluation must reproduce it, and the recorded step must not exceed the
/// step the fresh bound allows.
pub fn replay_record(config: &SweepConfig, rec: &CertificateRecord) -> std::result::Result<(), String> {
    if rec.status != RecordStatus::Certified {
        return Err(format!("status is {:?}", rec.status));
    }
    if !(rec.xi_h < equilateral_ratio::<f64>()) {
        return Err(format!("recorded xi_h = {} is not below 7/3", rec.xi_h));
    }
    let opts =
        BracketOptions { levels: rec.levels, eps: config.eps, tol: config.tol, inertia_check: config.inertia_check };
    let fresh =
        certified_ratio_with(rec.point().triangle(), &opts).map_err(|e| format!("re-evaluation failed: {e}"))?;
    if (fresh.xi_h - rec.xi_h).abs() > REPLAY_TOLERANCE * rec.xi_h {
        return Err(format!("recorded xi_h = {} but re-evaluation gives {}", rec.xi_h, fresh.xi_h));
    }
    let step = config.estimate.step(fresh.xi_h, rec.q, rec.safety).map_err(|e| e.to_string())?;
    if rec.t_star > step.t_star * (1.0 + REPLAY_TOLERANCE) {
        return Err(format!("recorded t_star = {} exceeds the certified {}", rec.t_star, step.t_star));
    }
    if rec.safety != config.safety {
        return Err(format!("record safety {} differs from the header", rec.safety));
    }
    Ok(())
}

/// Structural checks that need no FEM: row minima and statuses.
fn structural_failures(records: &[CertificateRecord]) -> Vec<RecordFailure> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let j = records[start].j;
        let end = records[start..].iter().position(|r| r.j != j).map_or(records.len(), |k| start + k);
        let row = &records[start..end];
        let min = row.iter().map(|r| r.t_star).fold(f64::INFINITY, f64::min);
        for r in row {
            if let Some(t) = r.t_row_min {
                if t != min {
                    out.push(RecordFailure {
                        i: r.i,
                        j: r.j,
                        reason: format!("t_row_min {t} is not the row minimum {min}"),
                    });
                }
            }
            if r.status != RecordStatus::Certified {
                out.push(RecordFailure { i: r.i, j: r.j, reason: format!("status is {:?}", r.status) });
            }
        }
        start = end;
    }
    out
}

/// Audits the certificate at `path`.
pub fn replay_verify(path: &Path, mode: VerifyMode) -> Result<Verdict> {
    let cert = read_certificate(path)?;
    verify_certificate(&cert, mode)
}

pub fn verify_certificate(cert: &Certificate, mode: VerifyMode) -> Result<Verdict> {
    let config = &cert.header.config;
    let coverage = verify_coverage(&cert.records, &config.region)?;
    let mut failures = structural_failures(&cert.records);
    if mode == VerifyMode::Full {
        for (k, rec) in cert.records.iter().enumerate() {
            if rec.status != RecordStatus::Certified {
                continue;
            }
            if let Err(reason) = replay_record(config, rec) {
                failures.push(RecordFailure { i: rec.i, j: rec.j, reason });
            }
            if (k + 1) % 50 == 0 {
                info!("replayed {} of {} records", k + 1, cert.records.len());
            }
        }
    }
    Ok(Verdict { mode, outcome: cert.summary.outcome, coverage, records_checked: cert.records.len(), failures })
}
