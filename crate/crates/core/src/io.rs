//! CSV readers and writers for trajectories, anomaly series and filter logs.
//!
//! Every file is UTF-8 with a header row and LF line endings. Floats are
//! written in their shortest round-trip decimal form.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Terminator, WriterBuilder};

use crate::error::{Error, Result};
use crate::fusion::JointSeries;
use crate::mjpf::StepResult;
use crate::scenario::{LabeledTrajectory, SampleLabel};
use crate::types::{AnomalyEntry, AnomalySeries, Observation, SuperstateLabel, Trajectory};

pub const TRAJECTORY_HEADER: [&str; 4] = ["k", "t", "x", "y"];
pub const LABELED_HEADER: [&str; 5] = ["k", "t", "x", "y", "label"];
pub const SERIES_HEADER: [&str; 3] = ["k", "superstate", "score"];
pub const JOINT_HEADER: [&str; 6] = [
    "k",
    "sl_superstate",
    "sl_score",
    "pl_superstate",
    "pl_score",
    "flag",
];
pub const STEP_LOG_HEADER: [&str; 5] = ["k", "map_superstate", "anomaly", "dummy_fraction", "ess"];

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    parse_err(line, e.to_string())
}

fn field<T: std::str::FromStr>(rec: &StringRecord, i: usize, name: &str, line: u64) -> Result<T> {
    let raw = rec
        .get(i)
        .ok_or_else(|| parse_err(line, format!("missing column `{name}`")))?;
    raw.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse `{name}` from {raw:?}")))
}

/// Reads all rows, checking that the header matches one of `accepted`.
/// Returns the index of the matched header and the rows with their line numbers.
fn read_rows<R: Read>(reader: R, accepted: &[&[&str]]) -> Result<(usize, Vec<(u64, StringRecord)>)> {
    let mut rdr = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(csv_err)?,
        None => return Err(parse_err(1, "empty file: missing header")),
    };
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let which = accepted
        .iter()
        .position(|h| names == *h)
        .ok_or_else(|| {
            parse_err(
                1,
                format!("unexpected header {:?}, expected {:?}", names, accepted[0]),
            )
        })?;
    let width = accepted[which].len();
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec.get(0).is_some_and(|s| s.trim().is_empty()) {
            continue;
        }
        if rec.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        rows.push((line, rec));
    }
    Ok((which, rows))
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .from_writer(w)
}

fn parse_observation(rec: &StringRecord, line: u64) -> Result<Observation> {
    Ok(Observation::new(
        field(rec, 0, "k", line)?,
        field(rec, 1, "t", line)?,
        field(rec, 2, "x", line)?,
        field(rec, 3, "y", line)?,
    ))
}

/// Parses a trajectory from CSV text with or without a trailing `label` column.
pub fn read_trajectory<R: Read>(reader: R) -> Result<Trajectory> {
    let (_, rows) = read_rows(reader, &[&TRAJECTORY_HEADER, &LABELED_HEADER])?;
    let samples = rows
        .iter()
        .map(|(line, rec)| parse_observation(rec, *line))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(samples)
}

pub fn read_labeled<R: Read>(reader: R) -> Result<LabeledTrajectory> {
    let (_, rows) = read_rows(reader, &[&LABELED_HEADER])?;
    let mut samples = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        samples.push(parse_observation(rec, *line)?);
        let code = rec.get(4).unwrap_or("").trim();
        labels.push(
            SampleLabel::from_code(code)
                .ok_or_else(|| parse_err(*line, format!("unknown label {code:?}")))?,
        );
    }
    LabeledTrajectory::new(Trajectory::new(samples)?, labels)
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    read_trajectory(File::open(path)?)
}

pub fn load_labeled(path: &Path) -> Result<LabeledTrajectory> {
    read_labeled(File::open(path)?)
}

pub fn write_trajectory<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let mut out = writer(w);
    out.write_record(TRAJECTORY_HEADER).map_err(csv_err)?;
    for o in traj.samples() {
        out.write_record([
            o.k.to_string(),
            o.t.to_string(),
            o.position.x.to_string(),
            o.position.y.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_labeled<W: Write>(w: W, lt: &LabeledTrajectory) -> Result<()> {
    let mut out = writer(w);
    out.write_record(LABELED_HEADER).map_err(csv_err)?;
    for (o, l) in lt.trajectory.samples().iter().zip(&lt.labels) {
        out.write_record([
            o.k.to_string(),
            o.t.to_string(),
            o.position.x.to_string(),
            o.position.y.to_string(),
            l.code().to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_labeled(path: &Path, lt: &LabeledTrajectory) -> Result<()> {
    write_labeled(BufWriter::new(File::create(path)?), lt)
}

pub fn save_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    write_trajectory(BufWriter::new(File::create(path)?), traj)
}

pub fn read_series<R: Read>(reader: R) -> Result<AnomalySeries> {
    let (_, rows) = read_rows(reader, &[&SERIES_HEADER])?;
    let mut entries = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let label: i64 = field(rec, 1, "superstate", *line)?;
        entries.push(AnomalyEntry {
            k: field(rec, 0, "k", *line)?,
            superstate: SuperstateLabel::from_wire(label)
                .map_err(|e| parse_err(*line, e.to_string()))?,
            score: field(rec, 2, "score", *line)?,
        });
    }
    AnomalySeries::new(entries)
}

pub fn write_series<W: Write>(w: W, series: &AnomalySeries) -> Result<()> {
    let mut out = writer(w);
    out.write_record(SERIES_HEADER).map_err(csv_err)?;
    for e in series.entries() {
        out.write_record([
            e.k.to_string(),
            e.superstate.to_wire().to_string(),
            e.score.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_series(path: &Path) -> Result<AnomalySeries> {
    read_series(File::open(path)?)
}

pub fn save_series(path: &Path, series: &AnomalySeries) -> Result<()> {
    write_series(BufWriter::new(File::create(path)?), series)
}

pub fn write_step_log<W: Write>(w: W, steps: &[StepResult]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(STEP_LOG_HEADER).map_err(csv_err)?;
    for s in steps {
        out.write_record([
            s.k.to_string(),
            s.map_superstate.to_wire().to_string(),
            s.anomaly.to_string(),
            s.dummy_fraction.to_string(),
            s.ess.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_step_log(path: &Path, steps: &[StepResult]) -> Result<()> {
    write_step_log(BufWriter::new(File::create(path)?), steps)
}

/// Writes the joined series with one 0/1 flag per entry.
pub fn write_joint<W: Write>(w: W, j: &JointSeries, flags: &[bool]) -> Result<()> {
    if flags.len() != j.len() {
        return Err(Error::invalid(format!(
            "{} flags for {} joint entries",
            flags.len(),
            j.len()
        )));
    }
    let mut out = writer(w);
    out.write_record(JOINT_HEADER).map_err(csv_err)?;
    for (e, &f) in j.entries().iter().zip(flags) {
        out.write_record([
            e.k.to_string(),
            e.sl_superstate.to_wire().to_string(),
            e.sl_score.to_string(),
            e.pl_superstate.to_wire().to_string(),
            e.pl_score.to_string(),
            u8::from(f).to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_joint(path: &Path, j: &JointSeries, flags: &[bool]) -> Result<()> {
    write_joint(BufWriter::new(File::create(path)?), j, flags)
}
