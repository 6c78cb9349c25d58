//! Trace export: newline-delimited JSON events and flat CSV tables.

use std::io::Write;

use anyhow::Result;
use ioamc_core::sim::{Event, SimTrace};
use serde::Serialize;

#[derive(Serialize)]
struct EventRow {
    time: u64,
    kind: &'static str,
    subject: Option<u32>,
    detail: String,
}

impl From<&Event> for EventRow {
    fn from(e: &Event) -> Self {
        EventRow {
            time: e.time,
            kind: e.kind.as_str(),
            subject: e.subject,
            detail: e.detail.to_string(),
        }
    }
}

pub fn write_ndjson<W: Write>(trace: &SimTrace, mut out: W) -> Result<()> {
    for e in &trace.events {
        serde_json::to_writer(&mut out, &EventRow::from(e))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Columns `time,kind,subject,detail`; an empty subject is a system event.
pub fn write_csv<W: Write>(trace: &SimTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in &trace.events {
        w.serialize(EventRow::from(e))?;
    }
    if trace.events.is_empty() {
        w.write_record(["time", "kind", "subject", "detail"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn events_csv(trace: &SimTrace) -> String {
    let mut buf = Vec::new();
    write_csv(trace, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

#[derive(Serialize)]
struct SegmentRow {
    subject: u32,
    pibs: bool,
    serving: u32,
    start: u64,
    end: u64,
}

/// Executed intervals, one row each, for Gantt plots.
pub fn write_segments_csv<W: Write>(trace: &SimTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in &trace.segments {
        w.serialize(SegmentRow {
            subject: s.subject,
            pibs: s.is_pibs,
            serving: s.serving,
            start: s.start,
            end: s.end,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JobRow {
    server: u32,
    crit: &'static str,
    seq: u32,
    release: u64,
    deadline: u64,
    finish: Option<u64>,
    missed: bool,
}

pub fn write_jobs_csv<W: Write>(trace: &SimTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for j in &trace.jobs {
        w.serialize(JobRow {
            server: j.server,
            crit: j.criticality.as_str(),
            seq: j.seq,
            release: j.release,
            deadline: j.deadline,
            finish: j.finish,
            missed: j.missed,
        })?;
    }
    w.flush()?;
    Ok(())
}
