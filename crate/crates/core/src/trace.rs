//! Time-space trace records and their CSV form.
//!
//! A trace is the machine-readable description of one engine run: one row
//! per dispatched event plus any annotations the components add. Rows are
//! appended in dispatch order, so time never decreases along the file.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::timespace::SpatialPoint;

/// One row of a run trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    /// Append-order sequence number, unique within a run.
    pub seq: u64,
    /// Simulated time of the record, seconds.
    pub time: f64,
    /// Identifier of the component the record belongs to.
    pub component: String,
    /// Event kind or annotation tag (`note`, `error`).
    pub kind: String,
    /// Position of the component in scenario space.
    pub position: SpatialPoint,
    /// Free-form description.
    pub detail: String,
}

/// Writes a trace as CSV with the exact column set
/// `seq,time,component,kind,x,y,detail`, preceded by a comment line that
/// pins the scenario length unit and the run seed.
pub fn write_trace_csv<W: Write>(
    out: W,
    records: &[TraceRecord],
    length_unit: &str,
    seed: u64,
) -> Result<()> {
    let mut out = out;
    writeln!(out, "# length_unit={length_unit} seed={seed}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["seq", "time", "component", "kind", "x", "y", "detail"])
        .map_err(csv_io)?;
    for r in records {
        w.write_record([
            r.seq.to_string(),
            r.time.to_string(),
            r.component.clone(),
            r.kind.clone(),
            r.position.x.to_string(),
            r.position.y.to_string(),
            r.detail.clone(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> crate::error::Error {
    crate::error::Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_pinned_columns_and_header_comment() {
        let records = vec![TraceRecord {
            seq: 0,
            time: 1.5,
            component: "core-left".into(),
            kind: "signal-arrival".into(),
            position: SpatialPoint::new(-0.5, 0.0, 0.0).unwrap(),
            detail: "request, hop count 2".into(),
        }];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &records, "au", 42).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# length_unit=au seed=42");
        assert_eq!(lines.next().unwrap(), "seq,time,component,kind,x,y,detail");
        assert_eq!(
            lines.next().unwrap(),
            "0,1.5,core-left,signal-arrival,-0.5,0,\"request, hop count 2\""
        );
    }
}
