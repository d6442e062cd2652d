//! Sensor history CSV: `timestamp` followed by one column per variate. Empty cells and `NaN`
//! mark missing readings, left for [`crate::validate::validate_frame`] to repair or reject.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::types::{HistoryWindow, TimeAxis, Variate};
use crate::weather::{format_timestamp, parse_number, parse_timestamp};

pub fn csv_header() -> Vec<&'static str> {
    std::iter::once("timestamp")
        .chain(Variate::ALL.iter().map(|v| v.column_name()))
        .collect()
}

pub fn load_csv<R: Read>(reader: R) -> Result<HistoryWindow> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    let expected = csv_header();
    if header != expected {
        let missing: Vec<&str> = expected
            .iter()
            .copied()
            .filter(|c| !header.iter().any(|h| h == c))
            .collect();
        return Err(Error::Schema(if missing.is_empty() {
            format!("header must be exactly {:?}", expected.join(","))
        } else {
            format!("missing column(s): {}", missing.join(", "))
        }));
    }

    let mut start = None;
    let mut step = None;
    let mut prev = None;
    let mut columns: [Vec<f64>; Variate::COUNT] = Default::default();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let ts = parse_timestamp(&rec[0]).ok_or_else(|| Error::Parse {
            line,
            msg: format!("bad timestamp {:?}", &rec[0]),
        })?;
        if let Some(p) = prev {
            let dt = ts.signed_duration_since(p).num_seconds();
            if dt <= 0 {
                return Err(Error::Parse {
                    line,
                    msg: "timestamps not strictly increasing".into(),
                });
            }
            match step {
                None => step = Some(dt),
                Some(s) if s != dt => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("non-uniform spacing: {dt} s (expected {s})"),
                    })
                }
                _ => {}
            }
        } else {
            start = Some(ts);
        }
        prev = Some(ts);
        for (j, v) in Variate::ALL.iter().enumerate() {
            let cell = rec[j + 1].trim();
            let x = if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                f64::NAN
            } else {
                parse_number(cell, line, v.column_name())?
            };
            columns[j].push(x);
        }
    }
    let start = start.ok_or(Error::Empty("history csv has no rows"))?;
    let axis = TimeAxis::new(start, step.unwrap_or(crate::types::DEFAULT_STEP_SECS), columns[0].len())?;
    HistoryWindow::new(axis, columns)
}

pub fn write_csv<W: Write>(frame: &HistoryWindow, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(csv_header())?;
    for i in 0..frame.len() {
        let mut rec = vec![format_timestamp(frame.axis().timestamp(i))];
        rec.extend(frame.row(i).iter().map(|x| {
            if x.is_nan() {
                String::new()
            } else {
                x.to_string()
            }
        }));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
