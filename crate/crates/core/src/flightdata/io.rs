use std::io::{Read, Write};
use std::path::Path;

use super::frame::{repair_gaps, FlightFrame, LineId};
use super::schema::ChannelSchema;
use super::{FlightDataError, Result};
use crate::Real;

pub const TIME_COLUMN: &str = "tt";
pub const LINE_COLUMN: &str = "line";

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Interpolate runs of at most this many non-finite samples instead of failing.
    pub repair_max_run: Option<usize>,
}

/// Loads a flight file strictly: any non-finite sample is an error.
pub fn load_flight<T: Real>(path: impl AsRef<Path>, schema: &ChannelSchema) -> Result<FlightFrame<T>> {
    load_flight_with(path, schema, LoadOptions::default())
}

pub fn load_flight_with<T: Real>(
    path: impl AsRef<Path>,
    schema: &ChannelSchema,
    options: LoadOptions,
) -> Result<FlightFrame<T>> {
    let path = path.as_ref();
    let flight_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    read_flight(std::fs::File::open(path)?, flight_id, schema, options)
}

/// Parses a flight from any reader. Columns other than `tt` and `line` become channels.
pub fn read_flight<T: Real, R: Read>(
    reader: R,
    flight_id: String,
    schema: &ChannelSchema,
    options: LoadOptions,
) -> Result<FlightFrame<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let t_col = col(TIME_COLUMN).ok_or_else(|| FlightDataError::MissingChannel(TIME_COLUMN.into()))?;
    let line_col = col(LINE_COLUMN).ok_or_else(|| FlightDataError::MissingChannel(LINE_COLUMN.into()))?;
    for name in schema.names() {
        if col(name).is_none() {
            return Err(FlightDataError::MissingChannel(name.to_string()));
        }
    }

    let mut t = Vec::new();
    let mut line = Vec::new();
    let mut data: Vec<Vec<T>> = vec![Vec::new(); headers.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| FlightDataError::Parse {
                row: row + 1,
                column: headers.get(j).cloned().unwrap_or_default(),
                value: field.to_string(),
            })?;
            if j == t_col {
                t.push(v);
            } else if j == line_col {
                line.push(LineId(v));
            } else {
                data[j].push(T::from_f64(v).unwrap_or_else(T::nan));
            }
        }
    }
    for (j, name) in [(t_col, TIME_COLUMN), (line_col, LINE_COLUMN)] {
        let bad = if j == t_col {
            t.iter().position(|v| !v.is_finite())
        } else {
            line.iter().position(|v| !v.0.is_finite())
        };
        if let Some(index) = bad {
            return Err(FlightDataError::NonFiniteSample { channel: name.into(), index });
        }
    }
    if t.len() < 2 {
        return Err(FlightDataError::TooFewSamples(t.len()));
    }
    let fs = ((1.0 / (t[1] - t[0])) * 1e6).round() / 1e6;
    let channels: Vec<(String, Vec<T>)> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != t_col && *j != line_col)
        .map(|(j, h)| (h.clone(), std::mem::take(&mut data[j])))
        .collect();
    match options.repair_max_run {
        None => FlightFrame::new(flight_id, fs, t, line, channels),
        Some(max_run) => {
            let raw = FlightFrame::from_parts_unchecked(flight_id, fs, t, line, channels)?;
            repair_gaps(&raw, max_run)
        }
    }
}

/// Writes `frame` as comma-separated text with `tt` and `line` leading. Values use the
/// shortest representation that parses back to the same bits.
pub fn write_flight<T: Real>(frame: &FlightFrame<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_flight_to(frame, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_flight_to<T: Real, W: Write>(frame: &FlightFrame<T>, w: &mut W) -> Result<()> {
    let names: Vec<&str> = frame.channel_names().collect();
    let columns: Vec<&[T]> = names.iter().map(|n| frame.channel(n).expect("listed")).collect();
    write!(w, "{TIME_COLUMN},{LINE_COLUMN}")?;
    for n in &names {
        write!(w, ",{n}")?;
    }
    writeln!(w)?;
    for i in 0..frame.len() {
        write!(w, "{},{}", frame.time()[i], frame.lines()[i])?;
        for c in &columns {
            write!(w, ",{}", c[i].as_f64())?;
        }
        writeln!(w)?;
    }
    Ok(())
}
