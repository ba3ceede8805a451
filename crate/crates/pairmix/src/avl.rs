//! Delimited AVL event files: one arrival or departure report per row.

use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime};

use crate::error::{CliError, Result};

pub const TIME_FORMAT: &str = "%Y%m%d, %H:%M:%S";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdFlag {
    Departure = 0,
    Arrival = 1,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AvlEvent {
    pub record_id: String,
    pub vehicle_id: String,
    pub trip_id: String,
    pub route_id: String,
    pub route_name: String,
    pub direction_id: String,
    pub stop_id: String,
    pub stop_name: String,
    pub ad_flag: AdFlag,
    /// Local time as seconds since 1970-01-01 00:00:00, no zone attached.
    pub ad_time: i64,
}

/// Header names for each field. Defaults follow the operator export.
#[derive(Debug, Clone)]
pub struct Schema {
    pub record_id: String,
    pub vehicle_id: String,
    pub trip_id: String,
    pub route_id: String,
    pub route_name: String,
    pub direction_id: String,
    pub stop_id: String,
    pub stop_name: String,
    pub ad_flag: String,
    pub ad_time: String,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            record_id: "ID".into(),
            vehicle_id: "OBUID".into(),
            trip_id: "TRIP_ID".into(),
            route_id: "ROUTE_ID".into(),
            route_name: "ROUTE_NAME".into(),
            direction_id: "ROUTESUB_ID".into(),
            stop_id: "ROUTE_STA_ID".into(),
            stop_name: "STOP_NAME".into(),
            ad_flag: "AD_FLAG".into(),
            ad_time: "AD_TIME".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    /// 1-based data row, header excluded.
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct ParsedAvl {
    pub events: Vec<AvlEvent>,
    pub rejects: Vec<Reject>,
}

pub fn parse_time(s: &str) -> Option<i64> {
    NaiveDateTime::parse_from_str(s.trim(), TIME_FORMAT).ok().map(|t| t.and_utc().timestamp())
}

pub fn format_time(t: i64) -> String {
    DateTime::from_timestamp(t, 0).expect("timestamp in range").naive_utc().format(TIME_FORMAT).to_string()
}

struct Columns {
    required: [usize; 8],
    route_name: Option<usize>,
    stop_name: Option<usize>,
}

fn locate(header: &csv::StringRecord, schema: &Schema) -> Result<Columns> {
    let find = |name: &str| header.iter().position(|h| h.trim() == name);
    let names = [
        &schema.record_id,
        &schema.vehicle_id,
        &schema.trip_id,
        &schema.route_id,
        &schema.direction_id,
        &schema.stop_id,
        &schema.ad_flag,
        &schema.ad_time,
    ];
    let mut required = [0; 8];
    let mut absent = Vec::new();
    for (slot, name) in required.iter_mut().zip(names) {
        match find(name) {
            Some(i) => *slot = i,
            None => absent.push(name.as_str()),
        }
    }
    if !absent.is_empty() {
        return Err(CliError::Schema(format!("missing column(s) {}", absent.join(", "))));
    }
    Ok(Columns { required, route_name: find(&schema.route_name), stop_name: find(&schema.stop_name) })
}

/// Guesses tab or comma from the header line.
pub fn sniff_delimiter(head: &[u8]) -> u8 {
    let line = head.split(|b| *b == b'\n').next().unwrap_or_default();
    if line.contains(&b'\t') {
        b'\t'
    } else {
        b','
    }
}

/// Reads every row; rows that cannot be understood go to `rejects`.
pub fn parse_avl<R: Read>(mut input: R, schema: &Schema) -> Result<ParsedAvl> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf).map_err(|e| CliError::Schema(format!("unreadable input: {e}")))?;
    if buf.iter().all(u8::is_ascii_whitespace) {
        return Ok(ParsedAvl::default());
    }
    let mut rdr = csv::ReaderBuilder::new().delimiter(sniff_delimiter(&buf)).flexible(true).from_reader(&buf[..]);
    let header = rdr.headers().map_err(|e| CliError::Schema(format!("bad header: {e}")))?.clone();
    let cols = locate(&header, schema)?;
    let mut out = ParsedAvl::default();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                out.rejects.push(Reject { row, reason: format!("unreadable row: {e}") });
                continue;
            }
        };
        match event_from(&rec, &cols) {
            Ok(ev) => out.events.push(ev),
            Err(reason) => out.rejects.push(Reject { row, reason }),
        }
    }
    Ok(out)
}

fn event_from(rec: &csv::StringRecord, cols: &Columns) -> std::result::Result<AvlEvent, String> {
    let need = cols.required.iter().max().map_or(0, |m| m + 1);
    if rec.len() < need {
        return Err(format!("expected at least {need} fields, found {}", rec.len()));
    }
    let [id, obu, trip, route, dir, stop, flag, time] = cols.required.map(|c| rec[c].trim().to_string());
    let ad_flag = match flag.as_str() {
        "1" => AdFlag::Arrival,
        "0" => AdFlag::Departure,
        _ => return Err("invalid flag".into()),
    };
    let ad_time = parse_time(&time).ok_or_else(|| format!("invalid timestamp {time:?}"))?;
    if obu.is_empty() || trip.is_empty() || stop.is_empty() {
        return Err("empty identifier".into());
    }
    let opt = |c: Option<usize>| c.and_then(|c| rec.get(c)).map(|s| s.trim().to_string()).unwrap_or_default();
    Ok(AvlEvent {
        record_id: id,
        vehicle_id: obu,
        trip_id: trip,
        route_id: route,
        route_name: opt(cols.route_name),
        direction_id: dir,
        stop_id: stop,
        stop_name: opt(cols.stop_name),
        ad_flag,
        ad_time,
    })
}

pub fn write_avl<W: Write>(out: W, events: &[AvlEvent]) -> csv::Result<()> {
    let s = Schema::default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        &s.record_id,
        &s.vehicle_id,
        &s.trip_id,
        &s.route_id,
        &s.route_name,
        &s.direction_id,
        &s.stop_id,
        &s.stop_name,
        &s.ad_flag,
        &s.ad_time,
    ])?;
    for e in events {
        let flag = (e.ad_flag as u8).to_string();
        w.write_record([
            e.record_id.as_str(),
            &e.vehicle_id,
            &e.trip_id,
            &e.route_id,
            &e.route_name,
            &e.direction_id,
            &e.stop_id,
            &e.stop_name,
            &flag,
            &format_time(e.ad_time),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rejects<W: Write>(mut out: W, rejects: &[Reject]) -> std::io::Result<()> {
    writeln!(out, "row\treason")?;
    for r in rejects {
        writeln!(out, "{}\t{}", r.row, r.reason)?;
    }
    Ok(())
}
