//! CASAS-style raw event logs.
//!
//! Each line holds whitespace-separated `date time sensor value` fields,
//! optionally followed by an activity annotation: either `Activity begin`,
//! `Activity end`, or a bare per-line activity name.

use std::io::BufRead;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label given to events outside every annotated activity span.
pub const NO_LABEL: &str = "No Label";

const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S%.f";

/// One timestamped sensor reading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorEvent {
    pub timestamp: NaiveDateTime,
    pub sensor_id: String,
    pub value: String,
    pub truth_label: Option<String>,
}

impl SensorEvent {
    pub fn new(timestamp: NaiveDateTime, sensor_id: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            timestamp,
            sensor_id: sensor_id.into(),
            value: value.into(),
            truth_label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.truth_label = Some(label.into());
        self
    }

    pub fn day_key(&self) -> NaiveDate {
        self.timestamp.date()
    }

    /// Formats the event as a single log line that [`parse_event_log`] reads back.
    pub fn to_log_line(&self) -> String {
        let mut line = format!(
            "{} {} {}",
            self.timestamp.format(TIMESTAMP_FORMAT),
            self.sensor_id,
            self.value
        );
        if let Some(label) = &self.truth_label {
            line.push(' ');
            line.push_str(label);
        }
        line
    }
}

/// A line that could not be turned into an event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedLine {
    pub line_number: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub lines_read: usize,
    pub skipped: Vec<SkippedLine>,
    /// Number of events whose timestamp is earlier than the preceding event.
    pub out_of_order: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedLog {
    pub events: Vec<SensorEvent>,
    pub report: ParseReport,
}

enum Annotation {
    None,
    Begin(String),
    End(String),
    Line(String),
}

fn parse_timestamp(date: &str, time: &str) -> Option<NaiveDateTime> {
    let joined = format!("{date} {time}");
    NaiveDateTime::parse_from_str(&joined, TIMESTAMP_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(&joined, "%Y-%m-%d %H:%M:%S"))
        .ok()
}

fn parse_annotation(rest: &[&str]) -> Annotation {
    match rest {
        [] => Annotation::None,
        [.., marker] if rest.len() >= 2 && marker.eq_ignore_ascii_case("begin") => {
            Annotation::Begin(rest[..rest.len() - 1].join(" "))
        }
        [.., marker] if rest.len() >= 2 && marker.eq_ignore_ascii_case("end") => {
            Annotation::End(rest[..rest.len() - 1].join(" "))
        }
        _ => Annotation::Line(rest.join(" ")),
    }
}

/// Parses a line-oriented event log.
///
/// Input order is preserved. Begin/end annotation markers are expanded into
/// per-event truth labels; when the log carries any annotation at all, events
/// outside every span are labeled [`NO_LABEL`], otherwise labels stay `None`.
pub fn parse_event_log<R: BufRead>(reader: R) -> Result<ParsedLog> {
    let mut events = Vec::new();
    let mut report = ParseReport::default();
    let mut active: Vec<String> = Vec::new();
    let mut annotated = false;

    for (idx, line) in reader.lines().enumerate() {
        let line_number = idx + 1;
        let line = line.map_err(|e| Error::Format {
            what: "event log",
            detail: format!("line {line_number}: {e}"),
        })?;
        report.lines_read += 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 4 {
            report.skipped.push(SkippedLine {
                line_number,
                reason: format!("expected at least 4 fields, found {}", fields.len()),
            });
            continue;
        }
        let Some(timestamp) = parse_timestamp(fields[0], fields[1]) else {
            report.skipped.push(SkippedLine {
                line_number,
                reason: format!("unparseable timestamp '{} {}'", fields[0], fields[1]),
            });
            continue;
        };

        let label = match parse_annotation(&fields[4..]) {
            Annotation::None => active.last().cloned(),
            Annotation::Begin(name) => {
                annotated = true;
                active.retain(|a| a != &name);
                active.push(name.clone());
                Some(name)
            }
            Annotation::End(name) => {
                annotated = true;
                match active.iter().rposition(|a| a == &name) {
                    Some(pos) => {
                        active.remove(pos);
                    }
                    None => report
                        .warnings
                        .push(format!("line {line_number}: '{name} end' without matching begin")),
                }
                Some(name)
            }
            Annotation::Line(name) => {
                annotated = true;
                Some(name)
            }
        };

        if let Some(prev) = events.last().map(|e: &SensorEvent| e.timestamp) {
            if timestamp < prev {
                report.out_of_order += 1;
            }
        }
        events.push(SensorEvent {
            timestamp,
            sensor_id: fields[2].to_string(),
            value: fields[3].to_string(),
            truth_label: label,
        });
    }

    if annotated {
        for event in &mut events {
            event.truth_label.get_or_insert_with(|| NO_LABEL.to_string());
        }
    }
    if events.is_empty() {
        report.warnings.push("log contains no events".to_string());
        tracing::warn!("event log contains no events");
    }
    if !report.skipped.is_empty() {
        tracing::warn!(count = report.skipped.len(), "skipped malformed log lines");
    }
    if report.out_of_order > 0 {
        report.warnings.push(format!(
            "{} events out of timestamp order; stably sorted",
            report.out_of_order
        ));
        tracing::warn!(count = report.out_of_order, "out-of-order timestamps in event log");
    }
    Ok(ParsedLog { events, report })
}

/// Stable sort by timestamp.
pub fn sort_events(events: &mut [SensorEvent]) {
    events.sort_by_key(|e| e.timestamp);
}

/// Serializes events in the raw log layout, one per line.
pub fn format_event_log(events: &[SensorEvent]) -> String {
    let mut out = String::new();
    for event in events {
        out.push_str(&event.to_log_line());
        out.push('\n');
    }
    out
}

/// Serializes labeled events with CASAS `Label begin` / `Label end` markers around each run.
///
/// Runs labeled `None` or [`NO_LABEL`] carry no annotation.
pub fn format_annotated_log(events: &[SensorEvent]) -> String {
    let label = |i: usize| {
        events[i]
            .truth_label
            .as_deref()
            .filter(|l| *l != NO_LABEL)
    };
    let mut out = String::new();
    for (i, event) in events.iter().enumerate() {
        out.push_str(&format!(
            "{} {} {}",
            event.timestamp.format(TIMESTAMP_FORMAT),
            event.sensor_id,
            event.value
        ));
        if let Some(l) = label(i) {
            let starts = i == 0 || label(i - 1) != Some(l);
            let ends = i + 1 == events.len() || label(i + 1) != Some(l);
            match (starts, ends) {
                (true, true) => out.push_str(&format!(" {l}")),
                (true, false) => out.push_str(&format!(" {l} begin")),
                (false, true) => out.push_str(&format!(" {l} end")),
                (false, false) => {}
            }
        }
        out.push('\n');
    }
    out
}

/// Whether the sensor id names a temperature sensor (`T` prefix followed by a digit).
pub fn is_temperature_sensor(sensor_id: &str) -> bool {
    let mut chars = sensor_id.chars();
    matches!(chars.next(), Some('T')) && chars.next().is_some_and(|c| c.is_ascii_digit())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ParsedLog {
        parse_event_log(text.as_bytes()).unwrap()
    }

    #[test]
    fn parses_plain_casas_line() {
        let log = parse("2009-12-11 08:45:00.00 M003 ON\n");
        assert_eq!(log.events.len(), 1);
        let e = &log.events[0];
        assert_eq!(e.sensor_id, "M003");
        assert_eq!(e.value, "ON");
        assert_eq!(e.truth_label, None);
        assert_eq!(e.timestamp.to_string(), "2009-12-11 08:45:00");
    }

    #[test]
    fn empty_input_yields_no_events_and_a_warning() {
        let log = parse("");
        assert!(log.events.is_empty());
        assert_eq!(log.report.warnings.len(), 1);
    }

    #[test]
    fn short_line_is_skipped() {
        let log = parse("garbage\n");
        assert!(log.events.is_empty());
        assert_eq!(log.report.skipped.len(), 1);
        assert_eq!(log.report.skipped[0].line_number, 1);
    }

    #[test]
    fn bad_timestamp_is_skipped() {
        let log = parse("2009-13-45 08:45:00 M003 ON\n2009-12-11 08:45:01 M003 OFF\n");
        assert_eq!(log.events.len(), 1);
        assert_eq!(log.report.skipped[0].line_number, 1);
    }

    #[test]
    fn timestamps_without_fraction_and_with_microseconds() {
        let log = parse("2009-06-10 03:20:59 M006 ON\n2009-10-16 00:01:04.000059 M017 ON\n");
        assert_eq!(log.events.len(), 2);
        assert_eq!(log.events[1].timestamp.and_utc().timestamp_subsec_micros(), 59);
    }

    #[test]
    fn begin_end_markers_expand_to_event_labels() {
        let text = "\
2009-10-16 08:00:00 M001 ON
2009-10-16 08:00:01 M002 ON Kitchen_Activity begin
2009-10-16 08:00:02 M002 OFF
2009-10-16 08:00:03 M003 ON Kitchen_Activity end
2009-10-16 08:00:04 M003 OFF
";
        let labels: Vec<_> = parse(text)
            .events
            .into_iter()
            .map(|e| e.truth_label.unwrap())
            .collect();
        assert_eq!(
            labels,
            ["No Label", "Kitchen_Activity", "Kitchen_Activity", "Kitchen_Activity", "No Label"]
        );
    }

    #[test]
    fn nested_spans_label_with_innermost() {
        let text = "\
2009-10-16 08:00:00 M001 ON Sleep begin
2009-10-16 08:00:01 M002 ON Bed_to_Toilet begin
2009-10-16 08:00:02 M002 OFF Bed_to_Toilet end
2009-10-16 08:00:03 M001 OFF
2009-10-16 08:00:04 M001 ON Sleep end
";
        let labels: Vec<_> = parse(text)
            .events
            .into_iter()
            .map(|e| e.truth_label.unwrap())
            .collect();
        assert_eq!(labels, ["Sleep", "Bed_to_Toilet", "Bed_to_Toilet", "Sleep", "Sleep"]);
    }

    #[test]
    fn out_of_order_is_reported_and_sorted_stably() {
        let text = "\
2009-10-16 08:00:02 M001 ON
2009-10-16 08:00:01 M002 ON
2009-10-16 08:00:01 M003 ON
";
        let mut log = parse(text);
        assert_eq!(log.report.out_of_order, 1);
        sort_events(&mut log.events);
        let ids: Vec<_> = log.events.iter().map(|e| e.sensor_id.as_str()).collect();
        assert_eq!(ids, ["M002", "M003", "M001"]);
    }

    #[test]
    fn temperature_sensor_detection() {
        assert!(is_temperature_sensor("T002"));
        assert!(!is_temperature_sensor("M002"));
        assert!(!is_temperature_sensor("Tx"));
    }
}
