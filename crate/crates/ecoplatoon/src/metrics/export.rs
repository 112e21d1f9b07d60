//! Plot-ready text exports of rollout logs.
//!
//! All exports are comma-separated with a header line; floats use the
//! shortest exact representation, so re-parsing reproduces the values
//! bit-for-bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::metrics::{EnergyRecord, Histogram, MetricsError, RunLog, StepRecord};

/// `t,id,x,v` rows sorted by (t, id); heatmap-ready.
pub fn export_spacetime(log: &RunLog) -> String {
    let mut rows: Vec<&StepRecord> = log.steps.iter().collect();
    rows.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.id.cmp(&b.id)));
    let mut out = String::from("t,id,x,v\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.t, r.id, r.x, r.v);
    }
    out
}

/// Re-ingests a spacetime export. Accelerations are not part of the
/// format and come back as zero.
pub fn parse_spacetime(text: &str) -> Result<Vec<StepRecord>, MetricsError> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if lineno == 0 {
            if line != "t,id,x,v" {
                return Err(MetricsError::Parse {
                    line: 1,
                    msg: format!("expected header `t,id,x,v`, found {line:?}"),
                });
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(MetricsError::Parse {
                line: lineno + 1,
                msg: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let parse_f = |s: &str, what: &str| -> Result<f64, MetricsError> {
            s.parse().map_err(|e| MetricsError::Parse {
                line: lineno + 1,
                msg: format!("bad {what}: {e}"),
            })
        };
        rows.push(StepRecord {
            t: parse_f(fields[0], "t")?,
            id: fields[1].parse().map_err(|e| MetricsError::Parse {
                line: lineno + 1,
                msg: format!("bad id: {e}"),
            })?,
            x: parse_f(fields[2], "x")?,
            v: parse_f(fields[3], "v")?,
            a: 0.0,
        });
    }
    Ok(rows)
}

/// Wide-format speed traces: one row per instant, one column per vehicle.
pub fn export_speed_traces(log: &RunLog) -> String {
    let by_vehicle = log.by_vehicle();
    let ids: Vec<usize> = by_vehicle.keys().copied().collect();
    let mut by_time: BTreeMap<u64, BTreeMap<usize, f64>> = BTreeMap::new();
    for r in &log.steps {
        by_time.entry(r.t.to_bits()).or_default().insert(r.id, r.v);
    }
    let mut out = String::from("t");
    for id in &ids {
        let _ = write!(out, ",v{id}");
    }
    out.push('\n');
    let mut instants: Vec<(f64, &BTreeMap<usize, f64>)> = by_time
        .iter()
        .map(|(bits, m)| (f64::from_bits(*bits), m))
        .collect();
    instants.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (t, speeds) in instants {
        let _ = write!(out, "{t}");
        for id in &ids {
            match speeds.get(id) {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

/// `t,id,battery,comm,migration,compute` rows in ledger order.
pub fn export_energy_ledger(ledger: &[EnergyRecord]) -> String {
    let mut out = String::from("t,id,battery,comm,migration,compute\n");
    for e in ledger {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            e.t, e.id, e.battery, e.comm, e.migration, e.compute
        );
    }
    out
}

/// `bin_lower_edge,count` rows for a histogram.
pub fn export_histogram(hist: &Histogram) -> String {
    let mut out = String::from("bin_lower_edge,count\n");
    for (bin, count) in &hist.counts {
        let _ = writeln!(out, "{},{}", hist.edge(*bin), count);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::throughput;
    use crate::sim::ScenarioConfig;

    fn two_vehicle_log() -> RunLog {
        let mut steps = Vec::new();
        for k in 0..3 {
            let t = k as f64 * 0.1;
            for id in 0..2usize {
                steps.push(StepRecord {
                    t,
                    id,
                    x: 100.0 * (1 - id) as f64 + 20.0 * t + 0.125 * k as f64,
                    v: 20.0 + id as f64 * 0.3,
                    a: 0.1 * k as f64,
                });
            }
        }
        RunLog {
            seed: 7,
            scenario: ScenarioConfig::default(),
            steps,
            energy: Vec::new(),
            collision: false,
        }
    }

    #[test]
    fn spacetime_has_header_and_sorted_rows() {
        let log = two_vehicle_log();
        let text = export_spacetime(&log);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,id,x,v");
        assert_eq!(lines.len(), 1 + 6);
        // Sorted by (t, id): ids alternate 0,1 within each instant.
        assert!(lines[1].starts_with("0,0,"));
        assert!(lines[2].starts_with("0,1,"));
    }

    #[test]
    fn spacetime_round_trip_preserves_throughput_bit_exactly() {
        let log = two_vehicle_log();
        let text = export_spacetime(&log);
        let rows = parse_spacetime(&text).unwrap();
        let x_star = 101.0;
        let direct = throughput(&log.steps, x_star, 0.0, 0.2).unwrap();
        let reparsed = throughput(&rows, x_star, 0.0, 0.2).unwrap();
        assert_eq!(direct.to_bits(), reparsed.to_bits());
        // Values themselves survive exactly.
        for (a, b) in log.steps.iter().zip(&rows) {
            let matched = rows.iter().any(|r| {
                r.t.to_bits() == a.t.to_bits()
                    && r.id == a.id
                    && r.x.to_bits() == a.x.to_bits()
                    && r.v.to_bits() == a.v.to_bits()
            });
            assert!(matched, "row {a:?} lost in round trip (near {b:?})");
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_spacetime("wrong,header\n").unwrap_err();
        assert!(err.to_string().contains("line 1"));
        let err = parse_spacetime("t,id,x,v\n1,2,3\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        let err = parse_spacetime("t,id,x,v\n1,2,3,oops\n").unwrap_err();
        assert!(err.to_string().contains("bad v"));
    }

    #[test]
    fn speed_traces_are_wide_format() {
        let log = two_vehicle_log();
        let text = export_speed_traces(&log);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,v0,v1");
        assert_eq!(lines.len(), 1 + 3);
        assert_eq!(lines[1], "0,20,20.3");
    }

    #[test]
    fn histogram_export_lists_edges() {
        let mut h = Histogram::new(0.5);
        h.add(0.1);
        h.add(0.6);
        h.add(0.7);
        let text = export_histogram(&h);
        assert_eq!(text, "bin_lower_edge,count\n0,1\n0.5,2\n");
    }
}
