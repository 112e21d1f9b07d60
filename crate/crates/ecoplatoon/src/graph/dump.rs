//! Plain-text serialization of a nested traffic graph: a header block with
//! dimensions and normalization constants, the membership map, then the four
//! matrices as whitespace-separated rows. Floats are written in Rust's
//! shortest round-trip form, so a dump re-parses bit-exactly.

use super::{nest, FfGraph, GraphError, NestedTrafficGraph, NormConstants, VvGraph, F_F, F_V};
use crate::linalg::Mat;

const MAGIC: &str = "nested-traffic-graph v1";

pub fn write_dump(g: &NestedTrafficGraph, norm: &NormConstants) -> String {
    let mut out = String::new();
    let m = g.vv.features.rows();
    let n = g.platoon_count();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("m {m}\n"));
    out.push_str(&format!("n {n}\n"));
    out.push_str(&format!("f_v {F_V}\n"));
    out.push_str(&format!("f_f {F_F}\n"));
    out.push_str(&format!(
        "norm {} {} {} {} {}\n",
        norm.road_length, norm.speed_cap, norm.accel_cap, norm.d_max, norm.vehicle_length
    ));
    out.push_str("membership");
    for slot in &g.membership {
        match slot {
            Some(p) => out.push_str(&format!(" {p}")),
            None => out.push_str(" -"),
        }
    }
    out.push('\n');
    for (name, mat) in [
        ("vv_features", &g.vv.features),
        ("vv_adjacency", &g.vv.adjacency),
        ("ff_features", &g.ff.features),
        ("ff_adjacency", &g.ff.adjacency),
    ] {
        out.push_str(&format!("section {name}\n"));
        for r in 0..mat.rows() {
            let row: Vec<String> = mat.row(r).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Reader<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str), GraphError> {
        for (idx, raw) in self.lines.by_ref() {
            let line = raw.trim();
            if !line.is_empty() {
                return Ok((idx + 1, line));
            }
        }
        Err(GraphError::Parse {
            line: 0,
            msg: "unexpected end of dump".into(),
        })
    }
}

fn parse_kv<'a>(reader: &mut Reader<'a>, key: &str) -> Result<(usize, &'a str), GraphError> {
    let (line_no, line) = reader.next_line()?;
    let (found_key, rest) = line.split_once(' ').ok_or_else(|| GraphError::Parse {
        line: line_no,
        msg: format!("expected '{key} <value>'"),
    })?;
    if found_key != key {
        return Err(GraphError::Parse {
            line: line_no,
            msg: format!("expected key '{key}', found '{found_key}'"),
        });
    }
    Ok((line_no, rest.trim()))
}

fn parse_count(reader: &mut Reader<'_>, key: &str) -> Result<usize, GraphError> {
    let (line_no, value) = parse_kv(reader, key)?;
    value.parse().map_err(|_| GraphError::Parse {
        line: line_no,
        msg: format!("bad count '{value}' for '{key}'"),
    })
}

fn parse_matrix(reader: &mut Reader<'_>, name: &str, rows: usize, cols: usize) -> Result<Mat, GraphError> {
    let (line_no, value) = parse_kv(reader, "section")?;
    if value != name {
        return Err(GraphError::Parse {
            line: line_no,
            msg: format!("expected section '{name}', found '{value}'"),
        });
    }
    let mut mat = Mat::zeros(rows, cols);
    for r in 0..rows {
        let (row_line, line) = reader.next_line()?;
        let mut count = 0;
        for (c, token) in line.split_whitespace().enumerate() {
            if c >= cols {
                return Err(GraphError::Parse {
                    line: row_line,
                    msg: format!("row has more than {cols} values"),
                });
            }
            let v: f64 = token.parse().map_err(|_| GraphError::Parse {
                line: row_line,
                msg: format!("bad number '{token}'"),
            })?;
            mat.set(r, c, v);
            count += 1;
        }
        if count != cols {
            return Err(GraphError::Parse {
                line: row_line,
                msg: format!("expected {cols} values, found {count}"),
            });
        }
    }
    Ok(mat)
}

pub fn parse_dump(text: &str) -> Result<(NestedTrafficGraph, NormConstants), GraphError> {
    let mut reader = Reader {
        lines: text.lines().enumerate(),
    };
    let (line_no, magic) = reader.next_line()?;
    if magic != MAGIC {
        return Err(GraphError::Parse {
            line: line_no,
            msg: format!("not a graph dump (expected '{MAGIC}')"),
        });
    }
    let m = parse_count(&mut reader, "m")?;
    let n = parse_count(&mut reader, "n")?;
    let f_v = parse_count(&mut reader, "f_v")?;
    let f_f = parse_count(&mut reader, "f_f")?;
    if f_v != F_V || f_f != F_F {
        return Err(GraphError::Parse {
            line: 4,
            msg: format!("unsupported feature widths {f_v}/{f_f}, expected {F_V}/{F_F}"),
        });
    }

    let (norm_line, norm_str) = parse_kv(&mut reader, "norm")?;
    let values: Vec<f64> = norm_str
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| GraphError::Parse {
            line: norm_line,
            msg: "bad normalization constants".into(),
        })?;
    if values.len() != 5 {
        return Err(GraphError::Parse {
            line: norm_line,
            msg: format!("expected 5 normalization constants, found {}", values.len()),
        });
    }
    let norm = NormConstants {
        road_length: values[0],
        speed_cap: values[1],
        accel_cap: values[2],
        d_max: values[3],
        vehicle_length: values[4],
    };

    let (mem_line, mem_str) = parse_kv(&mut reader, "membership")?;
    let membership: Vec<Option<usize>> = mem_str
        .split_whitespace()
        .map(|tok| {
            if tok == "-" {
                Ok(None)
            } else {
                tok.parse::<usize>().map(Some).map_err(|_| GraphError::Parse {
                    line: mem_line,
                    msg: format!("bad membership entry '{tok}'"),
                })
            }
        })
        .collect::<Result<_, _>>()?;
    if membership.len() != m {
        return Err(GraphError::Parse {
            line: mem_line,
            msg: format!("membership lists {} vehicles, header says {m}", membership.len()),
        });
    }

    let vv_features = parse_matrix(&mut reader, "vv_features", m, F_V)?;
    let vv_adjacency = parse_matrix(&mut reader, "vv_adjacency", m, m)?;
    let ff_features = parse_matrix(&mut reader, "ff_features", n, F_F)?;
    let ff_adjacency = parse_matrix(&mut reader, "ff_adjacency", n, n)?;

    let g = nest(
        VvGraph {
            features: vv_features,
            adjacency: vv_adjacency,
        },
        FfGraph {
            features: ff_features,
            adjacency: ff_adjacency,
        },
        membership,
    )
    .map_err(|e| GraphError::Parse {
        line: 0,
        msg: format!("dump is structurally invalid: {e}"),
    })?;
    Ok((g, norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_nested, StWeightParams, WeightScheme};
    use crate::sim::{build_scenario, LeaderTrajectory, ScenarioConfig};

    fn sample() -> (NestedTrafficGraph, NormConstants) {
        let cfg = ScenarioConfig {
            n_groups: 2,
            avs_per_group: 2,
            ..ScenarioConfig::default()
        };
        let traj = LeaderTrajectory::high_speed();
        let mut world = build_scenario(&cfg, &traj).unwrap();
        // A few steps so features are not all symmetric.
        for _ in 0..50 {
            let actions = crate::sim::idm_actions(&world, &cfg);
            world = crate::sim::step(&world, &actions, &traj, &cfg).unwrap();
        }
        let norm = NormConstants::from_scenario(&cfg, 100.0);
        let p = StWeightParams {
            mode: crate::graph::WeightMode::ProseConsistent,
            ..StWeightParams::default()
        };
        let g = build_nested(&world, &p, WeightScheme::StWeight, WeightScheme::Binary, &norm)
            .unwrap();
        (g, norm)
    }

    #[test]
    fn dump_round_trips_bit_exactly() {
        let (g, norm) = sample();
        let text = write_dump(&g, &norm);
        let (back, norm_back) = parse_dump(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(norm_back, norm);
        // And the re-dump is byte-identical.
        assert_eq!(write_dump(&back, &norm_back), text);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let (g, norm) = sample();
        let text = write_dump(&g, &norm);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[8] = "0.1 not-a-number 0 0 0 0".into();
        let broken = lines.join("\n");
        match parse_dump(&broken) {
            Err(GraphError::Parse { line, msg }) => {
                assert_eq!(line, 9);
                assert!(msg.contains("not-a-number"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_foreign_headers() {
        assert!(matches!(
            parse_dump("something else\n"),
            Err(GraphError::Parse { line: 1, .. })
        ));
    }
}
