//! Plain-text case format.
//!
//! ```text
//! # comment
//! [system]
//! s_base 3405
//! f_nominal 60
//! [bus]
//! # number base_kv load_p load_q
//! 1 138 0.0317 0.0065
//! [branch]
//! # from to r x b_shunt
//! 1 2 0.0885 0.473 0.0135
//! [gen]
//! # bus s_rated h d xd_t p_set
//! 1 25 1.5 1 0.25 0.0029
//! ```
//!
//! Bus references use external numbers; all per-unit values are on `s_base`.
//! Numbers need not be contiguous, buses are internalized in file order.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{Branch, Bus, Generator, PowerSystem};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    System,
    Bus,
    Branch,
    Gen,
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

fn floats(line: usize, cols: &[&str], expected: usize) -> Result<Vec<f64>> {
    if cols.len() != expected {
        return Err(parse_err(line, format!("expected {expected} columns, found {}", cols.len())));
    }
    cols.iter()
        .map(|c| c.parse::<f64>().map_err(|e| parse_err(line, format!("{c:?}: {e}"))))
        .collect()
}

fn bus_number(line: usize, v: f64) -> Result<usize> {
    if v < 1.0 || v.fract() != 0.0 {
        return Err(parse_err(line, format!("invalid bus number {v}")));
    }
    Ok(v as usize)
}

pub fn parse_case(text: &str) -> Result<PowerSystem> {
    let mut section = Section::None;
    let mut s_base = None;
    let mut f_nominal = 60.0;
    let mut buses = Vec::new();
    let mut raw_branches = Vec::new();
    let mut raw_gens = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            section = match line {
                "[system]" => Section::System,
                "[bus]" => Section::Bus,
                "[branch]" => Section::Branch,
                "[gen]" => Section::Gen,
                other => return Err(parse_err(line_no, format!("unknown section {other}"))),
            };
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        match section {
            Section::None => return Err(parse_err(line_no, "data before any section header")),
            Section::System => {
                if cols.len() != 2 {
                    return Err(parse_err(line_no, "expected `key value`"));
                }
                let v: f64 = cols[1].parse().map_err(|e| parse_err(line_no, e))?;
                match cols[0] {
                    "s_base" => s_base = Some(v),
                    "f_nominal" => f_nominal = v,
                    other => return Err(parse_err(line_no, format!("unknown key {other}"))),
                }
            }
            Section::Bus => {
                let v = floats(line_no, &cols, 4)?;
                buses.push(Bus {
                    number: bus_number(line_no, v[0])?,
                    base_kv: v[1],
                    load_p: v[2],
                    load_q: v[3],
                    has_generator: false,
                });
            }
            Section::Branch => raw_branches.push((line_no, floats(line_no, &cols, 5)?)),
            Section::Gen => raw_gens.push((line_no, floats(line_no, &cols, 6)?)),
        }
    }

    let s_base = s_base.ok_or_else(|| Error::Parse("missing s_base in [system]".into()))?;
    let index: HashMap<usize, usize> =
        buses.iter().enumerate().map(|(i, b)| (b.number, i)).collect();
    let lookup = |line: usize, v: f64| -> Result<usize> {
        let n = bus_number(line, v)?;
        index.get(&n).copied().ok_or_else(|| parse_err(line, format!("unknown bus {n}")))
    };

    let mut branches = Vec::with_capacity(raw_branches.len());
    for (line, v) in raw_branches {
        branches.push(Branch {
            from_bus: lookup(line, v[0])?,
            to_bus: lookup(line, v[1])?,
            r: v[2],
            x: v[3],
            b_shunt: v[4],
        });
    }
    let mut generators = Vec::with_capacity(raw_gens.len());
    for (line, v) in raw_gens {
        generators.push(Generator {
            bus: lookup(line, v[0])?,
            s_rated: v[1],
            h: v[2],
            d: v[3],
            xd_t: v[4],
            p_set: v[5],
        });
    }
    PowerSystem::new(buses, branches, generators, s_base, f_nominal)
}

/// Serializes a system in the format accepted by [`parse_case`]. Floats are
/// written in shortest round-trip form, so parsing the output is lossless.
pub fn write_case(sys: &PowerSystem) -> String {
    let mut out = String::new();
    let num = |i: usize| sys.buses[i].number;
    let _ = writeln!(out, "[system]\ns_base {}\nf_nominal {}", sys.s_base, sys.f_nominal);
    let _ = writeln!(out, "[bus]\n# number base_kv load_p load_q");
    for b in &sys.buses {
        let _ = writeln!(out, "{} {} {} {}", b.number, b.base_kv, b.load_p, b.load_q);
    }
    let _ = writeln!(out, "[branch]\n# from to r x b_shunt");
    for br in &sys.branches {
        let _ = writeln!(out, "{} {} {} {} {}", num(br.from_bus), num(br.to_bus), br.r, br.x, br.b_shunt);
    }
    let _ = writeln!(out, "[gen]\n# bus s_rated h d xd_t p_set");
    for g in &sys.generators {
        let _ = writeln!(out, "{} {} {} {} {} {}", num(g.bus), g.s_rated, g.h, g.d, g.xd_t, g.p_set);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_ieee24;

    #[test]
    fn ieee24_round_trips_through_text() {
        let sys = build_ieee24();
        let parsed = parse_case(&write_case(&sys)).unwrap();
        assert_eq!(parsed, sys);
    }

    #[test]
    fn non_contiguous_numbers_are_internalized() {
        let text = "[system]\ns_base 100\n[bus]\n10 230 0.5 0.1\n20 230 0 0\n\
                    [branch]\n10 20 0.01 0.1 0\n[gen]\n20 100 4 1 0.25 0.5\n";
        let sys = parse_case(text).unwrap();
        assert_eq!(sys.generators[0].bus, 1);
        assert!(sys.buses[1].has_generator);
        assert!(!sys.buses[0].has_generator);
    }

    #[test]
    fn reports_bad_input() {
        assert!(parse_case("[bus]\n1 230 0 0\n").is_err()); // no s_base
        assert!(parse_case("[system]\ns_base 100\n[bus]\n1 230 0\n").is_err());
        assert!(parse_case("[system]\ns_base 100\n[wat]\n").is_err());
        let dangling = "[system]\ns_base 100\n[bus]\n1 230 0 0\n2 230 0 0\n[branch]\n1 3 0 0.1 0\n";
        assert!(matches!(parse_case(dangling), Err(Error::Parse(_))));
    }
}
