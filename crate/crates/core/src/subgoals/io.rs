use super::{Subgoal, SubgoalError, SubgoalGraph, SubgoalSet};
use crate::geometry::{Discretizer, StateKey, Vec2};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Text form of a subgoal set and optionally its graph:
/// `subgoal id x y capacity`, `edge i j count`, `region x,y id`.
pub fn format_subgoals(set: &SubgoalSet, graph: Option<&SubgoalGraph>) -> String {
    let mut out = format!(
        "# subgoals v1 threshold={} suppression={} radius={}",
        set.threshold,
        set.suppression_radius,
        set.subgoals.first().map_or(0.0, |g| g.radius)
    );
    if let Some(g) = graph {
        let _ = write!(out, " bin={}", g.disc.bin);
    }
    out.push('\n');
    for g in &set.subgoals {
        let _ = writeln!(out, "subgoal {} {} {} {}", g.id, g.anchor.x, g.anchor.y, g.capacity);
    }
    if let Some(graph) = graph {
        for (&(i, j), c) in &graph.edges {
            let _ = writeln!(out, "edge {i} {j} {c}");
        }
        for (k, id) in &graph.regions {
            let _ = writeln!(out, "region {k} {id}");
        }
    }
    out
}

pub fn parse_subgoals(text: &str) -> Result<(SubgoalSet, Option<SubgoalGraph>), SubgoalError> {
    let mut header: BTreeMap<&str, f64> = BTreeMap::new();
    let mut subgoals = Vec::new();
    let mut edges = BTreeMap::new();
    let mut regions = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let bad = |reason: String| SubgoalError::Malformed { line, reason };
        let l = raw.trim();
        if let Some(h) = l.strip_prefix('#') {
            for field in h.split_whitespace() {
                if let Some((k, v)) = field.split_once('=') {
                    let v: f64 = v.parse().map_err(|_| bad(format!("bad header value '{field}'")))?;
                    header.insert(k, v);
                }
            }
            continue;
        }
        if l.is_empty() {
            continue;
        }
        let f: Vec<&str> = l.split_whitespace().collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number '{s}'")));
        let int = |s: &str| s.parse::<u64>().map_err(|_| bad(format!("bad integer '{s}'")));
        match (f[0], f.len()) {
            ("subgoal", 5) => {
                let id = int(f[1])? as usize;
                if id != subgoals.len() {
                    return Err(bad(format!("expected id {}, found {id}", subgoals.len())));
                }
                let radius = header.get("radius").copied().unwrap_or(0.0);
                subgoals.push(Subgoal {
                    id,
                    anchor: Vec2::new(num(f[2])?, num(f[3])?),
                    capacity: num(f[4])?,
                    radius,
                });
            }
            ("edge", 4) => {
                edges.insert((int(f[1])? as usize, int(f[2])? as usize), int(f[3])?);
            }
            ("region", 3) => {
                let k: StateKey = f[1].parse().map_err(|_| bad(format!("bad key '{}'", f[1])))?;
                regions.insert(k, int(f[2])? as usize);
            }
            _ => return Err(bad(format!("unrecognized record '{l}'"))),
        }
    }
    let n = subgoals.len();
    let dangling = edges.keys().any(|&(i, j)| i >= n || j >= n) || regions.values().any(|&g| g >= n);
    if dangling {
        return Err(SubgoalError::Malformed { line: 0, reason: "reference to an unknown subgoal id".into() });
    }
    let set = SubgoalSet {
        subgoals,
        threshold: header.get("threshold").copied().unwrap_or(0.0),
        suppression_radius: header.get("suppression").copied().unwrap_or(0.0),
    };
    let graph = match header.get("bin") {
        Some(&bin) if bin > 0.0 => {
            Some(SubgoalGraph { n_subgoals: n, edges, regions, disc: Discretizer::new(bin) })
        }
        _ => None,
    };
    Ok((set, graph))
}

pub fn write_subgoals(
    path: impl AsRef<Path>,
    set: &SubgoalSet,
    graph: Option<&SubgoalGraph>,
) -> Result<(), SubgoalError> {
    std::fs::write(path, format_subgoals(set, graph))?;
    Ok(())
}

pub fn read_subgoals(path: impl AsRef<Path>) -> Result<(SubgoalSet, Option<SubgoalGraph>), SubgoalError> {
    parse_subgoals(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let set = SubgoalSet {
            subgoals: vec![
                Subgoal { id: 0, anchor: Vec2::new(3.5, 1.5), capacity: 3f64.ln(), radius: 0.7 },
                Subgoal { id: 1, anchor: Vec2::new(0.1 + 0.2, 7.5), capacity: 1.0, radius: 0.7 },
            ],
            threshold: 2.5f64.ln(),
            suppression_radius: 1.0,
        };
        let graph = SubgoalGraph {
            n_subgoals: 2,
            edges: BTreeMap::from([((0, 1), 4), ((1, 1), 2)]),
            regions: BTreeMap::from([(StateKey::new(3, 1), 0), (StateKey::new(0, 7), 1)]),
            disc: Discretizer::new(1.0),
        };
        let text = format_subgoals(&set, Some(&graph));
        let (s2, g2) = parse_subgoals(&text).unwrap();
        assert_eq!(s2, set);
        assert_eq!(g2.unwrap(), graph);
    }

    #[test]
    fn malformed_lines() {
        assert!(parse_subgoals("subgoal 0 1.5\n").is_err());
        assert!(parse_subgoals("subgoal 1 1.5 1.5 1.0\n").is_err());
        assert!(parse_subgoals("subgoal 0 1 1 1\nedge 0 3 1\n").is_err());
    }
}
