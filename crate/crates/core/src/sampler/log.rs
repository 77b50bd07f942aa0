use super::{SamplerError, TrajectoryMeta, TrajectorySet};
use crate::mdpcore::{Record, Transition};
use std::fmt::Write as _;
use std::path::Path;

/// Column header of the trajectory log.
pub const LOG_COLUMNS: &str = "episode t sx sy ax ay nsx nsy reward done";
const MAGIC: &str = "# trajectory-log v1";

/// Writes one transition per line after a two-line metadata header and the
/// column header. Floats use shortest round-trip formatting, so reading the
/// file back reproduces every value bit for bit.
pub fn write_log<S: Record, A: Record>(
    path: impl AsRef<Path>,
    set: &TrajectorySet<S, A>,
) -> Result<(), SamplerError> {
    std::fs::write(path, format_log(set))?;
    Ok(())
}

pub fn format_log<S: Record, A: Record>(set: &TrajectorySet<S, A>) -> String {
    let mut out = String::with_capacity(64 * (set.transitions.len() + 3));
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(
        out,
        "# seed={} policy={} env={} episodes={}",
        set.meta.seed, set.meta.policy, set.meta.env, set.episodes
    );
    let _ = writeln!(out, "{LOG_COLUMNS}");
    for t in &set.transitions {
        let [sx, sy] = t.state.encode();
        let [ax, ay] = t.action.encode();
        let [nx, ny] = t.next_state.encode();
        let _ = writeln!(
            out,
            "{} {} {sx} {sy} {ax} {ay} {nx} {ny} {} {}",
            t.episode,
            t.t,
            t.reward,
            u8::from(t.done)
        );
    }
    out
}

pub fn read_log<S: Record, A: Record>(
    path: impl AsRef<Path>,
) -> Result<TrajectorySet<S, A>, SamplerError> {
    parse_log(&std::fs::read_to_string(path)?)
}

fn malformed(line: usize, reason: impl Into<String>) -> SamplerError {
    SamplerError::MalformedLine { line, reason: reason.into() }
}

pub fn parse_log<S: Record, A: Record>(text: &str) -> Result<TrajectorySet<S, A>, SamplerError> {
    let mut meta = TrajectoryMeta { seed: 0, policy: String::new(), env: String::new() };
    let mut episodes = None;
    let mut saw_columns = false;
    let mut transitions = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for field in rest.split_whitespace() {
                let Some((k, v)) = field.split_once('=') else { continue };
                match k {
                    "seed" => meta.seed = v.parse().map_err(|_| malformed(line_no, "bad seed"))?,
                    "policy" => meta.policy = v.to_string(),
                    "env" => meta.env = v.to_string(),
                    "episodes" => {
                        episodes = Some(v.parse().map_err(|_| malformed(line_no, "bad episode count"))?)
                    }
                    _ => {}
                }
            }
            continue;
        }
        if !saw_columns {
            if line.split_whitespace().eq(LOG_COLUMNS.split_whitespace()) {
                saw_columns = true;
                continue;
            }
            return Err(malformed(line_no, "missing column header"));
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 10 {
            return Err(malformed(line_no, format!("expected 10 fields, found {}", fields.len())));
        }
        let int = |j: usize| -> Result<usize, SamplerError> {
            fields[j].parse().map_err(|_| malformed(line_no, format!("field {} not an integer", j + 1)))
        };
        let float = |j: usize| -> Result<f64, SamplerError> {
            fields[j].parse().map_err(|_| malformed(line_no, format!("field {} not a number", j + 1)))
        };
        let state = S::decode([float(2)?, float(3)?]).ok_or_else(|| malformed(line_no, "bad state"))?;
        let action = A::decode([float(4)?, float(5)?]).ok_or_else(|| malformed(line_no, "bad action"))?;
        let next_state =
            S::decode([float(6)?, float(7)?]).ok_or_else(|| malformed(line_no, "bad next state"))?;
        let done = match fields[9] {
            "0" => false,
            "1" => true,
            _ => return Err(malformed(line_no, "done must be 0 or 1")),
        };
        transitions.push(Transition {
            episode: int(0)?,
            t: int(1)?,
            state,
            action,
            next_state,
            reward: float(8)?,
            done,
        });
    }
    if !saw_columns {
        return Err(malformed(text.lines().count().max(1), "missing column header"));
    }
    let episodes = episodes.unwrap_or_else(|| transitions.last().map_or(0, |t| t.episode + 1));
    Ok(TrajectorySet { transitions, episodes, meta })
}
