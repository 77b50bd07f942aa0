use super::RlError;
use crate::geometry::StateKey;
use std::collections::HashMap;
use std::path::Path;

/// Goal-conditioned action values keyed by `(state bin, goal bin)`. Unseen
/// pairs read as zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    n_actions: usize,
    values: HashMap<(StateKey, StateKey), Vec<f64>>,
    visits: HashMap<(StateKey, StateKey), Vec<u64>>,
}

impl QTable {
    pub fn new(n_actions: usize) -> Self {
        Self { n_actions, values: HashMap::new(), visits: HashMap::new() }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, s: StateKey, g: StateKey, a: usize) -> f64 {
        self.values.get(&(s, g)).map_or(0.0, |row| row[a])
    }

    pub fn row(&self, s: StateKey, g: StateKey) -> Vec<f64> {
        self.values.get(&(s, g)).cloned().unwrap_or_else(|| vec![0.0; self.n_actions])
    }

    pub fn visits(&self, s: StateKey, g: StateKey, a: usize) -> u64 {
        self.visits.get(&(s, g)).map_or(0, |row| row[a])
    }

    pub fn max_value(&self, s: StateKey, g: StateKey) -> f64 {
        self.values.get(&(s, g)).map_or(0.0, |row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Best action, ties to the lowest index.
    pub fn greedy(&self, s: StateKey, g: StateKey) -> usize {
        let Some(row) = self.values.get(&(s, g)) else { return 0 };
        let mut best = 0;
        for a in 1..row.len() {
            if row[a] > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn set(&mut self, s: StateKey, g: StateKey, a: usize, v: f64) {
        self.values.entry((s, g)).or_insert_with(|| vec![0.0; self.n_actions])[a] = v;
    }

    /// Moves `Q(s, a)` a fraction `alpha` toward `target` and counts the visit.
    pub fn update(&mut self, s: StateKey, g: StateKey, a: usize, target: f64, alpha: f64) {
        let n = self.n_actions;
        let q = &mut self.values.entry((s, g)).or_insert_with(|| vec![0.0; n])[a];
        *q += alpha * (target - *q);
        self.visits.entry((s, g)).or_insert_with(|| vec![0; n])[a] += 1;
    }

    pub fn is_finite(&self) -> bool {
        self.values.values().flatten().all(|v| v.is_finite())
    }

    /// Header line, then `sx,sy gx,gy n q_0 .. q_{A-1}` per pair in key order,
    /// where `n` is the pair's total visit count.
    pub fn format(&self) -> String {
        let mut keys: Vec<&(StateKey, StateKey)> = self.values.keys().collect();
        keys.sort();
        let mut out = format!("# qtable v1 actions={}\n", self.n_actions);
        for k in keys {
            let n: u64 = self.visits.get(k).map_or(0, |v| v.iter().sum());
            out.push_str(&format!("{} {} {n}", k.0, k.1));
            for q in &self.values[k] {
                out.push_str(&format!(" {q}"));
            }
            out.push('\n');
        }
        out
    }

    /// Inverse of [`QTable::format`]. Per-action visit counts are not stored;
    /// the total is attributed to action 0.
    pub fn parse(text: &str) -> Result<Self, RlError> {
        let bad = |line: usize, why: &str| RlError::Malformed { line, reason: why.to_string() };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty input"))?;
        let n_actions = header
            .strip_prefix("# qtable v1 actions=")
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| bad(1, "bad header"))?;
        let mut table = QTable::new(n_actions);
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 + n_actions {
                return Err(bad(i + 1, "wrong field count"));
            }
            let s: StateKey = parts[0].parse().map_err(|_| bad(i + 1, "bad state key"))?;
            let g: StateKey = parts[1].parse().map_err(|_| bad(i + 1, "bad goal key"))?;
            let n: u64 = parts[2].parse().map_err(|_| bad(i + 1, "bad visit count"))?;
            let row: Vec<f64> = parts[3..]
                .iter()
                .map(|p| p.parse::<f64>().map_err(|_| bad(i + 1, "bad value")))
                .collect::<Result<_, _>>()?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(bad(i + 1, "non-finite value"));
            }
            table.values.insert((s, g), row);
            let mut v = vec![0; n_actions];
            v[0] = n;
            table.visits.insert((s, g), v);
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RlError> {
        std::fs::write(path, self.format())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RlError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
