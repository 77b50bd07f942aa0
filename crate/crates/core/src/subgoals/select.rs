use super::SubgoalError;
use crate::capacity::CapacityMap;
use crate::geometry::{StateKey, Vec2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Subgoal {
    pub id: usize,
    pub anchor: Vec2,
    pub capacity: f64,
    /// Achievement radius.
    pub radius: f64,
}

impl Subgoal {
    pub fn achieved_by(&self, p: Vec2) -> bool {
        p.dist(self.anchor) < self.radius
    }
}

/// Subgoals with ids `0..len` in selection order.
#[derive(Clone, Debug, PartialEq)]
pub struct SubgoalSet {
    pub subgoals: Vec<Subgoal>,
    pub threshold: f64,
    pub suppression_radius: f64,
}

impl SubgoalSet {
    pub fn len(&self) -> usize {
        self.subgoals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subgoals.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Subgoal> {
        self.subgoals.get(id)
    }

    pub fn anchors(&self) -> Vec<Vec2> {
        self.subgoals.iter().map(|g| g.anchor).collect()
    }

    /// Nearest subgoal achieved at `p`, ties to the lowest id.
    pub fn achieved_at(&self, p: Vec2) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for g in &self.subgoals {
            let d = p.dist(g.anchor);
            if d < g.radius && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, g.id));
            }
        }
        best.map(|(_, id)| id)
    }
}

/// Greedy non-maximum suppression over confident map entries: take the
/// highest-capacity remaining entry at or above `threshold`, emit it, and
/// drop every entry within `suppression_radius` of it. Equal capacities are
/// taken in key order. `achieve_radius` is stored on each subgoal.
pub fn select_subgoals(
    cmap: &CapacityMap,
    threshold: f64,
    suppression_radius: f64,
    achieve_radius: f64,
) -> Result<SubgoalSet, SubgoalError> {
    if cmap.is_empty() {
        return Err(SubgoalError::EmptyMap);
    }
    if !(threshold > 0.0) {
        return Err(SubgoalError::BadThreshold(threshold));
    }
    let mut candidates: Vec<(StateKey, f64, Vec2)> = cmap
        .entries
        .iter()
        .filter(|(_, e)| e.confident && e.capacity >= threshold)
        .map(|(&k, e)| (k, e.capacity, e.anchor))
        .collect();
    if candidates.is_empty() {
        return Err(SubgoalError::NoCandidates { threshold, max: cmap.max_capacity() });
    }
    // Stable sort keeps key order among equal capacities.
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut taken: Vec<Subgoal> = Vec::new();
    for (_, capacity, anchor) in candidates {
        if taken.iter().any(|g| g.anchor.dist(anchor) <= suppression_radius) {
            continue;
        }
        taken.push(Subgoal { id: taken.len(), anchor, capacity, radius: achieve_radius });
    }
    Ok(SubgoalSet { subgoals: taken, threshold, suppression_radius })
}

/// Straight-line nearest subgoal, ties to the lowest id. Ignores walls.
pub fn assign_nearest(p: Vec2, set: &SubgoalSet) -> Result<usize, SubgoalError> {
    let mut best: Option<(f64, usize)> = None;
    for g in &set.subgoals {
        let d = p.dist(g.anchor);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, g.id));
        }
    }
    best.map(|(_, id)| id).ok_or(SubgoalError::EmptySubgoals)
}
