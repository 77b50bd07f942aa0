use super::cluster::capacity_clustered;
use super::counts::count_transitions;
use super::partition::PartitionConfig;
use super::{CapacityError, McOptions};
use crate::geometry::{Discretizer, StateKey, Vec2};
use crate::mdpcore::Spatial;
use crate::par;
use crate::sampler::TrajectorySet;
use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Estimator {
    #[default]
    Mc,
    Clustered,
}

impl FromStr for Estimator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mc" => Ok(Estimator::Mc),
            "clustered" => Ok(Estimator::Clustered),
            other => Err(format!("unknown estimator '{other}' (expected mc or clustered)")),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Mc => "mc",
            Estimator::Clustered => "clustered",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CapacityEntry {
    pub capacity: f64,
    pub support: usize,
    pub samples: u64,
    /// False when fewer than `min_samples` samples back the estimate.
    pub confident: bool,
    /// Representative position of the bin.
    pub anchor: Vec2,
}

/// Capacity per state bin.
#[derive(Clone, Debug, PartialEq)]
pub struct CapacityMap {
    pub estimator: Estimator,
    pub disc: Discretizer,
    pub entries: BTreeMap<StateKey, CapacityEntry>,
}

impl CapacityMap {
    pub fn get(&self, key: &StateKey) -> Option<&CapacityEntry> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_capacity(&self) -> f64 {
        self.entries.values().map(|e| e.capacity).fold(0.0, f64::max)
    }

    pub fn format(&self) -> String {
        let mut out = format!(
            "# capacity-map v1 estimator={} bin={}\n# state_key capacity support samples confidence\n",
            self.estimator, self.disc.bin
        );
        for (k, e) in &self.entries {
            let conf = if e.confident { "high" } else { "low" };
            let _ = writeln!(out, "{k} {} {} {} {conf}", e.capacity, e.support, e.samples);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CapacityError> {
        let mut estimator = None;
        let mut bin = None;
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let bad = |reason: String| CapacityError::Malformed { line, reason };
            let l = raw.trim();
            if let Some(header) = l.strip_prefix('#') {
                for field in header.split_whitespace() {
                    if let Some(v) = field.strip_prefix("estimator=") {
                        estimator = Some(v.parse::<Estimator>().map_err(bad)?);
                    } else if let Some(v) = field.strip_prefix("bin=") {
                        let b: f64 = v.parse().map_err(|_| bad(format!("bad bin '{v}'")))?;
                        if !(b > 0.0 && b.is_finite()) {
                            return Err(bad(format!("bad bin '{v}'")));
                        }
                        bin = Some(b);
                    }
                }
                continue;
            }
            if l.is_empty() {
                continue;
            }
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 5 {
                return Err(bad(format!("expected 5 fields, found {}", f.len())));
            }
            let key: StateKey = f[0].parse().map_err(|e: crate::geometry::ParseKeyError| bad(e.0))?;
            let capacity: f64 = f[1].parse().map_err(|_| bad(format!("bad capacity '{}'", f[1])))?;
            let support: usize = f[2].parse().map_err(|_| bad(format!("bad support '{}'", f[2])))?;
            let samples: u64 = f[3].parse().map_err(|_| bad(format!("bad samples '{}'", f[3])))?;
            let confident = match f[4] {
                "high" => true,
                "low" => false,
                other => return Err(bad(format!("bad confidence '{other}'"))),
            };
            let b = bin.ok_or_else(|| bad("entry before bin header".into()))?;
            let anchor = Discretizer::new(b).center(key);
            entries.insert(key, CapacityEntry { capacity, support, samples, confident, anchor });
        }
        let bin = bin.ok_or(CapacityError::Malformed { line: 1, reason: "missing bin header".into() })?;
        Ok(Self { estimator: estimator.unwrap_or_default(), disc: Discretizer::new(bin), entries })
    }
}

pub fn write_capacity_map(path: impl AsRef<Path>, map: &CapacityMap) -> Result<(), CapacityError> {
    std::fs::write(path, map.format())?;
    Ok(())
}

pub fn read_capacity_map(path: impl AsRef<Path>) -> Result<CapacityMap, CapacityError> {
    CapacityMap::parse(&std::fs::read_to_string(path)?)
}

/// Per-bin sample nearest to the bin center; ties go to the earliest sample.
pub(crate) fn bin_anchors(samples: &[Vec2], disc: Discretizer) -> BTreeMap<StateKey, Vec2> {
    let mut best: BTreeMap<StateKey, (f64, Vec2)> = BTreeMap::new();
    for &p in samples {
        let k = disc.key(p);
        let d = p.dist(disc.center(k));
        match best.get(&k) {
            Some(&(bd, _)) if bd <= d => {}
            _ => {
                best.insert(k, (d, p));
            }
        }
    }
    best.into_iter().map(|(k, (_, p))| (k, p)).collect()
}

/// Builds a capacity map over every bin visited by `trajs`.
///
/// The Monte Carlo estimator counts transitions between bins. The clustered
/// estimator pools all logged states, picks one anchor per bin and clusters
/// its successor band. Bins with fewer than `min_samples` samples are kept
/// and flagged as low confidence.
pub fn capacity_map<S, A>(
    trajs: &TrajectorySet<S, A>,
    disc: Discretizer,
    estimator: Estimator,
    mc: McOptions,
    partition: &PartitionConfig,
) -> Result<CapacityMap, CapacityError>
where
    S: Spatial + Copy + PartialEq + Sync,
    A: Copy + Sync,
{
    if trajs.is_empty() {
        return Err(CapacityError::EmptyData);
    }
    let positions: Vec<Vec2> = trajs.episode_states().into_iter().flatten().map(|s| s.position()).collect();
    let anchors = bin_anchors(&positions, disc);
    let entries = match estimator {
        Estimator::Mc => {
            let table = count_transitions(trajs, |s: &S| disc.key(s.position()))?;
            table
                .states
                .keys()
                .map(|&k| {
                    let e = table.estimate(k, mc);
                    let anchor = anchors.get(&k).copied().unwrap_or_else(|| disc.center(k));
                    (
                        k,
                        CapacityEntry {
                            capacity: e.capacity,
                            support: e.support,
                            samples: e.samples,
                            confident: e.samples >= mc.min_samples,
                            anchor,
                        },
                    )
                })
                .collect()
        }
        Estimator::Clustered => {
            partition.validate()?;
            let list: Vec<(StateKey, Vec2)> = anchors.into_iter().collect();
            let results = par::map_slice(&list, |&(k, anchor)| {
                let entry = match capacity_clustered(&positions, anchor, partition) {
                    Ok((e, _)) => CapacityEntry {
                        capacity: e.capacity,
                        support: e.support,
                        samples: e.samples,
                        confident: e.samples >= partition.min_samples,
                        anchor,
                    },
                    Err(CapacityError::EmptyInput) => CapacityEntry {
                        capacity: 0.0,
                        support: 0,
                        samples: 0,
                        confident: false,
                        anchor,
                    },
                    Err(e) => return Err(e),
                };
                Ok((k, entry))
            });
            results.into_iter().collect::<Result<BTreeMap<_, _>, _>>()?
        }
    };
    Ok(CapacityMap { estimator, disc, entries })
}
