//! Planar vectors and the state discretization shared by every module.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

/// A point or displacement in maze units. Cell `(row, col)` covers
/// `[col, col + 1) x [row, row + 1)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn dist(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn manhattan(self, other: Vec2) -> f64 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// Integer bin index of a state. Ordered by `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateKey {
    pub x: i64,
    pub y: i64,
}

impl StateKey {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed state key `{0}`")]
pub struct ParseKeyError(pub String);

impl FromStr for StateKey {
    type Err = ParseKeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (x, y) = s.split_once(',').ok_or_else(|| ParseKeyError(s.to_string()))?;
        let x = x.trim().parse().map_err(|_| ParseKeyError(s.to_string()))?;
        let y = y.trim().parse().map_err(|_| ParseKeyError(s.to_string()))?;
        Ok(StateKey { x, y })
    }
}

/// Square binning of positions: `key = floor(position / bin)`.
///
/// With `bin = 1` a discrete cell center `(col + 0.5, row + 0.5)` maps to the
/// key `(col, row)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Discretizer {
    pub bin: f64,
}

impl Discretizer {
    pub fn new(bin: f64) -> Self {
        assert!(bin > 0.0 && bin.is_finite(), "bin width must be positive");
        Self { bin }
    }

    pub fn key(&self, p: Vec2) -> StateKey {
        StateKey::new((p.x / self.bin).floor() as i64, (p.y / self.bin).floor() as i64)
    }

    pub fn center(&self, key: StateKey) -> Vec2 {
        Vec2::new((key.x as f64 + 0.5) * self.bin, (key.y as f64 + 0.5) * self.bin)
    }
}

/// Distance used for partitioning and clustering.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
}

impl Metric {
    pub fn dist(self, a: Vec2, b: Vec2) -> f64 {
        match self {
            Metric::Euclidean => a.dist(b),
            Metric::Manhattan => a.manhattan(b),
        }
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "manhattan" => Ok(Metric::Manhattan),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_bins_recover_cells() {
        let d = Discretizer::new(1.0);
        assert_eq!(d.key(Vec2::new(3.5, 7.5)), StateKey::new(3, 7));
        assert_eq!(d.center(StateKey::new(3, 7)), Vec2::new(3.5, 7.5));
    }

    #[test]
    fn key_round_trips_through_text() {
        let k = StateKey::new(-2, 11);
        assert_eq!(k.to_string().parse::<StateKey>().unwrap(), k);
        assert!("3;4".parse::<StateKey>().is_err());
    }
}
