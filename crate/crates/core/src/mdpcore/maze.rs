use super::grid::DiscreteState;
use crate::geometry::Vec2;
use rand::Rng;
use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    Wall,
    Free,
}

#[derive(Debug, thiserror::Error)]
pub enum MazeError {
    #[error("row {line} has width {found}, expected {expected}")]
    RaggedGrid { line: usize, expected: usize, found: usize },
    #[error("unknown character {ch:?} at line {line}, column {col}")]
    UnknownChar { line: usize, col: usize, ch: char },
    #[error("maze has no free cell")]
    NoFreeCell,
    #[error("maze is {width}x{height}; both dimensions must be at least 3")]
    TooSmall { width: usize, height: usize },
    #[error("boundary cell ({row}, {col}) is not a wall")]
    OpenBoundary { row: usize, col: usize },
    #[error("duplicate {0} marker")]
    DuplicateMarker(char),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A walled rectangular grid with optional start and goal markers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MazeSpec {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    pub start: Option<DiscreteState>,
    pub goal: Option<DiscreteState>,
}

const DIRS: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

impl MazeSpec {
    /// Parses the `#`/`.`/`S`/`G` format. Trailing blank lines and `\r` are ignored.
    pub fn parse(text: &str) -> Result<Self, MazeError> {
        let mut lines: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
        while lines.last().is_some_and(|l| l.is_empty()) {
            lines.pop();
        }
        let height = lines.len();
        let width = lines.first().map_or(0, |l| l.chars().count());
        let mut cells = Vec::with_capacity(width * height);
        let (mut start, mut goal) = (None, None);
        for (row, line) in lines.iter().enumerate() {
            let found = line.chars().count();
            if found != width {
                return Err(MazeError::RaggedGrid { line: row + 1, expected: width, found });
            }
            for (col, ch) in line.chars().enumerate() {
                let cell = match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Free,
                    'S' | 'G' => {
                        let slot = if ch == 'S' { &mut start } else { &mut goal };
                        if slot.is_some() {
                            return Err(MazeError::DuplicateMarker(ch));
                        }
                        *slot = Some(DiscreteState::new(row, col));
                        Cell::Free
                    }
                    _ => return Err(MazeError::UnknownChar { line: row + 1, col: col + 1, ch }),
                };
                cells.push(cell);
            }
        }
        if width < 3 || height < 3 {
            return Err(MazeError::TooSmall { width, height });
        }
        let maze = MazeSpec { width, height, cells, start, goal };
        for row in 0..height {
            for col in 0..width {
                let boundary = row == 0 || col == 0 || row + 1 == height || col + 1 == width;
                if boundary && maze.cell(row, col) == Cell::Free {
                    return Err(MazeError::OpenBoundary { row, col });
                }
            }
        }
        if !maze.cells.contains(&Cell::Free) {
            return Err(MazeError::NoFreeCell);
        }
        Ok(maze)
    }

    /// Seeded perfect maze on a `rooms_high x rooms_wide` lattice of rooms
    /// (depth-first carving, so `2 * rooms + 1` cells per side), with
    /// `openings` extra interior walls removed afterwards to create loops.
    pub fn random<R: Rng>(rooms_high: usize, rooms_wide: usize, openings: usize, rng: &mut R) -> Self {
        let (rh, rw) = (rooms_high.max(1), rooms_wide.max(1));
        let (height, width) = (2 * rh + 1, 2 * rw + 1);
        let mut cells = vec![Cell::Wall; width * height];
        let mut seen = vec![false; rh * rw];
        let mut stack = vec![(0usize, 0usize)];
        seen[0] = true;
        cells[width + 1] = Cell::Free;
        while let Some(&(r, c)) = stack.last() {
            let next: Vec<(usize, usize)> = DIRS
                .iter()
                .filter_map(|&(dr, dc)| {
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    (nr >= 0 && nc >= 0 && (nr as usize) < rh && (nc as usize) < rw && !seen[nr as usize * rw + nc as usize])
                        .then_some((nr as usize, nc as usize))
                })
                .collect();
            if next.is_empty() {
                stack.pop();
                continue;
            }
            let (nr, nc) = next[rng.random_range(0..next.len())];
            seen[nr * rw + nc] = true;
            cells[(r + nr + 1) * width + (c + nc + 1)] = Cell::Free;
            cells[(2 * nr + 1) * width + (2 * nc + 1)] = Cell::Free;
            stack.push((nr, nc));
        }
        // Interior walls between two rooms, in index order.
        let walls: Vec<usize> = (1..height - 1)
            .flat_map(|r| (1..width - 1).map(move |c| (r, c)))
            .filter(|&(r, c)| (r % 2 == 1) != (c % 2 == 1))
            .map(|(r, c)| r * width + c)
            .filter(|&i| cells[i] == Cell::Wall)
            .collect();
        let mut walls = walls;
        for _ in 0..openings.min(walls.len()) {
            let i = walls.swap_remove(rng.random_range(0..walls.len()));
            cells[i] = Cell::Free;
        }
        MazeSpec { width, height, cells, start: None, goal: None }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MazeError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Inverse of [`MazeSpec::parse`].
    pub fn format(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for row in 0..self.height {
            for col in 0..self.width {
                let here = Some(DiscreteState::new(row, col));
                out.push(if self.start == here {
                    'S'
                } else if self.goal == here {
                    'G'
                } else if self.cell(row, col) == Cell::Wall {
                    '#'
                } else {
                    '.'
                });
            }
            out.push('\n');
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.width + col]
    }

    /// Row-major index of a cell.
    pub fn index(&self, s: DiscreteState) -> usize {
        s.row * self.width + s.col
    }

    pub fn from_index(&self, i: usize) -> DiscreteState {
        DiscreteState::new(i / self.width, i % self.width)
    }

    /// `false` outside the grid.
    pub fn is_free_at(&self, row: i64, col: i64) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.height
            && (col as usize) < self.width
            && self.cell(row as usize, col as usize) == Cell::Free
    }

    pub fn is_free(&self, s: DiscreteState) -> bool {
        self.is_free_at(s.row as i64, s.col as i64)
    }

    /// Whether a continuous point lies inside a free cell.
    pub fn is_free_point(&self, p: Vec2) -> bool {
        p.is_finite() && self.is_free_at(p.y.floor() as i64, p.x.floor() as i64)
    }

    /// Free cells in row-major order.
    pub fn free_cells(&self) -> Vec<DiscreteState> {
        (0..self.cells.len())
            .filter(|&i| self.cells[i] == Cell::Free)
            .map(|i| self.from_index(i))
            .collect()
    }

    /// Free 4-neighbours in Up, Down, Left, Right order.
    pub fn free_neighbors(&self, s: DiscreteState) -> Vec<DiscreteState> {
        DIRS.iter()
            .filter_map(|&(dr, dc)| {
                let (r, c) = (s.row as i64 + dr, s.col as i64 + dc);
                self.is_free_at(r, c).then(|| DiscreteState::new(r as usize, c as usize))
            })
            .collect()
    }

    /// Hop distances from the given sources over free cells, indexed by
    /// [`MazeSpec::index`]. Walls and unreachable cells are `None`.
    pub fn bfs_distances(&self, sources: &[DiscreteState]) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.cells.len()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if self.is_free(s) && dist[self.index(s)].is_none() {
                dist[self.index(s)] = Some(0);
                queue.push_back(s);
            }
        }
        while let Some(s) = queue.pop_front() {
            let d = dist[self.index(s)].unwrap_or(0);
            for n in self.free_neighbors(s) {
                let slot = &mut dist[self.index(n)];
                if slot.is_none() {
                    *slot = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }
}

impl fmt::Display for MazeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.format())
    }
}
