use super::grid::DiscreteState;
use super::maze::MazeSpec;
use super::{Environment, MazeEnv, Record, Spatial, StepError, Transition};
use crate::geometry::{Discretizer, StateKey, Vec2};
use rand::Rng;

/// Position in maze units.
pub type ContinuousState = Vec2;

/// Largest displacement of one continuous action.
pub const DEFAULT_STEP_MAX: f64 = 0.3;

/// Default half-width of the point-maze body.
pub const DEFAULT_BODY_RADIUS: f64 = 0.1;

/// Gap kept between a resolved position and the wall it slid along.
const WALL_GAP: f64 = 1e-9;

impl Spatial for Vec2 {
    fn position(&self) -> Vec2 {
        *self
    }
}

impl Record for Vec2 {
    fn encode(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    fn decode(v: [f64; 2]) -> Option<Self> {
        let p = Vec2::new(v[0], v[1]);
        p.is_finite().then_some(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    X,
    Y,
}

/// Entry time and axis of the segment `p -> p + d` into the open box
/// `[lo, hi]`, if it enters within `t <= 1`.
fn sweep_box(p: Vec2, d: Vec2, lo: Vec2, hi: Vec2) -> Option<(f64, Axis)> {
    fn slab(p: f64, d: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
        if d > 0.0 {
            Some(((lo - p) / d, (hi - p) / d))
        } else if d < 0.0 {
            Some(((hi - p) / d, (lo - p) / d))
        } else if p > lo && p < hi {
            Some((f64::NEG_INFINITY, f64::INFINITY))
        } else {
            None
        }
    }
    let (ex, xx) = slab(p.x, d.x, lo.x, hi.x)?;
    let (ey, xy) = slab(p.y, d.y, lo.y, hi.y)?;
    let (enter, axis) = if ex >= ey { (ex, Axis::X) } else { (ey, Axis::Y) };
    let exit = xx.min(xy);
    ((0.0..=1.0).contains(&enter) && enter < exit).then_some((enter, axis))
}

/// Wall cells near the segment `p -> p + d` as boxes grown by `radius`. A
/// box that already contains `p` is used at its true size, so a body that
/// starts too close to a wall can still never enter it.
fn wall_boxes(maze: &MazeSpec, p: Vec2, d: Vec2, radius: f64) -> Vec<(Vec2, Vec2)> {
    let q = p + d;
    let (x0, x1) = ((p.x.min(q.x) - radius).floor() as i64 - 1, (p.x.max(q.x) + radius).floor() as i64 + 1);
    let (y0, y1) = ((p.y.min(q.y) - radius).floor() as i64 - 1, (p.y.max(q.y) + radius).floor() as i64 + 1);
    let mut out = Vec::new();
    for cy in y0..=y1 {
        for cx in x0..=x1 {
            if maze.is_free_at(cy, cx) {
                continue;
            }
            let (lo, hi) = (Vec2::new(cx as f64, cy as f64), Vec2::new((cx + 1) as f64, (cy + 1) as f64));
            let grown = (Vec2::new(lo.x - radius, lo.y - radius), Vec2::new(hi.x + radius, hi.y + radius));
            let inside = p.x > grown.0.x && p.x < grown.1.x && p.y > grown.0.y && p.y < grown.1.y;
            out.push(if inside { (lo, hi) } else { grown });
        }
    }
    out
}

/// Whether a body of `radius` at `p` overlaps no wall.
pub fn is_clear(maze: &MazeSpec, p: Vec2, radius: f64) -> bool {
    if !maze.is_free_point(p) {
        return false;
    }
    let (x0, x1) = ((p.x - radius).floor() as i64, (p.x + radius).floor() as i64);
    let (y0, y1) = ((p.y - radius).floor() as i64, (p.y + radius).floor() as i64);
    (y0..=y1).all(|cy| {
        (x0..=x1).all(|cx| {
            maze.is_free_at(cy, cx)
                || p.x <= cx as f64 - radius
                || p.x >= (cx + 1) as f64 + radius
                || p.y <= cy as f64 - radius
                || p.y >= (cy + 1) as f64 + radius
        })
    })
}

/// Moves `p` by `d`, sliding along walls: at each wall contact the blocked
/// component of the remaining displacement is dropped and motion continues
/// with the tangential remainder.
pub fn slide_move(maze: &MazeSpec, p: Vec2, d: Vec2) -> Vec2 {
    slide_body(maze, p, d, 0.0)
}

/// [`slide_move`] for a square body of half-width `radius`: walls act as if
/// grown by `radius` on every side.
pub fn slide_body(maze: &MazeSpec, p: Vec2, d: Vec2, radius: f64) -> Vec2 {
    let mut pos = p;
    let mut rem = d;
    for _ in 0..3 {
        if rem.x == 0.0 && rem.y == 0.0 {
            break;
        }
        let hit = wall_boxes(maze, pos, rem, radius)
            .into_iter()
            .filter_map(|(lo, hi)| sweep_box(pos, rem, lo, hi).map(|h| (h, lo, hi)))
            .min_by(|a, b| a.0 .0.total_cmp(&b.0 .0).then((a.0 .1 == Axis::Y).cmp(&(b.0 .1 == Axis::Y))));
        let Some(((t, axis), lo, hi)) = hit else {
            pos = pos + rem;
            break;
        };
        let at = pos + rem * t;
        // Stop just short of the contact face.
        pos = match axis {
            Axis::X => Vec2::new(if rem.x > 0.0 { lo.x - WALL_GAP } else { hi.x + WALL_GAP }, at.y),
            Axis::Y => Vec2::new(at.x, if rem.y > 0.0 { lo.y - WALL_GAP } else { hi.y + WALL_GAP }),
        };
        rem = rem * (1.0 - t);
        match axis {
            Axis::X => rem.x = 0.0,
            Axis::Y => rem.y = 0.0,
        }
    }
    debug_assert!(maze.is_free_point(pos), "slide_body left free space at {pos:?}");
    pos
}

/// Point-mass step: `next = s + a` with slide-along-wall collisions. `a` is
/// clipped to `step_max`. Reward 1 iff `goal = (center, radius)` is reached.
pub fn step_continuous(
    maze: &MazeSpec,
    s: Vec2,
    a: Vec2,
    step_max: f64,
    goal: Option<(Vec2, f64)>,
) -> Result<Transition<Vec2, Vec2>, StepError> {
    step_body(maze, s, a, step_max, 0.0, goal)
}

/// [`step_continuous`] for a body of half-width `radius`.
pub fn step_body(
    maze: &MazeSpec,
    s: Vec2,
    a: Vec2,
    step_max: f64,
    radius: f64,
    goal: Option<(Vec2, f64)>,
) -> Result<Transition<Vec2, Vec2>, StepError> {
    if !maze.is_free_point(s) {
        return Err(StepError::InvalidState(format!("({}, {})", s.x, s.y)));
    }
    let a = clip(a, step_max);
    let next = slide_body(maze, s, a, radius);
    let reached = goal.is_some_and(|(g, r)| next.dist(g) < r);
    Ok(Transition {
        state: s,
        action: a,
        next_state: next,
        reward: if reached { 1.0 } else { 0.0 },
        done: reached,
        episode: 0,
        t: 0,
    })
}

fn clip(a: Vec2, step_max: f64) -> Vec2 {
    let n = a.norm();
    if n > step_max && n > 0.0 {
        a * (step_max / n)
    } else {
        a
    }
}

/// Continuous point maze.
#[derive(Clone, Debug)]
pub struct PointEnv {
    maze: MazeSpec,
    step_max: f64,
    discretizer: Discretizer,
    achieve_radius: f64,
    body_radius: f64,
    free: Vec<DiscreteState>,
}

impl PointEnv {
    /// `bin` sets the counting discretization and `achieve_radius` the goal
    /// radius; both are normally the neighbourhood threshold.
    pub fn new(maze: MazeSpec, step_max: f64, bin: f64, achieve_radius: f64) -> Self {
        let free = maze.free_cells();
        Self {
            maze,
            step_max,
            discretizer: Discretizer::new(bin),
            achieve_radius,
            body_radius: DEFAULT_BODY_RADIUS,
            free,
        }
    }

    /// Sets the body half-width; 0 gives a massless point.
    pub fn with_body_radius(mut self, radius: f64) -> Self {
        self.body_radius = radius;
        self
    }

    pub fn body_radius(&self) -> f64 {
        self.body_radius
    }

    pub fn step_max(&self) -> f64 {
        self.step_max
    }

    pub fn discretizer(&self) -> Discretizer {
        self.discretizer
    }
}

impl Environment for PointEnv {
    type State = Vec2;
    type Action = Vec2;

    fn random_start<R: Rng>(&self, rng: &mut R) -> Vec2 {
        let c = self.free[rng.random_range(0..self.free.len())];
        let span = 1.0 - 2.0 * WALL_GAP;
        for _ in 0..16 {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            let p = Vec2::new(c.col as f64 + WALL_GAP + u * span, c.row as f64 + WALL_GAP + v * span);
            if is_clear(&self.maze, p, self.body_radius) {
                return p;
            }
        }
        c.center()
    }

    fn random_action<R: Rng>(&self, rng: &mut R) -> Vec2 {
        let r = self.step_max * rng.random::<f64>().sqrt();
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        Vec2::new(r * theta.cos(), r * theta.sin())
    }

    fn step<R: Rng>(&self, s: Vec2, a: Vec2, _rng: &mut R) -> Result<Vec2, StepError> {
        step_body(&self.maze, s, a, self.step_max, self.body_radius, None).map(|t| t.next_state)
    }

    fn key(&self, s: &Vec2) -> StateKey {
        self.discretizer.key(*s)
    }

    fn tag(&self) -> String {
        format!(
            "point:{}x{}:step={}:radius={}",
            self.maze.width(),
            self.maze.height(),
            self.step_max,
            self.body_radius
        )
    }
}

impl MazeEnv for PointEnv {
    fn maze(&self) -> &MazeSpec {
        &self.maze
    }

    fn achieve_radius(&self) -> f64 {
        self.achieve_radius
    }

    fn cell_of(&self, s: &Vec2) -> DiscreteState {
        DiscreteState::new(s.y.floor() as usize, s.x.floor() as usize)
    }

    fn state_at(&self, cell: DiscreteState) -> Vec2 {
        cell.center()
    }

    fn control_actions(&self) -> Vec<Vec2> {
        let m = self.step_max;
        vec![Vec2::new(0.0, -m), Vec2::new(0.0, m), Vec2::new(-m, 0.0), Vec2::new(m, 0.0)]
    }

    fn is_discrete(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream_rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn room() -> MazeSpec {
        MazeSpec::parse("#######\n#.....#\n#.....#\n#.....#\n#######").unwrap()
    }

    #[test]
    fn open_area_moves_freely() {
        let m = room();
        let t = step_continuous(&m, Vec2::new(2.5, 2.5), Vec2::new(0.5, 0.0), 1.0, None).unwrap();
        assert_abs_diff_eq!(t.next_state.x, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.next_state.y, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn straight_into_wall_stops_at_contact() {
        let m = room();
        // Right wall starts at x = 6; start 0.1 away.
        let t = step_continuous(&m, Vec2::new(5.9, 2.5), Vec2::new(0.3, 0.0), 0.3, None).unwrap();
        assert_abs_diff_eq!(t.next_state.x - 5.9, 0.1, epsilon = 1e-6);
        assert_abs_diff_eq!(t.next_state.y, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn action_is_clipped() {
        let m = room();
        let t = step_continuous(&m, Vec2::new(2.5, 2.5), Vec2::new(3.0, 4.0), 0.3, None).unwrap();
        assert_abs_diff_eq!(t.action.norm(), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(t.next_state.dist(Vec2::new(2.5, 2.5)), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_graze_slides_along_corner() {
        // Cell (row 2, col 2) is a wall block; (row 1, col 2) and (row 2, col 1) are free.
        let m = MazeSpec::parse("#####\n#...#\n#.#.#\n#...#\n#####").unwrap();
        let s = Vec2::new(1.9, 1.85);
        let a = Vec2::new(0.2, 0.25);
        let next = step_continuous(&m, s, a, 0.5, None).unwrap().next_state;
        // Analytic oracle: the segment meets the wall block's top edge y = 2
        // at t = (2 - 1.85) / 0.25 = 0.6, where x = 1.9 + 0.6 * 0.2 = 2.02
        // (inside the block's x-span [2, 3]). The y component is blocked and the
        // remaining x displacement 0.4 * 0.2 = 0.08 continues along the edge.
        let t_hit = (2.0 - s.y) / a.y;
        let x_hit = s.x + t_hit * a.x;
        assert!((2.0..3.0).contains(&x_hit));
        let expected = Vec2::new(x_hit + (1.0 - t_hit) * a.x, 2.0);
        assert_abs_diff_eq!(next.x, expected.x, epsilon = 1e-6);
        assert_abs_diff_eq!(next.y, expected.y, epsilon = 1e-6);
        assert!(next.y < 2.0);
        assert!(m.is_free_point(next));
    }

    #[test]
    fn corner_into_concave_corner_stops_both_axes() {
        let m = room();
        let next = slide_move(&m, Vec2::new(5.9, 3.9), Vec2::new(0.2, 0.2));
        assert!(m.is_free_point(next));
        assert_abs_diff_eq!(next.x, 6.0, epsilon = 1e-6);
        assert_abs_diff_eq!(next.y, 4.0, epsilon = 1e-6);
    }

    #[test]
    fn rejects_state_in_wall() {
        let m = room();
        assert!(step_continuous(&m, Vec2::new(0.5, 0.5), Vec2::ZERO, 0.3, None).is_err());
    }

    #[test]
    fn body_stops_radius_short_of_wall() {
        let m = room();
        let next = slide_body(&m, Vec2::new(5.7, 2.5), Vec2::new(0.3, 0.0), 0.1);
        assert_abs_diff_eq!(next.x, 5.9, epsilon = 1e-6);
        let next = slide_body(&m, Vec2::new(5.7, 2.5), Vec2::new(0.3, 0.3), 0.1);
        assert_abs_diff_eq!(next.x, 5.9, epsilon = 1e-6);
        assert_abs_diff_eq!(next.y, 2.8, epsilon = 1e-12);
    }

    #[test]
    fn zero_radius_body_matches_point() {
        let m = MazeSpec::parse(include_str!("../../fixtures/demo.maze")).unwrap();
        let env = PointEnv::new(m.clone(), DEFAULT_STEP_MAX, 0.7, 0.7).with_body_radius(0.0);
        let mut rng = stream_rng(3, 0);
        for _ in 0..2000 {
            let s = env.random_start(&mut rng);
            let a = env.random_action(&mut rng);
            assert_eq!(slide_body(&m, s, a, 0.0), slide_move(&m, s, a));
        }
    }

    #[test]
    fn body_passes_convex_corner_with_clearance() {
        // Wall block at (row 2, col 2). Moving down along x = 1.95 passes it
        // as a point, but a body of radius 0.1 catches its corner.
        let m = MazeSpec::parse("#####\n#...#\n#.#.#\n#...#\n#####").unwrap();
        assert_abs_diff_eq!(slide_body(&m, Vec2::new(1.95, 1.7), Vec2::new(0.0, 0.3), 0.0).y, 2.0, epsilon = 1e-12);
        let p = slide_body(&m, Vec2::new(1.95, 1.7), Vec2::new(0.0, 0.3), 0.1);
        assert_abs_diff_eq!(p.y, 1.9, epsilon = 1e-6);
        let q = slide_body(&m, Vec2::new(1.7, 2.5), Vec2::new(0.3, 0.0), 0.1);
        assert_abs_diff_eq!(q.x, 1.9, epsilon = 1e-6);
        assert!(!is_clear(&m, Vec2::new(1.95, 1.95), 0.1));
        assert!(is_clear(&m, Vec2::new(1.85, 1.85), 0.1));
    }

    proptest! {
        #[test]
        fn body_keeps_clearance(seed in 0u64..2000, steps in 1usize..60) {
            let m = MazeSpec::parse(include_str!("../../fixtures/demo.maze")).unwrap();
            let env = PointEnv::new(m.clone(), DEFAULT_STEP_MAX, 0.7, 0.7);
            let mut rng = stream_rng(seed, 1);
            let mut s = env.random_start(&mut rng);
            for _ in 0..steps {
                let a = env.random_action(&mut rng);
                s = env.step(s, a, &mut rng).unwrap();
                prop_assert!(is_clear(&m, s, env.body_radius() - 1e-6), "{s:?}");
            }
        }

        #[test]
        fn never_enters_walls(seed in 0u64..5000, steps in 1usize..60) {
            let m = MazeSpec::parse(include_str!("../../fixtures/demo.maze")).unwrap();
            let env = PointEnv::new(m.clone(), DEFAULT_STEP_MAX, 0.7, 0.7);
            let mut rng = stream_rng(seed, 0);
            let mut s = env.random_start(&mut rng);
            for _ in 0..steps {
                let a = env.random_action(&mut rng);
                s = env.step(s, a, &mut rng).unwrap();
                prop_assert!(m.is_free_point(s));
            }
        }
    }
}
