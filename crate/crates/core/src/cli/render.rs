use crate::geometry::{Discretizer, StateKey};
use crate::mdpcore::MazeSpec;
use crate::rl::Curve;
use crate::subgoals::{SubgoalGraph, SubgoalSet};
use std::collections::BTreeMap;

const WALL: [u8; 3] = [24, 24, 24];
const UNSEEN: [u8; 3] = [160, 160, 160];
const MARK: [u8; 3] = [255, 255, 255];

/// Blue (t = 0) through purple to red (t = 1). The red channel grows
/// strictly with `t`.
pub fn ramp(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let r = (255.0 * t).round() as u8;
    let g = (64.0 * (1.0 - (2.0 * t - 1.0).abs())).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    [r, g, b]
}

/// Twelve distinguishable colors, cycled by region id.
pub fn palette(i: usize) -> [u8; 3] {
    const P: [[u8; 3]; 12] = [
        [230, 25, 75],
        [60, 180, 75],
        [255, 225, 25],
        [0, 130, 200],
        [245, 130, 48],
        [145, 30, 180],
        [70, 240, 240],
        [240, 50, 230],
        [210, 245, 60],
        [250, 190, 212],
        [0, 128, 128],
        [170, 110, 40],
    ];
    P[i % P.len()]
}

/// RGB raster, one block of `scale x scale` pixels per bin.
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub scale: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl Raster {
    fn new(width: usize, height: usize, scale: usize) -> Self {
        Self { width, height, scale, pixels: vec![WALL; width * height] }
    }

    fn fill(&mut self, x: usize, y: usize, color: [u8; 3]) {
        if x < self.width && y < self.height {
            self.pixels[y * self.width + x] = color;
        }
    }

    /// Color of bin `(x, y)`.
    pub fn at(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    /// Binary P6 with max value 255.
    pub fn to_ppm(&self) -> Vec<u8> {
        let (w, h) = (self.width * self.scale, self.height * self.scale);
        let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
        out.reserve(w * h * 3);
        for py in 0..h {
            for px in 0..w {
                out.extend_from_slice(&self.at(px / self.scale, py / self.scale));
            }
        }
        out
    }
}

fn bins(maze: &MazeSpec, disc: Discretizer) -> (usize, usize) {
    ((maze.width() as f64 / disc.bin).ceil() as usize, (maze.height() as f64 / disc.bin).ceil() as usize)
}

fn base(maze: &MazeSpec, disc: Discretizer, scale: usize) -> Raster {
    let (w, h) = bins(maze, disc);
    let mut r = Raster::new(w, h, scale.max(1));
    for y in 0..h {
        for x in 0..w {
            if maze.is_free_point(disc.center(StateKey::new(x as i64, y as i64))) {
                r.fill(x, y, UNSEEN);
            }
        }
    }
    r
}

/// Per-bin values on a min-max color ramp. Wall bins are dark, free bins
/// without a value are gray. With all values equal every valued bin gets
/// the `t = 0` color.
pub fn heatmap(maze: &MazeSpec, disc: Discretizer, values: &BTreeMap<StateKey, f64>, scale: usize) -> Raster {
    let mut r = base(maze, disc, scale);
    let lo = values.values().copied().fold(f64::INFINITY, f64::min);
    let hi = values.values().copied().fold(f64::NEG_INFINITY, f64::max);
    for (&k, &v) in values {
        if k.x < 0 || k.y < 0 || !maze.is_free_point(disc.center(k)) {
            continue;
        }
        let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
        r.fill(k.x as usize, k.y as usize, ramp(t));
    }
    r
}

/// Region map in categorical colors, with every subgoal anchor bin white.
pub fn region_map(maze: &MazeSpec, graph: &SubgoalGraph, set: &SubgoalSet, scale: usize) -> Raster {
    let mut r = base(maze, graph.disc, scale);
    for (&k, &id) in &graph.regions {
        if k.x >= 0 && k.y >= 0 {
            r.fill(k.x as usize, k.y as usize, palette(id));
        }
    }
    for g in &set.subgoals {
        let k = graph.disc.key(g.anchor);
        if k.x >= 0 && k.y >= 0 {
            r.fill(k.x as usize, k.y as usize, MARK);
        }
    }
    r
}

/// Line chart of success-rate curves on a fixed 640x400 canvas.
pub fn curves_svg(curves: &[(String, Curve)]) -> String {
    let (w, h, m) = (640.0, 400.0, 48.0);
    let max_ep = curves.iter().flat_map(|(_, c)| c.iter().map(|p| p.episode)).max().unwrap_or(1).max(1) as f64;
    let sx = |e: usize| m + (w - 2.0 * m) * e as f64 / max_ep;
    let sy = |s: f64| h - m - (h - 2.0 * m) * s;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <line x1=\"{m}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <text x=\"{m}\" y=\"{ty}\" font-size=\"12\">0</text>\n\
         <text x=\"{x1}\" y=\"{ty}\" font-size=\"12\" text-anchor=\"end\">{max_ep}</text>\n\
         <text x=\"{lx}\" y=\"{m}\" font-size=\"12\" text-anchor=\"end\">1</text>\n\
         <text x=\"{lx}\" y=\"{y0}\" font-size=\"12\" text-anchor=\"end\">0</text>\n",
        y0 = h - m,
        x1 = w - m,
        ty = h - m + 16.0,
        lx = m - 6.0,
    );
    for (i, (label, curve)) in curves.iter().enumerate() {
        let [r, g, b] = palette(i);
        let pts: Vec<String> = curve.iter().map(|p| format!("{:.2},{:.2}", sx(p.episode), sy(p.success))).collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"rgb({r},{g},{b})\" stroke-width=\"2\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"rgb({r},{g},{b})\">{}</text>\n",
            w - m + 4.0 - 120.0,
            m + 14.0 * (i as f64 + 1.0),
            escape(label)
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
