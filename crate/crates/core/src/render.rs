//! SVG figures of tile families. Time runs along `x ∈ [0, 1]`, frequency
//! upward, clipped to a window; tiles are drawn as their exact
//! parallelograms.

use crate::decompose::{DecompositionReport, Terminal};
use crate::dyadic::RealInterval;
use crate::report::svg_header;
use crate::tile::{Tile, TileKey};
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 20.0;

/// A named set of tiles drawn in one colour.
#[derive(Debug, Clone)]
pub struct Group {
    pub label: String,
    pub colour: String,
    pub tiles: Vec<Tile>,
}

/// Clips a polygon to `lo ≤ y ≤ hi`.
fn clip_band(poly: &[(f64, f64)], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let clip = |pts: Vec<(f64, f64)>, inside: &dyn Fn(f64) -> bool, edge: f64| -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for i in 0..pts.len() {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            let cross = |a: (f64, f64), b: (f64, f64)| {
                let t = (edge - a.1) / (b.1 - a.1);
                (a.0 + t * (b.0 - a.0), edge)
            };
            match (inside(a.1), inside(b.1)) {
                (true, true) => out.push(b),
                (true, false) => out.push(cross(a, b)),
                (false, true) => {
                    out.push(cross(a, b));
                    out.push(b);
                }
                (false, false) => {}
            }
        }
        out
    };
    let p = clip(poly.to_vec(), &|y| y >= lo, lo);
    if p.is_empty() {
        return p;
    }
    clip(p, &|y| y <= hi, hi)
}

fn to_canvas(x: f64, y: f64, window: &RealInterval) -> (f64, f64) {
    let w = WIDTH - 2.0 * MARGIN;
    let h = HEIGHT - 2.0 * MARGIN;
    (MARGIN + x * w, HEIGHT - MARGIN - (y - window.left) / window.length() * h)
}

/// One `<polygon>` per tile, grouped, after the stamp comment.
pub fn render_groups(groups: &[Group], window: RealInterval, hash: &str) -> String {
    let mut s = svg_header(hash);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let (x0, y0) = to_canvas(0.0, window.left, &window);
    let (x1, y1) = to_canvas(1.0, window.right, &window);
    let _ = writeln!(
        s,
        r##"<rect x="{x0:.3}" y="{y1:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="#888" stroke-width="0.5"/>"##,
        x1 - x0,
        y0 - y1
    );
    for g in groups {
        let _ = writeln!(s, r#"<g id="{}" fill="{}" fill-opacity="0.35" stroke="{}" stroke-width="0.6">"#, escape(&g.label), g.colour, g.colour);
        for p in &g.tiles {
            let poly = clip_band(&p.vertices(), window.left, window.right);
            if poly.len() < 3 {
                continue;
            }
            let pts: Vec<String> = poly
                .iter()
                .map(|&(x, y)| {
                    let (u, v) = to_canvas(x, y, &window);
                    format!("{u:.3},{v:.3}")
                })
                .collect();
            let k = p.key();
            let _ = writeln!(s, r#"<polygon points="{}"><title>({}, {}, {}, {})</title></polygon>"#, pts.join(" "), k.scale, k.t, k.a, k.w);
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Evenly spaced hues.
pub fn palette(i: usize, n: usize) -> String {
    let hue = 360.0 * i as f64 / n.max(1) as f64;
    format!("hsl({hue:.0},70%,45%)")
}

/// Tiles of a decomposition grouped by where they ended: one colour per
/// tree, grey antichain layers, red exceptional tiles.
pub fn decomposition_groups(report: &DecompositionReport) -> Vec<Group> {
    let mut trees: BTreeMap<(u32, i64, usize), Vec<Tile>> = BTreeMap::new();
    let mut antichain = Vec::new();
    let mut exceptional = Vec::new();
    for (key, t) in &report.assignment {
        let p = Tile::from_key(*key);
        match t {
            Terminal::Boundary { n, j, tree } | Terminal::Normal { n, j, tree } => {
                trees.entry((*n, *j as i64, *tree)).or_default().push(p)
            }
            Terminal::Exceptional { .. } => exceptional.push(p),
            Terminal::ZeroMass => {}
            _ => antichain.push(p),
        }
    }
    let count = trees.len();
    let mut out: Vec<Group> = trees
        .into_iter()
        .enumerate()
        .map(|(i, ((n, j, t), tiles))| Group { label: format!("tree n={n} j={j} #{t}"), colour: palette(i, count), tiles })
        .collect();
    out.push(Group { label: "antichains".into(), colour: "#777".into(), tiles: antichain });
    out.push(Group { label: "exceptional".into(), colour: "#d00".into(), tiles: exceptional });
    out
}

/// The tiles named by a list of keys as a single group.
pub fn key_group(label: &str, keys: &[TileKey]) -> Group {
    Group { label: label.into(), colour: "#1f5fbf".into(), tiles: keys.iter().map(|k| Tile::from_key(*k)).collect() }
}
