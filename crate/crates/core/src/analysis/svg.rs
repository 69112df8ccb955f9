//! SVG rendering of disconnectivity trees, with a JSON sidecar holding the
//! same geometry.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;

use super::disconnectivity::DisconnectivityTree;

/// Leaf colours, indexed by minimum id.
#[derive(Debug, Clone, PartialEq)]
pub enum Colouring {
    Uniform,
    /// Continuous values mapped onto a blue-to-red ramp.
    Numeric(Vec<f64>),
    /// Category ids drawn from a fixed palette.
    Categorical(Vec<usize>),
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

impl Colouring {
    fn colour(&self, id: usize) -> String {
        match self {
            Colouring::Uniform => "#000000".into(),
            Colouring::Categorical(c) => PALETTE[c[id] % PALETTE.len()].into(),
            Colouring::Numeric(v) => {
                let (lo, hi) = v
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                        (a.min(x), b.max(x))
                    });
                let t = if hi > lo {
                    (v[id] - lo) / (hi - lo)
                } else {
                    0.5
                };
                let r = (40.0 + 200.0 * t).round() as u8;
                let b = (240.0 - 200.0 * t).round() as u8;
                format!("#{r:02x}30{b:02x}")
            }
        }
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    meta: Vec<(&'a str, &'a str)>,
    levels: &'a [f64],
    basins: Vec<Vec<SideBasin<'a>>>,
    leaves: Vec<SideLeaf>,
}

#[derive(Serialize)]
struct SideBasin<'a> {
    members: &'a [usize],
    parent: Option<usize>,
    x: f64,
}

#[derive(Serialize)]
struct SideLeaf {
    id: usize,
    cost: f64,
    x: f64,
    colour: String,
}

const WIDTH_MARGIN: f64 = 70.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 580.0;

/// Renders the tree to an SVG string. `meta` pairs are written as a comment
/// at the top of the file.
pub fn render_svg(
    tree: &DisconnectivityTree,
    colouring: &Colouring,
    meta: &[(&str, &str)],
) -> String {
    let lay = tree.layout();
    let n = tree.leaves.len().max(1) as f64;
    let spacing = (900.0 / n).clamp(2.0, 24.0);
    let width = 2.0 * WIDTH_MARGIN + spacing * (n - 1.0).max(1.0);
    let height = BOTTOM + 20.0;
    let top = tree.levels[0];
    let bottom = tree
        .leaves
        .iter()
        .map(|l| l.cost)
        .fold(*tree.levels.last().unwrap(), f64::min);
    let span = if top > bottom { top - bottom } else { 1.0 };
    let y = |j: f64| TOP + (top - j) / span * (BOTTOM - TOP);
    let x = |u: f64| WIDTH_MARGIN + u * spacing;

    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    if !meta.is_empty() {
        let text: Vec<String> = meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(s, "<!-- {} -->", text.join(" ")).unwrap();
    }
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();

    // cost axis with ticks
    writeln!(
        s,
        r#"<g stroke="black" stroke-width="1" font-family="sans-serif" font-size="10">"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<line x1="30" y1="{:.2}" x2="30" y2="{:.2}"/>"#,
        y(top),
        y(bottom)
    )
    .unwrap();
    for t in 0..=5 {
        let j = bottom + span * t as f64 / 5.0;
        writeln!(
            s,
            r#"<line x1="26" y1="{0:.2}" x2="30" y2="{0:.2}"/>"#,
            y(j)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="2" y="{:.2}" stroke="none">{}</text>"#,
            y(j) - 2.0,
            short(j)
        )
        .unwrap();
    }
    let bar = nice_step(span / 5.0);
    let bx = width - 25.0;
    writeln!(
        s,
        r#"<line x1="{bx:.2}" y1="{:.2}" x2="{bx:.2}" y2="{:.2}" stroke-width="2"/>"#,
        y(bottom),
        y(bottom + bar)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" stroke="none">{}</text>"#,
        bx - 20.0,
        y(bottom) + 12.0,
        short(bar)
    )
    .unwrap();
    writeln!(s, "</g>").unwrap();

    writeln!(s, r#"<g stroke="black" stroke-width="0.8" fill="none">"#).unwrap();
    for (i, _) in tree.basins[0].iter().enumerate() {
        let bx = x(lay.basin_x[0][i]);
        writeln!(
            s,
            r#"<line x1="{bx:.2}" y1="{:.2}" x2="{bx:.2}" y2="{:.2}"/>"#,
            y(top) - 8.0,
            y(top)
        )
        .unwrap();
    }
    for l in 1..tree.levels.len() {
        for (i, b) in tree.basins[l].iter().enumerate() {
            let p = b.parent.unwrap();
            writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
                x(lay.basin_x[l - 1][p]),
                y(tree.levels[l - 1]),
                x(lay.basin_x[l][i]),
                y(tree.levels[l])
            )
            .unwrap();
        }
    }
    for (leaf, place) in tree.leaves.iter().zip(&lay.leaves) {
        let level = place.level;
        let basin = tree.basins[level]
            .iter()
            .position(|b| b.members.binary_search(&leaf.id).is_ok())
            .unwrap();
        writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}"/>"#,
            x(lay.basin_x[level][basin]),
            y(tree.levels[level]),
            x(place.x),
            y(leaf.cost),
            colouring.colour(leaf.id)
        )
        .unwrap();
    }
    writeln!(s, "</g>").unwrap();
    writeln!(s, r#"<g stroke="none">"#).unwrap();
    for (leaf, place) in tree.leaves.iter().zip(&lay.leaves) {
        writeln!(
            s,
            r#"<circle class="leaf" data-id="{}" cx="{:.2}" cy="{:.2}" r="2" fill="{}"/>"#,
            leaf.id,
            x(place.x),
            y(leaf.cost),
            colouring.colour(leaf.id)
        )
        .unwrap();
    }
    writeln!(s, "</g>").unwrap();
    writeln!(s, "</svg>").unwrap();
    s
}

fn short(v: f64) -> String {
    let t = format!("{v:.3}");
    let t = t.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".into()
    } else {
        t.into()
    }
}

/// Largest of 1, 2, 5 times a power of ten not above `x`.
fn nice_step(x: f64) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    let p = 10f64.powf(x.log10().floor());
    [5.0, 2.0, 1.0]
        .into_iter()
        .map(|m| m * p)
        .find(|&v| v <= x)
        .unwrap_or(p)
}

/// JSON sidecar with levels, basins, layout and leaf colours.
pub fn render_sidecar(
    tree: &DisconnectivityTree,
    colouring: &Colouring,
    meta: &[(&str, &str)],
) -> String {
    let lay = tree.layout();
    let side = Sidecar {
        meta: meta.to_vec(),
        levels: &tree.levels,
        basins: tree
            .basins
            .iter()
            .enumerate()
            .map(|(l, row)| {
                row.iter()
                    .enumerate()
                    .map(|(i, b)| SideBasin {
                        members: &b.members,
                        parent: b.parent,
                        x: lay.basin_x[l][i],
                    })
                    .collect()
            })
            .collect(),
        leaves: tree
            .leaves
            .iter()
            .zip(&lay.leaves)
            .map(|(l, p)| SideLeaf {
                id: l.id,
                cost: l.cost,
                x: p.x,
                colour: colouring.colour(l.id),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&side).expect("sidecar serialises")
}

/// Writes `path` (SVG) and the sidecar next to it with a `.json` extension.
pub fn emit_disconnectivity(
    tree: &DisconnectivityTree,
    colouring: &Colouring,
    path: impl AsRef<Path>,
    meta: &[(&str, &str)],
) -> io::Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_svg(tree, colouring, meta))?;
    std::fs::write(
        path.with_extension("json"),
        render_sidecar(tree, colouring, meta),
    )
}
