use std::fmt::Write as _;

use crate::evaluation::{CellState, WorldModel};
use crate::maintainer::StepCase;
use crate::topograph::{NodeId, TopoGraph};

use super::engine::StepRecord;

/// Renders the graph over the ground-truth grid as an SVG: obstacle cells as
/// a dark underlay, nodes as circles at their debug poses, edges as lines,
/// and loop-closure edges (per the step log) highlighted.
///
/// Nodes without debug poses fall back to a deterministic force-directed
/// layout and the drawing carries a warning comment.
pub fn render_svg(g: &TopoGraph, world: Option<&WorldModel>, steps: &[StepRecord]) -> String {
    let scale = 24.0; // pixels per meter
    let (min_x, min_y, max_x, max_y) = bounds(g, world);
    let w = ((max_x - min_x) * scale).ceil().max(64.0);
    let h = ((max_y - min_y) * scale).ceil().max(64.0);
    let px = |x: f64| (x - min_x) * scale;
    // SVG y grows downward; world y grows upward.
    let py = |y: f64| h - (y - min_y) * scale;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">"
    );
    let _ = writeln!(
        svg,
        "<rect width=\"100%\" height=\"100%\" fill=\"#fafafa\"/>"
    );

    if let Some(world) = world {
        // Merge horizontal runs of obstacle cells into single rects.
        let res = world.resolution();
        for iy in 0..world.height() {
            let mut run: Option<(u32, u32)> = None;
            for ix in 0..=world.width() {
                let occupied = ix < world.width() && world.get(ix, iy) == CellState::Obstacle;
                match (run, occupied) {
                    (None, true) => run = Some((ix, ix)),
                    (Some((s, _)), true) => run = Some((s, ix)),
                    (Some((s, e)), false) => {
                        let (x0, y0) = world.cell_center(s, iy);
                        let (x1, _) = world.cell_center(e, iy);
                        let _ = writeln!(
                            svg,
                            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#404040\"/>",
                            px(x0 - res / 2.0),
                            py(y0 + res / 2.0),
                            (x1 - x0 + res) * scale,
                            res * scale
                        );
                        run = None;
                    }
                    (None, false) => {}
                }
            }
        }
    }

    let layout = node_layout(g);
    if g.nodes().any(|n| g.debug_pose(n.id).is_none()) {
        let _ = writeln!(
            svg,
            "<!-- warning: nodes without debug poses laid out force-directed -->"
        );
    }

    // Loop-closure edges from the step log get their own style.
    let closure_edges: std::collections::BTreeSet<(u32, u32)> = steps
        .iter()
        .filter(|s| s.case == StepCase::LoopClosure)
        .flat_map(|s| s.edges_added.iter())
        .map(|e| (e.from.min(e.to), e.from.max(e.to)))
        .collect();

    for e in g.edges() {
        let (Some(&a), Some(&b)) = (layout.get(&e.from), layout.get(&e.to)) else {
            continue;
        };
        let key = (e.from.0.min(e.to.0), e.from.0.max(e.to.0));
        let style = if closure_edges.contains(&key) {
            "stroke=\"#d9480f\" stroke-width=\"2.5\" stroke-dasharray=\"6 3\""
        } else {
            "stroke=\"#1971c2\" stroke-width=\"1.5\""
        };
        let _ = writeln!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" {style}/>",
            px(a.0),
            py(a.1),
            px(b.0),
            py(b.1)
        );
    }
    for n in g.nodes() {
        let Some(&(x, y)) = layout.get(&n.id) else {
            continue;
        };
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"5\" fill=\"#2f9e44\" stroke=\"#1b4332\"/>",
            px(x),
            py(y)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"9\" fill=\"#1b4332\">{}</text>",
            px(x) + 6.0,
            py(y) - 4.0,
            n.id
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(g: &TopoGraph, world: Option<&WorldModel>) -> (f64, f64, f64, f64) {
    if let Some(w) = world {
        let (ox, oy) = w.origin();
        return (
            ox,
            oy,
            ox + f64::from(w.width()) * w.resolution(),
            oy + f64::from(w.height()) * w.resolution(),
        );
    }
    let poses: Vec<(f64, f64)> = g
        .nodes()
        .filter_map(|n| g.debug_pose(n.id).map(|p| (p.dx, p.dy)))
        .collect();
    if poses.is_empty() {
        return (-5.0, -5.0, 5.0, 5.0);
    }
    let min_x = poses.iter().map(|p| p.0).fold(f64::INFINITY, f64::min) - 2.0;
    let min_y = poses.iter().map(|p| p.1).fold(f64::INFINITY, f64::min) - 2.0;
    let max_x = poses.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max) + 2.0;
    let max_y = poses.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max) + 2.0;
    (min_x, min_y, max_x, max_y)
}

/// Debug poses where available; otherwise a deterministic spring layout
/// seeded on a unit circle.
fn node_layout(g: &TopoGraph) -> std::collections::BTreeMap<NodeId, (f64, f64)> {
    let mut layout = std::collections::BTreeMap::new();
    let mut missing = Vec::new();
    for n in g.nodes() {
        match g.debug_pose(n.id) {
            Some(p) => {
                layout.insert(n.id, (p.dx, p.dy));
            }
            None => missing.push(n.id),
        }
    }
    if missing.is_empty() {
        return layout;
    }
    // Initialize missing nodes on a circle, then relax along edges.
    for (k, id) in missing.iter().enumerate() {
        let a = std::f64::consts::TAU * k as f64 / missing.len() as f64;
        layout.insert(*id, (4.0 * a.cos(), 4.0 * a.sin()));
    }
    for _ in 0..50 {
        let snapshot = layout.clone();
        for id in &missing {
            let neighbors = g.neighbors(*id).expect("node exists");
            if neighbors.is_empty() {
                continue;
            }
            let (mut cx, mut cy) = (0.0, 0.0);
            for (n, _) in &neighbors {
                let p = snapshot[n];
                cx += p.0;
                cy += p.1;
            }
            let n = neighbors.len() as f64;
            layout.insert(*id, (cx / n, cy / n));
        }
    }
    layout
}
