//! Top-down SVG of a run: tank, obstacles, both tracks, and the follower's
//! track recoloured by protocol level.

use std::fmt::Write;

use crate::engine::TraceRecord;
use crate::world::{Shape, WorldModel};

const PX_PER_M: f64 = 100.0;
const MARGIN_PX: f64 = 20.0;

pub const LEVEL_COLORS: [&str; 3] = ["#008000", "#0000ff", "#800080"];

struct Frame {
    height_m: f64,
}

impl Frame {
    fn x(&self, x: f64) -> f64 {
        MARGIN_PX + x * PX_PER_M
    }
    // SVG y grows downward; world +y is up on the page.
    fn y(&self, y: f64) -> f64 {
        MARGIN_PX + (self.height_m - y) * PX_PER_M
    }
    fn pt(&self, x: f64, y: f64) -> String {
        format!("{:.2},{:.2}", self.x(x), self.y(y))
    }
}

pub fn render_svg(world: &WorldModel, trace: &[TraceRecord]) -> String {
    let t = &world.tank;
    let f = Frame {
        height_m: t.width_y_m,
    };
    let (w, h) = (
        t.length_x_m * PX_PER_M + 2.0 * MARGIN_PX,
        t.width_y_m * PX_PER_M + 2.0 * MARGIN_PX,
    );
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let _ = writeln!(
        s,
        r##"<rect class="tank" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#f4f8fb" stroke="#000" stroke-width="2"/>"##,
        f.x(0.0),
        f.y(t.width_y_m),
        t.length_x_m * PX_PER_M,
        t.width_y_m * PX_PER_M
    );
    for o in &world.obstacles {
        match &o.shape {
            Shape::Circle { center_m, radius_m } => {
                let _ = writeln!(
                    s,
                    r##"<circle class="obstacle" data-label="{}" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#999"/>"##,
                    o.label,
                    f.x(center_m.x),
                    f.y(center_m.y),
                    radius_m * PX_PER_M
                );
            }
            Shape::Box { min_m, max_m } => {
                let _ = writeln!(
                    s,
                    r##"<rect class="obstacle" data-label="{}" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#999"/>"##,
                    o.label,
                    f.x(min_m.x),
                    f.y(max_m.y),
                    (max_m.x - min_m.x) * PX_PER_M,
                    (max_m.y - min_m.y) * PX_PER_M
                );
            }
        }
    }
    for (class, color, pick) in [
        (
            "asv",
            "#000",
            (|r: &TraceRecord| (r.asv.position.x, r.asv.position.y))
                as fn(&TraceRecord) -> (f64, f64),
        ),
        ("auv", "#888", |r: &TraceRecord| {
            (r.auv.position.x, r.auv.position.y)
        }),
    ] {
        let pts: Vec<String> = trace
            .iter()
            .map(|r| {
                let (x, y) = pick(r);
                f.pt(x, y)
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="trajectory {class}" points="{}" fill="none" stroke="{color}" stroke-width="1"/>"#,
            pts.join(" ")
        );
    }
    // Runs of equal level along the follower's track; each run shares its
    // first point with the previous run's last so the colouring is unbroken.
    let mut i = 0;
    while i + 1 < trace.len() {
        let level = trace[i].level.min(2);
        let mut j = i + 1;
        while j + 1 < trace.len() && trace[j].level.min(2) == level {
            j += 1;
        }
        let d: Vec<String> = trace[i..=j]
            .iter()
            .enumerate()
            .map(|(k, r)| {
                format!(
                    "{}{}",
                    if k == 0 { 'M' } else { 'L' },
                    f.pt(r.auv.position.x, r.auv.position.y)
                )
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<path class="level level{level}" d="{}" fill="none" stroke="{}" stroke-width="3"/>"#,
            d.join(" "),
            LEVEL_COLORS[level as usize]
        );
        i = j;
    }
    let _ = writeln!(
        s,
        r##"<circle class="start" cx="{:.2}" cy="{:.2}" r="6" fill="#fff" stroke="#000" stroke-width="2"/>"##,
        f.x(world.asv_start_m.x),
        f.y(world.asv_start_m.y)
    );
    let (tx, ty) = (f.x(world.asv_target_m.x), f.y(world.asv_target_m.y));
    let _ = writeln!(
        s,
        r##"<path class="target" d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="#c00" stroke-width="3"/>"##,
        tx - 7.0,
        ty - 7.0,
        tx + 7.0,
        ty + 7.0,
        tx - 7.0,
        ty + 7.0,
        tx + 7.0,
        ty - 7.0
    );
    s.push_str("</svg>\n");
    s
}
