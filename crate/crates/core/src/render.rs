//! Minimal SVG rendering of a world and an optional trajectory.

use std::fmt::Write;

use crate::world::{OccupancyWorld, Pose};

const PX_PER_M: f64 = 40.0;

/// World cells, start, goal and the driven path as a standalone SVG. The y
/// axis is flipped so that +y points up.
pub fn render_svg(world: &OccupancyWorld, path: &[Pose]) -> String {
    let (w, h) = world.extent();
    let (wp, hp) = (w * PX_PER_M, h * PX_PER_M);
    let px = |x: f64| x * PX_PER_M;
    let py = |y: f64| hp - y * PX_PER_M;
    let cell = world.resolution() * PX_PER_M;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{wp:.0}" height="{hp:.0}" viewBox="0 0 {wp:.2} {hp:.2}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(s, r##"<g fill="#303030">"##);
    for row in 0..world.height() {
        for col in 0..world.width() {
            if world.occupied(col, row) {
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}"/>"#,
                    col as f64 * cell,
                    hp - (row + 1) as f64 * cell
                );
            }
        }
    }
    s.push_str("</g>\n");
    if path.len() > 1 {
        let pts: Vec<String> = path.iter().map(|p| format!("{:.2},{:.2}", px(p.x), py(p.y))).collect();
        let _ = writeln!(
            s,
            r##"<polyline fill="none" stroke="#1f77b4" stroke-width="2" points="{}"/>"##,
            pts.join(" ")
        );
    }
    let start = world.start();
    let goal = world.goal();
    let _ = writeln!(
        s,
        r##"<circle cx="{:.2}" cy="{:.2}" r="5" fill="#2ca02c"/>"##,
        px(start.x),
        py(start.y)
    );
    let _ = writeln!(
        s,
        r##"<circle cx="{:.2}" cy="{:.2}" r="5" fill="#d62728"/>"##,
        px(goal.x),
        py(goal.y)
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Point2;

    #[test]
    fn draws_each_occupied_cell_and_the_path() {
        let mut world = OccupancyWorld::empty(10, 10, 0.5, Pose::new(1.0, 1.0, 0.0), Point2::new(4.0, 4.0)).unwrap();
        world.set_occupied(5, 5, true);
        world.set_occupied(6, 5, true);
        let path = [
            Pose::new(1.0, 1.0, 0.0),
            Pose::new(2.0, 2.0, 0.0),
            Pose::new(4.0, 4.0, 0.0),
        ];
        let svg = render_svg(&world, &path);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect x=").count(), 36 + 2);
        assert!(svg.contains("<polyline"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
