//! SVG Gantt chart of a schedule: one horizontal lane per machine, one
//! rectangle per operation.

use std::fmt::Write as _;

use crate::model::{JobShopInstance, Schedule};

const LANE_HEIGHT: f64 = 30.0;
const BAR_HEIGHT: f64 = 22.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 20.0;
const WIDTH: f64 = 800.0;
const PALETTE: [&str; 10] =
    ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"];

/// Renders `schedule`. Each rectangle carries `data-job`, `data-op`,
/// `data-start` and `data-end` with the exact schedule times.
pub fn render_svg(instance: &JobShopInstance, schedule: &Schedule) -> String {
    let horizon = schedule.ends.iter().flatten().copied().max().unwrap_or(0).max(1);
    let scale = WIDTH / horizon as f64;
    let lanes = instance.num_machines();
    let height = TOP * 2.0 + LANE_HEIGHT * lanes as f64 + 20.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="11">"#,
        LEFT + WIDTH + 20.0
    );
    for m in 0..lanes {
        let y = TOP + LANE_HEIGHT * m as f64;
        let _ = writeln!(svg, r#"<g class="lane" data-machine="{m}">"#);
        let _ = writeln!(svg, r#"<text x="4" y="{}">M{m}</text>"#, y + BAR_HEIGHT / 2.0 + 4.0);
        for op in instance.ops().filter(|&op| instance.machine(op) == m) {
            let (start, end) = (schedule.start(op), schedule.end(op));
            let x = LEFT + start as f64 * scale;
            let w = (end - start) as f64 * scale;
            let _ = writeln!(
                svg,
                r#"<rect x="{x:.2}" y="{y}" width="{w:.2}" height="{BAR_HEIGHT}" fill="{}" stroke="black" data-job="{}" data-op="{}" data-start="{start}" data-end="{end}"><title>job {} op {}: {start}-{end}</title></rect>"#,
                PALETTE[op.job % PALETTE.len()],
                op.job,
                op.op,
                op.job,
                op.op
            );
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{}">{op}</text>"#, x + 2.0, y + BAR_HEIGHT / 2.0 + 4.0);
        }
        svg.push_str("</g>\n");
    }
    let axis_y = TOP + LANE_HEIGHT * lanes as f64 + 12.0;
    let _ = writeln!(svg, r#"<text x="{LEFT}" y="{axis_y}">0</text>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="{axis_y}" text-anchor="end">{horizon}</text>"#, LEFT + WIDTH);
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{generate_instance, ScenarioSpec, ScenarioType};
    use crate::rng::seeded_rng;
    use crate::solver::{solve, SolveConfig};

    #[test]
    fn one_rect_per_operation() {
        let inst = generate_instance(&ScenarioSpec::new(ScenarioType::MinMakespan, 3, 3), &mut seeded_rng(2)).unwrap();
        let s = solve(&inst, &SolveConfig::default()).unwrap().schedule.unwrap();
        let svg = render_svg(&inst, &s);
        assert_eq!(svg.matches("<rect ").count(), 9);
        assert_eq!(svg.matches(r#"class="lane""#).count(), 3);
        assert!(svg.contains(&format!(r#"data-job="0" data-op="0" data-start="{}""#, s.starts[0][0])));
    }
}
