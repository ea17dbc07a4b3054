//! Deterministic SVG output for tilings.
//!
//! The y axis is flipped so that counterclockwise in the plane stays
//! counterclockwise on screen. Coordinates are printed with a fixed number
//! of decimals, so equal inputs give equal bytes.

use std::fmt::Write;

use dimer_forge::tgraph::Segment;

#[derive(Clone, Debug, PartialEq)]
pub struct RenderStyle {
    pub stroke_width: f64,
    /// Face fills, picked by white-vertex id modulo the palette length.
    pub palette: Vec<String>,
    /// Width and height of the drawing area in pixels.
    pub canvas: f64,
    pub margin: f64,
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle {
            stroke_width: 1.5,
            palette: ["#f4d35e", "#8ecae6", "#b7e4c7", "#f4a261", "#cdb4db", "#e5e5e5", "#ffafcc", "#a3c4bc"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            canvas: 800.0,
            margin: 20.0,
        }
    }
}

/// What gets drawn: face polygons, complete edges and root markers.
#[derive(Clone, Debug, Default)]
pub struct Scene {
    /// Header lines, written as an XML comment.
    pub header: Vec<String>,
    pub faces: Vec<(i64, Vec<[f64; 2]>)>,
    pub segments: Vec<Segment>,
    pub roots: Vec<[f64; 2]>,
}

struct Frame {
    min: [f64; 2],
    max_y: f64,
    scale: f64,
    margin: f64,
}

impl Frame {
    fn fit(scene: &Scene, style: &RenderStyle) -> Frame {
        let points = scene
            .faces
            .iter()
            .flat_map(|(_, p)| p.iter().copied())
            .chain(scene.segments.iter().flat_map(|s| [s.p, s.q]))
            .chain(scene.roots.iter().copied());
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for i in 0..2 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        if !lo[0].is_finite() {
            lo = [0.0, 0.0];
            hi = [1.0, 1.0];
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        Frame {
            min: lo,
            max_y: hi[1],
            scale: (style.canvas - 2.0 * style.margin) / span,
            margin: style.margin,
        }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        (
            self.margin + (p[0] - self.min[0]) * self.scale,
            self.margin + (self.max_y - p[1]) * self.scale,
        )
    }
}

fn num(x: f64) -> String {
    // Avoid "-0.000".
    let s = format!("{x:.3}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0.000".into()
    } else {
        s
    }
}

pub fn to_svg(scene: &Scene, style: &RenderStyle) -> String {
    let frame = Frame::fit(scene, style);
    let size = num(style.canvas);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    if !scene.header.is_empty() {
        let _ = writeln!(out, "<!-- {} -->", scene.header.join(" ").replace("--", "- -"));
    }
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">"
    );
    out.push_str("<g class=\"faces\" stroke=\"none\">\n");
    for (id, poly) in &scene.faces {
        let fill = if style.palette.is_empty() {
            "#dddddd"
        } else {
            &style.palette[id.rem_euclid(style.palette.len() as i64) as usize]
        };
        let points: Vec<String> = poly
            .iter()
            .map(|&p| {
                let (x, y) = frame.map(p);
                format!("{},{}", num(x), num(y))
            })
            .collect();
        let _ = writeln!(out, "<polygon data-white=\"{id}\" fill=\"{fill}\" points=\"{}\"/>", points.join(" "));
    }
    out.push_str("</g>\n");
    let _ = writeln!(
        out,
        "<g class=\"segments\" stroke=\"#222222\" stroke-width=\"{}\" stroke-linecap=\"round\">",
        num(style.stroke_width)
    );
    for s in &scene.segments {
        let (x1, y1) = frame.map(s.p);
        let (x2, y2) = frame.map(s.q);
        let _ = writeln!(out, "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>", num(x1), num(y1), num(x2), num(y2));
    }
    out.push_str("</g>\n");
    let _ = writeln!(out, "<g class=\"roots\" fill=\"#c1121f\">");
    for &r in &scene.roots {
        let (x, y) = frame.map(r);
        let _ = writeln!(out, "<circle cx=\"{}\" cy=\"{}\" r=\"{}\"/>", num(x), num(y), num(3.0 * style.stroke_width));
    }
    out.push_str("</g>\n</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_scene() -> Scene {
        Scene {
            header: vec!["seed=1".into()],
            faces: vec![(0, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])],
            segments: vec![Segment::new([0.0, 0.0], [1.0, 0.0])],
            roots: vec![[0.0, 0.0]],
        }
    }

    #[test]
    fn counts_elements() {
        let svg = to_svg(&square_scene(), &RenderStyle::default());
        assert_eq!(svg.matches("<polygon").count(), 1);
        assert_eq!(svg.matches("<line").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.contains("<!-- seed=1 -->"));
    }

    #[test]
    fn y_axis_points_up() {
        let scene = Scene {
            segments: vec![Segment::new([0.0, 0.0], [0.0, 1.0])],
            ..Scene::default()
        };
        let svg = to_svg(&scene, &RenderStyle::default());
        // Origin at the bottom of the canvas, (0, 1) at the top.
        assert!(svg.contains("x1=\"20.000\" y1=\"780.000\" x2=\"20.000\" y2=\"20.000\""), "{svg}");
    }

    #[test]
    fn output_is_deterministic() {
        let style = RenderStyle::default();
        assert_eq!(to_svg(&square_scene(), &style), to_svg(&square_scene(), &style));
    }
}
