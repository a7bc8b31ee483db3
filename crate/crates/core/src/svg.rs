//! Deterministic standalone SVG plots: scatter, boundary-grid, and line
//! charts. No external references, fixed palette, fixed float formatting —
//! identical inputs always render byte-identical files.

use crate::analysis::BoundaryGrid;
use crate::graph::Split;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

/// Fill colors by class index (wraps past ten classes).
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub fn class_color(class: usize) -> &'static str {
    PALETTE[class % PALETTE.len()]
}

#[derive(Debug, Clone)]
pub struct PlotStyle {
    pub width: u32,
    pub height: u32,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            title: String::new(),
            x_label: String::new(),
            y_label: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub class: usize,
    /// Emphasized points get a dark stroke (used for test nodes).
    pub highlight: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// The one plot input type: a point cloud, a classified grid with node
/// positions, or x/y series.
#[derive(Debug)]
pub enum SvgPlot<'a> {
    Scatter(&'a [ScatterPoint]),
    Boundary(&'a BoundaryGrid),
    Lines(&'a [LineSeries]),
}

/// Render to a string; `emit_svg_scatter` writes the same bytes to a file.
pub fn render_svg(plot: &SvgPlot, style: &PlotStyle) -> String {
    let mut canvas = Canvas::new(style, data_bounds(plot));
    match plot {
        SvgPlot::Scatter(points) => {
            for p in *points {
                canvas.circle(p.x, p.y, 3.0, class_color(p.class), p.highlight);
            }
        }
        SvgPlot::Boundary(grid) => render_boundary(&mut canvas, grid),
        SvgPlot::Lines(series) => render_lines(&mut canvas, series),
    }
    canvas.finish()
}

pub fn emit_svg_scatter(plot: &SvgPlot, style: &PlotStyle, path: &Path) -> io::Result<()> {
    std::fs::write(path, render_svg(plot, style))
}

fn data_bounds(plot: &SvgPlot) -> ((f64, f64), (f64, f64)) {
    let mut min = (f64::INFINITY, f64::INFINITY);
    let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut cover = |x: f64, y: f64| {
        min.0 = min.0.min(x);
        min.1 = min.1.min(y);
        max.0 = max.0.max(x);
        max.1 = max.1.max(y);
    };
    match plot {
        SvgPlot::Scatter(points) => {
            for p in *points {
                cover(p.x, p.y);
            }
        }
        SvgPlot::Boundary(grid) => {
            cover(grid.x_range.0, grid.y_range.0);
            cover(grid.x_range.1, grid.y_range.1);
        }
        SvgPlot::Lines(series) => {
            for s in *series {
                for &(x, y) in &s.points {
                    cover(x, y);
                }
            }
        }
    }
    if !min.0.is_finite() {
        return ((0.0, 1.0), (0.0, 1.0));
    }
    let pad = |lo: f64, hi: f64| {
        let span = (hi - lo).max(1e-9);
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    // The grid box is already padded; padding again is harmless but would
    // misalign cell rectangles, so only point/line plots get padded.
    match plot {
        SvgPlot::Boundary(_) => ((min.0, max.0), (min.1, max.1)),
        _ => (pad(min.0, max.0), pad(min.1, max.1)),
    }
}

const MARGIN: f64 = 50.0;

/// Accumulates SVG elements over a fixed data-to-pixel transform.
struct Canvas {
    body: String,
    width: f64,
    height: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Canvas {
    fn new(style: &PlotStyle, (x_range, y_range): ((f64, f64), (f64, f64))) -> Self {
        let width = style.width as f64;
        let height = style.height as f64;
        let mut body = String::new();
        let _ = writeln!(
            body,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
            style.width, style.height, style.width, style.height
        );
        let _ = writeln!(body, "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>", style.width, style.height);
        if !style.title.is_empty() {
            let _ = writeln!(
                body,
                "<text x=\"{:.3}\" y=\"20\" font-family=\"monospace\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
                width / 2.0,
                escape(&style.title)
            );
        }
        let mut canvas = Self { body, width, height, x_range, y_range };
        canvas.axes(style);
        canvas
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_range.0) / (self.x_range.1 - self.x_range.0) * (self.width - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        self.height
            - MARGIN
            - (y - self.y_range.0) / (self.y_range.1 - self.y_range.0) * (self.height - 2.0 * MARGIN)
    }

    fn axes(&mut self, style: &PlotStyle) {
        let (x0, x1) = (MARGIN, self.width - MARGIN);
        let (y0, y1) = (self.height - MARGIN, MARGIN);
        let _ = writeln!(
            self.body,
            "<line x1=\"{x0:.3}\" y1=\"{y0:.3}\" x2=\"{x1:.3}\" y2=\"{y0:.3}\" stroke=\"#333333\" stroke-width=\"1\"/>"
        );
        let _ = writeln!(
            self.body,
            "<line x1=\"{x0:.3}\" y1=\"{y0:.3}\" x2=\"{x0:.3}\" y2=\"{y1:.3}\" stroke=\"#333333\" stroke-width=\"1\"/>"
        );
        for (value, x, y, anchor) in [
            (self.x_range.0, x0, y0 + 16.0, "middle"),
            (self.x_range.1, x1, y0 + 16.0, "middle"),
            (self.y_range.0, x0 - 6.0, y0, "end"),
            (self.y_range.1, x0 - 6.0, y1 + 4.0, "end"),
        ] {
            let _ = writeln!(
                self.body,
                "<text x=\"{x:.3}\" y=\"{y:.3}\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"{anchor}\">{value:.3}</text>"
            );
        }
        if !style.x_label.is_empty() {
            let _ = writeln!(
                self.body,
                "<text x=\"{:.3}\" y=\"{:.3}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
                self.width / 2.0,
                self.height - 12.0,
                escape(&style.x_label)
            );
        }
        if !style.y_label.is_empty() {
            let _ = writeln!(
                self.body,
                "<text x=\"14\" y=\"{:.3}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.3})\">{}</text>",
                self.height / 2.0,
                self.height / 2.0,
                escape(&style.y_label)
            );
        }
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str, highlight: bool) {
        let stroke = if highlight { " stroke=\"#222222\" stroke-width=\"1\"" } else { "" };
        let _ = writeln!(
            self.body,
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"{r:.3}\" fill=\"{fill}\"{stroke}/>",
            self.px(x),
            self.py(y)
        );
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn render_boundary(canvas: &mut Canvas, grid: &BoundaryGrid) {
    let res = grid.resolution;
    let dx = (grid.x_range.1 - grid.x_range.0) / res as f64;
    let dy = (grid.y_range.1 - grid.y_range.0) / res as f64;
    // Horizontal runs of equally classified cells collapse into one rect.
    for row in 0..res {
        let mut col = 0;
        while col < res {
            let class = grid.cells[row * res + col];
            let mut end = col + 1;
            while end < res && grid.cells[row * res + end] == class {
                end += 1;
            }
            let x = grid.x_range.0 + col as f64 * dx;
            let y = grid.y_range.0 + (row + 1) as f64 * dy;
            let w = canvas.px(x + (end - col) as f64 * dx) - canvas.px(x);
            let h = canvas.py(y - dy) - canvas.py(y);
            let _ = writeln!(
                canvas.body,
                "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"{}\" fill-opacity=\"0.2\"/>",
                canvas.px(x),
                canvas.py(y),
                w,
                h,
                class_color(class)
            );
            col = end;
        }
    }
    // Movement of test nodes under aggregation, then raw (circle) and
    // aggregated (square) positions.
    for node in &grid.nodes {
        if node.split == Some(Split::Test) && node.raw != node.aggregated {
            let _ = writeln!(
                canvas.body,
                "<line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"#999999\" stroke-width=\"0.5\"/>",
                canvas.px(node.raw.0),
                canvas.py(node.raw.1),
                canvas.px(node.aggregated.0),
                canvas.py(node.aggregated.1)
            );
        }
    }
    for node in &grid.nodes {
        let color = node.label.map_or("#444444", class_color);
        canvas.circle(node.raw.0, node.raw.1, 2.5, color, node.split == Some(Split::Test));
        let (cx, cy) = (canvas.px(node.aggregated.0), canvas.py(node.aggregated.1));
        let _ = writeln!(
            canvas.body,
            "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"4\" height=\"4\" fill=\"{color}\" stroke=\"#ffffff\" stroke-width=\"0.5\"/>",
            cx - 2.0,
            cy - 2.0
        );
    }
}

fn render_lines(canvas: &mut Canvas, series: &[LineSeries]) {
    for (index, line) in series.iter().enumerate() {
        let color = class_color(index);
        let mut points = String::new();
        for &(x, y) in &line.points {
            let _ = write!(points, "{:.3},{:.3} ", canvas.px(x), canvas.py(y));
        }
        let _ = writeln!(
            canvas.body,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            points.trim_end()
        );
        for &(x, y) in &line.points {
            canvas.circle(x, y, 2.5, color, false);
        }
        let ly = MARGIN + 14.0 * index as f64;
        let lx = canvas.width - MARGIN - 110.0;
        let _ = writeln!(
            canvas.body,
            "<line x1=\"{lx:.3}\" y1=\"{ly:.3}\" x2=\"{:.3}\" y2=\"{ly:.3}\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            lx + 18.0
        );
        let _ = writeln!(
            canvas.body,
            "<text x=\"{:.3}\" y=\"{:.3}\" font-family=\"monospace\" font-size=\"11\">{}</text>",
            lx + 24.0,
            ly + 4.0,
            escape(&line.name)
        );
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_points() -> Vec<ScatterPoint> {
        vec![
            ScatterPoint { x: 0.0, y: 0.0, class: 0, highlight: false },
            ScatterPoint { x: 1.0, y: 1.0, class: 1, highlight: true },
            ScatterPoint { x: 0.5, y: 0.25, class: 0, highlight: false },
        ]
    }

    #[test]
    fn scatter_has_one_circle_per_point_and_distinct_class_colors() {
        let points = three_points();
        let svg = render_svg(&SvgPlot::Scatter(&points), &PlotStyle::default());
        assert_eq!(svg.matches("<circle ").count(), 3);
        let fills: std::collections::BTreeSet<&str> = svg
            .match_indices("fill=\"#")
            .map(|(i, _)| &svg[i + 6..i + 13])
            .filter(|c| PALETTE.contains(c))
            .collect();
        assert_eq!(fills.len(), 2, "two classes, two colors: {fills:?}");
    }

    #[test]
    fn empty_scatter_is_a_valid_svg_with_axes() {
        let svg = render_svg(&SvgPlot::Scatter(&[]), &PlotStyle::default());
        assert!(svg.starts_with("<svg "));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.matches("<line ").count() >= 2, "both axes present");
        assert_eq!(svg.matches("<circle ").count(), 0);
    }

    #[test]
    fn rendering_is_byte_deterministic() {
        let points = three_points();
        let style = PlotStyle { title: "margins".into(), ..PlotStyle::default() };
        let a = render_svg(&SvgPlot::Scatter(&points), &style);
        let b = render_svg(&SvgPlot::Scatter(&points), &style);
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        emit_svg_scatter(&SvgPlot::Scatter(&points), &style, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), a);
    }

    #[test]
    fn boundary_rects_merge_runs_per_row() {
        use crate::analysis::BoundaryGrid;
        let grid = BoundaryGrid {
            x_range: (0.0, 1.0),
            y_range: (0.0, 1.0),
            resolution: 4,
            cells: vec![0, 0, 1, 1, 0, 1, 1, 1, 0, 0, 0, 0, 1, 0, 1, 0],
            nodes: Vec::new(),
        };
        let svg = render_svg(&SvgPlot::Boundary(&grid), &PlotStyle::default());
        // Runs per row: 2 + 2 + 1 + 4 = 9 cell rects, plus the background.
        assert_eq!(svg.matches("<rect ").count(), 9 + 1);
        assert!(svg.contains(PALETTE[0]) && svg.contains(PALETTE[1]));
    }

    #[test]
    fn line_chart_draws_each_series_with_legend() {
        let series = vec![
            LineSeries { name: "gcn".into(), points: vec![(0.1, 0.6), (0.5, 0.8), (0.9, 0.85)] },
            LineSeries { name: "hmlp".into(), points: vec![(0.1, 0.5), (0.5, 0.78), (0.9, 0.86)] },
        ];
        let svg = render_svg(&SvgPlot::Lines(&series), &PlotStyle::default());
        assert_eq!(svg.matches("<polyline ").count(), 2);
        assert!(svg.contains(">gcn</text>") && svg.contains(">hmlp</text>"));
    }

    #[test]
    fn titles_are_escaped() {
        let style = PlotStyle { title: "a < b & c".into(), ..PlotStyle::default() };
        let svg = render_svg(&SvgPlot::Scatter(&[]), &style);
        assert!(svg.contains("a &lt; b &amp; c"));
    }
}
