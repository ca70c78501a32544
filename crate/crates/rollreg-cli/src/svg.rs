//! Minimal static SVG line plots: linear or log10 axes, one polyline per
//! series, a legend, and an optional slope-1/2 reference guide for log-log
//! scaling curves. Output is plain XML with fixed-precision coordinates, so
//! identical figures render to identical bytes.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log10,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    /// Dashed y ∝ √x reference through the first visible point of the first
    /// series; drawn only when both axes are logarithmic.
    pub slope_half_guide: bool,
    /// Fine print under the legend, e.g. how the plotted values were
    /// aggregated.
    pub note: Option<String>,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 560.0;
const LEFT: f64 = 78.0;
const RIGHT: f64 = 830.0;
const TOP: f64 = 52.0;
const BOTTOM: f64 = 478.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Transformed coordinate, or `None` for points a log axis cannot show.
fn tx(scale: Scale, v: f64) -> Option<f64> {
    if !v.is_finite() {
        return None;
    }
    match scale {
        Scale::Linear => Some(v),
        Scale::Log10 => (v > 0.0).then(|| v.log10()),
    }
}

/// Rounds an axis step to the 1-2-5 grid.
fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.abs().log10().floor());
    let norm = raw / mag;
    let mult = if norm <= 1.5 {
        1.0
    } else if norm <= 3.5 {
        2.0
    } else if norm <= 7.5 {
        5.0
    } else {
        10.0
    };
    mult * mag
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let step = nice_step((hi - lo) / 4.0);
    let decimals = (-(step.log10().floor())).max(0.0) as usize;
    let mut ticks = Vec::new();
    let mut k = (lo / step).ceil() as i64;
    while (k as f64) * step <= hi + step * 1e-9 {
        let v = k as f64 * step;
        ticks.push((v, format!("{v:.decimals$}")));
        k += 1;
    }
    ticks
}

/// Decade ticks in transformed (log10) coordinates; falls back to the two
/// endpoints when the range sits inside a single decade.
fn log_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let first = (lo - 1e-9).ceil() as i64;
    let last = (hi + 1e-9).floor() as i64;
    if first > last {
        return vec![
            (lo, format!("{:.2e}", 10f64.powf(lo))),
            (hi, format!("{:.2e}", 10f64.powf(hi))),
        ];
    }
    (first..=last).map(|k| (k as f64, format!("1e{k}"))).collect()
}

struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn grow(&mut self, v: f64) {
        self.lo = self.lo.min(v);
        self.hi = self.hi.max(v);
    }

    fn pad_if_degenerate(&mut self) {
        if self.lo == self.hi {
            let pad = self.lo.abs().max(1.0) * 0.1;
            self.lo -= pad;
            self.hi += pad;
        }
    }

    fn to_pixels(&self, v: f64, px_lo: f64, px_hi: f64) -> f64 {
        px_lo + (v - self.lo) / (self.hi - self.lo) * (px_hi - px_lo)
    }
}

pub fn render_svg(fig: &Figure) -> Result<String> {
    // Transform every series, dropping points a log axis cannot represent.
    let visible: Vec<(String, Vec<(f64, f64)>)> = fig
        .series
        .iter()
        .map(|s| {
            let pts = s
                .points
                .iter()
                .filter_map(|&(x, y)| Some((tx(fig.x_scale, x)?, tx(fig.y_scale, y)?)))
                .collect::<Vec<_>>();
            (s.label.clone(), pts)
        })
        .collect();
    let total: usize = visible.iter().map(|(_, p)| p.len()).sum();
    if total == 0 {
        return Err(Error::Invalid("nothing to plot: no representable points".into()));
    }

    let mut xr = Range { lo: f64::INFINITY, hi: f64::NEG_INFINITY };
    let mut yr = Range { lo: f64::INFINITY, hi: f64::NEG_INFINITY };
    for (_, pts) in &visible {
        for &(x, y) in pts {
            xr.grow(x);
            yr.grow(y);
        }
    }

    let guide = (fig.slope_half_guide
        && fig.x_scale == Scale::Log10
        && fig.y_scale == Scale::Log10)
        .then(|| visible.iter().find_map(|(_, p)| p.first().copied()))
        .flatten();
    if let Some((x0, y0)) = guide {
        // In log-log space the guide is the line through (x0, y0) with
        // slope 1/2; include its endpoints so it stays inside the frame.
        xr.pad_if_degenerate();
        yr.grow(y0 + 0.5 * (xr.lo - x0));
        yr.grow(y0 + 0.5 * (xr.hi - x0));
    }
    xr.pad_if_degenerate();
    yr.pad_if_degenerate();

    let px = |x: f64| xr.to_pixels(x, LEFT, RIGHT);
    let py = |y: f64| yr.to_pixels(y, BOTTOM, TOP);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"28\" text-anchor=\"middle\" font-size=\"17\">{}</text>\n",
        (LEFT + RIGHT) / 2.0,
        esc(&fig.title)
    ));

    let x_ticks = match fig.x_scale {
        Scale::Linear => linear_ticks(xr.lo, xr.hi),
        Scale::Log10 => log_ticks(xr.lo, xr.hi),
    };
    let y_ticks = match fig.y_scale {
        Scale::Linear => linear_ticks(yr.lo, yr.hi),
        Scale::Log10 => log_ticks(yr.lo, yr.hi),
    };
    for (v, label) in &x_ticks {
        let x = px(*v);
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{TOP}\" x2=\"{x:.2}\" y2=\"{BOTTOM}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n",
            BOTTOM + 18.0,
            esc(label)
        ));
    }
    for (v, label) in &y_ticks {
        let y = py(*v);
        svg.push_str(&format!(
            "<line x1=\"{LEFT}\" y1=\"{y:.2}\" x2=\"{RIGHT}\" y2=\"{y:.2}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"12\">{}</text>\n",
            LEFT - 8.0,
            y + 4.0,
            esc(label)
        ));
    }
    svg.push_str(&format!(
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" \
         stroke=\"#333333\" stroke-width=\"1\"/>\n",
        RIGHT - LEFT,
        BOTTOM - TOP
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        (LEFT + RIGHT) / 2.0,
        HEIGHT - 18.0,
        esc(&fig.x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"22\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"14\" \
         transform=\"rotate(-90 22 {:.1})\">{}</text>\n",
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0,
        esc(&fig.y_label)
    ));

    if let Some((x0, y0)) = guide {
        let (gx0, gx1) = (xr.lo, xr.hi);
        let (gy0, gy1) = (y0 + 0.5 * (gx0 - x0), y0 + 0.5 * (gx1 - x0));
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#999999\" \
             stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>\n",
            px(gx0),
            py(gy0),
            px(gx1),
            py(gy1)
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#777777\">slope 1/2</text>\n",
            px(gx1) - 70.0,
            py(gy1) - 6.0
        ));
    }

    for (i, (_, pts)) in visible.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> =
            pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
        if pts.len() <= 64 {
            for &(x, y) in pts {
                svg.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>\n",
                    px(x),
                    py(y)
                ));
            }
        }
    }

    let legend_x = LEFT + 12.0;
    let mut legend_y = TOP + 16.0;
    for (i, (label, _)) in visible.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        svg.push_str(&format!(
            "<line x1=\"{legend_x}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n",
            legend_y - 4.0,
            legend_x + 22.0,
            legend_y - 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{legend_y:.1}\" font-size=\"12\">{}</text>\n",
            legend_x + 28.0,
            esc(label)
        ));
        legend_y += 17.0;
    }
    if let Some(note) = &fig.note {
        svg.push_str(&format!(
            "<text x=\"{legend_x}\" y=\"{legend_y:.1}\" font-size=\"11\" \
             fill=\"#777777\">{}</text>\n",
            esc(note)
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_series_figure() -> Figure {
        Figure {
            title: "loss vs position".into(),
            x_label: "offset".into(),
            y_label: "window loss".into(),
            x_scale: Scale::Linear,
            y_scale: Scale::Log10,
            slope_half_guide: false,
            note: Some("y: per-window mean loss".into()),
            series: vec![Series {
                label: "eta1=0.5".into(),
                points: vec![(0.0, 4.0), (8.0, 2.0), (16.0, 1.0), (24.0, 0.5)],
            }],
        }
    }

    #[test]
    fn render_emits_one_polyline_per_series() {
        let mut fig = one_series_figure();
        fig.series.push(Series {
            label: "eta1=0.25".into(),
            points: vec![(0.0, 5.0), (8.0, 4.0), (16.0, 3.5)],
        });
        let svg = render_svg(&fig).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("eta1=0.5") && svg.contains("eta1=0.25"), "legend lists labels");
    }

    #[test]
    fn log_axis_drops_nonpositive_points_instead_of_failing() {
        let mut fig = one_series_figure();
        fig.series[0].points.push((32.0, 0.0));
        let svg = render_svg(&fig).unwrap();
        assert_eq!(svg.matches("<circle").count(), 4, "zero-loss point is dropped");
    }

    #[test]
    fn all_points_unrepresentable_is_an_error() {
        let mut fig = one_series_figure();
        fig.series[0].points = vec![(1.0, 0.0), (2.0, -1.0)];
        assert!(render_svg(&fig).is_err());
    }

    #[test]
    fn loglog_guide_appears_only_on_loglog_axes() {
        let mut fig = one_series_figure();
        fig.slope_half_guide = true;
        let svg = render_svg(&fig).unwrap();
        assert!(!svg.contains("slope 1/2"), "guide needs log-log axes");
        fig.x_scale = Scale::Log10;
        fig.series[0].points = vec![(256.0, 10.0), (1024.0, 20.0), (4096.0, 40.0)];
        let svg = render_svg(&fig).unwrap();
        assert!(svg.contains("slope 1/2"));
        assert!(svg.contains("stroke-dasharray"));
    }

    #[test]
    fn labels_are_xml_escaped() {
        let mut fig = one_series_figure();
        fig.title = "a < b & c".into();
        let svg = render_svg(&fig).unwrap();
        assert!(svg.contains("a &lt; b &amp; c"));
        assert!(!svg.contains("a < b & c"));
    }

    #[test]
    fn single_point_series_still_renders() {
        let mut fig = one_series_figure();
        fig.series[0].points = vec![(1.0, 1.0)];
        let svg = render_svg(&fig).unwrap();
        assert!(svg.starts_with("<svg ") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn identical_figures_render_identical_bytes() {
        let a = render_svg(&one_series_figure()).unwrap();
        let b = render_svg(&one_series_figure()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_ticks_land_on_round_values() {
        let ticks = linear_ticks(0.0, 100.0);
        let labels: Vec<&str> = ticks.iter().map(|(_, l)| l.as_str()).collect();
        assert!(labels.contains(&"0") && labels.contains(&"100"), "got {labels:?}");
        assert!(ticks.iter().all(|(v, _)| v % 20.0 == 0.0), "1-2-5 step, got {labels:?}");
        let ticks = linear_ticks(0.0, 0.9);
        assert!(ticks.iter().all(|(v, _)| (v / 0.2 - (v / 0.2).round()).abs() < 1e-9));
    }

    #[test]
    fn log_ticks_cover_the_decades() {
        let ticks = log_ticks(0.3, 3.7);
        let labels: Vec<&str> = ticks.iter().map(|(_, l)| l.as_str()).collect();
        assert_eq!(labels, vec!["1e1", "1e2", "1e3"]);
        let inside = log_ticks(1.1, 1.4);
        assert_eq!(inside.len(), 2, "single-decade fallback uses the endpoints");
    }
}
