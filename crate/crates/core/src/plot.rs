//! SVG rendering of prediction curves and interval charts.

use std::fmt::Write;

use crate::error::Result;
use crate::eval::{Estimator, LooReport, REFERENCE_LEVEL};
use crate::regress::{PredictionCurve, DISPLAY_SMOOTHING};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;
const ROW: f64 = 18.0;

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Svg {
            body: String::new(),
            width,
            height,
        }
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
            w.max(0.0),
            h.max(0.0)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width}"/>"#
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str) {
        let p: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="2"/>"#,
            p.join(" ")
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="11" font-family="sans-serif" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Round tick step giving roughly `target` ticks over `span`.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

fn year_label(y: f64) -> String {
    if y < 0.0 {
        format!("{} BCE", -y)
    } else {
        format!("{y} CE")
    }
}

fn year_axis(svg: &mut Svg, lo: f64, hi: f64, x: &dyn Fn(f64) -> f64, base: f64) {
    svg.line(x(lo), base, x(hi), base, "black", 1.0);
    let step = tick_step(hi - lo, 8.0);
    let mut t = (lo / step).ceil() * step;
    while t <= hi + 1e-9 {
        svg.line(x(t), base, x(t), base + 4.0, "black", 1.0);
        svg.text(x(t), base + 16.0, "middle", &year_label(t));
        t += step;
    }
}

/// Per-bin probability as red bars, per-bin 1σ as grey spikes and the
/// smoothed display curve in blue.
pub fn curve_svg(curve: &PredictionCurve, title: &str) -> String {
    let tl = &curve.timeline;
    let (lo, hi) = (tl.start, tl.end);
    let shown = curve.display_mean();
    let smooth = curve.smoothed(DISPLAY_SMOOTHING);
    let top = (0..curve.len())
        .map(|i| shown[i] + curve.sigma[i])
        .chain(smooth.iter().copied())
        .fold(1e-12, f64::max);
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let base = HEIGHT - MARGIN;
    let x = |year: f64| MARGIN + (year - lo) / (hi - lo) * (WIDTH - 2.0 * MARGIN);
    let y = |v: f64| base - v.max(0.0) / top * plot_h;

    let mut svg = Svg::new(WIDTH, HEIGHT);
    svg.text(WIDTH / 2.0, MARGIN / 2.0, "middle", title);
    for i in 0..curve.len() {
        let (a, b) = (x(tl.bin_start(i)), x(tl.bin_start(i) + tl.width));
        svg.rect(
            a + 0.5,
            y(shown[i]),
            b - a - 1.0,
            base - y(shown[i]),
            "#d62728",
        );
    }
    for i in 0..curve.len() {
        let c = x(tl.bin_year(i));
        svg.line(
            c,
            y(curve.mean[i] - curve.sigma[i]),
            c,
            y(curve.mean[i] + curve.sigma[i]),
            "#7f7f7f",
            1.0,
        );
    }
    let pts: Vec<(f64, f64)> = (0..curve.len())
        .map(|i| (x(tl.bin_year(i)), y(smooth[i])))
        .collect();
    svg.polyline(&pts, "#1f77b4");
    year_axis(&mut svg, lo, hi, &x, base);
    svg.finish()
}

/// One manuscript in an interval chart.
#[derive(Debug, Clone, PartialEq)]
pub struct GanttRow {
    pub label: String,
    pub reference: Vec<(f64, f64)>,
    pub prediction: Option<(f64, f64)>,
}

/// Reference intervals in blue with the predicted interval in green below.
pub fn gantt_svg(rows: &[GanttRow], title: &str) -> String {
    let ends = rows.iter().flat_map(|r| {
        r.reference
            .iter()
            .copied()
            .chain(r.prediction)
            .flat_map(|(a, b)| [a, b])
    });
    let (mut lo, mut hi) = ends.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
        (l.min(v), h.max(v))
    });
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1.0 {
        hi = lo + 1.0;
    }
    let label_w = 110.0;
    let height = 2.0 * MARGIN + rows.len() as f64 * 2.0 * ROW;
    let mut svg = Svg::new(WIDTH + label_w, height);
    let x = |year: f64| label_w + MARGIN + (year - lo) / (hi - lo) * (WIDTH - 2.0 * MARGIN);
    svg.text((WIDTH + label_w) / 2.0, MARGIN / 2.0, "middle", title);
    for (k, r) in rows.iter().enumerate() {
        let top = MARGIN + k as f64 * 2.0 * ROW;
        svg.text(label_w + MARGIN - 6.0, top + ROW, "end", &r.label);
        for &(a, b) in &r.reference {
            svg.rect(x(a), top + 2.0, x(b) - x(a), ROW / 2.0 + 2.0, "#1f77b4");
        }
        if let Some((a, b)) = r.prediction {
            svg.rect(x(a), top + ROW, x(b) - x(a), ROW / 2.0 + 2.0, "#2ca02c");
        }
    }
    year_axis(&mut svg, lo, hi, &x, height - MARGIN);
    svg.finish()
}

/// Gantt rows of a validation run; failed folds have no prediction.
pub fn report_rows(report: &LooReport, est: Estimator) -> Result<Vec<GanttRow>> {
    report
        .folds
        .iter()
        .map(|f| {
            let reference = f
                .reference
                .hpd_ranges(REFERENCE_LEVEL)?
                .intervals
                .iter()
                .map(|i| (i.start, i.end))
                .collect();
            let prediction = if f.error.is_none() {
                let (y, s) = report.point(f, est)?;
                let half = s.max(report.config.min_half_width);
                Some((y - half, y + half))
            } else {
                None
            };
            Ok(GanttRow {
                label: f.id.clone(),
                reference,
                prediction,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::Timeline;

    fn curve() -> PredictionCurve {
        let timeline = Timeline::new(-100.0, 100.0, 10.0).unwrap();
        let n = timeline.bins();
        PredictionCurve {
            timeline,
            mean: (0..n)
                .map(|i| {
                    if i == 7 {
                        0.4
                    } else {
                        0.03 - 0.01 * (i % 5) as f64
                    }
                })
                .collect(),
            sigma: vec![0.02; n],
        }
    }

    #[test]
    fn curve_plot_has_one_bar_and_spike_per_bin() {
        let svg = curve_svg(&curve(), "a <b>");
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("fill=\"#d62728\"").count(), 20);
        assert_eq!(svg.matches("stroke=\"#7f7f7f\"").count(), 20);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("a &lt;b&gt;"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn gantt_draws_every_interval() {
        let rows = vec![
            GanttRow {
                label: "one".into(),
                reference: vec![(-200.0, -150.0), (-120.0, -90.0)],
                prediction: Some((-180.0, -100.0)),
            },
            GanttRow {
                label: "two".into(),
                reference: vec![(10.0, 40.0)],
                prediction: None,
            },
        ];
        let svg = gantt_svg(&rows, "t");
        assert_eq!(svg.matches("#1f77b4").count(), 3);
        assert_eq!(svg.matches("#2ca02c").count(), 1);
        assert!(svg.contains("200 BCE"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn empty_chart_is_still_valid() {
        let svg = gantt_svg(&[], "none");
        assert!(svg.contains("</svg>") && !svg.contains("NaN"));
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(tick_step(500.0, 8.0), 100.0);
        assert_eq!(tick_step(200.0, 8.0), 50.0);
        assert_eq!(year_label(-150.0), "150 BCE");
    }
}
