//! SVG line charts of summary quantiles against sample size: one median
//! polyline and one shaded interquartile band per event rate.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mc::{Split, SummaryMetric, SummaryRecord};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 130.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Selects the summary rows drawn in one chart, written `config:metric:split`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellFilter {
    pub config_id: String,
    pub metric: SummaryMetric,
    pub split: Split,
}

impl FromStr for CellFilter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [config_id, metric, split] = parts[..] else {
            return Err(format!("cell filter `{s}` must look like config:metric:split"));
        };
        Ok(Self { config_id: config_id.to_owned(), metric: metric.parse()?, split: split.parse()? })
    }
}

/// One plotted event rate, with points sorted by sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub event_rate: f64,
    /// `(n, q25, median, q75)`
    pub points: Vec<(f64, f64, f64, f64)>,
}

pub fn select_series(summary: &[SummaryRecord], filter: &CellFilter) -> Vec<Series> {
    let mut series: Vec<Series> = Vec::new();
    for s in summary
        .iter()
        .filter(|s| s.config_id == filter.config_id && s.metric == filter.metric && s.split == filter.split)
    {
        let point = (s.n as f64, s.q25, s.median, s.q75);
        match series.iter_mut().find(|x| x.event_rate == s.event_rate) {
            Some(x) => x.points.push(point),
            None => series.push(Series { event_rate: s.event_rate, points: vec![point] }),
        }
    }
    for s in &mut series {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    series.sort_by(|a, b| a.event_rate.total_cmp(&b.event_rate));
    series
}

fn nice_step(span: f64, target_ticks: f64) -> f64 {
    let raw = span / target_ticks;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn fmt_rate(rate: f64) -> String {
    format!("{}%", (rate * 1e4).round() / 1e2)
}

pub fn emit_chart(summary: &[SummaryRecord], filter: &CellFilter) -> Result<String> {
    let series = select_series(summary, filter);
    if series.is_empty() {
        return Err(Error::EmptyCell(format!("{}:{}:{}", filter.config_id, filter.metric, filter.split)));
    }

    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (x_min, x_max) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let ys = series.iter().flat_map(|s| s.points.iter().flat_map(|p| [p.1, p.3]));
    let (mut y_min, mut y_max) = ys.fold((0.0_f64, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y)));
    y_max = y_max.max(1.0);
    if filter.metric == SummaryMetric::Gini {
        y_min = y_min.min(0.0);
    }
    let y_span = y_max - y_min;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x_min) / x_span * plot_w;
    let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y_min) / y_span) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">Configuration {}: {} ({})</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(&filter.config_id),
        filter.metric,
        filter.split
    );

    // axes and ticks
    let (left, right, top, bottom) = (sx(x_min), sx(x_max), sy(y_max), sy(y_min));
    let _ = writeln!(
        svg,
        r#"<path d="M{left:.2},{top:.2} L{left:.2},{bottom:.2} L{right:.2},{bottom:.2}" fill="none" stroke="black"/>"#
    );
    let y_step = nice_step(y_span, 5.0);
    let mut y = (y_min / y_step).ceil() * y_step;
    while y <= y_max + 1e-9 {
        let py = sy(y);
        let _ = writeln!(
            svg,
            r##"<line x1="{left:.2}" y1="{py:.2}" x2="{right:.2}" y2="{py:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            left - 6.0,
            py + 4.0,
            (y * 100.0).round() / 100.0
        );
        y += y_step;
    }
    let x_step = nice_step(x_span, 6.0);
    let mut x = (x_min / x_step).ceil() * x_step;
    while x <= x_max + 1e-9 {
        let px = sx(x);
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{bottom:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{x}</text>"#,
            bottom + 5.0,
            bottom + 18.0
        );
        x += x_step;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Sample size</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        filter.metric
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper = s.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.3)));
        let lower = s.points.iter().rev().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(
            svg,
            r#"<polygon class="band" data-rate="{}" points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
            s.event_rate,
            band.join(" ")
        );
        let median: Vec<String> = s.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.2))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="median" data-rate="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            s.event_rate,
            median.join(" ")
        );
        let ly = MARGIN_TOP + 16.0 + 20.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT + 16.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            fmt_rate(s.event_rate)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(rate: f64, n: usize, median: f64) -> SummaryRecord {
        SummaryRecord {
            config_id: "B".into(),
            aiv: 2.3,
            n,
            event_rate: rate,
            metric: SummaryMetric::F1,
            split: Split::Test,
            median,
            q25: median - 0.05,
            q75: median + 0.05,
            p05: median - 0.1,
            p95: median + 0.1,
            n_iter: 10,
            n_nonconverged: 0,
        }
    }

    #[test]
    fn filter_parsing() {
        let f: CellFilter = "B:f1:test".parse().unwrap();
        assert_eq!(f, CellFilter { config_id: "B".into(), metric: SummaryMetric::F1, split: Split::Test });
        assert!("B:f1".parse::<CellFilter>().is_err());
        assert!("B:auc:test".parse::<CellFilter>().is_err());
        assert!("B:f1:train".parse::<CellFilter>().is_err());
    }

    #[test]
    fn one_band_and_line_per_rate() {
        let mut summary = Vec::new();
        for rate in [0.01, 0.05, 0.1] {
            for n in [500, 100, 2500] {
                summary.push(record(rate, n, rate * 3.0 + n as f64 / 1e4));
            }
        }
        summary.push(SummaryRecord { config_id: "C".into(), ..record(0.2, 100, 0.5) });
        let svg = emit_chart(&summary, &"B:f1:test".parse().unwrap()).unwrap();
        assert_eq!(svg.matches("<polyline class=\"median\"").count(), 3);
        assert_eq!(svg.matches("<polygon class=\"band\"").count(), 3);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("5%"));

        let series = select_series(&summary, &"B:f1:test".parse().unwrap());
        assert_eq!(series[0].points.iter().map(|p| p.0).collect::<Vec<_>>(), [100.0, 500.0, 2500.0]);
    }

    #[test]
    fn empty_selection_errors() {
        let summary = vec![record(0.1, 100, 0.3)];
        assert!(emit_chart(&summary, &"Z:f1:test".parse().unwrap()).is_err());
    }
}
