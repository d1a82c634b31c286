//! Text tables and standalone SVG bar charts for model comparisons and
//! importance rankings.

use std::fmt::Write as _;

use crate::dataset::Variable;
use crate::error::{Error, Result};
use crate::features::ImportanceRanking;
use crate::metrics::MetricsReport;

pub const METRIC_COLORS: [(&str, &str); 3] =
    [("Accuracy", "#4e79a7"), ("Precision", "#f28e2b"), ("Recall", "#76b7b2")];
pub const KEPT_COLOR: &str = "#59a14f";
pub const DROPPED_COLOR: &str = "#e15759";

/// Aligned comparison table, one row per report in the given order.
pub fn render_table(reports: &[MetricsReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::EmptyReportList);
    }
    let width = reports.iter().map(|r| r.model.chars().count()).max().unwrap_or(0).max("Model".len());
    let pad = |s: &str| format!("{s}{}", " ".repeat(width - s.chars().count()));
    let mut out = format!("{}  {:>9}  {:>9}  {:>9}\n", pad("Model"), "Accuracy", "Precision", "Recall");
    for r in reports {
        let _ = writeln!(out, "{}  {:>9.4}  {:>9.4}  {:>9.4}", pad(&r.model), r.accuracy, r.precision, r.recall);
    }
    Ok(out)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Human label for a column name, falling back to the name itself.
pub fn display_label(name: &str) -> String {
    Variable::from_name(name).map_or_else(|| name.to_string(), |v| v.label().to_string())
}

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Svg { body: String::new(), width, height }
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: u32, content: &str) {
        let _ = writeln!(
            self.body,
            r#"  <text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-size="{size}">{}</text>"#,
            escape(content)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"  <line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}"/>"#
        );
    }

    fn bar(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, class: &str, label: &str, value: f64) {
        let _ = writeln!(
            self.body,
            r#"  <rect class="{class}" data-label="{}" data-value="{value:.4}" x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#,
            escape(label)
        );
    }

    fn finish(self, title: &str) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n  <title>{}</title>\n  <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            escape(title),
            self.body,
            w = self.width,
            h = self.height,
        )
    }
}

const PLOT_HEIGHT: f64 = 300.0;
const TICKS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

/// Grouped vertical bars (accuracy, precision, recall) per model on a 0..1 axis.
pub fn render_metrics_svg(reports: &[MetricsReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (left, top, bar_w, gap) = (60.0, 40.0, 22.0, 26.0);
    let group_w = 3.0 * bar_w + gap;
    let width = left + group_w * reports.len() as f64 + 150.0;
    let baseline = top + PLOT_HEIGHT;
    let mut svg = Svg::new(width, baseline + 70.0);
    svg.text(width / 2.0, 24.0, "middle", 16, "Model performance");
    for t in TICKS {
        let y = baseline - t * PLOT_HEIGHT;
        svg.line(left - 5.0, y, left + group_w * reports.len() as f64, y, "#dddddd");
        svg.text(left - 8.0, y + 4.0, "end", 11, &format!("{t:.1}"));
    }
    svg.line(left, top, left, baseline, "black");
    svg.line(left, baseline, left + group_w * reports.len() as f64, baseline, "black");
    for (g, r) in reports.iter().enumerate() {
        let x0 = left + gap / 2.0 + g as f64 * group_w;
        let values = [r.accuracy, r.precision, r.recall];
        for (k, (&v, (metric, color))) in values.iter().zip(METRIC_COLORS).enumerate() {
            let h = v.clamp(0.0, 1.0) * PLOT_HEIGHT;
            let label = format!("{} {}", r.model, metric);
            svg.bar(x0 + k as f64 * bar_w, baseline - h, bar_w - 2.0, h, color, "bar", &label, v);
        }
        svg.text(x0 + 1.5 * bar_w, baseline + 18.0, "middle", 11, &r.model);
    }
    let legend_x = left + group_w * reports.len() as f64 + 20.0;
    for (k, (metric, color)) in METRIC_COLORS.iter().enumerate() {
        let y = top + 20.0 * k as f64;
        let _ = writeln!(
            svg.body,
            r#"  <rect class="legend" x="{legend_x:.2}" y="{y:.2}" width="12" height="12" fill="{color}"/>"#
        );
        svg.text(legend_x + 18.0, y + 10.0, "start", 12, metric);
    }
    Ok(svg.finish("Model performance"))
}

/// Horizontal importance bars on a 0..1 axis; variables outside `selected`
/// are drawn in [`DROPPED_COLOR`].
pub fn render_importance_svg(ranking: &ImportanceRanking, selected: &[String]) -> Result<String> {
    if ranking.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (left, top, row_h, plot_w) = (230.0, 40.0, 22.0, 400.0);
    let n = ranking.len() as f64;
    let bottom = top + row_h * n;
    let mut svg = Svg::new(left + plot_w + 60.0, bottom + 50.0);
    svg.text((left + plot_w) / 2.0 + 40.0, 24.0, "middle", 16, "Importance score");
    for t in TICKS {
        let x = left + t * plot_w;
        svg.line(x, top, x, bottom + 5.0, "#dddddd");
        svg.text(x, bottom + 20.0, "middle", 11, &format!("{t:.1}"));
    }
    for (i, (name, score)) in ranking.scores().iter().enumerate() {
        let y = top + i as f64 * row_h;
        let kept = selected.contains(name);
        let (color, class) = if kept { (KEPT_COLOR, "bar kept") } else { (DROPPED_COLOR, "bar dropped") };
        let label = display_label(name);
        svg.bar(left, y + 3.0, score.clamp(0.0, 1.0) * plot_w, row_h - 6.0, color, class, &label, *score);
        svg.text(left - 8.0, y + row_h / 2.0 + 4.0, "end", 12, &label);
    }
    svg.line(left, top, left, bottom, "black");
    svg.line(left, bottom, left + plot_w, bottom, "black");
    Ok(svg.finish("Importance score"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{published_scores, select_variables};

    fn published_results() -> Vec<MetricsReport> {
        [
            ("Logistic Regression", 0.42, 0.40, 0.42),
            ("Decision Tree", 0.32, 0.34, 0.32),
            ("KNN", 0.71, 0.27, 0.25),
            ("Naïve Bayes", 0.69, 0.40, 0.39),
            ("RNN", 0.68, 0.713, 0.693),
            ("CNN", 0.62, 0.65, 0.60),
            ("CNN-RNN", 0.72, 0.73, 0.729),
        ]
        .iter()
        .map(|&(m, a, p, r)| MetricsReport { model: m.into(), accuracy: a, precision: p, recall: r })
        .collect()
    }

    #[test]
    fn table_rows_at_four_decimals() {
        let text = render_table(&published_results()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 8);
        let last: Vec<&str> = lines[7].split_whitespace().collect();
        assert_eq!(last, ["CNN-RNN", "0.7200", "0.7300", "0.7290"]);
        // columns line up
        let ends: Vec<usize> = lines.iter().map(|l| l.chars().count()).collect();
        assert!(ends.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn single_report_is_two_lines() {
        let r = MetricsReport { model: "m".into(), accuracy: 0.5, precision: 1.0, recall: 0.0 };
        let text = render_table(&[r]).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("0.5000") && text.contains("1.0000") && text.contains("0.0000"));
        assert!(matches!(render_table(&[]), Err(Error::EmptyReportList)));
    }

    fn bars(svg: &str) -> Vec<(String, String, f64, f64)> {
        let doc = roxmltree::Document::parse(svg).expect("well-formed");
        doc.descendants()
            .filter(|n| n.attribute("class").is_some_and(|c| c.starts_with("bar")))
            .map(|n| {
                let num = |a: &str| n.attribute(a).unwrap().parse::<f64>().unwrap();
                (
                    n.attribute("class").unwrap().to_string(),
                    n.attribute("data-label").unwrap().to_string(),
                    num("width"),
                    num("height"),
                )
            })
            .collect()
    }

    #[test]
    fn perfect_model_gets_full_height_bars() {
        let r = MetricsReport { model: "all".into(), accuracy: 1.0, precision: 1.0, recall: 1.0 };
        let b = bars(&render_metrics_svg(&[r]).unwrap());
        assert_eq!(b.len(), 3);
        assert!(b.iter().all(|(_, _, _, h)| *h == PLOT_HEIGHT));
    }

    #[test]
    fn bar_heights_are_linear() {
        let b = bars(&render_metrics_svg(&published_results()).unwrap());
        assert_eq!(b.len(), 21);
        let cnn_rnn = &b[18];
        assert!((cnn_rnn.3 - 0.72 * PLOT_HEIGHT).abs() < 0.01);
        assert!(matches!(render_metrics_svg(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn published_ranking_marks_two_drops() {
        let ranking = published_scores();
        let kept = select_variables::<&str>(&ranking, 0.025, &[]).unwrap();
        let svg = render_importance_svg(&ranking, &kept).unwrap();
        let mut dropped: Vec<String> =
            bars(&svg).into_iter().filter(|(c, ..)| c.contains("dropped")).map(|(_, l, ..)| l).collect();
        dropped.sort();
        assert_eq!(dropped, ["Drug Condition", "Pedestrian Action"]);
        assert!(svg.contains(DROPPED_COLOR));
    }

    #[test]
    fn labels_are_escaped() {
        let r = MetricsReport { model: "a<b & c".into(), accuracy: 0.1, precision: 0.2, recall: 0.3 };
        let svg = render_metrics_svg(&[r]).unwrap();
        assert!(roxmltree::Document::parse(&svg).is_ok());
    }
}
