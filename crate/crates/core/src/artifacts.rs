//! Writers for the files a pipeline run leaves behind: JSON reports,
//! metric CSVs, prediction dumps, and self-contained SVG renderings of
//! the ROC curve and confusion matrix.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{ConfusionMatrix, RocCurve};

/// Serialize any report as pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Data(format!("could not serialize report: {e}")))?;
    body.push('\n');
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&body).map_err(|e| Error::parse(path, e.to_string()))
}

/// `threshold,fpr,tpr` rows in sweep order. The (0, 0) anchor precedes
/// every score, so its threshold column reads `inf`.
pub fn write_roc_csv(path: &Path, curve: &RocCurve) -> Result<()> {
    let mut body = String::from("threshold,fpr,tpr\n");
    for point in &curve.points {
        let threshold = match point.threshold {
            Some(t) => format!("{t}"),
            None => "inf".into(),
        };
        let _ = writeln!(body, "{threshold},{},{}", point.fpr, point.tpr);
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Square count table: predicted classes across, actual classes down.
pub fn write_confusion_csv(path: &Path, matrix: &ConfusionMatrix) -> Result<()> {
    let mut body = String::from("actual\\predicted");
    for name in &matrix.class_names {
        let _ = write!(body, ",{name}");
    }
    body.push('\n');
    for (actual, row) in matrix.counts.iter().enumerate() {
        let _ = write!(body, "{}", matrix.class_names[actual]);
        for count in row {
            let _ = write!(body, ",{count}");
        }
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// One scored test row, ready for `predictions.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub parent_id: String,
    pub window_index: usize,
    pub actual: String,
    pub predicted: String,
    pub probabilities: Vec<f64>,
}

pub fn write_predictions_csv(
    path: &Path,
    class_names: &[String],
    rows: &[PredictionRow],
) -> Result<()> {
    let mut body = String::from("parent_id,window_index,actual,predicted");
    for name in class_names {
        let _ = write!(body, ",p_{name}");
    }
    body.push('\n');
    for row in rows {
        if row.probabilities.len() != class_names.len() {
            return Err(Error::Data(format!(
                "prediction row for {} window {} has {} probabilities, expected {}",
                row.parent_id,
                row.window_index,
                row.probabilities.len(),
                class_names.len()
            )));
        }
        let _ = write!(
            body,
            "{},{},{},{}",
            row.parent_id, row.window_index, row.actual, row.predicted
        );
        for p in &row.probabilities {
            let _ = write!(body, ",{p}");
        }
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Static ROC plot: unit box, chance diagonal, and the curve polyline.
pub fn render_roc_svg(curve: &RocCurve) -> String {
    const MARGIN: f64 = 70.0;
    const SIZE: f64 = 420.0;
    let canvas = SIZE + 2.0 * MARGIN;
    let x = |fpr: f64| MARGIN + fpr * SIZE;
    let y = |tpr: f64| MARGIN + SIZE - tpr * SIZE;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{canvas}\" height=\"{canvas}\" \
         viewBox=\"0 0 {canvas} {canvas}\" font-family=\"monospace\" font-size=\"14\">\n"
    );
    let _ = writeln!(svg, "<rect width=\"{canvas}\" height=\"{canvas}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{SIZE}\" height=\"{SIZE}\" \
         fill=\"none\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"gray\" \
         stroke-dasharray=\"6,4\"/>",
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{tick}</text>",
            x(tick),
            MARGIN + SIZE + 24.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{tick}</text>",
            MARGIN - 10.0,
            y(tick) + 5.0
        );
    }
    let points: Vec<String> = curve
        .points
        .iter()
        .map(|p| format!("{:.2},{:.2}", x(p.fpr), y(p.tpr)))
        .collect();
    let _ = writeln!(
        svg,
        "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"{}\"/>",
        points.join(" ")
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">ROC curve (AUC = {:.6})</text>",
        canvas / 2.0,
        MARGIN - 24.0,
        curve.auc
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">false positive rate</text>",
        canvas / 2.0,
        canvas - 14.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {:.1})\">true positive rate</text>",
        canvas / 2.0,
        canvas / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Static confusion-matrix heat map with per-cell counts.
pub fn render_confusion_svg(matrix: &ConfusionMatrix) -> String {
    const CELL: f64 = 96.0;
    const LEFT: f64 = 190.0;
    const TOP: f64 = 120.0;
    let n = matrix.n_classes();
    let width = LEFT + CELL * n as f64 + 40.0;
    let height = TOP + CELL * n as f64 + 40.0;
    let max = matrix.counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"monospace\" font-size=\"13\">\n"
    );
    let _ = writeln!(svg, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"30\" text-anchor=\"middle\" font-size=\"16\">confusion \
         matrix (rows actual, columns predicted)</text>",
        width / 2.0
    );
    for (actual, row) in matrix.counts.iter().enumerate() {
        let cy = TOP + CELL * actual as f64;
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            LEFT - 12.0,
            cy + CELL / 2.0 + 5.0,
            xml_escape(&matrix.class_names[actual])
        );
        for (predicted, &count) in row.iter().enumerate() {
            let cx = LEFT + CELL * predicted as f64;
            if actual == 0 {
                let _ = writeln!(
                    svg,
                    "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
                    cx + CELL / 2.0,
                    TOP - 16.0,
                    xml_escape(&matrix.class_names[predicted])
                );
            }
            // Darker cell = larger count; text flips to white past half.
            let intensity = count as f64 / max;
            let channel = (255.0 - 185.0 * intensity).round() as u8;
            let _ = writeln!(
                svg,
                "<rect x=\"{cx:.1}\" y=\"{cy:.1}\" width=\"{CELL}\" height=\"{CELL}\" \
                 fill=\"rgb({channel},{},255)\" stroke=\"black\"/>",
                ((255.0 - 120.0 * intensity).round() as u8)
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"{}\">{count}</text>",
                cx + CELL / 2.0,
                cy + CELL / 2.0 + 5.0,
                if intensity > 0.55 { "white" } else { "black" }
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_roc_svg(path: &Path, curve: &RocCurve) -> Result<()> {
    fs::write(path, render_roc_svg(curve)).map_err(|e| Error::io(path, e))
}

pub fn write_confusion_svg(path: &Path, matrix: &ConfusionMatrix) -> Result<()> {
    fs::write(path, render_confusion_svg(matrix)).map_err(|e| Error::io(path, e))
}
