//! Report rendering: CSV for machines, markdown tables and SVG charts for
//! humans.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::evaluate::{ReportBundle, RocReport};

/// `%.6g`-style formatting: six significant digits, plain decimal.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub const RESULTS_CSV_HEADER: &str = "attack,decoder,n_samples,acc_mean,acc_std,iou_mean,\
iou_std,ber_mean,ber_std,chamfer_mean,chamfer_std,psnr_mean,psnr_std";

pub fn results_csv(bundle: &ReportBundle) -> String {
    let mut out = String::from(RESULTS_CSV_HEADER);
    out.push('\n');
    for row in &bundle.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&row.attack),
            row.decoder,
            row.n_samples,
            sig6(row.accuracy.mean),
            sig6(row.accuracy.std),
            sig6(row.iou.mean),
            sig6(row.iou.std),
            sig6(row.ber.mean),
            sig6(row.ber.std),
            sig6(row.chamfer.mean),
            sig6(row.chamfer.std),
            sig6(row.psnr.mean),
            sig6(row.psnr.std),
        );
    }
    out
}

fn csv_field(raw: &str) -> String {
    if raw.contains(',') || raw.contains('"') {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

pub fn gap_table_md(bundle: &ReportBundle) -> String {
    let mut out = String::from("| Type of Attack | SVD | Neural | Accuracy Gap |\n|---|---|---|---|\n");
    for gap in &bundle.gaps {
        let _ = writeln!(
            out,
            "| {} | {:.3} | {:.3} | {:+.3} |",
            gap.attack, gap.svd_accuracy, gap.dl_accuracy, gap.gap
        );
    }
    out
}

pub fn fidelity_table_md(bundle: &ReportBundle) -> String {
    let mut out = String::from(
        "| Type of Attack | Chamfer_SVD | Chamfer_DL | PSNR_SVD | PSNR_DL | BER_SVD | BER_DL |\n\
         |---|---|---|---|---|---|---|\n",
    );
    let mut attacks: Vec<&str> = Vec::new();
    for row in &bundle.rows {
        if !attacks.contains(&row.attack.as_str()) {
            attacks.push(&row.attack);
        }
    }
    for attack in attacks {
        let find = |decoder: &str| {
            bundle
                .rows
                .iter()
                .find(|r| r.attack == attack && r.decoder == decoder)
        };
        if let (Some(svd), Some(dl)) = (find("svd"), find("dl")) {
            let _ = writeln!(
                out,
                "| {} | {:.3} | {:.3} | {:.2} | {:.2} | {:.2} | {:.2} |",
                attack,
                svd.chamfer.mean,
                dl.chamfer.mean,
                svd.psnr.mean,
                dl.psnr.mean,
                svd.ber.mean,
                dl.ber.mean
            );
        }
    }
    out
}

pub fn roc_csv(roc: &RocReport) -> String {
    let mut out = String::from("threshold,tpr,fpr\n");
    for &(threshold, tpr, fpr) in &roc.points {
        let threshold = if threshold.is_finite() {
            sig6(threshold)
        } else {
            "inf".to_string()
        };
        let _ = writeln!(out, "{},{},{}", threshold, sig6(tpr), sig6(fpr));
    }
    out
}

fn xml_escape(raw: &str) -> String {
    raw.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Grouped bar chart of mean accuracy per attack for both decoders.
pub fn accuracy_bars_svg(bundle: &ReportBundle) -> String {
    let attacks = &bundle.gaps;
    let n = attacks.len().max(1);
    let (bar, gap, margin_left, margin_bottom, height) = (14.0, 10.0, 60.0, 150.0, 260.0);
    let group = 2.0 * bar + gap;
    let width = margin_left + n as f64 * group + 40.0;
    let plot_h = height - 40.0;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" \
         viewBox=\"0 0 {:.0} {:.0}\">",
        width,
        height + margin_bottom,
        width,
        height + margin_bottom
    );
    let _ = write!(
        svg,
        "<text x=\"{:.0}\" y=\"16\" font-family=\"sans-serif\" font-size=\"13\">\
         Watermark recovery accuracy per attack</text>",
        margin_left
    );
    // Axis and gridlines.
    for tick in 0..=5 {
        let value = tick as f64 / 5.0;
        let y = 20.0 + plot_h * (1.0 - value);
        let _ = write!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"end\">{:.1}</text>",
            margin_left,
            y,
            width - 20.0,
            y,
            margin_left - 6.0,
            y + 3.0,
            value
        );
    }
    for (i, row) in attacks.iter().enumerate() {
        let x0 = margin_left + i as f64 * group;
        let bars = [(row.svd_accuracy, "#4878a8"), (row.dl_accuracy, "#d08040")];
        for (b, (value, color)) in bars.iter().enumerate() {
            let h = plot_h * value.clamp(0.0, 1.0);
            let _ = write!(
                svg,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{}\"/>",
                x0 + b as f64 * bar,
                20.0 + plot_h - h,
                bar - 1.0,
                h,
                color
            );
        }
        let _ = write!(
            svg,
            "<text transform=\"translate({:.1},{:.1}) rotate(-55)\" font-family=\"sans-serif\" \
             font-size=\"9\" text-anchor=\"end\">{}</text>",
            x0 + bar,
            height - 12.0,
            xml_escape(&row.attack)
        );
    }
    let legend_x = width - 150.0;
    let _ = write!(
        svg,
        "<rect x=\"{legend_x:.0}\" y=\"24\" width=\"10\" height=\"10\" fill=\"#4878a8\"/>\
         <text x=\"{:.0}\" y=\"33\" font-family=\"sans-serif\" font-size=\"10\">SVD</text>\
         <rect x=\"{legend_x:.0}\" y=\"40\" width=\"10\" height=\"10\" fill=\"#d08040\"/>\
         <text x=\"{:.0}\" y=\"49\" font-family=\"sans-serif\" font-size=\"10\">Neural</text>",
        legend_x + 14.0,
        legend_x + 14.0
    );
    svg.push_str("</svg>");
    svg
}

/// ROC staircase with the chance diagonal.
pub fn roc_curve_svg(roc: &RocReport) -> String {
    let (size, margin) = (320.0, 45.0);
    let plot = size - 2.0 * margin;
    let map = |fpr: f64, tpr: f64| {
        (
            margin + plot * fpr.clamp(0.0, 1.0),
            margin + plot * (1.0 - tpr.clamp(0.0, 1.0)),
        )
    };
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size:.0}\" height=\"{size:.0}\" \
         viewBox=\"0 0 {size:.0} {size:.0}\">"
    );
    let _ = write!(
        svg,
        "<text x=\"{margin:.0}\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">\
         Ownership verification ROC (AUC {:.3})</text>",
        roc.auc
    );
    let (x0, y0) = map(0.0, 0.0);
    let (x1, y1) = map(1.0, 1.0);
    let _ = write!(
        svg,
        "<rect x=\"{margin:.0}\" y=\"{margin:.0}\" width=\"{plot:.0}\" height=\"{plot:.0}\" \
         fill=\"none\" stroke=\"#888\"/>\
         <line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x1:.1}\" y2=\"{y1:.1}\" stroke=\"#bbb\" \
         stroke-dasharray=\"4 3\"/>"
    );
    let mut path = String::new();
    for (i, &(_, tpr, fpr)) in roc.points.iter().enumerate() {
        let (x, y) = map(fpr, tpr);
        let _ = write!(path, "{}{x:.1},{y:.1} ", if i == 0 { "M" } else { "L" });
    }
    let _ = write!(
        svg,
        "<path d=\"{}\" fill=\"none\" stroke=\"#4878a8\" stroke-width=\"2\"/>",
        path.trim_end()
    );
    let _ = write!(
        svg,
        "<text x=\"{:.0}\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"11\" \
         text-anchor=\"middle\">False positive rate</text>\
         <text transform=\"translate(14,{:.0}) rotate(-90)\" font-family=\"sans-serif\" \
         font-size=\"11\" text-anchor=\"middle\">True positive rate</text>",
        margin + plot / 2.0,
        size - 10.0,
        margin + plot / 2.0
    );
    svg.push_str("</svg>");
    svg
}

/// Write every report artifact into `out_dir`; returns the paths written.
pub fn render_report(bundle: &ReportBundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if bundle.rows.is_empty() {
        return Err(Error::InvalidConfig(
            "report bundle contains no attack rows".into(),
        ));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, contents: String| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    emit("results.csv", results_csv(bundle))?;
    emit("gap_table.md", gap_table_md(bundle))?;
    emit("fidelity_table.md", fidelity_table_md(bundle))?;
    emit("accuracy_bars.svg", accuracy_bars_svg(bundle))?;
    if let Some(roc) = &bundle.roc {
        emit("roc.csv", roc_csv(roc))?;
        emit("roc_curve.svg", roc_curve_svg(roc))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::evaluate::{EmbedConfig, GapRow, MetricStats, ResultRow};

    fn fake_bundle() -> ReportBundle {
        let stat = |mean: f64| MetricStats { mean, std: 0.1 };
        let row = |attack: &str, decoder: &'static str, acc: f64| ResultRow {
            attack: attack.into(),
            decoder,
            n_samples: 10,
            accuracy: stat(acc),
            iou: stat(acc * 0.9),
            ber: stat(1.0 - acc),
            chamfer: stat(0.105),
            psnr: stat(21.9),
        };
        ReportBundle {
            rows: vec![
                row("Clean", "svd", 1.0),
                row("Clean", "dl", 0.9),
                row("Noise & Stuff <x>", "svd", 0.8),
                row("Noise & Stuff <x>", "dl", 0.85),
            ],
            gaps: vec![
                GapRow {
                    attack: "Clean".into(),
                    svd_accuracy: 1.0,
                    dl_accuracy: 0.9,
                    gap: -0.1,
                },
                GapRow {
                    attack: "Noise & Stuff <x>".into(),
                    svd_accuracy: 0.8,
                    dl_accuracy: 0.85,
                    gap: 0.05,
                },
            ],
            roc: Some(RocReport {
                points: vec![(f64::INFINITY, 0.0, 0.0), (0.5, 0.8, 0.2), (0.0, 1.0, 1.0)],
                auc: 0.8,
            }),
            n_clouds: 10,
            skipped: Vec::new(),
            embed_config: EmbedConfig::default(),
        }
    }

    /// Minimal XML well-formedness check: tags balance and nest properly.
    fn well_formed_xml(doc: &str) -> bool {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = doc.trim();
        while let Some(at) = rest.find('<') {
            rest = &rest[at + 1..];
            let Some(end) = rest.find('>') else {
                return false;
            };
            let tag = &rest[..end];
            rest = &rest[end + 1..];
            if let Some(name) = tag.strip_prefix('/') {
                match stack.pop() {
                    Some(open) if open == name.trim() => {}
                    _ => return false,
                }
            } else if !tag.ends_with('/') && !tag.starts_with('?') && !tag.starts_with('!') {
                let name = tag.split_whitespace().next().unwrap_or("");
                stack.push(name.to_string());
            }
        }
        stack.is_empty() && !doc.contains("<<")
    }

    #[test]
    fn csv_golden_header() {
        let csv = results_csv(&fake_bundle());
        assert!(csv.starts_with(
            "attack,decoder,n_samples,acc_mean,acc_std,iou_mean,iou_std,ber_mean,ber_std,\
             chamfer_mean,chamfer_std,psnr_mean,psnr_std\n"
        ));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1.00000");
        assert_eq!(sig6(0.000105123), "0.000105123");
        assert_eq!(sig6(21.94321), "21.9432");
        assert_eq!(sig6(-0.5), "-0.500000");
    }

    #[test]
    fn svgs_are_well_formed() {
        let bundle = fake_bundle();
        assert!(well_formed_xml(&accuracy_bars_svg(&bundle)));
        assert!(well_formed_xml(&roc_curve_svg(bundle.roc.as_ref().unwrap())));
    }

    #[test]
    fn render_writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = render_report(&fake_bundle(), dir.path()).unwrap();
        assert_eq!(files.len(), 6);
        for file in files {
            assert!(file.exists());
        }
    }

    #[test]
    fn empty_bundle_rejected_before_writing() {
        let dir = tempfile::tempdir().unwrap();
        let mut bundle = fake_bundle();
        bundle.rows.clear();
        assert!(render_report(&bundle, dir.path()).is_err());
        assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
    }
}
