use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{create_dir, read_metrics_file, write_file, EpisodeRecord, HarnessError};

pub const DEFAULT_SMOOTHING: usize = 100;

/// Trailing mean over the last `window` values; the first `window - 1`
/// points average over what is available so far.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    (0..xs.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            let s = &xs[lo..=i];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// SVG line chart. Each polyline carries its exact y values in `data-y` so the
/// picture can be checked against the CSV it came from.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (760.0, 420.0);
    let (left, right, top, bottom) = (64.0, 180.0, 36.0, 48.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let xs = series.iter().flat_map(|s| s.x.iter().copied());
    let ys = series.iter().flat_map(|s| s.y.iter().copied());
    let (x0, x1) = bounds(xs);
    let (mut y0, mut y1) = bounds(ys);
    if y0 == y1 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let px = |x: f64| left + if x1 > x0 { (x - x0) / (x1 - x0) * pw } else { pw / 2.0 };
    let py = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        left + pw / 2.0,
        esc(title)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let yv = y0 + f * (y1 - y0);
        let xv = x0 + f * (x1 - x0);
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" x2="{}" y1="{y}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
            left + pw,
            left - 6.0,
            py(yv) + 4.0,
            tick(yv),
            y = py(yv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            px(xv),
            top + ph + 18.0,
            tick(xv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 8.0,
        esc(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        esc(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s.x.iter().zip(&s.y).map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let data: Vec<String> = s.y.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" data-label="{}" data-y="{}" points="{}"/>"#,
            esc(&s.label),
            data.join(" "),
            pts.join(" ")
        );
        let ly = top + 14.0 + i as f64 * 18.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            left + pw + 12.0,
            left + pw + 32.0,
            left + pw + 38.0,
            ly + 4.0,
            esc(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlotOutput {
    pub charts: Vec<PathBuf>,
    pub csv: PathBuf,
}

struct Run {
    label: String,
    records: Vec<EpisodeRecord>,
}

/// Per-stage success-rate and return curves for every input file, overlaid,
/// plus per-object success curves when a run uses more than one object.
/// Writes the SVGs and `smoothed.csv` into `out_dir`.
pub fn plot_metrics(files: &[PathBuf], window: usize, out_dir: &Path) -> Result<PlotOutput, HarnessError> {
    if files.is_empty() {
        return Err(HarnessError::EmptyInput("no metrics files given".into()));
    }
    let mut runs = Vec::new();
    for f in files {
        let records = read_metrics_file(f)?;
        if records.is_empty() {
            return Err(HarnessError::EmptyInput(format!("{} has no records", f.display())));
        }
        let label = records[0].run_id.clone();
        if records.iter().any(|r| r.run_id != label) {
            return Err(HarnessError::MixedSchema(format!("{} mixes several run ids", f.display())));
        }
        runs.push(Run { label, records });
    }
    let labels: BTreeSet<&str> = runs.iter().map(|r| r.label.as_str()).collect();
    if labels.len() < runs.len() {
        for (r, f) in runs.iter_mut().zip(files) {
            r.label = format!("{} ({})", r.label, f.display());
        }
    }
    create_dir(out_dir)?;
    let mut csv = String::from("run_id,stage,metric,episode,x,raw,smoothed\n");
    let mut charts = Vec::new();
    let stages: BTreeSet<usize> = runs.iter().flat_map(|r| r.records.iter().map(|e| e.stage)).collect();
    for &stage in &stages {
        for (metric, title) in [("success", "success rate"), ("return", "return")] {
            let mut series = Vec::new();
            for run in &runs {
                let recs: Vec<&EpisodeRecord> = run.records.iter().filter(|r| r.stage == stage).collect();
                if recs.is_empty() {
                    continue;
                }
                let raw: Vec<f64> = recs.iter().map(|r| value(r, metric)).collect();
                let x: Vec<f64> = recs.iter().map(|r| r.episode_in_stage as f64).collect();
                let y = moving_average(&raw, window);
                for (i, r) in recs.iter().enumerate() {
                    let _ = writeln!(
                        csv,
                        "{},{stage},{metric},{},{},{},{}",
                        csv_field(&run.label),
                        r.episode,
                        x[i],
                        raw[i],
                        y[i]
                    );
                }
                series.push(Series {
                    label: run.label.clone(),
                    x,
                    y,
                });
            }
            let path = out_dir.join(format!("{metric}_stage{stage}.svg"));
            let t = format!("Stage {stage} {title} (moving average, window {window})");
            write_file(&path, line_chart(&t, "episode in stage", title, &series))?;
            charts.push(path);
        }
    }
    for run in &runs {
        let objects: BTreeSet<_> = run.records.iter().map(|r| r.object).collect();
        if objects.len() < 2 {
            continue;
        }
        let mut series = Vec::new();
        for &obj in &objects {
            let recs: Vec<&EpisodeRecord> = run.records.iter().filter(|r| r.object == obj).collect();
            let raw: Vec<f64> = recs.iter().map(|r| value(r, "success")).collect();
            let x: Vec<f64> = recs.iter().map(|r| r.episode as f64).collect();
            let y = moving_average(&raw, window);
            let metric = format!("success_{obj}");
            for (i, r) in recs.iter().enumerate() {
                let _ = writeln!(
                    csv,
                    "{},{},{metric},{},{},{},{}",
                    csv_field(&run.label),
                    r.stage,
                    r.episode,
                    x[i],
                    raw[i],
                    y[i]
                );
            }
            series.push(Series {
                label: obj.to_string(),
                x,
                y,
            });
        }
        let path = out_dir.join(format!("success_by_object_{}.svg", file_stem(&run.label)));
        let t = format!("{} success rate per object (window {window})", run.label);
        write_file(&path, line_chart(&t, "episode", "success rate", &series))?;
        charts.push(path);
    }
    let csv_path = out_dir.join("smoothed.csv");
    write_file(&csv_path, csv)?;
    Ok(PlotOutput { charts, csv: csv_path })
}

fn value(r: &EpisodeRecord, metric: &str) -> f64 {
    match metric {
        "success" => r.success as u8 as f64,
        _ => r.ret,
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn file_stem(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn warm_up_then_window() {
        let xs = [1.0, 0.0, 1.0, 1.0];
        assert_eq!(moving_average(&xs, 2), vec![1.0, 0.5, 0.5, 1.0]);
        assert_eq!(moving_average(&xs, 10), vec![1.0, 0.5, 2.0 / 3.0, 0.75]);
        assert!(moving_average(&[], 5).is_empty());
    }

    #[test]
    fn constant_one_stays_flat() {
        assert!(moving_average(&[1.0; 300], 100).iter().all(|&v| v == 1.0));
    }

    proptest! {
        #[test]
        fn window_one_is_identity(xs in proptest::collection::vec(-1e3f64..1e3, 0..200)) {
            prop_assert_eq!(moving_average(&xs, 1), xs);
        }

        #[test]
        fn stays_within_range(xs in proptest::collection::vec(-1e3f64..1e3, 1..200), w in 1usize..50) {
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in moving_average(&xs, w) {
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn chart_lists_each_series() {
        let s = |l: &str| Series {
            label: l.into(),
            x: vec![0.0, 1.0],
            y: vec![0.25, 0.5],
        };
        let svg = line_chart("t", "x", "y", &[s("a"), s("b<c")]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("data-label=\"b&lt;c\""));
        assert!(svg.contains("data-y=\"0.25 0.5\""));
    }
}
