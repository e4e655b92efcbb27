//! Minimal dependency-free SVG charts for experiment summaries.

use std::fmt::Write as _;

use crate::sims::ExperimentResult;

const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(title: &str, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n\
         <line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>\n{body}</svg>\n",
        W / 2.0,
        escape(title),
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD
    )
}

/// Grouped bars: one group per category, one bar per series.
pub fn bar_chart(title: &str, categories: &[String], series: &[(String, Vec<f64>)]) -> String {
    let mut body = String::new();
    let max = series.iter().flat_map(|(_, v)| v.iter().copied()).fold(0.0, f64::max).max(1e-300);
    let groups = categories.len().max(1) as f64;
    let gw = (W - 2.0 * PAD) / groups;
    let bw = gw * 0.8 / series.len().max(1) as f64;
    for (c, cat) in categories.iter().enumerate() {
        let gx = PAD + gw * c as f64 + gw * 0.1;
        for (s, (_, vals)) in series.iter().enumerate() {
            let v = vals.get(c).copied().unwrap_or(0.0);
            let h = (H - 2.0 * PAD) * v / max;
            let _ = writeln!(
                body,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                gx + bw * s as f64,
                H - PAD - h,
                bw,
                h,
                PALETTE[s % PALETTE.len()]
            );
        }
        let _ = writeln!(
            body,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{}</text>",
            gx + gw * 0.4,
            H - PAD + 14.0,
            escape(cat)
        );
    }
    legend(&mut body, series.iter().map(|(n, _)| n.as_str()));
    frame(title, &body)
}

/// Polylines over a shared numeric x axis.
pub fn line_chart(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let pts = || series.iter().flat_map(|(_, v)| v.iter().copied());
    let (x0, x1) = pts().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (x, _)| (a.min(x), b.max(x)));
    let (y0, y1) = pts().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, y)| (a.min(y), b.max(y)));
    let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
    let px = |x: f64| PAD + (W - 2.0 * PAD) * (x - x0) / span(x0, x1);
    let py = |y: f64| H - PAD - (H - 2.0 * PAD) * (y - y0) / span(y0, y1);
    let mut body = String::new();
    for (s, (_, v)) in series.iter().enumerate() {
        let path: Vec<String> = v.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(body, "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>", path.join(" "), PALETTE[s % PALETTE.len()]);
    }
    if x0.is_finite() {
        let _ = writeln!(
            body,
            "<text x=\"{PAD}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\">{x0}</text>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{x1}</text>\n\
             <text x=\"4\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\">{y1:.3}</text>\n\
             <text x=\"4\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\">{y0:.3}</text>",
            H - PAD + 14.0,
            W - PAD,
            H - PAD + 14.0,
            PAD,
            H - PAD
        );
    }
    legend(&mut body, series.iter().map(|(n, _)| n.as_str()));
    frame(title, &body)
}

fn legend<'a>(body: &mut String, names: impl Iterator<Item = &'a str>) {
    for (s, name) in names.enumerate() {
        let y = PAD + 14.0 * s as f64;
        let _ = writeln!(
            body,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>",
            W - PAD - 150.0,
            y - 9.0,
            PALETTE[s % PALETTE.len()],
            W - PAD - 136.0,
            y,
            escape(name)
        );
    }
}

/// Selection histograms for the histogram experiment, mean test (or train)
/// error against `n` otherwise.
pub fn summary_chart(result: &ExperimentResult) -> String {
    let mut names: Vec<String> = result.aggregates.iter().map(|a| a.estimator.clone()).collect();
    names.sort();
    names.dedup();
    if result.experiment == "histogram" {
        let categories: Vec<String> = (0..=result.d).map(|k| k.to_string()).collect();
        let series = result
            .aggregates
            .iter()
            .map(|a| (format!("{} n={}", a.estimator, a.n), a.nonzero_histogram.iter().map(|&c| c as f64).collect()))
            .collect::<Vec<_>>();
        return bar_chart("selected coefficients", &categories, &series);
    }
    let series = names
        .into_iter()
        .map(|name| {
            let pts = result
                .aggregates
                .iter()
                .filter(|a| a.estimator == name)
                .map(|a| (a.n as f64, a.mean_test_rmspe.unwrap_or(a.mean_train_rmspe)))
                .collect();
            (name, pts)
        })
        .collect::<Vec<_>>();
    line_chart("mean prediction error", &series)
}
