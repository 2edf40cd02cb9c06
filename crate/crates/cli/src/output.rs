//! Report directories: CSV tables, JSON reports, SVG plots and the manifest.

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};

pub const SCHEMA: &str = include_str!("../SCHEMA.md");
pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    code_version: &'a str,
    seed: u64,
    config_file: &'a str,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let p = self.root.join(name);
        std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))
    }

    pub fn write_csv<S: AsRef<str>>(&self, name: &str, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
        let p = self.root.join(name);
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.iter().map(|s| s.as_ref()))?;
        }
        w.flush().map_err(|e| CliError::io(&p, e))
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Writes `config.toml`, `schema.md` and `manifest.json`; call last so
    /// the manifest lists every file.
    pub fn finish(&self, cfg: &ExperimentConfig) -> Result<()> {
        self.write_text("config.toml", &cfg.to_toml()?)?;
        self.write_text("schema.md", SCHEMA)?;
        let mut files: Vec<String> = std::fs::read_dir(&self.root)
            .map_err(|e| CliError::io(&self.root, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|f| f != "manifest.json")
            .collect();
        files.sort();
        let m = Manifest { command: cfg.experiment.name(), code_version: CODE_VERSION, seed: cfg.seed, config_file: "config.toml", files };
        self.write_json("manifest.json", &m)
    }
}

pub fn fmt(x: f64) -> String {
    format!("{x}")
}

pub mod svg {
    //! Minimal self-contained SVG line plots and histograms.

    use std::fmt::Write;

    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const M: f64 = 60.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

    pub struct Series {
        pub name: String,
        pub points: Vec<(f64, f64)>,
    }

    #[derive(Clone, Copy)]
    pub struct Axes {
        pub log_x: bool,
        pub log_y: bool,
    }

    fn tr(v: f64, log: bool) -> f64 {
        if log {
            v.log10()
        } else {
            v
        }
    }

    fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
        let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            return (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        }
    }

    fn frame(out: &mut String, title: &str, xlabel: &str, ylabel: &str, xr: (f64, f64), yr: (f64, f64), axes: Axes) {
        let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(title));
        let _ = writeln!(out, r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#, W - 2.0 * M, H - 2.0 * M);
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 15.0, esc(xlabel));
        let _ = writeln!(
            out,
            r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            esc(ylabel)
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = xr.0 + f * (xr.1 - xr.0);
            let yv = yr.0 + f * (yr.1 - yr.0);
            let px = M + f * (W - 2.0 * M);
            let py = H - M - f * (H - 2.0 * M);
            let lab = |v: f64, log: bool| if log { format!("{:.3e}", 10f64.powf(v)) } else { format!("{v:.3}") };
            let _ = writeln!(out, r#"<text x="{px}" y="{}" text-anchor="middle">{}</text>"#, H - M + 16.0, lab(xv, axes.log_x));
            let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, M - 4.0, py + 4.0, lab(yv, axes.log_y));
        }
    }

    fn esc(s: &str) -> String {
        s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
    }

    pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], axes: Axes) -> String {
        let xr = range(series.iter().flat_map(|s| s.points.iter().map(|p| tr(p.0, axes.log_x))));
        let yr = range(series.iter().flat_map(|s| s.points.iter().map(|p| tr(p.1, axes.log_y))));
        let mut out = String::new();
        frame(&mut out, title, xlabel, ylabel, xr, yr, axes);
        let px = |v: f64| M + (tr(v, axes.log_x) - xr.0) / (xr.1 - xr.0) * (W - 2.0 * M);
        let py = |v: f64| H - M - (tr(v, axes.log_y) - yr.0) / (yr.1 - yr.0) * (H - 2.0 * M);
        for (i, s) in series.iter().enumerate() {
            let c = COLORS[i % COLORS.len()];
            let pts: Vec<String> =
                s.points.iter().filter(|p| px(p.0).is_finite() && py(p.1).is_finite()).map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1))).collect();
            let _ = writeln!(out, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
            if s.points.len() <= 30 {
                for p in pts {
                    let (x, y) = p.split_once(',').unwrap();
                    let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="3" fill="{c}"/>"#);
                }
            }
            let _ = writeln!(out, r#"<text x="{}" y="{}" fill="{c}">{}</text>"#, W - M - 150.0, M + 16.0 * (i as f64 + 1.0), esc(&s.name));
        }
        out.push_str("</svg>\n");
        out
    }

    /// Overlaid histograms with shared bins.
    pub fn histogram(title: &str, xlabel: &str, groups: &[Series], bins: usize) -> String {
        let xr = range(groups.iter().flat_map(|g| g.points.iter().map(|p| p.0)));
        let width = (xr.1 - xr.0) / bins as f64;
        let counts: Vec<Vec<f64>> = groups
            .iter()
            .map(|g| {
                let mut c = vec![0.0; bins];
                for p in &g.points {
                    if p.0.is_finite() {
                        let b = (((p.0 - xr.0) / width) as usize).min(bins - 1);
                        c[b] += 1.0 / g.points.len().max(1) as f64;
                    }
                }
                c
            })
            .collect();
        let ymax = counts.iter().flatten().cloned().fold(0.0, f64::max).max(1e-12);
        let axes = Axes { log_x: false, log_y: false };
        let mut out = String::new();
        frame(&mut out, title, xlabel, "fraction", xr, (0.0, ymax), axes);
        let bw = (W - 2.0 * M) / bins as f64;
        for (i, c) in counts.iter().enumerate() {
            let col = COLORS[i % COLORS.len()];
            for (b, &v) in c.iter().enumerate() {
                if v > 0.0 {
                    let h = v / ymax * (H - 2.0 * M);
                    let _ = writeln!(
                        out,
                        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{col}" fill-opacity="0.4"/>"#,
                        M + b as f64 * bw,
                        H - M - h,
                        bw,
                        h
                    );
                }
            }
            let _ = writeln!(out, r#"<text x="{}" y="{}" fill="{col}">{}</text>"#, W - M - 150.0, M + 16.0 * (i as f64 + 1.0), esc(&groups[i].name));
        }
        out.push_str("</svg>\n");
        out
    }
}
