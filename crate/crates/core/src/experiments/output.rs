use super::{ExperimentConfig, SweepKind, SweepResult};
use serde_json::json;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const CSV_HEADER: &str = "axis,scheme,eff_snr_db_mean,eff_snr_db_stderr,mse_mean,trials,budget";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot serialize metadata: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub svg: Option<PathBuf>,
    pub metadata: PathBuf,
}

impl OutputPaths {
    /// `<dir>/<stem>.csv`, `<dir>/<stem>.svg` and `<dir>/<stem>.json`.
    pub fn in_dir(dir: &Path, stem: &str) -> Self {
        Self {
            csv: dir.join(format!("{stem}.csv")),
            svg: Some(dir.join(format!("{stem}.svg"))),
            metadata: dir.join(format!("{stem}.json")),
        }
    }
}

/// CSV text of a sweep, one row per (axis point, scheme). `mse_mean` is
/// left empty for schemes that form no channel estimate.
pub fn write_csv(result: &SweepResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &result.rows {
        let mse = r.mse_mean.map(|m| format!("{m:.6e}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{:.6},{},{:.6},{:.6},{},{},{}",
            r.axis, r.scheme, r.eff_snr_db_mean, r.eff_snr_db_stderr, mse, r.trials, r.budget
        );
    }
    out
}

const PALETTE: [&str; 8] = ["#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

fn axis_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Line plot of mean effective SNR against the sweep axis, one polyline per scheme.
pub fn render_svg(result: &SweepResult) -> String {
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (70.0, 170.0, 20.0, 60.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let (x0, x1) = axis_range(result.rows.iter().map(|r| r.axis));
    let (y0, y1) = axis_range(result.rows.iter().map(|r| r.eff_snr_db_mean));
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (1.0 - (y - y0) / (y1 - y0)) * ph;
    let x_label = match result.kind {
        SweepKind::ReferenceSnr => "Reference SNR (dB)",
        SweepKind::Subsurfaces => "Number of IRS subsurfaces N",
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for i in 0..=5 {
        let fx = x0 + (x1 - x0) * i as f64 / 5.0;
        let fy = y0 + (y1 - y0) * i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{fx:.1}</text>"#,
            sx(fx),
            top + ph + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{fy:.1}</text>"#,
            left - 6.0,
            sy(fy) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{x_label}</text>"#,
        left + pw / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.1})">Effective SNR (dB)</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (i, scheme) in result.schemes().iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = result
            .rows
            .iter()
            .filter(|r| &r.scheme == scheme)
            .map(|r| format!("{:.2},{:.2}", sx(r.axis), sy(r.eff_snr_db_mean)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline data-scheme="{scheme}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="1.5"/>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{ly:.1}" font-size="12">{scheme}</text>"#, lx + 26.0);
    }
    s.push_str("</svg>\n");
    s
}

fn metadata(result: &SweepResult, config: &ExperimentConfig) -> serde_json::Value {
    let ns: Vec<usize> = result.points.iter().map(|p| p.n_subsurfaces).collect();
    let reference_snr = match result.kind {
        SweepKind::ReferenceSnr => json!({ "mode": "fixed_noise_ratio", "axis": "mean_reference_snr_db" }),
        SweepKind::Subsurfaces => json!({
            "mode": "per_realization",
            "reference_snr_db": config.n_sweep_reference_snr_db,
            "noise_ratio": "alpha^2 |h_d|^4 / reference_snr",
        }),
    };
    json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "sweep": result.kind,
        "seed": config.seed,
        "trials": config.trials,
        "averaging": config.averaging,
        "reference_snr": reference_snr,
        "sub_blocks": ns.iter().map(|&n| config.sub_blocks_for(n)).collect::<Vec<_>>(),
        "codebook_size": ns.iter().map(|&n| config.codebook_size_for(n)).collect::<Vec<_>>(),
        "points": result.points,
        "skipped": result.skipped,
        "config": config,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), OutputError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| OutputError::Io { path: parent.to_path_buf(), source })?;
    }
    fs::write(path, contents).map_err(|source| OutputError::Io { path: path.to_path_buf(), source })
}

/// Writes the CSV, the optional SVG and the JSON metadata sidecar.
pub fn emit_outputs(result: &SweepResult, config: &ExperimentConfig, paths: &OutputPaths) -> Result<(), OutputError> {
    write_file(&paths.csv, &write_csv(result))?;
    if let Some(svg) = &paths.svg {
        write_file(svg, &render_svg(result))?;
    }
    let meta = serde_json::to_string_pretty(&metadata(result, config))?;
    write_file(&paths.metadata, &(meta + "\n"))
}
