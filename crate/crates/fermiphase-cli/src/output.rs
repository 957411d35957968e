//! Result tables and their serializations.
//!
//! One row per (observable, checkpoint). Rows are sorted by observable id
//! and then by time, and every float is written with the shortest
//! round-trip representation, so a rerun of the same config produces
//! byte-identical files. The JSON file mirrors the CSV rows and adds the
//! metadata block that `compare` uses to refuse apples-to-oranges checks.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Metadata {
    /// "stochastic" or "exact".
    pub kind: String,
    pub version: String,
    pub seed: u64,
    /// SHA-256 of the raw config file bytes.
    pub config_hash: String,
    /// SHA-256 of the physics: model, grid, initial state, dispersion,
    /// checkpoint times, observable set.
    pub model_hash: String,
    pub n_trajectories: usize,
    pub n_excluded: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Row {
    pub observable_id: String,
    pub t: f64,
    pub re: f64,
    pub im: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub n_traj: usize,
    pub n_excluded: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultTable {
    pub metadata: Metadata,
    pub rows: Vec<Row>,
}

impl ResultTable {
    /// Total order the output contract promises: observable id, then time.
    pub fn sort_rows(&mut self) {
        self.rows.sort_by(|a, b| {
            a.observable_id
                .cmp(&b.observable_id)
                .then(a.t.total_cmp(&b.t))
        });
    }

    pub fn write_csv(&self, path: &Path) -> CliResult<()> {
        let mut w = csv::Writer::from_path(path)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        w.write_record([
            "observable_id",
            "t",
            "re",
            "im",
            "stderr_re",
            "stderr_im",
            "n_traj",
            "n_excluded",
        ])
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        for r in &self.rows {
            w.write_record([
                r.observable_id.as_str(),
                &format!("{}", r.t),
                &format!("{}", r.re),
                &format!("{}", r.im),
                &format!("{}", r.stderr_re),
                &format!("{}", r.stderr_im),
                &format!("{}", r.n_traj),
                &format!("{}", r.n_excluded),
            ])
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        }
        w.flush()
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        text.push('\n');
        fs::write(path, text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }
}

/// One panel per observable: the real-part estimate against time with a
/// shaded ± standard error band, the imaginary part dashed.
pub fn write_plot_svg(table: &ResultTable, path: &Path) -> CliResult<()> {
    let mut ids: Vec<&str> = table
        .rows
        .iter()
        .map(|r| r.observable_id.as_str())
        .collect();
    ids.sort_unstable();
    ids.dedup();

    const W: f64 = 640.0;
    const H: f64 = 160.0;
    const ML: f64 = 60.0;
    const MR: f64 = 15.0;
    const MT: f64 = 26.0;
    const MB: f64 = 24.0;

    let total_h = H * ids.len() as f64;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{total_h}\" \
         viewBox=\"0 0 {W} {total_h}\" font-family=\"monospace\" font-size=\"11\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{W}\" height=\"{total_h}\" fill=\"white\"/>\n"
    ));

    for (panel, id) in ids.iter().enumerate() {
        let rows: Vec<&Row> = table
            .rows
            .iter()
            .filter(|r| r.observable_id == *id)
            .collect();
        let oy = panel as f64 * H;
        let (t_lo, t_hi) = bounds(rows.iter().map(|r| r.t));
        let (v_lo, v_hi) = bounds(
            rows.iter()
                .flat_map(|r| [r.re - r.stderr_re, r.re + r.stderr_re, r.im]),
        );
        let pad = 0.05 * (v_hi - v_lo).max(1e-12);
        let (v_lo, v_hi) = (v_lo - pad, v_hi + pad);
        let x = |t: f64| ML + (t - t_lo) / (t_hi - t_lo).max(1e-300) * (W - ML - MR);
        let y = |v: f64| oy + MT + (v_hi - v) / (v_hi - v_lo) * (H - MT - MB);

        svg.push_str(&format!(
            "<text x=\"{ML}\" y=\"{}\" font-weight=\"bold\">{}</text>\n",
            oy + 16.0,
            escape(id)
        ));
        svg.push_str(&format!(
            "<rect x=\"{ML}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>\n",
            oy + MT,
            W - ML - MR,
            H - MT - MB
        ));
        for (v, label) in [(v_lo, format!("{v_lo:.3}")), (v_hi, format!("{v_hi:.3}"))] {
            svg.push_str(&format!(
                "<text x=\"4\" y=\"{}\">{label}</text>\n",
                y(v) + 4.0
            ));
        }
        for (t, anchor) in [(t_lo, "start"), (t_hi, "end")] {
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\">t={t:.4}</text>\n",
                x(t),
                oy + H - 8.0
            ));
        }

        let band: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", x(r.t), y(r.re + r.stderr_re)))
            .chain(
                rows.iter()
                    .rev()
                    .map(|r| format!("{:.2},{:.2}", x(r.t), y(r.re - r.stderr_re))),
            )
            .collect();
        svg.push_str(&format!(
            "<polygon points=\"{}\" fill=\"#4a90d9\" opacity=\"0.25\"/>\n",
            band.join(" ")
        ));
        let line = |vals: Vec<String>, style: &str| {
            format!("<polyline points=\"{}\" fill=\"none\" {style}/>\n", vals.join(" "))
        };
        svg.push_str(&line(
            rows.iter()
                .map(|r| format!("{:.2},{:.2}", x(r.t), y(r.re)))
                .collect(),
            "stroke=\"#1f5fa0\" stroke-width=\"1.5\"",
        ));
        svg.push_str(&line(
            rows.iter()
                .map(|r| format!("{:.2},{:.2}", x(r.t), y(r.im)))
                .collect(),
            "stroke=\"#c0392b\" stroke-width=\"1.2\" stroke-dasharray=\"4 3\"",
        ));
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo > hi {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
