//! Text emitters shared by the command-line tool and the tests: CSV with
//! 17 significant digits, stamped JSON, JSON lines and a small SVG line plot.

use crate::error::{Error, Result};
use crate::experiments::{summary_table, ExperimentReport, SweepRecord};
use crate::fd_solver::DiscreteSolution;
use crate::ground_state::{energy_i_infinity, RadialProfile};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Version and configuration hash stamped into every output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Provenance {
            version: VERSION.to_string(),
            config_hash: config_hash.into(),
        }
    }

    fn csv_comment(&self) -> String {
        format!(
            "# spikeforge {} config_hash {}\n",
            self.version, self.config_hash
        )
    }
}

/// `x` with 17 significant digits; parses back to the same `f64`.
pub fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    version: &'a str,
    config_hash: &'a str,
    data: &'a T,
}

/// Pretty JSON of `{version, config_hash, data}`.
pub fn stamped_json<T: Serialize>(data: &T, prov: &Provenance) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Stamped {
        version: &prov.version,
        config_hash: &prov.config_hash,
        data,
    })
    .map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub const PROFILE_COLUMNS: &str = "r,u,v,du,dv";

pub fn profile_csv(prof: &RadialProfile, prov: &Provenance) -> String {
    let mut s = prov.csv_comment();
    s.push_str(PROFILE_COLUMNS);
    s.push('\n');
    for i in 0..prof.r.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            sci(prof.r[i]),
            sci(prof.u[i]),
            sci(prof.v[i]),
            sci(prof.du[i]),
            sci(prof.dv[i])
        );
    }
    s
}

/// Rows of a CSV written by this module, skipping comments and the header.
pub fn parse_csv_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Format(format!("bad number '{t}': {e}")))
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileHeader {
    pub p: f64,
    pub q: f64,
    pub n: usize,
    pub r_max: f64,
    pub h: f64,
    pub cells: usize,
    pub residual_norm: f64,
    pub trusted_radius: f64,
    pub u0: f64,
    pub v0: f64,
    pub i_infinity: f64,
    pub columns: String,
}

pub fn profile_header(prof: &RadialProfile) -> ProfileHeader {
    ProfileHeader {
        p: prof.exponents.p(),
        q: prof.exponents.q(),
        n: prof.n(),
        r_max: prof.r_max,
        h: prof.h,
        cells: prof.cells(),
        residual_norm: prof.residual_norm,
        trusted_radius: prof.trusted_radius,
        u0: prof.u[0],
        v0: prof.v[0],
        i_infinity: energy_i_infinity(prof),
        columns: PROFILE_COLUMNS.into(),
    }
}

pub const SOLUTION_COLUMNS: &str = "i,j,r,theta,u,v";

pub fn solution_csv(sol: &DiscreteSolution, prov: &Provenance) -> String {
    let g = &sol.grid;
    let mut s = prov.csv_comment();
    let _ = writeln!(
        s,
        "# eps {} nr {} nt {} c_eps {}",
        sci(sol.eps),
        g.nr,
        g.nt,
        sci(sol.c_eps)
    );
    s.push_str(SOLUTION_COLUMNS);
    s.push('\n');
    for i in 0..=g.nr {
        for j in 0..=g.nt {
            let k = g.index(i, j);
            let _ = writeln!(
                s,
                "{i},{j},{},{},{},{}",
                sci(g.r[i]),
                sci(g.theta[j]),
                sci(sol.u[k]),
                sci(sol.v[k])
            );
        }
    }
    s
}

#[derive(Serialize)]
struct SweepLine<'a> {
    version: &'a str,
    config_hash: &'a str,
    preset: &'a str,
    start_component: usize,
    #[serde(flatten)]
    record: &'a SweepRecord,
}

/// One JSON object per converged ε, across all candidate sweeps of all reports.
pub fn sweep_jsonl(reports: &[ExperimentReport], prov: &Provenance) -> Result<String> {
    let mut s = String::new();
    for r in reports {
        for c in &r.candidates {
            for rec in &c.records {
                let line = serde_json::to_string(&SweepLine {
                    version: &prov.version,
                    config_hash: &prov.config_hash,
                    preset: &r.preset,
                    start_component: c.start_component,
                    record: rec,
                })
                .map_err(|e| Error::Format(e.to_string()))?;
                s.push_str(&line);
                s.push('\n');
            }
        }
    }
    Ok(s)
}

pub fn summary_text(reports: &[ExperimentReport], prov: &Provenance) -> String {
    let mut s = prov.csv_comment();
    s.push_str(&summary_table(reports));
    for r in reports {
        for v in &r.verdicts {
            let _ = writeln!(
                s,
                "[{}] {}: {} ({})",
                v.preset,
                v.claim,
                if v.passed { "pass" } else { "FAIL" },
                v.detail
            );
        }
        if let Some(f) = &r.expansion_fit {
            let conv = |c: &[crate::experiments::ConventionCheck; 2]| {
                format!(
                    "H sign +1: {:.4} (ratio {:.3}), H sign -1: {:.4} (ratio {:.3})",
                    c[0].predicted_slope,
                    c[0].magnitude_ratio,
                    c[1].predicted_slope,
                    c[1].magnitude_ratio
                )
            };
            let _ = writeln!(
                s,
                "[{}] fitted slope {:.4}, fit residual {:.2e}; gamma = {:.4}: {}; normal-moment gamma = {:.4}: {}",
                r.preset,
                f.slope,
                f.fit_residual,
                f.gamma,
                conv(&f.conventions),
                f.normal_moment_gamma,
                conv(&f.normal_moment_conventions)
            );
        }
        for c in &r.candidates {
            if let Some(e) = &c.error {
                let _ = writeln!(
                    s,
                    "[{}] sweep from component {} failed: {e}",
                    r.preset, c.start_component
                );
            }
        }
    }
    s
}

/// `report.json`, `sweep.jsonl` and `summary.txt` of a set of reports.
pub fn report_files(
    reports: &[ExperimentReport],
    prov: &Provenance,
) -> Result<Vec<(&'static str, String)>> {
    Ok(vec![
        ("report.json", stamped_json(&reports, prov)?),
        ("sweep.jsonl", sweep_jsonl(reports, prov)?),
        ("summary.txt", summary_text(reports, prov)),
    ])
}

/// A polyline, or isolated markers when `markers` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub markers: bool,
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Minimal SVG line plot: axes with end labels, one polyline per series, a legend.
pub fn svg_line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    prov: &Provenance,
) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in pts.filter(|p| p.0.is_finite() && p.1.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 1e-12 * y0.abs().max(1.0) {
        y0 -= 0.5 * y0.abs().max(1.0);
        y1 += 0.5 * y1.abs().max(1.0);
    }
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        s,
        "<!-- spikeforge {} config_hash {} -->",
        prov.version, prov.config_hash
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{m} {} L{} {} M{m} {} L{m} {m}" stroke="black" fill="none"/>"#,
        h - m,
        w - m,
        h - m,
        h - m
    );
    let tick = |v: f64| format!("{v:.4}");
    let _ = writeln!(
        s,
        r#"<text x="{m}" y="{}" text-anchor="middle" font-size="11">{}</text>"#,
        h - m + 16.0,
        tick(x0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">{}</text>"#,
        w - m,
        h - m + 16.0,
        tick(x1)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end" font-size="11">{}</text>"#,
        m - 4.0,
        h - m,
        tick(y0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end" font-size="11">{}</text>"#,
        m - 4.0,
        m + 4.0,
        tick(y1)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
        w / 2.0,
        h - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let finite: Vec<(f64, f64)> = ser
            .points
            .iter()
            .copied()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .collect();
        if ser.markers {
            for (x, y) in &finite {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#,
                    px(*x),
                    py(*y)
                );
            }
        } else if !finite.is_empty() {
            let path: Vec<String> = finite
                .iter()
                .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#,
                path.join(" ")
            );
        }
        let ly = m + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="12" height="4" fill="{color}"/><text x="{}" y="{}" font-size="12">{}</text>"#,
            w - m - 150.0,
            ly - 4.0,
            w - m - 132.0,
            ly + 2.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
