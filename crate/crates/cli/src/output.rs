//! CSV, JSON and SVG artifact writers. Numbers use `f64`'s shortest
//! round-trip formatting, so identical runs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use dsmf_core::analysis::BoundednessEntry;
use dsmf_core::{BeliefHistory, Result as CoreResult, SensorId, Trajectory};
use serde::Serialize;

pub fn trajectory_csv(t: &Trajectory) -> String {
    let n = t.states[0].len();
    let mut out = String::from("k");
    for d in 1..=n {
        let _ = write!(out, ",x{d}");
    }
    out.push('\n');
    for (k, x) in t.states.iter().enumerate() {
        let _ = write!(out, "{k}");
        for v in x.iter() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// One row per (step, dimension): `k,dim,true,lower,upper,err_lower,err_upper`.
pub fn sensor_csv(h: &BeliefHistory, t: &Trajectory, i: SensorId) -> CoreResult<String> {
    let mut out = String::from("k,dim,true,lower,upper,err_lower,err_upper\n");
    for k in 0..=h.horizon() {
        let hull = h.hull(k, i)?;
        let x = &t.states[k];
        for d in 0..x.len() {
            let (lo, hi) = (hull.lower[d], hull.upper[d]);
            let _ = writeln!(out, "{k},{},{},{lo},{hi},{},{}", d + 1, x[d], lo - x[d], hi - x[d]);
        }
    }
    Ok(out)
}

pub fn boundedness_csv(entries: &[BoundednessEntry]) -> String {
    let mut out = String::from("sensor,dim,early_max,tail_max,ratio,flag\n");
    for e in entries {
        let flag = match e.flag {
            dsmf_core::analysis::GrowthFlag::Bounded => "bounded",
            dsmf_core::analysis::GrowthFlag::Growing => "growing",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{flag}",
            e.sensor, e.dim, e.early_max, e.tail_max, e.ratio
        );
    }
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// Error band plot: shaded `err_lower..err_upper` against `k`, with the zero line.
pub fn error_band_svg(title: &str, lower: &[f64], upper: &[f64]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 320.0;
    const PAD: f64 = 48.0;
    let n = lower.len();
    let span_k = (n.max(2) - 1) as f64;
    let finite = lower.iter().chain(upper).copied().filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((0.0_f64, 0.0_f64), |(a, b), v| (a.min(v), b.max(v)));
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let margin = 0.05 * (hi - lo);
    let (lo, hi) = (lo - margin, hi + margin);
    let px = |k: usize| PAD + (W - 2.0 * PAD) * k as f64 / span_k;
    let py = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);

    let mut band = String::new();
    for (k, v) in upper.iter().enumerate() {
        let _ = write!(band, "{:.2},{:.2} ", px(k), py(*v));
    }
    for (k, v) in lower.iter().enumerate().rev() {
        let _ = write!(band, "{:.2},{:.2} ", px(k), py(*v));
    }
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r##"<rect width="{W}" height="{H}" fill="#ffffff"/>"##);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#,
        W / 2.0
    );
    let _ = writeln!(
        svg,
        r##"<polygon points="{}" fill="#4c78a8" fill-opacity="0.35" stroke="#4c78a8" stroke-width="1"/>"##,
        band.trim_end()
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{PAD}" y1="{y0:.2}" x2="{}" y2="{y0:.2}" stroke="#333333" stroke-dasharray="4 3"/>"##,
        W - PAD,
        y0 = py(0.0)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#333333"/>"##,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(
        svg,
        r#"<text x="{PAD}" y="{}" text-anchor="middle">0</text>"#,
        H - PAD + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W - PAD,
        H - PAD + 16.0,
        n.saturating_sub(1)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">k</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{:.2}" text-anchor="end">{:.3}</text>"#,
        PAD - 4.0,
        py(hi) + 4.0,
        hi
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{:.2}" text-anchor="end">{:.3}</text>"#,
        PAD - 4.0,
        py(lo) + 4.0,
        lo
    );
    svg.push_str("</svg>\n");
    svg
}
