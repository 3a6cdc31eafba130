//! Static SVG plots. Data files remain the source of truth; these only draw.

use std::fmt::Write;

use ssm_core::isola::RootTrack;
use ssm_core::{FrcCurve, Stability};

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |v: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
                (lo - 0.5, hi + 0.5)
            } else {
                let m = 0.04 * (hi - lo);
                (lo - m, hi + m)
            }
        };
        Frame { x: span(&mut xs.clone()), y: span(&mut ys.clone()) }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 1.5 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 1.5 * PAD)
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (x0, x1, y0, y1) = (PAD, W - PAD / 2.0, H - PAD, PAD / 2.0);
        let _ = writeln!(out, r##"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="#444"/>"##, x1 - x0, y0 - y1);
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = self.x.0 + f * (self.x.1 - self.x.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let (px, py) = (self.px(xv), self.py(yv));
            let _ = writeln!(out, r#"<text x="{px:.1}" y="{:.1}" font-size="11" text-anchor="middle">{xv:.4}</text>"#, y0 + 16.0);
            let _ = writeln!(out, r#"<text x="{:.1}" y="{py:.1}" font-size="11" text-anchor="end">{}</text>"#, x0 - 4.0, short(yv));
        }
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{xlabel}</text>"#, (x0 + x1) / 2.0, H - 12.0);
        let _ = writeln!(
            out,
            r#"<text x="14" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {:.1})">{ylabel}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0
        );
    }
}

fn short(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn open() -> String {
    format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif">"#) + "\n"
}

const PALETTE: [&str; 6] = ["#1f4e9c", "#c0392b", "#27864a", "#8e44ad", "#d68910", "#117a8b"];

/// Response amplitude against Ω; unstable segments dashed, folds as dots.
pub fn frc_plot(curve: &FrcCurve, amplitude_label: &str) -> String {
    let amp = |p: &ssm_core::FrcPoint| p.u.physical_amplitude.unwrap_or(p.u.rho);
    let frame = Frame::new(curve.points.iter().map(|p| p.u.omega), curve.points.iter().map(amp));
    let mut out = open();
    frame.axes(&mut out, "Ω", amplitude_label);
    let mut groups: Vec<Vec<&ssm_core::FrcPoint>> = vec![];
    for p in &curve.points {
        if p.branch == ssm_core::Branch::Fold {
            let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#000"/>"##, frame.px(p.u.omega), frame.py(amp(p)));
            continue;
        }
        match groups.last_mut() {
            Some(g) if g[0].component == p.component && g[0].branch == p.branch => g.push(p),
            _ => groups.push(vec![p]),
        }
    }
    let stable = |p: &ssm_core::FrcPoint| p.u.stability == Stability::Stable;
    for g in groups {
        let mut start = 0;
        for i in 1..=g.len() {
            if i < g.len() && stable(g[i]) == stable(g[start]) {
                continue;
            }
            // runs share their boundary point so the curve stays connected
            let seg = &g[start..(i + 1).min(g.len())];
            let pts: Vec<String> = seg.iter().map(|q| format!("{:.2},{:.2}", frame.px(q.u.omega), frame.py(amp(q)))).collect();
            let dash = if stable(g[start]) { "" } else { r#" stroke-dasharray="5,4""# };
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                pts.join(" "),
                PALETTE[g[0].component % PALETTE.len()]
            );
            start = i;
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Roots of a(ρ) in the complex plane, brighter for higher orders.
pub fn roots_plot(track: &RootTrack) -> String {
    let all: Vec<(u32, f64, f64)> = track.orders.iter().flat_map(|o| o.rho.iter().map(move |z| (o.m, z.re, z.im))).collect();
    let frame = Frame::new(all.iter().map(|p| p.1).chain([0.0]), all.iter().map(|p| p.2).chain([0.0]));
    let mut out = open();
    frame.axes(&mut out, "Re ρ", "Im ρ");
    let (lo, hi) = track.orders.first().zip(track.orders.last()).map_or((0, 1), |(a, b)| (a.m, b.m.max(a.m + 1)));
    for (m, x, y) in all {
        let t = (m - lo) as f64 / (hi - lo) as f64;
        // dark purple to yellow
        let (r, g, b) = (68.0 + t * (253.0 - 68.0), 1.0 + t * (231.0 - 1.0), 84.0 + t * (37.0 - 84.0));
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="rgb({},{},{})"/>"#,
            frame.px(x),
            frame.py(y),
            r as u8,
            g as u8,
            b as u8
        );
    }
    if let Some(r) = track.orders.last().and_then(|o| o.radius) {
        let (cx, cy) = (frame.px(0.0), frame.py(0.0));
        let (rx, ry) = (frame.px(r) - cx, cy - frame.py(r));
        let _ = writeln!(out, r##"<ellipse cx="{cx:.2}" cy="{cy:.2}" rx="{rx:.2}" ry="{ry:.2}" fill="none" stroke="#888" stroke-dasharray="3,3"/>"##);
    }
    out.push_str("</svg>\n");
    out
}
