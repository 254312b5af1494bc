//! Minimal SVG line plots of tracks and deviation traces.

use std::fmt::Write as _;

use magcoat_core::analysis::{displacement_angles, Analysis};

use crate::scenario::ScenarioRun;

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 40.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit<'a>(series: impl Iterator<Item = &'a [(f64, f64)]>) -> Self {
        let mut f = Frame {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for (x, y) in series.flatten() {
            f.x0 = f.x0.min(*x);
            f.x1 = f.x1.max(*x);
            f.y0 = f.y0.min(*y);
            f.y1 = f.y1.max(*y);
        }
        if !(f.x1 > f.x0) {
            f.x0 -= 1.0;
            f.x1 += 1.0;
        }
        if !(f.y1 > f.y0) {
            f.y0 -= 1.0;
            f.y1 += 1.0;
        }
        f
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (
            PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD),
            H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD),
        )
    }
}

/// Name, stroke colour and points of one polyline.
type Series<'a> = (&'a str, &'a str, Vec<(f64, f64)>);

fn render(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let frame = Frame::fit(series.iter().map(|s| s.2.as_slice()));
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#,
        W / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        W / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">{y_label}</text>"#,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{PAD}" y="{}">{:.3} .. {:.3}</text><text x="{}" y="{}" text-anchor="end">{:.3} .. {:.3}</text>"#,
        H - PAD + 14.0,
        frame.x0,
        frame.x1,
        W - PAD,
        PAD - 4.0,
        frame.y0,
        frame.y1
    );
    for (k, (name, colour, pts)) in series.iter().enumerate() {
        let mut d = String::new();
        for (i, (x, y)) in pts.iter().enumerate() {
            let (u, v) = frame.map(*x, *y);
            let _ = write!(d, "{}{u:.2},{v:.2} ", if i == 0 { "M" } else { "L" });
        }
        let _ = writeln!(
            svg,
            r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="1.2"/>"#,
            d.trim_end()
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{colour}">{name}</text>"#,
            PAD + 8.0,
            PAD + 16.0 + 14.0 * k as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// True, sensed and filtered tracks in millimeters.
pub fn tracks_svg(run: &ScenarioRun) -> String {
    let mm = |t: &magcoat_core::analysis::TrackRecord| {
        t.samples
            .iter()
            .map(|s| (s.x * 1e3, s.y * 1e3))
            .collect::<Vec<_>>()
    };
    let mut series = vec![
        ("true", "black", mm(&run.true_track)),
        ("sensed", "steelblue", mm(&run.sensed)),
    ];
    if let Ok(a) = &run.analysis {
        series.push(("filtered", "firebrick", mm(&a.filtered)));
    }
    render(&run.summary.scenario_id, "x (mm)", "y (mm)", &series)
}

pub fn deviation_svg(a: &Analysis) -> String {
    let trace = |t| {
        let (angles, _) = displacement_angles(t);
        angles
            .iter()
            .enumerate()
            .map(|(k, v)| (k as f64, v - 90.0))
            .collect::<Vec<_>>()
    };
    render(
        &a.metrics.scenario_id,
        "segment",
        "deviation (deg)",
        &[
            ("equalized", "steelblue", trace(&a.equalized)),
            ("filtered", "firebrick", trace(&a.filtered)),
        ],
    )
}
