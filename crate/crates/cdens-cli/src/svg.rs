//! Standalone SVG plot of a fit: the point-estimate polyline, robust
//! bias-corrected pointwise intervals as error bars, and the robust uniform
//! band as a shaded polygon. Output bytes are a pure function of the fit.

use crate::output::OutputBundle;
use crate::{CliError, CliResult};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 50.0;

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT
            + (x - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT
            - MARGIN_BOTTOM
            - (y - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

/// Render the plot. Needs at least two grid points with complete robust
/// intervals and band values.
pub fn render(bundle: &OutputBundle) -> CliResult<String> {
    let rows: Vec<_> = bundle
        .rows
        .iter()
        .filter(|r| {
            r.estimate.is_some()
                && r.rbc_ci_lower.is_some()
                && r.rbc_ci_upper.is_some()
                && r.rbc_band_lower.is_some()
                && r.rbc_band_upper.is_some()
        })
        .collect();
    if rows.len() < 2 {
        return Err(CliError::flags("need >= 2 grid points for plot"));
    }

    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for r in &rows {
        for v in [r.estimate, r.rbc_band_lower, r.rbc_band_upper] {
            let v = v.unwrap();
            y_lo = y_lo.min(v);
            y_hi = y_hi.max(v);
        }
    }
    let pad = 0.05 * (y_hi - y_lo).max(1e-12);
    let frame = Frame {
        x_lo: rows.first().unwrap().grid,
        x_hi: rows.last().unwrap().grid,
        y_lo: y_lo - pad,
        y_hi: y_hi + pad,
    };

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // uniform band polygon: upper edge left to right, lower edge back
    let mut pts = String::new();
    for r in &rows {
        pts.push_str(&format!(
            "{:.2},{:.2} ",
            frame.px(r.grid),
            frame.py(r.rbc_band_upper.unwrap())
        ));
    }
    for r in rows.iter().rev() {
        pts.push_str(&format!(
            "{:.2},{:.2} ",
            frame.px(r.grid),
            frame.py(r.rbc_band_lower.unwrap())
        ));
    }
    s.push_str(&format!(
        "<polygon class=\"band\" points=\"{}\" fill=\"#9ecae1\" fill-opacity=\"0.45\" stroke=\"none\"/>\n",
        pts.trim_end()
    ));

    // pointwise error bars
    let cap = 4.0;
    for r in &rows {
        let x = frame.px(r.grid);
        let lo = frame.py(r.rbc_ci_lower.unwrap());
        let hi = frame.py(r.rbc_ci_upper.unwrap());
        s.push_str(&format!(
            "<g class=\"ci\" stroke=\"#08519c\" stroke-width=\"1.2\">\
             <line x1=\"{x:.2}\" y1=\"{lo:.2}\" x2=\"{x:.2}\" y2=\"{hi:.2}\"/>\
             <line x1=\"{:.2}\" y1=\"{lo:.2}\" x2=\"{:.2}\" y2=\"{lo:.2}\"/>\
             <line x1=\"{:.2}\" y1=\"{hi:.2}\" x2=\"{:.2}\" y2=\"{hi:.2}\"/></g>\n",
            x - cap,
            x + cap,
            x - cap,
            x + cap,
        ));
    }

    // point estimate polyline
    let mut line = String::new();
    for r in &rows {
        line.push_str(&format!(
            "{:.2},{:.2} ",
            frame.px(r.grid),
            frame.py(r.estimate.unwrap())
        ));
    }
    s.push_str(&format!(
        "<polyline class=\"estimate\" points=\"{}\" fill=\"none\" stroke=\"#d7301f\" stroke-width=\"2\"/>\n",
        line.trim_end()
    ));

    // axes with five ticks each
    let ax_y = HEIGHT - MARGIN_BOTTOM;
    s.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{ax_y}\" x2=\"{:.2}\" y2=\"{ax_y}\" stroke=\"black\"/>\n",
        WIDTH - MARGIN_RIGHT
    ));
    s.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{ax_y}\" stroke=\"black\"/>\n"
    ));
    for i in 0..5 {
        let fx = frame.x_lo + (frame.x_hi - frame.x_lo) * i as f64 / 4.0;
        let px = frame.px(fx);
        s.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{ax_y}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            ax_y + 5.0
        ));
        s.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{fx:.3}</text>\n",
            ax_y + 20.0
        ));
        let fy = frame.y_lo + (frame.y_hi - frame.y_lo) * i as f64 / 4.0;
        let py = frame.py(fy);
        s.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{MARGIN_LEFT}\" y2=\"{py:.2}\" stroke=\"black\"/>\n",
            MARGIN_LEFT - 5.0
        ));
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{fy:.3}</text>\n",
            MARGIN_LEFT - 8.0,
            py + 4.0
        ));
    }
    s.push_str("</svg>\n");
    Ok(s)
}
