use std::fmt::Write as _;

use super::BeeswarmExport;
use crate::logit::ElasticityPoint;

const WIDTH: f64 = 720.0;
const LEFT: f64 = 170.0;
const RIGHT: f64 = 30.0;
const LANE: f64 = 40.0;
const TOP: f64 = 30.0;

/// Blue (low) to red (high).
fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (30.0 + 225.0 * t).round() as u8;
    let b = (255.0 - 225.0 * t).round() as u8;
    format!("#{r:02x}40{b:02x}")
}

fn header(height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height:.0}\" viewBox=\"0 0 {WIDTH} {height:.0}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// One lane per feature, most important on top; x is the Shapley value,
/// colour the normalized feature value. Points in a lane are stacked
/// vertically by their rank within small x bins.
pub fn beeswarm_svg(export: &BeeswarmExport) -> String {
    let lanes = export.features.len() as f64;
    let height = TOP + LANE * lanes + 50.0;
    let max_abs = export
        .features
        .iter()
        .flat_map(|f| f.points.iter().map(|p| p.phi.abs()))
        .fold(0.0, f64::max)
        .max(1e-12);
    let plot_w = WIDTH - LEFT - RIGHT;
    let x_of = |phi: f64| LEFT + plot_w * (0.5 + 0.5 * phi / max_abs);
    let mut s = header(height);
    let zero = x_of(0.0);
    writeln!(
        s,
        "<line x1=\"{zero:.2}\" y1=\"{TOP}\" x2=\"{zero:.2}\" y2=\"{:.2}\" stroke=\"#999\"/>",
        TOP + LANE * lanes
    )
    .unwrap();
    for (k, f) in export.features.iter().enumerate() {
        let cy = TOP + LANE * (k as f64 + 0.5);
        writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            LEFT - 8.0,
            cy + 4.0,
            f.feature
        )
        .unwrap();
        let mut order: Vec<usize> = (0..f.points.len()).collect();
        order.sort_by(|&a, &b| f.points[a].phi.total_cmp(&f.points[b].phi).then(a.cmp(&b)));
        let mut bin_count = std::collections::BTreeMap::<i64, usize>::new();
        for i in order {
            let p = &f.points[i];
            let x = x_of(p.phi);
            let bin = (x / 3.0).floor() as i64;
            let c = bin_count.entry(bin).or_insert(0);
            let offset = (*c as f64 / 2.0).ceil() * if c.is_multiple_of(2) { 1.0 } else { -1.0 } * 2.5;
            *c += 1;
            let y = cy + offset.clamp(-LANE / 2.0 + 3.0, LANE / 2.0 - 3.0);
            writeln!(
                s,
                "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2.5\" fill=\"{}\"/>",
                color(p.normalized_value)
            )
            .unwrap();
        }
    }
    let base = TOP + LANE * lanes + 30.0;
    writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{base:.2}\" text-anchor=\"middle\">SHAP value (impact on predicted probability)</text>",
        LEFT + plot_w / 2.0
    )
    .unwrap();
    writeln!(s, "<text x=\"{LEFT:.2}\" y=\"{base:.2}\">{:.4}</text>", -max_abs).unwrap();
    writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{base:.2}\" text-anchor=\"end\">{:.4}</text>",
        WIDTH - RIGHT,
        max_abs
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

/// Elasticity against distance on a log(1 + d) axis.
pub fn elasticity_svg(curve: &[ElasticityPoint]) -> String {
    let height = 400.0;
    let (top, bottom) = (TOP, height - 50.0);
    let left = 80.0;
    let plot_w = WIDTH - left - RIGHT;
    let xs: Vec<f64> = curve.iter().map(|p| p.distance_km.ln_1p()).collect();
    let ys: Vec<f64> = curve.iter().map(|p| p.elasticity).collect();
    let (xmin, xmax) = (
        xs.iter().copied().fold(f64::INFINITY, f64::min),
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let (ymin, ymax) = (
        ys.iter().copied().fold(f64::INFINITY, f64::min),
        ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let sx = |x: f64| {
        left + if xmax > xmin {
            plot_w * (x - xmin) / (xmax - xmin)
        } else {
            plot_w / 2.0
        }
    };
    let sy = |y: f64| {
        bottom
            - if ymax > ymin {
                (bottom - top) * (y - ymin) / (ymax - ymin)
            } else {
                (bottom - top) / 2.0
            }
    };
    let mut s = header(height);
    writeln!(
        s,
        "<line x1=\"{left}\" y1=\"{bottom}\" x2=\"{:.2}\" y2=\"{bottom}\" stroke=\"#333\"/>",
        WIDTH - RIGHT
    )
    .unwrap();
    writeln!(
        s,
        "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{bottom}\" stroke=\"#333\"/>"
    )
    .unwrap();
    let pts: Vec<String> = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    writeln!(
        s,
        "<polyline fill=\"none\" stroke=\"#c03020\" stroke-width=\"2\" points=\"{}\"/>",
        pts.join(" ")
    )
    .unwrap();
    if !curve.is_empty() {
        writeln!(
            s,
            "<text x=\"{left}\" y=\"{:.2}\">{:.0} km</text>",
            bottom + 18.0,
            curve[0].distance_km
        )
        .unwrap();
        writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{:.0} km</text>",
            WIDTH - RIGHT,
            bottom + 18.0,
            curve[curve.len() - 1].distance_km
        )
        .unwrap();
        writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{ymin:.3}</text>",
            left - 6.0,
            bottom
        )
        .unwrap();
        writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{ymax:.3}</text>",
            left - 6.0,
            top + 10.0
        )
        .unwrap();
    }
    writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">geographical distance (log scale)</text>",
        left + plot_w / 2.0,
        height - 12.0
    )
    .unwrap();
    writeln!(
        s,
        "<text x=\"16\" y=\"{:.2}\" transform=\"rotate(-90 16 {:.2})\" text-anchor=\"middle\">TENB elasticity</text>",
        (top + bottom) / 2.0,
        (top + bottom) / 2.0
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}
