//! Minimal hand-emitted SVG scatter plots: circles plus axis lines with
//! min/max labels. No dependencies, byte-deterministic output.

use geolift_core::points::PointCloud;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;

fn color_ramp(t: f64) -> String {
    // Dark blue to yellow.
    let t = t.clamp(0.0, 1.0);
    let r = (40.0 + 215.0 * t) as u8;
    let g = (40.0 + 180.0 * t) as u8;
    let b = (140.0 - 110.0 * t) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Renders the first two coordinates of the cloud (y = 0 for 1-D clouds),
/// coloured by an optional covariate.
pub fn scatter(points: &PointCloud, covariate: Option<&[f64]>) -> String {
    let n = points.n();
    let get = |i: usize| -> (f64, f64) {
        let row = points.row(i);
        (row[0], if points.dim() > 1 { row[1] } else { 0.0 })
    };
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for i in 0..n {
        let (x, y) = get(i);
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if n == 0 {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    let xspan = (xmax - xmin).max(1e-12);
    let yspan = (ymax - ymin).max(1e-12);
    let (cmin, cmax) = covariate
        .map(|c| {
            c.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
        })
        .unwrap_or((0.0, 1.0));
    let cspan = (cmax - cmin).max(1e-12);

    let sx = |x: f64| MARGIN + (x - xmin) / xspan * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - ymin) / yspan * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\" stroke-width=\"1\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    ));
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\" stroke-width=\"1\"/>\n",
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN
    ));
    // Axis labels.
    svg.push_str(&format!(
        "<text x=\"{m}\" y=\"{y}\" font-size=\"11\" font-family=\"monospace\">{v:.4}</text>\n",
        m = MARGIN,
        y = HEIGHT - MARGIN + 16.0,
        v = xmin
    ));
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" font-size=\"11\" font-family=\"monospace\" text-anchor=\"end\">{v:.4}</text>\n",
        x = WIDTH - MARGIN,
        y = HEIGHT - MARGIN + 16.0,
        v = xmax
    ));
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" font-size=\"11\" font-family=\"monospace\" text-anchor=\"end\">{v:.4}</text>\n",
        x = MARGIN - 4.0,
        y = HEIGHT - MARGIN,
        v = ymin
    ));
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" font-size=\"11\" font-family=\"monospace\" text-anchor=\"end\">{v:.4}</text>\n",
        x = MARGIN - 4.0,
        y = MARGIN + 10.0,
        v = ymax
    ));
    // Points.
    for i in 0..n {
        let (x, y) = get(i);
        let fill = match covariate {
            Some(c) => color_ramp((c[i] - cmin) / cspan),
            None => "#28508c".to_string(),
        };
        svg.push_str(&format!(
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"2\" fill=\"{}\" fill-opacity=\"0.8\"/>\n",
            sx(x),
            sy(y),
            fill
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
