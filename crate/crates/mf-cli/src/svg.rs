//! Figure bodies as pure functions of plotted data. Callers read the
//! data back from the CSVs they just wrote, so a figure can always be
//! regenerated from shipped files.

const POS_COLOR: &str = "#d62728";
const NEG_COLOR: &str = "#1f77b4";

fn sign_color(sign: f64) -> &'static str {
    if sign >= 0.0 {
        POS_COLOR
    } else {
        NEG_COLOR
    }
}

fn path_for(points: impl Iterator<Item = (f64, f64)>) -> String {
    let mut d = String::new();
    for (i, (x, y)) in points.enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        d.push_str(&format!("{cmd}{x:.2} {y:.2} "));
    }
    d
}

/// Particle cloud in the plane with the radial axis compressed by tanh:
/// a point p plots at tanh(|p|) * p/|p|. The black circle is the unit
/// circle (where particles start); dashed rays are the teacher
/// directions, colored by output sign like the particles.
pub fn particle_trace_figure(
    particles: &[(f64, f64, f64)],
    teachers: &[(f64, f64, f64)],
) -> (String, (u32, u32)) {
    let size = 520.0;
    let c = size / 2.0;
    let r_max = 240.0;
    let map = |x: f64, y: f64| -> (f64, f64) {
        let r = x.hypot(y);
        if r == 0.0 {
            return (c, c);
        }
        let scale = r_max * r.tanh() / r;
        (c + scale * x, c - scale * y)
    };
    let mut b = String::new();
    b.push_str(&format!(
        "<rect width=\"{size}\" height=\"{size}\" fill=\"white\"/>\n"
    ));
    // asymptotic rim (r -> infinity) for orientation
    b.push_str(&format!(
        "<circle cx=\"{c}\" cy=\"{c}\" r=\"{r_max}\" fill=\"none\" stroke=\"#cccccc\" \
         stroke-width=\"1\"/>\n"
    ));
    let unit_r = r_max * 1.0f64.tanh();
    b.push_str(&format!(
        "<circle cx=\"{c}\" cy=\"{c}\" r=\"{unit_r:.2}\" fill=\"none\" stroke=\"black\" \
         stroke-width=\"1\"/>\n"
    ));
    for &(x, y, sign) in teachers {
        let r = x.hypot(y);
        if r == 0.0 {
            continue;
        }
        let (ex, ey) = (c + 0.995 * r_max * x / r, c - 0.995 * r_max * y / r);
        b.push_str(&format!(
            "<line x1=\"{c}\" y1=\"{c}\" x2=\"{ex:.2}\" y2=\"{ey:.2}\" stroke=\"{}\" \
             stroke-width=\"1.5\" stroke-dasharray=\"7 5\"/>\n",
            sign_color(sign)
        ));
    }
    for &(x, y, sign) in particles {
        let (px, py) = map(x, y);
        b.push_str(&format!(
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.8\"/>\n",
            sign_color(sign)
        ));
    }
    (b, (size as u32, size as u32))
}

/// Training points plus two decision boundaries on [-1/2, 1/2]^2:
/// both-layers solid black, output-layer dashed green.
pub fn boundary_overlay_figure(
    points: &[(f64, f64, f64)],
    both_layers: &[Vec<(f64, f64)>],
    output_layer: &[Vec<(f64, f64)>],
) -> (String, (u32, u32)) {
    let size = 520.0;
    let map = move |x: f64, y: f64| ((x + 0.5) * size, (0.5 - y) * size);
    let mut b = String::new();
    b.push_str(&format!(
        "<rect width=\"{size}\" height=\"{size}\" fill=\"white\"/>\n"
    ));
    for &(x, y, label) in points {
        let (px, py) = map(x, y);
        b.push_str(&format!(
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3.5\" fill=\"{}\" \
             fill-opacity=\"0.65\"/>\n",
            sign_color(label)
        ));
    }
    for poly in output_layer {
        b.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"2\" \
             stroke-dasharray=\"6 4\"/>\n",
            path_for(poly.iter().map(|&(x, y)| map(x, y)))
        ));
    }
    for poly in both_layers {
        b.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n",
            path_for(poly.iter().map(|&(x, y)| map(x, y)))
        ));
    }
    (b, (size as u32, size as u32))
}
