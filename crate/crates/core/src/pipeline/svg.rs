//! Static SVG line charts of topic frequencies and the HTML index page.

use std::fmt::Write;

use crate::dynamic::TopicsOverTime;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 620.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 350.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// x coordinate of every bin; a single bin spans the whole axis.
fn bin_x(n_bins: usize) -> Vec<f64> {
    match n_bins {
        0 => Vec::new(),
        1 => vec![LEFT, RIGHT],
        n => (0..n).map(|i| LEFT + (RIGHT - LEFT) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn fmt_value(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v:.2}")
    }
}

/// Frequency-versus-bin polylines for `topics`, one colour each.
pub fn evolution_svg(tot: &TopicsOverTime, topics: &[(i64, String)], y_label: &str) -> String {
    let n_bins = tot.bins.len();
    let xs = bin_x(n_bins);
    let max = topics
        .iter()
        .flat_map(|&(t, _)| (0..n_bins).map(move |b| tot.row(t, b).frequency))
        .fold(0.0f64, f64::max);
    let max = if max > 0.0 { max } else { 1.0 };
    let y = |f: f64| BOTTOM - (BOTTOM - TOP) * f / max;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{BOTTOM}" x2="{RIGHT}" y2="{BOTTOM}" stroke="black"/>"#
    );
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{BOTTOM}" stroke="black"/>"#);
    for b in 0..n_bins {
        let x = if n_bins == 1 { (LEFT + RIGHT) / 2.0 } else { xs[b] };
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            BOTTOM + 18.0,
            escape(&tot.bins.label(b))
        );
    }
    for frac in [0.0, 0.5, 1.0] {
        let v = max * frac;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y(v) + 4.0,
            fmt_value(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">time bin</text>"#,
        (LEFT + RIGHT) / 2.0,
        BOTTOM + 45.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0,
        escape(y_label)
    );
    for (i, (t, label)) in topics.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = if n_bins == 1 {
            let yy = y(tot.row(*t, 0).frequency);
            xs.iter().map(|x| format!("{x:.2},{yy:.2}")).collect()
        } else {
            (0..n_bins)
                .map(|b| format!("{:.2},{:.2}", xs[b], y(tot.row(*t, b).frequency)))
                .collect()
        };
        let _ = writeln!(
            s,
            r#"<polyline data-topic="{t}" fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="2"/>"#,
            RIGHT + 15.0,
            RIGHT + 35.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            RIGHT + 40.0,
            ly + 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// A plain page linking every artifact; `sections` are `(heading, links)`
/// with links as `(label, relative path)`.
pub fn index_html(title: &str, sections: &[(String, Vec<(String, String)>)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">");
    let _ = writeln!(s, "<title>{}</title>\n</head>\n<body>", escape(title));
    let _ = writeln!(s, "<h1>{}</h1>", escape(title));
    for (heading, links) in sections {
        let _ = writeln!(s, "<h2>{}</h2>\n<ul>", escape(heading));
        for (label, href) in links {
            let _ = writeln!(s, "<li><a href=\"{}\">{}</a></li>", escape(href), escape(label));
            if href.ends_with(".svg") {
                let _ = writeln!(s, "<img src=\"{}\" alt=\"{}\">", escape(href), escape(label));
            }
        }
        s.push_str("</ul>\n");
    }
    s.push_str("</body>\n</html>\n");
    s
}
