use std::fmt::Write as _;

/// Minimal SVG line chart of aligned series over a shared time axis.
pub fn line_chart(title: &str, t: &[f64], series: &[(&str, &[f64], &str)]) -> String {
    let (w, h, pad) = (900.0, 360.0, 40.0);
    let finite = |v: &&f64| v.is_finite();
    let t0 = t.iter().filter(finite).copied().fold(f64::INFINITY, f64::min);
    let t1 = t.iter().filter(finite).copied().fold(f64::NEG_INFINITY, f64::max);
    let vals = series.iter().flat_map(|(_, v, _)| v.iter()).filter(finite).copied();
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
    let x = |v: f64| pad + (v - t0) / span(t0, t1) * (w - 2.0 * pad);
    let y = |v: f64| h - pad - (v - lo) / span(lo, hi) * (h - 2.0 * pad);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{pad}" y="24" font-family="sans-serif" font-size="14">{title}</text>"#).unwrap();
    for (k, (name, v, color)) in series.iter().enumerate() {
        let pts: Vec<String> =
            t.iter().zip(v.iter()).filter(|(a, b)| a.is_finite() && b.is_finite()).map(|(&a, &b)| format!("{:.2},{:.2}", x(a), y(b))).collect();
        writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#, pts.join(" ")).unwrap();
        let ly = 24.0 + 16.0 * k as f64;
        writeln!(s, r#"<text x="{}" y="{ly}" font-family="sans-serif" font-size="12" fill="{color}">{name}</text>"#, w - 160.0).unwrap();
    }
    s.push_str("</svg>\n");
    s
}
