//! CSV emission: comma-separated, `.` decimal, LF line endings, 17 significant digits.

use std::fmt::Write;

use dilind_core::measure::{ProbePoint, SampleRecord};
use dilind_core::orbit::CrossSection;
use dilind_core::spectral::expm::Flow;
use dilind_core::{Result, SquareMatrix};

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(prefix: &[&str], n: usize, suffix: &[&str]) -> String {
    let mut cols: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend(suffix.iter().map(|s| s.to_string()));
    cols.join(",") + "\n"
}

/// `t, x1..xn, F(e^{tA} v)`; `F` is `NaN` without a cross-section.
pub fn orbit(a: &SquareMatrix, v: &[f64], grid: &[f64], section: Option<&CrossSection>) -> Result<String> {
    let flow = Flow::new(a);
    let mut out = header(&["t"], a.dim(), &["F"]);
    for &t in grid {
        let x = flow.apply(t, v)?;
        let f = section.map_or(f64::NAN, |cs| cs.f_value(&x));
        let mut row: Vec<String> = vec![num(t)];
        row.extend(x.iter().map(|&c| num(c)));
        row.push(num(f));
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    Ok(out)
}

/// `side, index, x1..xn, value` for the norm-check samples.
pub fn samples(records: &[SampleRecord], n: usize) -> String {
    let mut out = header(&["side", "index"], n, &["value"]);
    for r in records {
        let mut row = vec![r.side.to_string(), r.index.to_string()];
        row.extend(r.point.iter().map(|&c| num(c)));
        row.push(num(r.value));
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    out
}

/// `index, x1..xn, window, tailRatio, massRatio, inLambda` for probed points.
pub fn probe_points(points: &[ProbePoint], n: usize) -> String {
    let mut out = header(&["index"], n, &["window", "tailRatio", "massRatio", "inLambda"]);
    for (i, p) in points.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(p.v.iter().map(|&c| num(c)));
        row.extend([num(p.window), num(p.tail_ratio), num(p.mass_ratio), p.in_lambda.to_string()]);
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    out
}
