//! Minimal line charts rendered straight to SVG text.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const TICKS: usize = 5;
/// Ratio of largest to smallest value beyond which the y axis goes logarithmic.
const LOG_SPAN: f64 = 1e3;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (lo, hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
        if lo > hi {
            return Self {
                lo: 0.0,
                hi: 1.0,
                log: false,
            };
        }
        if lo > 0.0 && hi / lo > LOG_SPAN {
            return Self {
                lo: lo.log10().floor(),
                hi: hi.log10().ceil(),
                log: true,
            };
        }
        if lo == hi {
            let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
            return Self {
                lo: lo - pad,
                hi: hi + pad,
                log: false,
            };
        }
        Self { lo, hi, log: false }
    }

    /// Position in `[0, 1]`, or `None` where the value cannot be drawn.
    fn unit(&self, v: f64) -> Option<f64> {
        if !v.is_finite() {
            return None;
        }
        let v = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.log10()
        } else {
            v
        };
        Some((v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (lo, hi) = (self.lo as i32, self.hi as i32);
            let stride = ((hi - lo) as usize).div_ceil(TICKS).max(1);
            (lo..=hi)
                .step_by(stride)
                .map(|e| ((e - lo) as f64 / (hi - lo) as f64, format!("1e{e}")))
                .collect()
        } else {
            (0..=TICKS)
                .map(|k| {
                    let f = k as f64 / TICKS as f64;
                    (f, label(self.lo + f * (self.hi - self.lo)))
                })
                .collect()
        }
    }
}

fn label(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if (1e-2..1e4).contains(&a) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Draws each series against `x`. Non-finite points, and non-positive ones
/// on a log axis, break the line.
pub fn line_chart(x_name: &str, x: &[f64], series: &[(String, Vec<f64>)]) -> String {
    let xa = Axis::fit(x.iter().copied());
    let ya = Axis::fit(series.iter().flat_map(|(_, ys)| ys.iter().copied()));
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |u: f64| LEFT + u * pw;
    let py = |u: f64| TOP + (1.0 - u) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (u, text) in xa.ticks() {
        let x0 = px(u);
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.2}" y1="{:.2}" x2="{x0:.2}" y2="{:.2}" stroke="black"/><text x="{x0:.2}" y="{:.2}" text-anchor="middle">{text}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0
        );
    }
    for (u, text) in ya.ticks() {
        let y0 = py(u);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y0:.2}" x2="{LEFT}" y2="{y0:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{text}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y0 + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_name)
    );
    if ya.log {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">log scale</text>"#,
            WIDTH - 8.0,
            HEIGHT - 12.0
        );
    }

    for (k, (name, ys)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut runs: Vec<Vec<String>> = vec![Vec::new()];
        for (&xv, &yv) in x.iter().zip(ys) {
            match (xa.unit(xv), ya.unit(yv)) {
                (Some(u), Some(v)) => {
                    runs.last_mut()
                        .expect("nonempty")
                        .push(format!("{:.2},{:.2}", px(u), py(v)))
                }
                _ => {
                    if !runs.last().expect("nonempty").is_empty() {
                        runs.push(Vec::new());
                    }
                }
            }
        }
        for run in runs.iter().filter(|r| !r.is_empty()) {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                run.join(" ")
            );
        }
        let ly = TOP + 14.0 + 16.0 * k as f64;
        let lx = LEFT + pw + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0,
            lx + 24.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_choice() {
        assert!(!Axis::fit([1.0, 10.0, 100.0].into_iter()).log);
        assert!(Axis::fit([1.0, 1e5].into_iter()).log);
        assert!(!Axis::fit([0.0, 1e5].into_iter()).log);
        assert_eq!(
            Axis::fit(std::iter::empty()),
            Axis {
                lo: 0.0,
                hi: 1.0,
                log: false
            }
        );
        let flat = Axis::fit([2.0, 2.0].into_iter());
        assert_eq!((flat.lo, flat.hi), (1.0, 3.0));
    }

    #[test]
    fn renders_one_polyline_per_series() {
        let x = [0.0, 1.0, 2.0];
        let svg = line_chart(
            "t",
            &x,
            &[
                ("a".into(), vec![1.0, 2.0, 3.0]),
                ("b<c".into(), vec![3.0, 2.0, 1.0]),
            ],
        );
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("b&lt;c"));
        assert_eq!(
            svg,
            line_chart(
                "t",
                &x,
                &[
                    ("a".into(), vec![1.0, 2.0, 3.0]),
                    ("b<c".into(), vec![3.0, 2.0, 1.0])
                ]
            )
        );
    }

    #[test]
    fn gaps_split_lines_and_empty_input_draws_axes() {
        let svg = line_chart(
            "t",
            &[0.0, 1.0, 2.0, 3.0],
            &[("a".into(), vec![f64::NAN, 1.0, 2.0, 3.0])],
        );
        assert_eq!(svg.matches("<polyline").count(), 1);
        let svg = line_chart(
            "t",
            &[0.0, 1.0, 2.0, 3.0],
            &[("a".into(), vec![1.0, 2.0, f64::NAN, 3.0])],
        );
        assert_eq!(svg.matches("<polyline").count(), 2);
        let empty = line_chart("t", &[], &[("a".into(), vec![])]);
        assert_eq!(empty.matches("<polyline").count(), 0);
        assert!(empty.contains("<rect"));
    }
}
