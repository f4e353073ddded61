//! Text format for point sets.
//!
//! ```text
//! pointset d=2 n=3
//! # window 0,0:8,8
//! 0.5 0.5
//! 1 2 3
//! 4.25 7
//! ```
//!
//! Each entry line holds `d` coordinates and an optional integer multiplicity
//! (default 1). Lines starting with `#` are comments; a `# window lo:hi`
//! comment carries the window, otherwise the bounding box of the entries is
//! used.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{PointSet, Window};

/// Parse `x0,y0:x1,y1` (any dimension) into a window.
pub fn parse_window(s: &str) -> Result<Window> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| Error::Input(format!("window `{s}` must look like lo0,lo1:hi0,hi1")))?;
    let parse = |part: &str| -> Result<Vec<f64>> {
        part.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Input(format!("bad window coordinate `{t}`")))
            })
            .collect()
    };
    Window::new(parse(lo)?, parse(hi)?)
}

pub fn format_window(w: &Window) -> String {
    let join = |v: &[f64]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
    format!("{}:{}", join(&w.lo), join(&w.hi))
}

/// Parse a comma-separated point such as `1.5,2`.
pub fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Input(format!("bad coordinate `{t}` in point `{s}`")))
        })
        .collect()
}

pub fn format_point(p: &[f64]) -> String {
    p.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
}

fn header_field(token: &str, key: &str, line: usize) -> Result<usize> {
    token
        .strip_prefix(key)
        .and_then(|v| v.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected `{key}=<integer>`, found `{token}`"),
        })
}

pub fn read_point_set(text: &str) -> Result<PointSet> {
    let mut header: Option<(usize, usize)> = None;
    let mut window: Option<Window> = None;
    let mut coords = Vec::new();
    let mut mult = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(spec) = comment.trim().strip_prefix("window") {
                window = Some(parse_window(spec.trim()).map_err(|e| Error::Parse {
                    line: line_no,
                    msg: e.to_string(),
                })?);
            }
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let Some((dim, _)) = header else {
            if tokens.len() != 3 || tokens[0] != "pointset" {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "expected header `pointset d=<dim> n=<entries>`".into(),
                });
            }
            let d = header_field(tokens[1], "d", line_no)?;
            let n = header_field(tokens[2], "n", line_no)?;
            if d == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "dimension must be >= 1".into(),
                });
            }
            header = Some((d, n));
            continue;
        };
        if tokens.len() != dim && tokens.len() != dim + 1 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {dim} coordinates and an optional multiplicity, found {} fields", tokens.len()),
            });
        }
        for (j, t) in tokens[..dim].iter().enumerate() {
            let v: f64 = t.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("coordinate {j}: cannot parse `{t}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("coordinate {j} is not finite"),
                });
            }
            coords.push(v);
        }
        let m = match tokens.get(dim) {
            Some(t) => t.parse::<u32>().ok().filter(|&m| m > 0).ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("multiplicity must be a positive integer, found `{t}`"),
            })?,
            None => 1,
        };
        mult.push(m);
    }

    let (dim, n) = header.ok_or(Error::Parse {
        line: 1,
        msg: "missing `pointset` header".into(),
    })?;
    if mult.len() != n {
        return Err(Error::Parse {
            line: 1,
            msg: format!("header declares n={n} entries but {} were found", mult.len()),
        });
    }
    let window = match window {
        Some(w) if w.dim() == dim => w,
        Some(w) => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("window has dimension {} but d={dim}", w.dim()),
            })
        }
        None => Window::bounding(dim, coords.chunks_exact(dim))
            .unwrap_or(Window::new(vec![0.0; dim], vec![0.0; dim])?),
    };
    PointSet::from_flat(window, coords, mult)
}

pub fn write_point_set(set: &PointSet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "pointset d={} n={}", set.dim(), set.len());
    let _ = writeln!(out, "# window {}", format_window(set.window()));
    for (p, m) in set.iter() {
        let coords = p.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
        if m == 1 {
            let _ = writeln!(out, "{coords}");
        } else {
            let _ = writeln!(out, "{coords} {m}");
        }
    }
    out
}
