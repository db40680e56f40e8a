//! CSV output: comma separated, LF line ends, shortest round-trip decimals.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::config::{Evaluator, SweepSpec};
use crate::sweep::SweepRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Columns {
    pub closed: bool,
    pub quadrature: bool,
    pub mc: bool,
}

impl Columns {
    pub fn for_spec(spec: &SweepSpec) -> Self {
        Columns { closed: spec.wants(Evaluator::Closed), quadrature: spec.wants(Evaluator::Quadrature), mc: spec.wants_mc() }
    }

    pub fn header(&self) -> Vec<&'static str> {
        let mut h = vec!["snr_db"];
        if self.closed {
            h.push("aser_closed");
        }
        if self.quadrature {
            h.push("aser_quadrature");
        }
        if self.mc {
            h.extend(["aser_mc", "mc_std_err", "trials"]);
        }
        h
    }
}

/// Rust's `Debug` for `f64` prints the shortest string that parses back to
/// the same value, with no locale dependence.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn render_csv(cols: Columns, rows: &[SweepRow]) -> String {
    let mut out = cols.header().join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&fmt_f64(r.snr_db));
        let mut field = |v: &str| {
            out.push(',');
            out.push_str(v);
        };
        if cols.closed {
            field(&fmt_f64(r.aser_closed.unwrap_or(f64::NAN)));
        }
        if cols.quadrature {
            field(&fmt_f64(r.aser_quadrature.unwrap_or(f64::NAN)));
        }
        if cols.mc {
            let m = r.mc.as_ref();
            field(&fmt_f64(m.map_or(f64::NAN, |m| m.aser)));
            field(&fmt_f64(m.map_or(f64::NAN, |m| m.std_err)));
            field(&m.map_or(0, |m| m.trials).to_string());
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(cols: Columns, rows: &[SweepRow], path: &Path) -> io::Result<()> {
    std::fs::write(path, render_csv(cols, rows))
        .map_err(|e| io::Error::new(e.kind(), format!("cannot write {}: {e}", path.display())))
}

/// Parses every numeric field and prints it back; the identity on output of
/// [`render_csv`].
pub fn reserialize(text: &str) -> Result<String, String> {
    let mut out = String::with_capacity(text.len());
    let mut lines = text.split_terminator('\n');
    let header = lines.next().ok_or("empty CSV")?;
    out.push_str(header);
    out.push('\n');
    let trials_col = header.split(',').position(|h| h == "trials");
    for (n, line) in lines.enumerate() {
        for (i, f) in line.split(',').enumerate() {
            if i > 0 {
                out.push(',');
            }
            if Some(i) == trials_col {
                let t: u64 = f.parse().map_err(|e| format!("row {}: {e}", n + 1))?;
                let _ = write!(out, "{t}");
            } else {
                let x: f64 = f.parse().map_err(|e| format!("row {}: {e}", n + 1))?;
                out.push_str(&fmt_f64(x));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use relay_aser::montecarlo::SimEstimate;

    fn row(snr_db: f64) -> SweepRow {
        SweepRow {
            snr_db,
            aser_closed: Some(1e-7),
            aser_quadrature: None,
            mc: Some(SimEstimate { aser: 0.1 + 0.2, std_err: 3.5e-300, trials: 1_000_000, seed: 7 }),
        }
    }

    #[test]
    fn one_row_two_lines() {
        let cols = Columns { closed: true, quadrature: false, mc: true };
        let text = render_csv(cols, &[row(0.0)]);
        assert_eq!(text.lines().count(), 2);
        assert!(text.ends_with('\n') && !text.contains('\r'));
        assert_eq!(text.lines().next().unwrap(), "snr_db,aser_closed,aser_mc,mc_std_err,trials");
    }

    #[test]
    fn values_round_trip() {
        for x in [1e-7, 0.1 + 0.2, 3.5e-300, 1.0, 0.0, f64::MIN_POSITIVE, 2.2250738585072014e-308] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn reserialize_is_identity() {
        let cols = Columns { closed: true, quadrature: true, mc: true };
        let mut r = row(2.5);
        r.aser_quadrature = Some(f64::NAN);
        let text = render_csv(cols, &[row(0.0), r]);
        assert_eq!(reserialize(&text).unwrap(), text);
    }

    #[test]
    fn column_order_is_fixed() {
        let all = Columns { closed: true, quadrature: true, mc: true };
        assert_eq!(all.header(), ["snr_db", "aser_closed", "aser_quadrature", "aser_mc", "mc_std_err", "trials"]);
        let q = Columns { closed: false, quadrature: true, mc: false };
        assert_eq!(q.header(), ["snr_db", "aser_quadrature"]);
    }
}
