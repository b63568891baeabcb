//! CSV emission. Floats are written in shortest round-trip form.

use std::io::{self, Write};

use crate::analysis::Metrics;
use crate::hybridsim::{SimResult, TraceRow};

fn numbered(prefix: &str, n: usize, out: &mut Vec<String>) {
    out.extend((1..=n).map(|i| format!("{prefix}{i}")));
}

pub fn trace_header(n_v: usize, n_z: usize, r: usize, s: usize) -> String {
    let mut cols: Vec<String> = ["t", "e", "y", "y0", "u"].iter().map(|s| s.to_string()).collect();
    numbered("v", n_v, &mut cols);
    numbered("z", n_z, &mut cols);
    numbered("x", r, &mut cols);
    numbered("eta", s, &mut cols);
    numbered("xihat", r, &mut cols);
    cols.join(",")
}

fn write_row<W: Write>(w: &mut W, row: &TraceRow) -> io::Result<()> {
    write!(w, "{},{},{},{},{}", row.t, row.e, row.y, row.y0, row.u)?;
    for x in row.v.iter().chain(&row.z).chain(&row.x).chain(&row.eta).chain(&row.xi_hat) {
        write!(w, ",{x}")?;
    }
    writeln!(w)
}

pub fn write_trace<W: Write>(w: &mut W, res: &SimResult) -> io::Result<()> {
    let fs = &res.final_state;
    let header = trace_header(fs.v.len(), fs.z.len(), fs.x.len(), fs.eta.len());
    writeln!(w, "{header}")?;
    for row in &res.trace {
        write_row(w, row)?;
    }
    Ok(())
}

pub fn write_trigger_log<W: Write>(w: &mut W, res: &SimResult) -> io::Result<()> {
    writeln!(w, "k,t_k,dwell")?;
    for rec in &res.trigger_log {
        writeln!(w, "{},{},{}", rec.k, rec.t_k, rec.dwell)?;
    }
    Ok(())
}

pub const SWEEP_HEADER: &str = "delta,sigma,trigger_count,tail_sup_error,min_dwell";

/// One sweep summary row. `min_dwell` is empty when no trigger occurred.
pub fn sweep_row(delta: f64, sigma: f64, m: &Metrics) -> String {
    let dwell = m.min_dwell.map(|d| d.to_string()).unwrap_or_default();
    format!("{delta},{sigma},{},{},{dwell}", m.trigger_count_total, m.tail_sup_error)
}
