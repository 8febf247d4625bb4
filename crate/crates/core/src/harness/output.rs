use std::io::Write;

use crate::error::Result;
use crate::metrics::GainCurve;

use super::ResultRow;

pub const CSV_HEADER: &str = "n,k,m,f,h,l,c,phi,mechanism,trials,precision_mean,precision_stderr,\
posborda_mean,posborda_stderr,negborda_mean,negborda_stderr";

pub const GAIN_HEADER: &str = "agent_index,delta";

/// Infeasible rows carry `trials = 0` and `NaN` metrics.
pub fn write_csv<W: Write>(w: &mut W, rows: &[ResultRow]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        let p = &r.params;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{:.6},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            p.n,
            p.k,
            p.m,
            p.f,
            p.h,
            p.l,
            p.c,
            p.phi.value(),
            r.mechanism,
            r.trials,
            r.precision.mean,
            r.precision.stderr,
            r.positive_borda.mean,
            r.positive_borda.stderr,
            r.negative_borda.mean,
            r.negative_borda.stderr,
        )?;
    }
    Ok(())
}

pub fn write_gain_csv<W: Write>(w: &mut W, curve: &GainCurve) -> Result<()> {
    writeln!(w, "{GAIN_HEADER}")?;
    for (i, d) in curve.delta.iter().enumerate() {
        // avoid printing -0.000000
        let d = if d.abs() < 5e-7 { 0.0 } else { *d };
        writeln!(w, "{i},{d:.6}")?;
    }
    Ok(())
}
