//! CSV writers shared by the command-line front end.

use std::io::{self, Write};

use crate::bifurcation::{BetaStarSample, PhaseScan};
use crate::microsim::LlnRow;
use crate::model::{StateRow, Trajectory};
use crate::odeflow::Crossings;

/// C-style `%.{digits}g`, so outputs are stable across platforms.
pub fn fmt_g(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let p = digits.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if exp < -4 || exp >= p as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Default number formatting for CSV cells.
pub fn num(x: f64) -> String {
    fmt_g(x, 12)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), num)
}

pub fn write_trajectory<S: StateRow, W: Write>(w: &mut W, traj: &Trajectory<S>) -> io::Result<()> {
    writeln!(w, "t,{}", S::HEADER.join(","))?;
    for (t, s) in traj.iter() {
        let cells: Vec<String> = s.values().into_iter().map(num).collect();
        writeln!(w, "{},{}", num(t), cells.join(","))?;
    }
    Ok(())
}

/// One row per crossing; the period estimate is repeated on every row.
pub fn write_crossings<W: Write>(w: &mut W, crossings: &Crossings) -> io::Result<()> {
    let period = opt(crossings.period_estimate());
    writeln!(w, "t,y,period_estimate")?;
    for e in &crossings.events {
        writeln!(w, "{},{},{}", num(e.t), num(e.state.y), period)?;
    }
    Ok(())
}

pub fn write_lln<W: Write>(w: &mut W, rows: &[LlnRow]) -> io::Result<()> {
    writeln!(w, "n,mean_sup_distance,std_error,replicas")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.n,
            num(r.mean_sup_distance),
            num(r.std_error),
            r.replicas
        )?;
    }
    Ok(())
}

pub fn write_phase<W: Write>(w: &mut W, scan: &PhaseScan) -> io::Result<()> {
    writeln!(
        w,
        "h,beta,class,beta_c,beta_star,amp_stable,amp_unstable,period_stable"
    )?;
    for pt in &scan.points {
        let ph = &pt.phase;
        let stable = ph.stable_cycle();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            num(pt.h),
            num(pt.beta),
            ph.class.label(),
            num(ph.beta_c),
            opt(ph.beta_star),
            opt(stable.map(|c| c.amplitude)),
            opt(ph.unstable_cycle().map(|c| c.amplitude)),
            opt(stable.map(|c| c.period)),
        )?;
    }
    Ok(())
}

pub fn write_beta_star<W: Write>(w: &mut W, samples: &[BetaStarSample]) -> io::Result<()> {
    writeln!(w, "h,beta_star_lo,beta_star_hi")?;
    for s in samples {
        let (lo, hi) = s
            .bracket
            .as_ref()
            .map_or((None, None), |b| (Some(b.lo), Some(b.hi)));
        writeln!(w, "{},{},{}", num(s.h), opt(lo), opt(hi))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_format_matches_c() {
        assert_eq!(fmt_g(1.0, 12), "1");
        assert_eq!(fmt_g(0.1, 12), "0.1");
        assert_eq!(fmt_g(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(fmt_g(1e-5, 12), "1e-05");
        assert_eq!(fmt_g(-2.5e-7, 3), "-2.5e-07");
        assert_eq!(fmt_g(123456789012345.0, 12), "1.23456789012e+14");
        assert_eq!(fmt_g(0.0001, 12), "0.0001");
        assert_eq!(fmt_g(100.0, 12), "100");
        assert_eq!(fmt_g(f64::NAN, 12), "nan");
    }
}
