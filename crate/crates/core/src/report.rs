//! Deterministic text formats for experiment outputs. Floats carry 17
//! significant digits; non-finite values are written as `inf`, `-inf`, `nan`.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::bishop::DecayTable;
use crate::extremal::{HullSlice, StabilityReport};
use crate::fiber::{FiberSet, FinitenessReport};

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

/// JSON number, or the string form for non-finite values.
pub fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(fmt_f64(x))
    }
}

pub fn json_complex(z: Complex64) -> Value {
    json!([json_f64(z.re), json_f64(z.im)])
}

pub fn decay_csv(table: &DecayTable) -> String {
    let mut out = String::from("d,e,lambda,sup_norm_K,r,r0,fitted_C,passes\n");
    for r in &table.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.d,
            r.e,
            r.lambda,
            fmt_f64(r.sup_norm_k),
            fmt_f64(r.predicted_rate),
            fmt_f64(r.r0),
            fmt_f64(r.fitted_c),
            r.passes
        )
        .unwrap();
    }
    out
}

/// Row-major over the slice grid; `x` is the free coordinate.
pub fn hull_slice_csv(slice: &HullSlice) -> String {
    let mut out = String::from("x_re,x_im,value,member\n");
    for ((x, v), m) in slice.free_values().zip(&slice.values).zip(&slice.members) {
        writeln!(out, "{},{},{},{}", fmt_f64(x.re), fmt_f64(x.im), fmt_f64(*v), m).unwrap();
    }
    out
}

pub fn fiber_csv(fiber: &FiberSet) -> String {
    let mut out = String::from("w_re,w_im,residual\n");
    for p in &fiber.points {
        writeln!(out, "{},{},{}", fmt_f64(p.w.re), fmt_f64(p.w.im), fmt_f64(p.residual)).unwrap();
    }
    out
}

pub fn finiteness_json(report: &FinitenessReport) -> Value {
    Value::Array(
        report
            .samples
            .iter()
            .map(|s| {
                json!({
                    "z": json_complex(s.z),
                    "fiber": s.fiber.iter()
                        .map(|p| json!([json_f64(p.w.re), json_f64(p.w.im), json_f64(p.residual)]))
                        .collect::<Vec<_>>(),
                    "b_star_roots": s.b_star_roots.iter().map(|r| json_complex(*r)).collect::<Vec<_>>(),
                    "cardinality": s.cardinality,
                })
            })
            .collect(),
    )
}

pub fn finiteness_summary_csv(report: &FinitenessReport) -> String {
    let mut out = String::from("n_z,e,M,r0,fraction_ok,exceptional_fraction,bound_fraction,vacuous,max_cardinality\n");
    let max_card = report.samples.iter().map(|s| s.cardinality).max().unwrap_or(0);
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{}",
        report.samples.len(),
        report.e,
        fmt_f64(report.m),
        fmt_f64(report.r0),
        fmt_f64(report.fraction_ok),
        fmt_f64(report.exceptional_fraction),
        fmt_f64(report.bound_fraction),
        report.vacuous,
        max_card
    )
    .unwrap();
    out
}

pub fn stability_csv(report: &StabilityReport) -> String {
    let mut out = String::from("z_re,z_im,w_re,w_im,radius_index,best_constant\n");
    for ((x, c), ri) in report
        .sample_points
        .iter()
        .zip(&report.best_constants)
        .zip(&report.radius_index)
    {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(x.0.re),
            fmt_f64(x.0.im),
            fmt_f64(x.1.re),
            fmt_f64(x.1.im),
            ri,
            fmt_f64(*c)
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let digits = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(digits.len(), 17);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        assert_eq!(json_f64(f64::INFINITY), json!("inf"));
    }
}
