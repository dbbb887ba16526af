//! CSV output with a `#` provenance header, and the smile reader used by
//! `extract-xi`.

use std::fmt::Write as _;
use std::path::Path;

use crate::lab::benchmark::BenchmarkRecord;
use crate::lab::calibration::CalibrationResult;
use crate::lab::smile::SmileSurface;
use crate::{Error, Result};

pub const SMILE_COLUMNS: [&str; 5] = ["maturity", "delta_put", "log_strike", "implied_vol", "std_err"];
pub const BENCHMARK_COLUMNS: [&str; 10] = [
    "estimator",
    "rho",
    "label",
    "log_strike",
    "target_vol",
    "bias",
    "std",
    "tau_ms",
    "phi2",
    "psi2",
];
pub const CALIBRATION_COLUMNS: [&str; 5] = ["run", "rho_hat", "eta_hat", "rmse", "converged"];
pub const VOLTERRA_COLUMNS: [&str; 4] = ["time", "sample_mean", "sample_var", "model_var"];
pub const XI_COLUMNS: [&str; 3] = ["maturity", "integrated_variance", "xi0_piecewise"];

/// `x` with 10 significant digits, trailing zeros dropped; plain notation
/// for exponents in `[-5, 10)`, scientific otherwise.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..10).contains(&exp) {
        trim_zeros(format!("{:.*}", (9 - exp) as usize, x))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Header, column row and records in one string.
pub fn render_csv(provenance: &[String], columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    for line in provenance {
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn emit_csv(path: &Path, provenance: &[String], columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    std::fs::write(path, render_csv(provenance, columns, rows)).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn smile_rows(surface: &SmileSurface) -> Vec<Vec<String>> {
    surface
        .points()
        .map(|(t, p)| {
            vec![
                format_float(t),
                format_float(p.delta_put),
                format_float(p.k),
                format_float(p.sigma.unwrap_or(f64::NAN)),
                format_float(p.std_err),
            ]
        })
        .collect()
}

pub fn benchmark_rows(records: &[BenchmarkRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .map(|r| {
            vec![
                r.estimator.to_string(),
                format_float(r.rho),
                r.label.clone(),
                format_float(r.k),
                format_float(r.target_vol),
                format_float(r.bias),
                format_float(r.std),
                format_float(r.tau_ms),
                format_float(r.phi2),
                format_float(r.psi2),
            ]
        })
        .collect()
}

pub fn calibration_rows(results: &[CalibrationResult]) -> Vec<Vec<String>> {
    results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                i.to_string(),
                format_float(r.rho_hat),
                format_float(r.eta_hat),
                format_float(r.rmse),
                r.converged.to_string(),
            ]
        })
        .collect()
}

/// A smile row read back from CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmileRow {
    pub maturity: f64,
    pub delta_put: f64,
    pub k: f64,
    pub sigma: f64,
}

/// Parses smile CSV text as written by [`smile_rows`]; `#` lines are skipped.
pub fn parse_smile_csv(text: &str) -> Result<Vec<SmileRow>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::config("input", "no header row"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::config("input", format!("missing column `{name}`")))
    };
    let (im, id, ik, iv) = (
        find("maturity")?,
        find("delta_put")?,
        find("log_strike")?,
        find("implied_vol")?,
    );
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> Result<f64> {
            fields
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::config("input", format!("row {}: cannot parse column {}", n + 1, cols[i])))
        };
        rows.push(SmileRow {
            maturity: get(im)?,
            delta_put: get(id)?,
            k: get(ik)?,
            sigma: get(iv)?,
        });
    }
    Ok(rows)
}

pub fn read_smile_csv(path: &Path) -> Result<Vec<SmileRow>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_smile_csv(&text)
}

/// Renders `(key, values)` as a `# key=[...]` line.
pub fn list_line(key: &str, values: &[f64]) -> String {
    let mut s = format!("# {key}=[");
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{}", format_float(*v));
    }
    s.push(']');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_significant_digits() {
        assert_eq!(format_float(0.2061), "0.2061");
        assert_eq!(format_float(1.0 / 3.0), "0.3333333333");
        assert_eq!(format_float(-2.0 / 3.0 * 1e-3), "-0.0006666666667");
        assert_eq!(format_float(123456.789012345), "123456.789");
        assert_eq!(format_float(1.5e-7), "1.5e-7");
        assert_eq!(format_float(6.02214076e23), "6.02214076e23");
        assert_eq!(format_float(9.99999999999), "10");
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(-0.0), "0");
        assert_eq!(format_float(f64::NAN), "NaN");
        assert_eq!(format_float(312.0), "312");
    }

    #[test]
    fn ten_digits_round_trip_to_relative_precision() {
        for &x in &[0.1, 0.2961, -0.1787, 1234.5678, 1e-9 / 7.0, 3.0e12 / 7.0] {
            let back: f64 = format_float(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 5e-10, "{x}");
        }
    }

    #[test]
    fn zero_records_give_a_header_only_file() {
        let s = render_csv(&["# seed=1".into()], &CALIBRATION_COLUMNS, &[]);
        assert_eq!(s, "# seed=1\nrun,rho_hat,eta_hat,rmse,converged\n");
    }

    #[test]
    fn smile_csv_round_trip() {
        let text = "# x=1\nmaturity,delta_put,log_strike,implied_vol,std_err\n0.25,0.1,-0.15,0.24,0.001\n0.25,0.5,0,0.21,NaN\n";
        let rows = parse_smile_csv(text).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].k, -0.15);
        assert!(parse_smile_csv("maturity,delta_put\n").is_err());
        assert!(parse_smile_csv("maturity,delta_put,log_strike,implied_vol\n0.25,x,0,0.2\n").is_err());
    }

    #[test]
    fn list_lines() {
        assert_eq!(list_line("target_vols", &[0.2, 0.25]), "# target_vols=[0.2,0.25]");
    }
}
