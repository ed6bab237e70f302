//! Command implementations behind the `micromaser` binary: run, sweep and
//! predict, plus the CSV and summary formats they write.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::{
    fit_decay_rate, multilevel_temperatures, thermalization_time, MultilevelTemperatures, ThermalizationPrediction,
};
use crate::config::{Overrides, RawConfig, SimulationConfig};
use crate::dynamics::{run_simulation, TimeSeries};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = ["step", "time", "n_mean", "T_field", "g2", "trace_dev", "tail_leak"];
pub const UNDEF: &str = "undef";

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation(_)
        | Error::Shape(_)
        | Error::Settings(_)
        | Error::Domain(_)
        | Error::DimensionLimit { .. }
        | Error::NotHermitian { .. }
        | Error::Fit(_)
        | Error::UndefinedCorrelation { .. } => 2,
        Error::Truncation { .. } => 3,
        Error::GainRegime(_) => 4,
        Error::Divergence(_) => 5,
        Error::Io(_) => 1,
    }
}

/// Stable short name for an error variant.
pub fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::Shape(_) => "shape",
        Error::DimensionLimit { .. } => "dimension_limit",
        Error::NotHermitian { .. } => "not_hermitian",
        Error::Domain(_) => "domain",
        Error::GainRegime(_) => "gain_regime",
        Error::Settings(_) => "settings",
        Error::Divergence(_) => "divergence",
        Error::Truncation { .. } => "truncation",
        Error::Fit(_) => "fit",
        Error::UndefinedCorrelation { .. } => "undefined_correlation",
        Error::Validation(_) => "validation",
        Error::Io(_) => "io",
    }
}

/// One-line JSON diagnostic for stderr.
pub fn error_json(err: &Error) -> String {
    let mut value = serde_json::json!({
        "error": error_kind(err),
        "exit_code": exit_code(err),
        "message": err.to_string(),
    });
    if let Error::Truncation { suggested_dim, .. } = err {
        value["suggested_dim"] = (*suggested_dim).into();
    }
    value.to_string()
}

/// Shortest round-trip digits, in exponent form outside [1e-4, 1e16).
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || (1e-4..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEF.to_string(), fmt_float)
}

/// Writes the time series with shortest round-trip float formatting.
pub fn write_csv<W: std::io::Write>(series: &TimeSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for k in 0..series.len() {
        w.write_record([
            k.to_string(),
            fmt_float(series.times[k]),
            fmt_float(series.n_mean[k]),
            fmt_float(series.t_field[k]),
            fmt_opt(series.g2[k]),
            fmt_float(series.trace_dev[k]),
            fmt_float(series.tail_leak[k]),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(series: &TimeSeries) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(series, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

/// Parses a CSV written by [`write_csv`]. Columns not stored in the file
/// (eigenvalue and Hermiticity diagnostics, final state) stay empty.
pub fn read_csv(text: &str) -> Result<TimeSeries> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let bad = |msg: String| Error::Validation(format!("csv: {msg}"));
    let header = r.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut series = TimeSeries::default();
    for (row, record) in r.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            record[i].parse().map_err(|_| bad(format!("row {row}, column {}: `{}`", CSV_HEADER[i], &record[i])))
        };
        if num(0)? as usize != row {
            return Err(bad(format!("row {row} has step {}", &record[0])));
        }
        series.times.push(num(1)?);
        series.n_mean.push(num(2)?);
        series.t_field.push(num(3)?);
        series.g2.push(if &record[4] == UNDEF { None } else { Some(num(4)?) });
        series.trace_dev.push(num(5)?);
        series.tail_leak.push(num(6)?);
    }
    Ok(series)
}

/// Closed-form outputs for a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictSummary {
    pub upward_rate: f64,
    pub downward_rate: f64,
    pub gamma: f64,
    pub t_th: f64,
    pub t_th_low_temperature: f64,
    pub n_bar_th: f64,
    pub t_field_steady: f64,
    pub t_multilevel_reservoir: f64,
    pub t_multilevel_effective: f64,
}

impl PredictSummary {
    pub fn new(config: &SimulationConfig) -> Result<Self> {
        let p = thermalization_time(&config.reservoir, &config.coupling)?;
        let temps = multilevel_temperatures(&config.reservoir)?;
        Ok(Self::from_parts(&p, &temps, config.field.omega))
    }

    fn from_parts(p: &ThermalizationPrediction, temps: &MultilevelTemperatures, omega: f64) -> Self {
        Self {
            upward_rate: p.rates.upward,
            downward_rate: p.rates.downward,
            gamma: p.gamma,
            t_th: p.t_th,
            t_th_low_temperature: p.low_temperature_approx,
            n_bar_th: p.n_bar_th,
            t_field_steady: p.steady_field_temperature(omega),
            t_multilevel_reservoir: temps.reservoir,
            t_multilevel_effective: temps.effective,
        }
    }
}

/// Formats with `digits` significant digits in plain decimal notation.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mut magnitude = x.abs().log10().floor() as i32;
    // Rounding can carry into a new leading digit (9.9999996 → 10.0000).
    let decimals = |m: i32| (digits as i32 - 1 - m).max(0) as usize;
    let rounded: f64 = format!("{:.*}", decimals(magnitude), x).parse().expect("formatted float");
    if rounded.abs() >= 10f64.powi(magnitude + 1) {
        magnitude += 1;
    }
    format!("{:.*}", decimals(magnitude), x)
}

pub fn cmd_predict(config: &SimulationConfig) -> Result<String> {
    let p = PredictSummary::new(config)?;
    let rows: [(&str, f64); 9] = [
        ("upward_rate", p.upward_rate),
        ("downward_rate", p.downward_rate),
        ("gamma", p.gamma),
        ("t_th", p.t_th),
        ("t_th_low_temperature", p.t_th_low_temperature),
        ("n_bar_th", p.n_bar_th),
        ("T_field_steady", p.t_field_steady),
        ("T_multilevel_reservoir", p.t_multilevel_reservoir),
        ("T_multilevel_effective", p.t_multilevel_effective),
    ];
    let mut out = String::new();
    for (key, value) in rows {
        writeln!(out, "{key:<24} {}", format_significant(value, 6)).expect("string write");
    }
    Ok(out)
}

/// Statistics printed after a run, all recomputable from the CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub collisions: usize,
    pub final_time: f64,
    pub n_mean_final: f64,
    pub t_field_steady: f64,
    pub gamma_fit: Option<f64>,
    pub t_th_fit: Option<f64>,
    pub fit_r_squared: Option<f64>,
    pub g2_final: Option<f64>,
    pub t_diagonal_ratio: Option<f64>,
    pub gamma_predicted: f64,
    pub t_th_predicted: f64,
    pub n_bar_th_predicted: f64,
    pub t_field_predicted: f64,
    pub t_multilevel_reservoir: f64,
    pub t_multilevel_effective: f64,
}

impl RunSummary {
    /// `t_diagonal_ratio` needs the final density matrix, which the CSV
    /// does not store; it is `None` when the series lacks it.
    pub fn from_series(series: &TimeSeries, config: &SimulationConfig) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::Validation("empty time series".into()));
        }
        let predicted = PredictSummary::new(config)?;
        let last = series.len() - 1;
        let fit = fit_decay_rate(series).ok();
        let t_diagonal_ratio = series
            .final_state
            .as_ref()
            .and_then(|rho| crate::analytics::diagonal_ratio_temperature(rho, config.field.omega));
        Ok(Self {
            collisions: last,
            final_time: series.times[last],
            n_mean_final: series.n_mean[last],
            t_field_steady: series.t_field[last],
            gamma_fit: fit.map(|f| f.gamma),
            t_th_fit: fit.map(|f| 1.0 / f.gamma),
            fit_r_squared: fit.map(|f| f.r_squared),
            g2_final: series.g2[last],
            t_diagonal_ratio,
            gamma_predicted: predicted.gamma,
            t_th_predicted: predicted.t_th,
            n_bar_th_predicted: predicted.n_bar_th,
            t_field_predicted: predicted.t_field_steady,
            t_multilevel_reservoir: predicted.t_multilevel_reservoir,
            t_multilevel_effective: predicted.t_multilevel_effective,
        })
    }

    pub fn line(&self) -> String {
        format!(
            "T_f={} Gamma_fit={} t_th_pred={} g2={} T_multilevel_reservoir={} T_multilevel_effective={} T_diag={}",
            fmt_float(self.t_field_steady),
            fmt_opt(self.gamma_fit),
            fmt_float(self.t_th_predicted),
            fmt_opt(self.g2_final),
            fmt_float(self.t_multilevel_reservoir),
            fmt_float(self.t_multilevel_effective),
            fmt_opt(self.t_diagonal_ratio),
        )
    }

    pub fn table(&self) -> String {
        let rows: Vec<(&str, String)> = vec![
            ("collisions", self.collisions.to_string()),
            ("final_time", fmt_float(self.final_time)),
            ("n_mean_final", fmt_float(self.n_mean_final)),
            ("T_field_steady", fmt_float(self.t_field_steady)),
            ("Gamma_fit", fmt_opt(self.gamma_fit)),
            ("t_th_fit", fmt_opt(self.t_th_fit)),
            ("fit_r_squared", fmt_opt(self.fit_r_squared)),
            ("g2_final", fmt_opt(self.g2_final)),
            ("T_diagonal_ratio", fmt_opt(self.t_diagonal_ratio)),
            ("Gamma_predicted", fmt_float(self.gamma_predicted)),
            ("t_th_predicted", fmt_float(self.t_th_predicted)),
            ("n_bar_th_predicted", fmt_float(self.n_bar_th_predicted)),
            ("T_field_predicted", fmt_float(self.t_field_predicted)),
            ("T_multilevel_reservoir", fmt_float(self.t_multilevel_reservoir)),
            ("T_multilevel_effective", fmt_float(self.t_multilevel_effective)),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary serializes");
    s.push('\n');
    s
}

/// Runs one simulation and writes `timeseries.csv`, `summary.txt` and
/// `summary.json` into `out_dir`.
pub fn cmd_run(config: &SimulationConfig, out_dir: &Path) -> Result<RunSummary> {
    let series = run_simulation(config)?;
    let summary = RunSummary::from_series(&series, config)?;
    fs::create_dir_all(out_dir)?;
    write_file(&out_dir.join("timeseries.csv"), &csv_string(&series)?)?;
    write_file(&out_dir.join("summary.txt"), &summary.table())?;
    write_file(&out_dir.join("summary.json"), &to_json(&summary))?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    N,
    TA,
    G,
    Tau,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" | "n" => Ok(Self::N),
            "T_a" | "t_a" | "Ta" => Ok(Self::TA),
            "g" => Ok(Self::G),
            "tau" => Ok(Self::Tau),
            _ => Err(Error::Validation(format!("unknown sweep axis `{s}`, expected N, T_a, g or tau"))),
        }
    }
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::N => "N",
            Self::TA => "T_a",
            Self::G => "g",
            Self::Tau => "tau",
        }
    }

    fn apply(self, raw: &RawConfig, value: f64) -> Result<RawConfig> {
        let mut raw = raw.clone();
        match self {
            Self::N => {
                if value.fract() != 0.0 {
                    return Err(Error::Validation(format!("N must be an integer, got {value}")));
                }
                raw.reservoir.n = value as i64;
            }
            Self::TA => raw.reservoir.t_a = value,
            Self::G => raw.coupling.g = value,
            Self::Tau => raw.coupling.tau = value,
        }
        Ok(raw)
    }
}

/// One row of the sweep table; `error` is set when the point failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub t_th_predicted: Option<f64>,
    pub gamma_fit: Option<f64>,
    pub t_th_fit: Option<f64>,
    pub t_field_steady: Option<f64>,
    pub g2_final: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub axis: &'static str,
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    pub fn table(&self) -> String {
        let header = [self.axis, "t_th_predicted", "Gamma_fit", "1/Gamma_fit", "T_field_steady", "g2_final", "error"];
        let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for r in &self.rows {
            cells.push(vec![
                fmt_float(r.value),
                fmt_opt(r.t_th_predicted),
                fmt_opt(r.gamma_fit),
                fmt_opt(r.t_th_fit),
                fmt_opt(r.t_field_steady),
                fmt_opt(r.g2_final),
                r.error.clone().unwrap_or_else(|| "-".into()),
            ]);
        }
        let widths: Vec<usize> =
            (0..header.len()).map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in cells {
            let line: Vec<String> = row.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

fn sweep_point(
    raw: &RawConfig,
    overrides: Overrides,
    axis: SweepAxis,
    value: f64,
    index: usize,
    out_dir: &Path,
) -> SweepRow {
    let mut row = SweepRow {
        value,
        t_th_predicted: None,
        gamma_fit: None,
        t_th_fit: None,
        t_field_steady: None,
        g2_final: None,
        error: None,
    };
    let result = (|| -> Result<RunSummary> {
        let config = axis.apply(raw, value)?.build(overrides)?;
        row.t_th_predicted = Some(thermalization_time(&config.reservoir, &config.coupling)?.t_th);
        let series = run_simulation(&config)?;
        write_file(&out_dir.join(format!("point_{index:03}.csv")), &csv_string(&series)?)?;
        RunSummary::from_series(&series, &config)
    })();
    match result {
        Ok(s) => {
            row.gamma_fit = s.gamma_fit;
            row.t_th_fit = s.t_th_fit;
            row.t_field_steady = Some(s.t_field_steady);
            row.g2_final = s.g2_final;
        }
        Err(e) => row.error = Some(format!("{}: {e}", error_kind(&e))),
    }
    row
}

/// Runs one simulation per value in parallel. Point failures land in the
/// table; rows keep the input order.
pub fn cmd_sweep(
    config_text: &str,
    overrides: Overrides,
    axis: SweepAxis,
    values: &[f64],
    out_dir: &Path,
) -> Result<SweepSummary> {
    if values.is_empty() {
        return Err(Error::Validation("sweep needs at least one value".into()));
    }
    let raw: RawConfig = serde_json::from_str(config_text).map_err(|e| Error::Validation(e.to_string()))?;
    fs::create_dir_all(out_dir)?;
    let rows: Vec<SweepRow> = values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| sweep_point(&raw, overrides, axis, v, i, out_dir))
        .collect();
    let summary = SweepSummary { axis: axis.name(), rows };
    write_file(&out_dir.join("summary.txt"), &summary.table())?;
    write_file(&out_dir.join("summary.json"), &to_json(&summary))?;
    Ok(summary)
}

/// Comma-separated numbers, e.g. `1,2,3`.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::Validation(format!("bad sweep value `{s}`"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const PREDICT: &str = r#"{
        "reservoir": {"kind": "KIND", "N": 2, "T_a": 0.1},
        "field": {"T_f0": 1},
        "coupling": {"g": 0.1, "tau": 0.5, "gamma": 0, "kappa": 0}
    }"#;

    fn predict_t_th(kind: &str) -> String {
        let c = parse_config(&PREDICT.replace("KIND", kind)).unwrap();
        let out = cmd_predict(&c).unwrap();
        let line = out.lines().find(|l| l.starts_with("t_th ")).unwrap();
        line.split_whitespace().nth(1).unwrap().to_string()
    }

    #[test]
    fn predict_six_significant_digits() {
        assert_eq!(predict_t_th("multi-atom"), "100.009");
        assert_eq!(predict_t_th("multi-level"), "400.054");
    }

    #[test]
    fn predict_rejects_hot_reservoir() {
        let text = PREDICT.replace("KIND", "multi-atom").replace("\"T_a\": 0.1", "\"T_a\": 1e308");
        let err = parse_config(&text).and_then(|c| cmd_predict(&c)).unwrap_err();
        assert_eq!(exit_code(&err), 4, "{err}");
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(100.00908, 6), "100.009");
        assert_eq!(format_significant(600.10897, 6), "600.109");
        assert_eq!(format_significant(1.2245933e-3, 6), "0.00122459");
        assert_eq!(format_significant(9.9999996, 6), "10.0000");
        assert_eq!(format_significant(-2.5, 3), "-2.50");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Validation("x".into())), 2);
        assert_eq!(exit_code(&Error::Truncation { message: "x".into(), suggested_dim: 9 }), 3);
        assert_eq!(exit_code(&Error::GainRegime("x".into())), 4);
        assert_eq!(exit_code(&Error::Divergence("x".into())), 5);
        let json: serde_json::Value =
            serde_json::from_str(&error_json(&Error::Truncation { message: "m".into(), suggested_dim: 9 })).unwrap();
        assert_eq!(json["error"], "truncation");
        assert_eq!(json["suggested_dim"], 9);
    }

    #[test]
    fn csv_round_trip_with_undef() {
        let series = TimeSeries {
            times: vec![0.0, 0.5],
            n_mean: vec![0.1 + 0.2, 1e-12],
            t_field: vec![1.0 / 3.0, 0.0],
            g2: vec![Some(2.0000000000000004), None],
            trace_dev: vec![0.0, 2.220446049250313e-16],
            tail_leak: vec![1e-300, 0.0],
            ..Default::default()
        };
        let text = csv_string(&series).unwrap();
        assert!(text.starts_with("step,time,n_mean,T_field,g2,trace_dev,tail_leak\n"));
        assert!(text.contains(",undef,"));
        assert!(text.contains(",1e-300\n") && text.contains(",2.220446049250313e-16,"), "{text}");
        let back = read_csv(&text).unwrap();
        assert_eq!(back, series);
        assert_eq!(csv_string(&back).unwrap(), text);
    }

    #[test]
    fn read_csv_rejects_bad_input() {
        assert!(read_csv("a,b\n1,2\n").is_err());
        assert!(read_csv("step,time,n_mean,T_field,g2,trace_dev,tail_leak\n0,x,0,0,0,0,0\n").is_err());
    }

    #[test]
    fn sweep_axis_parsing() {
        assert_eq!("T_a".parse::<SweepAxis>().unwrap(), SweepAxis::TA);
        assert!("omega".parse::<SweepAxis>().is_err());
        assert_eq!(parse_values("1, 2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_values("1,x").is_err());
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_sweep(&PREDICT.replace("KIND", "multi-atom"), Overrides::default(), SweepAxis::N, &[], dir.path())
            .unwrap_err();
        assert_eq!(exit_code(&err), 2);
    }
}
