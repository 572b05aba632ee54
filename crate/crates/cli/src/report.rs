//! Named reports and their JSON/CSV serializations.

use std::io::Write;
use std::path::Path;

use hss_core::bounds::{BoundReport, CoverageReport};
use hss_core::complexity::EstimateReport;
use hss_core::mechanisms::MechanismOutput;
use hss_core::stability::{Directionality, StabilityReport};
use serde::{Deserialize, Serialize};

use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// A scalar with its provenance: `exact` is false for Monte Carlo and
/// sampled quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantity {
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    pub exact: bool,
}

impl Quantity {
    pub fn exact(name: impl Into<String>, value: f64) -> Self {
        Quantity { name: name.into(), value, std_error: None, exact: true }
    }

    pub fn estimated(name: impl Into<String>, value: f64, std_error: f64) -> Self {
        Quantity { name: name.into(), value, std_error: Some(std_error), exact: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "body", rename_all = "kebab-case")]
pub enum ReportBody {
    Estimate(EstimateReport),
    Stability(StabilityReport),
    Bound(BoundReport),
    Coverage(CoverageReport),
    Mechanism(MechanismOutput),
    Quantities(Vec<Quantity>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedReport {
    pub name: String,
    pub report: ReportBody,
}

impl NamedReport {
    pub fn new(name: impl Into<String>, report: ReportBody) -> Self {
        NamedReport { name: name.into(), report }
    }

    /// Flat `(quantity, value, std_error, exact)` rows.
    pub fn records(&self) -> Vec<Quantity> {
        let n = &self.name;
        let q = |field: &str, value: f64, se: Option<f64>, exact: bool| Quantity { name: format!("{n}.{field}"), value, std_error: se, exact };
        match &self.report {
            ReportBody::Estimate(e) => vec![Quantity { name: n.clone(), value: e.value, std_error: Some(e.std_error), exact: e.exact }],
            ReportBody::Stability(s) => {
                let exact = s.directionality == Directionality::Exact;
                vec![
                    q("beta_hat", s.beta_hat, None, exact),
                    q("chi_hat", s.chi_hat, Some(s.chi_std_error), exact),
                    q("chi_bar_hat", s.chi_bar_hat, Some(s.chi_bar_std_error), exact),
                    q("delta_bar_hat", s.delta_bar_hat, None, exact),
                    q("delta_hat", s.delta_hat, None, exact),
                    q("delta_max_hat", s.delta_max_hat, None, exact),
                ]
            }
            ReportBody::Bound(b) => {
                let mut rows: Vec<Quantity> = b.branch_values.iter().map(|(k, v)| q(k, *v, None, true)).collect();
                rows.push(q("min", b.min_value, None, true));
                rows
            }
            ReportBody::Coverage(c) => {
                let se = (c.violation_rate * (1.0 - c.violation_rate) / c.n_trials as f64).sqrt();
                vec![
                    q("bound", c.bound, None, true),
                    q("violation_rate", c.violation_rate, Some(se), false),
                    q("allowed_rate", c.allowed_rate, None, true),
                    q("mean_slack", c.mean_slack, None, false),
                    q("max_gap", c.max_gap, None, false),
                ]
            }
            ReportBody::Mechanism(m) => {
                let mut rows = vec![q("chosen_index", m.chosen_index as f64, None, false)];
                rows.extend(m.probs.iter().enumerate().map(|(k, p)| q(&format!("prob.{k}"), *p, None, true)));
                rows
            }
            ReportBody::Quantities(qs) => qs.iter().map(|x| Quantity { name: format!("{n}.{}", x.name), ..x.clone() }).collect(),
        }
    }
}

pub const CSV_HEADER: [&str; 4] = ["quantity", "value", "std_error", "exact"];

/// Serializes `reports` in `format` to `out`. Field order is fixed by the
/// type definitions, so equal reports give equal bytes.
pub fn write_report<W: Write>(reports: &[NamedReport], format: Format, out: W) -> CliResult<()> {
    match format {
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, reports)?;
            out.write_all(b"\n")?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER)?;
            for r in reports.iter().flat_map(NamedReport::records) {
                w.write_record([r.name, r.value.to_string(), r.std_error.map(|s| s.to_string()).unwrap_or_default(), r.exact.to_string()])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Writes `reports` to `path`, removing the file again if writing fails.
pub fn emit_report(reports: &[NamedReport], format: Format, path: &Path) -> CliResult<()> {
    let result = std::fs::File::create(path).map_err(Into::into).and_then(|f| {
        let mut buf = std::io::BufWriter::new(f);
        write_report(reports, format, &mut buf)?;
        buf.flush()?;
        Ok(())
    });
    if result.is_err() {
        let _ = std::fs::remove_file(path);
    }
    result
}

/// Parses a JSON report list written by [`write_report`].
pub fn read_json_reports(text: &str) -> CliResult<Vec<NamedReport>> {
    Ok(serde_json::from_str(text)?)
}
