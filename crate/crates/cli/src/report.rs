//! Rendering of reports as aligned text tables (values rounded to two
//! decimals) or JSON (full precision). Both views are produced from the
//! same computed numbers.

use std::fmt::Write;

use serde::Serialize;

use crossloss_core::blend::BlendResult;
use crossloss_core::elicitation::{RegressionFit, SpecificationResult};
use crossloss_core::metrics::{AdmissibilityFlag, MetricReport, Table1Demo};
use crossloss_core::{LossParams, SignedLossRecord};

/// Display order and labels for the metric table.
const METRIC_ORDER: &[(&str, &str)] = &[
    ("loss_total", "total loss"),
    ("loss_mean", "mean loss"),
    ("average_estimated_variance", "avg est. variance"),
    ("mape", "MAPE"),
    ("medape", "MedAPE"),
    ("rmse", "RMSE"),
    ("rmspe", "RMSPE"),
    ("p90_ape", "90PE"),
    ("fellegi", "Fellegi share loss"),
    ("hamilton", "Hamilton"),
    ("hill", "Hill"),
    ("jefferson", "Jefferson"),
    ("adams", "Adams"),
];

fn flag_text(flag: AdmissibilityFlag) -> &'static str {
    match flag {
        AdmissibilityFlag::Admissible => "admissible",
        AdmissibilityFlag::ViolatesAssumption3 => "does not fall with the actual",
        AdmissibilityFlag::ViolatesProperty1 => "does not rise with the actual at fixed APE",
        AdmissibilityFlag::ViolatesVnm => "not an additive loss",
    }
}

/// Two decimals, switching to scientific for magnitudes the rounding would
/// erase.
pub fn fmt_value(v: f64) -> String {
    if v != 0.0 && v.abs() < 0.005 {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

pub fn render_metric_reports(reports: &[MetricReport], params: LossParams) -> String {
    let mut out = String::new();
    for report in reports {
        let _ = writeln!(
            out,
            "set {} (loss exponents p={}, q={})",
            report.set_name,
            params.p(),
            params.q()
        );
        let _ = writeln!(out, "  {:<22} {:>14}  assessment", "metric", "value");
        for (key, label) in METRIC_ORDER {
            if let Some(value) = report.metric_values.get(*key) {
                let flag = report
                    .admissibility_flags
                    .get(*key)
                    .map(|f| flag_text(*f))
                    .unwrap_or("");
                let _ = writeln!(out, "  {:<22} {:>14}  {}", label, fmt_value(*value), flag);
            }
        }
        for note in &report.notes {
            let _ = writeln!(out, "  note: {note}");
        }
        let _ = writeln!(out);
    }
    out
}

#[derive(Serialize)]
pub struct FitOutput<'a> {
    pub fit: &'a RegressionFit,
    pub specification: &'a SpecificationResult,
}

pub fn render_fit(fit: &RegressionFit, spec: &SpecificationResult) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "fitted loss exponents from {} samples ({} dropped at 0% satisfaction, {} floored at 100%)",
        fit.n_used, fit.n_dropped_zero_u, fit.n_floored
    );
    let _ = writeln!(
        out,
        "  p       = {:>10.4}  (se {})",
        fit.p_hat,
        fmt_se(fit.standard_errors.se_p)
    );
    let _ = writeln!(
        out,
        "  q       = {:>10.4}  (se {})",
        fit.q_hat,
        fmt_se(fit.standard_errors.se_q)
    );
    let _ = writeln!(
        out,
        "  log a   = {:>10.4}  (se {})",
        fit.intercept,
        fmt_se(fit.standard_errors.se_intercept)
    );
    let verdict = if spec.property1_holds {
        "loss rises with the actual at a fixed relative error"
    } else {
        "VIOLATION: loss does not rise with the actual at a fixed relative error"
    };
    let _ = writeln!(out, "  p + q   = {:>10.4}  -> {verdict}", spec.sum_pq);
    for note in &spec.diagnostics {
        let _ = writeln!(out, "  diagnostic: {note}");
    }
    out
}

fn fmt_se(se: f64) -> String {
    if se.is_nan() {
        "n/a, zero degrees of freedom".to_string()
    } else {
        format!("{se:.4}")
    }
}

pub fn render_blend(result: &BlendResult, set_names: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "best blend over {} lattice evaluations",
        result.evaluations
    );
    for (name, w) in set_names.iter().zip(result.best_weights.weights()) {
        let _ = writeln!(out, "  weight[{name}] = {w:.6}");
    }
    let _ = writeln!(out, "  total loss    = {}", fmt_value(result.best_loss));
    let _ = writeln!(out, "  lattice step  = {:e}", result.grid_resolution);
    out
}

#[derive(Serialize)]
pub struct BiasOutput {
    pub set: String,
    pub ranking: Vec<SignedLossRecord>,
}

pub fn render_bias(outputs: &[BiasOutput]) -> String {
    let mut out = String::new();
    for output in outputs {
        let _ = writeln!(
            out,
            "set {} (positive = overprediction, negative = underprediction)",
            output.set
        );
        let _ = writeln!(
            out,
            "  {:<12} {:>14} {:>14}",
            "id", "signed loss", "magnitude"
        );
        for record in &output.ranking {
            let _ = writeln!(
                out,
                "  {:<12} {:>14} {:>14}",
                record.id,
                fmt_value(record.signed_loss),
                fmt_value(record.magnitude)
            );
        }
        let _ = writeln!(out);
    }
    out
}

pub fn render_table1(demo: &Table1Demo) -> String {
    let mut out = String::new();
    let scenarios = demo.table.scenarios();

    let _ = write!(out, "{:<6} {:>9}", "area", "actual");
    for (name, _) in scenarios {
        let _ = write!(out, " | {:>10} {:>7} {:>8}", name, "APE", "loss");
    }
    let _ = writeln!(out);

    for (i, actual) in demo.table.actuals().iter().enumerate() {
        let _ = write!(out, "{:<6} {:>9}", i + 1, format!("{actual:.0}"));
        for (s, (_, eps)) in scenarios.iter().enumerate() {
            let ape = &demo.reports[s].per_observation["mape"][i];
            let loss = &demo.reports[s].per_observation["loss_mean"][i];
            let _ = write!(
                out,
                " | {:>10} {:>7.2} {:>8.2}",
                format!("e={:.0}", eps[i]),
                ape,
                loss
            );
        }
        let _ = writeln!(out);
    }

    let _ = write!(out, "{:<6} {:>9}", "means", "");
    for report in &demo.reports {
        let _ = write!(
            out,
            " | {:>10} {:>7.2} {:>8.2}",
            "",
            report.metric_values["mape"],
            report.metric_values["loss_mean"]
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "\nMAPE ranks the scenarios {} while the mean loss ranks them {}.",
        rank_order(demo, "mape"),
        rank_order(demo, "loss_mean")
    );
    out
}

fn rank_order(demo: &Table1Demo, key: &str) -> String {
    let mut order: Vec<usize> = (0..demo.reports.len()).collect();
    order.sort_by(|&a, &b| {
        demo.reports[a].metric_values[key].total_cmp(&demo.reports[b].metric_values[key])
    });
    order
        .iter()
        .map(|&i| format!("S{}", i + 1))
        .collect::<Vec<_>>()
        .join(" < ")
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}
