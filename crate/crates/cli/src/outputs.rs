//! Tabular and JSON artifact writers. All CSVs are RFC-4180 with header
//! rows; identical runs produce byte-identical files.

use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use osassl_core::graph::{degree_stats, DependencyGraph};
use osassl_core::importance::{GroupSummary, ImportanceScore, MeasureKind};
use osassl_core::panel::Panel;
use osassl_core::superlearner::ScheduleOutput;

pub fn write_all(
    out_dir: &Path,
    panel: &Panel,
    output: &ScheduleOutput,
    scores: &[ImportanceScore],
    groups: &[GroupSummary],
    graph: Option<&DependencyGraph>,
    gap_epsilon: f64,
) -> anyhow::Result<()> {
    write_forecast_csv(&out_dir.join("forecast.csv"), output)?;
    write_forecast_json(&out_dir.join("forecast.json"), panel, output)?;
    write_risk_traces(&out_dir.join("risk_traces.csv"), output)?;
    write_weights(&out_dir.join("weights.csv"), output)?;
    write_predictions_vs_actual(&out_dir.join("predictions_vs_actual.csv"), output)?;
    write_residuals_by_decile(&out_dir.join("residuals_by_decile.csv"), output)?;
    write_importance(&out_dir.join("importance.csv"), scores)?;
    write_importance_groups(&out_dir.join("importance_groups.csv"), groups)?;
    if let Some(graph) = graph {
        write_degree_stats(&out_dir.join("degree_stats.csv"), graph)?;
    }
    if output.probe.is_some() {
        write_oracle_probe(&out_dir.join("oracle_probe.csv"), output, gap_epsilon)?;
    }
    Ok(())
}

fn writer(path: &Path) -> anyhow::Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot create `{}`", path.display()))
}

fn write_forecast_csv(path: &Path, output: &ScheduleOutput) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    let labels = &output.report.algorithm_labels;
    let mut header = vec![
        "year".to_owned(),
        "selected".to_owned(),
        "selected_label".to_owned(),
        "total_actual".to_owned(),
        "total_predicted_discrete".to_owned(),
        "ratio_discrete".to_owned(),
        "total_predicted_continuous".to_owned(),
        "ratio_continuous".to_owned(),
    ];
    header.extend(labels.iter().map(|l| format!("weight_{l}")));
    header.extend(labels.iter().map(|l| format!("rhat_{l}")));
    w.write_record(&header)?;
    for row in &output.report.rows {
        let ratio_field = |ratio: Option<f64>| ratio.map(|r| r.to_string()).unwrap_or_default();
        let mut record = vec![
            row.time.0.to_string(),
            row.selected.to_string(),
            labels[row.selected].clone(),
            row.total_actual.to_string(),
            row.total_predicted.to_string(),
            ratio_field(row.ratio),
            row.total_predicted_continuous.to_string(),
            ratio_field(row.ratio_continuous),
        ];
        record.extend(row.weights.as_slice().iter().map(|v| v.to_string()));
        record.extend(row.algorithm_risks.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ForecastJson<'a> {
    cities: Vec<u32>,
    algorithm_labels: &'a [String],
    rows: &'a [osassl_core::superlearner::ForecastRow],
}

fn write_forecast_json(path: &Path, panel: &Panel, output: &ScheduleOutput) -> anyhow::Result<()> {
    let doc = ForecastJson {
        cities: panel.cities().iter().map(|c| c.0).collect(),
        algorithm_labels: &output.report.algorithm_labels,
        rows: &output.report.rows,
    };
    std::fs::write(path, serde_json::to_string_pretty(&doc)?)
        .with_context(|| format!("cannot write `{}`", path.display()))?;
    Ok(())
}

fn write_risk_traces(path: &Path, output: &ScheduleOutput) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record(["time", "algorithm", "rhat", "penalized"])?;
    let ledger = &output.algorithm_ledger;
    let times: Vec<_> = ledger.times().collect();
    for t in 1..=ledger.updates() {
        for (j, label) in output.report.algorithm_labels.iter().enumerate() {
            w.write_record([
                times[t - 1].0.to_string(),
                label.clone(),
                ledger.empirical_risk(j, t)?.to_string(),
                ledger.penalized_risk(j, t)?.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_weights(path: &Path, output: &ScheduleOutput) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record(["year", "algorithm", "weight"])?;
    for row in &output.report.rows {
        for (label, weight) in output
            .report
            .algorithm_labels
            .iter()
            .zip(row.weights.as_slice())
        {
            w.write_record([row.time.0.to_string(), label.clone(), weight.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_predictions_vs_actual(path: &Path, output: &ScheduleOutput) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    let labels = &output.report.algorithm_labels;
    let mut header = vec![
        "year".to_owned(),
        "actual".to_owned(),
        "discrete".to_owned(),
        "continuous".to_owned(),
    ];
    header.extend(labels.iter().map(|l| format!("total_{l}")));
    w.write_record(&header)?;
    for row in &output.report.rows {
        let mut record = vec![
            row.time.0.to_string(),
            row.total_actual.to_string(),
            row.total_predicted.to_string(),
            row.total_predicted_continuous.to_string(),
        ];
        record.extend(row.algorithm_totals.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-observation residuals of the continuous selection over the
/// evaluation window, stratified by deciles of the declared city-level
/// costs (decile 1 = lowest costs).
fn write_residuals_by_decile(path: &Path, output: &ScheduleOutput) -> anyhow::Result<()> {
    let mut pooled: Vec<(f64, f64)> = Vec::new(); // (actual, predicted)
    for row in &output.report.rows {
        let record = output
            .slice_records
            .iter()
            .find(|r| r.time == row.time)
            .expect("slice record for evaluation row");
        for (city, declared) in record.declared.iter().enumerate() {
            if *declared {
                pooled.push((record.actuals[city], row.city_predictions_continuous[city]));
            }
        }
    }
    let mut sorted: Vec<f64> = pooled.iter().map(|(a, _)| *a).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let decile_of = |value: f64| -> usize {
        if sorted.is_empty() {
            return 1;
        }
        let rank = sorted.partition_point(|v| *v <= value);
        (((rank.max(1) - 1) * 10) / sorted.len() + 1).min(10)
    };
    let mut w = writer(path)?;
    w.write_record(["decile", "actual", "predicted", "residual"])?;
    for (actual, predicted) in &pooled {
        w.write_record([
            decile_of(*actual).to_string(),
            actual.to_string(),
            predicted.to_string(),
            (actual - predicted).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_importance(path: &Path, scores: &[ImportanceScore]) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record(["covariate", "group", "kind", "rho", "p_value", "perm_max"])?;
    for score in scores {
        let kind = match score.kind {
            MeasureKind::Spearman => "spearman",
            MeasureKind::CorrelationRatio => "correlation_ratio",
        };
        w.write_record([
            score.covariate.clone(),
            score.group.clone(),
            kind.to_owned(),
            score.rho.to_string(),
            score.p_value.to_string(),
            score.perm_max.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_importance_groups(path: &Path, groups: &[GroupSummary]) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record(["group", "members", "rho_max", "rho_mean", "significant"])?;
    for group in groups {
        w.write_record([
            group.group.clone(),
            group.members.to_string(),
            group.rho_max.to_string(),
            group.rho_mean.to_string(),
            group.significant.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// True cumulative risks, oracle vs. empirical selections and the
/// excess-risk gap (at the configured resolution) per committed time.
fn write_oracle_probe(
    path: &Path,
    output: &ScheduleOutput,
    gap_epsilon: f64,
) -> anyhow::Result<()> {
    let probe = output.probe.as_ref().expect("probe present");
    let labels = &output.report.algorithm_labels;
    let mut w = writer(path)?;
    let mut header = vec![
        "time".to_owned(),
        "t".to_owned(),
        "selected".to_owned(),
        "oracle".to_owned(),
        "truth_risk".to_owned(),
        "excess_selected".to_owned(),
        "excess_oracle".to_owned(),
        "gap".to_owned(),
    ];
    header.extend(labels.iter().map(|l| format!("rtilde_{l}")));
    w.write_record(&header)?;
    let times: Vec<_> = output.algorithm_ledger.times().collect();
    for t in 1..=probe.updates() {
        let gap = probe.excess_gap(t, gap_epsilon)?;
        let mut record = vec![
            times[t - 1].0.to_string(),
            t.to_string(),
            probe.selected(t)?.to_string(),
            probe.oracle_select(t)?.to_string(),
            probe.truth_risk(t)?.to_string(),
            gap.excess_selected.to_string(),
            gap.excess_oracle.to_string(),
            gap.gap.to_string(),
        ];
        for j in 0..labels.len() {
            record.push(probe.true_risk(j, t)?.to_string());
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

fn write_degree_stats(path: &Path, graph: &DependencyGraph) -> anyhow::Result<()> {
    let stats = degree_stats(graph)?;
    let mut w = writer(path)?;
    w.write_record(["min", "q1", "median", "mean", "q3", "q99", "max", "degree"])?;
    w.write_record([
        stats.min.to_string(),
        stats.q1.to_string(),
        stats.median.to_string(),
        stats.mean.to_string(),
        stats.q3.to_string(),
        stats.q99.to_string(),
        stats.max.to_string(),
        stats.degree.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}
