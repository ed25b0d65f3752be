//! Building and emitting evaluation reports (CSV, Markdown, JSON).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use zerofolio_core::eval::{
    cross_validate, fold_means, overall_par10, pooled_vbs, EmbeddingSource, EvalError,
    SelectorSpec,
};
use zerofolio_core::scenario::Scenario;
use zerofolio_core::stats::{gap_closed, wilcoxon_signed_rank};

/// Report serialization format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    /// `scenario,selector,fold,instances,par10_mean` rows.
    #[default]
    Csv,
    /// A results table shaped like the headline comparison.
    Markdown,
    /// The full report, round-trippable.
    Json,
}

/// Mean PAR10 of one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMeanRow {
    /// Fold index.
    pub fold: u32,
    /// Test instances evaluated in the fold.
    pub instances: usize,
    /// Mean PAR10 over them.
    pub par10_mean: f64,
}

/// One selector's results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorReport {
    /// Per-fold means (non-empty folds only).
    pub per_fold: Vec<FoldMeanRow>,
    /// Instance-weighted mean over all folds.
    pub overall_par10: f64,
    /// Share of the SBS-VBS gap closed, in percent.
    pub gap_closed_percent: f64,
}

/// Instance accounting: the full scenario versus the manifest-covered subset
/// every selector is scored on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceCounts {
    /// Instances in the scenario.
    pub total: usize,
    /// Instances with embedding data (the shared evaluation denominator).
    pub embedded: usize,
}

/// A full evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Format version of this structure.
    pub schema_version: u32,
    /// Scenario identifier.
    pub scenario_name: String,
    /// Scenario cutoff in seconds.
    pub cutoff_seconds: f64,
    /// Instance accounting.
    pub instance_counts: InstanceCounts,
    /// Cross-validated single-best-solver PAR10 on the embedded subset.
    pub sbs_par10: f64,
    /// Oracle PAR10 on the embedded subset.
    pub vbs_par10: f64,
    /// Cross-validated single-best-solver PAR10 on all instances.
    pub sbs_par10_full_set: f64,
    /// Oracle PAR10 on all instances.
    pub vbs_par10_full_set: f64,
    /// Results per selector name.
    pub selectors: BTreeMap<String, SelectorReport>,
    /// Two-sided fold-paired significance per selector pair
    /// (`"a vs b"` with names in lexicographic order).
    pub significance: BTreeMap<String, f64>,
}

/// Report construction failures.
#[derive(Debug, Error)]
pub enum ReportError {
    /// Propagated evaluation failure, tagged with the selector that hit it.
    #[error("evaluating {selector}: {source}")]
    Eval {
        /// Selector being evaluated.
        selector: String,
        /// The underlying failure.
        #[source]
        source: EvalError,
    },
    /// SBS did not beat VBS, so gap percentages are undefined.
    #[error("degenerate scenario: SBS {sbs} does not exceed VBS {vbs}")]
    DegenerateGap {
        /// Cross-validated SBS PAR10.
        sbs: f64,
        /// Oracle PAR10.
        vbs: f64,
    },
}

/// Cross-validates every named selector and assembles the report.
///
/// SBS and VBS are computed on both the embedded subset (the shared
/// denominator for every selector and for gap percentages) and the full
/// instance set.
pub fn build_report(
    scenario: &Scenario,
    source: &EmbeddingSource,
    eligible: &BTreeSet<usize>,
    selectors: &[(String, SelectorSpec)],
) -> Result<EvaluationReport, ReportError> {
    let run = |name: &str, spec: &SelectorSpec, subset: &BTreeSet<usize>| {
        cross_validate(scenario, source, subset, spec).map_err(|source| ReportError::Eval {
            selector: name.to_string(),
            source,
        })
    };

    let all_instances: BTreeSet<usize> = (0..scenario.instances().len()).collect();
    let sbs_results = run("sbs", &SelectorSpec::SingleBest, eligible)?;
    let sbs_par10 = overall_par10(&sbs_results);
    let vbs_par10 = pooled_vbs(scenario, eligible);
    let sbs_par10_full_set = if all_instances == *eligible {
        sbs_par10
    } else {
        overall_par10(&run("sbs", &SelectorSpec::SingleBest, &all_instances)?)
    };
    let vbs_par10_full_set = pooled_vbs(scenario, &all_instances);

    let mut reports = BTreeMap::new();
    let mut fold_samples: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (name, spec) in selectors {
        let results = run(name, spec, eligible)?;
        if cfg!(debug_assertions) {
            for fold in &results {
                for (&i, &(_, par10)) in &fold.per_instance {
                    let vbs_i = zerofolio_core::forest::virtual_best_par10_by_index(scenario, i);
                    debug_assert!(par10 >= vbs_i, "selector beat the oracle on instance {i}");
                    debug_assert!(par10 <= 10.0 * scenario.cutoff_seconds());
                }
            }
        }
        let overall = overall_par10(&results);
        let gap = gap_closed(sbs_par10, overall, vbs_par10)
            .map_err(|_| ReportError::DegenerateGap { sbs: sbs_par10, vbs: vbs_par10 })?;
        let per_fold = fold_means(&results)
            .into_iter()
            .map(|(fold, instances, par10_mean)| FoldMeanRow { fold, instances, par10_mean })
            .collect::<Vec<_>>();
        fold_samples.insert(name.clone(), per_fold.iter().map(|r| r.par10_mean).collect());
        reports.insert(
            name.clone(),
            SelectorReport { per_fold, overall_par10: overall, gap_closed_percent: gap },
        );
    }

    let mut significance = BTreeMap::new();
    let names: Vec<&String> = fold_samples.keys().collect();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let (xa, xb) = (&fold_samples[*a], &fold_samples[*b]);
            if xa.len() == xb.len() && !xa.is_empty() {
                if let Ok(p) = wilcoxon_signed_rank(xa, xb) {
                    significance.insert(format!("{a} vs {b}"), p);
                }
            }
        }
    }

    Ok(EvaluationReport {
        schema_version: 1,
        scenario_name: scenario.name().to_string(),
        cutoff_seconds: scenario.cutoff_seconds(),
        instance_counts: InstanceCounts {
            total: scenario.instances().len(),
            embedded: eligible.len(),
        },
        sbs_par10,
        vbs_par10,
        sbs_par10_full_set,
        vbs_par10_full_set,
        selectors: reports,
        significance,
    })
}

/// Renders a report; output is deterministic and column-stable.
pub fn emit_report(report: &EvaluationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => emit_csv(report),
        ReportFormat::Markdown => emit_markdown(report),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

fn emit_csv(report: &EvaluationReport) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["scenario", "selector", "fold", "instances", "par10_mean"])
        .unwrap();
    for (name, selector) in &report.selectors {
        for row in &selector.per_fold {
            writer
                .write_record([
                    report.scenario_name.as_str(),
                    name,
                    &row.fold.to_string(),
                    &row.instances.to_string(),
                    &row.par10_mean.to_string(),
                ])
                .unwrap();
        }
        writer
            .write_record([
                report.scenario_name.as_str(),
                name,
                "all",
                &report.instance_counts.embedded.to_string(),
                &selector.overall_par10.to_string(),
            ])
            .unwrap();
    }
    String::from_utf8(writer.into_inner().unwrap()).unwrap()
}

fn format_par10(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

fn emit_markdown(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let names: Vec<&String> = report.selectors.keys().filter(|n| n.as_str() != "sbs").collect();
    writeln!(out, "# {}", report.scenario_name).unwrap();
    writeln!(out).unwrap();
    writeln!(
        out,
        "Instances: {} total, {} with embedding data; cutoff {} s.",
        report.instance_counts.total, report.instance_counts.embedded, report.cutoff_seconds
    )
    .unwrap();
    writeln!(out).unwrap();

    let mut header = String::from("| Scenario | SBS |");
    let mut rule = String::from("|---|---:|");
    for name in &names {
        write!(header, " {name} |").unwrap();
        rule.push_str("---:|");
    }
    header.push_str(" VBS |");
    rule.push_str("---:|");
    for name in &names {
        write!(header, " Gap% {name} |").unwrap();
        rule.push_str("---:|");
    }
    writeln!(out, "{header}").unwrap();
    writeln!(out, "{rule}").unwrap();

    let mut row = format!(
        "| {} | {} |",
        report.scenario_name,
        format_par10(report.sbs_par10)
    );
    for name in &names {
        write!(row, " {} |", format_par10(report.selectors[*name].overall_par10)).unwrap();
    }
    write!(row, " {} |", format_par10(report.vbs_par10)).unwrap();
    for name in &names {
        write!(row, " {:.0} |", report.selectors[*name].gap_closed_percent.round()).unwrap();
    }
    writeln!(out, "{row}").unwrap();

    if !report.significance.is_empty() {
        writeln!(out).unwrap();
        writeln!(out, "Fold-paired Wilcoxon signed-rank p-values:").unwrap();
        writeln!(out).unwrap();
        for (pair, p) in &report.significance {
            writeln!(out, "- {pair}: p = {p:.6}").unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_report() -> EvaluationReport {
        let mut selectors = BTreeMap::new();
        selectors.insert(
            "zf".to_string(),
            SelectorReport { per_fold: Vec::new(), overall_par10: 120.5, gap_closed_percent: 64.2 },
        );
        EvaluationReport {
            schema_version: 1,
            scenario_name: "TINY".into(),
            cutoff_seconds: 100.0,
            instance_counts: InstanceCounts { total: 10, embedded: 8 },
            sbs_par10: 300.0,
            vbs_par10: 20.0,
            sbs_par10_full_set: 310.0,
            vbs_par10_full_set: 19.0,
            selectors,
            significance: BTreeMap::new(),
        }
    }

    #[test]
    fn csv_with_one_selector_is_header_plus_one_row() {
        let text = emit_report(&minimal_report(), ReportFormat::Csv);
        let lines: Vec<&str> = text.trim_end().lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "scenario,selector,fold,instances,par10_mean");
        assert_eq!(lines[1], "TINY,zf,all,8,120.5");
    }

    #[test]
    fn emission_is_deterministic() {
        let report = minimal_report();
        for format in [ReportFormat::Csv, ReportFormat::Markdown, ReportFormat::Json] {
            assert_eq!(emit_report(&report, format), emit_report(&report, format));
        }
    }

    #[test]
    fn json_round_trips() {
        let report = minimal_report();
        let text = emit_report(&report, ReportFormat::Json);
        let back: EvaluationReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn markdown_has_table_columns() {
        let text = emit_report(&minimal_report(), ReportFormat::Markdown);
        assert!(text.contains("| Scenario | SBS | zf | VBS | Gap% zf |"));
        assert!(text.contains("| TINY | 300 | 120.5 | 20 | 64 |"));
    }
}
