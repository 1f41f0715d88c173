//! Evaluation report assembly: per-model, per-category rates with Wilson
//! intervals, the error-taxonomy histogram, and pairwise model comparisons.

use chemval_core::protocol::{FormatReport, ReasoningTrace};
use chemval_core::routes::FeasibilityReport;
use chemval_core::stats::{self, ComparisonResult, RateEstimate, VerdictTable};
use chemval_core::validity::ValidityReport;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Sidecar metadata for one model-output document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocMeta {
    pub id: String,
    pub model: String,
    pub task_id: String,
    pub task_category: String,
    #[serde(default)]
    pub difficulty: Option<u8>,
    pub path: String,
}

/// Everything measured on one document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocResult {
    pub meta: DocMeta,
    pub format: FormatReport,
    pub validity: Vec<ValidityReport>,
    pub feasibility: Option<FeasibilityReport>,
    pub reasoning: ReasoningTrace,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateRow {
    pub model: String,
    pub metric: String,
    pub category: String,
    pub successes: u64,
    pub trials: u64,
    pub estimate: Option<RateEstimate>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct EvaluationReport {
    pub rates: Vec<RateRow>,
    pub taxonomy: BTreeMap<String, BTreeMap<String, u64>>,
    pub comparisons: BTreeMap<String, Vec<ComparisonResult>>,
}

const METRICS: [&str; 3] = ["format_adherence", "chemical_validity", "synthesis_feasibility"];

fn add_counts(
    counts: &mut BTreeMap<(String, String, String), (u64, u64)>,
    model: &str,
    metric: &str,
    category: &str,
    successes: u64,
    trials: u64,
) {
    for cat in [category, "overall"] {
        let entry = counts
            .entry((model.to_string(), metric.to_string(), cat.to_string()))
            .or_insert((0, 0));
        entry.0 += successes;
        entry.1 += trials;
    }
}

pub fn build_report(
    results: &[DocResult],
    margin: f64,
    alpha: f64,
    confidence: f64,
) -> anyhow::Result<EvaluationReport> {
    let mut counts: BTreeMap<(String, String, String), (u64, u64)> = BTreeMap::new();
    let mut taxonomy: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    let mut verdicts: BTreeMap<&str, VerdictTable> = BTreeMap::new();
    for metric in METRICS {
        verdicts.insert(metric, VerdictTable::new());
    }

    for doc in results {
        let model = &doc.meta.model;
        let category = &doc.meta.task_category;
        let task = &doc.meta.task_id;
        let tax = taxonomy.entry(model.clone()).or_default();

        // Format adherence: one trial per document.
        add_counts(
            &mut counts,
            model,
            "format_adherence",
            category,
            doc.format.adherent as u64,
            1,
        );
        verdicts
            .get_mut("format_adherence")
            .unwrap()
            .entry(model.clone())
            .or_default()
            .insert(task.clone(), doc.format.adherent);
        for requirement in doc.format.failed_requirements() {
            *tax
                .entry(format!("format:{}", requirement.as_str()))
                .or_insert(0) += 1;
        }

        // Chemical validity: one trial per extracted structure; the task
        // verdict is the conjunction.
        if !doc.validity.is_empty() {
            let valid = doc.validity.iter().filter(|r| r.is_valid()).count() as u64;
            add_counts(
                &mut counts,
                model,
                "chemical_validity",
                category,
                valid,
                doc.validity.len() as u64,
            );
        }
        verdicts
            .get_mut("chemical_validity")
            .unwrap()
            .entry(model.clone())
            .or_default()
            .insert(task.clone(), doc.validity.iter().all(|r| r.is_valid()));
        for report in &doc.validity {
            let mut codes: Vec<&str> = report.errors.iter().map(|e| e.code.as_str()).collect();
            codes.sort_unstable();
            codes.dedup();
            // One count per error type per structure: types are tallied
            // independently even when they co-occur.
            for code in codes {
                *tax.entry(format!("validity:{code}")).or_insert(0) += 1;
            }
        }

        // Synthesis feasibility: one trial per document carrying a route.
        if let Some(feasibility) = &doc.feasibility {
            add_counts(
                &mut counts,
                model,
                "synthesis_feasibility",
                category,
                feasibility.feasible as u64,
                1,
            );
            verdicts
                .get_mut("synthesis_feasibility")
                .unwrap()
                .entry(model.clone())
                .or_default()
                .insert(task.clone(), feasibility.feasible);
            for flaw in &feasibility.flaws {
                let class = flaw.split(':').next().unwrap_or("flaw");
                *tax.entry(format!("feasibility:{class}")).or_insert(0) += 1;
            }
        }
    }

    let mut rates = Vec::new();
    for ((model, metric, category), (successes, trials)) in counts {
        let estimate = RateEstimate::from_counts(successes, trials, confidence).ok();
        rates.push(RateRow {
            model,
            metric,
            category,
            successes,
            trials,
            estimate,
        });
    }

    let mut comparisons = BTreeMap::new();
    for metric in METRICS {
        let table = &verdicts[metric];
        if table.len() >= 2 {
            let results = stats::compare_models(table, margin, alpha)?;
            if !results.is_empty() {
                comparisons.insert(metric.to_string(), results);
            }
        }
    }

    Ok(EvaluationReport {
        rates,
        taxonomy,
        comparisons,
    })
}


fn percent(est: &RateEstimate) -> String {
    format!(
        "{:5.1}% (±{:.1}%)",
        est.point * 100.0,
        est.half_width() * 100.0
    )
}

impl EvaluationReport {
    /// Machine-readable line records, deterministic order.
    pub fn to_jsonl(&self) -> String {
        let mut lines = Vec::new();
        for row in &self.rates {
            lines.push(
                serde_json::json!({"kind": "rate", "model": row.model, "metric": row.metric,
                    "category": row.category, "successes": row.successes, "trials": row.trials,
                    "estimate": row.estimate})
                .to_string(),
            );
        }
        for (model, hist) in &self.taxonomy {
            for (code, count) in hist {
                lines.push(
                    serde_json::json!({"kind": "taxonomy", "model": model, "code": code, "count": count})
                        .to_string(),
                );
            }
        }
        for (metric, comps) in &self.comparisons {
            for c in comps {
                lines.push(
                    serde_json::json!({"kind": "comparison", "metric": metric, "result": c})
                        .to_string(),
                );
            }
        }
        lines.join("\n")
    }

    /// Plain-text tables in the metric x category layout.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let mut categories: Vec<&String> = self
            .rates
            .iter()
            .map(|r| &r.category)
            .filter(|c| c.as_str() != "overall")
            .collect();
        categories.sort();
        categories.dedup();
        let mut models: Vec<&String> = self.rates.iter().map(|r| &r.model).collect();
        models.sort();
        models.dedup();

        for metric in METRICS {
            let any = self.rates.iter().any(|r| r.metric == metric);
            if !any {
                continue;
            }
            out.push_str(&format!("== {metric} ==\n"));
            let mut header = format!("{:<24}", "model");
            for cat in &categories {
                header.push_str(&format!("{:>24}", cat));
            }
            header.push_str(&format!("{:>24}", "overall"));
            out.push_str(&header);
            out.push('\n');
            for model in &models {
                let mut line = format!("{:<24}", model);
                for cat in categories.iter().chain([&&"overall".to_string()]) {
                    let cell = self
                        .rates
                        .iter()
                        .find(|r| r.metric == metric && &&r.model == model && &&r.category == cat);
                    match cell.and_then(|r| r.estimate.as_ref()) {
                        Some(est) => line.push_str(&format!("{:>24}", percent(est))),
                        None => line.push_str(&format!("{:>24}", "-")),
                    }
                }
                out.push_str(&line);
                out.push('\n');
            }
            out.push('\n');
        }

        if !self.taxonomy.is_empty() {
            out.push_str("== error taxonomy ==\n");
            for (model, hist) in &self.taxonomy {
                for (code, count) in hist {
                    out.push_str(&format!("{model:<24}{code:<40}{count}\n"));
                }
            }
            out.push('\n');
        }

        for (metric, comps) in &self.comparisons {
            out.push_str(&format!("== comparisons: {metric} ==\n"));
            for c in comps {
                out.push_str(&format!(
                    "{} vs {}: shared={} b={} c={} mcnemar={:.4} p={:.4} adj_p={:.4} h={:+.4} tost_equiv={}\n",
                    c.model_a,
                    c.model_b,
                    c.shared_tasks,
                    c.b_discordant,
                    c.c_discordant,
                    c.mcnemar_statistic,
                    c.mcnemar_p,
                    c.adjusted_p,
                    c.cohens_h,
                    c.tost_equivalent,
                ));
            }
            out.push('\n');
        }
        out
    }

}
