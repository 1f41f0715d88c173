//! Evaluation statistics: Wilson score intervals, paired McNemar tests,
//! Cohen's h, TOST equivalence, Bonferroni correction, Pearson correlation,
//! and Krippendorff's alpha.

mod agreement;
pub mod special;

pub use agreement::{krippendorff_alpha, AgreementMetric};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum StatsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("zero variance in correlation input")]
    ZeroVariance,
    #[error("insufficient data: {need}")]
    InsufficientData { need: String },
}

/// Proportion with its Wilson score interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub successes: u64,
    pub trials: u64,
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence_level: f64,
}

impl RateEstimate {
    pub fn from_counts(successes: u64, trials: u64, confidence: f64) -> Result<Self, StatsError> {
        if trials == 0 {
            return Err(StatsError::EmptyCorpus);
        }
        if successes > trials {
            return Err(StatsError::Domain("successes exceed trials".into()));
        }
        let mut est = wilson_interval(successes as f64 / trials as f64, trials, confidence)?;
        est.successes = successes;
        Ok(est)
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(point: f64, trials: u64, confidence: f64) -> Result<RateEstimate, StatsError> {
    if !(0.0..=1.0).contains(&point) {
        return Err(StatsError::Domain(format!("point {point} outside [0,1]")));
    }
    if trials == 0 {
        return Err(StatsError::Domain("trials must be >= 1".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::Domain(format!(
            "confidence {confidence} outside (0,1)"
        )));
    }
    let n = trials as f64;
    let z = special::normal_quantile(1.0 - (1.0 - confidence) / 2.0);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (point + z2 / (2.0 * n)) / denom;
    let half = z * (point * (1.0 - point) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Ok(RateEstimate {
        successes: (point * n).round() as u64,
        trials,
        point,
        ci_low: (center - half).max(0.0),
        ci_high: (center + half).min(1.0),
        confidence_level: confidence,
    })
}

/// Continuity-corrected McNemar test on the discordant counts. Returns the
/// chi-square statistic and its one-degree-of-freedom tail probability;
/// degenerate input (b + c = 0) yields (0, 1).
pub fn mcnemar(b: u64, c: u64) -> (f64, f64) {
    let total = b + c;
    if total == 0 {
        return (0.0, 1.0);
    }
    let diff = (b as f64 - c as f64).abs();
    let corrected = (diff - 1.0).max(0.0);
    let statistic = corrected * corrected / total as f64;
    (statistic, special::chi_square_tail_1df(statistic))
}

/// Exact binomial McNemar p-value; the preferable variant when b + c < 25.
pub fn mcnemar_exact(b: u64, c: u64) -> f64 {
    let total = b + c;
    if total == 0 {
        return 1.0;
    }
    let tail = special::binomial_half_cdf(b.min(c), total);
    (2.0 * tail).min(1.0)
}

/// Cohen's h effect size: 2 asin(sqrt(p1)) - 2 asin(sqrt(p2)).
pub fn cohens_h(p1: f64, p2: f64) -> Result<f64, StatsError> {
    for p in [p1, p2] {
        if !(0.0..=1.0).contains(&p) {
            return Err(StatsError::Domain(format!("proportion {p} outside [0,1]")));
        }
    }
    Ok(2.0 * p1.sqrt().asin() - 2.0 * p2.sqrt().asin())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TostResult {
    pub equivalent: bool,
    pub p_lower: f64,
    pub p_upper: f64,
}

/// Two one-sided z-tests for equivalence of two proportions within `margin`.
/// When both proportions are degenerate (0 or 1) the standard error
/// vanishes; the verdict then depends only on whether the difference clears
/// the margin.
pub fn tost_two_proportions(
    p1: f64,
    n1: u64,
    p2: f64,
    n2: u64,
    margin: f64,
    alpha: f64,
) -> Result<TostResult, StatsError> {
    if margin <= 0.0 {
        return Err(StatsError::Domain("margin must be positive".into()));
    }
    if n1 == 0 || n2 == 0 {
        return Err(StatsError::Domain("counts must be >= 1".into()));
    }
    for p in [p1, p2] {
        if !(0.0..=1.0).contains(&p) {
            return Err(StatsError::Domain(format!("proportion {p} outside [0,1]")));
        }
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::Domain(format!("alpha {alpha} outside (0,1)")));
    }
    let diff = p1 - p2;
    let se = (p1 * (1.0 - p1) / n1 as f64 + p2 * (1.0 - p2) / n2 as f64).sqrt();
    if se == 0.0 {
        return Ok(if diff.abs() < margin {
            TostResult {
                equivalent: true,
                p_lower: 0.0,
                p_upper: 0.0,
            }
        } else {
            TostResult {
                equivalent: false,
                p_lower: 1.0,
                p_upper: 1.0,
            }
        });
    }
    let p_lower = special::normal_sf((diff + margin) / se);
    let p_upper = special::normal_cdf((diff - margin) / se);
    Ok(TostResult {
        equivalent: p_lower < alpha && p_upper < alpha,
        p_lower,
        p_upper,
    })
}

/// Bonferroni adjustment: min(1, m * p), order preserved. The family size
/// defaults to the list length.
pub fn bonferroni(p_values: &[f64], family_size: Option<usize>) -> Vec<f64> {
    let m = family_size.unwrap_or(p_values.len()).max(1) as f64;
    p_values.iter().map(|p| (m * p).min(1.0)).collect()
}

/// Product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(StatsError::Domain(
            "need two equal-length series of length >= 2".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Per-task boolean verdicts, one inner map per model.
pub type VerdictTable = BTreeMap<String, BTreeMap<String, bool>>;

/// Pairwise model comparison on shared tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub model_a: String,
    pub model_b: String,
    pub shared_tasks: u64,
    /// Tasks where A passed and B failed.
    pub b_discordant: u64,
    /// Tasks where A failed and B passed.
    pub c_discordant: u64,
    pub mcnemar_statistic: f64,
    pub mcnemar_p: f64,
    pub cohens_h: f64,
    pub tost_equivalent: bool,
    pub tost_p_lower: f64,
    pub tost_p_upper: f64,
    /// Bonferroni-adjusted McNemar p over the whole comparison family.
    pub adjusted_p: f64,
}

/// Emits one `ComparisonResult` per model pair (lexicographic), with the
/// Bonferroni family spanning all pairs.
pub fn compare_models(
    table: &VerdictTable,
    margin: f64,
    alpha: f64,
) -> Result<Vec<ComparisonResult>, StatsError> {
    let models: Vec<&String> = table.keys().collect();
    let mut results = Vec::new();
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            let (ma, mb) = (models[i], models[j]);
            let va = &table[ma];
            let vb = &table[mb];
            let shared: Vec<&String> = va.keys().filter(|t| vb.contains_key(*t)).collect();
            if shared.is_empty() {
                continue;
            }
            let mut b = 0u64;
            let mut c = 0u64;
            let mut a_pass = 0u64;
            let mut b_pass = 0u64;
            for t in &shared {
                let (ra, rb) = (va[*t], vb[*t]);
                if ra {
                    a_pass += 1;
                }
                if rb {
                    b_pass += 1;
                }
                match (ra, rb) {
                    (true, false) => b += 1,
                    (false, true) => c += 1,
                    _ => {}
                }
            }
            let n = shared.len() as u64;
            let (statistic, p) = mcnemar(b, c);
            let pa = a_pass as f64 / n as f64;
            let pb = b_pass as f64 / n as f64;
            let tost = tost_two_proportions(pa, n, pb, n, margin, alpha)?;
            results.push(ComparisonResult {
                model_a: ma.clone(),
                model_b: mb.clone(),
                shared_tasks: n,
                b_discordant: b,
                c_discordant: c,
                mcnemar_statistic: statistic,
                mcnemar_p: p,
                cohens_h: cohens_h(pa, pb)?,
                tost_equivalent: tost.equivalent,
                tost_p_lower: tost.p_lower,
                tost_p_upper: tost.p_upper,
                adjusted_p: 0.0,
            });
        }
    }
    let raw: Vec<f64> = results.iter().map(|r| r.mcnemar_p).collect();
    let adjusted = bonferroni(&raw, None);
    for (r, adj) in results.iter_mut().zip(adjusted) {
        r.adjusted_p = adj;
    }
    Ok(results)
}
