//! Krippendorff's alpha over a unit-by-rater matrix with missing entries.

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum AgreementMetric {
    Nominal,
    /// Rank-based difference function; the right choice for Likert data.
    Ordinal,
    Interval,
}

/// `ratings[unit][rater]`, `None` for missing ratings. Units with fewer than
/// two ratings are skipped; at least two pairable units are required.
pub fn krippendorff_alpha(
    ratings: &[Vec<Option<f64>>],
    metric: AgreementMetric,
) -> Result<f64, StatsError> {
    let pairable: Vec<Vec<f64>> = ratings
        .iter()
        .map(|unit| unit.iter().flatten().copied().collect::<Vec<f64>>())
        .filter(|vals| vals.len() >= 2)
        .collect();
    if pairable.len() < 2 {
        return Err(StatsError::InsufficientData {
            need: "at least 2 units with at least 2 ratings each".into(),
        });
    }

    // Value categories in ascending order.
    let mut values: Vec<f64> = pairable.iter().flatten().copied().collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("ratings must not be NaN"));
    values.dedup();
    let index_of = |v: f64| values.iter().position(|&x| x == v).unwrap();
    let k = values.len();

    // Coincidence matrix.
    let mut o = vec![vec![0.0f64; k]; k];
    for unit in &pairable {
        let m = unit.len() as f64;
        for (i, &a) in unit.iter().enumerate() {
            for (j, &b) in unit.iter().enumerate() {
                if i != j {
                    o[index_of(a)][index_of(b)] += 1.0 / (m - 1.0);
                }
            }
        }
    }
    let n_c: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = n_c.iter().sum();

    let delta = |c: usize, d: usize| -> f64 {
        if c == d {
            return 0.0;
        }
        match metric {
            AgreementMetric::Nominal => 1.0,
            AgreementMetric::Interval => {
                let diff = values[c] - values[d];
                diff * diff
            }
            AgreementMetric::Ordinal => {
                let (lo, hi) = (c.min(d), c.max(d));
                let span: f64 = (lo..=hi).map(|g| n_c[g]).sum();
                let s = span - (n_c[lo] + n_c[hi]) / 2.0;
                s * s
            }
        }
    };

    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            if c == d {
                continue;
            }
            observed += o[c][d] * delta(c, d);
            expected += n_c[c] * n_c[d] * delta(c, d);
        }
    }
    let d_o = observed / n;
    let d_e = expected / (n * (n - 1.0));
    if d_e == 0.0 {
        // All mass on one category: no disagreement is possible or observed.
        return Ok(1.0);
    }
    Ok(1.0 - d_o / d_e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_raters(pairs: &[(f64, f64)]) -> Vec<Vec<Option<f64>>> {
        pairs.iter().map(|&(a, b)| vec![Some(a), Some(b)]).collect()
    }

    #[test]
    fn perfect_agreement_is_one() {
        let m = two_raters(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]);
        assert_relative_eq!(
            krippendorff_alpha(&m, AgreementMetric::Nominal).unwrap(),
            1.0
        );
    }

    #[test]
    fn hand_worked_nominal_two_by_four() {
        // Units AA, AB, BB, BB; coincidence matrix [[2,1],[1,4]], n = 8.
        // D_o = 2/8; D_e = (3*5 + 5*3)/(8*7); alpha = 1 - 14/30 = 8/15.
        let m = two_raters(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 1.0)]);
        let alpha = krippendorff_alpha(&m, AgreementMetric::Nominal).unwrap();
        assert_relative_eq!(alpha, 8.0 / 15.0, epsilon = 1e-9);
    }

    #[test]
    fn hand_worked_ordinal() {
        let m = two_raters(&[(1.0, 1.0), (1.0, 2.0), (2.0, 2.0), (2.0, 3.0), (3.0, 3.0)]);
        let alpha = krippendorff_alpha(&m, AgreementMetric::Ordinal).unwrap();
        assert_relative_eq!(alpha, 0.7, epsilon = 1e-9);
    }

    #[test]
    fn single_unit_is_insufficient() {
        let m = two_raters(&[(1.0, 2.0)]);
        assert!(matches!(
            krippendorff_alpha(&m, AgreementMetric::Nominal),
            Err(StatsError::InsufficientData { .. })
        ));
    }

    #[test]
    fn missing_ratings_are_skipped() {
        let m = vec![
            vec![Some(1.0), Some(1.0), None],
            vec![Some(2.0), None, Some(2.0)],
            vec![Some(3.0), Some(3.0), Some(3.0)],
            vec![None, None, Some(9.0)], // unpairable, ignored
        ];
        assert_relative_eq!(
            krippendorff_alpha(&m, AgreementMetric::Nominal).unwrap(),
            1.0
        );
    }

    #[test]
    fn alpha_bounded_above_by_one() {
        let m = two_raters(&[(1.0, 2.0), (2.0, 1.0), (1.0, 2.0)]);
        let alpha = krippendorff_alpha(&m, AgreementMetric::Nominal).unwrap();
        assert!(alpha < 1.0);
    }
}
