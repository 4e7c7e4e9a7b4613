//! Paired t-test and Friedman test with significance read off critical-value
//! tables at α = 0.05 and α = 0.001.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ALPHAS: [f64; 2] = [0.05, 0.001];

/// Two-sided Student t critical values for df = 1..=30.
const T_CRIT_05: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];
const T_CRIT_001: [f64; 30] = [
    636.619, 31.599, 12.924, 8.610, 6.869, 5.959, 5.408, 5.041, 4.781, 4.587, 4.437, 4.318, 4.221,
    4.140, 4.073, 4.015, 3.965, 3.922, 3.883, 3.850, 3.819, 3.792, 3.768, 3.745, 3.725, 3.707,
    3.690, 3.674, 3.659, 3.646,
];
/// Two-sided standard normal quantiles.
const Z_05: f64 = 1.959964;
const Z_001: f64 = 3.290527;

/// Upper-tail chi-square critical values for df = 1..=30.
const CHI2_CRIT_05: [f64; 30] = [
    3.841, 5.991, 7.815, 9.488, 11.070, 12.592, 14.067, 15.507, 16.919, 18.307, 19.675, 21.026,
    22.362, 23.685, 24.996, 26.296, 27.587, 28.869, 30.144, 31.410, 32.671, 33.924, 35.172, 36.415,
    37.652, 38.885, 40.113, 41.337, 42.557, 43.773,
];
const CHI2_CRIT_001: [f64; 30] = [
    10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124, 27.877, 29.588, 31.264, 32.909,
    34.528, 36.123, 37.697, 39.252, 40.790, 42.312, 43.820, 45.315, 46.797, 48.268, 49.728, 51.179,
    52.620, 54.052, 55.476, 56.892, 58.301, 59.703,
];
/// One-sided standard normal quantiles for the upper tail.
const Z_UPPER_05: f64 = 1.644854;
const Z_UPPER_001: f64 = 3.090232;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("friedman test needs at least 2 datasets and 2 methods, got {rows}x{cols}")]
    Dimensions { rows: usize, cols: usize },
    #[error("row {0} has a different number of methods")]
    Ragged(usize),
}

/// Two-sided critical value of Student's t.
pub fn t_critical(df: usize, alpha: f64) -> f64 {
    let (table, z) = if alpha == 0.05 {
        (&T_CRIT_05, Z_05)
    } else if alpha == 0.001 {
        (&T_CRIT_001, Z_001)
    } else {
        panic!("no table for alpha {alpha}")
    };
    if (1..=30).contains(&df) {
        table[df - 1]
    } else {
        z
    }
}

/// Upper-tail critical value of chi-square; Wilson–Hilferty beyond df 30.
pub fn chi2_critical(df: usize, alpha: f64) -> f64 {
    let (table, z) = if alpha == 0.05 {
        (&CHI2_CRIT_05, Z_UPPER_05)
    } else if alpha == 0.001 {
        (&CHI2_CRIT_001, Z_UPPER_001)
    } else {
        panic!("no table for alpha {alpha}")
    };
    if (1..=30).contains(&df) {
        table[df - 1]
    } else {
        let k = df as f64;
        let c = 2.0 / (9.0 * k);
        k * (1.0 - c + z * c.sqrt()).powi(3)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    /// `None` when the differences have zero variance.
    pub t: Option<f64>,
    pub mean_diff: f64,
    pub df: usize,
    pub significant_at: Vec<f64>,
    /// Zero-variance differences with a nonzero mean, counted as significant.
    pub degenerate: bool,
}

impl TTest {
    pub fn no_difference(&self) -> bool {
        self.t.is_none() && !self.degenerate
    }

    pub fn significant(&self, alpha: f64) -> bool {
        self.significant_at.contains(&alpha)
    }
}

/// Paired t-test on `a[i] - b[i]`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::TooFewPairs(n));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if var == 0.0 {
        let degenerate = mean != 0.0;
        return Ok(TTest {
            t: None,
            mean_diff: mean,
            df,
            significant_at: if degenerate {
                ALPHAS.to_vec()
            } else {
                Vec::new()
            },
            degenerate,
        });
    }
    let t = mean / (var / n as f64).sqrt();
    Ok(TTest {
        t: Some(t),
        mean_diff: mean,
        df,
        significant_at: ALPHAS
            .into_iter()
            .filter(|&alpha| t.abs() > t_critical(df, alpha))
            .collect(),
        degenerate: false,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FriedmanTest {
    pub statistic: f64,
    pub df: usize,
    /// Mean rank of each method; rank 1 is the highest accuracy.
    pub mean_ranks: Vec<f64>,
    pub significant_at: Vec<f64>,
}

/// Ranks of `row` in descending order, ties sharing their average rank.
pub fn average_ranks(row: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&i, &j| row[j].total_cmp(&row[i]));
    let mut ranks = vec![0.0; row.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && row[order[end]] == row[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Friedman test over a datasets × methods accuracy matrix.
pub fn friedman_test(accuracies: &[Vec<f64>]) -> Result<FriedmanTest, StatsError> {
    let n = accuracies.len();
    let k = accuracies.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(StatsError::Dimensions { rows: n, cols: k });
    }
    if let Some(i) = accuracies.iter().position(|r| r.len() != k) {
        return Err(StatsError::Ragged(i));
    }
    let mut mean_ranks = vec![0.0; k];
    for row in accuracies {
        for (j, r) in average_ranks(row).into_iter().enumerate() {
            mean_ranks[j] += r / n as f64;
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    let centre = (kf + 1.0) / 2.0;
    let statistic = 12.0 * nf / (kf * (kf + 1.0))
        * mean_ranks.iter().map(|r| (r - centre).powi(2)).sum::<f64>();
    let df = k - 1;
    Ok(FriedmanTest {
        statistic,
        df,
        significant_at: ALPHAS
            .into_iter()
            .filter(|&alpha| statistic > chi2_critical(df, alpha))
            .collect(),
        mean_ranks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

    #[test]
    fn t_table_matches_distribution() {
        for df in 1..=30 {
            let d = StudentsT::new(0.0, 1.0, df as f64).unwrap();
            for alpha in ALPHAS {
                let exact = d.inverse_cdf(1.0 - alpha / 2.0);
                assert!(
                    (t_critical(df, alpha) - exact).abs() < 1e-3,
                    "df {df} alpha {alpha}"
                );
            }
        }
    }

    #[test]
    fn chi2_table_matches_distribution() {
        for df in 1..=40 {
            let d = ChiSquared::new(df as f64).unwrap();
            for alpha in ALPHAS {
                let exact = d.inverse_cdf(1.0 - alpha);
                let tol = if df <= 30 { 1e-3 } else { 0.005 * exact };
                assert!(
                    (chi2_critical(df, alpha) - exact).abs() < tol,
                    "df {df} alpha {alpha}"
                );
            }
        }
    }

    #[test]
    fn equal_samples_show_no_difference() {
        let t = paired_t_test(&[0.5, 0.7, 0.9], &[0.5, 0.7, 0.9]).unwrap();
        assert!(t.no_difference());
        assert!(t.significant_at.is_empty());
    }

    #[test]
    fn constant_shift_is_degenerate_and_significant() {
        let t = paired_t_test(&[2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.t, None);
        assert!(t.significant(0.05) && t.significant(0.001));
    }

    #[test]
    fn five_pairs_match_formula() {
        let a = [0.81, 0.77, 0.90, 0.62, 0.70];
        let b = [0.75, 0.78, 0.81, 0.60, 0.61];
        // d = [0.06, -0.01, 0.09, 0.02, 0.09]
        let d = [0.06f64, -0.01, 0.09, 0.02, 0.09];
        let mean = d.iter().sum::<f64>() / 5.0;
        let sd = (d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0).sqrt();
        let expected = mean / (sd / 5f64.sqrt());
        let t = paired_t_test(&a, &b).unwrap();
        assert!((t.t.unwrap() - expected).abs() < 1e-9);
        assert_eq!(t.df, 4);
        assert!(expected < t_critical(4, 0.05));
        assert!(t.significant_at.is_empty());
    }

    #[test]
    fn t_test_errors() {
        assert_eq!(
            paired_t_test(&[1.0], &[1.0, 2.0]),
            Err(StatsError::LengthMismatch(1, 2))
        );
        assert_eq!(
            paired_t_test(&[1.0], &[1.0]),
            Err(StatsError::TooFewPairs(1))
        );
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(
            average_ranks(&[0.5, 0.9, 0.5, 0.1]),
            vec![2.5, 1.0, 2.5, 4.0]
        );
    }

    #[test]
    fn friedman_special_cases() {
        let same = vec![vec![0.7, 0.7, 0.7]; 4];
        assert_eq!(friedman_test(&same).unwrap().statistic, 0.0);
        let unanimous: Vec<Vec<f64>> = (0..6).map(|i| vec![0.9, 0.5 + i as f64 * 0.01]).collect();
        assert!((friedman_test(&unanimous).unwrap().statistic - 6.0).abs() < 1e-12);
        assert!(friedman_test(&[vec![1.0, 2.0]]).is_err());
        assert_eq!(
            friedman_test(&[vec![1.0, 2.0], vec![1.0]]),
            Err(StatsError::Ragged(1))
        );
    }

    #[test]
    fn friedman_row_order_invariant() {
        let m = vec![
            vec![0.9, 0.8, 0.7],
            vec![0.6, 0.8, 0.7],
            vec![0.5, 0.5, 0.9],
        ];
        let mut r = m.clone();
        r.reverse();
        let (a, b) = (friedman_test(&m).unwrap(), friedman_test(&r).unwrap());
        assert!((a.statistic - b.statistic).abs() < 1e-12);
    }
}
