//! Association and effect-size analyses: Cramér's V over a category-by-frame
//! contingency table, and one-way ANOVA eta squared with an F-distribution
//! p-value computed via the continued-fraction incomplete beta.

use std::collections::BTreeMap;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::frame::FrameLabel;

/// Category-by-frame count table.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    /// Row-major counts.
    counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn new(row_labels: Vec<String>, col_labels: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != row_labels.len() * col_labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} cells, got {}",
                row_labels.len() * col_labels.len(),
                counts.len()
            )));
        }
        if counts.iter().sum::<u64>() == 0 {
            return Err(Error::DegenerateTable);
        }
        Ok(Self {
            row_labels,
            col_labels,
            counts,
        })
    }

    /// Convenience constructor from unlabeled rows.
    pub fn from_counts(rows: &[Vec<u64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(
            (0..n_rows).map(|i| format!("r{i}")).collect(),
            (0..n_cols).map(|j| format!("c{j}")).collect(),
            rows.iter().flatten().copied().collect(),
        )
    }

    /// Categories (rows, sorted) against frames (columns, canonical order),
    /// counted over all articles.
    pub fn from_corpus(corpus: &Corpus) -> Result<Self> {
        let mut categories: Vec<String> = corpus
            .articles()
            .iter()
            .map(|a| a.category.clone())
            .collect();
        categories.sort();
        categories.dedup();
        let cat_index: BTreeMap<&str, usize> = categories
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();

        let frames: Vec<FrameLabel> = FrameLabel::ALL
            .iter()
            .copied()
            .filter(|f| corpus.articles().iter().any(|a| a.frame == *f))
            .collect();
        let frame_index: BTreeMap<FrameLabel, usize> =
            frames.iter().enumerate().map(|(i, &f)| (f, i)).collect();

        let mut counts = vec![0u64; categories.len() * frames.len()];
        for article in corpus.articles() {
            let r = cat_index[article.category.as_str()];
            let c = frame_index[&article.frame];
            counts[r * frames.len() + c] += 1;
        }
        Self::new(
            categories,
            frames.iter().map(|f| f.as_str().to_string()).collect(),
            counts,
        )
    }

    pub fn n_rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn cell(&self, r: usize, c: usize) -> u64 {
        self.counts[r * self.n_cols() + c]
    }

    /// Drops rows and columns whose marginal is zero.
    fn pruned(&self) -> (Vec<usize>, Vec<usize>) {
        let rows: Vec<usize> = (0..self.n_rows())
            .filter(|&r| (0..self.n_cols()).any(|c| self.cell(r, c) > 0))
            .collect();
        let cols: Vec<usize> = (0..self.n_cols())
            .filter(|&c| (0..self.n_rows()).any(|r| self.cell(r, c) > 0))
            .collect();
        (rows, cols)
    }
}

/// Pearson chi-squared statistic against independence, over rows and columns
/// with nonzero marginals.
pub fn chi_squared(table: &ContingencyTable) -> Result<f64> {
    let (rows, cols) = table.pruned();
    if rows.len() < 2 || cols.len() < 2 {
        return Err(Error::DegenerateTable);
    }
    let n = table.total() as f64;
    let row_sums: Vec<f64> = rows
        .iter()
        .map(|&r| cols.iter().map(|&c| table.cell(r, c) as f64).sum())
        .collect();
    let col_sums: Vec<f64> = cols
        .iter()
        .map(|&c| rows.iter().map(|&r| table.cell(r, c) as f64).sum())
        .collect();
    let mut chi2 = 0.0;
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            let expected = row_sums[i] * col_sums[j] / n;
            let observed = table.cell(r, c) as f64;
            chi2 += (observed - expected) * (observed - expected) / expected;
        }
    }
    Ok(chi2)
}

/// `sqrt(chi2 / (n * (min(r, c) - 1)))` without bias correction.
pub fn cramers_v(table: &ContingencyTable) -> Result<f64> {
    let (rows, cols) = table.pruned();
    if rows.len() < 2 || cols.len() < 2 {
        return Err(Error::DegenerateTable);
    }
    let chi2 = chi_squared(table)?;
    let n = table.total() as f64;
    let min_dim = rows.len().min(cols.len()) as f64;
    Ok((chi2 / (n * (min_dim - 1.0))).sqrt().min(1.0))
}

/// One-way ANOVA effect size and p-value: `eta2 = SS_between / SS_total`,
/// p from the F distribution. Needs at least two groups, every group
/// non-empty, and at least one group with two observations.
pub fn anova_eta_squared(groups: &[Vec<f64>]) -> Result<(f64, f64)> {
    if groups.len() < 2 {
        return Err(Error::Invalid("anova needs at least 2 groups".into()));
    }
    if groups.iter().any(Vec::is_empty) {
        return Err(Error::EmptyInput("anova group"));
    }
    if !groups.iter().any(|g| g.len() >= 2) {
        return Err(Error::Invalid(
            "anova needs at least one group with 2 observations".into(),
        ));
    }

    let n_total: usize = groups.iter().map(Vec::len).sum();
    let grand_mean: f64 = groups.iter().flatten().sum::<f64>() / n_total as f64;

    let ss_between: f64 = groups
        .iter()
        .map(|g| {
            let mean = g.iter().sum::<f64>() / g.len() as f64;
            g.len() as f64 * (mean - grand_mean) * (mean - grand_mean)
        })
        .sum();
    let ss_total: f64 = groups
        .iter()
        .flatten()
        .map(|&x| (x - grand_mean) * (x - grand_mean))
        .sum();
    if ss_total == 0.0 {
        return Err(Error::ZeroVariance);
    }

    let eta2 = (ss_between / ss_total).clamp(0.0, 1.0);
    let ss_within = (ss_total - ss_between).max(0.0);
    let df_between = (groups.len() - 1) as f64;
    let df_within = (n_total - groups.len()) as f64;

    let p_value = if ss_within == 0.0 {
        0.0
    } else {
        let f = (ss_between / df_between) / (ss_within / df_within);
        1.0 - f_cdf(f, df_between, df_within)
    };
    Ok((eta2, p_value))
}

/// CDF of the F distribution via the regularized incomplete beta.
fn f_cdf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    let x = d1 * f / (d1 * f + d2);
    incomplete_beta(0.5 * d1, 0.5 * d2, x)
}

/// Lanczos approximation of ln Gamma.
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 14] = [
        57.156_235_665_862_92,
        -59.597_960_355_475_49,
        14.136_097_974_741_746,
        -0.491_913_816_097_620_2,
        3.399_464_998_481_189e-5,
        4.652_362_892_704_858e-5,
        -9.837_447_530_487_956e-5,
        1.580_887_032_249_125e-4,
        -2.102_644_417_241_049e-4,
        2.174_396_181_152_126e-4,
        -1.643_181_065_367_639e-4,
        8.441_822_398_385_275e-5,
        -2.619_083_840_158_341e-5,
        3.689_918_265_953_162e-6,
    ];
    let mut y = x;
    let tmp = x + 5.242_187_5;
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut series = 0.999_999_999_999_997_1;
    for &coeff in &COEFFS {
        y += 1.0;
        series += coeff / y;
    }
    tmp + (2.506_628_274_631_000_5 * series / x).ln()
}

/// Regularized incomplete beta I_x(a, b) via the modified Lentz continued
/// fraction, accurate to roughly 1e-14.
fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 400;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;

    for m in 1..=MAX_ITER {
        let m_f = m as f64;
        let m2 = 2.0 * m_f;
        // Even step.
        let aa = m_f * (b - m_f) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // Odd step.
        let aa = -(a + m_f) * (qab + m_f) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Output of the per-corpus statistical analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub cramers_v: f64,
    pub eta_squared: f64,
    pub p_value: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    pub n_articles: usize,
    /// "signed" or "absolute" sentiment grouping for the ANOVA.
    pub sentiment_basis: &'static str,
}

impl StatsReport {
    pub fn to_json(&self) -> String {
        format!(
            "{{\"cramers_v\": {:.3}, \"eta_squared\": {:.3}, \"p_value\": {:.6}, \
             \"table_rows\": {}, \"table_cols\": {}, \"n_articles\": {}, \
             \"sentiment_basis\": \"{}\"}}",
            self.cramers_v,
            self.eta_squared,
            self.p_value,
            self.n_rows,
            self.n_cols,
            self.n_articles,
            self.sentiment_basis
        )
    }
}

/// Cramér's V between category and frame, plus the sentiment-by-frame ANOVA.
/// `signed_sentiment` selects signed polarity (default) or absolute values.
pub fn corpus_stats(corpus: &Corpus, signed_sentiment: bool) -> Result<StatsReport> {
    let table = ContingencyTable::from_corpus(corpus)?;
    let v = cramers_v(&table)?;

    let mut by_frame: BTreeMap<FrameLabel, Vec<f64>> = BTreeMap::new();
    for article in corpus.articles() {
        let value = if signed_sentiment {
            article.sentiment
        } else {
            article.sentiment.abs()
        };
        by_frame.entry(article.frame).or_default().push(value);
    }
    let groups: Vec<Vec<f64>> = by_frame.into_values().collect();
    let (eta2, p) = anova_eta_squared(&groups)?;

    Ok(StatsReport {
        cramers_v: v,
        eta_squared: eta2,
        p_value: p,
        n_rows: table.n_rows(),
        n_cols: table.n_cols(),
        n_articles: corpus.articles().len(),
        sentiment_basis: if signed_sentiment {
            "signed"
        } else {
            "absolute"
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cramers_v_perfect_association() {
        let table = ContingencyTable::from_counts(&[vec![10, 0], vec![0, 10]]).unwrap();
        assert_eq!(cramers_v(&table).unwrap(), 1.0);
    }

    #[test]
    fn cramers_v_exact_independence() {
        let table = ContingencyTable::from_counts(&[vec![5, 5], vec![5, 5]]).unwrap();
        assert_eq!(cramers_v(&table).unwrap(), 0.0);
    }

    #[test]
    fn cramers_v_hand_computed_fixture() {
        // [[20,5],[5,20]]: chi2 = 4 * 7.5^2 / 12.5 = 18; V = sqrt(18/50) = 0.6.
        let table = ContingencyTable::from_counts(&[vec![20, 5], vec![5, 20]]).unwrap();
        assert!((chi_squared(&table).unwrap() - 18.0).abs() < 1e-12);
        assert!((cramers_v(&table).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn cramers_v_degenerate_table_errors() {
        let table = ContingencyTable::from_counts(&[vec![3, 4], vec![0, 0]]).unwrap();
        assert!(matches!(cramers_v(&table), Err(Error::DegenerateTable)));
        let table = ContingencyTable::from_counts(&[vec![3, 0], vec![4, 0]]).unwrap();
        assert!(matches!(cramers_v(&table), Err(Error::DegenerateTable)));
    }

    #[test]
    fn eta_squared_equal_means_is_zero() {
        let groups = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
        let (eta2, p) = anova_eta_squared(&groups).unwrap();
        assert!(eta2.abs() < 1e-12);
        assert!(p > 0.9);
    }

    #[test]
    fn eta_squared_hand_computed_fixture() {
        // {1,2} vs {3,4}: SS_between 4, SS_total 5.
        let groups = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let (eta2, p) = anova_eta_squared(&groups).unwrap();
        assert_eq!(eta2, 0.8);
        // F = 8 with df (1, 2): p = 1 - sqrt(0.8).
        assert!((p - (1.0 - 0.8f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn eta_squared_zero_within_variance_is_one() {
        let groups = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let (eta2, p) = anova_eta_squared(&groups).unwrap();
        assert_eq!(eta2, 1.0);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn eta_squared_zero_total_variance_errors() {
        let groups = vec![vec![2.0, 2.0], vec![2.0, 2.0]];
        assert!(matches!(
            anova_eta_squared(&groups),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn incomplete_beta_known_values() {
        // I_x(0.5, 1) = sqrt(x).
        assert!((incomplete_beta(0.5, 1.0, 0.8) - 0.8f64.sqrt()).abs() < 1e-12);
        // I_x(1, 1) = x.
        assert!((incomplete_beta(1.0, 1.0, 0.37) - 0.37).abs() < 1e-12);
        // I_x(2, 2) = 3x^2 - 2x^3.
        let x = 0.63;
        let expected = 3.0 * x * x - 2.0 * x * x * x;
        assert!((incomplete_beta(2.0, 2.0, x) - expected).abs() < 1e-12);
    }

    #[test]
    fn f_cdf_is_monotone_and_bounded() {
        let mut last = 0.0;
        for i in 1..50 {
            let f = i as f64 * 0.5;
            let cdf = f_cdf(f, 3.0, 12.0);
            assert!((0.0..=1.0).contains(&cdf));
            assert!(cdf >= last);
            last = cdf;
        }
    }

    /// Literal double-loop chi-squared used as an oracle.
    fn chi_squared_oracle(rows: &[Vec<u64>]) -> f64 {
        let n_rows = rows.len();
        let n_cols = rows[0].len();
        let n: f64 = rows.iter().flatten().map(|&c| c as f64).sum();
        let mut chi2 = 0.0;
        for i in 0..n_rows {
            for j in 0..n_cols {
                let row_sum: f64 = rows[i].iter().map(|&c| c as f64).sum();
                let col_sum: f64 = rows.iter().map(|r| r[j] as f64).sum();
                let e = row_sum * col_sum / n;
                if e > 0.0 {
                    let o = rows[i][j] as f64;
                    chi2 += (o - e) * (o - e) / e;
                }
            }
        }
        chi2
    }

    proptest! {
        #[test]
        fn chi_squared_matches_literal_double_loop(
            rows in proptest::collection::vec(
                proptest::collection::vec(1u64..30, 3),
                2..5,
            ),
        ) {
            let table = ContingencyTable::from_counts(&rows).unwrap();
            let fast = chi_squared(&table).unwrap();
            let slow = chi_squared_oracle(&rows);
            prop_assert!((fast - slow).abs() < 1e-9);
        }

        #[test]
        fn cramers_v_bounds_and_invariances(
            rows in proptest::collection::vec(
                proptest::collection::vec(1u64..20, 3),
                2..4,
            ),
            scale in 1u64..5,
        ) {
            let table = ContingencyTable::from_counts(&rows).unwrap();
            let v = cramers_v(&table).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));

            // Row permutation.
            let mut permuted = rows.clone();
            permuted.reverse();
            let v_perm = cramers_v(&ContingencyTable::from_counts(&permuted).unwrap()).unwrap();
            prop_assert!((v - v_perm).abs() < 1e-12);

            // Column permutation.
            let swapped: Vec<Vec<u64>> = rows
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    r.reverse();
                    r
                })
                .collect();
            let v_swap = cramers_v(&ContingencyTable::from_counts(&swapped).unwrap()).unwrap();
            prop_assert!((v - v_swap).abs() < 1e-12);

            // Count scaling.
            let scaled: Vec<Vec<u64>> = rows
                .iter()
                .map(|r| r.iter().map(|&c| c * scale).collect())
                .collect();
            let v_scaled = cramers_v(&ContingencyTable::from_counts(&scaled).unwrap()).unwrap();
            prop_assert!((v - v_scaled).abs() < 1e-9);
        }

        #[test]
        fn eta_squared_bounds_and_invariances(
            a in proptest::collection::vec(-5.0f64..5.0, 2..8),
            b in proptest::collection::vec(-5.0f64..5.0, 2..8),
            shift in -10.0f64..10.0,
            scale in 0.1f64..10.0,
        ) {
            let groups = vec![a.clone(), b.clone()];
            match anova_eta_squared(&groups) {
                Ok((eta2, p)) => {
                    prop_assert!((0.0..=1.0).contains(&eta2));
                    prop_assert!((0.0..=1.0).contains(&p));

                    let shifted: Vec<Vec<f64>> = groups
                        .iter()
                        .map(|g| g.iter().map(|x| x + shift).collect())
                        .collect();
                    let (eta_shift, _) = anova_eta_squared(&shifted).unwrap();
                    prop_assert!((eta2 - eta_shift).abs() < 1e-6);

                    let scaled: Vec<Vec<f64>> = groups
                        .iter()
                        .map(|g| g.iter().map(|x| x * scale).collect())
                        .collect();
                    let (eta_scale, _) = anova_eta_squared(&scaled).unwrap();
                    prop_assert!((eta2 - eta_scale).abs() < 1e-6);
                }
                Err(Error::ZeroVariance) => {}
                Err(e) => prop_assert!(false, "unexpected error {:?}", e),
            }
        }
    }

    #[test]
    fn corpus_stats_runs_on_synthetic_data() {
        use crate::corpus::{synthesize_corpus, SynthSpec};
        let corpus = synthesize_corpus(&SynthSpec::desk_scale(6), 5).unwrap();
        let report = corpus_stats(&corpus, true).unwrap();
        assert!((0.0..=1.0).contains(&report.cramers_v));
        assert!((0.0..=1.0).contains(&report.eta_squared));
        assert!((0.0..=1.0).contains(&report.p_value));
        // Home categories plus flips give a real association.
        assert!(report.cramers_v > 0.2, "V = {}", report.cramers_v);
        // Distinct per-frame sentiment means give a real effect.
        assert!(report.eta_squared > 0.1, "eta2 = {}", report.eta_squared);
        let json = report.to_json();
        assert!(json.starts_with('{') && json.ends_with('}'));
    }
}
