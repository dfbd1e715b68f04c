//! Small hypothesis tests used by the privacy auditor and the statistical tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of independence on a contingency table.
///
/// Rows or columns whose marginal is zero are dropped; a table with fewer
/// than two live rows or columns carries no evidence of dependence and gets
/// `p = 1`.
pub fn chi_square_independence(table: &[Vec<u64>]) -> TestOutcome {
    let ncols = table.iter().map(|r| r.len()).max().unwrap_or(0);
    let col_tot: Vec<u64> = (0..ncols)
        .map(|j| table.iter().map(|r| r.get(j).copied().unwrap_or(0)).sum())
        .collect();
    let live_cols: Vec<usize> = (0..ncols).filter(|&j| col_tot[j] > 0).collect();
    let rows: Vec<&Vec<u64>> = table
        .iter()
        .filter(|r| {
            live_cols
                .iter()
                .any(|&j| r.get(j).copied().unwrap_or(0) > 0)
        })
        .collect();
    if rows.len() < 2 || live_cols.len() < 2 {
        return TestOutcome {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
        };
    }
    let total: u64 = live_cols.iter().map(|&j| col_tot[j]).sum();
    let mut stat = 0.0;
    for r in &rows {
        let row_tot: u64 = live_cols
            .iter()
            .map(|&j| r.get(j).copied().unwrap_or(0))
            .sum();
        for &j in &live_cols {
            let expected = row_tot as f64 * col_tot[j] as f64 / total as f64;
            let d = r.get(j).copied().unwrap_or(0) as f64 - expected;
            stat += d * d / expected;
        }
    }
    let dof = (rows.len() - 1) * (live_cols.len() - 1);
    let p_value = ChiSquared::new(dof as f64)
        .map(|d| d.sf(stat))
        .unwrap_or(f64::NAN);
    TestOutcome {
        statistic: stat,
        dof,
        p_value,
    }
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestOutcome {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = (n as f64 * m as f64 / (n + m) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    TestOutcome {
        statistic: d,
        dof: 0,
        p_value: kolmogorov_q(lambda),
    }
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_table_has_large_p() {
        let t = vec![vec![500, 500], vec![500, 500]];
        let out = chi_square_independence(&t);
        assert_eq!(out.statistic, 0.0);
        assert!((out.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfectly_dependent_table_has_tiny_p() {
        let t = vec![vec![1000, 0], vec![0, 1000]];
        assert!(chi_square_independence(&t).p_value < 1e-100);
    }

    #[test]
    fn constant_feature_is_uninformative() {
        let t = vec![vec![700, 300], vec![0, 0]];
        assert_eq!(chi_square_independence(&t).p_value, 1.0);
    }

    #[test]
    fn chi_square_two_by_two_statistic() {
        // expected 50 everywhere: (10^2/50)*4 = 8
        let t = vec![vec![60, 40], vec![40, 60]];
        let out = chi_square_independence(&t);
        assert!((out.statistic - 8.0).abs() < 1e-12);
        assert_eq!(out.dof, 1);
    }

    #[test]
    fn ks_detects_shift() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.3).collect();
        assert!(ks_two_sample(&a, &b).p_value < 1e-10);
        assert!(ks_two_sample(&a, &a).p_value > 0.99);
    }
}
