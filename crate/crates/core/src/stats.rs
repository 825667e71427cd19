//! Small statistical toolkit for the validation battery.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean and its standard error (sample sd / √len).
///
/// A single observation has an undefined standard error; it is reported
/// as zero.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    // offsets from the first value keep a constant sample exact
    let shift = xs[0];
    let offset = xs.iter().map(|x| x - shift).sum::<f64>() / n as f64;
    if n == 1 {
        return (shift, 0.0);
    }
    let var = xs.iter().map(|x| (x - shift - offset).powi(2)).sum::<f64>() / (n - 1) as f64;
    (shift + offset, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

fn chi_square_sf(stat: f64, dof: f64) -> f64 {
    if dof <= 0.0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(dof).expect("dof > 0").cdf(stat)
}

/// Pearson goodness of fit of `counts` against `probs`.
///
/// Adjacent bins are pooled left to right until each pooled bin has
/// expected count ≥ `min_expected`; a short trailing remainder joins the
/// last pooled bin.
pub fn chi_square_gof(counts: &[u64], probs: &[f64], min_expected: f64) -> TestOutcome {
    assert_eq!(counts.len(), probs.len());
    let total: u64 = counts.iter().sum();
    let total = total as f64;
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        obs += c as f64;
        exp += p * total;
        if exp >= min_expected {
            pooled.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => pooled.push((obs, exp)),
        }
    }
    let statistic: f64 = pooled
        .iter()
        .map(|(o, e)| {
            if *e > 0.0 {
                (o - e) * (o - e) / e
            } else if *o > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .sum();
    let dof = pooled.len() as f64 - 1.0;
    TestOutcome { statistic, dof, p_value: chi_square_sf(statistic, dof) }
}

/// Pearson test of homogeneity for an `r × c` contingency table given as
/// rows. Columns with a zero total are dropped.
pub fn chi_square_homogeneity(rows: &[Vec<u64>]) -> TestOutcome {
    let ncol = rows.first().map_or(0, Vec::len);
    let row_tot: Vec<f64> = rows.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_tot: Vec<f64> = (0..ncol).map(|j| rows.iter().map(|r| r[j]).sum::<u64>() as f64).collect();
    let grand: f64 = row_tot.iter().sum();
    let live_cols: Vec<usize> = (0..ncol).filter(|&j| col_tot[j] > 0.0).collect();
    let live_rows: Vec<usize> = (0..rows.len()).filter(|&i| row_tot[i] > 0.0).collect();
    let mut statistic = 0.0;
    for &i in &live_rows {
        for &j in &live_cols {
            let e = row_tot[i] * col_tot[j] / grand;
            let o = rows[i][j] as f64;
            statistic += (o - e) * (o - e) / e;
        }
    }
    let dof = (live_rows.len().saturating_sub(1) * live_cols.len().saturating_sub(1)) as f64;
    TestOutcome { statistic, dof, p_value: chi_square_sf(statistic, dof) }
}

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // small-x form converges faster here
        let s: f64 = (1..=50)
            .map(|k| {
                let k = (2 * k - 1) as f64;
                (-k * k * std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x)).exp()
            })
            .sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0);
    }
    let s: f64 = (1..=100)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            let k = k as f64;
            sign * (-2.0 * k * k * x * x).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value
/// (Stephens' small-sample correction applied to the effective size).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestOutcome {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    let p_value = kolmogorov_sf((en + 0.12 + 0.11 / en) * d);
    TestOutcome { statistic: d, dof: f64::NAN, p_value }
}
