//! Inter-rater agreement.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Cohen's kappa over paired ratings: `(p_o - p_e) / (1 - p_e)`.
///
/// When chance agreement is total (`p_e = 1`) the result is 1 if the raters
/// agree everywhere and 0 otherwise.
pub fn cohens_kappa<T: AsRef<str>>(pairs: &[(T, T)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("Cohen's kappa needs at least one rated pair"));
    }
    let n = pairs.len() as f64;
    let mut a_counts: BTreeMap<&str, f64> = BTreeMap::new();
    let mut b_counts: BTreeMap<&str, f64> = BTreeMap::new();
    let mut agree = 0.0;
    for (a, b) in pairs {
        let (a, b) = (a.as_ref(), b.as_ref());
        *a_counts.entry(a).or_default() += 1.0;
        *b_counts.entry(b).or_default() += 1.0;
        if a == b {
            agree += 1.0;
        }
    }
    let p_o = agree / n;
    let p_e: f64 = a_counts
        .iter()
        .map(|(cat, ca)| ca / n * b_counts.get(cat).copied().unwrap_or(0.0) / n)
        .sum();
    if (1.0 - p_e).abs() < 1e-12 {
        return Ok(if p_o == 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Fleiss' kappa over an items × categories count matrix with a fixed number of raters per item.
///
/// When every rating falls in one category the statistic is undefined; 1.0 is
/// returned with a warning.
pub fn fleiss_kappa(counts: &[Vec<usize>]) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::invalid("Fleiss' kappa needs at least one item"));
    }
    let width = counts[0].len();
    if counts.iter().any(|r| r.len() != width) {
        return Err(Error::invalid("count rows differ in length"));
    }
    let raters: usize = counts[0].iter().sum();
    if raters < 2 {
        return Err(Error::invalid("Fleiss' kappa needs at least 2 ratings per item"));
    }
    if let Some(i) = counts.iter().position(|r| r.iter().sum::<usize>() != raters) {
        return Err(Error::invalid(format!(
            "item {i} has a different number of ratings than item 0 ({raters})"
        )));
    }
    let items = counts.len() as f64;
    let n = raters as f64;
    let p_bar = counts
        .iter()
        .map(|row| {
            let sq: f64 = row.iter().map(|&c| (c * c) as f64).sum();
            (sq - n) / (n * (n - 1.0))
        })
        .sum::<f64>()
        / items;
    let p_e: f64 = (0..width)
        .map(|j| {
            let pj = counts.iter().map(|r| r[j] as f64).sum::<f64>() / (items * n);
            pj * pj
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-12 {
        tracing::warn!("all ratings fall in one category; Fleiss' kappa reported as 1.0");
        return Ok(1.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Builds the count matrix from per-item label lists; categories sorted lexicographically.
pub fn rating_counts<T: AsRef<str>>(items: &[Vec<T>]) -> (Vec<String>, Vec<Vec<usize>>) {
    let cats: BTreeSet<&str> = items.iter().flatten().map(AsRef::as_ref).collect();
    let cats: Vec<&str> = cats.into_iter().collect();
    let counts = items
        .iter()
        .map(|labels| {
            let mut row = vec![0; cats.len()];
            for l in labels {
                row[cats.binary_search(&l.as_ref()).unwrap()] += 1;
            }
            row
        })
        .collect();
    (cats.into_iter().map(String::from).collect(), counts)
}
