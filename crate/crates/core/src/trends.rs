//! Label-share comparison between two date ranges.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodDistribution {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub total: usize,
    /// Fraction of the period's windows per label.
    pub shares: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDelta {
    pub label: String,
    pub share1: f64,
    pub share2: f64,
    /// `(share2 - share1) * 100`
    pub delta_pp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendDelta {
    pub period1: (NaiveDate, NaiveDate),
    pub period2: (NaiveDate, NaiveDate),
    /// Sorted by absolute change, largest first; ties by label.
    pub deltas: Vec<LabelDelta>,
}

/// Share of each label among windows whose day falls in `[start, end]`.
pub fn period_distribution<S: AsRef<str>>(
    labeled: &[(NaiveDate, S)],
    start: NaiveDate,
    end: NaiveDate,
) -> Result<PeriodDistribution> {
    if start > end {
        return Err(Error::invalid(format!("period start {start} is after end {end}")));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0;
    for (day, label) in labeled {
        if (start..=end).contains(day) {
            *counts.entry(label.as_ref().to_string()).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::invalid(format!("no windows between {start} and {end}")));
    }
    let shares = counts
        .into_iter()
        .map(|(l, c)| (l, c as f64 / total as f64))
        .collect();
    Ok(PeriodDistribution {
        start,
        end,
        total,
        shares,
    })
}

/// Percentage-point change per label; labels missing from a period count as share 0.
pub fn compare_periods(d1: &PeriodDistribution, d2: &PeriodDistribution) -> TrendDelta {
    let labels: BTreeSet<&String> = d1.shares.keys().chain(d2.shares.keys()).collect();
    let mut deltas: Vec<LabelDelta> = labels
        .into_iter()
        .map(|l| {
            let share1 = d1.shares.get(l).copied().unwrap_or(0.0);
            let share2 = d2.shares.get(l).copied().unwrap_or(0.0);
            LabelDelta {
                label: l.clone(),
                share1,
                share2,
                delta_pp: (share2 - share1) * 100.0,
            }
        })
        .collect();
    deltas.sort_by(|a, b| {
        b.delta_pp
            .abs()
            .total_cmp(&a.delta_pp.abs())
            .then_with(|| a.label.cmp(&b.label))
    });
    TrendDelta {
        period1: (d1.start, d1.end),
        period2: (d2.start, d2.end),
        deltas,
    }
}

/// Plot data: `label,share1,share2,delta_pp` in report order.
pub fn write_trend_csv<W: Write>(writer: W, delta: &TrendDelta) -> Result<()> {
    let err = |e: csv::Error| Error::Format {
        what: "trend CSV",
        detail: e.to_string(),
    };
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["label", "share1", "share2", "delta_pp"]).map_err(err)?;
    for d in &delta.deltas {
        out.write_record([
            d.label.clone(),
            format!("{:.6}", d.share1),
            format!("{:.6}", d.share2),
            format!("{:.4}", d.delta_pp),
        ])
        .map_err(err)?;
    }
    out.flush().map_err(|e| Error::Format {
        what: "trend CSV",
        detail: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2009, 11, d).unwrap()
    }

    #[test]
    fn shares_from_counts() {
        let w = [(day(1), "A"), (day(1), "A"), (day(2), "B"), (day(9), "C")];
        let d = period_distribution(&w, day(1), day(3)).unwrap();
        assert_eq!(d.total, 3);
        assert!((d.shares["A"] - 2.0 / 3.0).abs() < 1e-12);
        assert!((d.shares["B"] - 1.0 / 3.0).abs() < 1e-12);
        assert!(period_distribution(&w, day(4), day(8)).is_err());
        assert!(period_distribution(&w, day(3), day(1)).is_err());
    }

    #[test]
    fn deltas_in_percentage_points() {
        let d1 = period_distribution(&[(day(1), "A")], day(1), day(1)).unwrap();
        let d2 = period_distribution(
            &[(day(2), "A"), (day(2), "A"), (day(2), "B"), (day(2), "B"), (day(2), "B")],
            day(2),
            day(2),
        )
        .unwrap();
        let t = compare_periods(&d1, &d2);
        assert_eq!(t.deltas.len(), 2);
        let get = |l: &str| t.deltas.iter().find(|d| d.label == l).unwrap().delta_pp;
        assert!((get("A") + 60.0).abs() < 1e-9);
        assert!((get("B") - 60.0).abs() < 1e-9);
        assert!(compare_periods(&d1, &d1).deltas.iter().all(|d| d.delta_pp == 0.0));
    }

    #[test]
    fn csv_rows() {
        let d1 = period_distribution(&[(day(1), "A")], day(1), day(1)).unwrap();
        let d2 = period_distribution(&[(day(2), "B")], day(2), day(2)).unwrap();
        let mut buf = Vec::new();
        write_trend_csv(&mut buf, &compare_periods(&d1, &d2)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("label,share1,share2,delta_pp\nA,1.000000,0.000000,-100.0000"));
    }

    fn labeled() -> impl Strategy<Value = Vec<(u32, u8)>> {
        prop::collection::vec((1u32..=14, 0u8..5), 1..80)
    }

    proptest! {
        #[test]
        fn shares_sum_to_one_and_deltas_cancel(a in labeled(), b in labeled()) {
            let to = |v: &[(u32, u8)]| v.iter().map(|&(d, l)| (day(d), format!("L{l}"))).collect::<Vec<_>>();
            let d1 = period_distribution(&to(&a), day(1), day(14)).unwrap();
            let d2 = period_distribution(&to(&b), day(1), day(14)).unwrap();
            prop_assert!((d1.shares.values().sum::<f64>() - 1.0).abs() < 1e-9);
            let t = compare_periods(&d1, &d2);
            prop_assert!(t.deltas.iter().map(|d| d.delta_pp).sum::<f64>().abs() < 1e-6);
            let back = compare_periods(&d2, &d1);
            for d in &t.deltas {
                let r = back.deltas.iter().find(|x| x.label == d.label).unwrap();
                prop_assert!((d.delta_pp + r.delta_pp).abs() < 1e-12);
            }
        }

        #[test]
        fn order_of_windows_is_irrelevant(a in labeled()) {
            let to = |v: &[(u32, u8)]| v.iter().map(|&(d, l)| (day(d), format!("L{l}"))).collect::<Vec<_>>();
            let mut rev = a.clone();
            rev.reverse();
            prop_assert_eq!(
                period_distribution(&to(&a), day(1), day(14)).unwrap(),
                period_distribution(&to(&rev), day(1), day(14)).unwrap()
            );
        }
    }
}
