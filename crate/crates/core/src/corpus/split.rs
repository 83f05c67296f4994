use std::collections::BTreeSet;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::window::Window;
use crate::error::{Error, Result};

/// Leave-days-out partition of the observed days.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_days: BTreeSet<NaiveDate>,
    pub test_days: BTreeSet<NaiveDate>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn is_train(&self, window: &Window) -> bool {
        self.train_days.contains(&window.day_key)
    }

    /// Splits windows into (train, test) by each window's start day.
    pub fn partition<'a>(&self, windows: &'a [Window]) -> (Vec<&'a Window>, Vec<&'a Window>) {
        windows.iter().partition(|w| self.is_train(w))
    }
}

/// Picks `round(train_ratio * days)` days at random for training, the rest for testing.
///
/// Both partitions keep at least one day.
pub fn split_by_days(windows: &[Window], train_ratio: f64, seed: u64) -> Result<SplitPlan> {
    if windows.is_empty() {
        return Err(Error::invalid("cannot split zero windows"));
    }
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::invalid(format!(
            "train ratio must lie in (0, 1), got {train_ratio}"
        )));
    }
    let days: BTreeSet<NaiveDate> = windows.iter().map(|w| w.day_key).collect();
    if days.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 distinct days to split, found {}",
            days.len()
        )));
    }
    let mut order: Vec<NaiveDate> = days.into_iter().collect();
    let n_train = ((train_ratio * order.len() as f64).round() as usize).clamp(1, order.len() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let test_days = order.split_off(n_train).into_iter().collect();
    Ok(SplitPlan {
        train_days: order.into_iter().collect(),
        test_days,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn windows_over_days(days: u32, per_day: usize) -> Vec<Window> {
        let mut out = Vec::new();
        for d in 0..days {
            for _ in 0..per_day {
                let id = out.len();
                out.push(Window {
                    window_id: id,
                    day_key: NaiveDate::from_ymd_opt(2010, 1, 1 + d).unwrap(),
                    start_event_index: id,
                    end_event_index: id,
                    token_ids: vec![4],
                });
            }
        }
        out
    }

    #[test]
    fn ten_days_split_eight_two() {
        let plan = split_by_days(&windows_over_days(10, 3), 0.8, 7).unwrap();
        assert_eq!(plan.train_days.len(), 8);
        assert_eq!(plan.test_days.len(), 2);
    }

    #[test]
    fn single_day_rejected() {
        assert!(split_by_days(&windows_over_days(1, 5), 0.8, 0).is_err());
        assert!(split_by_days(&windows_over_days(3, 5), 1.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn partition_is_disjoint_and_complete(days in 2u32..28, per_day in 1usize..5, seed in any::<u64>(), ratio in 0.05f64..0.95) {
            let windows = windows_over_days(days, per_day);
            let plan = split_by_days(&windows, ratio, seed).unwrap();
            prop_assert!(plan.train_days.is_disjoint(&plan.test_days));
            prop_assert_eq!(plan.train_days.len() + plan.test_days.len(), days as usize);
            let (train, test) = plan.partition(&windows);
            prop_assert_eq!(train.len() + test.len(), windows.len());
            for w in &train { prop_assert!(plan.train_days.contains(&w.day_key)); }
            for w in &test { prop_assert!(plan.test_days.contains(&w.day_key)); }
        }
    }
}
