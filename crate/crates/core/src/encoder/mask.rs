use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CLS_ID, MASK_ID, PAD_ID};
use crate::error::{Error, Result};

/// One masked training sequence with `[CLS]` prepended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedSequence {
    pub input_ids: Vec<u32>,
    /// Masked positions in `input_ids`, ascending. Never 0.
    pub positions: Vec<usize>,
    /// Original token at each masked position.
    pub targets: Vec<u32>,
}

/// Number of positions masked in a window of `l` tokens.
pub fn mask_count(l: usize, p: f64) -> usize {
    (p * l as f64).floor() as usize
}

/// Prepends `[CLS]` and replaces exactly `floor(p * l)` distinct non-pad tokens with `[MASK]`.
pub fn apply_mask(token_ids: &[u32], p: f64, seed: u64) -> Result<MaskedSequence> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("mask fraction must lie in (0, 1), got {p}")));
    }
    let eligible: Vec<usize> = token_ids
        .iter()
        .enumerate()
        .filter(|&(_, &id)| id != PAD_ID)
        .map(|(i, _)| i + 1)
        .collect();
    let count = mask_count(eligible.len(), p);
    if count == 0 {
        return Err(Error::invalid(format!(
            "floor({p} x {}) = 0 masked positions; training signal would be empty",
            eligible.len()
        )));
    }
    let mut input_ids = Vec::with_capacity(token_ids.len() + 1);
    input_ids.push(CLS_ID);
    input_ids.extend_from_slice(token_ids);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions: Vec<usize> = index::sample(&mut rng, eligible.len(), count)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    positions.sort_unstable();
    let targets = positions.iter().map(|&pos| input_ids[pos]).collect();
    for &pos in &positions {
        input_ids[pos] = MASK_ID;
    }
    Ok(MaskedSequence {
        input_ids,
        positions,
        targets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn twenty_tokens_mask_three() {
        let window: Vec<u32> = (4..24).collect();
        let m = apply_mask(&window, 0.15, 9).unwrap();
        assert_eq!(m.positions.len(), 3);
        assert_eq!(m.input_ids[0], CLS_ID);
        for (&pos, &target) in m.positions.iter().zip(&m.targets) {
            assert_eq!(m.input_ids[pos], MASK_ID);
            assert_eq!(target, window[pos - 1]);
        }
    }

    #[test]
    fn degenerate_fraction_rejected() {
        let window: Vec<u32> = (4..24).collect();
        assert!(apply_mask(&window, 0.04, 0).is_err());
    }

    #[test]
    fn same_seed_same_mask() {
        let window: Vec<u32> = (4..24).collect();
        assert_eq!(apply_mask(&window, 0.15, 1).unwrap(), apply_mask(&window, 0.15, 1).unwrap());
    }

    proptest! {
        #[test]
        fn never_masks_cls_or_pad(tokens in proptest::collection::vec(0u32..9, 1..30), p in 0.05f64..0.95, seed in any::<u64>()) {
            let non_pad = tokens.iter().filter(|&&t| t != PAD_ID).count();
            match apply_mask(&tokens, p, seed) {
                Ok(m) => {
                    prop_assert_eq!(m.positions.len(), mask_count(non_pad, p));
                    for &pos in &m.positions {
                        prop_assert!(pos >= 1);
                        prop_assert_ne!(tokens[pos - 1], PAD_ID);
                    }
                    let mut dedup = m.positions.clone();
                    dedup.dedup();
                    prop_assert_eq!(dedup.len(), m.positions.len());
                }
                Err(_) => prop_assert_eq!(mask_count(non_pad, p), 0),
            }
        }
    }
}
