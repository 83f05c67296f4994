use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::events::SensorEvent;
use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const MASK: &str = "[MASK]";
pub const CLS: &str = "[CLS]";
pub const UNK: &str = "[UNK]";

pub const PAD_ID: u32 = 0;
pub const MASK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;

pub const SPECIAL_TOKENS: [&str; 4] = [PAD, MASK, CLS, UNK];

/// Default width of a temperature bin.
pub const DEFAULT_TEMPERATURE_BIN_WIDTH: f64 = 1.0;

/// Bijective map between sensor tokens and integer ids.
///
/// Special tokens occupy ids 0..4; sensor tokens follow in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyFile", into = "VocabularyFile")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    temperature_bin_width: f64,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    temperature_bin_width: f64,
    tokens: Vec<String>,
}

impl From<VocabularyFile> for Vocabulary {
    fn from(file: VocabularyFile) -> Self {
        Vocabulary::from_tokens(file.tokens, file.temperature_bin_width)
    }
}

impl From<Vocabulary> for VocabularyFile {
    fn from(vocab: Vocabulary) -> Self {
        VocabularyFile {
            temperature_bin_width: vocab.temperature_bin_width,
            tokens: vocab.tokens,
        }
    }
}

/// Floors a numeric reading to a multiple of `bin_width`; non-numeric values pass through.
pub fn discretize_value(value: &str, bin_width: f64) -> String {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() && bin_width > 0.0 => {
            let binned = (v / bin_width).floor() * bin_width;
            let decimals = decimal_places(bin_width);
            let text = format!("{binned:.decimals$}");
            // avoid "-0"
            if binned == 0.0 {
                format!("{:.decimals$}", 0.0)
            } else {
                text
            }
        }
        _ => value.to_string(),
    }
}

fn decimal_places(width: f64) -> usize {
    let repr = format!("{width}");
    repr.split_once('.').map_or(0, |(_, frac)| frac.len())
}

/// Concatenates sensor id and discretized value, e.g. `M1_ON`.
pub fn sensor_token(sensor_id: &str, value: &str, bin_width: f64) -> String {
    format!("{}_{}", sensor_id, discretize_value(value, bin_width))
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>, temperature_bin_width: f64) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            tokens,
            index,
            temperature_bin_width,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn temperature_bin_width(&self) -> f64 {
        self.temperature_bin_width
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token_for_event(&self, event: &SensorEvent) -> String {
        sensor_token(&event.sensor_id, &event.value, self.temperature_bin_width)
    }

    /// Id of the event's token, or `[UNK]` for unseen readings.
    pub fn encode(&self, event: &SensorEvent) -> u32 {
        self.id(&self.token_for_event(event)).unwrap_or(UNK_ID)
    }

    pub fn encode_all(&self, events: &[SensorEvent]) -> Vec<u32> {
        events.iter().map(|e| self.encode(e)).collect()
    }
}

/// One token per distinct (sensor, discretized value) pair plus the special tokens.
pub fn build_vocabulary(events: &[SensorEvent], temperature_bin_width: f64) -> Result<Vocabulary> {
    if events.is_empty() {
        return Err(Error::invalid("cannot build a vocabulary from zero events"));
    }
    if !(temperature_bin_width > 0.0 && temperature_bin_width.is_finite()) {
        return Err(Error::invalid(format!(
            "temperature bin width must be positive, got {temperature_bin_width}"
        )));
    }
    let sensor_tokens: BTreeSet<String> = events
        .iter()
        .map(|e| sensor_token(&e.sensor_id, &e.value, temperature_bin_width))
        .collect();
    let tokens = SPECIAL_TOKENS
        .iter()
        .map(|s| s.to_string())
        .chain(sensor_tokens)
        .collect();
    Ok(Vocabulary::from_tokens(tokens, temperature_bin_width))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn event(sensor: &str, value: &str) -> SensorEvent {
        let ts = NaiveDate::from_ymd_opt(2009, 10, 16)
            .unwrap()
            .and_hms_opt(8, 0, 0)
            .unwrap();
        SensorEvent::new(ts, sensor, value)
    }

    #[test]
    fn motion_token_concatenates() {
        assert_eq!(sensor_token("M1", "ON", 1.0), "M1_ON");
    }

    #[test]
    fn two_readings_give_six_tokens() {
        let vocab = build_vocabulary(&[event("M1", "ON"), event("M1", "OFF"), event("M1", "ON")], 1.0).unwrap();
        assert_eq!(vocab.len(), 6);
        assert_eq!(vocab.id(PAD), Some(PAD_ID));
        assert_eq!(vocab.id(MASK), Some(MASK_ID));
        assert_eq!(vocab.id(CLS), Some(CLS_ID));
        assert_eq!(vocab.id(UNK), Some(UNK_ID));
    }

    #[test]
    fn temperature_is_floored_to_bin() {
        assert_eq!(sensor_token("T002", "21.4", 1.0), "T002_21");
        assert_eq!(sensor_token("T002", "21.9", 0.5), "T002_21.5");
        assert_eq!(sensor_token("T002", "-0.4", 1.0), "T002_-1");
        assert_eq!(sensor_token("T002", "0.4", 1.0), "T002_0");
        assert_eq!(sensor_token("T002", "23.0", 2.0), "T002_22");
    }

    #[test]
    fn unseen_value_maps_to_unk() {
        let vocab = build_vocabulary(&[event("M1", "ON")], 1.0).unwrap();
        assert_eq!(vocab.encode(&event("M1", "ON")), 4);
        assert_eq!(vocab.encode(&event("M9", "ON")), UNK_ID);
    }

    #[test]
    fn empty_events_rejected() {
        assert!(build_vocabulary(&[], 1.0).is_err());
    }

    #[test]
    fn serde_round_trip_rebuilds_index() {
        let vocab = build_vocabulary(&[event("M1", "ON"), event("D1", "OPEN")], 1.0).unwrap();
        let json = serde_json::to_string(&vocab).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vocab);
        assert_eq!(back.id("D1_OPEN"), vocab.id("D1_OPEN"));
    }
}
