//! Event-log parsing, tokenization, windowing and leave-days-out splitting.

mod events;
mod split;
mod vocab;
mod window;

pub use events::{
    format_annotated_log, format_event_log, is_temperature_sensor, parse_event_log, sort_events, ParseReport, ParsedLog,
    SensorEvent, SkippedLine, NO_LABEL,
};
pub use split::{split_by_days, SplitPlan};
pub use vocab::{
    build_vocabulary, discretize_value, sensor_token, Vocabulary, CLS, CLS_ID,
    DEFAULT_TEMPERATURE_BIN_WIDTH, MASK, MASK_ID, PAD, PAD_ID, SPECIAL_TOKENS, UNK, UNK_ID,
};
pub use window::{make_windows, sample_windows, window_count, window_truth, Window};
