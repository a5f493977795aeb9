//! T+1 execution: fills at the next open, marks at the close, and the
//! episode loop that ties agents to the market replay.

mod episode;
mod fill;

pub use episode::{
    run_episode, DailyMark, DecisionStep, EpisodeError, EpisodeLog, EpisodeRun, EpisodeSetup, RoundTrip,
    TranscriptEntry, EPISODE_SCHEMA_VERSION,
};
pub use fill::{execute_fill, mark_to_market, CostModel, FillReport, HoldingState, Side};
