//! Cost-ordered greedy hyperparameter search and its exhaustive baseline.

pub mod external;
mod search;
mod space;

pub use search::{
    greedy_search, greedy_search_with, grid_configs, grid_search, read_trial_log, write_trial_record, GreedyResult,
    SearchOptions, TrialRecord,
};
pub use space::{recurrent_default_space, Config, HyperParam, HyperParamSpace, ParamValue};
