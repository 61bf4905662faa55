//! Entwined-pair generation, charge tallies and the exhaustive oracle.

mod ensemble;
mod enumerate;
mod path;
mod tally;

pub use ensemble::{child_stream, run_ensemble, walker_path, EnsembleConfig, RNG_STREAM_NAME};
pub use enumerate::{enumerate_exact, ENUMERATION_LIMIT};
pub use path::{
    component_index, generate_entwined_pair, ChargeSink, EntwinedPath, Envelope, Marker, ReturnRule, Side,
    WalkOptions, DEFAULT_MAX_STEPS,
};
pub use tally::{deposit_charge, EnsembleStats, TallyWindow, WeightedFields};
