//! Training orchestration: the causal/adaptive phase schedule, the per-epoch
//! engine, run logging and the end-to-end driver.

mod engine;
mod runlog;
mod schedule;
mod trainer;

pub use engine::EpochStats;
pub use runlog::{RunLog, RunRecord};
pub use schedule::{CollocationSpec, CsStopRule, PhaseKind, PhaseSpec, TrainingSchedule};
pub use trainer::{train_full, TrainError, TrainOutcome, Trainer};

/// Scratch constructor for performance probing.
#[doc(hidden)]
pub mod probe {
    pub fn engine<'a>(
        cfg: &'a crate::physics::ProblemConfig,
        data: &'a crate::analytic::MeasurementSet,
    ) -> super::engine::Engine<'a> {
        super::engine::Engine { cfg, data }
    }
}
