use thiserror::Error;

use crate::gridworld::LayoutError;
use crate::learner::LearnerError;
use crate::reward_machine::MachineError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
