use thiserror::Error;

use crate::bounds::BoundsError;
use crate::channel::ChannelError;
use crate::cycle::CycleError;
use crate::lti::SystemError;
use crate::matrix::MatrixError;
use crate::sim::SimulationError;

/// Any error raised by this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Cycle(#[from] CycleError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}
