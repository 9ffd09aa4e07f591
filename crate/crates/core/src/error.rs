use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("values are not nondecreasing at index {0}")]
    NotMonotone(usize),
    #[error("mass coordinate {0} lies outside [0, 1]")]
    MassOutOfRange(f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("an event occurs at t = {0} inside the requested free-flight interval")]
    EventInInterval(f64),
    #[error("blocks {0} and {1} are not in contact")]
    NotInContact(usize, usize),
    #[error("split of block {0} produced sub-block velocities out of order")]
    UnorderedSplit(usize),
    #[error("event livelock at t = {time}: {detail}")]
    Livelock { time: f64, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
