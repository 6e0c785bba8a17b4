use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// A rollout reached an encoder state with no table entry. Tables are
    /// built total on reachable states, so this signals a construction bug.
    #[error("state hole: {0}")]
    StateHole(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Core(#[from] tdshift_core::Error),
}

impl SimError {
    pub fn code(&self) -> &'static str {
        match self {
            SimError::StateHole(_) => "state-hole",
            SimError::InvalidConfig(_) => "invalid-config",
            SimError::Core(e) => e.code(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
