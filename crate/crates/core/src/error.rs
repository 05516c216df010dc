use thiserror::Error;

/// Errors surfaced by the simulator. Exit-code mapping for the CLI:
/// config errors 2, property violations 3, integrity violations 4.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("address fault: {addr:#x} outside capacity {capacity:#x}")]
    AddressFault { addr: u64, capacity: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("integrity violation at level {level} node {index}: {detail}")]
    IntegrityViolation { level: u8, index: u64, detail: String },

    #[error("property violation: {0}")]
    PropertyViolation(String),

    #[error("trace error at line {line}: {detail}")]
    Trace { line: usize, detail: String },

    #[error("zero-MAC re-encryption did not converge within {0} iterations")]
    ZeroMacDiverged(u32),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) | SimError::Trace { .. } => 2,
            SimError::PropertyViolation(_) => 3,
            SimError::IntegrityViolation { .. } => 4,
            SimError::AddressFault { .. } => 2,
            SimError::ZeroMacDiverged(_) => 3,
            SimError::Io(_) => 2,
        }
    }
}
