use thiserror::Error;

use crate::market::{AgentId, TradeId, Violation};

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown {0}")]
    UnknownAgent(AgentId),

    #[error("unknown {0}")]
    UnknownTrade(TradeId),

    #[error("{trade} is not incident to {agent}")]
    NotIncident { agent: AgentId, trade: TradeId },

    #[error("missing price for {0}")]
    MissingPrice(TradeId),

    #[error("{agent} has no valuation")]
    MissingValuation { agent: AgentId },

    #[error("capacity exceeded: {what} is {actual}, limit {limit}")]
    Capacity {
        what: &'static str,
        actual: u64,
        limit: u64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid market: {}", join_violations(.0))]
    InvalidMarket(Vec<Violation>),

    /// Malformed input text; `line` is 1-based.
    #[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl Error {
    /// Short machine-readable class used by the CLI.
    pub fn class(&self) -> &'static str {
        match self {
            Error::UnknownAgent(_)
            | Error::UnknownTrade(_)
            | Error::NotIncident { .. }
            | Error::MissingPrice(_)
            | Error::MissingValuation { .. }
            | Error::Domain(_) => "domain",
            Error::Capacity { .. } => "capacity",
            Error::Precondition(_) => "precondition",
            Error::InvalidMarket(_) => "validation",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
