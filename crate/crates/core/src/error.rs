use core::fmt;

use crate::model::Id;

/// Errors raised when a task set, workload or generator request is malformed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelError {
    DuplicateId(Id),
    UnknownId(Id),
    InvalidServer {
        id: Id,
        reason: &'static str,
    },
    InvalidPibs {
        id: Id,
        reason: &'static str,
    },
    InvalidUtil {
        numer: u64,
        denom: u64,
    },
    UtilSyntax,
    UnboundPibs(Id),
    InvalidWorkload(&'static str),
    InvalidParams(&'static str),
    /// Generation gave up after exhausting its retries.
    Infeasible(&'static str),
    /// An analysis was asked to run on a model it does not cover.
    Unsupported(&'static str),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::DuplicateId(id) => write!(f, "duplicate id {id}"),
            ModelError::UnknownId(id) => write!(f, "unknown id {id}"),
            ModelError::InvalidServer { id, reason } => write!(f, "server {id}: {reason}"),
            ModelError::InvalidPibs { id, reason } => write!(f, "pibs {id}: {reason}"),
            ModelError::InvalidUtil { numer, denom } => {
                write!(f, "utilization {numer}/{denom} is not in (0, 1]")
            }
            ModelError::UtilSyntax => f.write_str("utilization must be written as \"p/q\""),
            ModelError::UnboundPibs(id) => write!(f, "pibs {id} has no bound server"),
            ModelError::InvalidWorkload(why) => write!(f, "invalid workload: {why}"),
            ModelError::InvalidParams(why) => write!(f, "invalid generator parameters: {why}"),
            ModelError::Infeasible(why) => write!(f, "generation infeasible: {why}"),
            ModelError::Unsupported(why) => write!(f, "unsupported: {why}"),
        }
    }
}

impl core::error::Error for ModelError {}
