//! Best-response negotiation dynamics on trading networks.
//!
//! Agents on a directed multigraph of bilateral trades repeatedly best
//! respond to their counterparts' offers until every agent is satisfied.
//! The crate covers the market model and demand ([`market`]), the dynamic
//! itself ([`dynamics`]), executable market transformations and structural
//! checks ([`theory`]), random network generators ([`topology`]), batch
//! experiments ([`experiments`]) and file formats ([`io`]).

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod io;
pub mod market;
pub mod theory;
pub mod topology;

pub use error::{Error, Result};
