//! Executable market transformations and structural checks.
//!
//! * [`restrict_market`] freezes the offers on trades leaving an agent subset
//!   and folds those trades into the boundary agents' valuations.
//! * [`merge_market`] collapses the two classes of an [`AgentPartition`]
//!   into single agents that trade internally for free.
//! * [`sparsity`] computes the largest minimum cut over induced subgraphs.
//! * [`ar_rows`] and [`check_fragments`] analyse accept/reject patterns of
//!   two-agent runs.
//! * [`verify_restriction_lemma`] and [`verify_merge_lemma`] replay
//!   best-response sequences in a market and in its transformation and
//!   report every divergence.

mod lemmas;
mod merge;
mod restrict;
mod rows;
mod sparsity;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::market::{AgentId, Market, TradeId};

pub use lemmas::{
    alternating_phases, terminating_sequence, verify_merge_lemma, verify_merge_lemma_with, verify_restriction_lemma,
    LemmaDiff, LemmaReport, Phase,
};
pub use merge::{merge_market, MergedMarket, MERGE_ENUMERATION_LIMIT};
pub use restrict::{restrict_market, RestrictedMarket};
pub use rows::{ar_rows, check_fragments, ArRows, FragmentMatch, Mark};
pub use sparsity::{sparsity, sparsity_of_graph, SparsityMode, EXACT_VERTEX_LIMIT};

/// One of the two classes of an [`AgentPartition`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Part {
    First,
    Second,
}

impl Part {
    pub fn other(self) -> Part {
        match self {
            Part::First => Part::Second,
            Part::Second => Part::First,
        }
    }

    /// Agent id of this class in a merged market (1 or 2).
    pub fn merged_id(self) -> AgentId {
        match self {
            Part::First => AgentId(1),
            Part::Second => AgentId(2),
        }
    }
}

/// A split of a market's agents into two non-empty, disjoint classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentPartition {
    first: BTreeSet<AgentId>,
    second: BTreeSet<AgentId>,
}

impl AgentPartition {
    pub fn new(market: &Market, first: BTreeSet<AgentId>, second: BTreeSet<AgentId>) -> Result<Self> {
        if first.is_empty() || second.is_empty() {
            return Err(Error::Domain("both partition classes must be non-empty".into()));
        }
        if let Some(a) = first.intersection(&second).next() {
            return Err(Error::Domain(format!("{a} appears in both partition classes")));
        }
        for a in first.iter().chain(&second) {
            market.agent_index(*a)?;
        }
        if first.len() + second.len() != market.num_agents() {
            return Err(Error::Domain("partition does not cover every agent".into()));
        }
        Ok(AgentPartition { first, second })
    }

    /// `first` against all remaining agents.
    pub fn split_off(market: &Market, first: BTreeSet<AgentId>) -> Result<Self> {
        let second = market
            .agents()
            .iter()
            .map(|a| a.id)
            .filter(|a| !first.contains(a))
            .collect();
        AgentPartition::new(market, first, second)
    }

    pub fn class(&self, part: Part) -> &BTreeSet<AgentId> {
        match part {
            Part::First => &self.first,
            Part::Second => &self.second,
        }
    }

    pub fn part_of(&self, agent: AgentId) -> Option<Part> {
        if self.first.contains(&agent) {
            Some(Part::First)
        } else if self.second.contains(&agent) {
            Some(Part::Second)
        } else {
            None
        }
    }

    /// Trades with one endpoint in each class.
    pub fn cross_trades(&self, market: &Market) -> Vec<TradeId> {
        market
            .trades()
            .iter()
            .filter(|t| self.first.contains(&t.buyer) != self.first.contains(&t.seller))
            .map(|t| t.id)
            .collect()
    }

    /// Trades with both endpoints in `part`.
    pub fn internal_trades(&self, market: &Market, part: Part) -> Vec<TradeId> {
        let class = self.class(part);
        market
            .trades()
            .iter()
            .filter(|t| class.contains(&t.buyer) && class.contains(&t.seller))
            .map(|t| t.id)
            .collect()
    }
}

/// Stable ascending order of `keys` turned into a permutation of ranks.
pub(crate) fn densify<K: Ord>(keys: &[K]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]).then(a.cmp(&b)));
    let mut ranks = vec![0u32; keys.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r as u32;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn partition_checks() {
        let m = fixtures::example1();
        let p = AgentPartition::split_off(&m, [AgentId(0), AgentId(2)].into()).unwrap();
        assert_eq!(p.internal_trades(&m, Part::First), vec![TradeId(0)]);
        assert_eq!(p.cross_trades(&m), vec![TradeId(1), TradeId(2), TradeId(3), TradeId(4)]);
        assert_eq!(p.internal_trades(&m, Part::Second), vec![TradeId(5)]);
        assert!(AgentPartition::split_off(&m, m.agents().iter().map(|a| a.id).collect()).is_err());
        assert!(AgentPartition::new(&m, [AgentId(0)].into(), [AgentId(0), AgentId(1)].into()).is_err());
    }

    #[test]
    fn densify_is_a_permutation() {
        assert_eq!(densify(&[30, 10, 20, 10]), vec![3, 0, 2, 1]);
    }
}
