//! Markets, valuations, utilities and demand.
//!
//! A [`Market`] is an immutable, validated trading network: agents, a directed
//! multigraph of trades, and one [`ValuationSpec`] per agent. Demand is
//! computed by exhaustive enumeration over an agent's incident trades, which
//! is capped at [`MAX_INCIDENT`] trades.

mod ids;
mod substitutes;
mod validate;
mod valuation;
mod value;

use std::collections::{BTreeMap, BTreeSet, HashMap};

pub use ids::{Agent, AgentId, Role, Side, Trade, TradeId};
pub use substitutes::{
    check_full_substitutability, FsCondition, FsMode, FsReport, FsWitness, PriceBox, EXHAUSTIVE_POINT_LIMIT,
    LOCAL_POINT_LIMIT,
};
pub use validate::{validate_market, Violation, ViolationKind};
pub use valuation::{TieBreak, ValuationKind, ValuationSpec, MAX_INCIDENT};
pub use value::{ParseValueError, Value};

use crate::error::{Error, Result};

/// A set of trade ids.
pub type Bundle = BTreeSet<TradeId>;

/// Prices an agent faces, keyed by trade.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PriceVector(pub BTreeMap<TradeId, i64>);

impl PriceVector {
    pub fn get(&self, trade: TradeId) -> Option<i64> {
        self.0.get(&trade).copied()
    }
}

impl FromIterator<(TradeId, i64)> for PriceVector {
    fn from_iter<T: IntoIterator<Item = (TradeId, i64)>>(iter: T) -> Self {
        PriceVector(iter.into_iter().collect())
    }
}

/// Raw market contents, possibly violating invariants.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MarketParts {
    pub agents: Vec<Agent>,
    pub trades: Vec<Trade>,
    pub valuations: BTreeMap<AgentId, ValuationSpec>,
}

/// One agent's incident trades in ascending trade-id order.
#[derive(Debug, Clone, Default)]
pub struct Incident {
    /// Indices into [`Market::trades`].
    pub trades: Vec<usize>,
    /// `+1` for buying trades, `-1` for selling trades.
    pub signs: Vec<i64>,
    pub buy_mask: u32,
    pub sell_mask: u32,
}

impl Incident {
    pub fn len(&self) -> usize {
        self.trades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trades.is_empty()
    }

    pub fn full_mask(&self) -> u32 {
        if self.trades.is_empty() {
            0
        } else {
            u32::MAX >> (32 - self.trades.len())
        }
    }
}

#[derive(Debug, Clone)]
pub struct Market {
    parts: MarketParts,
    agent_index: HashMap<AgentId, usize>,
    trade_index: HashMap<TradeId, usize>,
    incident: Vec<Incident>,
    specs: Vec<ValuationSpec>,
}

impl Market {
    /// Builds a market, sorting agents and trades by id and rejecting any
    /// invariant violation.
    pub fn new(mut parts: MarketParts) -> Result<Market> {
        parts.agents.sort_by_key(|a| a.id);
        parts.trades.sort_by_key(|t| t.id);
        let violations = validate_market(&parts);
        if !violations.is_empty() {
            return Err(Error::InvalidMarket(violations));
        }

        let agent_index: HashMap<_, _> = parts.agents.iter().enumerate().map(|(i, a)| (a.id, i)).collect();
        let trade_index: HashMap<_, _> = parts.trades.iter().enumerate().map(|(i, t)| (t.id, i)).collect();
        let mut incident = vec![Incident::default(); parts.agents.len()];
        for (ti, t) in parts.trades.iter().enumerate() {
            for (agent, sign) in [(t.buyer, 1), (t.seller, -1)] {
                let inc = &mut incident[agent_index[&agent]];
                let bit = 1u32 << inc.trades.len();
                if sign > 0 {
                    inc.buy_mask |= bit;
                } else {
                    inc.sell_mask |= bit;
                }
                inc.trades.push(ti);
                inc.signs.push(sign);
            }
        }
        let specs = parts.agents.iter().map(|a| parts.valuations[&a.id].clone()).collect();
        Ok(Market {
            parts,
            agent_index,
            trade_index,
            incident,
            specs,
        })
    }

    pub fn from_parts(
        agents: Vec<Agent>,
        trades: Vec<Trade>,
        valuations: impl IntoIterator<Item = (AgentId, ValuationSpec)>,
    ) -> Result<Market> {
        Market::new(MarketParts {
            agents,
            trades,
            valuations: valuations.into_iter().collect(),
        })
    }

    pub fn parts(&self) -> &MarketParts {
        &self.parts
    }

    pub fn into_parts(self) -> MarketParts {
        self.parts
    }

    pub fn agents(&self) -> &[Agent] {
        &self.parts.agents
    }

    pub fn trades(&self) -> &[Trade] {
        &self.parts.trades
    }

    pub fn num_agents(&self) -> usize {
        self.parts.agents.len()
    }

    pub fn num_trades(&self) -> usize {
        self.parts.trades.len()
    }

    pub fn agent_index(&self, id: AgentId) -> Result<usize> {
        self.agent_index.get(&id).copied().ok_or(Error::UnknownAgent(id))
    }

    pub fn trade_index(&self, id: TradeId) -> Result<usize> {
        self.trade_index.get(&id).copied().ok_or(Error::UnknownTrade(id))
    }

    pub fn agent_id(&self, index: usize) -> AgentId {
        self.parts.agents[index].id
    }

    pub fn role(&self, index: usize) -> Role {
        self.parts.agents[index].role
    }

    pub fn trade(&self, index: usize) -> &Trade {
        &self.parts.trades[index]
    }

    pub fn incident(&self, agent: usize) -> &Incident {
        &self.incident[agent]
    }

    pub fn spec(&self, agent: usize) -> &ValuationSpec {
        &self.specs[agent]
    }

    pub fn valuation(&self, agent: AgentId) -> Result<&ValuationSpec> {
        Ok(&self.specs[self.agent_index(agent)?])
    }

    /// Incident trade ids of `agent` (Ω_i).
    pub fn incident_trades(&self, agent: AgentId) -> Result<Vec<TradeId>> {
        let ai = self.agent_index(agent)?;
        Ok(self.incident[ai]
            .trades
            .iter()
            .map(|&t| self.parts.trades[t].id)
            .collect())
    }

    /// Trades in which `agent` is the buyer.
    pub fn buying_trades(&self, agent: AgentId) -> Result<Vec<TradeId>> {
        Ok(self
            .incident_trades(agent)?
            .into_iter()
            .filter(|t| self.parts.trades[self.trade_index[t]].buyer == agent)
            .collect())
    }

    /// Trades in which `agent` is the seller.
    pub fn selling_trades(&self, agent: AgentId) -> Result<Vec<TradeId>> {
        Ok(self
            .incident_trades(agent)?
            .into_iter()
            .filter(|t| self.parts.trades[self.trade_index[t]].seller == agent)
            .collect())
    }

    /// Converts a bundle of trade ids into the agent's local mask.
    pub fn bundle_to_mask(&self, agent: usize, bundle: &Bundle) -> Result<u32> {
        let inc = &self.incident[agent];
        let mut mask = 0u32;
        for t in bundle {
            let ti = self.trade_index(*t)?;
            let pos = inc.trades.iter().position(|&x| x == ti).ok_or(Error::NotIncident {
                agent: self.agent_id(agent),
                trade: *t,
            })?;
            mask |= 1 << pos;
        }
        Ok(mask)
    }

    pub fn mask_to_bundle(&self, agent: usize, mask: u32) -> Bundle {
        let inc = &self.incident[agent];
        inc.trades
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, &t)| self.parts.trades[t].id)
            .collect()
    }

    /// `v^i` of a local mask.
    pub fn value_local(&self, agent: usize, mask: u32) -> Value {
        let inc = &self.incident[agent];
        self.specs[agent].value_of(mask, inc.buy_mask, inc.sell_mask)
    }

    /// `v^i(bundle)`.
    pub fn evaluate(&self, agent: AgentId, bundle: &Bundle) -> Result<Value> {
        let ai = self.agent_index(agent)?;
        let mask = self.bundle_to_mask(ai, bundle)?;
        Ok(self.value_local(ai, mask))
    }

    /// Utility of a local mask given prices aligned with the agent's incident trades.
    pub fn utility_local(&self, agent: usize, mask: u32, prices: &[i64]) -> Value {
        let inc = &self.incident[agent];
        let mut pay = 0i64;
        let mut m = mask;
        while m != 0 {
            let k = m.trailing_zeros() as usize;
            pay += inc.signs[k] * prices[k];
            m &= m - 1;
        }
        self.value_local(agent, mask) - pay
    }

    /// Aligns a price vector with the agent's incident trades.
    pub fn local_prices(&self, agent: usize, prices: &PriceVector) -> Result<Vec<i64>> {
        self.incident[agent]
            .trades
            .iter()
            .map(|&t| {
                let id = self.parts.trades[t].id;
                prices.get(id).ok_or(Error::MissingPrice(id))
            })
            .collect()
    }

    /// `u^i(bundle, p) = v^i(bundle) - Σ χ p`.
    pub fn utility(&self, agent: AgentId, bundle: &Bundle, prices: &PriceVector) -> Result<Value> {
        let ai = self.agent_index(agent)?;
        let mask = self.bundle_to_mask(ai, bundle)?;
        let inc = &self.incident[ai];
        let mut pay = 0i64;
        for k in 0..inc.len() {
            if mask & (1 << k) != 0 {
                let id = self.parts.trades[inc.trades[k]].id;
                pay += inc.signs[k] * prices.get(id).ok_or(Error::MissingPrice(id))?;
            }
        }
        Ok(self.value_local(ai, mask) - pay)
    }

    /// Demanded local mask at local prices: the utility maximizer, ties
    /// resolved by the agent's tie-break order.
    pub fn demand_local(&self, agent: usize, prices: &[i64]) -> Result<u32> {
        let inc = &self.incident[agent];
        let k = inc.len();
        if k > MAX_INCIDENT {
            return Err(Error::Capacity {
                what: "incident trades",
                actual: k as u64,
                limit: MAX_INCIDENT as u64,
            });
        }
        debug_assert_eq!(prices.len(), k);
        // payment[mask] built incrementally from the mask without its lowest bit
        let n = 1usize << k;
        let mut payment = vec![0i64; n];
        for mask in 1..n {
            let low = mask.trailing_zeros() as usize;
            payment[mask] = payment[mask & (mask - 1)] + inc.signs[low] * prices[low];
        }
        let spec = &self.specs[agent];
        let lexicographic = matches!(spec.tie_break, TieBreak::Lexicographic);
        let mut best_mask = 0u32;
        let mut best_util = Value::ZERO;
        let mut best_rank = spec.tie_break.rank(0, k);
        for (mask, pay) in payment.iter().enumerate().skip(1) {
            let mask = mask as u32;
            let u = spec.value_of(mask, inc.buy_mask, inc.sell_mask) - *pay;
            if u > best_util {
                best_util = u;
                best_mask = mask;
                if !lexicographic {
                    best_rank = spec.tie_break.rank(mask, k);
                }
            } else if u == best_util && !lexicographic {
                let r = spec.tie_break.rank(mask, k);
                if r < best_rank {
                    best_rank = r;
                    best_mask = mask;
                }
            }
        }
        Ok(best_mask)
    }

    /// `D^i(p)`: the uniquely demanded bundle at prices `p`.
    pub fn demand(&self, agent: AgentId, prices: &PriceVector) -> Result<Bundle> {
        let ai = self.agent_index(agent)?;
        let local = self.local_prices(ai, prices)?;
        let mask = self.demand_local(ai, &local)?;
        Ok(self.mask_to_bundle(ai, mask))
    }

    /// Largest absolute finite valuation across all agents and bundles.
    pub fn valuation_bound(&self) -> u64 {
        let mut bound = 0u64;
        for (ai, spec) in self.specs.iter().enumerate() {
            let b = match &spec.kind {
                ValuationKind::UnitBuyer { value } => value.unsigned_abs(),
                ValuationKind::UnitSeller { cost } => cost.unsigned_abs(),
                ValuationKind::Intermediary => 0,
                ValuationKind::Table(_) => {
                    let n = 1u32 << self.incident[ai].len();
                    (0..n)
                        .filter_map(|m| self.value_local(ai, m).finite())
                        .map(i64::unsigned_abs)
                        .max()
                        .unwrap_or(0)
                }
            };
            bound = bound.max(b);
        }
        bound
    }

    /// Replaces one agent's valuation, re-validating the result.
    pub fn with_valuation(&self, agent: AgentId, spec: ValuationSpec) -> Result<Market> {
        self.agent_index(agent)?;
        let mut parts = self.parts.clone();
        parts.valuations.insert(agent, spec);
        Market::new(parts)
    }
}

/// `V`: the bound on absolute finite valuations joined with the largest
/// absolute initial offer.
pub fn value_bound<'a>(market: &Market, initial_offers: impl IntoIterator<Item = &'a i64>) -> u64 {
    let offers = initial_offers.into_iter().map(|o| o.unsigned_abs()).max().unwrap_or(0);
    market.valuation_bound().max(offers)
}
