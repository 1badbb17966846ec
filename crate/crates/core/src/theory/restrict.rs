use std::collections::{BTreeMap, BTreeSet};

use super::densify;
use crate::dynamics::OfferState;
use crate::error::{Error, Result};
use crate::market::{AgentId, Bundle, Market, MarketParts, TieBreak, ValuationSpec, Value, MAX_INCIDENT};

/// A market restricted to an agent subset with external trades frozen.
///
/// Boundary valuations are shifted so the empty bundle is worth 0; the shift
/// is kept in [`RestrictedMarket::offset`].
#[derive(Debug, Clone)]
pub struct RestrictedMarket {
    market: Market,
    subset: BTreeSet<AgentId>,
    offsets: BTreeMap<AgentId, i64>,
}

impl RestrictedMarket {
    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn subset(&self) -> &BTreeSet<AgentId> {
        &self.subset
    }

    /// Best value obtainable from external trades alone; 0 for internal agents.
    pub fn offset(&self, agent: AgentId) -> i64 {
        self.offsets.get(&agent).copied().unwrap_or(0)
    }

    /// The unshifted restricted valuation of a bundle of internal trades.
    pub fn raw_value(&self, agent: AgentId, bundle: &Bundle) -> Result<Value> {
        Ok(self.market.evaluate(agent, bundle)? + self.offset(agent))
    }

    /// Offers on internal trades; unsatisfied set intersected with the subset.
    pub fn map_state(&self, original: &Market, state: &OfferState) -> Result<OfferState> {
        let mut buyer = Vec::with_capacity(self.market.num_trades());
        let mut seller = Vec::with_capacity(self.market.num_trades());
        for t in self.market.trades() {
            let ti = original.trade_index(t.id)?;
            buyer.push(state.buyer_offer(ti));
            seller.push(state.seller_offer(ti));
        }
        let mut out = OfferState::new(&self.market, buyer, seller, state.epsilon())?;
        for (i, a) in self.market.agents().iter().enumerate() {
            if !state.is_unsatisfied(original.agent_index(a.id)?) {
                out.mark_satisfied(i);
            }
        }
        Ok(out)
    }
}

/// Restricts `market` to `subset`, pricing each external trade at the
/// counterpart's current offer in `state`.
///
/// A boundary agent's valuation of internal bundle `Θ` becomes the best
/// value of `Θ ∪ Ψ` minus the payments for `Ψ`, over external bundles `Ψ`.
/// Its tie-break ranks `Θ` by the best original rank among the maximizing
/// `Ψ`, so demand in the restricted market is exactly the internal part of
/// demand in the original market.
pub fn restrict_market(market: &Market, subset: &BTreeSet<AgentId>, state: &OfferState) -> Result<RestrictedMarket> {
    if subset.is_empty() {
        return Err(Error::Domain("restriction needs a non-empty agent subset".into()));
    }
    for a in subset {
        market.agent_index(*a)?;
    }
    let inside = |a: AgentId| subset.contains(&a);

    let mut parts = MarketParts {
        agents: market.agents().iter().filter(|a| inside(a.id)).copied().collect(),
        trades: market
            .trades()
            .iter()
            .filter(|t| inside(t.buyer) && inside(t.seller))
            .copied()
            .collect(),
        valuations: BTreeMap::new(),
    };
    let mut offsets = BTreeMap::new();

    for &agent in subset {
        let ai = market.agent_index(agent)?;
        let inc = market.incident(ai);
        let k = inc.len();
        if k > MAX_INCIDENT {
            return Err(Error::Capacity {
                what: "incident trades",
                actual: k as u64,
                limit: MAX_INCIDENT as u64,
            });
        }
        let mut internal = Vec::new();
        let mut external = Vec::new();
        for (pos, &t) in inc.trades.iter().enumerate() {
            let tr = market.trade(t);
            if inside(tr.buyer) && inside(tr.seller) {
                internal.push(pos);
            } else {
                external.push(pos);
            }
        }
        let spec = market.spec(ai);
        if external.is_empty() {
            parts.valuations.insert(agent, spec.clone());
            continue;
        }

        let prices = state.prices_facing(market, ai);
        let spread = |bits: u32, positions: &[usize]| -> u32 {
            positions
                .iter()
                .enumerate()
                .filter(|(j, _)| bits & (1 << j) != 0)
                .fold(0, |m, (_, &p)| m | (1 << p))
        };
        let n_int = 1usize << internal.len();
        let n_ext = 1u32 << external.len();
        let mut best = vec![(Value::NegInf, u64::MAX); n_int];
        for psi in 0..n_ext {
            let ext_mask = spread(psi, &external);
            let pay: i64 = external
                .iter()
                .enumerate()
                .filter(|(j, _)| psi & (1 << j) != 0)
                .map(|(_, &p)| inc.signs[p] * prices[p])
                .sum();
            for (theta, slot) in best.iter_mut().enumerate() {
                let full = ext_mask | spread(theta as u32, &internal);
                let v = market.value_local(ai, full) - pay;
                let r = spec.tie_break.rank(full, k);
                if v > slot.0 || (v == slot.0 && r < slot.1) {
                    *slot = (v, r);
                }
            }
        }
        let offset = best[0].0.finite().expect("the empty external bundle keeps v(∅) = 0");
        offsets.insert(agent, offset);
        let table = best.iter().map(|&(v, _)| v - offset).collect();
        let keys: Vec<(u64, usize)> = best.iter().enumerate().map(|(i, &(_, r))| (r, i)).collect();
        parts.valuations.insert(
            agent,
            ValuationSpec::table(table).with_tie_break(TieBreak::Ranked(densify(&keys))),
        );
    }

    Ok(RestrictedMarket {
        market: Market::new(parts)?,
        subset: subset.clone(),
        offsets,
    })
}
