use std::collections::BTreeMap;

use super::{densify, AgentPartition, Part};
use crate::dynamics::OfferState;
use crate::error::{Error, Result};
use crate::market::{
    Agent, AgentId, Bundle, Market, MarketParts, Role, TieBreak, Trade, TradeId, ValuationSpec, Value,
};

/// Largest number of cross plus internal trades enumerated for one class.
pub const MERGE_ENUMERATION_LIMIT: usize = 20;

/// The two-agent market obtained by merging each partition class.
///
/// Agent 1 stands for the first class and agent 2 for the second. Trades keep
/// their ids. Merged valuations are shifted so the empty bundle is worth 0;
/// the shift is kept in [`MergedMarket::offset`].
#[derive(Debug, Clone)]
pub struct MergedMarket {
    market: Market,
    partition: AgentPartition,
    offsets: [i64; 2],
}

fn slot(part: Part) -> usize {
    match part {
        Part::First => 0,
        Part::Second => 1,
    }
}

impl MergedMarket {
    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn partition(&self) -> &AgentPartition {
        &self.partition
    }

    /// Best aggregate value of internal trades alone.
    pub fn offset(&self, part: Part) -> i64 {
        self.offsets[slot(part)]
    }

    /// The unshifted merged valuation of a bundle of cross trades.
    pub fn raw_value(&self, part: Part, bundle: &Bundle) -> Result<Value> {
        Ok(self.market.evaluate(part.merged_id(), bundle)? + self.offset(part))
    }

    /// Replaces one merged agent's valuation.
    pub fn with_valuation(&self, part: Part, spec: ValuationSpec) -> Result<MergedMarket> {
        Ok(MergedMarket {
            market: self.market.with_valuation(part.merged_id(), spec)?,
            partition: self.partition.clone(),
            offsets: self.offsets,
        })
    }

    /// Cross-trade offers of `state`; a merged agent is unsatisfied iff any
    /// member of its class is.
    pub fn map_state(&self, original: &Market, state: &OfferState) -> Result<OfferState> {
        let mut buyer = Vec::with_capacity(self.market.num_trades());
        let mut seller = Vec::with_capacity(self.market.num_trades());
        for t in self.market.trades() {
            let ti = original.trade_index(t.id)?;
            buyer.push(state.buyer_offer(ti));
            seller.push(state.seller_offer(ti));
        }
        let mut out = OfferState::new(&self.market, buyer, seller, state.epsilon())?;
        for part in [Part::First, Part::Second] {
            let mut any = false;
            for a in self.partition.class(part) {
                any |= state.is_unsatisfied(original.agent_index(*a)?);
            }
            if !any {
                out.mark_satisfied(self.market.agent_index(part.merged_id())?);
            }
        }
        Ok(out)
    }
}

/// Merges each class of `partition` into one agent whose internal trades are
/// free: the merged value of cross bundle `Φ` is the best total member value
/// of `Φ ∪ Ψ` over internal bundles `Ψ`.
///
/// When every member breaks ties by perturbation, the merged agent breaks
/// ties by the summed perturbations of the maximizing `Φ ∪ Ψ` (an internal
/// trade counts for both its endpoints). Otherwise ties fall back to the
/// smallest global trade mask.
pub fn merge_market(market: &Market, partition: &AgentPartition) -> Result<MergedMarket> {
    let cross = partition.cross_trades(market);
    let side_of = |a: AgentId| partition.part_of(a).expect("partition covers the market");

    let trades: Vec<Trade> = cross
        .iter()
        .map(|&id| {
            let t = market.trade(market.trade_index(id).expect("own trade"));
            Trade {
                id,
                buyer: side_of(t.buyer).merged_id(),
                seller: side_of(t.seller).merged_id(),
            }
        })
        .collect();

    let mut valuations = BTreeMap::new();
    let mut offsets = [0i64; 2];
    for part in [Part::First, Part::Second] {
        let (spec, offset) = merged_valuation(market, partition, part, &cross)?;
        valuations.insert(part.merged_id(), spec);
        offsets[slot(part)] = offset;
    }
    let merged = Market::new(MarketParts {
        agents: vec![Agent::new(1, Role::Trader), Agent::new(2, Role::Trader)],
        trades,
        valuations,
    })?;
    Ok(MergedMarket {
        market: merged,
        partition: partition.clone(),
        offsets,
    })
}

fn merged_valuation(
    market: &Market,
    partition: &AgentPartition,
    part: Part,
    cross: &[TradeId],
) -> Result<(ValuationSpec, i64)> {
    let internal = partition.internal_trades(market, part);
    let total = cross.len() + internal.len();
    if total > MERGE_ENUMERATION_LIMIT {
        return Err(Error::Capacity {
            what: "trades enumerated for a merged agent",
            actual: total as u64,
            limit: MERGE_ENUMERATION_LIMIT as u64,
        });
    }
    let members: Vec<usize> = partition
        .class(part)
        .iter()
        .map(|a| market.agent_index(*a))
        .collect::<Result<_>>()?;
    let perturbed = members
        .iter()
        .all(|&i| matches!(market.spec(i).tie_break, TieBreak::Perturbed));
    let g = market.num_trades();
    if g > 63 {
        return Err(Error::Capacity {
            what: "trades for merged tie-breaking",
            actual: g as u64,
            limit: 63,
        });
    }

    // enumerated trade j -> (global index, [(member slot, local bit)])
    let mut layout: Vec<(usize, Vec<(usize, u32)>)> = Vec::with_capacity(total);
    for id in cross.iter().chain(&internal) {
        let ti = market.trade_index(*id)?;
        let t = market.trade(ti);
        let mut owners = Vec::new();
        for (slot, &ai) in members.iter().enumerate() {
            let me = market.agent_id(ai);
            if t.involves(me) {
                let pos = market
                    .incident(ai)
                    .trades
                    .iter()
                    .position(|&x| x == ti)
                    .expect("incident");
                owners.push((slot, 1u32 << pos));
            }
        }
        layout.push((ti, owners));
    }

    let c = cross.len();
    let n_phi = 1usize << c;
    let n_psi = 1usize << internal.len();
    // (value, tie key); smaller key wins
    let mut best = vec![(Value::NegInf, u128::MAX); n_phi];
    let mut local = vec![0u32; members.len()];
    for psi in 0..n_psi {
        for (phi, slot_best) in best.iter_mut().enumerate() {
            let combined = phi | (psi << c);
            local.iter_mut().for_each(|m| *m = 0);
            let mut key = 0u128;
            for (j, (ti, owners)) in layout.iter().enumerate() {
                if combined & (1 << j) == 0 {
                    continue;
                }
                for &(s, bit) in owners {
                    local[s] |= bit;
                    if perturbed {
                        key += 1u128 << (2 * (g - 1 - ti));
                    }
                }
                if !perturbed {
                    key |= 1u128 << ti;
                }
            }
            let mut v = Value::ZERO;
            for (s, &ai) in members.iter().enumerate() {
                v = v + market.value_local(ai, local[s]);
            }
            // perturbations reward held trades, so invert to keep "smaller wins"
            let key = if perturbed { u128::MAX - key } else { key };
            if v > slot_best.0 || (v == slot_best.0 && key < slot_best.1) {
                *slot_best = (v, key);
            }
        }
    }
    let offset = best[0].0.finite().expect("empty bundles keep a zero total");
    let table = best.iter().map(|&(v, _)| v - offset).collect();
    let keys: Vec<u128> = best.iter().map(|&(_, k)| k).collect();
    let spec = ValuationSpec::table(table).with_tie_break(TieBreak::Ranked(densify(&keys)));
    Ok((spec, offset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn singleton_split_of_two_agents_is_isomorphic() {
        let m = fixtures::example2();
        let p = AgentPartition::split_off(&m, [fixtures::EX2_SELLER].into()).unwrap();
        let merged = merge_market(&m, &p).unwrap();
        let mm = merged.market();
        assert_eq!(mm.num_trades(), 2);
        for (orig, part) in [(fixtures::EX2_SELLER, Part::First), (fixtures::EX2_BUYER, Part::Second)] {
            let oi = m.agent_index(orig).unwrap();
            let mi = mm.agent_index(part.merged_id()).unwrap();
            for mask in 0..4 {
                assert_eq!(m.value_local(oi, mask), mm.value_local(mi, mask));
            }
            assert_eq!(merged.offset(part), 0);
        }
    }

    #[test]
    fn internal_unit_pair_trades_for_free() {
        // class 1: seller 0 (cost 5) sells to buyer 1 (value 10); class 2: buyer 2
        let m = Market::from_parts(
            vec![
                Agent::new(0, Role::Seller),
                Agent::new(1, Role::Buyer),
                Agent::new(2, Role::Buyer),
            ],
            vec![Trade::new(0, 0, 1), Trade::new(1, 0, 2)],
            [
                (AgentId(0), ValuationSpec::unit_seller(5)),
                (AgentId(1), ValuationSpec::unit_buyer(10)),
                (AgentId(2), ValuationSpec::unit_buyer(8)),
            ],
        )
        .unwrap();
        let p = AgentPartition::split_off(&m, [AgentId(0), AgentId(1)].into()).unwrap();
        let merged = merge_market(&m, &p).unwrap();
        assert_eq!(merged.raw_value(Part::First, &Bundle::new()).unwrap(), Value::Finite(5));
        // selling across instead of internally is worth -5
        assert_eq!(
            merged.raw_value(Part::First, &[TradeId(1)].into()).unwrap(),
            Value::Finite(-5)
        );
        assert_eq!(merged.market().num_trades(), 1);
    }

    #[test]
    fn coffee_split_has_expected_cross_trades() {
        let m = fixtures::example1();
        let p = AgentPartition::split_off(&m, [AgentId(0), AgentId(1), AgentId(2)].into()).unwrap();
        let merged = merge_market(&m, &p).unwrap();
        let ids: Vec<_> = merged.market().trades().iter().map(|t| t.id).collect();
        assert_eq!(ids, vec![TradeId(2), TradeId(3), TradeId(4), TradeId(5)]);
        assert!(merged.market().trades().iter().all(|t| t.seller == AgentId(1)));
    }
}
