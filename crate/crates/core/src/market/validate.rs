use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{AgentId, MarketParts, Role, TieBreak, TradeId, ValuationKind, Value, MAX_INCIDENT};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    DuplicateAgent,
    DuplicateTrade,
    SelfTrade,
    UnknownEndpoint(AgentId),
    MissingValuation,
    OrphanValuation,
    EmptyBundleNonZero(Value),
    TableSize { expected: usize, actual: usize },
    TooManyTradesForTable(usize),
    UnitBuyerSells(TradeId),
    UnitSellerBuys(TradeId),
    RoleMismatch { role: Role, trade: TradeId },
    BadRanking,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Agent(AgentId, ViolationKind),
    Trade(TradeId, ViolationKind),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (subject, kind) = match self {
            Violation::Agent(a, k) => (a.to_string(), k),
            Violation::Trade(t, k) => (t.to_string(), k),
        };
        match kind {
            ViolationKind::DuplicateAgent => write!(f, "{subject}: duplicate agent id"),
            ViolationKind::DuplicateTrade => write!(f, "{subject}: duplicate trade id"),
            ViolationKind::SelfTrade => write!(f, "{subject}: buyer equals seller"),
            ViolationKind::UnknownEndpoint(a) => write!(f, "{subject}: endpoint {a} is not in the market"),
            ViolationKind::MissingValuation => write!(f, "{subject}: no valuation"),
            ViolationKind::OrphanValuation => write!(f, "{subject}: valuation for an agent not in the market"),
            ViolationKind::EmptyBundleNonZero(v) => write!(f, "{subject}: value of the empty bundle is {v}, must be 0"),
            ViolationKind::TableSize { expected, actual } => {
                write!(f, "{subject}: table has {actual} entries, expected {expected}")
            }
            ViolationKind::TooManyTradesForTable(k) => {
                write!(f, "{subject}: table over {k} trades exceeds {MAX_INCIDENT}")
            }
            ViolationKind::UnitBuyerSells(t) => write!(f, "{subject}: unit buyer is the seller of {t}"),
            ViolationKind::UnitSellerBuys(t) => write!(f, "{subject}: unit seller is the buyer of {t}"),
            ViolationKind::RoleMismatch { role, trade } => {
                write!(f, "{subject}: role {role} conflicts with its side of {trade}")
            }
            ViolationKind::BadRanking => write!(f, "{subject}: tie-break ranking is not a permutation of all bundles"),
        }
    }
}

/// Lists every broken market or valuation invariant; empty means valid.
pub fn validate_market(parts: &MarketParts) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut roles = BTreeMap::new();
    for a in &parts.agents {
        if roles.insert(a.id, a.role).is_some() {
            out.push(Violation::Agent(a.id, ViolationKind::DuplicateAgent));
        }
    }

    let mut seen = BTreeSet::new();
    // (buying trades, selling trades) per agent, ascending trade id
    let mut sides: BTreeMap<AgentId, (Vec<TradeId>, Vec<TradeId>)> = BTreeMap::new();
    let mut trades: Vec<_> = parts.trades.iter().collect();
    trades.sort_by_key(|t| t.id);
    for t in trades {
        if !seen.insert(t.id) {
            out.push(Violation::Trade(t.id, ViolationKind::DuplicateTrade));
        }
        if t.buyer == t.seller {
            out.push(Violation::Trade(t.id, ViolationKind::SelfTrade));
        }
        for end in [t.buyer, t.seller] {
            if !roles.contains_key(&end) {
                out.push(Violation::Trade(t.id, ViolationKind::UnknownEndpoint(end)));
            }
        }
        sides.entry(t.buyer).or_default().0.push(t.id);
        sides.entry(t.seller).or_default().1.push(t.id);
    }

    for id in parts.valuations.keys() {
        if !roles.contains_key(id) {
            out.push(Violation::Agent(*id, ViolationKind::OrphanValuation));
        }
    }

    let empty = (Vec::new(), Vec::new());
    for (&id, &role) in &roles {
        let (buys, sells) = sides.get(&id).unwrap_or(&empty);
        match role {
            Role::Buyer => {
                if let Some(&t) = sells.first() {
                    out.push(Violation::Agent(id, ViolationKind::RoleMismatch { role, trade: t }));
                }
            }
            Role::Seller => {
                if let Some(&t) = buys.first() {
                    out.push(Violation::Agent(id, ViolationKind::RoleMismatch { role, trade: t }));
                }
            }
            _ => {}
        }

        let Some(spec) = parts.valuations.get(&id) else {
            out.push(Violation::Agent(id, ViolationKind::MissingValuation));
            continue;
        };
        let k = buys.len() + sells.len();
        match &spec.kind {
            ValuationKind::UnitBuyer { .. } => {
                if let Some(&t) = sells.first() {
                    out.push(Violation::Agent(id, ViolationKind::UnitBuyerSells(t)));
                }
            }
            ValuationKind::UnitSeller { .. } => {
                if let Some(&t) = buys.first() {
                    out.push(Violation::Agent(id, ViolationKind::UnitSellerBuys(t)));
                }
            }
            ValuationKind::Intermediary => {}
            ValuationKind::Table(values) => {
                if k > MAX_INCIDENT {
                    out.push(Violation::Agent(id, ViolationKind::TooManyTradesForTable(k)));
                } else if values.len() != 1 << k {
                    out.push(Violation::Agent(
                        id,
                        ViolationKind::TableSize {
                            expected: 1 << k,
                            actual: values.len(),
                        },
                    ));
                }
                if let Some(&v0) = values.first() {
                    if v0 != Value::ZERO {
                        out.push(Violation::Agent(id, ViolationKind::EmptyBundleNonZero(v0)));
                    }
                }
            }
        }
        if let TieBreak::Ranked(ranks) = &spec.tie_break {
            let ok = k <= MAX_INCIDENT && ranks.len() == 1 << k && {
                let mut sorted = ranks.clone();
                sorted.sort_unstable();
                sorted.iter().enumerate().all(|(i, &r)| r as usize == i)
            };
            if !ok {
                out.push(Violation::Agent(id, ViolationKind::BadRanking));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::market::{Agent, Trade, ValuationSpec};

    #[test]
    fn example_markets_are_clean() {
        assert!(validate_market(fixtures::example2().parts()).is_empty());
        assert!(validate_market(fixtures::example1().parts()).is_empty());
    }

    #[test]
    fn self_trade_is_one_violation() {
        let parts = MarketParts {
            agents: vec![Agent::new(0, Role::Trader)],
            trades: vec![Trade::new(7, 0, 0)],
            valuations: [(AgentId(0), ValuationSpec::intermediary())].into(),
        };
        let v = validate_market(&parts);
        assert_eq!(v, vec![Violation::Trade(TradeId(7), ViolationKind::SelfTrade)]);
    }

    #[test]
    fn nonzero_empty_bundle_is_one_violation() {
        let mut parts = fixtures::example2().into_parts();
        let spec = ValuationSpec::table(vec![
            Value::Finite(1),
            Value::Finite(8),
            Value::Finite(9),
            Value::NegInf,
        ]);
        parts.valuations.insert(fixtures::EX2_BUYER, spec);
        let v = validate_market(&parts);
        assert_eq!(v.len(), 1);
        assert!(matches!(
            v[0],
            Violation::Agent(_, ViolationKind::EmptyBundleNonZero(_))
        ));
    }

    #[test]
    fn sparse_table_is_rejected() {
        let mut parts = fixtures::example2().into_parts();
        parts.valuations.insert(
            fixtures::EX2_BUYER,
            ValuationSpec::table(vec![Value::ZERO, Value::Finite(8)]),
        );
        let v = validate_market(&parts);
        assert!(matches!(
            v[0],
            Violation::Agent(_, ViolationKind::TableSize { expected: 4, actual: 2 })
        ));
    }

    #[test]
    fn missing_and_unknown_pieces() {
        let parts = MarketParts {
            agents: vec![Agent::new(0, Role::Trader), Agent::new(0, Role::Trader)],
            trades: vec![Trade::new(1, 0, 5)],
            valuations: [(AgentId(9), ValuationSpec::intermediary())].into(),
        };
        let v = validate_market(&parts);
        assert!(v.contains(&Violation::Agent(AgentId(0), ViolationKind::DuplicateAgent)));
        assert!(v.contains(&Violation::Trade(
            TradeId(1),
            ViolationKind::UnknownEndpoint(AgentId(5))
        )));
        assert!(v.contains(&Violation::Agent(AgentId(9), ViolationKind::OrphanValuation)));
        assert!(v.contains(&Violation::Agent(AgentId(0), ViolationKind::MissingValuation)));
    }
}
