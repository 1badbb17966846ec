//! Shared generators for integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use tradenet::dynamics::OfferState;
use tradenet::market::{
    check_full_substitutability, Agent, AgentId, FsMode, Market, PriceBox, Role, TieBreak, Trade, ValuationSpec, Value,
};
use tradenet::theory::{self, AgentPartition, Phase};

/// Valuation families that are substitutable by construction.
fn fs_spec<R: Rng>(rng: &mut R, role: Role, k: usize, hi: i64) -> ValuationSpec {
    match role {
        Role::Buyer | Role::Seller => {
            let sign = if role == Role::Buyer { 1 } else { -1 };
            match rng.gen_range(0..3) {
                0 if role == Role::Buyer => ValuationSpec::unit_buyer(rng.gen_range(1..=hi)),
                0 => ValuationSpec::unit_seller(rng.gen_range(1..=hi)),
                1 => {
                    // additive over the incident trades
                    let c: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=hi / 2 + 1)).collect();
                    ValuationSpec::table(
                        (0..1u32 << k)
                            .map(|m| {
                                let s: i64 = (0..k).filter(|j| m & (1 << j) != 0).map(|j| c[j]).sum();
                                Value::Finite(sign * s)
                            })
                            .collect(),
                    )
                }
                _ => {
                    // unit demand with a value per trade
                    let c: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=hi)).collect();
                    ValuationSpec::table(
                        (0..1u32 << k)
                            .map(|m| match m.count_ones() {
                                0 => Value::ZERO,
                                1 => Value::Finite(sign * c[m.trailing_zeros() as usize]),
                                _ => Value::NegInf,
                            })
                            .collect(),
                    )
                }
            }
        }
        _ => ValuationSpec::intermediary(),
    }
}

/// A random market on `n` agents whose valuations all pass the checker on
/// `[0, hi + 1]`. Every agent's tie-break is set to `tie_break`.
pub fn random_fs_market<R: Rng>(rng: &mut R, n: usize, max_trades: usize, hi: i64, tie_break: TieBreak) -> Market {
    loop {
        let roles: Vec<Role> = (0..n)
            .map(|_| *[Role::Buyer, Role::Seller, Role::Intermediary].choose(rng).unwrap())
            .collect();
        let mut trades = Vec::new();
        let attempts = rng.gen_range(1..=max_trades);
        for _ in 0..attempts * 3 {
            if trades.len() >= attempts {
                break;
            }
            let s = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if s == b || roles[s] == Role::Buyer || roles[b] == Role::Seller {
                continue;
            }
            trades.push(Trade::new(trades.len() as u32, s as u32, b as u32));
        }
        let agents: Vec<Agent> = (0..n).map(|i| Agent::new(i as u32, roles[i])).collect();
        let degree = |i: usize| trades.iter().filter(|t| t.involves(AgentId(i as u32))).count();
        if (0..n).any(|i| degree(i) > 4) {
            continue;
        }
        let vals: Vec<(AgentId, ValuationSpec)> = (0..n)
            .map(|i| {
                let spec = fs_spec(rng, roles[i], degree(i), hi).with_tie_break(tie_break.clone());
                (AgentId(i as u32), spec)
            })
            .collect();
        let m = Market::from_parts(agents, trades, vals).expect("generated market is valid");
        let fs = m.agents().iter().all(|a| {
            let b = PriceBox::uniform(&m, a.id, 0, hi + 1).unwrap();
            check_full_substitutability(&m, a.id, &b, FsMode::UnitSteps)
                .unwrap()
                .is_fully_substitutable
        });
        if fs {
            return m;
        }
    }
}

pub fn random_state<R: Rng>(rng: &mut R, m: &Market, hi: i64) -> OfferState {
    let b = (0..m.num_trades()).map(|_| rng.gen_range(0..=hi)).collect();
    let s = (0..m.num_trades()).map(|_| rng.gen_range(0..=hi)).collect();
    OfferState::new(m, b, s, 1).unwrap()
}

pub fn terminating_sequence<R: Rng>(
    rng: &mut R,
    m: &Market,
    subset: &BTreeSet<AgentId>,
    state: &OfferState,
    budget: u64,
) -> Option<Vec<AgentId>> {
    theory::terminating_sequence(m, subset, state, rng, budget).unwrap()
}

pub fn alternating_phases<R: Rng>(
    rng: &mut R,
    m: &Market,
    partition: &AgentPartition,
    start: &OfferState,
    max_phases: usize,
) -> Vec<Phase> {
    theory::alternating_phases(m, partition, start, rng, max_phases, 100_000).unwrap()
}

/// A random non-empty proper subset of the agents.
pub fn random_split<R: Rng>(rng: &mut R, m: &Market) -> BTreeSet<AgentId> {
    let ids: Vec<AgentId> = m.agents().iter().map(|a| a.id).collect();
    let k = rng.gen_range(1..ids.len());
    ids.choose_multiple(rng, k).copied().collect()
}
