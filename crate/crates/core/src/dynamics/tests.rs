use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fixtures::{self, EX2_BUYER, EX2_OMEGA, EX2_PHI, EX2_SELLER};
use crate::market::{Agent, Role, Trade, ValuationSpec};

fn ex2_start(m: &Market) -> OfferState {
    OfferState::new(
        m,
        fixtures::EX2_BUYER_START.to_vec(),
        fixtures::EX2_SELLER_START.to_vec(),
        1,
    )
    .unwrap()
}

fn unit_pair(value: i64, cost: i64) -> Market {
    Market::from_parts(
        vec![Agent::new(0, Role::Seller), Agent::new(1, Role::Buyer)],
        vec![Trade::new(0, 0, 1)],
        [
            (AgentId(0), ValuationSpec::unit_seller(cost)),
            (AgentId(1), ValuationSpec::unit_buyer(value)),
        ],
    )
    .unwrap()
}

#[test]
fn example2_seller_then_buyer_responses() {
    let m = fixtures::example2();
    let s = ex2_start(&m);
    let br = best_response(&m, &s, EX2_SELLER).unwrap();
    assert!(br.demanded.is_empty());
    assert_eq!(br.offers[&EX2_OMEGA], 5);
    assert_eq!(br.offers[&EX2_PHI], 6);
    // the seller's omega offer was already 5
    assert_eq!(br.changed, [EX2_PHI].into());

    let s = OfferState::new(&m, vec![4, 5], vec![5, 6], 1).unwrap();
    let br = best_response(&m, &s, EX2_BUYER).unwrap();
    assert_eq!(br.demanded, [EX2_OMEGA].into());
    assert_eq!((br.offers[&EX2_OMEGA], br.offers[&EX2_PHI]), (5, 5));
}

#[test]
fn example2_cycles_with_period_four() {
    let m = fixtures::example2();
    let r = run_alternating(&m, ex2_start(&m), EX2_SELLER, 100).unwrap();
    assert_eq!(r.trace.outcome, Outcome::CycleDetected { period: 4, prefix: 1 });
    assert!(r.executed.is_empty());
    assert!(!is_equilibrium(&m, &r.final_state));
}

#[test]
fn example2_sequence_returns_to_start_offers() {
    let m = fixtures::example2();
    let seq = [EX2_SELLER, EX2_BUYER, EX2_SELLER, EX2_BUYER];
    let r = run_deterministic(&m, ex2_start(&m), &seq).unwrap();
    assert_eq!(r.final_state.buyer_offers(), &fixtures::EX2_BUYER_START);
    assert_eq!(r.trace.steps.len(), 4);
}

#[test]
fn empty_sequence_leaves_state_alone() {
    let m = fixtures::example2();
    let s = ex2_start(&m);
    let r = run_deterministic(&m, s.clone(), &[]).unwrap();
    assert_eq!(r.final_state, s);
    assert_eq!(r.trace.satisfied_series, vec![0.0]);
}

#[test]
fn seller_response_wakes_buyer() {
    let m = fixtures::example2();
    let mut s = ex2_start(&m);
    let bi = m.agent_index(EX2_BUYER).unwrap();
    s.mark_satisfied(bi);
    let rec = step(&m, &mut s, &mut ChaCha8Rng::seed_from_u64(1), 1).unwrap();
    assert_eq!(rec.agent, EX2_SELLER);
    assert!(s.is_unsatisfied(bi));
    assert!(!s.is_unsatisfied(m.agent_index(EX2_SELLER).unwrap()));
}

#[test]
fn unchanged_response_shrinks_unsatisfied_by_one() {
    let m = unit_pair(10, 5);
    // the buyer wants the trade at 6 and already offers 6
    let mut s = OfferState::new(&m, vec![6], vec![6], 1).unwrap();
    s.mark_satisfied(0);
    let before = s.unsatisfied_count();
    let rec = step(&m, &mut s, &mut ChaCha8Rng::seed_from_u64(0), 1).unwrap();
    assert!(rec.changes.is_empty());
    assert_eq!(s.unsatisfied_count(), before - 1);
}

#[test]
fn step_requires_unsatisfied_agent() {
    let m = unit_pair(10, 5);
    let mut s = OfferState::new(&m, vec![6], vec![6], 1).unwrap();
    s.mark_satisfied(0);
    s.mark_satisfied(1);
    let err = step(&m, &mut s, &mut ChaCha8Rng::seed_from_u64(0), 1).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
}

/// Brute-force check that the single unit trade executes in `[cost, value]`
/// from every start in a small grid and every seed.
#[test]
fn unit_pair_executes_between_cost_and_value() {
    let m = unit_pair(10, 5);
    for b0 in -3..=14 {
        for s0 in -3..=14 {
            for seed in 0..3 {
                let s = OfferState::new(&m, vec![b0], vec![s0], 1).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let r = run(&m, s, &mut rng, RunOptions::new(10_000)).unwrap();
                assert!(r.trace.outcome.converged());
                assert!(is_equilibrium(&m, &r.final_state));
                let (b, s) = (r.final_state.buyer_offer(0), r.final_state.seller_offer(0));
                assert!(b <= s && s <= b + 1);
                assert_eq!(r.executed.len(), 1, "start ({b0}, {s0})");
                assert!((5..=10).contains(&b));
                let total: i64 = r.utilities.values().map(|u| u.finite().unwrap()).sum();
                assert_eq!(total, 5);
            }
        }
    }
}

#[test]
fn zero_trade_market_converges_in_one_pass() {
    let m = Market::from_parts(
        vec![
            Agent::new(0, Role::Trader),
            Agent::new(1, Role::Trader),
            Agent::new(2, Role::Trader),
        ],
        vec![],
        [
            (AgentId(0), ValuationSpec::intermediary()),
            (AgentId(1), ValuationSpec::intermediary()),
            (AgentId(2), ValuationSpec::intermediary()),
        ],
    )
    .unwrap();
    let s = OfferState::new(&m, vec![], vec![], 1).unwrap();
    let r = run(&m, s, &mut ChaCha8Rng::seed_from_u64(3), RunOptions::new(10)).unwrap();
    assert_eq!(r.trace.outcome, Outcome::Converged { iterations: 3 });
    assert_eq!(r.trace.satisfied_series.last(), Some(&1.0));
    assert!(r.executed.is_empty());
}

#[test]
fn executed_trades_off_equilibrium_is_an_error() {
    let m = unit_pair(10, 5);
    let s = OfferState::new(&m, vec![7], vec![7], 1).unwrap();
    assert!(!is_equilibrium(&m, &s));
    assert!(matches!(executed_trades(&m, &s), Err(Error::Precondition(_))));
}

#[test]
fn executed_trades_picks_equal_offers() {
    // the second buyer values the good below the seller's cost
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
            (AgentId(2), ValuationSpec::unit_buyer(4)),
        ],
    )
    .unwrap();
    let mut s = OfferState::new(&m, vec![7, 3], vec![7, 4], 1).unwrap();
    for a in 0..3 {
        s.mark_satisfied(a);
    }
    assert_eq!(executed_trades(&m, &s).unwrap(), [TradeId(0)].into());
}

#[test]
fn equilibrium_is_a_fixed_point() {
    let m = fixtures::example1();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = OfferState::initialize(&m, &InitPolicy::UniformRandom { lo: 0, hi: 30 }, 1, &mut rng).unwrap();
    let r = run(&m, s, &mut rng, RunOptions::new(100_000)).unwrap();
    assert!(r.trace.outcome.converged());
    for a in m.agents() {
        assert!(best_response(&m, &r.final_state, a.id).unwrap().changed.is_empty());
    }
}

#[test]
fn runs_are_seed_deterministic() {
    let m = fixtures::example1();
    let go = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = OfferState::initialize(&m, &InitPolicy::UniformRandom { lo: 0, hi: 30 }, 1, &mut rng).unwrap();
        run(&m, s, &mut rng, RunOptions::new(100_000).recording()).unwrap()
    };
    assert_eq!(go(5), go(5));
}

#[test]
fn monitor_accepts_coffee_runs() {
    let m = fixtures::example1();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = OfferState::initialize(&m, &InitPolicy::UniformRandom { lo: -20, hi: 40 }, 1, &mut rng).unwrap();
        let v = crate::market::value_bound(&m, s.buyer_offers().iter().chain(s.seller_offers()));
        let mut mon = InvariantMonitor::new(&m, &s, v);
        let r = run_observed(&m, s, &mut rng, RunOptions::new(100_000), &mut |view| mon.observe(view)).unwrap();
        assert!(r.trace.outcome.converged());
        assert!(mon.is_clean(), "{:?}", mon.violations());
        assert_eq!(mon.steps_observed(), r.trace.iterations());
    }
}

#[test]
fn monitor_flags_out_of_range_start() {
    let m = unit_pair(10, 5);
    let s = OfferState::new(&m, vec![500], vec![0], 1).unwrap();
    let mon = InvariantMonitor::new(&m, &s, 10);
    assert_eq!(mon.violations().len(), 1);
}

#[test]
fn cycle_replays_under_deterministic_run() {
    let m = fixtures::example2();
    let r = run_alternating(&m, ex2_start(&m), EX2_SELLER, 100).unwrap();
    let Outcome::CycleDetected { period, prefix } = r.trace.outcome else {
        panic!("expected a cycle");
    };
    let order = [EX2_SELLER, EX2_BUYER];
    let warm: Vec<_> = (0..prefix).map(|i| order[i as usize % 2]).collect();
    let a = run_deterministic(&m, ex2_start(&m), &warm).unwrap().final_state;
    let cycle: Vec<_> = (prefix..prefix + period).map(|i| order[i as usize % 2]).collect();
    let b = run_deterministic(&m, a.clone(), &cycle).unwrap().final_state;
    assert_eq!(a, b);
}

#[test]
fn explicit_policy_reproduces_example2_start() {
    let m = fixtures::example2();
    let mut map = BTreeMap::new();
    for (t, b, s) in [(EX2_OMEGA, 4, 5), (EX2_PHI, 5, 5)] {
        map.insert((t, Side::Buyer), b);
        map.insert((t, Side::Seller), s);
    }
    let s = OfferState::initialize(&m, &InitPolicy::Explicit(map), 1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(s, ex2_start(&m));
}
