use serde::Serialize;

use super::{OfferState, StepView};
use crate::market::{Market, Side, TradeId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonitorViolation {
    OfferOutOfBounds {
        iteration: u64,
        trade: TradeId,
        side: Side,
        offer: i64,
        bound: i64,
    },
    /// Seller offer outside `[buyer offer, buyer offer + ε]`.
    GapViolated {
        iteration: u64,
        trade: TradeId,
        buyer_offer: i64,
        seller_offer: i64,
    },
}

/// Watches a run for the offer-range and main-phase invariants.
///
/// Offers must stay in `[-2V-ε, 2V+ε]`. Once both endpoints of a trade have
/// responded at least once, its seller offer must lie in
/// `[buyer offer, buyer offer + ε]` after every step.
#[derive(Debug, Clone)]
pub struct InvariantMonitor<'m> {
    market: &'m Market,
    bound: i64,
    epsilon: i64,
    responded: Vec<bool>,
    violations: Vec<MonitorViolation>,
    steps: u64,
}

impl<'m> InvariantMonitor<'m> {
    /// Starts monitoring from `initial`, checking its offers against the bound.
    pub fn new(market: &'m Market, initial: &OfferState, value_bound: u64) -> Self {
        let epsilon = initial.epsilon();
        let mut mon = InvariantMonitor {
            market,
            bound: 2 * value_bound as i64 + epsilon,
            epsilon,
            responded: vec![false; market.num_agents()],
            violations: Vec::new(),
            steps: 0,
        };
        for t in 0..market.num_trades() {
            mon.check_bounds(0, t, initial);
        }
        mon
    }

    pub fn bound(&self) -> i64 {
        self.bound
    }

    pub fn observe(&mut self, view: &StepView) {
        self.steps += 1;
        self.responded[view.agent] = true;
        let me = self.market.agent_id(view.agent);
        for &t in &self.market.incident(view.agent).trades {
            self.check_bounds(view.iteration, t, view.state);
            let trade = self.market.trade(t);
            let other = trade.counterpart(me).expect("incident trade");
            let oi = self.market.agent_index(other).expect("validated endpoint");
            if self.responded[oi] {
                let (b, s) = (view.state.buyer_offer(t), view.state.seller_offer(t));
                if !(b <= s && s <= b + self.epsilon) {
                    self.violations.push(MonitorViolation::GapViolated {
                        iteration: view.iteration,
                        trade: trade.id,
                        buyer_offer: b,
                        seller_offer: s,
                    });
                }
            }
        }
    }

    fn check_bounds(&mut self, iteration: u64, t: usize, state: &OfferState) {
        for (side, offer) in [
            (Side::Buyer, state.buyer_offer(t)),
            (Side::Seller, state.seller_offer(t)),
        ] {
            if offer.abs() > self.bound {
                self.violations.push(MonitorViolation::OfferOutOfBounds {
                    iteration,
                    trade: self.market.trade(t).id,
                    side,
                    offer,
                    bound: self.bound,
                });
            }
        }
    }

    pub fn steps_observed(&self) -> u64 {
        self.steps
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[MonitorViolation] {
        &self.violations
    }
}
