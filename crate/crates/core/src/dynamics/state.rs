use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{AgentId, Market, Side, TradeId};

/// How initial offers are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitPolicy {
    #[default]
    Zeros,
    /// Independent uniform draws from `[lo, hi]` for every offer.
    UniformRandom { lo: i64, hi: i64 },
    /// One offer per (trade, side); must be complete.
    #[serde(skip)]
    Explicit(BTreeMap<(TradeId, Side), i64>),
}

/// Offers on both sides of every trade plus the unsatisfied-agent set.
///
/// Offers are stored in the market's trade order and agents in the market's
/// agent order, so a state is only meaningful together with its market.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OfferState {
    buyer: Vec<i64>,
    seller: Vec<i64>,
    unsatisfied: Vec<bool>,
    unsatisfied_count: usize,
    epsilon: i64,
}

impl OfferState {
    /// A state with the given offers (market trade order) and every agent unsatisfied.
    pub fn new(market: &Market, buyer: Vec<i64>, seller: Vec<i64>, epsilon: i64) -> Result<OfferState> {
        if buyer.len() != market.num_trades() || seller.len() != market.num_trades() {
            return Err(Error::Domain(format!(
                "expected {} offers per side, got {} buyer and {} seller offers",
                market.num_trades(),
                buyer.len(),
                seller.len()
            )));
        }
        if epsilon < 1 {
            return Err(Error::Domain(format!("step size must be positive, got {epsilon}")));
        }
        let n = market.num_agents();
        Ok(OfferState {
            buyer,
            seller,
            unsatisfied: vec![true; n],
            unsatisfied_count: n,
            epsilon,
        })
    }

    pub fn initialize<R: Rng + ?Sized>(
        market: &Market,
        policy: &InitPolicy,
        epsilon: i64,
        rng: &mut R,
    ) -> Result<OfferState> {
        let m = market.num_trades();
        let (buyer, seller) = match policy {
            InitPolicy::Zeros => (vec![0; m], vec![0; m]),
            InitPolicy::UniformRandom { lo, hi } => {
                if hi < lo {
                    return Err(Error::Domain(format!("empty offer range [{lo}, {hi}]")));
                }
                let mut buyer = Vec::with_capacity(m);
                let mut seller = Vec::with_capacity(m);
                for _ in 0..m {
                    buyer.push(rng.gen_range(*lo..=*hi));
                    seller.push(rng.gen_range(*lo..=*hi));
                }
                (buyer, seller)
            }
            InitPolicy::Explicit(map) => {
                let mut buyer = Vec::with_capacity(m);
                let mut seller = Vec::with_capacity(m);
                for t in market.trades() {
                    for (side, out) in [(Side::Buyer, &mut buyer), (Side::Seller, &mut seller)] {
                        let v = map
                            .get(&(t.id, side))
                            .ok_or_else(|| Error::Domain(format!("no initial {side:?} offer for {}", t.id)))?;
                        out.push(*v);
                    }
                }
                (buyer, seller)
            }
        };
        OfferState::new(market, buyer, seller, epsilon)
    }

    pub fn epsilon(&self) -> i64 {
        self.epsilon
    }

    pub fn buyer_offer(&self, trade: usize) -> i64 {
        self.buyer[trade]
    }

    pub fn seller_offer(&self, trade: usize) -> i64 {
        self.seller[trade]
    }

    pub fn buyer_offers(&self) -> &[i64] {
        &self.buyer
    }

    pub fn seller_offers(&self) -> &[i64] {
        &self.seller
    }

    pub fn offer(&self, market: &Market, trade: TradeId, side: Side) -> Result<i64> {
        let t = market.trade_index(trade)?;
        Ok(match side {
            Side::Buyer => self.buyer[t],
            Side::Seller => self.seller[t],
        })
    }

    pub(crate) fn offer_mut(&mut self, trade: usize, side: Side) -> &mut i64 {
        match side {
            Side::Buyer => &mut self.buyer[trade],
            Side::Seller => &mut self.seller[trade],
        }
    }

    /// Offers facing agent `agent` (the counterparts' offers), aligned with its
    /// incident trades.
    pub fn prices_facing(&self, market: &Market, agent: usize) -> Vec<i64> {
        let inc = market.incident(agent);
        inc.trades
            .iter()
            .zip(&inc.signs)
            .map(|(&t, &s)| if s > 0 { self.seller[t] } else { self.buyer[t] })
            .collect()
    }

    pub fn is_unsatisfied(&self, agent: usize) -> bool {
        self.unsatisfied[agent]
    }

    pub fn unsatisfied_count(&self) -> usize {
        self.unsatisfied_count
    }

    pub fn unsatisfied_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.unsatisfied.iter().enumerate().filter(|(_, &u)| u).map(|(i, _)| i)
    }

    pub fn unsatisfied_agents(&self, market: &Market) -> Vec<AgentId> {
        self.unsatisfied_indices().map(|i| market.agent_id(i)).collect()
    }

    pub fn satisfied_proportion(&self) -> f64 {
        let n = self.unsatisfied.len();
        if n == 0 {
            1.0
        } else {
            (n - self.unsatisfied_count) as f64 / n as f64
        }
    }

    pub fn mark_unsatisfied(&mut self, agent: usize) {
        if !self.unsatisfied[agent] {
            self.unsatisfied[agent] = true;
            self.unsatisfied_count += 1;
        }
    }

    pub fn mark_satisfied(&mut self, agent: usize) {
        if self.unsatisfied[agent] {
            self.unsatisfied[agent] = false;
            self.unsatisfied_count -= 1;
        }
    }

    /// Offers of one side as a map, for reporting.
    pub fn offers_by_trade(&self, market: &Market) -> BTreeMap<TradeId, (i64, i64)> {
        market
            .trades()
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id, (self.buyer[i], self.seller[i])))
            .collect()
    }
}
