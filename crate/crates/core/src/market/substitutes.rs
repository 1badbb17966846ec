//! Full-substitutability checking over a finite integer price box.
//!
//! The check is a certificate over the box only: prices outside it are never
//! examined.
//!
//! Two routes are offered. [`FsMode::Exhaustive`] tests every ordered pair of
//! box points that meets a condition's premise. [`FsMode::UnitSteps`] tests
//! only pairs that differ by one unit in one coordinate; both conditions are
//! preserved under chaining monotone paths of such steps, so the two routes
//! accept exactly the same demand maps while the second scales to much
//! larger boxes.

use std::collections::BTreeMap;

use super::{AgentId, Bundle, Market, PriceVector, TradeId};
use crate::error::{Error, Result};

/// Box points allowed in [`FsMode::Exhaustive`] (pairs grow quadratically).
pub const EXHAUSTIVE_POINT_LIMIT: u64 = 4_096;
/// Box points allowed in [`FsMode::UnitSteps`].
pub const LOCAL_POINT_LIMIT: u64 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FsMode {
    Exhaustive,
    #[default]
    UnitSteps,
}

/// Inclusive integer price range per incident trade.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceBox(pub BTreeMap<TradeId, (i64, i64)>);

impl PriceBox {
    /// The same `[lo, hi]` range on every incident trade of `agent`.
    pub fn uniform(market: &Market, agent: AgentId, lo: i64, hi: i64) -> Result<PriceBox> {
        Ok(PriceBox(
            market
                .incident_trades(agent)?
                .into_iter()
                .map(|t| (t, (lo, hi)))
                .collect(),
        ))
    }
}

/// Which of the two substitutability conditions failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsCondition {
    /// Buying prices weakly fall, selling prices fixed.
    BuyingPricesFall,
    /// Selling prices weakly rise, buying prices fixed.
    SellingPricesRise,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FsWitness {
    pub condition: FsCondition,
    pub prices: PriceVector,
    pub prices_prime: PriceVector,
    pub demanded: Bundle,
    pub demanded_prime: Bundle,
}

impl FsWitness {
    /// Re-runs demand at both price vectors and checks the recorded bundles
    /// come back.
    pub fn replays(&self, market: &Market, agent: AgentId) -> bool {
        market.demand(agent, &self.prices).ok().as_ref() == Some(&self.demanded)
            && market.demand(agent, &self.prices_prime).ok().as_ref() == Some(&self.demanded_prime)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FsReport {
    pub is_fully_substitutable: bool,
    pub witness: Option<FsWitness>,
    pub prices_checked: u64,
}

struct Grid {
    lo: Vec<i64>,
    len: Vec<u64>,
    stride: Vec<u64>,
}

impl Grid {
    fn coords(&self, mut idx: u64, out: &mut [i64]) {
        for ((o, &lo), &len) in out.iter_mut().zip(&self.lo).zip(&self.len) {
            *o = lo + (idx % len) as i64;
            idx /= len;
        }
    }
}

/// Checks both substitutability conditions for `agent` over `price_box`,
/// stopping at the first violation.
pub fn check_full_substitutability(
    market: &Market,
    agent: AgentId,
    price_box: &PriceBox,
    mode: FsMode,
) -> Result<FsReport> {
    let ai = market.agent_index(agent)?;
    let inc = market.incident(ai);
    let k = inc.len();

    let mut lo = Vec::with_capacity(k);
    let mut len = Vec::with_capacity(k);
    for &t in &inc.trades {
        let id = market.trade(t).id;
        let &(a, b) = price_box.0.get(&id).ok_or(Error::MissingPrice(id))?;
        if b < a {
            return Err(Error::Domain(format!("empty price range [{a}, {b}] for {id}")));
        }
        lo.push(a);
        len.push((b - a + 1) as u64);
    }
    let limit = match mode {
        FsMode::Exhaustive => EXHAUSTIVE_POINT_LIMIT,
        FsMode::UnitSteps => LOCAL_POINT_LIMIT,
    };
    let mut points = 1u64;
    for &l in &len {
        points = points.saturating_mul(l);
    }
    if points > limit {
        return Err(Error::Capacity {
            what: "price box points",
            actual: points,
            limit,
        });
    }
    let mut stride = vec![1u64; k];
    for j in 1..k {
        stride[j] = stride[j - 1] * len[j - 1];
    }
    let grid = Grid { lo, len, stride };

    let mut demand = Vec::with_capacity(points as usize);
    let mut p = vec![0i64; k];
    for idx in 0..points {
        grid.coords(idx, &mut p);
        demand.push(market.demand_local(ai, &p)?);
    }

    let buy = inc.buy_mask;
    let sell = inc.sell_mask;
    let mut checked = 0u64;
    let mut violation = None;
    let mut p2 = vec![0i64; k];

    match mode {
        FsMode::UnitSteps => {
            'outer: for idx in 0..points {
                grid.coords(idx, &mut p);
                for j in 0..k {
                    let bit = 1u32 << j;
                    let coord = (idx / grid.stride[j]) % grid.len[j];
                    // buying trade: step its price down; selling: step up
                    let (other, cond) = if buy & bit != 0 {
                        if coord == 0 {
                            continue;
                        }
                        (idx - grid.stride[j], FsCondition::BuyingPricesFall)
                    } else {
                        if coord + 1 == grid.len[j] {
                            continue;
                        }
                        (idx + grid.stride[j], FsCondition::SellingPricesRise)
                    };
                    checked += 1;
                    let eq = !bit & inc.full_mask();
                    if !holds(cond, demand[idx as usize], demand[other as usize], eq, buy, sell) {
                        violation = Some((cond, idx, other));
                        break 'outer;
                    }
                }
            }
        }
        FsMode::Exhaustive => {
            'outer: for a in 0..points {
                grid.coords(a, &mut p);
                for b in 0..points {
                    grid.coords(b, &mut p2);
                    let mut eq = 0u32;
                    let mut buys_fall = true;
                    let mut sells_rise = true;
                    for j in 0..k {
                        let bit = 1u32 << j;
                        if p[j] == p2[j] {
                            eq |= bit;
                        } else if buy & bit != 0 {
                            sells_rise = false;
                            if p[j] < p2[j] {
                                buys_fall = false;
                            }
                        } else {
                            buys_fall = false;
                            if p[j] > p2[j] {
                                sells_rise = false;
                            }
                        }
                    }
                    for (premise, cond) in [
                        (buys_fall, FsCondition::BuyingPricesFall),
                        (sells_rise, FsCondition::SellingPricesRise),
                    ] {
                        if !premise {
                            continue;
                        }
                        checked += 1;
                        if !holds(cond, demand[a as usize], demand[b as usize], eq, buy, sell) {
                            violation = Some((cond, a, b));
                            break 'outer;
                        }
                    }
                }
            }
        }
    }

    let witness = violation.map(|(condition, a, b)| {
        let to_prices = |idx: u64| -> PriceVector {
            let mut c = vec![0i64; k];
            grid.coords(idx, &mut c);
            inc.trades
                .iter()
                .zip(c)
                .map(|(&t, price)| (market.trade(t).id, price))
                .collect()
        };
        FsWitness {
            condition,
            prices: to_prices(a),
            prices_prime: to_prices(b),
            demanded: market.mask_to_bundle(ai, demand[a as usize]),
            demanded_prime: market.mask_to_bundle(ai, demand[b as usize]),
        }
    });
    Ok(FsReport {
        is_fully_substitutable: witness.is_none(),
        witness,
        prices_checked: checked,
    })
}

/// The conclusion of a condition for demanded masks `d` (at p) and `d2` (at p'),
/// where `eq` flags trades priced equally in p and p'.
fn holds(cond: FsCondition, d: u32, d2: u32, eq: u32, buy: u32, sell: u32) -> bool {
    let subset = |a: u32, b: u32| a & !b == 0;
    match cond {
        FsCondition::BuyingPricesFall => subset(d & sell, d2 & sell) && subset(d2 & buy & eq, d & buy),
        FsCondition::SellingPricesRise => subset(d & buy, d2 & buy) && subset(d2 & sell & eq, d & sell),
    }
}
