//! Bundled reference markets.
//!
//! `example1` is a small coffee supply chain: two farms, a roaster, a coffee
//! shop and a supermarket. `example2` is the two-trade buyer/seller market in
//! which a complementary seller makes the dynamic cycle under lexicographic
//! tie-breaking. Both also ship as market files under `fixtures/`.

use crate::dynamics::{run_periodic_observed, OfferState, Outcome};
use crate::error::{Error, Result};
use crate::market::{Agent, AgentId, Market, Role, Trade, TradeId, ValuationSpec, Value};
use crate::theory::{ar_rows, ArRows};

pub const EXAMPLE1_TOML: &str = include_str!("../fixtures/example1_coffee.toml");
pub const EXAMPLE2_TOML: &str = include_str!("../fixtures/example2_cycle.toml");

pub const EX2_SELLER: AgentId = AgentId(0);
pub const EX2_BUYER: AgentId = AgentId(1);
pub const EX2_OMEGA: TradeId = TradeId(0);
pub const EX2_PHI: TradeId = TradeId(1);

/// Buyer offers (ω, φ) at the start of the cycling run.
pub const EX2_BUYER_START: [i64; 2] = [4, 5];
/// Seller offers at the start; the seller moves first, so any values work.
pub const EX2_SELLER_START: [i64; 2] = [5, 5];

/// Offer columns of the cycle: buyer, seller, buyer, seller, buyer; each
/// column lists (ω, φ).
pub const EX2_OFFER_TABLE: [[i64; 2]; 5] = [[4, 5], [5, 6], [5, 5], [5, 5], [4, 5]];

pub fn example2() -> Market {
    let n = Value::NegInf;
    Market::from_parts(
        vec![Agent::new(0, Role::Seller), Agent::new(1, Role::Buyer)],
        vec![Trade::new(0, 0, 1), Trade::new(1, 0, 1)],
        [
            (EX2_BUYER, ValuationSpec::table(vec![0.into(), 8.into(), 9.into(), n])),
            (
                EX2_SELLER,
                ValuationSpec::table(vec![0.into(), (-6).into(), (-7).into(), (-9).into()]),
            ),
        ],
    )
    .expect("example 2 market is valid")
}

/// The seller-first alternating run of example 2.
#[derive(Debug, Clone)]
pub struct Example2Replay {
    /// The buyer's start offers, then the responder's offers after each of
    /// the first four best responses; each column lists (ω, φ).
    pub columns: Vec<[i64; 2]>,
    pub outcome: Outcome,
    pub rows: ArRows,
}

impl Example2Replay {
    /// True if the columns equal [`EX2_OFFER_TABLE`] and the run cycles
    /// every four best responses.
    pub fn reproduces_table(&self) -> bool {
        self.columns == EX2_OFFER_TABLE && matches!(self.outcome, Outcome::CycleDetected { period: 4, .. })
    }
}

/// Alternates seller and buyer from `start` until the run repeats.
pub fn replay_example2(market: &Market, start: &OfferState) -> Result<Example2Replay> {
    if market.num_agents() != 2 || market.num_trades() != 2 {
        return Err(Error::Domain("example 2 has two agents and two trades".into()));
    }
    let offers_of = |state: &OfferState, agent: AgentId| -> Result<[i64; 2]> {
        let mut col = [0; 2];
        for (k, t) in market.trades().iter().enumerate() {
            let side = t.side_of(agent).ok_or(Error::NotIncident { agent, trade: t.id })?;
            col[k] = state.offer(market, t.id, side)?;
        }
        Ok(col)
    };
    let mut columns = vec![offers_of(start, EX2_BUYER)?];
    let mut failure = None;
    let r = run_periodic_observed(market, start.clone(), &[EX2_SELLER, EX2_BUYER], 64, &mut |v| {
        if columns.len() < EX2_OFFER_TABLE.len() {
            match offers_of(v.state, market.agent_id(v.agent)) {
                Ok(c) => columns.push(c),
                Err(e) => failure = Some(e),
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Example2Replay {
        columns,
        outcome: r.trace.outcome,
        rows: ar_rows(market, &r.trace)?,
    })
}

fn coffee_parts() -> (Vec<Agent>, Vec<Trade>) {
    let agents = vec![
        Agent::new(0, Role::Seller),
        Agent::new(1, Role::Seller),
        Agent::new(2, Role::Intermediary),
        Agent::new(3, Role::Buyer),
        Agent::new(4, Role::Buyer),
    ];
    let trades = vec![
        Trade::new(0, 0, 2), // raw beans, farm 0 -> roaster
        Trade::new(1, 1, 2), // raw beans, farm 1 -> roaster
        Trade::new(2, 2, 3), // blend, roaster -> coffee shop
        Trade::new(3, 2, 4), // blend, roaster -> supermarket
        Trade::new(4, 0, 4), // raw beans, farm 0 -> supermarket
        Trade::new(5, 1, 3), // raw beans, farm 1 -> coffee shop
    ];
    (agents, trades)
}

pub fn example1() -> Market {
    let (agents, trades) = coffee_parts();
    let n = Value::NegInf;
    // roaster bits: 0 = buy t0, 1 = buy t1, 2 = sell t2, 3 = sell t3
    let mut roaster = vec![n; 16];
    roaster[0b0000] = 0.into();
    roaster[0b0001] = 2.into();
    roaster[0b0010] = 2.into();
    for m in [0b0101, 0b1001, 0b0110, 0b1010] {
        roaster[m] = (-3).into();
    }
    Market::from_parts(
        agents,
        trades,
        [
            (AgentId(0), ValuationSpec::unit_seller(4)),
            (AgentId(1), ValuationSpec::unit_seller(5)),
            (AgentId(2), ValuationSpec::table(roaster)),
            (
                AgentId(3),
                ValuationSpec::table(vec![0.into(), 30.into(), 12.into(), n]),
            ),
            (
                AgentId(4),
                ValuationSpec::table(vec![0.into(), 25.into(), 10.into(), n]),
            ),
        ],
    )
    .expect("example 1 market is valid")
}

/// Example 2 at its documented start offers.
pub fn example2_start(market: &Market) -> Result<OfferState> {
    OfferState::new(market, EX2_BUYER_START.to_vec(), EX2_SELLER_START.to_vec(), 1)
}

#[cfg(test)]
pub(crate) fn example1_with_plain_intermediary() -> Market {
    example1()
        .with_valuation(AgentId(2), ValuationSpec::intermediary())
        .unwrap()
}
