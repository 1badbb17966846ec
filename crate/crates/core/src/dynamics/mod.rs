//! The best-response negotiation dynamic.
//!
//! Every trade carries a buyer offer and a seller offer. A responding agent
//! reads its counterparts' offers as prices, computes its demanded bundle,
//! matches the counterpart on demanded trades and backs off by `ε`
//! elsewhere. Responders become satisfied; counterparts whose facing offer
//! changed value become unsatisfied. The dynamic stops once nobody is
//! unsatisfied.

mod monitor;
mod state;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{AgentId, Bundle, Market, Side, TradeId, Value};

pub use monitor::{InvariantMonitor, MonitorViolation};
pub use state::{InitPolicy, OfferState};

/// A best response computed but not yet applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BestResponse {
    pub agent: AgentId,
    pub demanded: Bundle,
    /// The responder's new offer on each incident trade.
    pub offers: BTreeMap<TradeId, i64>,
    /// Trades whose stored offer value actually changes.
    pub changed: BTreeSet<TradeId>,
}

/// Local form of a best response, aligned with the agent's incident trades.
#[derive(Debug, Clone)]
pub(crate) struct LocalResponse {
    pub demanded: u32,
    pub offers: Vec<i64>,
    pub changed: u32,
}

pub(crate) fn respond_local(market: &Market, state: &OfferState, agent: usize) -> Result<LocalResponse> {
    let prices = state.prices_facing(market, agent);
    let demanded = market.demand_local(agent, &prices)?;
    let inc = market.incident(agent);
    let eps = state.epsilon();
    let mut offers = Vec::with_capacity(inc.len());
    let mut changed = 0u32;
    for (k, (&t, &sign)) in inc.trades.iter().zip(&inc.signs).enumerate() {
        let new = if demanded & (1 << k) != 0 {
            prices[k]
        } else {
            prices[k] - sign * eps
        };
        let old = if sign > 0 {
            state.buyer_offer(t)
        } else {
            state.seller_offer(t)
        };
        if new != old {
            changed |= 1 << k;
        }
        offers.push(new);
    }
    Ok(LocalResponse {
        demanded,
        offers,
        changed,
    })
}

/// Writes a response into the state. Returns the counterparts that face a
/// modified offer.
pub(crate) fn apply_local(
    market: &Market,
    state: &mut OfferState,
    agent: usize,
    resp: &LocalResponse,
    changes: Option<&mut Vec<OfferChange>>,
) -> Vec<usize> {
    let inc = market.incident(agent);
    let me = market.agent_id(agent);
    let mut woken = Vec::new();
    let mut log = changes;
    for k in 0..inc.len() {
        if resp.changed & (1 << k) == 0 {
            continue;
        }
        let t = inc.trades[k];
        let trade = *market.trade(t);
        let side = if inc.signs[k] > 0 { Side::Buyer } else { Side::Seller };
        let slot = state.offer_mut(t, side);
        if let Some(log) = log.as_deref_mut() {
            log.push(OfferChange {
                trade: trade.id,
                side,
                from: *slot,
                to: resp.offers[k],
            });
        }
        *slot = resp.offers[k];
        let other = trade.counterpart(me).expect("incident trade");
        let oi = market.agent_index(other).expect("validated endpoint");
        if !woken.contains(&oi) {
            woken.push(oi);
        }
    }
    state.mark_satisfied(agent);
    for &oi in &woken {
        state.mark_unsatisfied(oi);
    }
    woken
}

/// Computes `agent`'s best response to its counterparts' current offers.
pub fn best_response(market: &Market, state: &OfferState, agent: AgentId) -> Result<BestResponse> {
    let ai = market.agent_index(agent)?;
    let r = respond_local(market, state, ai)?;
    let inc = market.incident(ai);
    let ids: Vec<TradeId> = inc.trades.iter().map(|&t| market.trade(t).id).collect();
    Ok(BestResponse {
        agent,
        demanded: market.mask_to_bundle(ai, r.demanded),
        offers: ids.iter().copied().zip(r.offers.iter().copied()).collect(),
        changed: ids
            .iter()
            .enumerate()
            .filter(|(k, _)| r.changed & (1 << k) != 0)
            .map(|(_, &t)| t)
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfferChange {
    pub trade: TradeId,
    pub side: Side,
    pub from: i64,
    pub to: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based best-response count.
    pub iteration: u64,
    pub agent: AgentId,
    pub demanded: Bundle,
    pub changes: Vec<OfferChange>,
    pub unsatisfied_after: usize,
}

/// What an observer sees after each best response.
pub struct StepView<'a> {
    pub iteration: u64,
    pub agent: usize,
    pub demanded: u32,
    /// Agents newly facing a modified offer.
    pub woken: &'a [usize],
    pub state: &'a OfferState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Converged { iterations: u64 },
    CycleDetected { period: u64, prefix: u64 },
    BudgetExhausted { iterations: u64 },
}

impl Outcome {
    pub fn converged(&self) -> bool {
        matches!(self, Outcome::Converged { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsTrace {
    /// Empty unless step recording was requested.
    pub steps: Vec<StepRecord>,
    /// Satisfied proportion before the first response and after each one.
    pub satisfied_series: Vec<f64>,
    pub outcome: Outcome,
}

impl DynamicsTrace {
    pub fn iterations(&self) -> u64 {
        (self.satisfied_series.len() as u64).saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub final_state: OfferState,
    pub trace: DynamicsTrace,
    /// Trades whose two offers agree; empty unless converged.
    pub executed: BTreeSet<TradeId>,
    /// Realized utility per agent; empty unless converged.
    pub utilities: BTreeMap<AgentId, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub max_iterations: u64,
    pub record_steps: bool,
}

impl RunOptions {
    pub fn new(max_iterations: u64) -> Self {
        RunOptions {
            max_iterations,
            record_steps: false,
        }
    }

    pub fn recording(mut self) -> Self {
        self.record_steps = true;
        self
    }
}

/// `50 · |I| · (2V + 2)` best responses.
pub fn default_budget(market: &Market, value_bound: u64) -> u64 {
    50 * (market.num_agents().max(1) as u64) * (2 * value_bound + 2)
}

struct Recorder {
    record: bool,
    steps: Vec<StepRecord>,
    series: Vec<f64>,
}

impl Recorder {
    fn new(state: &OfferState, record: bool) -> Self {
        Recorder {
            record,
            steps: Vec::new(),
            series: vec![state.satisfied_proportion()],
        }
    }

    fn step(
        &mut self,
        market: &Market,
        state: &mut OfferState,
        agent: usize,
        iteration: u64,
        observer: &mut dyn FnMut(&StepView),
    ) -> Result<()> {
        let resp = respond_local(market, state, agent)?;
        let mut changes = Vec::new();
        let woken = apply_local(market, state, agent, &resp, self.record.then_some(&mut changes));
        self.series.push(state.satisfied_proportion());
        if self.record {
            self.steps.push(StepRecord {
                iteration,
                agent: market.agent_id(agent),
                demanded: market.mask_to_bundle(agent, resp.demanded),
                changes,
                unsatisfied_after: state.unsatisfied_count(),
            });
        }
        observer(&StepView {
            iteration,
            agent,
            demanded: resp.demanded,
            woken: &woken,
            state,
        });
        Ok(())
    }

    fn finish(self, market: &Market, state: OfferState, outcome: Outcome) -> RunResult {
        let (executed, utilities) = if outcome.converged() {
            settle(market, &state)
        } else {
            (BTreeSet::new(), BTreeMap::new())
        };
        RunResult {
            final_state: state,
            trace: DynamicsTrace {
                steps: self.steps,
                satisfied_series: self.series,
                outcome,
            },
            executed,
            utilities,
        }
    }
}

/// One scheduler step: samples an unsatisfied agent uniformly and applies its
/// best response.
pub fn step<R: Rng + ?Sized>(
    market: &Market,
    state: &mut OfferState,
    rng: &mut R,
    iteration: u64,
) -> Result<StepRecord> {
    let agent = sample_unsatisfied(state, rng)?;
    let mut rec = Recorder::new(state, true);
    rec.step(market, state, agent, iteration, &mut |_| {})?;
    Ok(rec.steps.pop().expect("recorded step"))
}

fn sample_unsatisfied<R: Rng + ?Sized>(state: &OfferState, rng: &mut R) -> Result<usize> {
    let n = state.unsatisfied_count();
    if n == 0 {
        return Err(Error::Precondition("no unsatisfied agent to sample".into()));
    }
    let k = rng.gen_range(0..n);
    Ok(state.unsatisfied_indices().nth(k).expect("count matches flags"))
}

/// Runs the randomized scheduler until equilibrium or the budget runs out.
pub fn run<R: Rng + ?Sized>(market: &Market, state: OfferState, rng: &mut R, opts: RunOptions) -> Result<RunResult> {
    run_observed(market, state, rng, opts, &mut |_| {})
}

pub fn run_observed<R: Rng + ?Sized>(
    market: &Market,
    mut state: OfferState,
    rng: &mut R,
    opts: RunOptions,
    observer: &mut dyn FnMut(&StepView),
) -> Result<RunResult> {
    if opts.max_iterations == 0 {
        return Err(Error::Precondition("iteration budget must be at least 1".into()));
    }
    let mut rec = Recorder::new(&state, opts.record_steps);
    let mut it = 0u64;
    let outcome = loop {
        if state.unsatisfied_count() == 0 {
            break Outcome::Converged { iterations: it };
        }
        if it >= opts.max_iterations {
            break Outcome::BudgetExhausted { iterations: it };
        }
        let agent = sample_unsatisfied(&state, rng)?;
        it += 1;
        rec.step(market, &mut state, agent, it, observer)?;
    };
    Ok(rec.finish(market, state, outcome))
}

/// Replays exactly the given responders, ignoring the sampler but keeping the
/// unsatisfied set up to date. Steps are always recorded.
pub fn run_deterministic(market: &Market, state: OfferState, sequence: &[AgentId]) -> Result<RunResult> {
    run_deterministic_observed(market, state, sequence, &mut |_| {})
}

pub fn run_deterministic_observed(
    market: &Market,
    mut state: OfferState,
    sequence: &[AgentId],
    observer: &mut dyn FnMut(&StepView),
) -> Result<RunResult> {
    let idx = sequence
        .iter()
        .map(|&a| market.agent_index(a))
        .collect::<Result<Vec<_>>>()?;
    let mut rec = Recorder::new(&state, true);
    let mut settled_at = (state.unsatisfied_count() == 0).then_some(0);
    for (i, &agent) in idx.iter().enumerate() {
        let it = i as u64 + 1;
        rec.step(market, &mut state, agent, it, observer)?;
        if state.unsatisfied_count() == 0 {
            settled_at.get_or_insert(it);
        } else {
            settled_at = None;
        }
    }
    let outcome = match settled_at {
        Some(iterations) => Outcome::Converged { iterations },
        None => Outcome::BudgetExhausted {
            iterations: idx.len() as u64,
        },
    };
    Ok(rec.finish(market, state, outcome))
}

/// Repeats a fixed schedule of responders until equilibrium, a repeated
/// (state, schedule position) pair, or the budget.
///
/// Any repeat means the run is periodic from then on, since the dynamic is
/// memoryless given the schedule position.
pub fn run_periodic(
    market: &Market,
    state: OfferState,
    schedule: &[AgentId],
    max_iterations: u64,
) -> Result<RunResult> {
    run_periodic_observed(market, state, schedule, max_iterations, &mut |_| {})
}

pub fn run_periodic_observed(
    market: &Market,
    mut state: OfferState,
    schedule: &[AgentId],
    max_iterations: u64,
    observer: &mut dyn FnMut(&StepView),
) -> Result<RunResult> {
    if schedule.is_empty() {
        return Err(Error::Precondition("empty schedule".into()));
    }
    let idx = schedule
        .iter()
        .map(|&a| market.agent_index(a))
        .collect::<Result<Vec<_>>>()?;
    let mut rec = Recorder::new(&state, true);
    let mut seen: HashMap<(OfferState, usize), u64> = HashMap::new();
    let mut it = 0u64;
    let outcome = loop {
        if state.unsatisfied_count() == 0 {
            break Outcome::Converged { iterations: it };
        }
        let pos = (it % idx.len() as u64) as usize;
        if let Some(&first) = seen.get(&(state.clone(), pos)) {
            break Outcome::CycleDetected {
                period: it - first,
                prefix: first,
            };
        }
        if it >= max_iterations {
            break Outcome::BudgetExhausted { iterations: it };
        }
        seen.insert((state.clone(), pos), it);
        it += 1;
        rec.step(market, &mut state, idx[pos], it, observer)?;
    };
    Ok(rec.finish(market, state, outcome))
}

/// Two-agent alternation starting with `first`.
pub fn run_alternating(market: &Market, state: OfferState, first: AgentId, max_iterations: u64) -> Result<RunResult> {
    if market.num_agents() != 2 {
        return Err(Error::Domain(format!(
            "alternation needs exactly two agents, market has {}",
            market.num_agents()
        )));
    }
    let other = market
        .agents()
        .iter()
        .map(|a| a.id)
        .find(|&a| a != first)
        .expect("two agents");
    market.agent_index(first)?;
    run_periodic(market, state, &[first, other], max_iterations)
}

/// True iff no agent is unsatisfied.
pub fn is_equilibrium(market: &Market, state: &OfferState) -> bool {
    let eq = state.unsatisfied_count() == 0;
    if cfg!(debug_assertions) && eq {
        for a in 0..market.num_agents() {
            if let Ok(r) = respond_local(market, state, a) {
                debug_assert_eq!(r.changed, 0, "{} would still move", market.agent_id(a));
            }
        }
    }
    eq
}

/// Trades whose buyer and seller offers coincide at an equilibrium.
pub fn executed_trades(market: &Market, state: &OfferState) -> Result<BTreeSet<TradeId>> {
    if !is_equilibrium(market, state) {
        return Err(Error::Precondition(format!(
            "{} agents are still unsatisfied",
            state.unsatisfied_count()
        )));
    }
    Ok(agreed_trades(market, state))
}

fn agreed_trades(market: &Market, state: &OfferState) -> BTreeSet<TradeId> {
    market
        .trades()
        .iter()
        .enumerate()
        .filter(|(i, _)| state.buyer_offer(*i) == state.seller_offer(*i))
        .map(|(_, t)| t.id)
        .collect()
}

/// Executed trades and each agent's utility for its executed trades at the
/// agreed prices.
fn settle(market: &Market, state: &OfferState) -> (BTreeSet<TradeId>, BTreeMap<AgentId, Value>) {
    let executed = agreed_trades(market, state);
    let mut utilities = BTreeMap::new();
    for a in 0..market.num_agents() {
        let inc = market.incident(a);
        let mut mask = 0u32;
        let mut prices = Vec::with_capacity(inc.len());
        for (k, &t) in inc.trades.iter().enumerate() {
            if state.buyer_offer(t) == state.seller_offer(t) {
                mask |= 1 << k;
            }
            prices.push(state.buyer_offer(t));
        }
        utilities.insert(market.agent_id(a), market.utility_local(a, mask, &prices));
    }
    (executed, utilities)
}

/// Realized utilities at an equilibrium state.
pub fn realized_utilities(market: &Market, state: &OfferState) -> Result<BTreeMap<AgentId, Value>> {
    executed_trades(market, state)?;
    Ok(settle(market, state).1)
}

#[cfg(test)]
mod tests;
