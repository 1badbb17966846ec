use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;

use super::{merge_market, restrict_market, AgentPartition, MergedMarket, Part};
use crate::dynamics::{apply_local, respond_local, run_deterministic, run_observed, OfferState, RunOptions};
use crate::error::{Error, Result};
use crate::market::{AgentId, Market, Side, TradeId};

/// One divergence between a market and its transformation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LemmaDiff {
    Offer {
        /// Best responses applied so far.
        step: usize,
        trade: TradeId,
        side: Side,
        original: i64,
        reduced: i64,
    },
    Satisfied {
        step: usize,
        agent: AgentId,
        original: bool,
        reduced: bool,
    },
}

impl fmt::Display for LemmaDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LemmaDiff::Offer {
                step,
                trade,
                side,
                original,
                reduced,
            } => write!(
                f,
                "after step {step}: {side:?} offer on {trade} is {original} in the original market, {reduced} in the reduced one"
            ),
            LemmaDiff::Satisfied {
                step,
                agent,
                original,
                reduced,
            } => write!(
                f,
                "after step {step}: {agent} satisfied = {original} in the original market, {reduced} in the reduced one"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaReport {
    pub holds: bool,
    pub diffs: Vec<LemmaDiff>,
}

impl LemmaReport {
    fn from_diffs(diffs: Vec<LemmaDiff>) -> Self {
        LemmaReport {
            holds: diffs.is_empty(),
            diffs,
        }
    }
}

fn offer_diffs(
    step: usize,
    a: (&Market, &OfferState),
    b: (&Market, &OfferState),
    out: &mut Vec<LemmaDiff>,
) -> Result<()> {
    let (bm, bs) = b;
    let (am, as_) = a;
    for (ti, t) in bm.trades().iter().enumerate() {
        let oi = am.trade_index(t.id)?;
        for (side, x, y) in [
            (Side::Buyer, as_.buyer_offer(oi), bs.buyer_offer(ti)),
            (Side::Seller, as_.seller_offer(oi), bs.seller_offer(ti)),
        ] {
            if x != y {
                out.push(LemmaDiff::Offer {
                    step,
                    trade: t.id,
                    side,
                    original: x,
                    reduced: y,
                });
            }
        }
    }
    Ok(())
}

/// Replays `sequence` in `market` and in its restriction to `subset` at
/// `state`, comparing internal-trade offers and the satisfied members of
/// `subset` after every step.
pub fn verify_restriction_lemma(
    market: &Market,
    subset: &BTreeSet<AgentId>,
    state: &OfferState,
    sequence: &[AgentId],
) -> Result<LemmaReport> {
    if let Some(a) = sequence.iter().find(|a| !subset.contains(a)) {
        return Err(Error::Precondition(format!("{a} is outside the restricted subset")));
    }
    let restricted = restrict_market(market, subset, state)?;
    let rm = restricted.market();
    let mut orig = state.clone();
    let mut red = restricted.map_state(market, state)?;
    let mut diffs = Vec::new();
    for (i, &agent) in sequence.iter().enumerate() {
        let oi = market.agent_index(agent)?;
        let ri = rm.agent_index(agent)?;
        let resp = respond_local(market, &orig, oi)?;
        apply_local(market, &mut orig, oi, &resp, None);
        let resp = respond_local(rm, &red, ri)?;
        apply_local(rm, &mut red, ri, &resp, None);

        offer_diffs(i + 1, (market, &orig), (rm, &red), &mut diffs)?;
        for &a in subset {
            let x = !orig.is_unsatisfied(market.agent_index(a)?);
            let y = !red.is_unsatisfied(rm.agent_index(a)?);
            if x != y {
                diffs.push(LemmaDiff::Satisfied {
                    step: i + 1,
                    agent: a,
                    original: x,
                    reduced: y,
                });
            }
        }
    }
    Ok(LemmaReport::from_diffs(diffs))
}

/// Applies a phase of responders from class `part` to `market` at `state`
/// and compares the resulting cross-trade offers with one best response of
/// the merged agent in the merged market.
///
/// The phase must end with every member of the class satisfied.
pub fn verify_merge_lemma(
    market: &Market,
    partition: &AgentPartition,
    state: &OfferState,
    part: Part,
    phase: &[AgentId],
) -> Result<LemmaReport> {
    let merged = merge_market(market, partition)?;
    verify_merge_lemma_with(market, &merged, state, part, phase)
}

/// [`verify_merge_lemma`] against a prebuilt (possibly altered) merged market.
pub fn verify_merge_lemma_with(
    market: &Market,
    merged: &MergedMarket,
    state: &OfferState,
    part: Part,
    phase: &[AgentId],
) -> Result<LemmaReport> {
    let class = merged.partition().class(part);
    if let Some(a) = phase.iter().find(|a| !class.contains(a)) {
        return Err(Error::Precondition(format!("{a} is not in the responding class")));
    }
    let mut after = state.clone();
    for &a in phase {
        let ai = market.agent_index(a)?;
        let resp = respond_local(market, &after, ai)?;
        apply_local(market, &mut after, ai, &resp, None);
    }
    for a in class {
        if after.is_unsatisfied(market.agent_index(*a)?) {
            return Err(Error::Precondition(format!("{a} is still unsatisfied after the phase")));
        }
    }

    let mm = merged.market();
    let mut red = merged.map_state(market, state)?;
    let k = mm.agent_index(part.merged_id())?;
    let resp = respond_local(mm, &red, k)?;
    apply_local(mm, &mut red, k, &resp, None);

    let mut diffs = Vec::new();
    offer_diffs(phase.len(), (market, &after), (mm, &red), &mut diffs)?;
    Ok(LemmaReport::from_diffs(diffs))
}

/// Converges the restriction of `market` to `subset` at `state` under the
/// randomized scheduler and returns its responders in order, or `None` if the
/// budget ran out first.
pub fn terminating_sequence<R: Rng + ?Sized>(
    market: &Market,
    subset: &BTreeSet<AgentId>,
    state: &OfferState,
    rng: &mut R,
    budget: u64,
) -> Result<Option<Vec<AgentId>>> {
    let r = restrict_market(market, subset, state)?;
    let rm = r.market();
    let mut seq = Vec::new();
    let res = run_observed(
        rm,
        r.map_state(market, state)?,
        rng,
        RunOptions::new(budget),
        &mut |v| seq.push(rm.agent_id(v.agent)),
    )?;
    Ok(res.trace.outcome.converged().then_some(seq))
}

/// One phase of the alternating construction: the responding class, the
/// state it starts from and its responders.
#[derive(Debug, Clone)]
pub struct Phase {
    pub part: Part,
    pub start: OfferState,
    pub sequence: Vec<AgentId>,
}

/// Alternately satisfies the first and second class, each by a terminating
/// sequence of its restriction, until every agent is satisfied, a class
/// fails to converge within `budget`, or `max_phases` phases were built.
pub fn alternating_phases<R: Rng + ?Sized>(
    market: &Market,
    partition: &AgentPartition,
    start: &OfferState,
    rng: &mut R,
    max_phases: usize,
    budget: u64,
) -> Result<Vec<Phase>> {
    let mut phases = Vec::new();
    let mut state = start.clone();
    let mut part = Part::First;
    while phases.len() < max_phases && state.unsatisfied_count() > 0 {
        let Some(sequence) = terminating_sequence(market, partition.class(part), &state, rng, budget)? else {
            break;
        };
        let next = run_deterministic(market, state.clone(), &sequence)?.final_state;
        phases.push(Phase {
            part,
            start: state,
            sequence,
        });
        state = next;
        part = part.other();
    }
    Ok(phases)
}
