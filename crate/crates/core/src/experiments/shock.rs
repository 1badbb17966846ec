use std::ops::RangeInclusive;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::OfferState;
use crate::error::{Error, Result};
use crate::market::Market;

/// Post-convergence perturbation of buyer and seller values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockSpec {
    /// Fraction of the unit buyers and sellers that are shocked.
    pub shocked_proportion: f64,
    /// Relative half-width of the resampling window.
    pub size: f64,
}

impl ShockSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.shocked_proportion) {
            return Err(Error::Domain(format!(
                "shocked proportion {} is outside [0, 1]",
                self.shocked_proportion
            )));
        }
        if !(self.size >= 0.0 && self.size.is_finite()) {
            return Err(Error::Domain(format!("shock size {} must be non-negative", self.size)));
        }
        Ok(())
    }
}

// Guards the window ends against rounding, e.g. 10 · 0.9 = 9.000000000000002.
const ROUNDING: f64 = 1e-9;

/// Integers in `[c(1 − s), c(1 + s)]` that also lie in `values`.
pub fn resample_window(c: i64, size: f64, values: &RangeInclusive<i64>) -> RangeInclusive<i64> {
    let (a, b) = (c as f64 * (1.0 - size), c as f64 * (1.0 + size));
    let (a, b) = (a.min(b), a.max(b));
    let lo = ((a - ROUNDING).ceil() as i64).max(*values.start());
    let hi = ((b + ROUNDING).floor() as i64).min(*values.end());
    lo..=hi
}

/// The shocked market and state plus the indices of the shocked agents.
#[derive(Debug, Clone)]
pub struct Shocked {
    pub market: Market,
    pub state: OfferState,
    pub agents: Vec<usize>,
}

/// Resamples the value of a uniformly chosen subset of unit buyers and
/// sellers and marks exactly those agents unsatisfied. The state must be an
/// equilibrium.
pub fn apply_shock<R: Rng + ?Sized>(
    market: &Market,
    state: &OfferState,
    spec: &ShockSpec,
    values: &RangeInclusive<i64>,
    rng: &mut R,
) -> Result<Shocked> {
    spec.validate()?;
    if state.unsatisfied_count() > 0 {
        return Err(Error::Precondition(format!(
            "shocks need a converged state, {} agents are unsatisfied",
            state.unsatisfied_count()
        )));
    }
    let eligible: Vec<usize> = (0..market.num_agents())
        .filter(|&i| market.spec(i).unit_parameter().is_some())
        .collect();
    let k = (spec.shocked_proportion * eligible.len() as f64).round() as usize;
    let mut chosen: Vec<usize> = sample(rng, eligible.len(), k)
        .into_iter()
        .map(|j| eligible[j])
        .collect();
    chosen.sort_unstable();

    let mut shocked = market.clone();
    let mut next = state.clone();
    for &i in &chosen {
        let spec_i = market.spec(i);
        let c = spec_i.unit_parameter().expect("eligible agents are unit agents");
        let window = resample_window(c, spec.size, values);
        let c2 = if window.is_empty() { c } else { rng.gen_range(window) };
        let new_spec = spec_i.with_unit_parameter(c2).expect("unit agent");
        shocked = shocked.with_valuation(market.agent_id(i), new_spec)?;
        next.mark_unsatisfied(i);
    }
    Ok(Shocked {
        market: shocked,
        state: next,
        agents: chosen,
    })
}
