//! Bundle valuations and tie-breaking orders.
//!
//! Bundles are handled in memory as bitmasks over an agent's incident trades,
//! where bit `k` is the agent's `k`-th incident trade in ascending trade-id
//! order. Tables are stored densely over all `2^k` masks.

use serde::{Deserialize, Serialize};

use super::Value;

/// Largest number of incident trades an agent may have for bundle enumeration.
pub const MAX_INCIDENT: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValuationKind {
    /// Unit demand: 0 for the empty bundle, `value` for one trade, infeasible beyond.
    UnitBuyer { value: i64 },
    /// Unit supply: 0 for the empty bundle, `-cost` for one trade, infeasible beyond.
    UnitSeller { cost: i64 },
    /// Flow balance: 0 when buying and selling counts match, infeasible otherwise.
    Intermediary,
    /// Dense table indexed by local bundle mask.
    Table(Vec<Value>),
}

/// Strict total order used to pick one bundle among utility-maximizing ties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TieBreak {
    /// Smallest bundle mask wins, so the empty bundle is preferred.
    #[default]
    Lexicographic,
    /// Equivalent to adding `2^-(k+1)` to the value for each held trade `k`:
    /// bundles holding earlier trades win.
    Perturbed,
    /// Explicit rank per local mask; the lowest rank wins. Must be a permutation.
    Ranked(Vec<u32>),
}

impl TieBreak {
    /// Rank of `mask` among bundles over `k` trades; lower ranks win ties.
    pub fn rank(&self, mask: u32, k: usize) -> u64 {
        match self {
            TieBreak::Lexicographic => mask as u64,
            TieBreak::Perturbed => {
                let full = if k == 0 { 0 } else { u32::MAX >> (32 - k) };
                (full - reverse_low_bits(mask, k)) as u64
            }
            TieBreak::Ranked(ranks) => ranks.get(mask as usize).copied().unwrap_or(u32::MAX) as u64,
        }
    }
}

/// Reverses the lowest `k` bits of `mask`.
pub(crate) fn reverse_low_bits(mask: u32, k: usize) -> u32 {
    if k == 0 {
        0
    } else {
        mask.reverse_bits() >> (32 - k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValuationSpec {
    pub kind: ValuationKind,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl ValuationSpec {
    pub fn unit_buyer(value: i64) -> Self {
        ValuationSpec {
            kind: ValuationKind::UnitBuyer { value },
            tie_break: TieBreak::Lexicographic,
        }
    }

    pub fn unit_seller(cost: i64) -> Self {
        ValuationSpec {
            kind: ValuationKind::UnitSeller { cost },
            tie_break: TieBreak::Lexicographic,
        }
    }

    pub fn intermediary() -> Self {
        ValuationSpec {
            kind: ValuationKind::Intermediary,
            tie_break: TieBreak::Lexicographic,
        }
    }

    pub fn table(values: Vec<Value>) -> Self {
        ValuationSpec {
            kind: ValuationKind::Table(values),
            tie_break: TieBreak::Lexicographic,
        }
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    /// Value of a local bundle mask. `buy_mask`/`sell_mask` flag the agent's
    /// buying and selling incident trades.
    pub fn value_of(&self, mask: u32, buy_mask: u32, sell_mask: u32) -> Value {
        match &self.kind {
            ValuationKind::UnitBuyer { value } => match mask.count_ones() {
                0 => Value::ZERO,
                1 => Value::Finite(*value),
                _ => Value::NegInf,
            },
            ValuationKind::UnitSeller { cost } => match mask.count_ones() {
                0 => Value::ZERO,
                1 => Value::Finite(-*cost),
                _ => Value::NegInf,
            },
            ValuationKind::Intermediary => {
                if (mask & buy_mask).count_ones() == (mask & sell_mask).count_ones() {
                    Value::ZERO
                } else {
                    Value::NegInf
                }
            }
            ValuationKind::Table(values) => values.get(mask as usize).copied().unwrap_or(Value::NegInf),
        }
    }

    /// The scalar `c` of a unit buyer or seller.
    pub fn unit_parameter(&self) -> Option<i64> {
        match self.kind {
            ValuationKind::UnitBuyer { value } => Some(value),
            ValuationKind::UnitSeller { cost } => Some(cost),
            _ => None,
        }
    }

    pub fn with_unit_parameter(&self, c: i64) -> Option<ValuationSpec> {
        let kind = match self.kind {
            ValuationKind::UnitBuyer { .. } => ValuationKind::UnitBuyer { value: c },
            ValuationKind::UnitSeller { .. } => ValuationKind::UnitSeller { cost: c },
            _ => return None,
        };
        Some(ValuationSpec {
            kind,
            tie_break: self.tie_break.clone(),
        })
    }
}
