//! Market files.
//!
//! A market file is TOML:
//!
//! ```toml
//! schema = 1
//! epsilon = 1                  # step size used with [[offers]], default 1
//!
//! [[agents]]
//! id = 0
//! role = "seller"              # buyer | seller | intermediary | trader
//!
//! [[trades]]
//! id = 0
//! seller = 0
//! buyer = 1
//!
//! [[valuations]]
//! agent = 0
//! kind = "unit_seller"         # unit_buyer (value) | unit_seller (cost)
//! cost = 6                     # | intermediary | table (entries)
//! tie_break = "lexicographic"  # | "perturbed" | list of bundles, best first
//!
//! [[valuations]]
//! agent = 1
//! kind = "table"
//! entries = [
//!   { bundle = [], value = 0 },
//!   { bundle = [0], value = 8 },
//!   { bundle = [0, 1], value = "-inf" },
//! ]
//!
//! [[offers]]                   # optional; all trades or none
//! trade = 0
//! buyer = 4
//! seller = 5
//! ```
//!
//! Bundles are lists of trade ids incident to the agent, in any order. Table
//! bundles left out are infeasible (`"-inf"`). Values are integers or
//! `"-inf"`.
//!
//! [`serialize_market`] writes the canonical form: agents, trades, valuations
//! and offers sorted by id, every table bundle listed in enumeration order
//! with sorted trade ids, and default fields omitted.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::ops::Range;

use serde::Deserialize;
use toml::Spanned;

use crate::dynamics::OfferState;
use crate::error::{Error, Result};
use crate::market::{
    Agent, AgentId, Market, MarketParts, Role, TieBreak, Trade, TradeId, ValuationKind, ValuationSpec, Value,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    schema: u32,
    #[serde(default)]
    epsilon: Option<i64>,
    #[serde(default)]
    agents: Vec<Spanned<RawAgent>>,
    #[serde(default)]
    trades: Vec<Spanned<RawTrade>>,
    #[serde(default)]
    valuations: Vec<Spanned<RawValuation>>,
    #[serde(default)]
    offers: Vec<Spanned<RawOffer>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    id: u32,
    #[serde(default)]
    role: Role,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrade {
    id: u32,
    seller: u32,
    buyer: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValuation {
    agent: u32,
    kind: String,
    value: Option<i64>,
    cost: Option<i64>,
    entries: Option<Vec<RawEntry>>,
    tie_break: Option<RawTieBreak>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    bundle: Vec<u32>,
    value: RawValue,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawValue {
    Int(i64),
    Text(String),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawTieBreak {
    Name(String),
    Order(Vec<Vec<u32>>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOffer {
    trade: u32,
    buyer: i64,
    seller: i64,
}

/// A parsed market with the initial offers it carried, if any.
#[derive(Debug, Clone)]
pub struct MarketFile {
    pub market: Market,
    pub offers: Option<OfferState>,
}

struct LineIndex(Vec<usize>);

impl LineIndex {
    fn new(text: &str) -> Self {
        LineIndex(
            std::iter::once(0)
                .chain(text.match_indices('\n').map(|(i, _)| i + 1))
                .collect(),
        )
    }

    fn line(&self, offset: usize) -> usize {
        self.0.partition_point(|&s| s <= offset)
    }

    fn err(&self, span: Range<usize>, message: impl Into<String>) -> Error {
        Error::Parse {
            line: Some(self.line(span.start)),
            message: message.into(),
        }
    }
}

/// Parses and validates a market file.
pub fn parse_market(text: &str) -> Result<MarketFile> {
    let lines = LineIndex::new(text);
    let raw: RawFile = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map(|s| lines.line(s.start)),
        message: e.message().trim().to_string(),
    })?;
    if raw.schema != SCHEMA_VERSION {
        return Err(Error::Parse {
            line: None,
            message: format!("schema {} is not supported, expected {SCHEMA_VERSION}", raw.schema),
        });
    }

    let agents: Vec<Agent> = raw
        .agents
        .iter()
        .map(|a| Agent::new(a.get_ref().id, a.get_ref().role))
        .collect();
    let trades: Vec<Trade> = raw
        .trades
        .iter()
        .map(|t| {
            let t = t.get_ref();
            Trade::new(t.id, t.seller, t.buyer)
        })
        .collect();

    // incident trades per agent in ascending id order, as the market will index them
    let mut incident: BTreeMap<u32, Vec<TradeId>> = BTreeMap::new();
    let mut sorted = trades.clone();
    sorted.sort_by_key(|t| t.id);
    for t in &sorted {
        incident.entry(t.buyer.0).or_default().push(t.id);
        incident.entry(t.seller.0).or_default().push(t.id);
    }

    let mut valuations = BTreeMap::new();
    for v in &raw.valuations {
        let span = v.span();
        let v = v.get_ref();
        let inc = incident.get(&v.agent).map(Vec::as_slice).unwrap_or(&[]);
        let spec = valuation_spec(v, inc)
            .map_err(|m| lines.err(span.clone(), format!("valuation of agent {}: {m}", v.agent)))?;
        if valuations.insert(AgentId(v.agent), spec).is_some() {
            return Err(lines.err(span, format!("agent {} has two valuations", v.agent)));
        }
    }

    let market = Market::new(MarketParts {
        agents,
        trades,
        valuations,
    })?;

    let offers = if raw.offers.is_empty() {
        None
    } else {
        let n = market.num_trades();
        let (mut buyer, mut seller) = (vec![None; n], vec![None; n]);
        for o in &raw.offers {
            let span = o.span();
            let o = o.get_ref();
            let ti = market
                .trade_index(TradeId(o.trade))
                .map_err(|_| lines.err(span.clone(), format!("offer on unknown trade {}", o.trade)))?;
            if buyer[ti].is_some() {
                return Err(lines.err(span, format!("trade {} has two offer entries", o.trade)));
            }
            buyer[ti] = Some(o.buyer);
            seller[ti] = Some(o.seller);
        }
        if let Some(ti) = buyer.iter().position(Option::is_none) {
            return Err(Error::Parse {
                line: None,
                message: format!("offers are missing for {}", market.trade(ti).id),
            });
        }
        let epsilon = raw.epsilon.unwrap_or(1);
        Some(OfferState::new(
            &market,
            buyer.into_iter().flatten().collect(),
            seller.into_iter().flatten().collect(),
            epsilon,
        )?)
    };
    Ok(MarketFile { market, offers })
}

fn bundle_mask(bundle: &[u32], incident: &[TradeId]) -> std::result::Result<u32, String> {
    let mut mask = 0u32;
    for &t in bundle {
        let k = incident
            .iter()
            .position(|x| x.0 == t)
            .ok_or_else(|| format!("trade {t} in bundle {bundle:?} is not incident to the agent"))?;
        if mask & (1 << k) != 0 {
            return Err(format!("trade {t} repeats in bundle {bundle:?}"));
        }
        mask |= 1 << k;
    }
    Ok(mask)
}

fn valuation_spec(v: &RawValuation, incident: &[TradeId]) -> std::result::Result<ValuationSpec, String> {
    let fields = [
        ("value", v.value.is_some()),
        ("cost", v.cost.is_some()),
        ("entries", v.entries.is_some()),
    ];
    let allowed: &[&str] = match v.kind.as_str() {
        "unit_buyer" => &["value"],
        "unit_seller" => &["cost"],
        "intermediary" => &[],
        "table" => &["entries"],
        other => {
            return Err(format!(
                "unknown kind {other:?}, expected unit_buyer, unit_seller, intermediary or table"
            ))
        }
    };
    if let Some((name, _)) = fields.iter().find(|(n, set)| *set && !allowed.contains(n)) {
        return Err(format!("field `{name}` does not apply to kind {:?}", v.kind));
    }
    if let Some(name) = allowed.iter().find(|n| !fields.iter().any(|(f, set)| f == *n && *set)) {
        return Err(format!("kind {:?} needs field `{name}`", v.kind));
    }
    let k = incident.len();
    let kind = match v.kind.as_str() {
        "unit_buyer" => ValuationKind::UnitBuyer {
            value: v.value.expect("checked"),
        },
        "unit_seller" => ValuationKind::UnitSeller {
            cost: v.cost.expect("checked"),
        },
        "intermediary" => ValuationKind::Intermediary,
        _ => {
            if k > crate::market::MAX_INCIDENT {
                return Err(format!("tables over {k} trades are too large"));
            }
            let mut table = vec![Value::NegInf; 1 << k];
            let mut seen = BTreeSet::new();
            for e in v.entries.as_ref().expect("checked") {
                let mask = bundle_mask(&e.bundle, incident)?;
                if !seen.insert(mask) {
                    return Err(format!("bundle {:?} is listed twice", e.bundle));
                }
                table[mask as usize] = match &e.value {
                    RawValue::Int(x) => Value::Finite(*x),
                    RawValue::Text(s) => s.parse().map_err(|err| format!("bundle {:?}: {err}", e.bundle))?,
                };
            }
            ValuationKind::Table(table)
        }
    };
    let tie_break = match &v.tie_break {
        None => TieBreak::Lexicographic,
        Some(RawTieBreak::Name(n)) => match n.as_str() {
            "lexicographic" => TieBreak::Lexicographic,
            "perturbed" => TieBreak::Perturbed,
            other => {
                return Err(format!(
                    "unknown tie_break {other:?}, expected \"lexicographic\", \"perturbed\" or a list of bundles"
                ))
            }
        },
        Some(RawTieBreak::Order(order)) => {
            let mut ranks = vec![u32::MAX; 1 << k.min(crate::market::MAX_INCIDENT)];
            for (r, b) in order.iter().enumerate() {
                let mask = bundle_mask(b, incident)?;
                if ranks[mask as usize] != u32::MAX {
                    return Err(format!("bundle {b:?} appears twice in tie_break"));
                }
                ranks[mask as usize] = r as u32;
            }
            if order.len() != ranks.len() {
                return Err(format!(
                    "tie_break lists {} bundles, expected all {}",
                    order.len(),
                    ranks.len()
                ));
            }
            TieBreak::Ranked(ranks)
        }
    };
    Ok(ValuationSpec { kind, tie_break })
}

fn bundle_text(market: &Market, agent: usize, mask: u32) -> String {
    let ids: Vec<String> = market
        .mask_to_bundle(agent, mask)
        .iter()
        .map(|t| t.0.to_string())
        .collect();
    format!("[{}]", ids.join(", "))
}

/// Canonical text of a market and optional offers.
pub fn serialize_market(market: &Market, offers: Option<&OfferState>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "schema = {SCHEMA_VERSION}");
    if let Some(s) = offers.filter(|s| s.epsilon() != 1) {
        let _ = writeln!(out, "epsilon = {}", s.epsilon());
    }
    for a in market.agents() {
        let _ = write!(out, "\n[[agents]]\nid = {}\nrole = \"{}\"\n", a.id.0, a.role);
    }
    for t in market.trades() {
        let _ = write!(
            out,
            "\n[[trades]]\nid = {}\nseller = {}\nbuyer = {}\n",
            t.id.0, t.seller.0, t.buyer.0
        );
    }
    for (i, a) in market.agents().iter().enumerate() {
        let spec = market.spec(i);
        let _ = write!(out, "\n[[valuations]]\nagent = {}\n", a.id.0);
        match &spec.kind {
            ValuationKind::UnitBuyer { value } => {
                let _ = write!(out, "kind = \"unit_buyer\"\nvalue = {value}\n");
            }
            ValuationKind::UnitSeller { cost } => {
                let _ = write!(out, "kind = \"unit_seller\"\ncost = {cost}\n");
            }
            ValuationKind::Intermediary => out.push_str("kind = \"intermediary\"\n"),
            ValuationKind::Table(values) => {
                out.push_str("kind = \"table\"\nentries = [\n");
                for (mask, v) in values.iter().enumerate() {
                    let value = match v {
                        Value::Finite(x) => x.to_string(),
                        Value::NegInf => "\"-inf\"".into(),
                    };
                    let _ = writeln!(
                        out,
                        "  {{ bundle = {}, value = {value} }},",
                        bundle_text(market, i, mask as u32)
                    );
                }
                out.push_str("]\n");
            }
        }
        match &spec.tie_break {
            TieBreak::Lexicographic => {}
            TieBreak::Perturbed => out.push_str("tie_break = \"perturbed\"\n"),
            TieBreak::Ranked(ranks) => {
                let mut order: Vec<u32> = (0..ranks.len() as u32).collect();
                order.sort_by_key(|&m| ranks[m as usize]);
                let items: Vec<String> = order.iter().map(|&m| bundle_text(market, i, m)).collect();
                let _ = writeln!(out, "tie_break = [{}]", items.join(", "));
            }
        }
    }
    if let Some(s) = offers {
        for (t, (b, sl)) in s.offers_by_trade(market) {
            let _ = write!(out, "\n[[offers]]\ntrade = {}\nbuyer = {b}\nseller = {sl}\n", t.0);
        }
    }
    out
}
