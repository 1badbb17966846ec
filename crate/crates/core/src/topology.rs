//! Random market generators.
//!
//! Three families are supported: bipartite buyer/seller networks, tripartite
//! networks where buyers and sellers only meet through intermediaries, and
//! general networks grown from an Erdős–Rényi graph. Generators produce a
//! [`Skeleton`] (agents with roles plus trades); [`assign_valuations`] turns
//! it into a [`Market`] with unit buyers, unit sellers and flow-balanced
//! intermediaries.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{Agent, Market, Role, Trade, ValuationSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologyKind {
    /// Every buyer–seller pair trades with probability `r`.
    Bs { buyers: u32, sellers: u32, r: f64 },
    /// Sellers sell to and buyers buy from each intermediary with
    /// probability `r`.
    Bis {
        buyers: u32,
        sellers: u32,
        intermediaries: u32,
        r: f64,
    },
    /// Largest component of `G(n, lambda / n)`.
    General { n: u32, lambda: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyConfig {
    pub kind: TopologyKind,
    pub seed: u64,
}

impl TopologyConfig {
    pub fn new(kind: TopologyKind, seed: u64) -> Self {
        TopologyConfig { kind, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |r: f64| {
            if (0.0..=1.0).contains(&r) {
                Ok(())
            } else {
                Err(Error::Domain(format!("edge probability {r} is outside [0, 1]")))
            }
        };
        match self.kind {
            TopologyKind::Bs { buyers, sellers, r } | TopologyKind::Bis { buyers, sellers, r, .. } => {
                if buyers == 0 || sellers == 0 {
                    return Err(Error::Domain("buyer and seller counts must be positive".into()));
                }
                prob(r)
            }
            TopologyKind::General { n, lambda } => {
                if n == 0 {
                    return Err(Error::Domain("general networks need at least one vertex".into()));
                }
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::Domain(format!("mean degree {lambda} must be positive")));
                }
                Ok(())
            }
        }
    }
}

/// Agents with roles and the trades between them, without valuations.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Skeleton {
    pub agents: Vec<Agent>,
    pub trades: Vec<Trade>,
}

impl Skeleton {
    fn push_trade(&mut self, seller: u32, buyer: u32) {
        let id = self.trades.len() as u32;
        self.trades.push(Trade::new(id, seller, buyer));
    }

    fn agents_with(roles: impl IntoIterator<Item = Role>) -> Skeleton {
        Skeleton {
            agents: roles
                .into_iter()
                .enumerate()
                .map(|(i, r)| Agent::new(i as u32, r))
                .collect(),
            trades: Vec::new(),
        }
    }

    pub fn count(&self, role: Role) -> usize {
        self.agents.iter().filter(|a| a.role == role).count()
    }
}

/// Dispatches on the kind, drawing from a generator seeded with `config.seed`.
pub fn generate(config: &TopologyConfig) -> Result<Skeleton> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    generate_with(config, &mut rng)
}

pub fn generate_with<R: Rng + ?Sized>(config: &TopologyConfig, rng: &mut R) -> Result<Skeleton> {
    match config.kind {
        TopologyKind::Bs { .. } => gen_bs(config, rng),
        TopologyKind::Bis { .. } => gen_bis(config, rng),
        TopologyKind::General { .. } => gen_general(config, rng),
    }
}

/// Buyers get ids `0..B`, sellers `B..B+S`.
pub fn gen_bs<R: Rng + ?Sized>(config: &TopologyConfig, rng: &mut R) -> Result<Skeleton> {
    config.validate()?;
    let TopologyKind::Bs { buyers, sellers, r } = config.kind else {
        return Err(Error::Precondition("gen_bs needs a buyer/seller topology".into()));
    };
    let mut sk = Skeleton::agents_with(
        std::iter::repeat_n(Role::Buyer, buyers as usize).chain(std::iter::repeat_n(Role::Seller, sellers as usize)),
    );
    for b in 0..buyers {
        for s in buyers..buyers + sellers {
            if rng.gen_bool(r) {
                sk.push_trade(s, b);
            }
        }
    }
    Ok(sk)
}

/// Buyers get ids `0..B`, sellers the next `S`, intermediaries the rest.
pub fn gen_bis<R: Rng + ?Sized>(config: &TopologyConfig, rng: &mut R) -> Result<Skeleton> {
    config.validate()?;
    let TopologyKind::Bis {
        buyers,
        sellers,
        intermediaries,
        r,
    } = config.kind
    else {
        return Err(Error::Precondition("gen_bis needs a tripartite topology".into()));
    };
    let mut sk = Skeleton::agents_with(
        std::iter::repeat_n(Role::Buyer, buyers as usize)
            .chain(std::iter::repeat_n(Role::Seller, sellers as usize))
            .chain(std::iter::repeat_n(Role::Intermediary, intermediaries as usize)),
    );
    let first_mid = buyers + sellers;
    for i in first_mid..first_mid + intermediaries {
        for s in buyers..first_mid {
            if rng.gen_bool(r) {
                sk.push_trade(s, i);
            }
        }
        for b in 0..buyers {
            if rng.gen_bool(r) {
                sk.push_trade(i, b);
            }
        }
    }
    Ok(sk)
}

/// Samples `G(n, lambda / n)` and builds a market on its largest component.
pub fn gen_general<R: Rng + ?Sized>(config: &TopologyConfig, rng: &mut R) -> Result<Skeleton> {
    config.validate()?;
    let TopologyKind::General { n, lambda } = config.kind else {
        return Err(Error::Precondition("gen_general needs a general topology".into()));
    };
    let n = n as usize;
    let p = (lambda / n as f64).min(1.0);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                edges.push((a, b));
            }
        }
    }
    Ok(from_graph(n, &edges, rng))
}

/// Connected components as sorted vertex lists, ordered by smallest vertex.
fn components(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        groups.entry(r).or_default().push(v);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|c| c[0]);
    out
}

/// Keeps the largest component of an undirected simple graph (ties go to the
/// one holding the smallest vertex), relabels it `0..k` in vertex order and
/// assigns roles: vertices of degree at most one become buyers or sellers by
/// a fair coin, the rest intermediaries. Two adjacent leaves get opposite
/// roles. Intermediary pairs trade both ways.
pub fn from_graph<R: Rng + ?Sized>(n: usize, edges: &[(usize, usize)], rng: &mut R) -> Skeleton {
    let comps = components(n, edges);
    let Some(best) = comps.iter().max_by(|a, b| a.len().cmp(&b.len()).then(b[0].cmp(&a[0]))) else {
        return Skeleton::default();
    };
    let label: BTreeMap<usize, u32> = best.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
    let local: Vec<(u32, u32)> = edges
        .iter()
        .filter_map(|(a, b)| Some((*label.get(a)?, *label.get(b)?)))
        .collect();
    let k = best.len();
    let mut degree = vec![0usize; k];
    for &(a, b) in &local {
        degree[a as usize] += 1;
        degree[b as usize] += 1;
    }
    let mut roles: Vec<Option<Role>> = vec![None; k];
    for v in 0..k {
        if degree[v] > 1 {
            roles[v] = Some(Role::Intermediary);
        }
    }
    for v in 0..k {
        if roles[v].is_some() {
            continue;
        }
        let forced = local.iter().find_map(|&(a, b)| {
            let other = if a as usize == v {
                b
            } else if b as usize == v {
                a
            } else {
                return None;
            };
            match roles[other as usize] {
                Some(Role::Buyer) => Some(Role::Seller),
                Some(Role::Seller) => Some(Role::Buyer),
                _ => None,
            }
        });
        roles[v] = Some(forced.unwrap_or_else(|| if rng.gen_bool(0.5) { Role::Buyer } else { Role::Seller }));
    }
    let roles: Vec<Role> = roles.into_iter().map(|r| r.expect("every vertex has a role")).collect();
    let mut sk = Skeleton::agents_with(roles.iter().copied());
    for &(a, b) in &local {
        match (roles[a as usize], roles[b as usize]) {
            (Role::Intermediary, Role::Intermediary) => {
                sk.push_trade(a, b);
                sk.push_trade(b, a);
            }
            (Role::Buyer, _) => sk.push_trade(b, a),
            (_, Role::Buyer) => sk.push_trade(a, b),
            (Role::Seller, _) => sk.push_trade(a, b),
            (_, Role::Seller) => sk.push_trade(b, a),
            _ => unreachable!("roles are buyer, seller or intermediary"),
        }
    }
    sk
}

/// Gives each buyer and seller a unit valuation with `c` uniform on `values`
/// and each intermediary the flow-balance valuation.
pub fn assign_valuations<R: Rng + ?Sized>(
    skeleton: &Skeleton,
    values: RangeInclusive<i64>,
    rng: &mut R,
) -> Result<Market> {
    if values.is_empty() {
        return Err(Error::Domain(format!(
            "empty value set [{}, {}]",
            values.start(),
            values.end()
        )));
    }
    let mut specs = Vec::with_capacity(skeleton.agents.len());
    for a in &skeleton.agents {
        let buys = skeleton.trades.iter().find(|t| t.buyer == a.id);
        let sells = skeleton.trades.iter().find(|t| t.seller == a.id);
        let spec = match (a.role, buys, sells) {
            (Role::Buyer, _, Some(t)) | (Role::Seller, Some(t), _) => {
                return Err(Error::Domain(format!(
                    "{} is a {} but is on the wrong side of {}",
                    a.id, a.role, t.id
                )))
            }
            (Role::Buyer, ..) => ValuationSpec::unit_buyer(rng.gen_range(values.clone())),
            (Role::Seller, ..) => ValuationSpec::unit_seller(rng.gen_range(values.clone())),
            (Role::Intermediary, ..) => ValuationSpec::intermediary(),
            (Role::Trader, ..) => {
                return Err(Error::Domain(format!(
                    "{} has no buyer, seller or intermediary role",
                    a.id
                )))
            }
        };
        specs.push((a.id, spec));
    }
    Market::from_parts(skeleton.agents.clone(), skeleton.trades.clone(), specs)
}
