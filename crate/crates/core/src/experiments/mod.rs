//! Seed-swept batch experiments on generated markets.
//!
//! An [`ExperimentConfig`] fixes a topology family, a value set, an offer
//! initialization, a run count and optionally one sweep axis. Each sweep value
//! is a cell; each cell runs `runs` independent markets. Run `k` of cell `c`
//! draws everything from a generator seeded with
//! [`run_seed`]`(seed, c, k)`, so results do not depend on scheduling or on
//! the number of worker threads.
//!
//! Standard deviations use the sample estimator (`n − 1` denominator).

mod shock;
mod stats;

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use shock::{apply_shock, resample_window, ShockSpec, Shocked};
pub use stats::{mix, run_seed, Summary};

use crate::dynamics::{
    default_budget, run_observed, InitPolicy, InvariantMonitor, OfferState, Outcome, RunOptions, RunResult,
};
use crate::error::{Error, Result};
use crate::market::{value_bound, Market, Role};
use crate::topology::{assign_valuations, generate_with, TopologyConfig, TopologyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    Convergence,
    Welfare,
    Shock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Buyers plus sellers at the configured buyer share (intermediary count
    /// unchanged), or `n` for general networks.
    MarketSize,
    /// Share of buyers among buyers and sellers, total held fixed.
    BuyerProportion,
    Intermediaries,
    Lambda,
    ShockSize,
    ShockedProportion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_values() -> [i64; 2] {
    [1, 100]
}
fn default_init() -> InitPolicy {
    InitPolicy::UniformRandom { lo: 1, hi: 100 }
}
fn default_epsilon() -> i64 {
    1
}
fn default_runs() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub experiment: ExperimentKind,
    pub topology: TopologyKind,
    /// Inclusive range of buyer values and seller costs.
    #[serde(default = "default_values")]
    pub values: [i64; 2],
    #[serde(default = "default_init")]
    pub init: InitPolicy,
    #[serde(default = "default_epsilon")]
    pub epsilon: i64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Best responses per run; defaults to the dynamic's own budget.
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub shock: Option<ShockSpec>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, topology: TopologyKind) -> Self {
        ExperimentConfig {
            name: default_name(),
            experiment,
            topology,
            values: default_values(),
            init: default_init(),
            epsilon: default_epsilon(),
            runs: default_runs(),
            seed: 0,
            budget: None,
            sweep: None,
            shock: None,
        }
    }

    pub fn value_range(&self) -> RangeInclusive<i64> {
        self.values[0]..=self.values[1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Domain("runs per cell must be at least 1".into()));
        }
        if self.epsilon < 1 {
            return Err(Error::Domain(format!(
                "step size must be positive, got {}",
                self.epsilon
            )));
        }
        if self.values[0] > self.values[1] {
            return Err(Error::Domain(format!("empty value set {:?}", self.values)));
        }
        if self.budget == Some(0) {
            return Err(Error::Domain("iteration budget must be at least 1".into()));
        }
        if self.experiment == ExperimentKind::Shock && self.shock.is_none() {
            return Err(Error::Domain("shock experiments need a [shock] section".into()));
        }
        if let Some(sw) = &self.sweep {
            if sw.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("sweep values must be finite".into()));
            }
            if sw.values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Domain("sweep values must be strictly increasing".into()));
            }
        }
        for (topo, shock) in self.cells()? {
            TopologyConfig::new(topo, 0).validate()?;
            if let Some(s) = shock {
                s.validate()?;
            }
        }
        Ok(())
    }

    /// Topology and shock of every cell, in sweep order.
    pub fn cells(&self) -> Result<Vec<(TopologyKind, Option<ShockSpec>)>> {
        let Some(sw) = &self.sweep else {
            return Ok(vec![(self.topology.clone(), self.shock)]);
        };
        sw.values.iter().map(|&v| self.cell(sw.axis, v)).collect()
    }

    fn cell(&self, axis: SweepAxis, v: f64) -> Result<(TopologyKind, Option<ShockSpec>)> {
        let mismatch = || {
            Err(Error::Domain(format!(
                "sweep axis {axis:?} does not apply to this {} experiment",
                match self.topology {
                    TopologyKind::Bs { .. } => "buyer/seller",
                    TopologyKind::Bis { .. } => "tripartite",
                    TopologyKind::General { .. } => "general",
                }
            )))
        };
        let count = |v: f64| -> Result<u32> {
            if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                return Err(Error::Domain(format!("{v} is not a count")));
            }
            Ok(v as u32)
        };
        let split = |total: u32, share: f64| -> (u32, u32) {
            let b = ((share * total as f64).round() as u32).clamp(1.min(total), total.saturating_sub(1).max(1));
            (b, total - b)
        };
        let mut topo = self.topology.clone();
        let mut shock = self.shock;
        match (axis, &mut topo) {
            (SweepAxis::MarketSize, TopologyKind::Bs { buyers, sellers, .. })
            | (SweepAxis::MarketSize, TopologyKind::Bis { buyers, sellers, .. }) => {
                let share = *buyers as f64 / (*buyers + *sellers) as f64;
                (*buyers, *sellers) = split(count(v)?, share);
            }
            (SweepAxis::MarketSize, TopologyKind::General { n, .. }) => *n = count(v)?,
            (SweepAxis::BuyerProportion, TopologyKind::Bs { buyers, sellers, .. })
            | (SweepAxis::BuyerProportion, TopologyKind::Bis { buyers, sellers, .. }) => {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Domain(format!("buyer proportion {v} is outside [0, 1]")));
                }
                (*buyers, *sellers) = split(*buyers + *sellers, v);
            }
            (SweepAxis::Intermediaries, TopologyKind::Bis { intermediaries, .. }) => *intermediaries = count(v)?,
            (SweepAxis::Lambda, TopologyKind::General { lambda, .. }) => *lambda = v,
            (SweepAxis::ShockSize, _) | (SweepAxis::ShockedProportion, _) => {
                let Some(s) = shock.as_mut() else {
                    return Err(Error::Domain(format!("sweep axis {axis:?} needs a [shock] section")));
                };
                if axis == SweepAxis::ShockSize {
                    s.size = v;
                } else {
                    s.shocked_proportion = v;
                }
            }
            _ => return mismatch(),
        }
        Ok((topo, shock))
    }
}

/// Mean realized utility within each agent class of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ClassMeans {
    pub buyer: Option<f64>,
    pub seller: Option<f64>,
    pub intermediary: Option<f64>,
}

impl ClassMeans {
    pub fn get(&self, role: Role) -> Option<f64> {
        match role {
            Role::Buyer => self.buyer,
            Role::Seller => self.seller,
            Role::Intermediary => self.intermediary,
            Role::Trader => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockRecord {
    /// Best responses to the first equilibrium.
    pub t0: u64,
    pub shocked: usize,
    /// Non-shocked agents that became unsatisfied at some point after the shock.
    pub impacted: usize,
    /// `impacted` over the number of non-shocked agents.
    pub propagation: Option<f64>,
    pub outcome: Outcome,
    /// Best responses after the shock.
    pub t1: u64,
    /// `t1 / t0` when both runs converged.
    pub normalized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub agents: usize,
    pub trades: usize,
    /// Absent when the run failed before the dynamic started.
    pub outcome: Option<Outcome>,
    pub satisfied_series: Vec<f64>,
    /// Filled only for converged runs.
    pub class_utility: ClassMeans,
    /// Sum over agents of value minus utility at equilibrium: payments minus
    /// receipts, zero when money is conserved.
    pub net_transfer: Option<i64>,
    pub monitor_violations: usize,
    pub shock: Option<ShockRecord>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn converged(&self) -> bool {
        self.outcome.is_some_and(|o| o.converged())
    }

    pub fn iterations(&self) -> Option<u64> {
        match self.outcome? {
            Outcome::Converged { iterations } | Outcome::BudgetExhausted { iterations } => Some(iterations),
            Outcome::CycleDetected { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ClassSummaries {
    pub buyer: Summary,
    pub seller: Summary,
    pub intermediary: Summary,
}

impl ClassSummaries {
    pub fn get(&self, role: Role) -> Option<&Summary> {
        match role {
            Role::Buyer => Some(&self.buyer),
            Role::Seller => Some(&self.seller),
            Role::Intermediary => Some(&self.intermediary),
            Role::Trader => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CellAggregate {
    pub runs: usize,
    pub converged: usize,
    pub converged_fraction: f64,
    /// Best responses to convergence, over converged runs.
    pub iterations: Summary,
    /// Per-run class means, over converged runs.
    pub welfare: ClassSummaries,
    pub errors: usize,
    pub monitor_violations: usize,
    pub propagation: Summary,
    pub reconvergence: Summary,
}

impl CellAggregate {
    pub fn of(runs: &[RunRecord]) -> CellAggregate {
        let conv: Vec<&RunRecord> = runs.iter().filter(|r| r.converged()).collect();
        let class = |f: fn(&ClassMeans) -> Option<f64>| Summary::of(conv.iter().filter_map(|r| f(&r.class_utility)));
        let shocks: Vec<&ShockRecord> = runs.iter().filter_map(|r| r.shock.as_ref()).collect();
        CellAggregate {
            runs: runs.len(),
            converged: conv.len(),
            converged_fraction: if runs.is_empty() {
                0.0
            } else {
                conv.len() as f64 / runs.len() as f64
            },
            iterations: Summary::of(conv.iter().filter_map(|r| r.iterations()).map(|i| i as f64)),
            welfare: ClassSummaries {
                buyer: class(|c| c.buyer),
                seller: class(|c| c.seller),
                intermediary: class(|c| c.intermediary),
            },
            errors: runs.iter().filter(|r| r.error.is_some()).count(),
            monitor_violations: runs.iter().map(|r| r.monitor_violations).sum(),
            propagation: Summary::of(shocks.iter().filter_map(|s| s.propagation)),
            reconvergence: Summary::of(shocks.iter().filter_map(|s| s.normalized)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    /// Sweep value of the cell, absent without a sweep.
    pub sweep_value: Option<f64>,
    pub topology: TopologyKind,
    pub shock: Option<ShockSpec>,
    pub aggregate: CellAggregate,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
}

/// Runs the randomized dynamic from `state` with invariant monitoring.
fn monitored_run(
    market: &Market,
    state: OfferState,
    rng: &mut ChaCha8Rng,
    budget: Option<u64>,
    observer: &mut dyn FnMut(&crate::dynamics::StepView),
) -> Result<(RunResult, usize)> {
    let v = value_bound(market, state.buyer_offers().iter().chain(state.seller_offers()));
    let budget = budget.unwrap_or_else(|| default_budget(market, v));
    let mut monitor = InvariantMonitor::new(market, &state, v);
    let res = run_observed(market, state, rng, RunOptions::new(budget), &mut |view| {
        monitor.observe(view);
        observer(view);
    })?;
    Ok((res, monitor.violations().len()))
}

fn class_means(market: &Market, res: &RunResult) -> Result<(ClassMeans, i64)> {
    let mut sums = [(0i64, 0usize); 3];
    let mut net = 0i64;
    for (i, a) in market.agents().iter().enumerate() {
        let u = res.utilities[&a.id]
            .finite()
            .ok_or_else(|| Error::Domain(format!("{} ends with an infeasible bundle", a.id)))?;
        let inc = market.incident(i);
        let mask = inc
            .trades
            .iter()
            .enumerate()
            .filter(|(_, t)| res.executed.contains(&market.trade(**t).id))
            .fold(0u32, |m, (k, _)| m | 1 << k);
        let value = market.value_local(i, mask).finite().expect("utility was finite");
        net += value - u;
        let slot = match a.role {
            Role::Buyer => 0,
            Role::Seller => 1,
            Role::Intermediary => 2,
            Role::Trader => continue,
        };
        sums[slot].0 += u;
        sums[slot].1 += 1;
    }
    let mean = |(s, n): (i64, usize)| (n > 0).then(|| s as f64 / n as f64);
    Ok((
        ClassMeans {
            buyer: mean(sums[0]),
            seller: mean(sums[1]),
            intermediary: mean(sums[2]),
        },
        net,
    ))
}

fn run_one(
    config: &ExperimentConfig,
    topo: &TopologyKind,
    shock: Option<&ShockSpec>,
    rec: &mut RunRecord,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(rec.seed);
    let values = config.value_range();
    let sk = generate_with(&TopologyConfig::new(topo.clone(), rec.seed), &mut rng)?;
    let market = assign_valuations(&sk, values.clone(), &mut rng)?;
    rec.agents = market.num_agents();
    rec.trades = market.num_trades();
    let state = OfferState::initialize(&market, &config.init, config.epsilon, &mut rng)?;
    let (res, violations) = monitored_run(&market, state, &mut rng, config.budget, &mut |_| {})?;
    rec.outcome = Some(res.trace.outcome);
    rec.monitor_violations = violations;
    rec.satisfied_series = res.trace.satisfied_series.clone();
    if !res.trace.outcome.converged() {
        return Ok(());
    }
    let (means, net) = class_means(&market, &res)?;
    rec.class_utility = means;
    rec.net_transfer = Some(net);

    let Some(spec) = shock else {
        return Ok(());
    };
    let t0 = res.trace.iterations();
    let shocked = apply_shock(&market, &res.final_state, spec, &values, &mut rng)?;
    let hit: BTreeSet<usize> = shocked.agents.iter().copied().collect();
    let mut impacted: BTreeSet<usize> = BTreeSet::new();
    let (after, violations) = monitored_run(&shocked.market, shocked.state, &mut rng, config.budget, &mut |v| {
        impacted.extend(v.woken.iter().filter(|w| !hit.contains(w)));
    })?;
    rec.monitor_violations += violations;
    let others = market.num_agents() - hit.len();
    let t1 = after.trace.iterations();
    rec.shock = Some(ShockRecord {
        t0,
        shocked: hit.len(),
        impacted: impacted.len(),
        propagation: (others > 0).then(|| impacted.len() as f64 / others as f64),
        outcome: after.trace.outcome,
        t1,
        normalized: (after.trace.outcome.converged() && t0 > 0).then(|| t1 as f64 / t0 as f64),
    });
    Ok(())
}

fn run_cell(config: &ExperimentConfig, cell: usize, topo: &TopologyKind, shock: Option<&ShockSpec>) -> Vec<RunRecord> {
    (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let mut rec = RunRecord {
                run,
                seed: run_seed(config.seed, cell, run),
                agents: 0,
                trades: 0,
                outcome: None,
                satisfied_series: Vec::new(),
                class_utility: ClassMeans::default(),
                net_transfer: None,
                monitor_violations: 0,
                shock: None,
                error: None,
            };
            if let Err(e) = run_one(config, topo, shock, &mut rec) {
                rec.error = Some(format!("{}: {e}", e.class()));
            }
            rec
        })
        .collect()
}

/// Runs every cell of `config` on the current rayon pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let cells = config.cells()?;
    let values: Vec<Option<f64>> = match &config.sweep {
        Some(sw) => sw.values.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let shock_on = config.experiment == ExperimentKind::Shock;
    let cells = cells
        .into_iter()
        .zip(values)
        .enumerate()
        .map(|(c, ((topo, shock), sweep_value))| {
            let shock = if shock_on { shock } else { None };
            let runs = run_cell(config, c, &topo, shock.as_ref());
            CellResult {
                sweep_value,
                topology: topo,
                shock,
                aggregate: CellAggregate::of(&runs),
                runs,
            }
        })
        .collect();
    Ok(ExperimentResult {
        config: config.clone(),
        cells,
    })
}

pub fn convergence_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let mut c = config.clone();
    c.experiment = ExperimentKind::Convergence;
    run_experiment(&c)
}

pub fn welfare_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let mut c = config.clone();
    c.experiment = ExperimentKind::Welfare;
    run_experiment(&c)
}

pub fn shock_experiment(config: &ExperimentConfig, shock: ShockSpec) -> Result<ExperimentResult> {
    let mut c = config.clone();
    c.experiment = ExperimentKind::Shock;
    c.shock = Some(shock);
    run_experiment(&c)
}

/// Runs several experiments on a dedicated pool of `jobs` threads (0 means
/// rayon's default). Invalid configs fail the whole call before any run.
pub fn sweep(configs: &[ExperimentConfig], jobs: usize) -> Result<Vec<ExperimentResult>> {
    for c in configs {
        c.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    pool.install(|| configs.iter().map(run_experiment).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(buyers: u32, sellers: u32, r: f64) -> TopologyKind {
        TopologyKind::Bs { buyers, sellers, r }
    }

    fn small(kind: ExperimentKind, topo: TopologyKind, runs: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(kind, topo);
        c.runs = runs;
        c.seed = 11;
        c
    }

    #[test]
    fn single_pair_converges_quickly() {
        let r = convergence_experiment(&small(ExperimentKind::Convergence, bs(1, 1, 1.0), 50)).unwrap();
        let cell = &r.cells[0];
        assert_eq!(cell.aggregate.converged, 50);
        for run in &cell.runs {
            assert_eq!(*run.satisfied_series.last().unwrap(), 1.0);
            // one trade, all values and offers within 100
            assert!(run.iterations().unwrap() <= 4 * (2 * 100 + 2), "{run:?}");
            assert_eq!(run.net_transfer, Some(0));
            assert_eq!(run.monitor_violations, 0);
        }
    }

    #[test]
    fn aggregate_matches_recomputation() {
        let r = welfare_experiment(&small(ExperimentKind::Welfare, bs(4, 4, 0.5), 20)).unwrap();
        let cell = &r.cells[0];
        let it: Vec<f64> = cell
            .runs
            .iter()
            .filter(|r| r.converged())
            .map(|r| r.iterations().unwrap() as f64)
            .collect();
        let n = it.len() as f64;
        let mean = it.iter().sum::<f64>() / n;
        let var = it.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        assert!((cell.aggregate.iterations.mean.unwrap() - mean).abs() < 1e-9);
        assert!((cell.aggregate.iterations.std.unwrap() - var.sqrt()).abs() < 1e-9);
        assert_eq!(cell.aggregate.runs, 20);
    }

    #[test]
    fn zero_size_shock_is_vacuous() {
        let mut c = small(ExperimentKind::Shock, bs(5, 5, 0.4), 20);
        c.shock = Some(ShockSpec {
            shocked_proportion: 0.4,
            size: 0.0,
        });
        let r = run_experiment(&c).unwrap();
        for run in r.cells[0].runs.iter().filter(|r| r.converged()) {
            let s = run.shock.as_ref().unwrap();
            assert_eq!(s.impacted, 0);
            assert_eq!(s.t1, s.shocked as u64);
            assert_eq!(s.shocked, 4);
        }
    }

    #[test]
    fn sweep_cells_follow_the_axis() {
        let mut c = small(ExperimentKind::Welfare, bs(5, 5, 0.2), 1);
        c.sweep = Some(Sweep {
            axis: SweepAxis::BuyerProportion,
            values: vec![0.2, 0.8],
        });
        let cells = c.cells().unwrap();
        assert_eq!(cells[0].0, bs(2, 8, 0.2));
        assert_eq!(cells[1].0, bs(8, 2, 0.2));
        c.sweep = Some(Sweep {
            axis: SweepAxis::MarketSize,
            values: vec![4.0, 20.0],
        });
        assert_eq!(c.cells().unwrap()[1].0, bs(10, 10, 0.2));
        c.sweep = Some(Sweep {
            axis: SweepAxis::Lambda,
            values: vec![1.0],
        });
        assert!(c.validate().is_err());
        c.sweep = Some(Sweep {
            axis: SweepAxis::MarketSize,
            values: vec![20.0, 4.0],
        });
        assert!(c.validate().is_err());
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let mut c = small(ExperimentKind::Convergence, bs(4, 4, 0.4), 12);
        c.sweep = Some(Sweep {
            axis: SweepAxis::MarketSize,
            values: vec![4.0, 8.0],
        });
        let a = sweep(std::slice::from_ref(&c), 1).unwrap();
        let b = sweep(std::slice::from_ref(&c), 4).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(sweep(&[], 2).unwrap().is_empty());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let text = r#"
            name = "bs-welfare"
            experiment = "welfare"
            runs = 5
            seed = 9
            [topology]
            kind = "bs"
            buyers = 10
            sellers = 10
            r = 0.1
            [sweep]
            axis = "buyer_proportion"
            values = [0.2, 0.5]
        "#;
        let c: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(c.init, InitPolicy::UniformRandom { lo: 1, hi: 100 });
        assert_eq!(c.values, [1, 100]);
        let back: ExperimentConfig = toml::from_str(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
