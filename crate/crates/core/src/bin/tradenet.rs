//! Command-line front end: generate markets, run the dynamic, sweep
//! experiments, apply shocks, check structural properties and draw charts.
//!
//! Failures print one line `error[CLASS]: message` to stderr, where CLASS is
//! one of `usage`, `parse`, `validation`, `domain`, `precondition`,
//! `capacity`, `io` or `verification`, and exit with status 2 (1 for failed
//! verifications).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use tradenet::dynamics::{default_budget, run_observed, InitPolicy, InvariantMonitor, OfferState, RunOptions};
use tradenet::experiments::{self, apply_shock, ShockSpec};
use tradenet::fixtures;
use tradenet::io::{self, ResultBundle, ARTIFACT_VERSION};
use tradenet::market::{check_full_substitutability, value_bound, AgentId, FsMode, Market, PriceBox, Value};
use tradenet::theory::{self, AgentPartition, SparsityMode};
use tradenet::topology::{self, TopologyConfig, TopologyKind};
use tradenet::Error;

#[derive(Parser)]
#[command(
    name = "tradenet",
    version,
    about = "Best-response negotiation dynamics on trading networks"
)]
struct Cli {
    /// Seed for every random draw [default: 0; `sweep` keeps each config's seed].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Offer step size [default: 1; `sweep` keeps each config's step].
    #[arg(long, global = true)]
    epsilon: Option<i64>,
    /// Best responses allowed per run [default: 50 · agents · (2V + 2)].
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output directory.
    #[arg(long, global = true, env = "TRADENET_OUT", default_value = "tradenet-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

impl Cli {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn epsilon(&self) -> i64 {
        self.epsilon.unwrap_or(1)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random market and write it as `market.toml`.
    Generate(GenerateArgs),
    /// Run the randomized dynamic on a market file.
    Run(RunArgs),
    /// Run experiment configs; each writes into `OUT/<name>/`.
    Sweep {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Override the runs per cell of every config.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Converge a market, shock it and converge again.
    Shock(ShockArgs),
    /// Check structural properties; exits 1 if any check fails.
    Verify(VerifyArgs),
    /// Draw SVG charts for every CSV in a result directory, next to the CSVs.
    Plot { dir: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Bs,
    Bis,
    General,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    topology: Family,
    #[arg(long, default_value_t = 10)]
    buyers: u32,
    #[arg(long, default_value_t = 10)]
    sellers: u32,
    #[arg(long, default_value_t = 2)]
    intermediaries: u32,
    /// Edge probability for the bipartite and tripartite families.
    #[arg(long, default_value_t = 0.1)]
    r: f64,
    /// Vertices of the general family before taking the largest component.
    #[arg(long, default_value_t = 100)]
    n: u32,
    /// Mean degree of the general family.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Inclusive range of buyer values and seller costs, `LO:HI`.
    #[arg(long, default_value = "1:100")]
    values: String,
}

#[derive(Args)]
struct StartArgs {
    /// Initial offers: `file` (offers in the market file), `zeros` or
    /// `uniform:LO:HI` [default: file if present, else uniform:1:100].
    #[arg(long)]
    init: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    market: PathBuf,
    #[command(flatten)]
    start: StartArgs,
    /// Also write every best response to `trace.json`.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct ShockArgs {
    market: PathBuf,
    #[command(flatten)]
    start: StartArgs,
    /// Relative half-width of the resampling window.
    #[arg(long)]
    size: f64,
    /// Fraction of unit buyers and sellers that are shocked.
    #[arg(long, default_value_t = 0.25)]
    proportion: f64,
    /// Inclusive range new values are clipped to, `LO:HI`.
    #[arg(long, default_value = "1:100")]
    values: String,
}

#[derive(Args)]
#[group(required = true, multiple = true)]
struct VerifyArgs {
    /// Replay the bundled two-trade cycle and compare its offer table.
    #[arg(long)]
    example2_cycle: bool,
    /// Check every agent of a market for full substitutability.
    #[arg(long, value_name = "MARKET")]
    fs: Option<PathBuf>,
    /// Report the exact sparsity of a market.
    #[arg(long, value_name = "MARKET")]
    sparsity: Option<PathBuf>,
    /// Replay random restriction and merge phases on a market.
    #[arg(long, value_name = "MARKET")]
    lemmas: Option<PathBuf>,
    /// Price range of the substitutability box, `LO:HI` [default: 0:V+1].
    #[arg(long, requires = "fs")]
    price_range: Option<String>,
    /// Random cases for --lemmas.
    #[arg(long, default_value_t = 20, requires = "lemmas")]
    cases: usize,
}

struct Failure {
    class: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            class: e.class(),
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        class: "usage",
        message: message.into(),
    }
}

type CliResult<T> = Result<T, Failure>;

fn parse_range(s: &str) -> CliResult<(i64, i64)> {
    let bad = || usage(format!("expected LO:HI, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b) = (
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    );
    if a > b {
        return Err(usage(format!("empty range {s:?}")));
    }
    Ok((a, b))
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure {
        class: "io",
        message: format!("{}: {e}", path.display()),
    })
}

fn load_market(path: &Path) -> CliResult<io::MarketFile> {
    io::parse_market(&read(path)?).map_err(|e| Failure {
        class: e.class(),
        message: format!("{}: {e}", path.display()),
    })
}

fn start_state(file: &io::MarketFile, args: &StartArgs, epsilon: i64, rng: &mut ChaCha8Rng) -> CliResult<OfferState> {
    let m = &file.market;
    let policy = match args.init.as_deref() {
        None => match &file.offers {
            Some(s) => return Ok(with_epsilon(m, s, epsilon)?),
            None => InitPolicy::UniformRandom { lo: 1, hi: 100 },
        },
        Some("file") => {
            let s = file
                .offers
                .as_ref()
                .ok_or_else(|| usage("the market file has no [[offers]]"))?;
            return Ok(with_epsilon(m, s, epsilon)?);
        }
        Some("zeros") => InitPolicy::Zeros,
        Some(other) => {
            let range = other
                .strip_prefix("uniform:")
                .ok_or_else(|| usage(format!("unknown --init {other:?}")))?;
            let (lo, hi) = parse_range(range)?;
            InitPolicy::UniformRandom { lo, hi }
        }
    };
    Ok(OfferState::initialize(m, &policy, epsilon, rng)?)
}

fn with_epsilon(m: &Market, s: &OfferState, epsilon: i64) -> tradenet::Result<OfferState> {
    OfferState::new(m, s.buyer_offers().to_vec(), s.seller_offers().to_vec(), epsilon)
}

fn bound_of(m: &Market, s: &OfferState) -> u64 {
    value_bound(m, s.buyer_offers().iter().chain(s.seller_offers()))
}

fn value_text(v: &Value) -> String {
    v.to_string()
}

#[derive(Serialize)]
struct DynamicsSummary {
    outcome: tradenet::dynamics::Outcome,
    iterations: u64,
    value_bound: u64,
    budget: u64,
    executed: Vec<u32>,
    utilities: BTreeMap<u32, String>,
    monitor_violations: Vec<tradenet::dynamics::MonitorViolation>,
}

fn converge(
    m: &Market,
    state: OfferState,
    budget: Option<u64>,
    rng: &mut ChaCha8Rng,
    record: bool,
    observer: &mut dyn FnMut(&tradenet::dynamics::StepView),
) -> CliResult<(tradenet::dynamics::RunResult, DynamicsSummary)> {
    let v = bound_of(m, &state);
    let budget = budget.unwrap_or_else(|| default_budget(m, v));
    let mut opts = RunOptions::new(budget);
    if record {
        opts = opts.recording();
    }
    let mut monitor = InvariantMonitor::new(m, &state, v);
    let res = run_observed(m, state, rng, opts, &mut |view| {
        monitor.observe(view);
        observer(view);
    })?;
    let summary = DynamicsSummary {
        outcome: res.trace.outcome,
        iterations: res.trace.iterations(),
        value_bound: v,
        budget,
        executed: res.executed.iter().map(|t| t.0).collect(),
        utilities: res.utilities.iter().map(|(a, u)| (a.0, value_text(u))).collect(),
        monitor_violations: monitor.violations().to_vec(),
    };
    Ok((res, summary))
}

#[derive(Serialize)]
struct RunSummary<'a> {
    artifact_version: &'static str,
    command: &'static str,
    seed: u64,
    epsilon: i64,
    init: &'a str,
    agents: usize,
    trades: usize,
    #[serde(flatten)]
    dynamics: DynamicsSummary,
}

fn cmd_generate(cli: &Cli, a: &GenerateArgs) -> CliResult<()> {
    let kind = match a.topology {
        Family::Bs => TopologyKind::Bs {
            buyers: a.buyers,
            sellers: a.sellers,
            r: a.r,
        },
        Family::Bis => TopologyKind::Bis {
            buyers: a.buyers,
            sellers: a.sellers,
            intermediaries: a.intermediaries,
            r: a.r,
        },
        Family::General => TopologyKind::General {
            n: a.n,
            lambda: a.lambda,
        },
    };
    let (lo, hi) = parse_range(&a.values)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed());
    let sk = topology::generate_with(&TopologyConfig::new(kind, cli.seed()), &mut rng)?;
    let m = topology::assign_valuations(&sk, lo..=hi, &mut rng)?;
    let mut b = ResultBundle::default();
    b.insert("market.toml", io::serialize_market(&m, None));
    b.write_to(&cli.out)?;
    println!(
        "wrote {} ({} agents, {} trades)",
        cli.out.join("market.toml").display(),
        m.num_agents(),
        m.num_trades()
    );
    Ok(())
}

/// The dynamic draws from its own stream, so re-running a bundle's
/// `market.toml` (which records the start offers) with the same seed
/// repeats the run exactly.
fn dynamics_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn cmd_run(cli: &Cli, a: &RunArgs) -> CliResult<()> {
    let file = load_market(&a.market)?;
    let state = start_state(
        &file,
        &a.start,
        cli.epsilon(),
        &mut ChaCha8Rng::seed_from_u64(cli.seed()),
    )?;
    let m = &file.market;
    let mut rng = dynamics_rng(cli.seed());
    let mut b = ResultBundle::default();
    b.insert("market.toml", io::serialize_market(m, Some(&state)));
    let (res, dynamics) = converge(m, state, cli.budget, &mut rng, a.trace, &mut |_| {})?;
    b.insert_series("series.csv", &res.trace, m.num_agents())?;
    if a.trace {
        b.insert_json("trace.json", &res.trace.steps)?;
    }
    println!("{:?} after {} best responses", dynamics.outcome, dynamics.iterations);
    b.insert_json(
        "summary.json",
        &RunSummary {
            artifact_version: ARTIFACT_VERSION,
            command: "run",
            seed: cli.seed(),
            epsilon: cli.epsilon(),
            init: a.start.init.as_deref().unwrap_or("default"),
            agents: m.num_agents(),
            trades: m.num_trades(),
            dynamics,
        },
    )?;
    b.write_to(&cli.out)?;
    Ok(())
}

fn cmd_sweep(cli: &Cli, paths: &[PathBuf], runs: Option<usize>) -> CliResult<()> {
    let mut configs = Vec::new();
    for p in paths {
        let mut c = io::parse_config(&read(p)?).map_err(|e| Failure {
            class: e.class(),
            message: format!("{}: {e}", p.display()),
        })?;
        if let Some(seed) = cli.seed {
            c.seed = seed;
        }
        if cli.budget.is_some() {
            c.budget = cli.budget;
        }
        if let Some(r) = runs {
            c.runs = r;
        }
        if let Some(e) = cli.epsilon {
            c.epsilon = e;
        }
        configs.push(c);
    }
    let names: BTreeSet<&str> = configs.iter().map(|c| c.name.as_str()).collect();
    if names.len() != configs.len() {
        return Err(usage("experiment names must be distinct"));
    }
    let results = experiments::sweep(&configs, cli.jobs)?;
    for r in &results {
        let dir = cli.out.join(&r.config.name);
        io::experiment_bundle(r)?.write_to(&dir)?;
        for c in &r.cells {
            let a = &c.aggregate;
            println!(
                "{} {}: {}/{} converged, mean iterations {}",
                r.config.name,
                c.sweep_value.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                a.converged,
                a.runs,
                a.iterations
                    .mean
                    .map(|m| format!("{m:.1}"))
                    .unwrap_or_else(|| "-".into())
            );
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ShockSummary<'a> {
    artifact_version: &'static str,
    command: &'static str,
    seed: u64,
    epsilon: i64,
    budget: Option<u64>,
    init: &'a str,
    shock: ShockSpec,
    values: [i64; 2],
    shocked: Vec<u32>,
    impacted: Vec<u32>,
    propagation: Option<f64>,
    normalized_reconvergence: Option<f64>,
    before: DynamicsSummary,
    after: DynamicsSummary,
}

fn cmd_shock(cli: &Cli, a: &ShockArgs) -> CliResult<()> {
    let file = load_market(&a.market)?;
    let (lo, hi) = parse_range(&a.values)?;
    let spec = ShockSpec {
        shocked_proportion: a.proportion,
        size: a.size,
    };
    let state = start_state(
        &file,
        &a.start,
        cli.epsilon(),
        &mut ChaCha8Rng::seed_from_u64(cli.seed()),
    )?;
    let m = &file.market;
    let mut rng = dynamics_rng(cli.seed());
    let mut b = ResultBundle::default();
    b.insert("market.toml", io::serialize_market(m, Some(&state)));
    let (res, before) = converge(m, state, cli.budget, &mut rng, false, &mut |_| {})?;
    b.insert_series("series.csv", &res.trace, m.num_agents())?;
    let shocked = apply_shock(m, &res.final_state, &spec, &(lo..=hi), &mut rng)?;
    b.insert("shocked_market.toml", io::serialize_market(&shocked.market, None));
    let hit: BTreeSet<usize> = shocked.agents.iter().copied().collect();
    let mut impacted = BTreeSet::new();
    let (after_res, after) = converge(&shocked.market, shocked.state, cli.budget, &mut rng, false, &mut |v| {
        impacted.extend(v.woken.iter().copied().filter(|w| !hit.contains(w)));
    })?;
    b.insert_series("series_after.csv", &after_res.trace, m.num_agents())?;
    let others = m.num_agents() - hit.len();
    let ids = |s: &BTreeSet<usize>| s.iter().map(|&i| m.agent_id(i).0).collect::<Vec<_>>();
    let summary = ShockSummary {
        artifact_version: ARTIFACT_VERSION,
        command: "shock",
        seed: cli.seed(),
        epsilon: cli.epsilon(),
        budget: cli.budget,
        init: a.start.init.as_deref().unwrap_or("default"),
        shock: spec,
        values: [lo, hi],
        shocked: ids(&hit),
        impacted: ids(&impacted),
        propagation: (others > 0).then(|| impacted.len() as f64 / others as f64),
        normalized_reconvergence: (after.outcome.converged() && before.iterations > 0)
            .then(|| after.iterations as f64 / before.iterations as f64),
        before,
        after,
    };
    println!(
        "{} shocked, {} impacted, {} then {} best responses",
        summary.shocked.len(),
        summary.impacted.len(),
        summary.before.iterations,
        summary.after.iterations
    );
    b.insert_json("summary.json", &summary)?;
    b.write_to(&cli.out)?;
    Ok(())
}

fn report(ok: bool, what: String, failures: &mut usize) {
    println!("{} {what}", if ok { "PASS" } else { "FAIL" });
    if !ok {
        *failures += 1;
    }
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs) -> CliResult<()> {
    let mut failures = 0;
    if a.example2_cycle {
        let file = io::parse_market(fixtures::EXAMPLE2_TOML)?;
        let start = file
            .offers
            .as_ref()
            .ok_or_else(|| usage("bundled example 2 has no offers"))?;
        let r = fixtures::replay_example2(&file.market, start)?;
        let cols: Vec<String> = r.columns.iter().map(|c| format!("({}, {})", c[0], c[1])).collect();
        report(
            r.reproduces_table(),
            format!("example 2 cycle: columns {} outcome {:?}", cols.join(" "), r.outcome),
            &mut failures,
        );
    }
    if let Some(p) = &a.fs {
        let file = load_market(p)?;
        let m = &file.market;
        let (lo, hi) = match &a.price_range {
            Some(r) => parse_range(r)?,
            None => (0, m.valuation_bound() as i64 + 1),
        };
        for agent in m.agents() {
            let b = PriceBox::uniform(m, agent.id, lo, hi)?;
            let r = match check_full_substitutability(m, agent.id, &b, FsMode::UnitSteps) {
                Err(e @ Error::Capacity { .. }) => {
                    println!("SKIP {} ({e}; narrow --price-range)", agent.id);
                    continue;
                }
                r => r?,
            };
            let detail = match &r.witness {
                Some(w) => format!(
                    ", witness {:?}: {:?} -> {:?}",
                    w.condition,
                    w.demanded.iter().map(|t| t.0).collect::<Vec<_>>(),
                    w.demanded_prime.iter().map(|t| t.0).collect::<Vec<_>>()
                ),
                None => String::new(),
            };
            report(
                r.is_fully_substitutable,
                format!("{} substitutable on [{lo}, {hi}]{detail}", agent.id),
                &mut failures,
            );
        }
    }
    if let Some(p) = &a.sparsity {
        let file = load_market(p)?;
        let s = theory::sparsity(&file.market, SparsityMode::Exact)?;
        report(true, format!("sparsity {s}"), &mut failures);
    }
    if let Some(p) = &a.lemmas {
        let file = load_market(p)?;
        let m = &file.market;
        if m.num_agents() < 2 {
            return Err(usage("lemma checks need at least two agents"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cli.seed());
        let v = m.valuation_bound() as i64;
        let ids: Vec<AgentId> = m.agents().iter().map(|x| x.id).collect();
        let (mut restricted, mut merged, mut skipped) = ([0usize; 2], [0usize; 2], 0usize);
        for _ in 0..a.cases {
            let k = rng.gen_range(1..ids.len());
            let subset: BTreeSet<AgentId> = ids.choose_multiple(&mut rng, k).copied().collect();
            let state =
                OfferState::initialize(m, &InitPolicy::UniformRandom { lo: -v, hi: v }, cli.epsilon(), &mut rng)?;
            let budget = cli.budget.unwrap_or_else(|| default_budget(m, bound_of(m, &state)));
            match theory::terminating_sequence(m, &subset, &state, &mut rng, budget)? {
                Some(seq) => {
                    let ok = theory::verify_restriction_lemma(m, &subset, &state, &seq)?.holds;
                    restricted[usize::from(!ok)] += 1;
                }
                None => skipped += 1,
            }
            let partition = AgentPartition::split_off(m, subset)?;
            for ph in theory::alternating_phases(m, &partition, &state, &mut rng, 8, budget)? {
                let ok = theory::verify_merge_lemma(m, &partition, &ph.start, ph.part, &ph.sequence)?.holds;
                merged[usize::from(!ok)] += 1;
            }
        }
        report(
            restricted[1] == 0,
            format!(
                "restriction replays: {} agree, {} differ, {skipped} unconverged",
                restricted[0], restricted[1]
            ),
            &mut failures,
        );
        report(
            merged[1] == 0,
            format!("merge phases: {} agree, {} differ", merged[0], merged[1]),
            &mut failures,
        );
    }
    if failures > 0 {
        return Err(Failure {
            class: "verification",
            message: format!("{failures} check(s) failed"),
        });
    }
    Ok(())
}

fn cmd_plot(dir: &Path) -> CliResult<()> {
    let bundle = io::read_bundle_dir(dir)?;
    let charts = io::plot_bundle(&bundle)?;
    if charts.is_empty() {
        return Err(usage(format!("no chartable CSV in {}", dir.display())));
    }
    for (name, svg) in charts {
        let p = dir.join(&name);
        fs::write(&p, svg).map_err(Error::from)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    if let Some(e) = cli.epsilon.filter(|&e| e < 1) {
        return Err(usage(format!("--epsilon must be positive, got {e}")));
    }
    if cli.budget == Some(0) {
        return Err(usage("--budget must be at least 1"));
    }
    match &cli.command {
        Command::Generate(a) => cmd_generate(cli, a),
        Command::Run(a) => cmd_run(cli, a),
        Command::Sweep { configs, runs } => cmd_sweep(cli, configs, *runs),
        Command::Shock(a) => cmd_shock(cli, a),
        Command::Verify(a) => cmd_verify(cli, a),
        Command::Plot { dir } => cmd_plot(dir),
    }
}

fn fail(f: Failure) -> ExitCode {
    let message = f.message.lines().collect::<Vec<_>>().join(" ");
    eprintln!("error[{}]: {message}", f.class);
    ExitCode::from(if f.class == "verification" { 1 } else { 2 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or("bad arguments")
                .trim_start_matches("error: ");
            return fail(usage(first.to_string()));
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f),
    }
}
