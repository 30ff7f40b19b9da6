//! `privlab`: exact privacy audits and experiment suites from the command line.
//!
//! Every command prints one JSON document `{"config": …, "report": …, "pass": …}`.
//! Exit codes: 0 pass, 1 property failure (the report carries the witness),
//! 2 usage or IO error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use privlab_core::adversary::{blatant_attack, default_ell, AttackConfig, CandidateFamily};
use privlab_core::composition::{
    basic_composition, rdp_composition, rdp_subsample_amplify, strong_composition, CompositionInput,
};
use privlab_core::coupling::verify_walk_marginals;
use privlab_core::dp_analysis::{min_delta_for_epsilon, min_epsilon_for_delta};
use privlab_core::measures::{axiom_matrix, render_matrix, MatrixConfig, HEAVY_MIN_N_DEFAULT};
use privlab_core::selection::{
    dp_select, dp_select_law, heavy_coin_mechanism, heavy_coin_task, pick_heavy, pick_heavy_law, rdp_select,
    rdp_select_law, rep_to_dp, RepToDpParams,
};
use privlab_core::stability::{
    coverage_task, make_tv_stable_small_domain, stab_tv, StabMode, StabilizerParams, EXACT_PAIR_BUDGET,
};
use privlab_core::{FiniteDistribution, TabularMechanism, ETA};

const DEFAULT_SEED: u64 = 7;

#[derive(Parser)]
#[command(name = "privlab", version, about = "Exact finite-domain privacy audits")]
struct Cli {
    /// Master seed; PRIVLAB_SEED overrides the default.
    #[arg(long, global = true, env = "PRIVLAB_SEED")]
    seed: Option<u64>,
    /// Pretty-print the JSON (and a table where one exists).
    #[arg(long, global = true)]
    pretty: bool,
    /// Also write the report to this file.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact (ε, δ)-DP audit of a mechanism file.
    DpCheck(DpCheckArgs),
    /// Composition and amplification bounds.
    Compose(ComposeArgs),
    /// Chi-square check of the coupling walk marginals.
    #[command(alias = "walk-verify")]
    Walk(WalkArgs),
    /// Reconstruction attack against a symmetric mechanism file.
    Attack(AttackArgs),
    /// Measure × axiom verdict matrix.
    Axioms(AxiomsArgs),
    /// Pick-Heavy, DP-Select or RDP-Select over a counts file.
    Select(SelectArgs),
    /// Replicable-to-DP reduction around a registered algorithm.
    Rep2dp(Rep2dpArgs),
    /// TV-stability of a mechanism and of its small-domain stabilizer.
    Stability(StabilityArgs),
}

#[derive(Args)]
struct DpCheckArgs {
    /// Mechanism JSON: {domain_size, sample_size, output_size, rows}.
    #[arg(long)]
    mechanism: PathBuf,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Rule {
    Basic,
    Strong,
    Rdp,
    Subsample,
}

#[derive(Args)]
struct ComposeArgs {
    #[arg(long, value_enum)]
    rule: Rule,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    ell: usize,
    /// Use the √2 variant of strong composition.
    #[arg(long)]
    sqrt2: bool,
    /// Rényi order for the rdp rule.
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Subsample size for the subsample rule.
    #[arg(long)]
    n: Option<usize>,
    /// Input size for the subsample rule.
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Args)]
struct WalkArgs {
    #[arg(long)]
    domain: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    mechanism: PathBuf,
    #[arg(long)]
    n: usize,
    /// Copies; defaults to ⌈2n·ln|X|⌉.
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Decoy candidates per trial; 0 uses the full family.
    #[arg(long, default_value_t = 50)]
    decoys: usize,
    #[arg(long, default_value_t = 4)]
    gamma_draws: usize,
    /// Allow |X| < 100n²; the report is watermarked.
    #[arg(long)]
    relax_entropy: bool,
}

#[derive(Args)]
struct AxiomsArgs {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = HEAVY_MIN_N_DEFAULT)]
    heavy_min_n: usize,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Algo {
    PickHeavy,
    DpSelect,
    RdpSelect,
}

#[derive(Args)]
struct SelectArgs {
    /// JSON array of nonnegative counts.
    #[arg(long)]
    counts: PathBuf,
    #[arg(long, value_enum, default_value = "pick-heavy")]
    algo: Algo,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Algorithm {
    HeavyCoin,
}

#[derive(Args)]
struct Rep2dpArgs {
    #[arg(long, value_enum, default_value = "heavy-coin")]
    algorithm: Algorithm,
    /// Sample size of the replicable algorithm.
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 0.8)]
    bias: f64,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long)]
    mechanism: PathBuf,
    /// Comma-separated source weights; uniform when omitted.
    #[arg(long)]
    dist: Option<String>,
    #[arg(long, default_value_t = 0.2)]
    rho: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Learn from this many samples instead of the sample bound.
    #[arg(long)]
    m_override: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
}

/// Everything a run depends on besides its input files.
#[derive(Serialize)]
struct RunConfig {
    command: &'static str,
    seed: u64,
    tolerance: f64,
    trials: Option<usize>,
    relax_entropy: bool,
    output: Option<PathBuf>,
    params: Value,
}

struct Outcome {
    command: &'static str,
    trials: Option<usize>,
    relax_entropy: bool,
    params: Value,
    report: Value,
    pass: bool,
    table: Option<String>,
}

impl Outcome {
    fn new(command: &'static str, params: Value, report: impl Serialize, pass: bool) -> Result<Self> {
        Ok(Self {
            command,
            trials: None,
            relax_entropy: false,
            params,
            report: serde_json::to_value(report)?,
            pass,
            table: None,
        })
    }

    fn trials(mut self, trials: usize) -> Self {
        self.trials = Some(trials);
        self
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let outcome = match &cli.command {
        Command::DpCheck(a) => dp_check(a)?,
        Command::Compose(a) => compose(a)?,
        Command::Walk(a) => walk(a, seed)?,
        Command::Attack(a) => attack(a, seed)?,
        Command::Axioms(a) => axioms(a, seed)?,
        Command::Select(a) => select(a, seed)?,
        Command::Rep2dp(a) => rep2dp(a, seed)?,
        Command::Stability(a) => stability(a, seed)?,
    };
    let config = RunConfig {
        command: outcome.command,
        seed,
        tolerance: ETA,
        trials: outcome.trials,
        relax_entropy: outcome.relax_entropy,
        output: cli.output.clone(),
        params: outcome.params,
    };
    let doc = json!({ "config": config, "report": outcome.report, "pass": outcome.pass });
    let text = if cli.pretty { serde_json::to_string_pretty(&doc)? } else { serde_json::to_string(&doc)? };
    if let Some(path) = &cli.output {
        std::fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))?;
    }
    if cli.pretty {
        if let Some(table) = &outcome.table {
            print!("{table}");
        }
    }
    println!("{text}");
    Ok(outcome.pass)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_mechanism(path: &Path) -> Result<TabularMechanism> {
    read_json(path)
}

fn dp_check(a: &DpCheckArgs) -> Result<Outcome> {
    let m = load_mechanism(&a.mechanism)?;
    let params = json!({ "mechanism": a.mechanism, "eps": a.eps, "delta": a.delta });
    let (report, pass) = match (a.eps, a.delta) {
        (Some(eps), delta) => {
            let delta = delta.unwrap_or(0.0);
            let r = min_delta_for_epsilon(&m, eps)?;
            let pass = r.delta <= delta + ETA;
            (r, pass)
        }
        (None, Some(delta)) => (min_epsilon_for_delta(&m, delta)?, true),
        (None, None) => bail!("give --eps, --delta or both"),
    };
    Outcome::new("dp-check", params, report, pass)
}

fn compose(a: &ComposeArgs) -> Result<Outcome> {
    let params = json!({
        "rule": a.rule, "eps": a.eps, "delta": a.delta, "ell": a.ell,
        "sqrt2": a.sqrt2, "alpha": a.alpha, "n": a.n, "m": a.m,
    });
    let report = match a.rule {
        Rule::Basic => serde_json::to_value(basic_composition(&CompositionInput::new(a.eps, a.delta, a.ell)?))?,
        Rule::Strong => {
            serde_json::to_value(strong_composition(&CompositionInput::new(a.eps, a.delta, a.ell)?, a.sqrt2)?)?
        }
        Rule::Rdp => {
            if !(a.eps >= 0.0) || a.alpha <= 1.0 {
                bail!("rdp composition needs ε ≥ 0 and α > 1");
            }
            json!({ "alpha": a.alpha, "epsilon": rdp_composition(a.eps, a.alpha, a.ell) })
        }
        Rule::Subsample => {
            let (n, m) = match (a.n, a.m) {
                (Some(n), Some(m)) => (n, m),
                _ => bail!("the subsample rule needs --n and --m"),
            };
            json!({ "epsilon": rdp_subsample_amplify(a.eps, n, m)? })
        }
    };
    Outcome::new("compose", params, report, true)
}

fn walk(a: &WalkArgs, seed: u64) -> Result<Outcome> {
    let params = json!({ "domain": a.domain, "m": a.m, "d": a.d });
    let r = verify_walk_marginals(a.m, a.d, a.domain, a.trials, seed)?;
    let pass = r.pass;
    Ok(Outcome::new("walk", params, r, pass)?.trials(a.trials))
}

fn attack(a: &AttackArgs, seed: u64) -> Result<Outcome> {
    let m = load_mechanism(&a.mechanism)?;
    let x = m.domain_size();
    let floor = 100 * a.n * a.n;
    if x < floor && !a.relax_entropy {
        bail!("|X| = {x} is below 100n² = {floor}; pass --relax-entropy to run anyway");
    }
    let family = if a.decoys == 0 { CandidateFamily::Full } else { CandidateFamily::Decoy { decoys: a.decoys } };
    let config = AttackConfig {
        ell: a.ell.unwrap_or_else(|| default_ell(a.n, x)),
        family,
        gamma_draws: a.gamma_draws,
        trials: a.trials,
        seed,
    };
    let r = blatant_attack(&m, a.n, &config)?;
    let params = json!({ "mechanism": a.mechanism, "n": a.n, "attack": config });
    let relaxed = x < floor;
    let pass = !r.blatant;
    let mut out = Outcome::new("attack", params, r, pass)?.trials(a.trials);
    out.relax_entropy = relaxed;
    Ok(out)
}

fn axioms(a: &AxiomsArgs, seed: u64) -> Result<Outcome> {
    let config = MatrixConfig { seed, attack_trials: a.trials, heavy_min_n: a.heavy_min_n };
    let m = axiom_matrix(&config)?;
    let pass = m.matches_golden;
    let table = render_matrix(&m);
    let mut out = Outcome::new("axioms", json!({ "heavy_min_n": a.heavy_min_n }), m, pass)?.trials(a.trials);
    out.table = Some(table);
    Ok(out)
}

fn select(a: &SelectArgs, seed: u64) -> Result<Outcome> {
    let counts: Vec<u64> = read_json(&a.counts)?;
    let params = json!({ "counts": a.counts, "algo": a.algo, "eps": a.eps, "delta": a.delta, "beta": a.beta });
    let report = match a.algo {
        Algo::PickHeavy => json!({
            "outcome": pick_heavy(&counts, a.eps, a.delta, seed)?.value(),
            "law": pick_heavy_law(&counts, a.eps, a.delta)?.probs(),
        }),
        Algo::DpSelect => json!({
            "selection": dp_select(&counts, a.eps, a.delta, seed)?,
            "law": dp_select_law(&counts, a.eps, a.delta)?.probs(),
        }),
        Algo::RdpSelect => json!({
            "outcome": rdp_select(&counts, a.eps, a.beta, seed)?,
            "law": rdp_select_law(&counts, a.eps, a.beta)?.probs(),
        }),
    };
    Outcome::new("select", params, report, true)
}

fn rep2dp(a: &Rep2dpArgs, seed: u64) -> Result<Outcome> {
    let (inner, task) = match a.algorithm {
        Algorithm::HeavyCoin => (heavy_coin_mechanism(a.n), heavy_coin_task(a.bias)?),
    };
    let red = rep_to_dp(&inner, RepToDpParams::new(a.eps, a.delta, a.beta))?;
    let mut sources = Vec::new();
    let mut pass = true;
    for (i, d) in task.family.iter().enumerate() {
        let f = red.empirical_failure(&task, d, a.trials, privlab_core::seeding::combine(seed, i as u64))?;
        let se = (f * (1.0 - f) / a.trials as f64).sqrt();
        pass &= f - 3.0 * se <= a.beta + ETA;
        sources.push(json!({ "dist": d.probs(), "failure": f, "standard_error": se }));
    }
    let report = json!({
        "params": red.params, "k": red.k, "ell": red.ell, "m": red.m,
        "in_regime": red.in_regime, "sources": sources,
    });
    let params = json!({ "algorithm": a.algorithm, "n": a.n, "bias": a.bias });
    Ok(Outcome::new("rep2dp", params, report, pass)?.trials(a.trials))
}

fn stability(a: &StabilityArgs, seed: u64) -> Result<Outcome> {
    let m = load_mechanism(&a.mechanism)?;
    let weights = match &a.dist {
        Some(s) => s
            .split(',')
            .map(|w| w.trim().parse::<f64>().with_context(|| format!("bad weight {w:?}")))
            .collect::<Result<Vec<_>>>()?,
        None => vec![1.0; m.domain_size()],
    };
    let d = FiniteDistribution::new(weights)?;
    let rows = m.num_rows() as f64;
    let mode =
        if rows * rows * m.output_size() as f64 <= EXACT_PAIR_BUDGET { StabMode::Exact } else { StabMode::MonteCarlo };
    let base = stab_tv(&m, &d, mode, seed)?;
    let mut sp = StabilizerParams::new(a.rho, a.beta);
    sp.m_override = a.m_override;
    let st = make_tv_stable_small_domain(&m, sp, seed)?;
    let stabilized = st.stab_tv(&d, a.trials, seed)?;
    let task = coverage_task(&m, std::slice::from_ref(&d), a.beta)?;
    let failure = st.failure_mc(&task, &d, a.trials)?;
    let pass = stabilized.value <= a.rho + ETA;
    let report = json!({
        "base": base,
        "stabilizer": {
            "params": st.params, "required_m": st.required_m, "m": st.m, "below_bound": st.below_bound,
        },
        "stabilized": stabilized,
        "coverage_failure": failure,
    });
    let params = json!({ "mechanism": a.mechanism, "dist": d.probs(), "rho": a.rho, "beta": a.beta });
    Ok(Outcome::new("stability", params, report, pass)?.trials(a.trials))
}
