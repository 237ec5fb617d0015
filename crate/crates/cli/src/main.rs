//! Command-line front end: scenario-driven reward computation, equilibrium
//! checking and construction, OPT / Price of Stability, Sybil analysis, and
//! the verification suite.
//!
//! Exit codes: 0 ok, 2 input error, 3 premise unmet, 4 verification failure.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use poolform_core::equilibrium::{
    check_nash, construct_atomic_kl_equilibrium, construct_leximin_optimal,
    construct_oceanic_equilibrium, construct_sqrt_kl_equilibrium, CheckConfig, ConditionReport,
    Deviation, DeviationTarget, Deviator, EquilibriumError,
};
use poolform_core::model::{
    parse_scenario, pool_stake, GameSpec, ModelError, Partition, Scenario, Scheme,
};
use poolform_core::rewards::{allocate_rewards, McConfig, RewardError};
use poolform_core::sybil::{
    audit_sybil_proofness, sybil_best_response, waterfill_proportional, SybilAudit, SybilConfig,
    SybilError, SybilVerdict,
};
use poolform_core::verify::{run_all, VerifyConfig};
use poolform_core::welfare::{opt_atomic, opt_oceanic, price_of_stability, PosCaps, PosMethod};

#[derive(Parser)]
#[command(
    name = "poolform",
    version,
    about = "Stake-pool formation games: reward schemes, equilibria, decentralization, Sybil analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (JSON: threshold, atomic_stakes, oceanic_mass, ...).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Reward sharing scheme (overrides the scenario's `scheme` field).
    #[arg(long, global = true)]
    scheme: Option<String>,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Cap on exhaustive partition enumeration.
    #[arg(long = "max-enum", global = true, default_value_t = 10)]
    max_enum: usize,
    /// Cap on the exact OPT solver.
    #[arg(long = "max-opt", global = true, default_value_t = 20)]
    max_opt: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Per-player rewards and per-pool oceanic rates for the scenario partition.
    Rewards,
    /// Nash-equilibrium checking and construction.
    Equilibrium {
        #[command(subcommand)]
        sub: EquilibriumCmd,
    },
    /// Maximum number of winning pools (dual bin packing).
    Opt,
    /// Price of Stability.
    Pos {
        #[arg(long, value_enum, default_value_t = PosModeArg::Exhaustive)]
        mode: PosModeArg,
    },
    /// Sybil (stake-splitting) analysis.
    Sybil {
        #[command(subcommand)]
        sub: SybilCmd,
    },
    /// Run the full verification suite (nonzero exit on any failure).
    Verify,
}

#[derive(Subcommand)]
enum EquilibriumCmd {
    /// Check whether the scenario partition is a Nash equilibrium.
    Check,
    /// Construct the scheme's equilibrium for the scenario game.
    Construct {
        /// Target size of large-player-free pools (oceanic construction).
        #[arg(long)]
        l: Option<f64>,
        /// Allowed slack above the target l when divisibility requires it.
        #[arg(long, default_value_t = 0.0)]
        slack: f64,
    },
}

#[derive(Subcommand)]
enum SybilCmd {
    /// Best-response audit for every atomic player.
    Audit,
    /// Best response of one player.
    BestResponse {
        #[arg(long)]
        player: usize,
    },
    /// Water-filling optimizer for proportional sharing.
    Waterfill {
        /// Player whose stake is the budget (pool stakes from the partition).
        #[arg(long)]
        player: Option<usize>,
        /// Explicit pool stakes (comma separated), overriding the scenario.
        #[arg(long, value_delimiter = ',')]
        pools: Option<Vec<f64>>,
        /// Budget to allocate (defaults to the player's stake).
        #[arg(long)]
        budget: Option<f64>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PosModeArg {
    Exhaustive,
    Structured,
    Constructive,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
    fn premise(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<RewardError> for CliError {
    fn from(e: RewardError) -> Self {
        match e {
            RewardError::Model(m) => m.into(),
            other => CliError::premise(other.to_string()),
        }
    }
}

impl From<EquilibriumError> for CliError {
    fn from(e: EquilibriumError) -> Self {
        match e {
            EquilibriumError::Model(m) => m.into(),
            EquilibriumError::Reward(r) => r.into(),
            EquilibriumError::InvalidPartition(_) => CliError::input(e.to_string()),
            _ => CliError::premise(e.to_string()),
        }
    }
}

impl From<SybilError> for CliError {
    fn from(e: SybilError) -> Self {
        match e {
            SybilError::Model(m) => m.into(),
            SybilError::Reward(r) => r.into(),
            SybilError::Premise(_) => CliError::premise(e.to_string()),
            other => CliError::input(other.to_string()),
        }
    }
}

/// Run metadata embedded in every report.
struct Meta {
    version: &'static str,
    scenario_hash: String,
    seed: u64,
    samples: u64,
    tol: f64,
}

impl Meta {
    fn line(&self) -> String {
        format!(
            "version={};scenario={};seed={};samples={};tol={}",
            self.version,
            self.scenario_hash,
            self.seed,
            self.samples,
            fmt_sig(self.tol)
        )
    }
}

/// 12 significant digits, trailing zeros trimmed.
fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        format!("{:.11e}", x)
    };
    trim_zeros(&s)
}

fn trim_zeros(s: &str) -> String {
    if let Some(epos) = s.find(['e', 'E']) {
        let (mantissa, exp) = s.split_at(epos);
        let trimmed = trim_zeros(mantissa);
        return format!("{trimmed}{exp}");
    }
    if !s.contains('.') {
        return s.to_string();
    }
    let t = s.trim_end_matches('0');
    t.trim_end_matches('.').to_string()
}

/// RFC-4180 quoting: fields containing separators, quotes, or newlines are
/// quoted with doubled inner quotes.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_row(fields: &[String]) -> String {
    fields
        .iter()
        .map(|f| csv_field(f))
        .collect::<Vec<_>>()
        .join(",")
}

struct Ctx {
    scenario: Option<Scenario>,
    scheme: Option<Scheme>,
    meta: Meta,
    format: Format,
    check: CheckConfig,
    caps: PosCaps,
}

impl Ctx {
    fn game(&self) -> Result<&GameSpec, CliError> {
        self.scenario
            .as_ref()
            .map(|s| &s.game)
            .ok_or_else(|| CliError::input("a scenario file is required (--scenario)"))
    }

    fn partition(&self) -> Result<&Partition, CliError> {
        self.scenario
            .as_ref()
            .and_then(|s| s.partition.as_ref())
            .ok_or_else(|| CliError::input("the scenario has no partition block"))
    }

    fn scheme(&self) -> Result<Scheme, CliError> {
        self.scheme.ok_or_else(|| {
            CliError::input("no scheme given: pass --scheme or set it in the scenario")
        })
    }

    fn emit(&self, table: String, csv: Vec<Vec<String>>) {
        match self.format {
            Format::Table => {
                println!("# {}", self.meta.line());
                print!("{table}");
            }
            Format::Csv => {
                for row in csv {
                    println!("{}", csv_row(&row));
                }
            }
        }
    }

    fn csv_header(&self, columns: &[&str]) -> Vec<Vec<String>> {
        let mut rows = vec![columns.iter().map(|c| c.to_string()).collect::<Vec<_>>()];
        let mut meta = vec!["meta".to_string(), self.meta.line()];
        meta.resize(columns.len(), String::new());
        rows.push(meta);
        rows
    }
}

fn describe_pool(game: &GameSpec, partition: &Partition, idx: usize) -> String {
    let pool = &partition.pools[idx];
    let members: Vec<String> = pool.atomic_members.iter().map(|m| m.to_string()).collect();
    let mut s = format!("pool {idx}: players [{}]", members.join(" "));
    if pool.oceanic_share > 0.0 {
        let _ = write!(s, " + ocean {}", fmt_sig(pool.oceanic_share));
    }
    let _ = write!(
        s,
        " (stake {})",
        fmt_sig(pool_stake(pool, game).unwrap_or(f64::NAN))
    );
    s
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let (scenario, hash) = match &cli.scenario {
        Some(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
            let mut hasher = Sha256::new();
            hasher.update(&bytes);
            let hash = format!("{:x}", hasher.finalize());
            let text = String::from_utf8(bytes)
                .map_err(|_| CliError::input("scenario file is not valid UTF-8"))?;
            let mut scenario = parse_scenario(&text)?;
            scenario.game.set_tol(cli.tol);
            (Some(scenario), hash)
        }
        None => (None, "-".to_string()),
    };
    let scheme = match &cli.scheme {
        Some(s) => Some(s.parse::<Scheme>()?),
        None => scenario.as_ref().and_then(|s| s.scheme),
    };
    let ctx = Ctx {
        scheme,
        meta: Meta {
            version: env!("CARGO_PKG_VERSION"),
            scenario_hash: hash,
            seed: cli.seed,
            samples: cli.samples,
            tol: cli.tol,
        },
        format: cli.format,
        check: CheckConfig {
            tol: cli.tol,
            mc: McConfig {
                samples: cli.samples,
                seed: cli.seed,
            },
        },
        caps: PosCaps {
            enumeration: cli.max_enum,
            solver: cli.max_opt,
        },
        scenario,
    };
    match cli.command {
        Command::Rewards => cmd_rewards(&ctx),
        Command::Equilibrium { sub } => match sub {
            EquilibriumCmd::Check => cmd_equilibrium_check(&ctx),
            EquilibriumCmd::Construct { l, slack } => cmd_equilibrium_construct(&ctx, l, slack),
        },
        Command::Opt => cmd_opt(&ctx),
        Command::Pos { mode } => cmd_pos(&ctx, mode),
        Command::Sybil { sub } => match sub {
            SybilCmd::Audit => cmd_sybil_audit(&ctx),
            SybilCmd::BestResponse { player } => cmd_sybil_best_response(&ctx, player),
            SybilCmd::Waterfill {
                player,
                pools,
                budget,
            } => cmd_sybil_waterfill(&ctx, player, pools, budget),
        },
        Command::Verify => cmd_verify(&ctx),
    }
}

fn reward_cell(value: f64, exact: Option<&num::BigRational>) -> String {
    match exact {
        Some(r) => format!("{}/{}", r.numer(), r.denom()),
        None => fmt_sig(value),
    }
}

fn cmd_rewards(ctx: &Ctx) -> Result<ExitCode, CliError> {
    let game = ctx.game()?;
    let partition = ctx.partition()?;
    let scheme = ctx.scheme()?;
    let alloc = allocate_rewards(partition, game, scheme, &ctx.check.mc)?;
    let mut table = format!("rewards under {scheme}\n");
    let mut csv = ctx.csv_header(&["record", "pool", "player", "stake", "value"]);
    for (idx, pool) in partition.pools.iter().enumerate() {
        table.push_str(&describe_pool(game, partition, idx));
        table.push('\n');
        for &id in &pool.atomic_members {
            let value = alloc.atomic_rewards[&id];
            let exact = alloc.exact_atomic.as_ref().and_then(|m| m.get(&id));
            let _ = writeln!(
                table,
                "  player {id}  stake {}  reward {}",
                fmt_sig(game.stake(id)?),
                reward_cell(value, exact)
            );
            csv.push(vec![
                "reward".into(),
                idx.to_string(),
                id.to_string(),
                fmt_sig(game.stake(id)?),
                fmt_sig(value),
            ]);
        }
        if pool.oceanic_share > 0.0 {
            let rate = alloc.oceanic_rate_per_pool[&idx];
            let _ = writeln!(table, "  ocean rate per unit {}", fmt_sig(rate));
            csv.push(vec![
                "ocean_rate".into(),
                idx.to_string(),
                String::new(),
                fmt_sig(pool.oceanic_share),
                fmt_sig(rate),
            ]);
        }
    }
    if !alloc.mc_pools.is_empty() {
        let pools: Vec<String> = alloc.mc_pools.keys().map(|k| k.to_string()).collect();
        let _ = writeln!(
            table,
            "note: Monte Carlo estimates in pools [{}] (samples {}, seed {})",
            pools.join(" "),
            ctx.check.mc.samples,
            ctx.check.mc.seed
        );
    }
    ctx.emit(table, csv);
    Ok(ExitCode::SUCCESS)
}

fn deviation_rows(deviations: &[Deviation]) -> Vec<Vec<String>> {
    deviations
        .iter()
        .map(|d| {
            let player = match d.player {
                Deviator::Atomic(id) => id.to_string(),
                Deviator::OceanUnit { pool } => format!("ocean@{pool}"),
            };
            let to = match d.to {
                DeviationTarget::Pool(p) => p.to_string(),
                DeviationTarget::NewSolo => "solo".to_string(),
            };
            vec![
                "deviation".to_string(),
                player,
                d.from_pool.to_string(),
                to,
                fmt_sig(d.before),
                fmt_sig(d.after),
            ]
        })
        .collect()
}

fn cmd_equilibrium_check(ctx: &Ctx) -> Result<ExitCode, CliError> {
    let game = ctx.game()?;
    let partition = ctx.partition()?;
    let scheme = ctx.scheme()?;
    let report = check_nash(partition, game, scheme, &ctx.check)?;
    let mut table = format!(
        "{} under {scheme}{}\n",
        if report.is_equilibrium() {
            "Nash equilibrium"
        } else {
            "not a Nash equilibrium"
        },
        if report.statistical {
            " (statistical: Monte Carlo payoffs, 3-sigma band)"
        } else {
            ""
        }
    );
    let mut csv = ctx.csv_header(&["record", "player", "from", "to", "before", "after"]);
    csv.push(vec![
        "verdict".into(),
        if report.is_equilibrium() {
            "equilibrium".into()
        } else {
            "not-equilibrium".into()
        },
        String::new(),
        String::new(),
        String::new(),
        String::new(),
    ]);
    for d in deviation_rows(report.deviations()) {
        let _ = writeln!(
            table,
            "  player {} moves {} -> {}: {} -> {}",
            d[1], d[2], d[3], d[4], d[5]
        );
        csv.push(d);
    }
    ctx.emit(table, csv);
    Ok(ExitCode::SUCCESS)
}

fn conditions_lines(report: &ConditionReport, table: &mut String) {
    let _ = writeln!(table, "conditions ({}):", report.label);
    for c in &report.checks {
        let _ = writeln!(
            table,
            "  [{}] {}: {} vs {}",
            if c.pass { "ok" } else { "fail" },
            c.name,
            fmt_sig(c.lhs),
            fmt_sig(c.rhs)
        );
    }
}

fn cmd_equilibrium_construct(ctx: &Ctx, l: Option<f64>, slack: f64) -> Result<ExitCode, CliError> {
    let game = ctx.game()?;
    let scheme = ctx.scheme()?;
    let mut table = String::new();
    let partition: Partition = match scheme {
        Scheme::Shapley if game.oceanic_mass() > 0.0 => {
            let c = construct_oceanic_equilibrium(game, l, slack)?;
            let _ = writeln!(
                table,
                "oceanic construction: l = {}, ocean pools = {}",
                fmt_sig(c.achieved_l),
                c.ocean_pools
            );
            for (&id, &k) in &c.params.per_player_k {
                let _ = writeln!(table, "  player {id}: k = {}", fmt_sig(k));
            }
            c.partition
        }
        Scheme::Shapley => {
            let c = construct_atomic_kl_equilibrium(game)?;
            let _ = writeln!(table, "atomic construction: k = {}, l = {}", c.kl.k, c.kl.l);
            conditions_lines(&c.conditions, &mut table);
            c.partition
        }
        Scheme::Proportional => {
            let c = construct_leximin_optimal(game, ctx.caps.enumeration)?;
            let _ = writeln!(table, "leximin-optimal partition: OPT = {}", c.opt);
            if c.no_winning_pool {
                let _ = writeln!(table, "warning: total stake below threshold, no winning pool");
            }
            c.partition
        }
        Scheme::PropSqrt => {
            let c = construct_sqrt_kl_equilibrium(game)?;
            let _ = writeln!(
                table,
                "sqrt construction: k = {}, l = {}{}",
                c.kl.k,
                c.kl.l,
                if c.fell_back { " (fallback l = h+2)" } else { "" }
            );
            conditions_lines(&c.conditions, &mut table);
            c.partition
        }
        Scheme::PropSquares => {
            return Err(CliError::premise(
                "no constructive equilibrium family for prop_squares (unbounded Price of Stability)",
            ))
        }
    };
    let mut csv = ctx.csv_header(&["record", "pool", "players", "ocean", "stake"]);
    for (idx, pool) in partition.pools.iter().enumerate() {
        table.push_str(&describe_pool(game, &partition, idx));
        table.push('\n');
        let members: Vec<String> = pool.atomic_members.iter().map(|m| m.to_string()).collect();
        csv.push(vec![
            "pool".into(),
            idx.to_string(),
            members.join(" "),
            fmt_sig(pool.oceanic_share),
            fmt_sig(pool_stake(pool, game)?),
        ]);
    }
    let nash = check_nash(&partition, game, scheme, &ctx.check)?;
    let _ = writeln!(
        table,
        "check_nash: {}",
        if nash.is_equilibrium() {
            "equilibrium"
        } else {
            "NOT an equilibrium"
        }
    );
    ctx.emit(table, csv);
    Ok(ExitCode::SUCCESS)
}

fn cmd_opt(ctx: &Ctx) -> Result<ExitCode, CliError> {
    let game = ctx.game()?;
    let result = if game.is_atomic() {
        opt_atomic(game, ctx.caps.solver)
    } else {
        opt_oceanic(game, ctx.caps.solver)?
    };
    let mut table = format!(
        "OPT = {}{}\n",
        result.value,
        if result.exact {
            ""
        } else {
            " (trivial upper bound only: instance above the solver cap)"
        }
    );
    let mut csv = ctx.csv_header(&["record", "value", "exact", "pool", "players", "ocean"]);
    csv.push(vec![
        "opt".into(),
        result.value.to_string(),
        result.exact.to_string(),
        String::new(),
        String::new(),
        String::new(),
    ]);
    if let Some(witness) = &result.witness {
        for (idx, pool) in witness.pools.iter().enumerate() {
            table.push_str(&describe_pool(game, witness, idx));
            table.push('\n');
            let members: Vec<String> = pool.atomic_members.iter().map(|m| m.to_string()).collect();
            csv.push(vec![
                "witness".into(),
                String::new(),
                String::new(),
                idx.to_string(),
                members.join(" "),
                fmt_sig(pool.oceanic_share),
            ]);
        }
    }
    ctx.emit(table, csv);
    Ok(ExitCode::SUCCESS)
}

fn cmd_pos(ctx: &Ctx, mode: PosModeArg) -> Result<ExitCode, CliError> {
    let game = ctx.game()?;
    let scheme = ctx.scheme()?;
    let method = match mode {
        PosModeArg::Exhaustive => PosMethod::Exhaustive,
        PosModeArg::Structured => PosMethod::ExhaustiveStructured,
        PosModeArg::Constructive => PosMethod::ConstructiveUpperBound,
    };
    let report = price_of_stability(game, scheme, method, ctx.caps, &ctx.check)?;
    let mut table = String::new();
    match report.pos {
        Some(pos) => {
            let (o, w) = report.ratio.unwrap();
            let _ = writeln!(
                table,
                "PoS{} = {} ({}/{}) under {scheme} [OPT = {}, best equilibrium W = {}]",
                if report.upper_bound_only { " upper bound" } else { "" },
                fmt_sig(pos),
                o,
                w,
                report.opt_value,
                report.best_equilibrium_w
            );
        }
        None => {
            let _ = writeln!(
                table,
                "PoS undefined: {}",
                report.note.as_deref().unwrap_or("no equilibrium")
            );
        }
    }
    if let Some(note) = &report.note {
        if report.pos.is_some() {
            let _ = writeln!(table, "note: {note}");
        }
    }
    let mut csv = ctx.csv_header(&[
        "record", "scheme", "opt", "best_w", "pos", "method", "upper_bound_only",
    ]);
    csv.push(vec![
        "pos".into(),
        scheme.to_string(),
        report.opt_value.to_string(),
        report.best_equilibrium_w.to_string(),
        report.pos.map(fmt_sig).unwrap_or_else(|| "undefined".into()),
        format!("{:?}", report.method),
        report.upper_bound_only.to_string(),
    ]);
    let witness_block = |label: &str, witness: &Partition, table: &mut String, csv: &mut Vec<Vec<String>>| {
        for (idx, pool) in witness.pools.iter().enumerate() {
            table.push_str(label);
            table.push(' ');
            table.push_str(&describe_pool(game, witness, idx));
            table.push('\n');
            let members: Vec<String> = pool.atomic_members.iter().map(|m| m.to_string()).collect();
            csv.push(vec![
                format!("witness_{label}"),
                idx.to_string(),
                members.join(" "),
                fmt_sig(pool.oceanic_share),
                String::new(),
                String::new(),
                String::new(),
            ]);
        }
    };
    if let Some(witness) = &report.witness_equilibrium {
        witness_block("equilibrium", witness, &mut table, &mut csv);
    }
    if let Some(witness) = &report.witness_opt {
        witness_block("opt", witness, &mut table, &mut csv);
    }
    ctx.emit(table, csv);
    Ok(ExitCode::SUCCESS)
}

fn sybil_cfg(ctx: &Ctx) -> SybilConfig {
    SybilConfig {
        grid_steps: 200,
        improve_tol: 1e-6,
        mc: ctx.check.mc,
    }
}

fn audit_rows(audit: &SybilAudit) -> Vec<String> {
    vec![
        "audit".into(),
        audit.player.to_string(),
        fmt_sig(audit.baseline),
        fmt_sig(audit.best_payoff),
        match audit.verdict {
            SybilVerdict::SybilProofAtProfile => "sybil-proof-at-profile".into(),
            SybilVerdict::Vulnerable => "vulnerable".into(),
            SybilVerdict::Inconclusive => "inconclusive".into(),
        },
        format!("{:?}", audit.method),
    ]
}

fn audit_table(audit: &SybilAudit, table: &mut String) {
    let row = audit_rows(audit);
    let _ = writeln!(
        table,
        "player {}: baseline {} best {} -> {} [{}]",
        row[1], row[2], row[3], row[4], row[5]
    );
    if audit.verdict == SybilVerdict::Vulnerable {
        let parts: Vec<String> = audit
            .best_strategy
            .allocations
            .iter()
            .map(|(pool, amount)| format!("pool {pool} <- {}", fmt_sig(*amount)))
            .collect();
        let _ = writeln!(table, "  witness split: {}", parts.join(", "));
    }
}

fn cmd_sybil_audit(ctx: &Ctx) -> Result<ExitCode, CliError> {
    let game = ctx.game()?;
    let partition = ctx.partition()?;
    let scheme = ctx.scheme()?;
    let audits = audit_sybil_proofness(game, partition, scheme, &sybil_cfg(ctx))?;
    let mut table = format!("Sybil audit under {scheme}\n");
    let mut csv = ctx.csv_header(&["record", "player", "baseline", "best", "verdict", "method"]);
    for audit in &audits {
        audit_table(audit, &mut table);
        csv.push(audit_rows(audit));
        for (pool, amount) in &audit.best_strategy.allocations {
            if audit.verdict == SybilVerdict::Vulnerable {
                csv.push(vec![
                    "witness".into(),
                    audit.player.to_string(),
                    pool.to_string(),
                    fmt_sig(*amount),
                    String::new(),
                    String::new(),
                ]);
            }
        }
    }
    ctx.emit(table, csv);
    Ok(ExitCode::SUCCESS)
}

fn cmd_sybil_best_response(ctx: &Ctx, player: usize) -> Result<ExitCode, CliError> {
    let game = ctx.game()?;
    let partition = ctx.partition()?;
    let scheme = ctx.scheme()?;
    let audit = sybil_best_response(game, partition, player, scheme, &sybil_cfg(ctx))?;
    let mut table = format!("Sybil best response under {scheme}\n");
    audit_table(&audit, &mut table);
    let parts: Vec<String> = audit
        .best_strategy
        .allocations
        .iter()
        .map(|(pool, amount)| format!("pool {pool} <- {}", fmt_sig(*amount)))
        .collect();
    let _ = writeln!(table, "  best split: {}", parts.join(", "));
    let mut csv = ctx.csv_header(&["record", "player", "baseline", "best", "verdict", "method"]);
    csv.push(audit_rows(&audit));
    for (pool, amount) in &audit.best_strategy.allocations {
        csv.push(vec![
            "allocation".into(),
            audit.player.to_string(),
            pool.to_string(),
            fmt_sig(*amount),
            String::new(),
            String::new(),
        ]);
    }
    ctx.emit(table, csv);
    Ok(ExitCode::SUCCESS)
}

fn cmd_sybil_waterfill(
    ctx: &Ctx,
    player: Option<usize>,
    pools: Option<Vec<f64>>,
    budget: Option<f64>,
) -> Result<ExitCode, CliError> {
    let (stakes, budget) = match (pools, player) {
        (Some(stakes), _) => {
            let budget = budget
                .ok_or_else(|| CliError::input("--budget is required with explicit --pools"))?;
            (stakes, budget)
        }
        (None, Some(player)) => {
            let game = ctx.game()?;
            let partition = ctx.partition()?;
            let origin = partition
                .pool_of(player)
                .ok_or_else(|| CliError::input(format!("player {player} is not in the partition")))?;
            let a = game.stake(player)?;
            let mut stakes = Vec::new();
            for (idx, pool) in partition.pools.iter().enumerate() {
                let mut s = pool_stake(pool, game)?;
                if idx == origin {
                    s -= a;
                }
                stakes.push(s);
            }
            (stakes, budget.unwrap_or(a))
        }
        (None, None) => {
            return Err(CliError::input(
                "waterfill needs either --pools <stakes> --budget <b> or --player <id>",
            ))
        }
    };
    if stakes.iter().any(|&s| s <= 0.0) {
        return Err(CliError::premise("pool stakes must be positive"));
    }
    if budget < 0.0 {
        return Err(CliError::input("budget must be nonnegative"));
    }
    let r = waterfill_proportional(&stakes, budget);
    let mut table = format!(
        "water filling: budget {} over {} pools, payoff {}\n",
        fmt_sig(budget),
        stakes.len(),
        fmt_sig(r.payoff)
    );
    let mut csv = ctx.csv_header(&["record", "pool", "stake", "allocation", "level"]);
    for (idx, ((&m, &s), &lv)) in stakes
        .iter()
        .zip(&r.allocation)
        .zip(&r.levels)
        .enumerate()
    {
        let _ = writeln!(
            table,
            "  pool {idx}: stake {} + {} -> level {}",
            fmt_sig(m),
            fmt_sig(s),
            fmt_sig(lv)
        );
        csv.push(vec![
            "fill".into(),
            idx.to_string(),
            fmt_sig(m),
            fmt_sig(s),
            fmt_sig(lv),
        ]);
    }
    csv.push(vec![
        "payoff".into(),
        String::new(),
        String::new(),
        fmt_sig(r.payoff),
        String::new(),
    ]);
    ctx.emit(table, csv);
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(ctx: &Ctx) -> Result<ExitCode, CliError> {
    let cfg = VerifyConfig {
        seed: ctx.meta.seed,
        samples: ctx.meta.samples,
        tol: ctx.meta.tol,
    };
    let outcomes = run_all(&cfg);
    let mut table = String::new();
    let mut csv = ctx.csv_header(&["record", "id", "name", "status", "details"]);
    let mut failures = 0;
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        if !o.passed {
            failures += 1;
        }
        let _ = writeln!(table, "[{status}] criterion {:02}: {} — {}", o.id, o.name, o.details);
        csv.push(vec![
            "criterion".into(),
            o.id.to_string(),
            o.name.to_string(),
            status.to_string(),
            o.details.clone(),
        ]);
    }
    let _ = writeln!(
        table,
        "{} of {} criteria passed",
        outcomes.len() - failures,
        outcomes.len()
    );
    ctx.emit(table, csv);
    if failures > 0 {
        return Ok(ExitCode::from(4));
    }
    Ok(ExitCode::SUCCESS)
}
