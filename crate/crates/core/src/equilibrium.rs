//! Nash-equilibrium verification and construction.
//!
//! `check_nash` enumerates unilateral deviations of atomic players (move to
//! any other pool, open a solo pool) and, in oceanic games, compares the
//! reward per unit of oceanic stake across pools (an infinitesimal deviator
//! leaves the target pool's composition unchanged). Constructors produce the
//! (k, l)-style equilibria for the Shapley scheme in both models, the
//! square-root-scheme variant, and the leximin-optimal partition for
//! proportional sharing.

use std::collections::BTreeMap;

use num::{BigRational, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::model::{
    pool_stake, validate_partition, GameSpec, ModelError, Partition, PlayerId, Pool,
    Scheme,
};
use crate::rewards::{
    allocate_rewards, entrant_reward, entrant_reward_exact, rational_to_f64,
    shapley_atomic_twolarge_equal, twolarge_oceanic, McConfig, RewardError,
};
use crate::welfare::{opt_atomic, opt_oceanic};

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("partition has losing pools at indices {0:?}; equilibrium candidates must consist of winning pools")]
    LosingPools(Vec<usize>),
    #[error("premise not met: {0}")]
    PremiseViolated(String),
    #[error("stake {stake} of player {player} lies outside ({lo}, {hi}) required by the construction")]
    StakeOutOfRange {
        player: PlayerId,
        stake: f64,
        lo: f64,
        hi: f64,
    },
    #[error("insufficient oceanic mass: the construction needs at least {required}, game has {available}")]
    InsufficientOcean { required: f64, available: f64 },
    #[error("population too small: the construction needs at least {required} small players, game has {available}")]
    PopulationTooSmall { required: usize, available: usize },
    #[error("unsupported stake pattern: {0}")]
    UnsupportedStakePattern(String),
    #[error("instance size {n} exceeds the cap {cap} for this method")]
    CapExceeded { n: usize, cap: usize },
    #[error("argument out of domain: {0}")]
    Domain(String),
}

/// Deviating entity: an atomic player or an infinitesimal oceanic unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Deviator {
    Atomic(PlayerId),
    OceanUnit { pool: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DeviationTarget {
    Pool(usize),
    NewSolo,
}

/// One strictly improving unilateral deviation.
#[derive(Debug, Clone, Serialize)]
pub struct Deviation {
    pub player: Deviator,
    pub from_pool: usize,
    pub to: DeviationTarget,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, Serialize)]
pub enum Verdict {
    Equilibrium,
    NotEquilibrium(Vec<Deviation>),
}

#[derive(Debug, Clone, Serialize)]
pub struct NashReport {
    pub verdict: Verdict,
    /// True when some payoff was estimated by Monte Carlo (widened tolerance).
    pub statistical: bool,
}

impl NashReport {
    pub fn is_equilibrium(&self) -> bool {
        matches!(self.verdict, Verdict::Equilibrium)
    }

    pub fn deviations(&self) -> &[Deviation] {
        match &self.verdict {
            Verdict::Equilibrium => &[],
            Verdict::NotEquilibrium(d) => d,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CheckConfig {
    pub tol: f64,
    pub mc: McConfig,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            tol: 1e-9,
            mc: McConfig::default(),
        }
    }
}

fn profile_of(
    pool: &Pool,
    game: &GameSpec,
    exclude: Option<PlayerId>,
) -> Result<crate::rewards::PoolProfile, ModelError> {
    let mut co_stakes = Vec::with_capacity(pool.atomic_members.len());
    for &id in &pool.atomic_members {
        if Some(id) == exclude {
            continue;
        }
        co_stakes.push(game.stake(id)?);
    }
    Ok(crate::rewards::PoolProfile {
        co_stakes,
        ocean: pool.oceanic_share,
    })
}

/// Checks whether a partition of winning pools is a Nash equilibrium under
/// the given scheme. Uses exact rational comparisons on integer atomic games
/// where the scheme admits them.
pub fn check_nash(
    partition: &Partition,
    game: &GameSpec,
    scheme: Scheme,
    cfg: &CheckConfig,
) -> Result<NashReport, EquilibriumError> {
    let report = validate_partition(partition, game);
    if !report.is_valid() {
        let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(EquilibriumError::InvalidPartition(msgs.join("; ")));
    }
    if !report.losing_pools.is_empty() {
        return Err(EquilibriumError::LosingPools(report.losing_pools));
    }
    let exact = game.exact_atomic() && game.is_atomic() && scheme.rational_capable();
    if exact {
        check_nash_exact(partition, game, scheme)
    } else {
        check_nash_float(partition, game, scheme, cfg)
    }
}

fn check_nash_exact(
    partition: &Partition,
    game: &GameSpec,
    scheme: Scheme,
) -> Result<NashReport, EquilibriumError> {
    let ints = game.integer_stakes().expect("exact path requires integers");
    let h = game.integer_threshold().expect("exact path requires integers");
    let mut deviations = Vec::new();
    for (s_idx, source) in partition.pools.iter().enumerate() {
        for &player in &source.atomic_members {
            let a = ints[player - 1];
            let own_co: Vec<i64> = source
                .atomic_members
                .iter()
                .filter(|&&id| id != player)
                .map(|&id| ints[id - 1])
                .collect();
            let before = entrant_reward_exact(&own_co, a, h, scheme)
                .expect("scheme is rational-capable");
            for (t_idx, target) in partition.pools.iter().enumerate() {
                if t_idx == s_idx {
                    continue;
                }
                let co: Vec<i64> = target
                    .atomic_members
                    .iter()
                    .map(|&id| ints[id - 1])
                    .collect();
                let after = entrant_reward_exact(&co, a, h, scheme)
                    .expect("scheme is rational-capable");
                if after > before {
                    deviations.push(Deviation {
                        player: Deviator::Atomic(player),
                        from_pool: s_idx,
                        to: DeviationTarget::Pool(t_idx),
                        before: rational_to_f64(&before),
                        after: rational_to_f64(&after),
                    });
                }
            }
            // Opening a solo pool: reward 1 iff a >= h, excluded by the model.
            let solo = if a >= h {
                BigRational::from_integer(1.into())
            } else {
                BigRational::zero()
            };
            if solo > before {
                deviations.push(Deviation {
                    player: Deviator::Atomic(player),
                    from_pool: s_idx,
                    to: DeviationTarget::NewSolo,
                    before: rational_to_f64(&before),
                    after: rational_to_f64(&solo),
                });
            }
        }
    }
    Ok(NashReport {
        verdict: if deviations.is_empty() {
            Verdict::Equilibrium
        } else {
            Verdict::NotEquilibrium(deviations)
        },
        statistical: false,
    })
}

fn check_nash_float(
    partition: &Partition,
    game: &GameSpec,
    scheme: Scheme,
    cfg: &CheckConfig,
) -> Result<NashReport, EquilibriumError> {
    let alloc = allocate_rewards(partition, game, scheme, &cfg.mc)?;
    let mut statistical = alloc.statistical();
    let mut deviations = Vec::new();
    // Atomic deviations.
    for (s_idx, source) in partition.pools.iter().enumerate() {
        for &player in &source.atomic_members {
            let a = game.stake(player)?;
            let before = alloc.atomic_rewards[&player];
            // Tolerance for the comparison; widened to 3 standard errors when
            // the baseline itself came from sampling.
            let base_tol = match alloc.mc_pools.get(&s_idx).and_then(|m| m.get(&player)) {
                Some(est) => cfg.tol + 3.0 * est.stderr,
                None => cfg.tol,
            };
            for (t_idx, target) in partition.pools.iter().enumerate() {
                if t_idx == s_idx {
                    continue;
                }
                let profile = profile_of(target, game, None)?;
                let (after, used_mc) = entrant_reward(&profile, a, game, scheme, &cfg.mc)?;
                statistical |= used_mc;
                let tol = if used_mc {
                    // binomial stderr bound at the sample count
                    base_tol + 3.0 * (0.25 / cfg.mc.samples as f64).sqrt()
                } else {
                    base_tol
                };
                if after > before + tol {
                    deviations.push(Deviation {
                        player: Deviator::Atomic(player),
                        from_pool: s_idx,
                        to: DeviationTarget::Pool(t_idx),
                        before,
                        after,
                    });
                }
            }
            if a >= game.threshold() - game.tol() && 1.0 > before + cfg.tol {
                deviations.push(Deviation {
                    player: Deviator::Atomic(player),
                    from_pool: s_idx,
                    to: DeviationTarget::NewSolo,
                    before,
                    after: 1.0,
                });
            }
        }
    }
    // Oceanic unit deviations: compare reward per unit of stake.
    if game.oceanic_mass() > 0.0 {
        let unit_rate = |idx: usize, pool: &Pool| -> f64 {
            if pool.oceanic_share > 0.0 {
                alloc.oceanic_rate_per_pool[&idx]
            } else {
                match scheme {
                    // A measure-zero unit entering keeps the composition; for
                    // proportional the per-unit reward is 1/m, for Shapley the
                    // pivot probability density vanishes at atomic-only pools.
                    Scheme::Proportional => {
                        1.0 / pool_stake(pool, game).unwrap_or(f64::INFINITY)
                    }
                    _ => 0.0,
                }
            }
        };
        for (s_idx, source) in partition.pools.iter().enumerate() {
            if source.oceanic_share <= 0.0 {
                continue;
            }
            let before = alloc.oceanic_rate_per_pool[&s_idx];
            for (t_idx, target) in partition.pools.iter().enumerate() {
                if t_idx == s_idx {
                    continue;
                }
                let after = unit_rate(t_idx, target);
                if after > before + cfg.tol {
                    deviations.push(Deviation {
                        player: Deviator::OceanUnit { pool: s_idx },
                        from_pool: s_idx,
                        to: DeviationTarget::Pool(t_idx),
                        before,
                        after,
                    });
                }
            }
        }
    }
    Ok(NashReport {
        verdict: if deviations.is_empty() {
            Verdict::Equilibrium
        } else {
            Verdict::NotEquilibrium(deviations)
        },
        statistical,
    })
}

// ---------------------------------------------------------------------------
// Condition reports
// ---------------------------------------------------------------------------

/// One evaluated inequality or equality.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    /// "iff" for the oceanic conditions (necessary and sufficient);
    /// "sufficient-pass" where the paper's conditions are only sufficient.
    pub label: &'static str,
    pub checks: Vec<ConditionCheck>,
}

impl ConditionReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

// ---------------------------------------------------------------------------
// Oceanic (k, l) equilibria
// ---------------------------------------------------------------------------

/// Parameters of a (k, l)-partition: per-large-player oceanic masses plus the
/// common size of large-player-free pools.
#[derive(Debug, Clone, Serialize)]
pub struct KlParams {
    pub per_player_k: BTreeMap<PlayerId, f64>,
    pub l: f64,
}

impl KlParams {
    pub fn uniform(k: f64, l: f64, players: impl IntoIterator<Item = PlayerId>) -> Self {
        KlParams {
            per_player_k: players.into_iter().map(|id| (id, k)).collect(),
            l,
        }
    }
}

/// Evaluates the oceanic equilibrium conditions for a (k, l)-partition where
/// every large player i sits with oceanic mass k_i and the remaining ocean
/// forms pools of mass l:
///
/// 1. (h - a_i)/k_i^2 = 1/l        (ocean units indifferent across pools)
/// 2. (k_i + a_i - h)/k_i >= a_i/l (no move to an ocean-only pool)
/// 3. (k_i + a_i - h)/k_i >= two-large reward in pool j, for all pairs
///
/// Quantities are normalized to h = 1 and compared with absolute tolerance.
pub fn oceanic_kl_conditions(
    params: &KlParams,
    game: &GameSpec,
    tol: f64,
) -> Result<ConditionReport, EquilibriumError> {
    let h = game.threshold();
    let ln = params.l / h;
    if ln < 1.0 - tol {
        return Err(EquilibriumError::PremiseViolated(format!(
            "l = {} must be at least h = {h}",
            params.l
        )));
    }
    let mut norm: Vec<(PlayerId, f64, f64)> = Vec::new(); // (id, a/h, k/h)
    for (&id, &k) in &params.per_player_k {
        let a = game.stake(id)? / h;
        let kn = k / h;
        if kn > 1.0 + tol {
            return Err(EquilibriumError::PremiseViolated(format!(
                "k_{id} = {k} exceeds h = {h}"
            )));
        }
        if a + kn < 1.0 - tol {
            return Err(EquilibriumError::PremiseViolated(format!(
                "pool of player {id} is losing: a + k = {} < h",
                (a + kn) * h
            )));
        }
        norm.push((id, a, kn));
    }
    let mut checks = Vec::new();
    for &(id, a, k) in &norm {
        let lhs = (1.0 - a) / (k * k);
        let rhs = 1.0 / ln;
        checks.push(ConditionCheck {
            name: format!("(h-a_{id})/k_{id}^2 = 1/l"),
            lhs,
            rhs,
            pass: (lhs - rhs).abs() <= tol,
        });
        let own = (k + a - 1.0) / k;
        let to_small = a / ln;
        checks.push(ConditionCheck {
            name: format!("(k_{id}+a_{id}-h)/k_{id} >= a_{id}/l"),
            lhs: own,
            rhs: to_small,
            pass: own >= to_small - tol,
        });
    }
    for &(i, ai, ki) in &norm {
        for &(j, aj, kj) in &norm {
            if i == j {
                continue;
            }
            let own = (ki + ai - 1.0) / ki;
            let moved = twolarge_oceanic(ai, aj, kj, 1.0);
            checks.push(ConditionCheck {
                name: format!("player {i} does not join pool of {j}"),
                lhs: own,
                rhs: moved,
                pass: own >= moved - tol,
            });
        }
    }
    Ok(ConditionReport {
        label: "iff",
        checks,
    })
}

/// Result of the oceanic construction.
#[derive(Debug, Clone)]
pub struct OceanicConstruction {
    pub partition: Partition,
    pub params: KlParams,
    /// l actually achieved (within [l, l + slack] when divisibility required it).
    pub achieved_l: f64,
    /// Number of pure-ocean pools.
    pub ocean_pools: usize,
}

/// Builds the oceanic Shapley equilibrium: each large player i receives a
/// mass k_i = sqrt(l (h - a_i)) of small players, and the remaining ocean
/// forms pools of mass exactly l (default 4h/3). Requires every stake in
/// [h/4, h) and enough ocean.
pub fn construct_oceanic_equilibrium(
    game: &GameSpec,
    l_target: Option<f64>,
    slack: f64,
) -> Result<OceanicConstruction, EquilibriumError> {
    let h = game.threshold();
    let tol = game.tol();
    let l0 = l_target.unwrap_or(4.0 * h / 3.0);
    if l0 < h - tol {
        return Err(EquilibriumError::PremiseViolated(format!(
            "target l = {l0} is below the threshold {h}"
        )));
    }
    for id in game.player_ids() {
        let a = game.stake(id)?;
        if a < h / 4.0 - tol {
            return Err(EquilibriumError::StakeOutOfRange {
                player: id,
                stake: a,
                lo: h / 4.0,
                hi: h,
            });
        }
    }
    let k_of = |l: f64, a: f64| (l * (h - a)).sqrt();
    let residue = |l: f64| -> f64 {
        let sum: f64 = game.stakes().iter().map(|&a| k_of(l, a)).sum();
        game.oceanic_mass() - sum
    };
    let r0 = residue(l0);
    if r0 < -tol {
        return Err(EquilibriumError::InsufficientOcean {
            required: game.oceanic_mass() - r0,
            available: game.oceanic_mass(),
        });
    }
    // Choose l in [l0, l0 + slack] so the residue splits into pools of mass
    // exactly l. residue(l)/l is continuous and decreasing in l.
    let mut l = l0;
    let ratio0 = r0 / l0;
    let t = if (ratio0 - ratio0.round()).abs() <= 1e-9 && ratio0.round() >= 0.0 {
        ratio0.round() as usize
    } else {
        let target = ratio0.floor();
        if slack <= 0.0 {
            return Err(EquilibriumError::PremiseViolated(format!(
                "residual ocean {} does not divide into pools of {} (ratio {}); \
                 re-run with positive slack",
                r0, l0, ratio0
            )));
        }
        let g = |l: f64| residue(l) / l - target;
        let mut lo = l0;
        let mut hi = l0 + slack;
        if g(hi) > 0.0 {
            return Err(EquilibriumError::PremiseViolated(format!(
                "slack {slack} too small to reach an integral pool count (ratio at l+slack = {})",
                g(hi) + target
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        l = 0.5 * (lo + hi);
        target as usize
    };
    // With l above 4h/3 the per-player masses grow; re-check k_i <= h.
    let mut pools = Vec::new();
    let mut params = BTreeMap::new();
    for id in game.player_ids() {
        let a = game.stake(id)?;
        let k = k_of(l, a);
        if k > h + tol {
            return Err(EquilibriumError::StakeOutOfRange {
                player: id,
                stake: a,
                lo: h - h * h / l,
                hi: h,
            });
        }
        params.insert(id, k);
        pools.push(Pool::with_ocean([id], k));
    }
    for _ in 0..t {
        pools.push(Pool::ocean(l));
    }
    // Absorb float dust so oceanic shares sum to L exactly.
    let drift = game.oceanic_mass() - pools.iter().map(|p| p.oceanic_share).sum::<f64>();
    if let Some(last) = pools.last_mut() {
        last.oceanic_share += drift;
    }
    Ok(OceanicConstruction {
        partition: Partition::new(pools),
        params: KlParams {
            per_player_k: params,
            l,
        },
        achieved_l: l,
        ocean_pools: t,
    })
}

// ---------------------------------------------------------------------------
// Scalar functions from the oceanic analysis
// ---------------------------------------------------------------------------

/// The pairwise no-deviation surplus of the oceanic construction at l = 4/3
/// (h normalized to 1), as a function of the two pools' oceanic masses:
///
/// f(ki, kj) = 1 - (3/4) ki - (9/32) kj^2
///             + (3ki^2 + 3kj^2 - 4)^2 / (32 kj^2)   when 3ki^2 + 3kj^2 >= 4
///             - (3ki^2 - 4kj)^2 / (32 kj^2)          when 3ki^2 <= 4kj
///
/// Nonnegative on (0, 1]^2, with minimum value 0 at (2/3, 1).
pub fn f_function(ki: f64, kj: f64) -> Result<f64, EquilibriumError> {
    if !(ki > 0.0 && ki <= 1.0 && kj > 0.0 && kj <= 1.0) {
        return Err(EquilibriumError::Domain(format!(
            "f is defined on (0,1]^2, got ({ki}, {kj})"
        )));
    }
    let mut v = 1.0 - 0.75 * ki - (9.0 / 32.0) * kj * kj;
    let s = 3.0 * ki * ki + 3.0 * kj * kj - 4.0;
    if s >= 0.0 {
        v += s * s / (32.0 * kj * kj);
    }
    let u = 3.0 * ki * ki - 4.0 * kj;
    if u <= 0.0 {
        v -= u * u / (32.0 * kj * kj);
    }
    Ok(v)
}

/// Excess of the large player's equilibrium Shapley reward over her
/// proportional share, at h = 1, l = 4/3, a = 1 - 3k^2/4:
/// k (3k - 2)^2 / (4 (2 - k)(3k + 2)).
pub fn shapley_premium(ki: f64) -> Result<f64, EquilibriumError> {
    if !(ki > 0.0 && ki <= 1.0) {
        return Err(EquilibriumError::Domain(format!(
            "shapley_premium is defined on (0,1], got {ki}"
        )));
    }
    let num = ki * (3.0 * ki - 2.0) * (3.0 * ki - 2.0);
    let den = 4.0 * (2.0 - ki) * (3.0 * ki + 2.0);
    Ok(num / den)
}

/// Smallest real k for which the atomic Type-A lower bound dominates:
/// k* = (sqrt(-3a^2 + h^2 + 2ah - 2h + 2a + 1) - a + h - 1)/2.
pub fn kstar(a: f64, h: f64) -> Result<f64, EquilibriumError> {
    if !(a >= 2.0 && a <= h - 1.0) {
        return Err(EquilibriumError::Domain(format!(
            "kstar requires 2 <= a <= h-1, got a={a}, h={h}"
        )));
    }
    let disc = -3.0 * a * a + h * h + 2.0 * a * h - 2.0 * h + 2.0 * a + 1.0;
    debug_assert!(disc >= 0.0, "discriminant is nonnegative on the domain");
    if disc < 0.0 {
        return Err(EquilibriumError::Domain(format!(
            "negative discriminant {disc} for a={a}, h={h}"
        )));
    }
    Ok(0.5 * (disc.sqrt() - a + h - 1.0))
}

// ---------------------------------------------------------------------------
// Atomic (k, l) equilibria (Shapley)
// ---------------------------------------------------------------------------

/// Integer (k, l) pair for the atomic constructions.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AtomicKl {
    pub k: u64,
    pub l: u64,
}

/// Sufficient equilibrium conditions for an atomic (k, l)-partition under the
/// Shapley scheme (necessary as well when pools of all three types are
/// present):
///
///   k <= h-2:  k(k+1)/(h-a) <= l <= (k+1)(k+2)/(h-a)
///   k  = h-1:  k(k+1)/(h-a) <= l <= h(h+1)/(h+1-a)
///   always:    l >= a(k+1)/(k-h+a+1)
///
/// With several large players the cross-pool deviation bound
/// phi_dev(two-large pool) <= phi_own is checked as well.
pub fn atomic_kl_conditions(
    k: u64,
    l: u64,
    a: i64,
    h: i64,
    big_players: usize,
) -> Result<ConditionReport, EquilibriumError> {
    let (kf, lf, af, hf) = (k as f64, l as f64, a as f64, h as f64);
    if kf >= hf {
        return Err(EquilibriumError::PremiseViolated(format!(
            "conditions cover k < h, got k={k}, h={h}"
        )));
    }
    if kf + af < hf {
        return Err(EquilibriumError::PremiseViolated(format!(
            "Type A pool is losing: k + a = {} < h = {h}",
            kf + af
        )));
    }
    if l < (h + 1) as u64 {
        return Err(EquilibriumError::PremiseViolated(format!(
            "l must be at least h+1 = {}, got {l}",
            h + 1
        )));
    }
    let mut checks = Vec::new();
    let lower1 = kf * (kf + 1.0) / (hf - af);
    checks.push(ConditionCheck {
        name: "k(k+1)/(h-a) <= l".into(),
        lhs: lower1,
        rhs: lf,
        pass: lower1 <= lf,
    });
    let upper1 = if k as i64 == h - 1 {
        hf * (hf + 1.0) / (hf + 1.0 - af)
    } else {
        (kf + 1.0) * (kf + 2.0) / (hf - af)
    };
    checks.push(ConditionCheck {
        name: "l <= upper bound".into(),
        lhs: lf,
        rhs: upper1,
        pass: lf <= upper1,
    });
    let lower2 = af * (kf + 1.0) / (kf - hf + af + 1.0);
    checks.push(ConditionCheck {
        name: "l >= a(k+1)/(k-h+a+1)".into(),
        lhs: lf,
        rhs: lower2,
        pass: lf >= lower2,
    });
    if big_players >= 2 {
        let own = (kf - hf + af + 1.0) / (kf + 1.0);
        let dev = shapley_atomic_twolarge_equal(k, af, hf)?;
        checks.push(ConditionCheck {
            name: "cross-pool: phi_dev <= phi_own".into(),
            lhs: dev,
            rhs: own,
            pass: dev <= own,
        });
    }
    Ok(ConditionReport {
        label: "sufficient-pass",
        checks,
    })
}

#[derive(Debug, Clone)]
pub struct AtomicConstruction {
    pub partition: Partition,
    pub kl: AtomicKl,
    pub conditions: ConditionReport,
    /// True when the single-integer interval forced l = ceil(l*) instead of
    /// ceil(l*) + 1.
    pub adjusted_down: bool,
}

fn split_two_valued(game: &GameSpec) -> Result<(Vec<PlayerId>, Vec<PlayerId>, i64), EquilibriumError> {
    let ints = game.integer_stakes().ok_or_else(|| {
        EquilibriumError::UnsupportedStakePattern("integer stakes required".into())
    })?;
    let mut smalls = Vec::new();
    let mut bigs = Vec::new();
    let mut a: Option<i64> = None;
    for id in game.player_ids() {
        match ints[id - 1] {
            1 => smalls.push(id),
            v if v >= 2 => {
                if *a.get_or_insert(v) != v {
                    return Err(EquilibriumError::UnsupportedStakePattern(format!(
                        "two-valued stakes {{1, a}} required; found large stakes {} and {v}",
                        a.unwrap()
                    )));
                }
                bigs.push(id);
            }
            v => {
                return Err(EquilibriumError::UnsupportedStakePattern(format!(
                    "stake {v} is not in {{1, a >= 2}}"
                )))
            }
        }
    }
    let a = a.ok_or_else(|| {
        EquilibriumError::UnsupportedStakePattern("no large player with stake a >= 2".into())
    })?;
    Ok((bigs, smalls, a))
}

/// Fills Type-C pools of l-1 small players and promotes the remainder one by
/// one into Type-B pools of l (preceded by one Type-A pool of k smalls per
/// large player).
pub(crate) fn build_kl_partition(
    bigs: &[PlayerId],
    smalls: &[PlayerId],
    k: u64,
    l: u64,
) -> Result<Partition, EquilibriumError> {
    let need = bigs.len() * k as usize;
    if smalls.len() < need {
        return Err(EquilibriumError::PopulationTooSmall {
            required: need,
            available: smalls.len(),
        });
    }
    let mut pools = Vec::new();
    let mut cursor = 0usize;
    for &b in bigs {
        let mut members = vec![b];
        members.extend_from_slice(&smalls[cursor..cursor + k as usize]);
        cursor += k as usize;
        pools.push(Pool::atomic(members));
    }
    let rest = &smalls[cursor..];
    let base = (l - 1) as usize;
    if !rest.is_empty() {
        let c_pools = rest.len() / base;
        let remainder = rest.len() % base;
        if c_pools == 0 || remainder > c_pools {
            return Err(EquilibriumError::PopulationTooSmall {
                required: need + base * remainder.max(1),
                available: smalls.len(),
            });
        }
        let mut idx = 0;
        for p in 0..c_pools {
            let take = if p < remainder { base + 1 } else { base };
            pools.push(Pool::atomic(rest[idx..idx + take].iter().copied()));
            idx += take;
        }
    }
    Ok(Partition::new(pools))
}

/// Constructs the atomic (k, l)-equilibrium for two-valued stakes {1, a}:
/// Case 1 (h <= a^2 - 2a + 2) uses k = ceil(k*) and l = ceil(l*) + 1
/// (falling back to ceil(l*) when only one integer fits the interval);
/// Case 2 uses k = h - 1 with l = h + a (h >= a^2) or l = h + a + 1.
pub fn construct_atomic_kl_equilibrium(
    game: &GameSpec,
) -> Result<AtomicConstruction, EquilibriumError> {
    if !game.is_atomic() {
        return Err(EquilibriumError::PremiseViolated(
            "atomic construction requires an ocean-free game".into(),
        ));
    }
    let h = game.integer_threshold().ok_or_else(|| {
        EquilibriumError::UnsupportedStakePattern("integer threshold required".into())
    })?;
    let (bigs, smalls, a) = split_two_valued(game)?;
    let required = (2 * h - 1).pow(2) as usize + bigs.len() * (h + 1) as usize;
    if smalls.len() < required {
        return Err(EquilibriumError::PopulationTooSmall {
            required,
            available: smalls.len(),
        });
    }
    let (af, hf) = (a as f64, h as f64);
    let case1 = hf <= af * af - 2.0 * af + 2.0;
    let mut adjusted_down = false;
    let (k, l) = if case1 {
        let k = kstar(af, hf)?.ceil() as u64;
        let l_star = (k as f64) * (k as f64 + 1.0) / (hf - af);
        let first = l_star.ceil() as u64 + 1;
        let second = l_star.ceil() as u64;
        let pick = [first, second]
            .into_iter()
            .find(|&cand| {
                cand >= (h + 1) as u64
                    && atomic_kl_conditions(k, cand, a, h, bigs.len())
                        .map(|r| r.pass())
                        .unwrap_or(false)
            })
            .ok_or_else(|| {
                EquilibriumError::PremiseViolated(format!(
                    "no feasible l near {l_star} for k = {k} (a={a}, h={h})"
                ))
            })?;
        adjusted_down = pick == second;
        (k, pick)
    } else {
        let k = (h - 1) as u64;
        let l = if h >= a * a {
            (h + a) as u64
        } else {
            (h + a + 1) as u64
        };
        (k, l)
    };
    let conditions = atomic_kl_conditions(k, l, a, h, bigs.len())?;
    if !conditions.pass() {
        return Err(EquilibriumError::PremiseViolated(format!(
            "selected (k, l) = ({k}, {l}) fails the equilibrium conditions for a={a}, h={h}"
        )));
    }
    let partition = build_kl_partition(&bigs, &smalls, k, l)?;
    Ok(AtomicConstruction {
        partition,
        kl: AtomicKl { k, l },
        conditions,
        adjusted_down,
    })
}

// ---------------------------------------------------------------------------
// Square-root scheme (k, l) equilibria
// ---------------------------------------------------------------------------

/// Equilibrium conditions for the proportional-to-square-roots scheme on a
/// (k, l)-partition: l - 1 >= k, k <= l - sqrt(a), k >= l - sqrt(a) - 1.
pub fn sqrt_kl_conditions(
    k: u64,
    l: u64,
    a: f64,
    h: f64,
    tol: f64,
) -> Result<ConditionReport, EquilibriumError> {
    let (kf, lf) = (k as f64, l as f64);
    if kf + a < h - tol {
        return Err(EquilibriumError::PremiseViolated(format!(
            "Type A pool is losing: k + a = {} < h = {h}",
            kf + a
        )));
    }
    let ra = a.sqrt();
    let checks = vec![
        ConditionCheck {
            name: "l - 1 >= k".into(),
            lhs: lf - 1.0,
            rhs: kf,
            pass: lf - 1.0 >= kf - tol,
        },
        ConditionCheck {
            name: "k <= l - sqrt(a)".into(),
            lhs: kf,
            rhs: lf - ra,
            pass: kf <= lf - ra + tol,
        },
        ConditionCheck {
            name: "k >= l - sqrt(a) - 1".into(),
            lhs: kf,
            rhs: lf - ra - 1.0,
            pass: kf >= lf - ra - 1.0 - tol,
        },
    ];
    Ok(ConditionReport {
        label: "sufficient-pass",
        checks,
    })
}

#[derive(Debug, Clone)]
pub struct SqrtConstruction {
    pub partition: Partition,
    pub kl: AtomicKl,
    pub conditions: ConditionReport,
    pub fell_back: bool,
}

/// Constructs the (ceil(h - sqrt(a) + 1), h+1) partition for the square-root
/// scheme, falling back to l = h+2 when rounding breaks the second condition.
pub fn construct_sqrt_kl_equilibrium(
    game: &GameSpec,
) -> Result<SqrtConstruction, EquilibriumError> {
    if !game.is_atomic() {
        return Err(EquilibriumError::PremiseViolated(
            "sqrt construction requires an ocean-free game".into(),
        ));
    }
    let h = game.integer_threshold().ok_or_else(|| {
        EquilibriumError::UnsupportedStakePattern("integer threshold required".into())
    })? as f64;
    let (bigs, smalls, a) = split_two_valued(game)?;
    let af = a as f64;
    let k = (h - af.sqrt() + 1.0).ceil() as u64;
    let required = (h * h) as usize + bigs.len() * k as usize;
    if smalls.len() < required {
        return Err(EquilibriumError::PopulationTooSmall {
            required,
            available: smalls.len(),
        });
    }
    let tol = game.tol();
    let mut l = h as u64 + 1;
    let mut fell_back = false;
    let mut conditions = sqrt_kl_conditions(k, l, af, h, tol)?;
    if !conditions.pass() {
        l = h as u64 + 2;
        fell_back = true;
        conditions = sqrt_kl_conditions(k, l, af, h, tol)?;
        if !conditions.pass() {
            return Err(EquilibriumError::PremiseViolated(format!(
                "neither l = h+1 nor l = h+2 satisfies the sqrt conditions for a={a}, h={h}"
            )));
        }
    }
    let partition = build_kl_partition(&bigs, &smalls, k, l)?;
    Ok(SqrtConstruction {
        partition,
        kl: AtomicKl { k, l },
        conditions,
        fell_back,
    })
}

// ---------------------------------------------------------------------------
// Leximin-optimal partition (proportional scheme)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LeximinConstruction {
    pub partition: Partition,
    pub opt: usize,
    /// Set when the total stake is below the threshold: no winning pool
    /// exists and the whole population sits in a single losing pool.
    pub no_winning_pool: bool,
}

/// Iterates set partitions of 0..n as restricted growth strings.
pub(crate) fn for_each_set_partition(n: usize, mut visit: impl FnMut(&[usize])) {
    if n == 0 {
        visit(&[]);
        return;
    }
    let mut rgs = vec![0usize; n];
    loop {
        visit(&rgs);
        // next restricted growth string
        let mut i = n - 1;
        loop {
            if i == 0 {
                return;
            }
            let max_prev = rgs[..i].iter().copied().max().unwrap();
            if rgs[i] <= max_prev {
                rgs[i] += 1;
                for v in rgs[i + 1..].iter_mut() {
                    *v = 0;
                }
                break;
            }
            i -= 1;
        }
    }
}

fn leximin_less(a: &[f64], b: &[f64]) -> bool {
    // true when a is leximin-worse than b
    for (x, y) in a.iter().zip(b.iter()) {
        if (x - y).abs() > 1e-12 {
            return x < y;
        }
    }
    false
}

/// Equalizing water fill of the ocean over base stakes: raises the lowest
/// pools to a common level until the budget is spent. Returns per-pool fills.
fn ocean_leximin_fill(base: &[f64], budget: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..base.len()).collect();
    order.sort_by(|&i, &j| base[i].partial_cmp(&base[j]).unwrap());
    let mut fills = vec![0.0; base.len()];
    let mut remaining = budget;
    let mut level = if base.is_empty() { 0.0 } else { base[order[0]] };
    let mut active: Vec<usize> = Vec::new();
    let mut next = 0usize;
    while remaining > 0.0 {
        while next < order.len() && base[order[next]] <= level + 1e-15 {
            active.push(order[next]);
            next += 1;
        }
        let ceiling = if next < order.len() {
            base[order[next]]
        } else {
            f64::INFINITY
        };
        let room = (ceiling - level) * active.len() as f64;
        if ceiling.is_infinite() || room >= remaining {
            let raise = remaining / active.len() as f64;
            for &i in &active {
                fills[i] = (level + raise - base[i]).max(0.0);
            }
            remaining = 0.0;
        } else {
            remaining -= room;
            level = ceiling;
            for &i in &active {
                fills[i] = (level - base[i]).max(0.0);
            }
        }
    }
    fills
}

/// Constructs an OPT-sized partition that is leximin over pool stakes; all
/// oceanic mass goes to the minimum-stake pools. The result is a Nash
/// equilibrium under proportional sharing.
pub fn construct_leximin_optimal(
    game: &GameSpec,
    cap: usize,
) -> Result<LeximinConstruction, EquilibriumError> {
    let tol = game.tol();
    let h = game.threshold();
    if game.total_stake() < h - tol {
        let pool = Pool::with_ocean(game.player_ids(), game.oceanic_mass());
        return Ok(LeximinConstruction {
            partition: Partition::new(vec![pool]),
            opt: 0,
            no_winning_pool: true,
        });
    }
    let n = game.n();
    if n > cap {
        return Err(EquilibriumError::CapExceeded { n, cap });
    }
    let opt = if game.is_atomic() {
        let r = opt_atomic(game, cap);
        if !r.exact {
            return Err(EquilibriumError::CapExceeded { n, cap });
        }
        r.value
    } else {
        let r = opt_oceanic(game, cap)?;
        if !r.exact {
            return Err(EquilibriumError::CapExceeded { n, cap });
        }
        r.value
    };
    debug_assert!(opt >= 1);
    let stakes = game.stakes();
    // (sorted pool stakes, atomic groups, per-group ocean fills)
    type Candidate = (Vec<f64>, Vec<Vec<PlayerId>>, Vec<f64>);
    let mut best: Option<Candidate> = None;
    let consider = |rgs: &[usize], best: &mut Option<Candidate>| {
        let blocks = rgs.iter().copied().max().map_or(0, |m| m + 1);
        if blocks > opt {
            return;
        }
        if game.is_atomic() && blocks != opt {
            return;
        }
        let mut groups: Vec<Vec<PlayerId>> = vec![Vec::new(); opt];
        let mut sums = vec![0.0f64; opt];
        for (i, &b) in rgs.iter().enumerate() {
            groups[b].push(i + 1);
            sums[b] += stakes[i];
        }
        let fills = if game.oceanic_mass() > 0.0 {
            ocean_leximin_fill(&sums, game.oceanic_mass())
        } else {
            vec![0.0; opt]
        };
        let totals: Vec<f64> = sums.iter().zip(&fills).map(|(s, f)| s + f).collect();
        if totals.iter().any(|&t| t < h - tol) {
            return;
        }
        let mut key = totals;
        key.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let replace = match best {
            Some((cur, _, _)) => leximin_less(cur, &key),
            None => true,
        };
        if replace {
            *best = Some((key, groups, fills));
        }
    };
    if n == 0 {
        // pure ocean: opt pools of equal mass
        let share = game.oceanic_mass() / opt as f64;
        let pools = (0..opt).map(|_| Pool::ocean(share)).collect();
        return Ok(LeximinConstruction {
            partition: Partition::new(pools),
            opt,
            no_winning_pool: false,
        });
    }
    for_each_set_partition(n, |rgs| consider(rgs, &mut best));
    let (_, groups, fills) = best.ok_or_else(|| {
        EquilibriumError::PremiseViolated("no OPT-sized partition with all pools winning".into())
    })?;
    let pools: Vec<Pool> = groups
        .into_iter()
        .zip(fills)
        .map(|(members, fill)| Pool::with_ocean(members, fill))
        .collect();
    Ok(LeximinConstruction {
        partition: Partition::new(pools),
        opt,
        no_winning_pool: false,
    })
}

// ---------------------------------------------------------------------------
// Exhaustive equilibrium enumeration
// ---------------------------------------------------------------------------

/// Enumerates all partitions of the atomic players into winning pools and
/// returns those that are Nash equilibria, sorted by descending number of
/// winning pools.
pub fn enumerate_equilibria(
    game: &GameSpec,
    scheme: Scheme,
    cap: usize,
    cfg: &CheckConfig,
) -> Result<Vec<(Partition, usize)>, EquilibriumError> {
    if !game.is_atomic() {
        return Err(EquilibriumError::PremiseViolated(
            "exhaustive enumeration covers the purely atomic model".into(),
        ));
    }
    let n = game.n();
    if n > cap {
        return Err(EquilibriumError::CapExceeded { n, cap });
    }
    let stakes = game.stakes();
    let h = game.threshold();
    let tol = game.tol();
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    for_each_set_partition(n, |rgs| {
        let blocks = rgs.iter().copied().max().map_or(0, |m| m + 1);
        let mut sums = vec![0.0f64; blocks];
        for (i, &b) in rgs.iter().enumerate() {
            sums[b] += stakes[i];
        }
        if sums.iter().all(|&s| s >= h - tol) {
            candidates.push(rgs.to_vec());
        }
    });
    let mut out = Vec::new();
    for rgs in candidates {
        let blocks = rgs.iter().copied().max().map_or(0, |m| m + 1);
        let mut groups: Vec<Vec<PlayerId>> = vec![Vec::new(); blocks];
        for (i, &b) in rgs.iter().enumerate() {
            groups[b].push(i + 1);
        }
        let partition = Partition::new(groups.into_iter().map(Pool::atomic).collect());
        let report = check_nash(&partition, game, scheme, cfg)?;
        if report.is_equilibrium() {
            let w = partition.len();
            out.push((partition, w));
        }
    }
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| format!("{:?}", a.0.pools).cmp(&format!("{:?}", b.0.pools))));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Structured enumeration for two-valued games
// ---------------------------------------------------------------------------

/// Composition of a pool in a two-valued game: number of large and small
/// players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct PoolShape {
    pub big: usize,
    pub small: usize,
}

/// Exhaustive-with-structure equilibrium search for two-valued stake games:
/// enumerates partitions as multisets of pool compositions (players of equal
/// stake are exchangeable) and checks representative deviations. Returns the
/// equilibrium shape multisets sorted by descending pool count.
pub fn enumerate_structured_equilibria(
    game: &GameSpec,
    scheme: Scheme,
) -> Result<Vec<(Vec<PoolShape>, usize)>, EquilibriumError> {
    if !game.is_atomic() {
        return Err(EquilibriumError::PremiseViolated(
            "structured enumeration covers the purely atomic model".into(),
        ));
    }
    let h = game.integer_threshold().ok_or_else(|| {
        EquilibriumError::UnsupportedStakePattern("integer threshold required".into())
    })?;
    let ints = game.integer_stakes().ok_or_else(|| {
        EquilibriumError::UnsupportedStakePattern("integer stakes required".into())
    })?;
    let mut n_b = 0usize;
    let mut n_s = 0usize;
    let mut a: i64 = 1;
    for &v in &ints {
        if v == 1 {
            n_s += 1;
        } else {
            if a != 1 && a != v {
                return Err(EquilibriumError::UnsupportedStakePattern(format!(
                    "two-valued stakes required; found {a} and {v}"
                )));
            }
            a = v;
            n_b += 1;
        }
    }
    let wins = |shape: PoolShape| shape.big as i64 * a + shape.small as i64 >= h;
    // reward of a large / small player in a pool of the given shape
    let mut cache: BTreeMap<PoolShape, (BigRational, BigRational)> = BTreeMap::new();
    let mut reward = |shape: PoolShape| -> (BigRational, BigRational) {
        if let Some(v) = cache.get(&shape) {
            return v.clone();
        }
        let mut stakes = vec![a; shape.big];
        stakes.extend(std::iter::repeat_n(1, shape.small));
        let v = if (stakes.iter().sum::<i64>()) < h {
            (BigRational::zero(), BigRational::zero())
        } else {
            match scheme {
                Scheme::Shapley => {
                    let values = crate::rewards::shapley_dp_exact(&stakes, h);
                    let big = values.first().cloned().unwrap_or_else(BigRational::zero);
                    let small = values.last().cloned().unwrap_or_else(BigRational::zero);
                    let small = if shape.small > 0 { small } else { BigRational::zero() };
                    (big, small)
                }
                Scheme::Proportional | Scheme::PropSquares => {
                    let w = |x: i64| {
                        if scheme == Scheme::Proportional {
                            x
                        } else {
                            x * x
                        }
                    };
                    let denom: i64 = stakes.iter().map(|&x| w(x)).sum();
                    (
                        BigRational::new(w(a).into(), denom.into()),
                        BigRational::new(w(1).into(), denom.into()),
                    )
                }
                Scheme::PropSqrt => {
                    // irrational weights: fall back to high-precision floats
                    let denom: f64 =
                        shape.big as f64 * (a as f64).sqrt() + shape.small as f64;
                    let approx = |x: f64| {
                        BigRational::from_float(x).unwrap_or_else(BigRational::zero)
                    };
                    (
                        approx((a as f64).sqrt() / denom),
                        approx(1.0 / denom),
                    )
                }
            }
        };
        cache.insert(shape, v.clone());
        v
    };
    // Enumerate non-increasing sequences of winning shapes covering (n_b, n_s).
    let mut shapes_buf: Vec<PoolShape> = Vec::new();
    let mut results: Vec<(Vec<PoolShape>, usize)> = Vec::new();
    fn recurse(
        rem_b: usize,
        rem_s: usize,
        max_shape: PoolShape,
        buf: &mut Vec<PoolShape>,
        out: &mut Vec<Vec<PoolShape>>,
        wins: &impl Fn(PoolShape) -> bool,
    ) {
        if rem_b == 0 && rem_s == 0 {
            out.push(buf.clone());
            return;
        }
        for big in (0..=rem_b.min(max_shape.big)).rev() {
            let small_cap = if big == max_shape.big {
                max_shape.small
            } else {
                rem_s
            };
            for small in (0..=rem_s.min(small_cap)).rev() {
                let shape = PoolShape { big, small };
                if (big == 0 && small == 0) || !wins(shape) {
                    continue;
                }
                buf.push(shape);
                recurse(rem_b - big, rem_s - small, shape, buf, out, wins);
                buf.pop();
            }
        }
    }
    let mut all: Vec<Vec<PoolShape>> = Vec::new();
    recurse(
        n_b,
        n_s,
        PoolShape {
            big: n_b,
            small: n_s,
        },
        &mut shapes_buf,
        &mut all,
        &wins,
    );
    // Strict improvements only; the square-root scheme goes through float
    // approximations, so it gets a small epsilon band.
    let eps = if scheme == Scheme::PropSqrt {
        BigRational::from_float(1e-9).unwrap()
    } else {
        BigRational::zero()
    };
    for shapes in all {
        let mut counts: BTreeMap<PoolShape, usize> = BTreeMap::new();
        for &s in &shapes {
            *counts.entry(s).or_insert(0) += 1;
        }
        let mut is_ne = true;
        'outer: for (&src, &mult) in &counts {
            for deviator_big in [true, false] {
                if deviator_big && src.big == 0 {
                    continue;
                }
                if !deviator_big && src.small == 0 {
                    continue;
                }
                let (before_b, before_s) = reward(src);
                let before = if deviator_big { before_b } else { before_s };
                for (&dst, &dmult) in &counts {
                    if dst == src && dmult < 2 && mult < 2 {
                        continue; // no second pool of this shape to move into
                    }
                    let grown = if deviator_big {
                        PoolShape {
                            big: dst.big + 1,
                            small: dst.small,
                        }
                    } else {
                        PoolShape {
                            big: dst.big,
                            small: dst.small + 1,
                        }
                    };
                    let (after_b, after_s) = reward(grown);
                    let after = if deviator_big { after_b } else { after_s };
                    if after > before.clone() + eps.clone() {
                        is_ne = false;
                        break 'outer;
                    }
                }
            }
        }
        if is_ne {
            let w = shapes.len();
            results.push((shapes, w));
        }
    }
    results.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(results)
}
