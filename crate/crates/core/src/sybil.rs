//! Sybil (stake-splitting) analysis: payoff of a split strategy at a fixed
//! partition, an exact water-filling best response for proportional sharing,
//! grid search with refinement for the other schemes, whole-partition
//! audits, the concavity probe, and the very-large-player split analysis.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::model::{GameSpec, ModelError, Partition, PlayerId, Scheme};
use crate::rewards::{entrant_reward, McConfig, PoolProfile, RewardError};

#[derive(Debug, Error)]
pub enum SybilError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("player {0} is not in the partition")]
    PlayerNotInPartition(PlayerId),
    #[error("allocation targets nonexistent pool {0}")]
    NoSuchPool(usize),
    #[error("negative allocation {amount} to pool {pool}")]
    NegativeAllocation { pool: usize, amount: f64 },
    #[error("allocations sum to {total}, exceeding the player's stake {stake}")]
    OverBudget { total: f64, stake: f64 },
    #[error("premise not met: {0}")]
    Premise(String),
}

/// A split of one player's stake across the pools of a fixed partition.
#[derive(Debug, Clone, Serialize)]
pub struct SybilStrategy {
    pub player: PlayerId,
    /// pool index -> stake committed there (missing pools receive zero).
    pub allocations: BTreeMap<usize, f64>,
}

impl SybilStrategy {
    pub fn identity(player: PlayerId, pool: usize, stake: f64) -> Self {
        SybilStrategy {
            player,
            allocations: [(pool, stake)].into(),
        }
    }

    pub fn total(&self) -> f64 {
        self.allocations.values().sum()
    }
}

/// Pool compositions with the splitting player removed from her pool.
fn profiles_without(
    game: &GameSpec,
    partition: &Partition,
    player: PlayerId,
) -> Result<(Vec<PoolProfile>, usize), SybilError> {
    let origin = partition
        .pool_of(player)
        .ok_or(SybilError::PlayerNotInPartition(player))?;
    let mut profiles = Vec::with_capacity(partition.len());
    for pool in &partition.pools {
        let mut co = Vec::new();
        for &id in &pool.atomic_members {
            if id == player {
                continue;
            }
            co.push(game.stake(id)?);
        }
        profiles.push(PoolProfile {
            co_stakes: co,
            ocean: pool.oceanic_share,
        });
    }
    Ok((profiles, origin))
}

/// Total payoff of a Sybil strategy: the player is removed from her original
/// pool, each positive portion enters its target pool as an avatar, and the
/// reward function is re-evaluated per touched pool (pools may drop below or
/// re-cross the threshold).
pub fn sybil_payoff(
    game: &GameSpec,
    partition: &Partition,
    strategy: &SybilStrategy,
    scheme: Scheme,
    mc: &McConfig,
) -> Result<f64, SybilError> {
    let stake = game.stake(strategy.player)?;
    let total = strategy.total();
    if total > stake + game.tol() {
        return Err(SybilError::OverBudget { total, stake });
    }
    let (profiles, _) = profiles_without(game, partition, strategy.player)?;
    let mut payoff = 0.0;
    for (&pool, &amount) in &strategy.allocations {
        if amount < -game.tol() {
            return Err(SybilError::NegativeAllocation { pool, amount });
        }
        if pool >= profiles.len() {
            return Err(SybilError::NoSuchPool(pool));
        }
        if amount <= 0.0 {
            continue;
        }
        let (reward, _) = entrant_reward(&profiles[pool], amount, game, scheme, mc)?;
        payoff += reward;
    }
    Ok(payoff)
}

// ---------------------------------------------------------------------------
// Water filling (proportional scheme)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct WaterfillResult {
    pub allocation: Vec<f64>,
    pub payoff: f64,
    /// Final pool stakes m_j + s_j.
    pub levels: Vec<f64>,
    /// Common marginal value of the active pools.
    pub marginal: f64,
}

/// Maximizes `sum_j s_j / (m_j + s_j)` subject to `sum s_j <= budget`,
/// `s_j >= 0`: pours into the pools with the highest marginal
/// `m_j / (m_j + s_j)^2` until marginals equalize. Runs in O(m log m).
pub fn waterfill_proportional(pool_stakes: &[f64], budget: f64) -> WaterfillResult {
    let items: Vec<(f64, f64)> = pool_stakes.iter().map(|&m| (m, m)).collect();
    let allocation = waterfill_kkt(&items, budget);
    let levels: Vec<f64> = pool_stakes
        .iter()
        .zip(&allocation)
        .map(|(m, s)| m + s)
        .collect();
    let payoff: f64 = pool_stakes
        .iter()
        .zip(&allocation)
        .map(|(&m, &s)| if s > 0.0 { s / (m + s) } else { 0.0 })
        .sum();
    let marginal = pool_stakes
        .iter()
        .zip(&levels)
        .map(|(&m, &lv)| m / (lv * lv))
        .fold(0.0f64, f64::max);
    WaterfillResult {
        allocation,
        payoff,
        levels,
        marginal,
    }
}

/// KKT water filling for items (weight m_j, starting level c_j >= m_j):
/// maximizes `sum_j (1 - m_j / level_j)` over `level_j >= c_j`,
/// `sum (level_j - c_j) <= budget`. Active items share the marginal
/// `m_j / level_j^2`.
pub(crate) fn waterfill_kkt(items: &[(f64, f64)], budget: f64) -> Vec<f64> {
    let m = items.len();
    if m == 0 || budget <= 0.0 {
        return vec![0.0; m];
    }
    // order by starting marginal m_j / c_j^2, descending
    let mut order: Vec<usize> = (0..m).collect();
    let marginal0 = |i: usize| items[i].0 / (items[i].1 * items[i].1);
    order.sort_by(|&i, &j| marginal0(j).partial_cmp(&marginal0(i)).unwrap());
    let mut sqrt_sum = 0.0; // sum of sqrt(m_j) over active
    let mut start_sum = 0.0; // sum of c_j over active
    let mut alloc = vec![0.0; m];
    for (rank, &i) in order.iter().enumerate() {
        sqrt_sum += items[i].0.sqrt();
        start_sum += items[i].1;
        // candidate common marginal mu with the first rank+1 items active
        let mu_sqrt = sqrt_sum / (budget + start_sum);
        let mu = mu_sqrt * mu_sqrt;
        let next_ok = match order.get(rank + 1) {
            Some(&j) => mu >= marginal0(j),
            None => true,
        };
        if next_ok {
            for &j in &order[..=rank] {
                let level = items[j].0.sqrt() / mu_sqrt;
                alloc[j] = (level - items[j].1).max(0.0);
            }
            break;
        }
    }
    alloc
}

// ---------------------------------------------------------------------------
// Best responses and audits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SybilVerdict {
    SybilProofAtProfile,
    Vulnerable,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SybilMethod {
    ExactWaterfill,
    GridRefine,
    ClosedFormCase,
}

#[derive(Debug, Clone, Serialize)]
pub struct SybilAudit {
    pub player: PlayerId,
    pub baseline: f64,
    pub best_payoff: f64,
    pub best_strategy: SybilStrategy,
    pub verdict: SybilVerdict,
    pub method: SybilMethod,
    /// Stake left unallocated by the best strategy (earns nothing).
    pub withheld: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SybilConfig {
    /// Grid steps per stake unit for the non-proportional search.
    pub grid_steps: usize,
    /// Improvements below this margin do not count as vulnerabilities.
    pub improve_tol: f64,
    pub mc: McConfig,
}

impl Default for SybilConfig {
    fn default() -> Self {
        SybilConfig {
            grid_steps: 200,
            improve_tol: 1e-6,
            mc: McConfig::default(),
        }
    }
}

/// Best Sybil response of one player at a fixed partition. Proportional uses
/// the exact water-filling optimizer (with a threshold floor for the origin
/// pool when the player's departure makes it losing); the other schemes use
/// coordinate-wise grid search with local refinement and report honestly
/// inconclusive verdicts when the margin is within the grid error band.
pub fn sybil_best_response(
    game: &GameSpec,
    partition: &Partition,
    player: PlayerId,
    scheme: Scheme,
    cfg: &SybilConfig,
) -> Result<SybilAudit, SybilError> {
    let stake = game.stake(player)?;
    let (profiles, origin) = profiles_without(game, partition, player)?;
    let baseline_strategy = SybilStrategy::identity(player, origin, stake);
    let baseline = sybil_payoff(game, partition, &baseline_strategy, scheme, &cfg.mc)?;
    let (best_alloc, best_payoff, method, grid_error) = if scheme == Scheme::Proportional {
        let (alloc, payoff) =
            proportional_best_response(game, &profiles, origin, stake, player, partition, cfg)?;
        (alloc, payoff, SybilMethod::ExactWaterfill, 0.0)
    } else {
        let (alloc, payoff, err) = grid_best_response(game, &profiles, origin, stake, scheme, cfg)?;
        (alloc, payoff, SybilMethod::GridRefine, err)
    };
    // Keep the better of baseline and search result.
    let (best_alloc, best_payoff) = if best_payoff > baseline {
        (best_alloc, best_payoff)
    } else {
        (baseline_strategy.allocations.clone(), baseline)
    };
    let improvement = best_payoff - baseline;
    let verdict = if improvement > cfg.improve_tol.max(3.0 * grid_error) {
        SybilVerdict::Vulnerable
    } else if improvement > cfg.improve_tol {
        SybilVerdict::Inconclusive
    } else {
        SybilVerdict::SybilProofAtProfile
    };
    let best_strategy = SybilStrategy {
        player,
        allocations: best_alloc,
    };
    let withheld = (stake - best_strategy.total()).max(0.0);
    Ok(SybilAudit {
        player,
        baseline,
        best_payoff,
        best_strategy,
        verdict,
        method,
        withheld,
    })
}

fn proportional_best_response(
    game: &GameSpec,
    profiles: &[PoolProfile],
    origin: usize,
    stake: f64,
    player: PlayerId,
    partition: &Partition,
    cfg: &SybilConfig,
) -> Result<(BTreeMap<usize, f64>, f64), SybilError> {
    let h = game.threshold();
    let tol = game.tol();
    let bases: Vec<f64> = profiles.iter().map(|p| p.total()).collect();
    let mut candidates: Vec<BTreeMap<usize, f64>> = Vec::new();
    // Case A: pour only into pools that win without the player (the origin
    // pool participates only if it is still winning after her departure).
    {
        let winning: Vec<usize> = (0..profiles.len())
            .filter(|&j| bases[j] >= h - tol)
            .collect();
        let items: Vec<(f64, f64)> = winning.iter().map(|&j| (bases[j], bases[j])).collect();
        let alloc = waterfill_kkt(&items, stake);
        let mut map = BTreeMap::new();
        for (pos, &j) in winning.iter().enumerate() {
            if alloc[pos] > 0.0 {
                map.insert(j, alloc[pos]);
            }
        }
        candidates.push(map);
    }
    // Case B: origin pool first restored to the threshold, then water fill.
    let floor = (h - bases[origin]).max(0.0);
    if stake >= floor - tol {
        let mut items: Vec<(f64, f64)> = Vec::new();
        let mut index: Vec<usize> = Vec::new();
        for (j, base) in bases.iter().enumerate() {
            if j == origin {
                items.push((*base, base.max(h)));
                index.push(j);
            } else if *base >= h - tol {
                items.push((*base, *base));
                index.push(j);
            }
        }
        let alloc = waterfill_kkt(&items, (stake - floor).max(0.0));
        let mut map = BTreeMap::new();
        for (pos, &j) in index.iter().enumerate() {
            let extra = if j == origin { floor } else { 0.0 };
            let amount = alloc[pos] + extra;
            if amount > 0.0 {
                map.insert(j, amount);
            }
        }
        candidates.push(map);
    }
    let mut best: Option<(BTreeMap<usize, f64>, f64)> = None;
    for alloc in candidates {
        let strategy = SybilStrategy {
            player,
            allocations: alloc.clone(),
        };
        let payoff = sybil_payoff(game, partition, &strategy, Scheme::Proportional, &cfg.mc)?;
        if best.as_ref().is_none_or(|(_, p)| payoff > *p) {
            best = Some((alloc, payoff));
        }
    }
    Ok(best.expect("at least one candidate"))
}

fn grid_best_response(
    game: &GameSpec,
    profiles: &[PoolProfile],
    origin: usize,
    stake: f64,
    scheme: Scheme,
    cfg: &SybilConfig,
) -> Result<(BTreeMap<usize, f64>, f64, f64), SybilError> {
    let m = profiles.len();
    let step = stake / cfg.grid_steps as f64;
    let h = game.threshold();
    let eval = |alloc: &[f64]| -> Result<f64, SybilError> {
        let mut payoff = 0.0;
        for (j, &s) in alloc.iter().enumerate() {
            if s > 0.0 {
                let (r, _) = entrant_reward(&profiles[j], s, game, scheme, &cfg.mc)?;
                payoff += r;
            }
        }
        Ok(payoff)
    };
    let mut alloc = vec![0.0; m];
    alloc[origin] = stake;
    let mut best = eval(&alloc)?;
    // Coordinate sweeps: move mass between the origin reservoir and each
    // other pool on the grid.
    for _sweep in 0..6 {
        let mut improved = false;
        for j in 0..m {
            if j == origin {
                continue;
            }
            let movable = alloc[j] + alloc[origin];
            let steps = (movable / step).floor() as usize;
            let mut local_best = best;
            let mut local_x = alloc[j];
            for i in 0..=steps {
                let x = (i as f64 * step).min(movable);
                let mut trial = alloc.clone();
                trial[j] = x;
                trial[origin] = movable - x;
                let p = eval(&trial)?;
                if p > local_best {
                    local_best = p;
                    local_x = x;
                }
            }
            if local_best > best {
                alloc[origin] = movable - local_x;
                alloc[j] = local_x;
                best = local_best;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    // Local refinement: shrink the step around the incumbent.
    let mut width = step;
    for _ in 0..8 {
        width /= 2.0;
        for j in 0..m {
            if j == origin {
                continue;
            }
            for dir in [-1.0, 1.0] {
                let delta: f64 = dir * width;
                if alloc[j] + delta < 0.0 || alloc[origin] - delta < 0.0 {
                    continue;
                }
                let mut trial = alloc.clone();
                trial[j] += delta;
                trial[origin] -= delta;
                let p = eval(&trial)?;
                if p > best {
                    alloc = trial;
                    best = p;
                }
            }
        }
    }
    // Step-induced error estimate from per-pool slope bounds.
    let slope: f64 = profiles
        .iter()
        .map(|p| {
            if p.ocean > 0.0 {
                2.0 / p.ocean.max(step)
            } else {
                1.0 / h
            }
        })
        .sum();
    let map: BTreeMap<usize, f64> = alloc
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s > 0.0)
        .map(|(j, &s)| (j, s))
        .collect();
    Ok((map, best, step * slope))
}

/// Runs [`sybil_best_response`] for every atomic player.
pub fn audit_sybil_proofness(
    game: &GameSpec,
    partition: &Partition,
    scheme: Scheme,
    cfg: &SybilConfig,
) -> Result<Vec<SybilAudit>, SybilError> {
    let mut out = Vec::new();
    for id in game.player_ids() {
        out.push(sybil_best_response(game, partition, id, scheme, cfg)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Concavity probe
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ConcavityWitness {
    /// Stake at which strict concavity was found.
    pub x: f64,
    /// Reward of the whole stake in one pool.
    pub single: f64,
    /// Total reward of two x/2 avatars in duplicated pools.
    pub split: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcavityReport {
    /// (x, second difference) samples; negative second difference = concave.
    pub samples: Vec<(f64, f64)>,
    pub concave_somewhere: bool,
    pub convex_somewhere: bool,
    pub witness: Option<ConcavityWitness>,
}

/// Samples p_i(x, S) for x in (0, h) against a fixed co-member profile,
/// reporting midpoint-concavity, and emits the duplicated-pool witness
/// whenever strict concavity yields a profitable two-way split:
/// p(x) < 2 p(x/2).
pub fn concavity_probe(
    scheme: Scheme,
    profile: &PoolProfile,
    game: &GameSpec,
    grid: usize,
) -> Result<ConcavityReport, SybilError> {
    let h = game.threshold();
    let mc = McConfig::default();
    let p = |x: f64| -> Result<f64, SybilError> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        let (r, _) = entrant_reward(profile, x, game, scheme, &mc)?;
        Ok(r)
    };
    let mut samples = Vec::new();
    let mut concave_somewhere = false;
    let mut convex_somewhere = false;
    let mut witness = None;
    let tol = 1e-9;
    for i in 1..grid {
        let x = h * i as f64 / grid as f64;
        let delta = h / (2.0 * grid as f64);
        let second = p(x + delta)? + p(x - delta)? - 2.0 * p(x)?;
        samples.push((x, second));
        if second < -tol {
            concave_somewhere = true;
        }
        if second > tol {
            convex_somewhere = true;
        }
        if witness.is_none() {
            let single = p(x)?;
            let split = 2.0 * p(x / 2.0)?;
            if split > single + tol {
                witness = Some(ConcavityWitness {
                    x,
                    single,
                    split,
                });
            }
        }
    }
    Ok(ConcavityReport {
        samples,
        concave_somewhere,
        convex_somewhere,
        witness,
    })
}

// ---------------------------------------------------------------------------
// Very large players (a = lambda h)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    pub lambda: u64,
    pub m: u64,
    /// Oceanic mass accompanying each avatar at the constructed equilibrium.
    pub k: f64,
    /// Payoff from running lambda solo pools of size h.
    pub solo_payoff: f64,
    /// Total Shapley payoff of the lambda*m avatars of size h/m.
    pub shapley_split_payoff: f64,
    /// Total proportional payoff of the same avatars.
    pub proportional_split_payoff: f64,
    /// Split payoff can reach the solo payoff only when k = h.
    pub split_matches_solo: bool,
}

/// Compares a player of stake `a = lambda h` running solo pools of size `h`
/// against splitting into `m`-fraction avatars that play the constructed
/// oceanic equilibrium (each avatar with mass k = sqrt(l (h - h/m))). The
/// split payoff never exceeds `lambda`, with equality exactly when k = h.
pub fn big_player_split_analysis(
    a: f64,
    h: f64,
    l: f64,
    m: u64,
) -> Result<SplitReport, SybilError> {
    if h <= 0.0 || l < h {
        return Err(SybilError::Premise(format!(
            "need h > 0 and l >= h, got h = {h}, l = {l}"
        )));
    }
    let lambda_f = a / h;
    if (lambda_f - lambda_f.round()).abs() > 1e-9 || lambda_f < 1.0 {
        return Err(SybilError::Premise(format!(
            "stake {a} is not an integer multiple of the threshold {h}"
        )));
    }
    let lambda = lambda_f.round() as u64;
    if m == 0 {
        return Err(SybilError::Premise("m must be at least 1".into()));
    }
    let solo = lambda as f64;
    if m == 1 {
        return Ok(SplitReport {
            lambda,
            m,
            k: 0.0,
            solo_payoff: solo,
            shapley_split_payoff: solo,
            proportional_split_payoff: solo,
            split_matches_solo: true,
        });
    }
    let avatar = h / m as f64;
    let k = (l * (h - avatar)).sqrt();
    if k > h + 1e-9 {
        return Err(SybilError::Premise(format!(
            "equilibrium premise fails: k = sqrt(l (h - h/m)) = {k} exceeds h = {h} \
             (avatar stake h/m below h/4)"
        )));
    }
    let per_avatar_shapley = (k - h + avatar) / k;
    let shapley_total = solo * m as f64 * per_avatar_shapley;
    let per_avatar_prop = avatar / (avatar + k);
    let prop_total = solo * m as f64 * per_avatar_prop;
    Ok(SplitReport {
        lambda,
        m,
        k,
        solo_payoff: solo,
        shapley_split_payoff: shapley_total,
        proportional_split_payoff: prop_total,
        split_matches_solo: (shapley_total - solo).abs() <= 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Pool;

    fn game(h: f64, stakes: &[f64], l: f64) -> GameSpec {
        GameSpec::new(h, stakes.to_vec(), l).unwrap()
    }

    #[test]
    fn waterfill_zero_budget() {
        let r = waterfill_proportional(&[4.0, 5.0, 7.0], 0.0);
        assert_eq!(r.allocation, vec![0.0, 0.0, 0.0]);
        assert_eq!(r.payoff, 0.0);
    }

    #[test]
    fn waterfill_single_pool() {
        let r = waterfill_proportional(&[5.0], 2.0);
        assert!((r.allocation[0] - 2.0).abs() < 1e-12);
        assert!((r.payoff - 2.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn waterfill_equalizes_marginals() {
        let stakes = [4.0, 5.0, 7.0];
        let r = waterfill_proportional(&stakes, 3.0);
        assert!((r.allocation.iter().sum::<f64>() - 3.0).abs() < 1e-9);
        // Active pools share the marginal m/(m+s)^2; inactive pools start
        // below it.
        let mu = r.marginal;
        for (j, &m) in stakes.iter().enumerate() {
            let level = m + r.allocation[j];
            if r.allocation[j] > 1e-12 {
                assert!((m / (level * level) - mu).abs() < 1e-9, "pool {j}");
            } else {
                assert!(1.0 / m <= mu + 1e-9, "pool {j}");
            }
        }
        // Better than any single-pool allocation of the full budget.
        for &m in &stakes {
            assert!(r.payoff >= 3.0 / (m + 3.0) - 1e-12);
        }
    }

    #[test]
    fn sybil_identity_strategy_is_baseline() {
        let g = game(10.0, &[6.0, 6.0, 6.0, 1.0, 1.0, 1.0, 1.0], 0.0);
        let p = Partition::new(vec![Pool::atomic([1, 2]), Pool::atomic([3, 4, 5, 6, 7])]);
        let s = SybilStrategy::identity(1, 0, 6.0);
        let payoff = sybil_payoff(&g, &p, &s, Scheme::Proportional, &McConfig::default()).unwrap();
        assert!((payoff - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sybil_witness_six_elevenths() {
        // Pools {6,6} and {6,1,1,1,1} at h=10: moving one unit from the first
        // pool to the second yields 5/11 + 1/11 = 6/11 > 1/2.
        let g = game(10.0, &[6.0, 6.0, 6.0, 1.0, 1.0, 1.0, 1.0], 0.0);
        let p = Partition::new(vec![Pool::atomic([1, 2]), Pool::atomic([3, 4, 5, 6, 7])]);
        let s = SybilStrategy {
            player: 1,
            allocations: [(0, 5.0), (1, 1.0)].into(),
        };
        let payoff = sybil_payoff(&g, &p, &s, Scheme::Proportional, &McConfig::default()).unwrap();
        assert!((payoff - 6.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn sybil_rejects_bad_allocations() {
        let g = game(10.0, &[6.0, 6.0, 6.0, 1.0, 1.0, 1.0, 1.0], 0.0);
        let p = Partition::new(vec![Pool::atomic([1, 2]), Pool::atomic([3, 4, 5, 6, 7])]);
        let over = SybilStrategy {
            player: 1,
            allocations: [(0, 7.0)].into(),
        };
        assert!(matches!(
            sybil_payoff(&g, &p, &over, Scheme::Proportional, &McConfig::default()),
            Err(SybilError::OverBudget { .. })
        ));
        let missing = SybilStrategy {
            player: 1,
            allocations: [(9, 1.0)].into(),
        };
        assert!(matches!(
            sybil_payoff(&g, &p, &missing, Scheme::Proportional, &McConfig::default()),
            Err(SybilError::NoSuchPool(9))
        ));
    }

    #[test]
    fn proportional_best_response_beats_baseline_on_unbalanced_pools() {
        let g = game(10.0, &[6.0, 6.0, 6.0, 1.0, 1.0, 1.0, 1.0], 0.0);
        let p = Partition::new(vec![Pool::atomic([1, 2]), Pool::atomic([3, 4, 5, 6, 7])]);
        let audit =
            sybil_best_response(&g, &p, 1, Scheme::Proportional, &SybilConfig::default()).unwrap();
        assert_eq!(audit.verdict, SybilVerdict::Vulnerable);
        assert!(audit.best_payoff > 6.0 / 11.0 - 1e-9);
        assert_eq!(audit.method, SybilMethod::ExactWaterfill);
    }

    #[test]
    fn shapley_nonequilibrium_profile_is_vulnerable() {
        // Two larges above h/2 in one pool, pure ocean of mass h in the
        // other: keeping >= h - a at home and moving the rest pays more.
        let g = game(1.0, &[0.6, 0.6], 1.0);
        let p = Partition::new(vec![Pool::atomic([1, 2]), Pool::ocean(1.0)]);
        let audit =
            sybil_best_response(&g, &p, 1, Scheme::Shapley, &SybilConfig::default()).unwrap();
        assert_eq!(audit.verdict, SybilVerdict::Vulnerable);
        // keep x in the pool (reward 1/2 as long as 0.6 + x >= 1), commit the
        // rest to the ocean pool at rate 1/h
        assert!(audit.best_payoff > 0.5 + 0.19);
    }

    #[test]
    fn concavity_proportional_emits_witness() {
        let g = game(4.0, &[2.0], 0.0);
        let profile = PoolProfile {
            co_stakes: vec![3.0, 1.0],
            ocean: 0.0,
        };
        let report = concavity_probe(Scheme::Proportional, &profile, &g, 64).unwrap();
        assert!(report.concave_somewhere);
        let w = report.witness.expect("strict concavity witness");
        assert!(w.split > w.single);
    }

    #[test]
    fn concavity_squares_convex_near_zero() {
        let g = game(4.0, &[2.0], 0.0);
        let profile = PoolProfile {
            co_stakes: vec![3.0],
            ocean: 0.0,
        };
        let report = concavity_probe(Scheme::PropSquares, &profile, &g, 64).unwrap();
        assert!(report.convex_somewhere);
    }

    #[test]
    fn big_player_split_identity_at_m1() {
        let r = big_player_split_analysis(2.0, 1.0, 4.0 / 3.0, 1).unwrap();
        assert_eq!(r.shapley_split_payoff, 2.0);
        assert!(r.split_matches_solo);
    }

    #[test]
    fn big_player_split_never_beats_solo() {
        for lambda in [2u64, 3] {
            for m in [2u64, 3, 4] {
                let r =
                    big_player_split_analysis(lambda as f64, 1.0, 4.0 / 3.0, m).unwrap();
                assert!(r.shapley_split_payoff <= r.solo_payoff + 1e-9);
                assert!(r.proportional_split_payoff <= r.solo_payoff + 1e-9);
                // equality exactly when k = h (m = 4 at l = 4/3)
                assert_eq!(r.split_matches_solo, (r.k - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn big_player_split_requires_integer_lambda() {
        assert!(matches!(
            big_player_split_analysis(2.5, 1.0, 4.0 / 3.0, 2),
            Err(SybilError::Premise(_))
        ));
    }
}
