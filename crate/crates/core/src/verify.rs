//! The paper-reproduction suite: sixteen checks covering exact Shapley
//! values, closed-form/sampling agreement, equilibrium constructions in both
//! models, Price of Stability, water filling, and Sybil analysis. Each check
//! pins its tolerance here; the CLI `verify` command and the acceptance test
//! target both run this module.

use num::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::{
    self, check_nash, construct_atomic_kl_equilibrium, construct_leximin_optimal,
    construct_oceanic_equilibrium, construct_sqrt_kl_equilibrium,
    enumerate_structured_equilibria, f_function, CheckConfig,
};
use crate::model::{pool_stake, GameSpec, Partition, Pool, Scheme};
use crate::rewards::{
    allocate_rewards, entrant_reward_exact, onelarge_oceanic, shapley_dp_exact,
    shapley_oceanic_mc, twolarge_oceanic, McConfig,
};
use crate::sybil::{
    audit_sybil_proofness, big_player_split_analysis, sybil_best_response, sybil_payoff,
    waterfill_proportional, SybilConfig, SybilStrategy, SybilVerdict,
};
use crate::welfare::{opt_atomic, opt_oceanic, price_of_stability, winning_count, PosCaps, PosMethod};

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub seed: u64,
    pub samples: u64,
    pub tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 42,
            samples: 1_000_000,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

const NAMES: [&str; 16] = [
    "atomic Shapley exact values on (3,1) and (3,1,1,1,1)",
    "oceanic closed forms vs Monte Carlo and quadrature",
    "oceanic example partition: equilibrium and rewards",
    "oceanic construction: equilibrium, 4h/3 bound, constructive PoS",
    "ratio trend of the one-large-player family towards 4/3",
    "pairwise-deviation surplus grid scan",
    "atomic (k,l) constructions across (a,h) at the population bound",
    "best atomic (k,l)-equilibrium for a=2, h=4 has l = 6",
    "exhaustive PoS: Shapley 2, proportional 1",
    "leximin construction: equilibrium and W = OPT on random games",
    "water filling vs oracles; 6/11 witness",
    "Shapley Sybil-proofness at constructed oceanic equilibria",
    "proportional Sybil vulnerability at leximin equilibria",
    "proportional-to-squares: no equilibrium with more than 2 pools",
    "sqrt-scheme construction and unit-split attack values",
    "very large player: m-way splits never beat solo pools",
];

/// Runs every criterion and returns per-criterion outcomes.
pub fn run_all(cfg: &VerifyConfig) -> Vec<CriterionOutcome> {
    (1..=16).map(|id| run_criterion(id, cfg)).collect()
}

pub fn run_criterion(id: usize, cfg: &VerifyConfig) -> CriterionOutcome {
    let result = match id {
        1 => criterion_01(cfg),
        2 => criterion_02(cfg),
        3 => criterion_03(cfg),
        4 => criterion_04(cfg),
        5 => criterion_05(cfg),
        6 => criterion_06(cfg),
        7 => criterion_07(cfg),
        8 => criterion_08(cfg),
        9 => criterion_09(cfg),
        10 => criterion_10(cfg),
        11 => criterion_11(cfg),
        12 => criterion_12(cfg),
        13 => criterion_13(cfg),
        14 => criterion_14(cfg),
        15 => criterion_15(cfg),
        16 => criterion_16(cfg),
        _ => Err(format!("no criterion {id}")),
    };
    let name = NAMES.get(id.wrapping_sub(1)).copied().unwrap_or("unknown");
    match result {
        Ok(details) => CriterionOutcome {
            id,
            name,
            passed: true,
            details,
        },
        Err(details) => CriterionOutcome {
            id,
            name,
            passed: false,
            details,
        },
    }
}

type CriterionResult = Result<String, String>;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn stream(cfg: &VerifyConfig, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(salt.wrapping_mul(0x9E3779B97F4A7C15)))
}

fn check_cfg(cfg: &VerifyConfig) -> CheckConfig {
    CheckConfig {
        tol: cfg.tol,
        mc: McConfig {
            samples: cfg.samples,
            seed: cfg.seed,
        },
    }
}

// 1. Exact rational Shapley values of the running example.
fn criterion_01(_cfg: &VerifyConfig) -> CriterionResult {
    let v = shapley_dp_exact(&[3, 1], 4);
    if v[0] != rat(1, 2) {
        return Err(format!("pool (3,1), h=4: large player got {} instead of 1/2", v[0]));
    }
    let v5 = shapley_dp_exact(&[3, 1, 1, 1, 1], 4);
    if v5[0] != rat(3, 5) {
        return Err(format!(
            "pool (3,1,1,1,1), h=4: large player got {} instead of 3/5",
            v5[0]
        ));
    }
    Ok("large player reward: 1/2 in (3,1), 3/5 in (3,1,1,1,1); exact rational equality".into())
}

// 2. Closed forms vs Monte Carlo (3 standard errors, 50 configs) and vs a
// 2-D quadrature oracle (1e-3, 10 configs).
fn criterion_02(cfg: &VerifyConfig) -> CriterionResult {
    let mut rng = stream(cfg, 2);
    let mut worst_sigma = 0.0f64;
    for trial in 0..50 {
        let two_large = trial >= 25;
        let h: f64 = rng.gen_range(0.5..3.0);
        let (stakes, k) = if two_large {
            let a1 = rng.gen_range(0.05 * h..0.95 * h);
            let a2 = rng.gen_range(0.05 * h..0.95 * h);
            let lo = (h - a1 - a2 + 0.02 * h).max(0.05 * h);
            if lo >= h {
                continue;
            }
            (vec![a1, a2], rng.gen_range(lo..h))
        } else {
            let a = rng.gen_range(0.05 * h..0.95 * h);
            let lo = (h - a + 0.02 * h).max(0.05 * h);
            (vec![a], rng.gen_range(lo..2.0 * h))
        };
        let game = GameSpec::new(h, stakes.clone(), k).map_err(|e| e.to_string())?;
        let ids: Vec<usize> = (1..=stakes.len()).collect();
        let pool = Pool::with_ocean(ids.clone(), k);
        let mc = shapley_oceanic_mc(&pool, &game, cfg.samples, cfg.seed.wrapping_add(trial))
            .map_err(|e| e.to_string())?;
        for (i, &id) in ids.iter().enumerate() {
            let closed = if two_large {
                twolarge_oceanic(stakes[i], stakes[1 - i], k, h)
            } else {
                onelarge_oceanic(stakes[0], k, h)
            };
            let est = &mc.mc.as_ref().unwrap()[&id];
            let sigma = est.stderr.max(1e-12);
            let dev = (est.estimate - closed).abs() / sigma;
            worst_sigma = worst_sigma.max(dev);
            if dev > 3.0 {
                return Err(format!(
                    "config {trial}: closed {closed:.6} vs MC {:.6} differs by {dev:.2} sigma",
                    est.estimate
                ));
            }
        }
    }
    // Quadrature oracle on ten configurations.
    let mut rng = stream(cfg, 0x22);
    let mut worst_quad = 0.0f64;
    for trial in 0..10 {
        let two_large = trial >= 5;
        let h: f64 = rng.gen_range(0.5..2.5);
        if two_large {
            let a1 = rng.gen_range(0.1 * h..0.9 * h);
            let a2 = rng.gen_range(0.1 * h..0.9 * h);
            let lo = (h - a1 - a2 + 0.02 * h).max(0.05 * h);
            if lo >= h {
                continue;
            }
            let k = rng.gen_range(lo..h);
            let grid = 2400usize;
            let cell = k / grid as f64;
            let mut hits = [0u64; 2];
            for i in 0..grid {
                let l1 = (i as f64 + 0.5) * cell;
                for j in 0..grid {
                    let l2 = (j as f64 + 0.5) * cell;
                    // player 0 pivotal?
                    let (first, second, s1, s2) = if l1 <= l2 {
                        (l1, l2, a1, a2)
                    } else {
                        (l2, l1, a2, a1)
                    };
                    if first < h && h <= first + s1 {
                        hits[if l1 <= l2 { 0 } else { 1 }] += 1;
                    }
                    if second + s1 < h && h <= second + s1 + s2 {
                        hits[if l1 <= l2 { 1 } else { 0 }] += 1;
                    }
                }
            }
            let total = (grid * grid) as f64;
            for (i, &(a, b)) in [(a1, a2), (a2, a1)].iter().enumerate() {
                let closed = twolarge_oceanic(a, b, k, h);
                let quad = hits[i] as f64 / total;
                let err = (closed - quad).abs();
                worst_quad = worst_quad.max(err);
                if err > 1e-3 {
                    return Err(format!(
                        "2-large quadrature config {trial}: closed {closed:.6} vs quad {quad:.6}"
                    ));
                }
            }
        } else {
            let a = rng.gen_range(0.1 * h..0.9 * h);
            let lo = (h - a + 0.02 * h).max(0.05 * h);
            let k = rng.gen_range(lo..2.0 * h);
            let grid = 400_000usize;
            let cell = k / grid as f64;
            let mut hit = 0u64;
            for i in 0..grid {
                let l1 = (i as f64 + 0.5) * cell;
                if l1 < h && h <= l1 + a {
                    hit += 1;
                }
            }
            let closed = onelarge_oceanic(a, k, h);
            let quad = hit as f64 / grid as f64;
            let err = (closed - quad).abs();
            worst_quad = worst_quad.max(err);
            if err > 1e-3 {
                return Err(format!(
                    "1-large quadrature config {trial}: closed {closed:.6} vs quad {quad:.6}"
                ));
            }
        }
    }
    Ok(format!(
        "50 Monte Carlo configs within 3 sigma (worst {worst_sigma:.2} sigma); \
         10 quadrature configs within 1e-3 (worst {worst_quad:.2e})"
    ))
}

// 3. The h=3, a=2, k=2, l=4 partition is an equilibrium with rewards 1/2 and
// rate 1/4.
fn criterion_03(cfg: &VerifyConfig) -> CriterionResult {
    let game = GameSpec::new(3.0, vec![2.0, 2.0], 8.0).map_err(|e| e.to_string())?;
    let partition = Partition::new(vec![
        Pool::with_ocean([1], 2.0),
        Pool::with_ocean([2], 2.0),
        Pool::ocean(4.0),
    ]);
    let report = check_nash(&partition, &game, Scheme::Shapley, &check_cfg(cfg))
        .map_err(|e| e.to_string())?;
    if !report.is_equilibrium() {
        return Err(format!("partition not an equilibrium: {:?}", report.deviations()));
    }
    let alloc = allocate_rewards(&partition, &game, Scheme::Shapley, &check_cfg(cfg).mc)
        .map_err(|e| e.to_string())?;
    for id in [1usize, 2] {
        if (alloc.atomic_rewards[&id] - 0.5).abs() > 1e-9 {
            return Err(format!(
                "large player {id} reward {} != 1/2",
                alloc.atomic_rewards[&id]
            ));
        }
    }
    for idx in 0..3 {
        if (alloc.oceanic_rate_per_pool[&idx] - 0.25).abs() > 1e-9 {
            return Err(format!(
                "pool {idx} oceanic rate {} != 1/4",
                alloc.oceanic_rate_per_pool[&idx]
            ));
        }
    }
    Ok("equilibrium; larges get 1/2, oceanic rate 1/4 in every pool (within 1e-9)".into())
}

/// Random oceanic game whose ocean exactly fits the construction at the
/// default l = 4h/3: returns (game, number of pure-ocean pools).
fn random_constructible_oceanic(rng: &mut ChaCha8Rng) -> (GameSpec, usize) {
    let h = rng.gen_range(0.5..4.0);
    let n_b = rng.gen_range(1..=4usize);
    let stakes: Vec<f64> = (0..n_b)
        .map(|_| rng.gen_range(0.2501 * h..0.95 * h))
        .collect();
    let l = 4.0 * h / 3.0;
    let t = rng.gen_range(1..=3usize);
    let mass: f64 =
        stakes.iter().map(|&a| (l * (h - a)).sqrt()).sum::<f64>() + t as f64 * l;
    (GameSpec::new(h, stakes, mass).unwrap(), t)
}

// 4. Randomized oceanic constructions: equilibrium, pool-stake bound, and
// the constructive PoS upper bound.
fn criterion_04(cfg: &VerifyConfig) -> CriterionResult {
    let mut rng = stream(cfg, 4);
    let mut worst_ratio = 0.0f64;
    for trial in 0..20 {
        let (game, _) = random_constructible_oceanic(&mut rng);
        let h = game.threshold();
        let c = construct_oceanic_equilibrium(&game, None, 0.0)
            .map_err(|e| format!("trial {trial}: {e}"))?;
        let report = check_nash(&c.partition, &game, Scheme::Shapley, &check_cfg(cfg))
            .map_err(|e| format!("trial {trial}: {e}"))?;
        if !report.is_equilibrium() {
            return Err(format!(
                "trial {trial}: construction not an equilibrium: {:?}",
                report.deviations()
            ));
        }
        for pool in &c.partition.pools {
            let stake = pool_stake(pool, &game).unwrap();
            if stake > 4.0 * h / 3.0 + 1e-9 {
                return Err(format!(
                    "trial {trial}: pool stake {stake} exceeds 4h/3 = {}",
                    4.0 * h / 3.0
                ));
            }
        }
        let opt = opt_oceanic(&game, 10).map_err(|e| e.to_string())?;
        if !opt.exact {
            return Err(format!("trial {trial}: OPT not exact"));
        }
        let w = winning_count(&c.partition, &game);
        let ratio = opt.value as f64 / w as f64;
        worst_ratio = worst_ratio.max(ratio);
        if ratio > 4.0 / 3.0 + 1e-6 {
            return Err(format!(
                "trial {trial}: constructive PoS bound {ratio} exceeds 4/3"
            ));
        }
    }
    Ok(format!(
        "20 games: all constructions are equilibria, pool stakes <= 4h/3 + 1e-9, \
         constructive PoS bound <= 4/3 (worst {worst_ratio:.4})"
    ))
}

// 5. One large a=2, h=3, L=4t+2: OPT = 1 + 4t/3, constructed W = t + 1,
// ratio increasing towards 4/3.
fn criterion_05(_cfg: &VerifyConfig) -> CriterionResult {
    let mut ratios = Vec::new();
    for t in [3usize, 30, 300] {
        let mass = 4.0 * t as f64 + 2.0;
        let game = GameSpec::new(3.0, vec![2.0], mass).map_err(|e| e.to_string())?;
        let opt = opt_oceanic(&game, 10).map_err(|e| e.to_string())?;
        let expected_opt = 1 + 4 * t / 3;
        if opt.value != expected_opt {
            return Err(format!("t={t}: OPT = {} instead of {expected_opt}", opt.value));
        }
        let c = construct_oceanic_equilibrium(&game, None, 0.0).map_err(|e| e.to_string())?;
        let w = winning_count(&c.partition, &game);
        if w != t + 1 {
            return Err(format!("t={t}: constructed W = {w} instead of {}", t + 1));
        }
        ratios.push((t, opt.value as f64 / w as f64));
    }
    if !(ratios[0].1 < ratios[1].1 && ratios[1].1 < ratios[2].1) {
        return Err(format!("ratios not increasing: {ratios:?}"));
    }
    if (ratios[0].1 - 1.25).abs() > 1e-12 {
        return Err(format!("ratio at t=3 is {}, expected exactly 5/4", ratios[0].1));
    }
    let target = 4.0 / 3.0;
    let rel_gap = (target - ratios[2].1) / target;
    if rel_gap > 1e-3 {
        return Err(format!(
            "relative gap to 4/3 at t=300 is {rel_gap:.2e}, above 1e-3"
        ));
    }
    Ok(format!(
        "ratios 5/4 = {:.6}, {:.6}, {:.6} increasing; relative gap to 4/3 at t=300 is {:.2e}",
        ratios[0].1, ratios[1].1, ratios[2].1, rel_gap
    ))
}

// 6. Grid scan of the pairwise-deviation surplus.
fn criterion_06(_cfg: &VerifyConfig) -> CriterionResult {
    let mut min = f64::INFINITY;
    let mut argmin = (0.0, 0.0);
    for i in 1..=200 {
        for j in 1..=200 {
            let (ki, kj) = (i as f64 / 200.0, j as f64 / 200.0);
            let v = f_function(ki, kj).map_err(|e| e.to_string())?;
            if v < min {
                min = v;
                argmin = (ki, kj);
            }
        }
    }
    if min < -1e-12 {
        return Err(format!("grid minimum {min:.3e} at {argmin:?} is negative"));
    }
    let at_min = f_function(2.0 / 3.0, 1.0).map_err(|e| e.to_string())?;
    if at_min.abs() > 1e-12 {
        return Err(format!("f(2/3, 1) = {at_min:.3e}, expected 0 within 1e-12"));
    }
    let dist = ((argmin.0 - 2.0 / 3.0).powi(2) + (argmin.1 - 1.0).powi(2)).sqrt();
    if dist > 0.01 {
        return Err(format!(
            "grid argmin {argmin:?} is {dist:.4} away from (2/3, 1)"
        ));
    }
    Ok(format!(
        "grid min {min:.2e} >= -1e-12 at {argmin:?}; f(2/3, 1) = {at_min:.1e}"
    ))
}

fn two_valued_game(a: i64, h: i64, n_b: usize, n_s: usize) -> GameSpec {
    let mut stakes = vec![a as f64; n_b];
    stakes.extend(std::iter::repeat_n(1.0, n_s));
    GameSpec::new(h as f64, stakes, 0.0).unwrap()
}

// 7. Atomic (k, l) constructions at the population bound, with two large
// players so the cross-pool checks bind.
fn criterion_07(cfg: &VerifyConfig) -> CriterionResult {
    let mut summary = Vec::new();
    for (a, h) in [(2i64, 4i64), (3, 4), (2, 5), (3, 5), (4, 5)] {
        let n_b = 2usize;
        let n_s = ((2 * h - 1) * (2 * h - 1)) as usize + n_b * (h + 1) as usize;
        let game = two_valued_game(a, h, n_b, n_s);
        let c = construct_atomic_kl_equilibrium(&game)
            .map_err(|e| format!("(a={a}, h={h}): {e}"))?;
        let report = check_nash(&c.partition, &game, Scheme::Shapley, &check_cfg(cfg))
            .map_err(|e| format!("(a={a}, h={h}): {e}"))?;
        if !report.is_equilibrium() {
            return Err(format!(
                "(a={a}, h={h}): construction (k={}, l={}) is not an equilibrium: {:?}",
                c.kl.k,
                c.kl.l,
                report.deviations().first()
            ));
        }
        for pool in &c.partition.pools {
            let stake = pool_stake(pool, &game).unwrap();
            if stake > 2.0 * h as f64 + 1e-9 {
                return Err(format!("(a={a}, h={h}): pool stake {stake} exceeds 2h"));
            }
        }
        if !c.conditions.checks.iter().any(|ck| ck.name.contains("cross-pool")) {
            return Err(format!("(a={a}, h={h}): cross-pool condition missing"));
        }
        summary.push(format!("(a={a},h={h})->(k={},l={})", c.kl.k, c.kl.l));
    }
    Ok(format!(
        "all constructions pass check_nash with pool stakes <= 2h: {}",
        summary.join(", ")
    ))
}

// 8. Structure search over the (k, l) family for a=2, h=4: the best
// equilibrium has l = 6 = 3h/2.
fn criterion_08(cfg: &VerifyConfig) -> CriterionResult {
    let (a, h) = (2i64, 4i64);
    let n_s = 62usize;
    let game = two_valued_game(a, h, 1, n_s);
    let bigs = vec![1usize];
    let smalls: Vec<usize> = (2..=n_s + 1).collect();
    let mut best_l: Option<u64> = None;
    let mut tested = 0;
    for k in 2u64..=3 {
        for l in 5u64..=8 {
            let Ok(partition) = equilibrium::build_kl_partition(&bigs, &smalls, k, l) else {
                continue;
            };
            tested += 1;
            let report = check_nash(&partition, &game, Scheme::Shapley, &check_cfg(cfg))
                .map_err(|e| e.to_string())?;
            if report.is_equilibrium() {
                best_l = Some(best_l.map_or(l, |b: u64| b.min(l)));
            }
        }
    }
    if best_l != Some(6) {
        return Err(format!(
            "best (k,l)-equilibrium has l = {best_l:?}, expected 6 (over {tested} candidates)"
        ));
    }
    Ok("over k in {2,3}, l in {5..8}: equilibria exist only at l = 6 = 3h/2, \
        giving ratio 3/2 against pools of stake h"
        .into())
}

// 9. Exhaustive PoS on the running example.
fn criterion_09(cfg: &VerifyConfig) -> CriterionResult {
    let game = two_valued_game(3, 4, 1, 5);
    let caps = PosCaps::default();
    let shapley = price_of_stability(&game, Scheme::Shapley, PosMethod::Exhaustive, caps, &check_cfg(cfg))
        .map_err(|e| e.to_string())?;
    if shapley.ratio != Some((2, 1)) {
        return Err(format!("Shapley PoS ratio {:?}, expected (2, 1)", shapley.ratio));
    }
    let prop = price_of_stability(
        &game,
        Scheme::Proportional,
        PosMethod::Exhaustive,
        caps,
        &check_cfg(cfg),
    )
    .map_err(|e| e.to_string())?;
    if prop.ratio != Some((2, 2)) {
        return Err(format!(
            "proportional PoS ratio {:?}, expected (2, 2)",
            prop.ratio
        ));
    }
    Ok("Shapley PoS = 2 (best equilibrium: grand coalition), proportional PoS = 1; exact".into())
}

// 10. Leximin construction on random atomic games: proportional equilibrium
// with W = OPT.
fn criterion_10(cfg: &VerifyConfig) -> CriterionResult {
    let mut rng = stream(cfg, 10);
    let mut done = 0;
    let mut guard = 0;
    while done < 50 {
        guard += 1;
        if guard > 2000 {
            return Err("could not generate 50 instances".into());
        }
        let n = rng.gen_range(3..=10usize);
        let stakes: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=5) as f64).collect();
        let max = stakes.iter().cloned().fold(0.0, f64::max) as i64;
        let total: f64 = stakes.iter().sum();
        if total < (max + 1) as f64 {
            continue;
        }
        let h = rng.gen_range(max + 1..=total as i64);
        let game = GameSpec::new(h as f64, stakes, 0.0).map_err(|e| e.to_string())?;
        let c = construct_leximin_optimal(&game, 10).map_err(|e| e.to_string())?;
        let opt = opt_atomic(&game, 20);
        if winning_count(&c.partition, &game) != opt.value {
            return Err(format!(
                "instance {done}: leximin W = {} but OPT = {}",
                winning_count(&c.partition, &game),
                opt.value
            ));
        }
        let report = check_nash(&c.partition, &game, Scheme::Proportional, &check_cfg(cfg))
            .map_err(|e| e.to_string())?;
        if !report.is_equilibrium() {
            return Err(format!(
                "instance {done}: leximin partition is not a proportional equilibrium"
            ));
        }
        done += 1;
    }
    Ok("50 random games: leximin partition is a proportional equilibrium with W = OPT".into())
}

// 11. Water filling vs oracles, plus the exact 6/11 witness.
fn criterion_11(cfg: &VerifyConfig) -> CriterionResult {
    let mut rng = stream(cfg, 11);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let m = rng.gen_range(1..=5usize);
        let stakes: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..10.0)).collect();
        let budget = rng.gen_range(0.1..8.0);
        let wf = waterfill_proportional(&stakes, budget);
        // Convex oracle: bisection on the common marginal.
        let oracle = waterfill_bisection_oracle(&stakes, budget);
        let gap = (wf.payoff - oracle).abs();
        worst = worst.max(gap);
        if gap > 1e-6 {
            return Err(format!(
                "trial {trial}: waterfill payoff {} vs convex oracle {oracle} (gap {gap:.2e})",
                wf.payoff
            ));
        }
        if m <= 3 {
            let grid = waterfill_grid_oracle(&stakes, budget, 60);
            if wf.payoff < grid - 1e-6 {
                return Err(format!(
                    "trial {trial}: waterfill payoff {} below refined grid {grid}",
                    wf.payoff
                ));
            }
        }
    }
    // Exact witness: pools {6,6} and {6,1,1,1,1} at h = 10.
    let five_elevenths = entrant_reward_exact(&[6], 5, 10, Scheme::Proportional).unwrap();
    let one_eleventh = entrant_reward_exact(&[6, 1, 1, 1, 1], 1, 10, Scheme::Proportional).unwrap();
    let total = five_elevenths + one_eleventh;
    if total != rat(6, 11) {
        return Err(format!("witness payoff {total} != 6/11"));
    }
    if total <= rat(1, 2) {
        return Err("witness payoff 6/11 does not exceed the baseline 1/2".into());
    }
    Ok(format!(
        "100 instances within 1e-6 of the convex oracle (worst gap {worst:.2e}); \
         witness payoff exactly 6/11 > 1/2"
    ))
}

fn waterfill_bisection_oracle(stakes: &[f64], budget: f64) -> f64 {
    // spend(mu) = sum_j max(0, sqrt(m_j/mu) - m_j), decreasing in mu
    let spend = |mu: f64| -> f64 {
        stakes
            .iter()
            .map(|&m| ((m / mu).sqrt() - m).max(0.0))
            .sum()
    };
    let mut lo = 1e-18;
    let mut hi = stakes.iter().map(|&m| 1.0 / m).fold(0.0f64, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spend(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    stakes
        .iter()
        .map(|&m| {
            let s = ((m / mu).sqrt() - m).max(0.0);
            if s > 0.0 {
                s / (m + s)
            } else {
                0.0
            }
        })
        .sum()
}

fn waterfill_grid_oracle(stakes: &[f64], budget: f64, steps: usize) -> f64 {
    let payoff = |alloc: &[f64]| -> f64 {
        stakes
            .iter()
            .zip(alloc)
            .map(|(&m, &s)| if s > 0.0 { s / (m + s) } else { 0.0 })
            .sum()
    };
    let m = stakes.len();
    let mut best = vec![0.0; m];
    let mut best_payoff = 0.0;
    let mut alloc = vec![0.0; m];
    fn rec(
        i: usize,
        rem: f64,
        step: f64,
        alloc: &mut Vec<f64>,
        best: &mut Vec<f64>,
        best_payoff: &mut f64,
        payoff: &dyn Fn(&[f64]) -> f64,
    ) {
        if i == alloc.len() - 1 {
            alloc[i] = rem;
            let p = payoff(alloc);
            if p > *best_payoff {
                *best_payoff = p;
                best.clone_from(alloc);
            }
            return;
        }
        let mut x = 0.0;
        while x <= rem + 1e-12 {
            alloc[i] = x.min(rem);
            rec(i + 1, rem - alloc[i], step, alloc, best, best_payoff, payoff);
            x += step;
        }
    }
    rec(
        0,
        budget,
        budget / steps as f64,
        &mut alloc,
        &mut best,
        &mut best_payoff,
        &payoff,
    );
    // local refinement of the grid incumbent
    let mut width = budget / steps as f64;
    for _ in 0..40 {
        width /= 2.0;
        let mut improved = false;
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let delta = width.min(best[i]);
                if delta <= 0.0 {
                    continue;
                }
                let mut trial = best.clone();
                trial[i] -= delta;
                trial[j] += delta;
                let p = payoff(&trial);
                if p > best_payoff {
                    best_payoff = p;
                    best = trial;
                    improved = true;
                }
            }
        }
        if !improved && width < 1e-12 {
            break;
        }
    }
    best_payoff
}

// 12. Sybil-proofness of the Shapley scheme at constructed oceanic
// equilibria.
fn criterion_12(cfg: &VerifyConfig) -> CriterionResult {
    let mut rng = stream(cfg, 12);
    let sybil_cfg = SybilConfig {
        grid_steps: 200,
        improve_tol: 1e-6,
        mc: McConfig {
            samples: cfg.samples,
            seed: cfg.seed,
        },
    };
    let mut players = 0;
    for trial in 0..20 {
        let (game, _) = random_constructible_oceanic(&mut rng);
        let c = construct_oceanic_equilibrium(&game, None, 0.0)
            .map_err(|e| format!("trial {trial}: {e}"))?;
        let audits = audit_sybil_proofness(&game, &c.partition, Scheme::Shapley, &sybil_cfg)
            .map_err(|e| format!("trial {trial}: {e}"))?;
        for audit in audits {
            players += 1;
            if audit.best_payoff > audit.baseline + 1e-6 {
                return Err(format!(
                    "trial {trial}: player {} improves from {} to {} by splitting {:?}",
                    audit.player, audit.baseline, audit.best_payoff, audit.best_strategy
                ));
            }
        }
    }
    Ok(format!(
        "20 games, {players} players: no Sybil split improves beyond 1e-6 \
         (grid step a_i/200 with refinement)"
    ))
}

// 13. Sybil vulnerability of proportional sharing at leximin equilibria with
// total stake not a multiple of h.
fn criterion_13(cfg: &VerifyConfig) -> CriterionResult {
    let mut rng = stream(cfg, 13);
    let sybil_cfg = SybilConfig::default();
    let mut done = 0;
    let mut guard = 0;
    while done < 20 {
        guard += 1;
        if guard > 4000 {
            return Err("could not generate 20 instances".into());
        }
        let n = rng.gen_range(4..=8usize);
        let stakes: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=4) as f64).collect();
        let total: f64 = stakes.iter().sum();
        let max = stakes.iter().cloned().fold(0.0, f64::max) as i64;
        let h_lo = (max + 1).max((total / 3.0).ceil() as i64 + 1);
        let h_hi = (total / 2.0).floor() as i64;
        if h_lo > h_hi {
            continue;
        }
        let h = rng.gen_range(h_lo..=h_hi);
        if (total as i64) % h == 0 {
            continue;
        }
        let game = GameSpec::new(h as f64, stakes.clone(), 0.0).map_err(|e| e.to_string())?;
        if opt_atomic(&game, 20).value != 2 {
            continue;
        }
        let c = construct_leximin_optimal(&game, 10).map_err(|e| e.to_string())?;
        let mut pool_stakes: Vec<(usize, f64)> = c
            .partition
            .pools
            .iter()
            .enumerate()
            .map(|(i, p)| (i, pool_stake(p, &game).unwrap()))
            .collect();
        pool_stakes.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap());
        let (max_idx, l1) = pool_stakes[0];
        let (min_idx, l2) = pool_stakes[1];
        // audit a player in the max pool whose departure keeps it winning
        let Some(&player) = c.partition.pools[max_idx]
            .atomic_members
            .iter()
            .find(|&&id| l1 - game.stake(id).unwrap() >= h as f64)
        else {
            continue;
        };
        let a_i = game.stake(player).unwrap();
        let audit = sybil_best_response(&game, &c.partition, player, Scheme::Proportional, &sybil_cfg)
            .map_err(|e| e.to_string())?;
        if audit.verdict != SybilVerdict::Vulnerable {
            return Err(format!(
                "instance {done} (h={h}, stakes {stakes:?}): expected a vulnerability, got {:?}",
                audit.verdict
            ));
        }
        let delta = l1 - l2;
        let bound = (l2 * (a_i + delta) + delta * delta) / (2.0 * l2 + 2.0 * delta - a_i);
        let x = audit
            .best_strategy
            .allocations
            .get(&min_idx)
            .copied()
            .unwrap_or(0.0);
        if !(x > 0.0 && x <= bound + 1e-9) {
            return Err(format!(
                "instance {done}: witness x = {x} outside (0, {bound}]"
            ));
        }
        done += 1;
    }
    Ok("20 games: audits find strictly improving splits, each witness x within \
        the (l2(a+delta)+delta^2)/(2 l2+2 delta-a) bound"
        .into())
}

// 14. Proportional-to-squares admits no equilibrium with more than two
// winning pools on the a=4, h=5 instance.
fn criterion_14(_cfg: &VerifyConfig) -> CriterionResult {
    let game = two_valued_game(4, 5, 1, 17);
    let equilibria = enumerate_structured_equilibria(&game, Scheme::PropSquares)
        .map_err(|e| e.to_string())?;
    let best_w = equilibria.first().map(|e| e.1).unwrap_or(0);
    if best_w != 2 {
        return Err(format!(
            "best equilibrium has {best_w} pools, expected 2 (equilibria: {equilibria:?})"
        ));
    }
    let opt = opt_atomic(&game, 20);
    if opt.value != 4 {
        return Err(format!("OPT = {} instead of 4", opt.value));
    }
    Ok(format!(
        "structure search over all {}-player compositions: no equilibrium with more than \
         2 winning pools; OPT = 4, so PoS = 2 = (h-1)/2",
        game.n()
    ))
}

// 15. Square-root scheme: constructions pass check_nash with stakes <= 2h;
// the unit-split attack values match for three (a, h) pairs.
fn criterion_15(cfg: &VerifyConfig) -> CriterionResult {
    for (a, h) in [(2i64, 4i64), (3, 5)] {
        let k_guess = ((h as f64) - (a as f64).sqrt() + 1.0).ceil() as usize;
        let n_s = (h * h) as usize + k_guess;
        let game = two_valued_game(a, h, 1, n_s);
        let c = construct_sqrt_kl_equilibrium(&game).map_err(|e| format!("(a={a},h={h}): {e}"))?;
        let report = check_nash(&c.partition, &game, Scheme::PropSqrt, &check_cfg(cfg))
            .map_err(|e| e.to_string())?;
        if !report.is_equilibrium() {
            return Err(format!("(a={a},h={h}): sqrt construction is not an equilibrium"));
        }
        for pool in &c.partition.pools {
            if pool_stake(pool, &game).unwrap() > 2.0 * h as f64 + 1e-9 {
                return Err(format!("(a={a},h={h}): pool stake above 2h"));
            }
        }
    }
    // Unit-split attack against (k, l)-equilibria with k = ceil(h - sqrt(a) - 1).
    for (a, h) in [(4i64, 6i64), (4, 9), (9, 12)] {
        let (af, hf) = (a as f64, h as f64);
        let k = (hf - af.sqrt() - 1.0).ceil() as usize;
        let n_b = a as usize + 1;
        let n_s = n_b * k;
        let game = two_valued_game(a, h, n_b, n_s);
        // one Type A pool per large player
        let mut pools = Vec::new();
        for b in 0..n_b {
            let mut members = vec![b + 1];
            let start = n_b + b * k;
            members.extend((start + 1)..=(start + k));
            pools.push(Pool::atomic(members));
        }
        let partition = Partition::new(pools);
        let baseline = af.sqrt() / (af.sqrt() + k as f64);
        let expected_baseline = af.sqrt() / (af.sqrt() + hf - af.sqrt().ceil() - 1.0);
        if (baseline - expected_baseline).abs() > 1e-12 {
            return Err(format!("(a={a},h={h}): baseline {baseline} != {expected_baseline}"));
        }
        let mut allocations = std::collections::BTreeMap::new();
        for target in 1..n_b {
            allocations.insert(target, 1.0);
        }
        let strategy = SybilStrategy {
            player: 1,
            allocations,
        };
        let attack = sybil_payoff(
            &game,
            &partition,
            &strategy,
            Scheme::PropSqrt,
            &McConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        let expected_attack = af / (af.sqrt() + hf - af.sqrt().ceil());
        if (attack - expected_attack).abs() > 1e-12 {
            return Err(format!(
                "(a={a},h={h}): attack payoff {attack} != {expected_attack}"
            ));
        }
        if attack <= baseline {
            return Err(format!(
                "(a={a},h={h}): unit-split attack {attack} does not beat baseline {baseline}"
            ));
        }
    }
    Ok("constructions are equilibria with pool stakes <= 2h; unit-split attack payoff \
        a/(sqrt(a)+h-ceil(sqrt(a))) beats sqrt(a)/(sqrt(a)+h-ceil(sqrt(a))-1) for \
        (a,h) in {(4,6),(4,9),(9,12)}"
        .into())
}

// 16. Very large players: m-way splits at the constructed equilibrium never
// beat lambda solo pools; equality only at k = h.
fn criterion_16(_cfg: &VerifyConfig) -> CriterionResult {
    let mut lines = Vec::new();
    for lambda in [2u64, 3] {
        for m in [2u64, 3, 4] {
            let r = big_player_split_analysis(lambda as f64, 1.0, 4.0 / 3.0, m)
                .map_err(|e| e.to_string())?;
            if r.shapley_split_payoff > r.solo_payoff + 1e-9 {
                return Err(format!(
                    "lambda={lambda}, m={m}: split payoff {} exceeds solo {}",
                    r.shapley_split_payoff, r.solo_payoff
                ));
            }
            if r.proportional_split_payoff > r.solo_payoff + 1e-9 {
                return Err(format!(
                    "lambda={lambda}, m={m}: proportional split beats solo"
                ));
            }
            let equality = (r.shapley_split_payoff - r.solo_payoff).abs() <= 1e-9;
            let k_is_h = (r.k - 1.0).abs() <= 1e-9;
            if equality != k_is_h {
                return Err(format!(
                    "lambda={lambda}, m={m}: equality holds iff k = h violated (k = {})",
                    r.k
                ));
            }
            lines.push(format!("l={lambda},m={m}:{:.4}", r.shapley_split_payoff));
        }
    }
    Ok(format!(
        "split payoffs <= lambda with equality only at k = h (m = 4): {}",
        lines.join(" ")
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criterion_names_cover_all_ids() {
        assert_eq!(NAMES.len(), 16);
    }

    #[test]
    fn fast_criteria_pass() {
        let cfg = VerifyConfig {
            samples: 20_000,
            ..VerifyConfig::default()
        };
        for id in [1usize, 3, 5, 6, 9, 16] {
            let outcome = run_criterion(id, &cfg);
            assert!(outcome.passed, "criterion {id}: {}", outcome.details);
        }
    }
}
