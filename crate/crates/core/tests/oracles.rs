//! Oracle agreement: every closed form is checked against an independent
//! route — permutation enumeration for atomic Shapley, Monte Carlo and
//! quadrature for the oceanic formulas, grid search and a convex solver for
//! water filling.

use num::{BigRational, FromPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use poolform_core::model::{GameSpec, Partition, Pool, Scheme};
use poolform_core::rewards::{
    shapley_atomic_onelarge, shapley_atomic_twolarge_equal, shapley_dp_exact, shapley_enum_exact,
    shapley_oceanic_closed, shapley_oceanic_mc, McConfig,
};
use poolform_core::sybil::{sybil_payoff, SybilStrategy};
use poolform_core::{check_nash, oceanic_kl_conditions, CheckConfig, KlParams};

#[test]
fn dp_equals_enumeration_on_random_integer_pools() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..200 {
        let n = rng.gen_range(1..=8usize);
        let stakes: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=6)).collect();
        let total: i64 = stakes.iter().sum();
        let h = rng.gen_range(1..=total.max(1));
        let dp = shapley_dp_exact(&stakes, h);
        let en = shapley_enum_exact(&stakes, h).unwrap();
        assert_eq!(dp, en, "stakes {stakes:?}, h {h}");
    }
}

#[test]
fn onelarge_closed_form_matches_enumeration() {
    for a in 2i64..=5 {
        for h in (a + 1)..=8 {
            for k in ((h - a).max(1) as u64)..=8 {
                let mut stakes = vec![a];
                stakes.extend(std::iter::repeat_n(1, k as usize));
                if stakes.len() > 9 {
                    continue;
                }
                let en = shapley_enum_exact(&stakes, h).unwrap();
                let (large, small) = shapley_atomic_onelarge(k, a as f64, h as f64).unwrap();
                let enl = rational_f64(&en[0]);
                let ens = rational_f64(&en[1]);
                assert!((large - enl).abs() < 1e-12, "large a={a} h={h} k={k}");
                assert!((small - ens).abs() < 1e-12, "small a={a} h={h} k={k}");
            }
        }
    }
}

#[test]
fn twolarge_closed_form_matches_enumeration() {
    for a in 1i64..=4 {
        for h in (a + 1)..=7 {
            for k in 0u64..=7 {
                if k as i64 + 2 * a < h || k as usize + 2 > 9 {
                    continue;
                }
                let mut stakes = vec![a, a];
                stakes.extend(std::iter::repeat_n(1, k as usize));
                let en = shapley_enum_exact(&stakes, h).unwrap();
                let v = shapley_atomic_twolarge_equal(k, a as f64, h as f64).unwrap();
                assert!(
                    (v - rational_f64(&en[0])).abs() < 1e-12,
                    "a={a} h={h} k={k}: {} vs {}",
                    v,
                    en[0]
                );
            }
        }
    }
}

#[test]
fn unit_pool_symmetry() {
    // Fact about pools of equals: everyone gets 1/t.
    for t in 4..=8usize {
        let stakes = vec![1i64; t];
        let en = shapley_enum_exact(&stakes, 4).unwrap();
        for v in en {
            assert_eq!(v, BigRational::new(1.into(), (t as i64).into()));
        }
    }
}

fn rational_f64(r: &BigRational) -> f64 {
    use num::ToPrimitive;
    r.to_f64().unwrap()
}

#[test]
fn oceanic_closed_matches_monte_carlo_on_random_configs() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for trial in 0..30 {
        let h: f64 = rng.gen_range(0.5..3.0);
        let two = trial % 2 == 0;
        let (stakes, k) = if two {
            let a1 = rng.gen_range(0.1 * h..0.9 * h);
            let a2 = rng.gen_range(0.1 * h..0.9 * h);
            let lo = (h - a1 - a2 + 0.02 * h).max(0.05 * h);
            (vec![a1, a2], rng.gen_range(lo..h))
        } else {
            let a = rng.gen_range(0.1 * h..0.9 * h);
            let lo = (h - a + 0.02 * h).max(0.05 * h);
            (vec![a], rng.gen_range(lo..2.0 * h))
        };
        let game = GameSpec::new(h, stakes.clone(), k).unwrap();
        let ids: Vec<usize> = (1..=stakes.len()).collect();
        let pool = Pool::with_ocean(ids.clone(), k);
        let closed = shapley_oceanic_closed(&pool, &game).unwrap();
        let mc = shapley_oceanic_mc(&pool, &game, 400_000, 7 + trial).unwrap();
        for id in ids {
            let est = &mc.mc.as_ref().unwrap()[&id];
            let sigma = est.stderr.max(1e-9);
            assert!(
                (closed.atomic[&id] - est.estimate).abs() <= 4.0 * sigma,
                "trial {trial}: closed {} vs mc {}",
                closed.atomic[&id],
                est.estimate
            );
        }
    }
}

#[test]
fn three_large_monte_carlo_matches_cube_quadrature() {
    // a = (0.5, 0.5, 0.5), h = 1, k = 1: integrate the pivot indicator over
    // the cube of arrival times.
    let stakes = [0.5f64, 0.5, 0.5];
    let (h, k) = (1.0f64, 1.0f64);
    let grid = 320usize;
    let mut hits = [0u64; 3];
    for i in 0..grid {
        for j in 0..grid {
            for l in 0..grid {
                let arr = [
                    ((i as f64 + 0.5) / grid as f64 * k, 0usize),
                    ((j as f64 + 0.5) / grid as f64 * k, 1),
                    ((l as f64 + 0.5) / grid as f64 * k, 2),
                ];
                let mut sorted = arr;
                sorted.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
                let mut preceding = 0.0;
                for &(t, idx) in &sorted {
                    let before = preceding + t;
                    if before < h && h <= before + stakes[idx] {
                        hits[idx] += 1;
                    }
                    preceding += stakes[idx];
                }
            }
        }
    }
    let total = (grid * grid * grid) as f64;
    let game = GameSpec::new(h, stakes.to_vec(), k).unwrap();
    let pool = Pool::with_ocean([1, 2, 3], k);
    let mc = shapley_oceanic_mc(&pool, &game, 1_000_000, 99).unwrap();
    for (i, id) in (1..=3usize).enumerate() {
        let quad = hits[i] as f64 / total;
        let est = &mc.mc.as_ref().unwrap()[&id];
        assert!(
            (quad - est.estimate).abs() <= 3.0 * est.stderr + 5e-3,
            "player {id}: quad {quad} vs mc {}",
            est.estimate
        );
    }
}

#[test]
fn twolarge_oceanic_reward_decreasing_in_comember_stake() {
    // At fixed (b, k), the two-large reward is weakly decreasing in the
    // co-member's stake over the formula's domain k >= h - a_j.
    let h = 1.0;
    for &b in &[0.2f64, 0.5, 0.8] {
        for &k in &[0.3f64, 0.6, 0.9] {
            let mut prev = f64::INFINITY;
            for step in 0..=100 {
                let aj = step as f64 / 100.0 * 0.999;
                if k < h - aj || b + aj + k < h {
                    continue; // outside the closed form's validity domain
                }
                let game = GameSpec::new(h, vec![b, aj.max(1e-9)], k).unwrap();
                let pool = Pool::with_ocean([1, 2], k);
                let r = shapley_oceanic_closed(&pool, &game).unwrap();
                let v = r.atomic[&1];
                assert!(
                    v <= prev + 1e-12,
                    "b={b} k={k}: reward increased at a_j={aj}: {v} > {prev}"
                );
                prev = v;
            }
        }
    }
}

#[test]
fn oceanic_conditions_iff_check_nash() {
    // On randomized (k_i, l) configurations the
    // condition checker and the deviation enumerator agree.
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let cfg = CheckConfig::default();
    let mut both_pass = 0;
    let mut both_fail = 0;
    for _ in 0..60 {
        let h = 1.0;
        let l: f64 = rng.gen_range(1.0..2.0);
        let n_b = rng.gen_range(1..=3usize);
        let mut stakes = Vec::new();
        let mut ks = Vec::new();
        for _ in 0..n_b {
            let a: f64 = rng.gen_range(0.3..0.95);
            // half the time the exact equilibrium k, half a perturbed one
            let exact_k = (l * (h - a)).sqrt();
            let k = if rng.gen_bool(0.5) {
                exact_k
            } else {
                (exact_k * rng.gen_range(0.85..1.15)).min(h)
            };
            if k > h || a + k < h {
                continue;
            }
            stakes.push(a);
            ks.push(k);
        }
        if stakes.is_empty() {
            continue;
        }
        let t = 2usize;
        let mass: f64 = ks.iter().sum::<f64>() + t as f64 * l;
        let game = GameSpec::new(h, stakes.clone(), mass).unwrap();
        let mut pools: Vec<Pool> = (0..stakes.len())
            .map(|i| Pool::with_ocean([i + 1], ks[i]))
            .collect();
        for _ in 0..t {
            pools.push(Pool::ocean(l));
        }
        let partition = Partition::new(pools);
        let params = KlParams {
            per_player_k: (1..=stakes.len()).map(|i| (i, ks[i - 1])).collect(),
            l,
        };
        let conditions = match oceanic_kl_conditions(&params, &game, 1e-9) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let nash = check_nash(&partition, &game, Scheme::Shapley, &cfg).unwrap();
        // The checker uses an exact equality for the ocean-rate constraint;
        // allow the float construction a little slack in the comparison by
        // re-evaluating at a loose tolerance.
        let loose = oceanic_kl_conditions(&params, &game, 1e-7).unwrap();
        if conditions.pass() {
            assert!(
                nash.is_equilibrium(),
                "conditions pass but deviations exist: {:?}",
                nash.deviations().first()
            );
            both_pass += 1;
        }
        if !loose.pass() {
            assert!(
                !nash.is_equilibrium(),
                "conditions fail but no deviation found: {loose:?}"
            );
            both_fail += 1;
        }
    }
    assert!(both_pass >= 5, "too few passing configurations: {both_pass}");
    assert!(both_fail >= 5, "too few failing configurations: {both_fail}");
}

#[test]
fn identity_strategy_reproduces_partition_payoff() {
    let game = GameSpec::new(4.0, vec![3.0, 2.0, 1.0, 1.0, 1.0], 0.0).unwrap();
    let partition = Partition::new(vec![Pool::atomic([1, 3]), Pool::atomic([2, 4, 5])]);
    for scheme in [Scheme::Shapley, Scheme::Proportional, Scheme::PropSquares, Scheme::PropSqrt] {
        let alloc = poolform_core::allocate_rewards(
            &partition,
            &game,
            scheme,
            &McConfig::default(),
        )
        .unwrap();
        for player in 1..=5usize {
            let origin = partition.pool_of(player).unwrap();
            let strategy =
                SybilStrategy::identity(player, origin, game.stake(player).unwrap());
            let payoff =
                sybil_payoff(&game, &partition, &strategy, scheme, &McConfig::default()).unwrap();
            assert!(
                (payoff - alloc.atomic_rewards[&player]).abs() < 1e-12,
                "{scheme} player {player}"
            );
        }
    }
}

#[test]
fn shapley_premium_matches_reward_gap_on_grid() {
    // premium(k) = equilibrium Shapley reward minus proportional share at
    // h = 1, l = 4/3, a = 1 - 3k^2/4.
    for step in 1..=40 {
        let k = step as f64 / 40.0;
        let a = 1.0 - 0.75 * k * k;
        let gap = (k + a - 1.0) / k - a / (a + k);
        let premium = poolform_core::shapley_premium(k).unwrap();
        assert!((premium - gap).abs() < 1e-12, "k = {k}");
        assert!(premium >= -1e-15);
    }
}

#[test]
fn kstar_below_h_minus_2_on_its_domain() {
    // k* <= h - 2 whenever a + 1 <= h <= a^2 - 2a + 2.
    for a in 3i64..=8 {
        for h in (a + 1)..=(a * a - 2 * a + 2) {
            let v = poolform_core::kstar(a as f64, h as f64).unwrap();
            assert!(
                v <= (h - 2) as f64 + 1e-12,
                "kstar({a}, {h}) = {v} exceeds h-2"
            );
        }
    }
}

#[test]
fn enumeration_limit_is_enforced() {
    let stakes = vec![1i64; 10];
    assert!(shapley_enum_exact(&stakes, 4).is_err());
}

#[test]
fn mc_estimate_serializes_with_reproducibility_fields() {
    let game = GameSpec::new(3.0, vec![2.0], 2.0).unwrap();
    let pool = Pool::with_ocean([1], 2.0);
    let r = shapley_oceanic_mc(&pool, &game, 1000, 5).unwrap();
    let est = &r.mc.as_ref().unwrap()[&1];
    let json = serde_json::to_value(est).unwrap();
    for field in ["estimate", "stderr", "samples", "seed"] {
        assert!(json.get(field).is_some(), "missing {field}");
    }
    assert_eq!(json["samples"], 1000);
    assert_eq!(json["seed"], 5);
}

#[test]
fn float_rationals_compare() {
    // guard for the exactness contract used across the oracle tests
    assert_eq!(BigRational::from_f64(0.5).unwrap(), BigRational::new(1.into(), 2.into()));
}
