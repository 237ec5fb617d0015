//! Cross-module invariants: the leximin construction against exhaustive
//! enumeration, the Shapley premium at constructed equilibria, the
//! split-threshold curve for proportional sharing, and Price of Stability
//! monotonicity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use poolform_core::equilibrium::{
    construct_leximin_optimal, construct_oceanic_equilibrium, enumerate_equilibria, CheckConfig,
};
use poolform_core::model::{GameSpec, Partition, Pool, Scheme};
use poolform_core::rewards::McConfig;
use poolform_core::sybil::{concavity_probe, sybil_payoff, SybilStrategy};
use poolform_core::welfare::{opt_atomic, price_of_stability, winning_count, PosCaps, PosMethod};

#[test]
fn leximin_w_matches_best_enumerated_equilibrium() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let cfg = CheckConfig::default();
    for _ in 0..25 {
        let n = rng.gen_range(3..=8usize);
        let stakes: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=4) as f64).collect();
        let max = stakes.iter().cloned().fold(0.0, f64::max) as i64;
        let total: f64 = stakes.iter().sum();
        if total < (max + 1) as f64 {
            continue;
        }
        let h = rng.gen_range(max + 1..=total as i64) as f64;
        let game = GameSpec::new(h, stakes, 0.0).unwrap();
        let leximin = construct_leximin_optimal(&game, 10).unwrap();
        let best_w = enumerate_equilibria(&game, Scheme::Proportional, 10, &cfg)
            .unwrap()
            .first()
            .map(|e| e.1)
            .unwrap_or(0);
        let opt = opt_atomic(&game, 20).value;
        assert_eq!(winning_count(&leximin.partition, &game), best_w);
        assert_eq!(best_w, opt);
    }
}

#[test]
fn proportional_pos_is_one_on_solvable_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let cfg = CheckConfig::default();
    let caps = PosCaps::default();
    for _ in 0..20 {
        let n = rng.gen_range(3..=8usize);
        let stakes: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=4) as f64).collect();
        let max = stakes.iter().cloned().fold(0.0, f64::max) as i64;
        let total: f64 = stakes.iter().sum();
        if total < (max + 1) as f64 {
            continue;
        }
        let h = rng.gen_range(max + 1..=total as i64) as f64;
        let game = GameSpec::new(h, stakes, 0.0).unwrap();
        let exhaustive =
            price_of_stability(&game, Scheme::Proportional, PosMethod::Exhaustive, caps, &cfg)
                .unwrap();
        assert_eq!(exhaustive.pos, Some(1.0));
        // The constructive bound can never undercut the exhaustive optimum.
        let constructive = price_of_stability(
            &game,
            Scheme::Proportional,
            PosMethod::ConstructiveUpperBound,
            caps,
            &cfg,
        )
        .unwrap();
        assert!(constructive.pos.unwrap() >= exhaustive.pos.unwrap() - 1e-12);
        assert!(constructive.upper_bound_only);
    }
}

#[test]
fn large_player_premium_over_proportional_at_constructed_equilibrium() {
    // At h = 1, l = 4/3 the constructed Shapley reward of a large player
    // exceeds her proportional share exactly by premium(k_i).
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for _ in 0..10 {
        let n_b = rng.gen_range(1..=3usize);
        let stakes: Vec<f64> = (0..n_b).map(|_| rng.gen_range(0.26..0.95)).collect();
        let l = 4.0 / 3.0;
        let mass: f64 = stakes.iter().map(|&a| (l * (1.0 - a)).sqrt()).sum::<f64>() + l;
        let game = GameSpec::new(1.0, stakes.clone(), mass).unwrap();
        let c = construct_oceanic_equilibrium(&game, None, 0.0).unwrap();
        let alloc = poolform_core::allocate_rewards(
            &c.partition,
            &game,
            Scheme::Shapley,
            &McConfig::default(),
        )
        .unwrap();
        for (id, &a) in (1..=n_b).zip(stakes.iter()) {
            let k = c.params.per_player_k[&id];
            let shapley = alloc.atomic_rewards[&id];
            let proportional = a / (a + k);
            let premium = poolform_core::shapley_premium(k).unwrap();
            assert!(
                shapley >= proportional - 1e-12,
                "player {id}: Shapley below proportional share"
            );
            assert!(
                (shapley - proportional - premium).abs() < 1e-9,
                "player {id}: gap {} differs from premium {}",
                shapley - proportional,
                premium
            );
        }
    }
}

#[test]
fn proportional_split_threshold_curve() {
    // Two pools l1 >= l2: committing x to the smaller pool improves the
    // player's payoff exactly for x in (0, bound), with
    // bound = (l2 (a + delta) + delta^2) / (2 l2 + 2 delta - a).
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mc = McConfig::default();
    for _ in 0..40 {
        let h: f64 = rng.gen_range(1.0..4.0);
        let l2: f64 = rng.gen_range(h..3.0 * h);
        let l1: f64 = l2 + rng.gen_range(0.0..h);
        let a: f64 = rng.gen_range(0.2 * h..0.9 * h).min(l1 - h - 1e-6);
        if a <= 0.05 {
            continue;
        }
        let game = GameSpec::new(h, vec![a], l1 - a + l2).unwrap();
        let partition = Partition::new(vec![Pool::with_ocean([1], l1 - a), Pool::ocean(l2)]);
        let baseline = sybil_payoff(
            &game,
            &partition,
            &SybilStrategy::identity(1, 0, a),
            Scheme::Proportional,
            &mc,
        )
        .unwrap();
        let delta = l1 - l2;
        let bound = (l2 * (a + delta) + delta * delta) / (2.0 * l2 + 2.0 * delta - a);
        let payoff_at = |x: f64| {
            let strategy = SybilStrategy {
                player: 1,
                allocations: [(0, a - x), (1, x)].into(),
            };
            sybil_payoff(&game, &partition, &strategy, Scheme::Proportional, &mc).unwrap()
        };
        for step in 1..=20 {
            let x = bound.min(a) * step as f64 / 20.0;
            if x <= 0.0 || x >= a {
                continue;
            }
            assert!(
                payoff_at(x) >= baseline - 1e-12,
                "x = {x} inside the bound should not hurt"
            );
        }
        // slightly above the bound (keeping the home pool winning) it hurts
        if bound < a {
            let slack = (a - bound).min(l1 - h - bound);
            if slack > 1e-6 {
                let x = bound + 0.5 * slack;
                if l1 - x >= h {
                    assert!(
                        payoff_at(x) < baseline,
                        "x = {x} above bound {bound} should hurt (l1={l1}, l2={l2}, a={a})"
                    );
                }
            }
        }
    }
}

#[test]
fn linear_payment_split_yields_no_gain() {
    // Joining a pure-ocean pool of mass exactly h makes the Shapley payment
    // linear (x/h); the duplicated-pool split then gains nothing and the
    // probe emits no witness.
    let h = 2.0;
    let game = GameSpec::new(h, vec![1.0], 2.0 * h).unwrap();
    let profile = poolform_core::PoolProfile {
        co_stakes: vec![],
        ocean: h,
    };
    let report = concavity_probe(Scheme::Shapley, &profile, &game, 64).unwrap();
    assert!(report.witness.is_none(), "{:?}", report.witness);
    for (x, second) in &report.samples {
        assert!(second.abs() < 1e-9, "nonlinear at {x}: {second}");
    }
}
