//! Decentralization metrics: OPT (maximum number of winning pools, the dual
//! bin packing problem), winning-pool counting, and Price of Stability.

use serde::Serialize;

use crate::equilibrium::{
    construct_atomic_kl_equilibrium, construct_leximin_optimal, construct_oceanic_equilibrium,
    construct_sqrt_kl_equilibrium, enumerate_equilibria, enumerate_structured_equilibria,
    CheckConfig, EquilibriumError,
};
use crate::model::{is_winning, GameSpec, Partition, PlayerId, Pool, Scheme};

/// Result of an OPT computation. `exact` is false when the instance exceeded
/// the solver cap and only the trivial `floor(total/h)` upper bound is
/// reported.
#[derive(Debug, Clone)]
pub struct OptResult {
    pub value: usize,
    pub witness: Option<Partition>,
    pub exact: bool,
}

/// Maximum number of winning pools for a purely atomic game, by branch and
/// bound over bin assignments (players in descending stake order, symmetry
/// broken between equal stakes, pruning on unfillable deficits).
pub fn opt_atomic(game: &GameSpec, cap: usize) -> OptResult {
    let h = game.threshold();
    let tol = game.tol();
    let total = game.total_atomic_stake();
    let upper = (total / h + tol).floor().max(0.0) as usize;
    if game.n() > cap {
        return OptResult {
            value: upper,
            witness: None,
            exact: false,
        };
    }
    // descending stakes with original ids
    let mut order: Vec<(f64, PlayerId)> = game
        .stakes()
        .iter()
        .enumerate()
        .map(|(i, &a)| (a, i + 1))
        .collect();
    order.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
    let stakes: Vec<f64> = order.iter().map(|&(a, _)| a).collect();
    let suffix: Vec<f64> = {
        let mut s = vec![0.0; stakes.len() + 1];
        for i in (0..stakes.len()).rev() {
            s[i] = s[i + 1] + stakes[i];
        }
        s
    };
    for t in (1..=upper).rev() {
        let mut bins = vec![0.0f64; t];
        let mut assignment = vec![usize::MAX; stakes.len()];
        if assign(
            0,
            &stakes,
            &suffix,
            h - tol,
            &mut bins,
            &mut assignment,
        ) {
            let mut groups: Vec<Vec<PlayerId>> = vec![Vec::new(); t];
            for (i, &b) in assignment.iter().enumerate() {
                groups[b].push(order[i].1);
            }
            let pools = groups.into_iter().map(Pool::atomic).collect();
            return OptResult {
                value: t,
                witness: Some(Partition::new(pools)),
                exact: true,
            };
        }
    }
    OptResult {
        value: 0,
        witness: None,
        exact: true,
    }
}

fn assign(
    idx: usize,
    stakes: &[f64],
    suffix: &[f64],
    h: f64,
    bins: &mut Vec<f64>,
    assignment: &mut Vec<usize>,
) -> bool {
    let deficit: f64 = bins.iter().map(|&b| (h - b).max(0.0)).sum();
    if deficit <= 0.0 {
        // all bins already win; dump the rest into bin 0
        for a in assignment.iter_mut().skip(idx) {
            *a = 0;
        }
        return true;
    }
    if idx == stakes.len() || suffix[idx] < deficit {
        return false;
    }
    let mut tried_fill = Vec::new();
    for b in 0..bins.len() {
        // symmetry: identical bin fills are interchangeable
        if tried_fill.iter().any(|&f: &f64| (f - bins[b]).abs() < 1e-12) {
            continue;
        }
        // symmetry between equal players: an equal predecessor must not sit
        // in a later bin
        if idx > 0 && (stakes[idx] - stakes[idx - 1]).abs() < 1e-12 && assignment[idx - 1] > b {
            continue;
        }
        tried_fill.push(bins[b]);
        bins[b] += stakes[idx];
        assignment[idx] = b;
        if assign(idx + 1, stakes, suffix, h, bins, assignment) {
            return true;
        }
        bins[b] -= stakes[idx];
        assignment[idx] = usize::MAX;
    }
    false
}

/// Maximum number of winning pools for an oceanic game: atomic players are
/// grouped (exact search over set partitions) and the ocean covers the total
/// deficit `sum_j max(0, h - group_stake_j)`, with empty groups costing `h`.
pub fn opt_oceanic(game: &GameSpec, cap: usize) -> Result<OptResult, EquilibriumError> {
    if game.oceanic_mass() <= 0.0 {
        return Err(EquilibriumError::PremiseViolated(
            "opt_oceanic requires positive oceanic mass; use opt_atomic".into(),
        ));
    }
    let h = game.threshold();
    let tol = game.tol();
    let l = game.oceanic_mass();
    let n = game.n();
    let upper = ((game.total_stake()) / h + tol).floor().max(0.0) as usize;
    if n > cap {
        return Ok(OptResult {
            value: upper,
            witness: None,
            exact: false,
        });
    }
    let stakes = game.stakes();
    // min_deficit[g]: cheapest total deficit over partitions of the atomic
    // players into exactly g nonempty groups, plus its witness.
    let mut min_deficit: Vec<Option<(f64, Vec<usize>)>> = vec![None; n + 1];
    if n == 0 {
        min_deficit[0] = Some((0.0, Vec::new()));
    } else {
        crate::equilibrium::for_each_set_partition(n, |rgs| {
            let g = rgs.iter().copied().max().map_or(0, |m| m + 1);
            let mut sums = vec![0.0f64; g];
            for (i, &b) in rgs.iter().enumerate() {
                sums[b] += stakes[i];
            }
            let deficit: f64 = sums.iter().map(|&s| (h - s).max(0.0)).sum();
            if min_deficit[g].as_ref().is_none_or(|(d, _)| deficit < *d) {
                min_deficit[g] = Some((deficit, rgs.to_vec()));
            }
        });
    }
    let mut best: Option<(usize, usize, f64)> = None; // (t, g, deficit)
    for (g, entry) in min_deficit.iter().enumerate() {
        let Some((deficit, _)) = entry else { continue };
        if *deficit > l + tol {
            continue;
        }
        let extra = ((l - deficit) / h + tol).floor().max(0.0) as usize;
        let t = g + extra;
        if best.is_none_or(|(bt, _, _)| t > bt) {
            best = Some((t, g, *deficit));
        }
    }
    let Some((t, g, _)) = best else {
        return Ok(OptResult {
            value: 0,
            witness: None,
            exact: true,
        });
    };
    if t == 0 {
        return Ok(OptResult {
            value: 0,
            witness: None,
            exact: true,
        });
    }
    // Build the witness: atomic groups topped up to h, empty pools of h, and
    // leftover ocean dumped into the first pool.
    let rgs = min_deficit[g].as_ref().unwrap().1.clone();
    let mut groups: Vec<Vec<PlayerId>> = vec![Vec::new(); g];
    let mut sums = vec![0.0f64; g];
    for (i, &b) in rgs.iter().enumerate() {
        groups[b].push(i + 1);
        sums[b] += stakes[i];
    }
    let mut pools: Vec<Pool> = groups
        .into_iter()
        .zip(&sums)
        .map(|(members, &s)| Pool::with_ocean(members, (h - s).max(0.0)))
        .collect();
    for _ in g..t {
        pools.push(Pool::ocean(h));
    }
    let used: f64 = pools.iter().map(|p| p.oceanic_share).sum();
    pools[0].oceanic_share += l - used;
    Ok(OptResult {
        value: t,
        witness: Some(Partition::new(pools)),
        exact: true,
    })
}

/// Number of pools with reward 1.
pub fn winning_count(partition: &Partition, game: &GameSpec) -> usize {
    partition
        .pools
        .iter()
        .filter(|p| is_winning(p, game).unwrap_or(false))
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PosMethod {
    Exhaustive,
    ExhaustiveStructured,
    ConstructiveUpperBound,
}

/// Price of Stability report: OPT over the best equilibrium's winning-pool
/// count. Constructive entries are upper bounds on the true PoS (the best
/// equilibrium can only be better than the constructed one).
#[derive(Debug, Clone)]
pub struct PosReport {
    pub opt_value: usize,
    pub best_equilibrium_w: usize,
    pub pos: Option<f64>,
    /// Exact ratio (opt, W), when defined.
    pub ratio: Option<(usize, usize)>,
    pub method: PosMethod,
    pub upper_bound_only: bool,
    pub witness_opt: Option<Partition>,
    pub witness_equilibrium: Option<Partition>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct PosCaps {
    pub enumeration: usize,
    pub solver: usize,
}

impl Default for PosCaps {
    fn default() -> Self {
        PosCaps {
            enumeration: 10,
            solver: 20,
        }
    }
}

/// Computes the Price of Stability.
///
/// * `Exhaustive` — exact, over all set partitions (atomic, small n).
/// * `ExhaustiveStructured` — exact for two-valued stake games via
///   composition multisets.
/// * `ConstructiveUpperBound` — OPT over the W of the scheme's constructed
///   equilibrium; an upper bound on PoS, never claimed exact.
pub fn price_of_stability(
    game: &GameSpec,
    scheme: Scheme,
    method: PosMethod,
    caps: PosCaps,
    cfg: &CheckConfig,
) -> Result<PosReport, EquilibriumError> {
    let undefined = |opt: usize, note: &str| PosReport {
        opt_value: opt,
        best_equilibrium_w: 0,
        pos: None,
        ratio: None,
        method,
        upper_bound_only: false,
        witness_opt: None,
        witness_equilibrium: None,
        note: Some(note.to_string()),
    };
    if game.total_stake() < game.threshold() - game.tol() {
        return Ok(undefined(
            0,
            "total stake below the threshold: no winning pool exists, PoS undefined",
        ));
    }
    match method {
        PosMethod::Exhaustive => {
            let opt = opt_atomic(game, caps.solver);
            if !opt.exact {
                return Err(EquilibriumError::CapExceeded {
                    n: game.n(),
                    cap: caps.solver,
                });
            }
            let equilibria = enumerate_equilibria(game, scheme, caps.enumeration, cfg)?;
            match equilibria.into_iter().next() {
                Some((partition, w)) => Ok(PosReport {
                    opt_value: opt.value,
                    best_equilibrium_w: w,
                    pos: Some(opt.value as f64 / w as f64),
                    ratio: Some((opt.value, w)),
                    method,
                    upper_bound_only: false,
                    witness_opt: opt.witness,
                    witness_equilibrium: Some(partition),
                    note: None,
                }),
                None => Ok(undefined(opt.value, "no equilibrium with all pools winning")),
            }
        }
        PosMethod::ExhaustiveStructured => {
            let opt = opt_atomic(game, caps.solver);
            if !opt.exact {
                return Err(EquilibriumError::CapExceeded {
                    n: game.n(),
                    cap: caps.solver,
                });
            }
            let equilibria = enumerate_structured_equilibria(game, scheme)?;
            match equilibria.first() {
                Some((shapes, w)) => Ok(PosReport {
                    opt_value: opt.value,
                    best_equilibrium_w: *w,
                    pos: Some(opt.value as f64 / *w as f64),
                    ratio: Some((opt.value, *w)),
                    method,
                    upper_bound_only: false,
                    witness_opt: opt.witness,
                    witness_equilibrium: Some(shapes_to_partition(game, shapes)),
                    note: None,
                }),
                None => Ok(undefined(opt.value, "no equilibrium with all pools winning")),
            }
        }
        PosMethod::ConstructiveUpperBound => {
            let (partition, desc) = match scheme {
                Scheme::Proportional => {
                    let c = construct_leximin_optimal(game, caps.enumeration)?;
                    (c.partition, "leximin-optimal partition")
                }
                Scheme::Shapley => {
                    if game.oceanic_mass() > 0.0 {
                        let c = construct_oceanic_equilibrium(game, None, 0.0)?;
                        (c.partition, "oceanic (k, l) construction")
                    } else {
                        let c = construct_atomic_kl_equilibrium(game)?;
                        (c.partition, "atomic (k, l) construction")
                    }
                }
                Scheme::PropSqrt => {
                    let c = construct_sqrt_kl_equilibrium(game)?;
                    (c.partition, "sqrt (k, l) construction")
                }
                Scheme::PropSquares => {
                    return Err(EquilibriumError::PremiseViolated(
                        "no constructive equilibrium family for proportional-to-squares \
                         (its Price of Stability is unbounded)"
                            .into(),
                    ))
                }
            };
            let w = winning_count(&partition, game);
            let opt = if game.is_atomic() {
                opt_atomic(game, caps.solver)
            } else {
                opt_oceanic(game, caps.solver)?
            };
            let bound_note = if opt.exact {
                format!("upper bound on PoS from the {desc}")
            } else {
                format!(
                    "upper bound on PoS from the {desc}; OPT itself is the trivial bound only"
                )
            };
            Ok(PosReport {
                opt_value: opt.value,
                best_equilibrium_w: w,
                pos: Some(opt.value as f64 / w as f64),
                ratio: Some((opt.value, w)),
                method,
                upper_bound_only: true,
                witness_opt: opt.witness,
                witness_equilibrium: Some(partition),
                note: Some(bound_note),
            })
        }
    }
}

/// Materializes a shape multiset into a concrete partition (players of equal
/// stake are exchangeable).
pub fn shapes_to_partition(
    game: &GameSpec,
    shapes: &[crate::equilibrium::PoolShape],
) -> Partition {
    let ints = game.integer_stakes().expect("two-valued game");
    let mut bigs: Vec<PlayerId> = Vec::new();
    let mut smalls: Vec<PlayerId> = Vec::new();
    for id in game.player_ids() {
        if ints[id - 1] == 1 {
            smalls.push(id);
        } else {
            bigs.push(id);
        }
    }
    let mut pools = Vec::new();
    let (mut bi, mut si) = (0usize, 0usize);
    for shape in shapes {
        let mut members = Vec::new();
        members.extend_from_slice(&bigs[bi..bi + shape.big]);
        bi += shape.big;
        members.extend_from_slice(&smalls[si..si + shape.small]);
        si += shape.small;
        pools.push(Pool::atomic(members));
    }
    Partition::new(pools)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn game(h: f64, stakes: &[f64]) -> GameSpec {
        GameSpec::new(h, stakes.to_vec(), 0.0).unwrap()
    }

    #[test]
    fn opt_running_example() {
        let g = game(4.0, &[3.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let r = opt_atomic(&g, 20);
        assert_eq!(r.value, 2);
        let w = r.witness.unwrap();
        assert_eq!(w.len(), 2);
        for pool in &w.pools {
            assert!(crate::model::pool_stake(pool, &g).unwrap() >= 4.0);
        }
    }

    #[test]
    fn opt_zero_when_total_below_threshold() {
        let g = game(4.0, &[1.0, 1.0]);
        assert_eq!(opt_atomic(&g, 20).value, 0);
    }

    #[test]
    fn opt_squares_lower_bound_instance() {
        // a = h-1 = 4 plus 16 unit players, h = 5: OPT = floor(20/5) = 4.
        let mut stakes = vec![4.0];
        stakes.extend(std::iter::repeat_n(1.0, 16));
        let g = game(5.0, &stakes);
        assert_eq!(opt_atomic(&g, 20).value, 4);
    }

    #[test]
    fn opt_bound_only_above_cap() {
        let stakes = vec![1.0; 30];
        let g = game(2.0, &stakes);
        let r = opt_atomic(&g, 20);
        assert!(!r.exact);
        assert_eq!(r.value, 15);
    }

    #[test]
    fn opt_oceanic_claim_instance() {
        // a=2, h=3, L = 4t+2 with t=3: OPT = 1 + 4t/3 = 5.
        let g = GameSpec::new(3.0, vec![2.0], 14.0).unwrap();
        let r = opt_oceanic(&g, 10).unwrap();
        assert_eq!(r.value, 5);
        let w = r.witness.unwrap();
        assert_eq!(winning_count(&w, &g), 5);
        let report = crate::model::validate_partition(&w, &g);
        assert!(report.all_winning());
    }

    #[test]
    fn opt_oceanic_pure_ocean() {
        let g = GameSpec::new(3.0, vec![], 10.0).unwrap();
        assert_eq!(opt_oceanic(&g, 10).unwrap().value, 3);
    }

    #[test]
    fn opt_oceanic_below_threshold() {
        let g = GameSpec::new(3.0, vec![2.0], 0.5).unwrap();
        assert_eq!(opt_oceanic(&g, 10).unwrap().value, 0);
    }

    #[test]
    fn opt_oceanic_requires_ocean() {
        let g = game(3.0, &[2.0]);
        assert!(opt_oceanic(&g, 10).is_err());
    }

    #[test]
    fn winning_count_counts() {
        let g = game(4.0, &[3.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let p = Partition::new(vec![Pool::atomic([1, 2]), Pool::atomic([3, 4, 5, 6])]);
        assert_eq!(winning_count(&p, &g), 2);
        let p = Partition::new(vec![Pool::atomic([1, 2, 3]), Pool::atomic([4, 5, 6])]);
        assert_eq!(winning_count(&p, &g), 1);
    }
}
