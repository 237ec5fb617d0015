//! Stake-pool formation games under a threshold reward function.
//!
//! The library models games of atomic players (stakes `a_1..a_n`) and an
//! oceanic continuum of small players (total mass `L`): pools win reward 1
//! when their stake reaches a threshold `h`. It implements four reward
//! sharing schemes (Shapley, proportional, proportional-to-squares,
//! proportional-to-square-roots), Nash-equilibrium checking and
//! construction, decentralization metrics (OPT and Price of Stability), and
//! Sybil (stake-splitting) attack analysis with an exact optimizer for the
//! proportional scheme.

pub mod equilibrium;
pub mod model;
pub mod rewards;
pub mod sybil;
pub mod welfare;

pub use equilibrium::{
    atomic_kl_conditions, check_nash, construct_atomic_kl_equilibrium,
    construct_leximin_optimal, construct_oceanic_equilibrium, construct_sqrt_kl_equilibrium,
    enumerate_equilibria, enumerate_structured_equilibria, f_function, kstar,
    oceanic_kl_conditions, shapley_premium, sqrt_kl_conditions, AtomicKl, CheckConfig,
    ConditionReport, Deviation, DeviationTarget, Deviator, EquilibriumError, KlParams, NashReport,
    PoolShape, Verdict,
};
pub use model::{
    is_winning, parse_scenario, pool_reward, pool_stake, serialize_scenario, validate_partition,
    Arithmetic, GameSpec, ModelError, Partition, PlayerId, Pool, Scenario, Scheme,
    ValidationReport, Violation, DEFAULT_TOL,
};
pub use rewards::{
    allocate_rewards, proportional_family_rewards, shapley_atomic_enum, shapley_atomic_exact,
    shapley_atomic_onelarge, shapley_atomic_twolarge_equal, shapley_oceanic_closed,
    shapley_oceanic_mc, ArrivalSample, McConfig, McEstimate, PoolProfile, PoolRewards, RewardAllocation,
    RewardError,
};
pub use sybil::{
    audit_sybil_proofness, big_player_split_analysis, concavity_probe, sybil_best_response,
    sybil_payoff, waterfill_proportional, ConcavityReport, SplitReport, SybilAudit, SybilConfig,
    SybilError, SybilMethod, SybilStrategy, SybilVerdict, WaterfillResult,
};
pub use welfare::{
    opt_atomic, opt_oceanic, price_of_stability, winning_count, OptResult, PosCaps, PosMethod,
    PosReport,
};
pub mod verify;
pub use verify::{run_all as run_verification, CriterionOutcome, VerifyConfig};
