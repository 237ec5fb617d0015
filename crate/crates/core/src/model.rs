//! Core domain types: games, pools, partitions, the threshold reward
//! function, and the scenario file format.
//!
//! A game consists of `n` atomic players with stakes `a_1..a_n`, an optional
//! continuum of small players of total mass `L` (the ocean), and a threshold
//! `h`. A pool wins reward 1 exactly when its total stake reaches `h`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{BigInt, BigRational, FromPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 1-based player identifier (position in the stake vector).
pub type PlayerId = usize;

/// Default absolute tolerance for float comparisons.
pub const DEFAULT_TOL: f64 = 1e-9;

/// How stake arithmetic is carried out where exactness is possible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Arithmetic {
    /// Exact rationals for atomic computations (requires integer inputs).
    #[default]
    ExactRational,
    /// 64-bit floats with tolerance everywhere.
    Float,
}

/// Reward sharing scheme identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Shapley,
    Proportional,
    PropSquares,
    PropSqrt,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Shapley,
        Scheme::Proportional,
        Scheme::PropSquares,
        Scheme::PropSqrt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Shapley => "shapley",
            Scheme::Proportional => "proportional",
            Scheme::PropSquares => "prop_squares",
            Scheme::PropSqrt => "prop_sqrt",
        }
    }

    /// Schemes defined only for the purely atomic model.
    pub fn atomic_only(self) -> bool {
        matches!(self, Scheme::PropSquares | Scheme::PropSqrt)
    }

    /// Whether the scheme admits exact rational computation on integer stakes.
    pub fn rational_capable(self) -> bool {
        !matches!(self, Scheme::PropSqrt)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scheme {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shapley" => Ok(Scheme::Shapley),
            "proportional" => Ok(Scheme::Proportional),
            "prop_squares" => Ok(Scheme::PropSquares),
            "prop_sqrt" => Ok(Scheme::PropSqrt),
            other => Err(ModelError::Semantic(format!(
                "unknown scheme {other:?}; expected one of shapley, proportional, prop_squares, prop_sqrt"
            ))),
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("semantic error: {0}")]
    Semantic(String),
    #[error("unknown player id {0}")]
    UnknownPlayer(PlayerId),
    #[error(
        "stake {stake} of player {player} is >= threshold {threshold}; such a player can run \
         threshold-sized solo pools on her own (see big_player_split_analysis) and should enter \
         the game only with the remainder"
    )]
    StakeAboveThreshold {
        player: PlayerId,
        stake: f64,
        threshold: f64,
    },
}

/// Game description: threshold, atomic stakes, oceanic mass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameSpec {
    threshold: f64,
    atomic_stakes: Vec<f64>,
    oceanic_mass: f64,
    arithmetic: Arithmetic,
    tol: f64,
}

impl GameSpec {
    /// Builds and validates a game. Stakes at or above the threshold are
    /// rejected (players that large do not need to collaborate).
    pub fn new(threshold: f64, atomic_stakes: Vec<f64>, oceanic_mass: f64) -> Result<Self, ModelError> {
        Self::with_arithmetic(threshold, atomic_stakes, oceanic_mass, Arithmetic::ExactRational)
    }

    pub fn with_arithmetic(
        threshold: f64,
        atomic_stakes: Vec<f64>,
        oceanic_mass: f64,
        arithmetic: Arithmetic,
    ) -> Result<Self, ModelError> {
        if !threshold.is_finite() || threshold <= 0.0 {
            return Err(ModelError::Semantic(format!(
                "threshold must be a positive real, got {threshold}"
            )));
        }
        for (i, &a) in atomic_stakes.iter().enumerate() {
            if !a.is_finite() || a <= 0.0 {
                return Err(ModelError::Semantic(format!(
                    "atomic stake of player {} must be positive, got {a}",
                    i + 1
                )));
            }
            if a >= threshold {
                return Err(ModelError::StakeAboveThreshold {
                    player: i + 1,
                    stake: a,
                    threshold,
                });
            }
        }
        if !oceanic_mass.is_finite() || oceanic_mass < 0.0 {
            return Err(ModelError::Semantic(format!(
                "oceanic mass must be nonnegative, got {oceanic_mass}"
            )));
        }
        Ok(GameSpec {
            threshold,
            atomic_stakes,
            oceanic_mass,
            arithmetic,
            tol: DEFAULT_TOL,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn oceanic_mass(&self) -> f64 {
        self.oceanic_mass
    }

    pub fn arithmetic(&self) -> Arithmetic {
        self.arithmetic
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn set_tol(&mut self, tol: f64) {
        self.tol = tol;
    }

    /// Number of atomic players.
    pub fn n(&self) -> usize {
        self.atomic_stakes.len()
    }

    pub fn player_ids(&self) -> impl Iterator<Item = PlayerId> {
        1..=self.n()
    }

    pub fn stakes(&self) -> &[f64] {
        &self.atomic_stakes
    }

    pub fn stake(&self, id: PlayerId) -> Result<f64, ModelError> {
        if id == 0 || id > self.atomic_stakes.len() {
            return Err(ModelError::UnknownPlayer(id));
        }
        Ok(self.atomic_stakes[id - 1])
    }

    pub fn total_atomic_stake(&self) -> f64 {
        self.atomic_stakes.iter().sum()
    }

    pub fn total_stake(&self) -> f64 {
        self.total_atomic_stake() + self.oceanic_mass
    }

    /// Purely atomic game (no ocean).
    pub fn is_atomic(&self) -> bool {
        self.oceanic_mass == 0.0
    }

    /// Integer stake vector, available when every stake is an exact integer.
    pub fn integer_stakes(&self) -> Option<Vec<i64>> {
        if self.arithmetic == Arithmetic::Float {
            return None;
        }
        self.atomic_stakes
            .iter()
            .map(|&a| exact_integer(a))
            .collect()
    }

    /// Integer threshold, when exactly representable.
    pub fn integer_threshold(&self) -> Option<i64> {
        if self.arithmetic == Arithmetic::Float {
            return None;
        }
        exact_integer(self.threshold)
    }

    /// True when atomic reward computations can run over exact rationals.
    pub fn exact_atomic(&self) -> bool {
        self.integer_stakes().is_some() && self.integer_threshold().is_some()
    }

    pub fn threshold_rational(&self) -> Option<BigRational> {
        self.integer_threshold()
            .map(|h| BigRational::from_integer(BigInt::from(h)))
    }

    pub fn stake_rational(&self, id: PlayerId) -> Option<BigRational> {
        let ints = self.integer_stakes()?;
        ints.get(id.checked_sub(1)?)
            .map(|&a| BigRational::from_integer(BigInt::from(a)))
    }
}

fn exact_integer(x: f64) -> Option<i64> {
    if x.fract() == 0.0 && x.abs() < 2f64.powi(53) {
        i64::from_f64(x)
    } else {
        None
    }
}

/// A pool: a set of atomic members plus a share of the ocean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pool {
    pub atomic_members: BTreeSet<PlayerId>,
    pub oceanic_share: f64,
}

impl Pool {
    pub fn atomic<I: IntoIterator<Item = PlayerId>>(members: I) -> Self {
        Pool {
            atomic_members: members.into_iter().collect(),
            oceanic_share: 0.0,
        }
    }

    pub fn with_ocean<I: IntoIterator<Item = PlayerId>>(members: I, share: f64) -> Self {
        Pool {
            atomic_members: members.into_iter().collect(),
            oceanic_share: share,
        }
    }

    pub fn ocean(share: f64) -> Self {
        Pool {
            atomic_members: BTreeSet::new(),
            oceanic_share: share,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.atomic_members.is_empty() && self.oceanic_share == 0.0
    }
}

/// Total stake of a pool: member stakes plus its oceanic share.
pub fn pool_stake(pool: &Pool, game: &GameSpec) -> Result<f64, ModelError> {
    let mut total = pool.oceanic_share;
    for &id in &pool.atomic_members {
        total += game.stake(id)?;
    }
    Ok(total)
}

/// The threshold reward function: 1 iff the pool stake reaches the threshold
/// (within the game tolerance for float arithmetic).
pub fn pool_reward(pool: &Pool, game: &GameSpec) -> Result<u8, ModelError> {
    Ok(if is_winning(pool, game)? { 1 } else { 0 })
}

pub fn is_winning(pool: &Pool, game: &GameSpec) -> Result<bool, ModelError> {
    Ok(pool_stake(pool, game)? >= game.threshold() - game.tol())
}

/// Winning test for a raw stake value.
pub fn stake_wins(stake: f64, game: &GameSpec) -> bool {
    stake >= game.threshold() - game.tol()
}

/// A partition of the players into pools (the outcome of a strategy profile).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub pools: Vec<Pool>,
}

impl Partition {
    pub fn new(pools: Vec<Pool>) -> Self {
        Partition { pools }
    }

    pub fn len(&self) -> usize {
        self.pools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pools.is_empty()
    }

    /// Pool index containing the given atomic player.
    pub fn pool_of(&self, player: PlayerId) -> Option<usize> {
        self.pools
            .iter()
            .position(|p| p.atomic_members.contains(&player))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    /// A player appears in more than one pool.
    Overlap { player: PlayerId, pools: (usize, usize) },
    /// A pool references an id outside 1..=n.
    UnknownPlayer { player: PlayerId, pool: usize },
    /// A player of the game appears in no pool.
    Missing { player: PlayerId },
    /// Oceanic shares do not sum to the game's oceanic mass.
    MassMismatch { total: f64, expected: f64 },
    /// A pool has a negative oceanic share.
    NegativeShare { pool: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Overlap { player, pools } => {
                write!(f, "player {player} appears in pools {} and {}", pools.0, pools.1)
            }
            Violation::UnknownPlayer { player, pool } => {
                write!(f, "pool {pool} references unknown player {player}")
            }
            Violation::Missing { player } => write!(f, "player {player} is in no pool"),
            Violation::MassMismatch { total, expected } => {
                write!(f, "oceanic shares sum to {total}, expected {expected}")
            }
            Violation::NegativeShare { pool } => write!(f, "pool {pool} has negative oceanic share"),
        }
    }
}

/// Report produced by [`validate_partition`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Indices of pools whose stake is below the threshold.
    pub losing_pools: Vec<usize>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn all_winning(&self) -> bool {
        self.is_valid() && self.losing_pools.is_empty()
    }
}

/// Checks disjointness, coverage and mass conservation, and flags losing pools.
pub fn validate_partition(partition: &Partition, game: &GameSpec) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen: BTreeMap<PlayerId, usize> = BTreeMap::new();
    let mut mass = 0.0;
    for (idx, pool) in partition.pools.iter().enumerate() {
        if pool.oceanic_share < 0.0 {
            violations.push(Violation::NegativeShare { pool: idx });
        } else {
            mass += pool.oceanic_share;
        }
        for &id in &pool.atomic_members {
            if id == 0 || id > game.n() {
                violations.push(Violation::UnknownPlayer { player: id, pool: idx });
                continue;
            }
            if let Some(&first) = seen.get(&id) {
                violations.push(Violation::Overlap {
                    player: id,
                    pools: (first, idx),
                });
            } else {
                seen.insert(id, idx);
            }
        }
    }
    for id in game.player_ids() {
        if !seen.contains_key(&id) {
            violations.push(Violation::Missing { player: id });
        }
    }
    if (mass - game.oceanic_mass()).abs() > game.tol() {
        violations.push(Violation::MassMismatch {
            total: mass,
            expected: game.oceanic_mass(),
        });
    }
    let losing_pools = partition
        .pools
        .iter()
        .enumerate()
        .filter(|(_, p)| !is_winning(p, game).unwrap_or(false))
        .map(|(i, _)| i)
        .collect();
    ValidationReport {
        violations,
        losing_pools,
    }
}

/// A parsed scenario file: the game plus optional partition and scheme.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub game: GameSpec,
    pub partition: Option<Partition>,
    pub scheme: Option<Scheme>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    threshold: f64,
    atomic_stakes: Vec<f64>,
    #[serde(default)]
    oceanic_mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scheme: Option<Scheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    partition: Option<Vec<PoolFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arithmetic: Option<Arithmetic>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PoolFile {
    #[serde(default)]
    atomic: Vec<PlayerId>,
    #[serde(default)]
    oceanic: f64,
}

/// Parses the scenario JSON format (UTF-8 document with `threshold`,
/// `atomic_stakes`, optional `oceanic_mass`, `scheme`, `partition`).
pub fn parse_scenario(text: &str) -> Result<Scenario, ModelError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ModelError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let game = GameSpec::with_arithmetic(
        file.threshold,
        file.atomic_stakes,
        file.oceanic_mass,
        file.arithmetic.unwrap_or_default(),
    )?;
    let partition = match file.partition {
        None => None,
        Some(pools) => {
            let partition = Partition::new(
                pools
                    .into_iter()
                    .map(|p| Pool::with_ocean(p.atomic, p.oceanic))
                    .collect(),
            );
            let report = validate_partition(&partition, &game);
            if !report.is_valid() {
                let msgs: Vec<String> =
                    report.violations.iter().map(|v| v.to_string()).collect();
                return Err(ModelError::Semantic(format!(
                    "invalid partition: {}",
                    msgs.join("; ")
                )));
            }
            Some(partition)
        }
    };
    Ok(Scenario {
        game,
        partition,
        scheme: file.scheme,
    })
}

/// Serializes a scenario back to the JSON format accepted by [`parse_scenario`].
pub fn serialize_scenario(scenario: &Scenario) -> String {
    let file = ScenarioFile {
        threshold: scenario.game.threshold(),
        atomic_stakes: scenario.game.stakes().to_vec(),
        oceanic_mass: scenario.game.oceanic_mass(),
        scheme: scenario.scheme,
        partition: scenario.partition.as_ref().map(|p| {
            p.pools
                .iter()
                .map(|pool| PoolFile {
                    atomic: pool.atomic_members.iter().copied().collect(),
                    oceanic: pool.oceanic_share,
                })
                .collect()
        }),
        arithmetic: match scenario.game.arithmetic() {
            Arithmetic::ExactRational => None,
            Arithmetic::Float => Some(Arithmetic::Float),
        },
    };
    serde_json::to_string_pretty(&file).expect("scenario serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn game(h: f64, stakes: &[f64], l: f64) -> GameSpec {
        GameSpec::new(h, stakes.to_vec(), l).unwrap()
    }

    #[test]
    fn pool_stake_sums_members() {
        let g = game(4.0, &[3.0, 1.0], 0.0);
        let p = Pool::atomic([1, 2]);
        assert_eq!(pool_stake(&p, &g).unwrap(), 4.0);
    }

    #[test]
    fn pool_stake_empty_pool_is_zero() {
        let g = game(4.0, &[3.0], 0.0);
        assert_eq!(pool_stake(&Pool::atomic([]), &g).unwrap(), 0.0);
    }

    #[test]
    fn pool_stake_includes_ocean() {
        // Example pool: one stake-2 player plus oceanic share 2.
        let g = game(3.0, &[2.0], 2.0);
        let p = Pool::with_ocean([1], 2.0);
        assert_eq!(pool_stake(&p, &g).unwrap(), 4.0);
    }

    #[test]
    fn pool_stake_unknown_player() {
        let g = game(4.0, &[3.0], 0.0);
        let p = Pool::atomic([7]);
        assert!(matches!(
            pool_stake(&p, &g),
            Err(ModelError::UnknownPlayer(7))
        ));
    }

    #[test]
    fn reward_boundary_inclusive() {
        let g = game(4.0, &[3.0, 1.0], 0.0);
        assert_eq!(pool_reward(&Pool::atomic([1, 2]), &g).unwrap(), 1);
    }

    #[test]
    fn reward_below_threshold() {
        let g = game(4.0, &[3.999], 0.0);
        assert_eq!(pool_reward(&Pool::atomic([1]), &g).unwrap(), 0);
    }

    #[test]
    fn reward_winning_with_ocean() {
        let g = game(3.0, &[2.0], 2.0);
        assert_eq!(pool_reward(&Pool::with_ocean([1], 2.0), &g).unwrap(), 1);
    }

    #[test]
    fn validate_overlap() {
        let g = game(4.0, &[3.0, 1.0], 0.0);
        let p = Partition::new(vec![Pool::atomic([1, 2]), Pool::atomic([1])]);
        let report = validate_partition(&p, &g);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Overlap { player: 1, .. })));
    }

    #[test]
    fn validate_mass_mismatch() {
        let g = game(3.0, &[2.0], 6.0);
        let p = Partition::new(vec![Pool::with_ocean([1], 2.0), Pool::ocean(3.0)]);
        let report = validate_partition(&p, &g);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::MassMismatch { .. })));
    }

    #[test]
    fn validate_example_partition_all_winning() {
        // h=3, one large a=2 with ocean 2, plus a pure-ocean pool of 4.
        let g = game(3.0, &[2.0], 6.0);
        let p = Partition::new(vec![Pool::with_ocean([1], 2.0), Pool::ocean(4.0)]);
        let report = validate_partition(&p, &g);
        assert!(report.all_winning());
    }

    #[test]
    fn reject_stake_at_threshold() {
        let err = GameSpec::new(4.0, vec![4.0], 0.0).unwrap_err();
        assert!(matches!(err, ModelError::StakeAboveThreshold { player: 1, .. }));
    }

    #[test]
    fn reject_negative_stake() {
        assert!(GameSpec::new(4.0, vec![-1.0], 0.0).is_err());
    }

    #[test]
    fn parse_minimal_scenario() {
        let s = parse_scenario(r#"{"threshold":4,"atomic_stakes":[3,1,1,1,1,1],"oceanic_mass":0}"#)
            .unwrap();
        assert_eq!(s.game.n(), 6);
        assert!(s.game.exact_atomic());
    }

    #[test]
    fn parse_scenario_with_partition_and_scheme() {
        let s = parse_scenario(
            r#"{
              "threshold": 3,
              "atomic_stakes": [2],
              "oceanic_mass": 6,
              "scheme": "shapley",
              "partition": [
                {"atomic": [1], "oceanic": 2},
                {"atomic": [], "oceanic": 4}
              ]
            }"#,
        )
        .unwrap();
        assert_eq!(s.scheme, Some(Scheme::Shapley));
        assert_eq!(s.partition.as_ref().unwrap().len(), 2);
    }

    #[test]
    fn parse_rejects_negative_stake() {
        let err = parse_scenario(r#"{"threshold":4,"atomic_stakes":[3,-1]}"#).unwrap_err();
        assert!(matches!(err, ModelError::Semantic(_)));
    }

    #[test]
    fn parse_reports_syntax_position() {
        let err = parse_scenario("{\n  \"threshold\": 4,,\n}").unwrap_err();
        match err {
            ModelError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn scenario_round_trip() {
        let text = r#"{"threshold":3,"atomic_stakes":[2,2.5],"oceanic_mass":6.25,"scheme":"proportional","partition":[{"atomic":[1,2],"oceanic":1.25},{"atomic":[],"oceanic":5}]}"#;
        let s = parse_scenario(text).unwrap();
        let round = parse_scenario(&serialize_scenario(&s)).unwrap();
        assert_eq!(round.game.threshold(), s.game.threshold());
        assert_eq!(round.game.stakes(), s.game.stakes());
        assert_eq!(round.partition, s.partition);
        assert_eq!(round.scheme, s.scheme);
    }
}
