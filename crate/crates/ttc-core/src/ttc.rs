// SPDX-License-Identifier: Apache-2.0

//! Reference top-trading-cycles procedure and exactness checks.
//!
//! Each round, every remaining agent points at the holder of its most
//! preferred remaining object; an agent whose truncated list is exhausted
//! points at itself, trivially cycles, and keeps its endowment. Endowments
//! are the identity map, so "holder of object j" is agent j for as long as
//! j remains. Every functional graph contains at least one cycle; all
//! cycles trade, their members leave, and the round counter advances on the
//! shrunken market. Agents removed in the final round form the ground-truth
//! core set that the spectral pipeline tries to recover.
//!
//! Worst case O(n^2): cursors over the lists advance monotonically, and
//! each round is one three-color sweep of the pointer graph.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::profile::{Allocation, PreferenceProfile};

const WHITE: u8 = 0;
const GRAY: u8 = 1;
const BLACK: u8 = 2;

/// Errors from the trading procedure and its checkers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TtcError {
    /// Null-padded profiles have no holder for null objects; the trading
    /// procedure and its checkers are defined on real objects only.
    NullsUnsupported {
        /// Number of null objects in the profile.
        null_count: usize,
    },
    /// Brute-force enumeration refuses markets beyond its factorial budget.
    MarketTooLarge {
        /// Number of agents requested.
        n: usize,
        /// Largest market the check accepts.
        max: usize,
    },
    /// Allocation size does not match the profile.
    SizeMismatch {
        /// Agents in the profile.
        agents: usize,
        /// Entries in the allocation.
        assigned: usize,
    },
}

impl fmt::Display for TtcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TtcError::NullsUnsupported { null_count } => {
                write!(f, "profile has {null_count} null objects; trading needs a real-object market")
            }
            TtcError::MarketTooLarge { n, max } => {
                write!(f, "market size {n} exceeds brute-force bound {max}")
            }
            TtcError::SizeMismatch { agents, assigned } => {
                write!(f, "allocation covers {assigned} agents, profile has {agents}")
            }
        }
    }
}

impl core::error::Error for TtcError {}

/// Everything the procedure produced: the final allocation, the 1-based
/// round in which each agent traded, and the cycles themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct TtcOutcome {
    allocation: Allocation,
    removal_round: Vec<u32>,
    cycles: Vec<(u32, Vec<u32>)>,
}

impl TtcOutcome {
    /// Final allocation (a permutation of `1..=n`).
    pub fn allocation(&self) -> &Allocation {
        &self.allocation
    }

    /// `removal_round()[i]` is the round in which agent `i+1` traded;
    /// rounds are 1-based and contiguous.
    pub fn removal_round(&self) -> &[u32] {
        &self.removal_round
    }

    /// Cycles as `(round, agents)`, each cycle rotated to start at its
    /// smallest agent id and listed in pointer order: agent `c[j]` received
    /// the endowment of `c[(j+1) % len]`.
    pub fn cycles(&self) -> &[(u32, Vec<u32>)] {
        &self.cycles
    }

    /// Number of rounds the procedure ran.
    pub fn rounds(&self) -> u32 {
        self.removal_round.iter().copied().max().unwrap_or(0)
    }
}

/// Agents removed in the final round, ascending by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreSet {
    members: Vec<u32>,
    k: usize,
}

impl CoreSet {
    /// Builds a set from arbitrary member ids; sorts and deduplicates.
    pub fn from_members(mut members: Vec<u32>) -> Self {
        members.sort_unstable();
        members.dedup();
        let k = members.len();
        Self { members, k }
    }

    /// Member agent ids, ascending.
    pub fn members(&self) -> &[u32] {
        &self.members
    }

    /// Number of members.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Membership test.
    pub fn contains(&self, agent: u32) -> bool {
        self.members.binary_search(&agent).is_ok()
    }
}

/// Runs top trading cycles to completion on a real-object market.
pub fn run_ttc(profile: &PreferenceProfile) -> Result<TtcOutcome, TtcError> {
    if profile.null_count() > 0 {
        return Err(TtcError::NullsUnsupported { null_count: profile.null_count() });
    }
    let n = profile.n();
    let lists = profile.lists();

    let mut cursor = vec![0usize; n];
    let mut removed = vec![false; n];
    let mut succ = vec![0usize; n];
    let mut color = vec![WHITE; n];
    let mut assignment = vec![0u32; n];
    let mut removal_round = vec![0u32; n];
    let mut cycles: Vec<(u32, Vec<u32>)> = Vec::new();

    let mut remaining = n;
    let mut round: u32 = 0;
    while remaining > 0 {
        round += 1;

        // Point at the holder of the best remaining listed object; cursors
        // only ever advance, so the scans are O(total list length) overall.
        for i in 0..n {
            if removed[i] {
                continue;
            }
            let list = &lists[i];
            let c = &mut cursor[i];
            while *c < list.len() && removed[list[*c] as usize - 1] {
                *c += 1;
            }
            succ[i] = if *c < list.len() { list[*c] as usize - 1 } else { i };
        }

        // Three-color sweep: gray marks the current path, black anything
        // already resolved this round. A gray hit closes a new cycle.
        color.fill(WHITE);
        let mut found: Vec<Vec<usize>> = Vec::new();
        for start in 0..n {
            if removed[start] || color[start] != WHITE {
                continue;
            }
            let mut x = start;
            while color[x] == WHITE {
                color[x] = GRAY;
                x = succ[x];
            }
            if color[x] == GRAY {
                let mut cycle = vec![x];
                let mut y = succ[x];
                while y != x {
                    cycle.push(y);
                    y = succ[y];
                }
                let min_at = cycle
                    .iter()
                    .enumerate()
                    .min_by_key(|&(_, &a)| a)
                    .map(|(pos, _)| pos)
                    .unwrap_or(0);
                cycle.rotate_left(min_at);
                found.push(cycle);
            }
            let mut x = start;
            while color[x] == GRAY {
                color[x] = BLACK;
                x = succ[x];
            }
        }
        debug_assert!(!found.is_empty(), "functional graph always contains a cycle");
        found.sort_by_key(|c| c[0]);

        for cycle in found {
            for &a in &cycle {
                assignment[a] = succ[a] as u32 + 1;
                removal_round[a] = round;
                removed[a] = true;
                remaining -= 1;
            }
            cycles.push((round, cycle.into_iter().map(|a| a as u32 + 1).collect()));
        }
    }

    let allocation =
        Allocation::new(assignment, n).expect("cycle trades form a permutation");
    Ok(TtcOutcome { allocation, removal_round, cycles })
}

/// Agents whose cycle was removed in the final round.
pub fn ground_truth_core(outcome: &TtcOutcome) -> CoreSet {
    let last = outcome.rounds();
    let members: Vec<u32> = outcome
        .removal_round
        .iter()
        .enumerate()
        .filter(|&(_, &r)| r == last)
        .map(|(i, _)| i as u32 + 1)
        .collect();
    let k = members.len();
    CoreSet { members, k }
}

/// True when no agent is worse off than under its endowment.
///
/// An assigned object passes if it is the agent's endowment, or if it is
/// listed and the endowment is either unlisted (implicitly last) or listed
/// further down. Unlisted non-endowment objects always fail.
pub fn check_individual_rationality(
    profile: &PreferenceProfile,
    allocation: &Allocation,
) -> Result<bool, TtcError> {
    if allocation.n() != profile.n() {
        return Err(TtcError::SizeMismatch { agents: profile.n(), assigned: allocation.n() });
    }
    for agent in 1..=profile.n() as u32 {
        let object = allocation.object_of(agent);
        if object == agent {
            continue;
        }
        match profile.position_of(agent, object) {
            None => return Ok(false),
            Some(pos) => {
                if let Some(endow_pos) = profile.position_of(agent, agent) {
                    if pos > endow_pos {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

const PARETO_MAX_N: usize = 8;

/// Exhaustively checks Pareto efficiency over all `n!` reallocations.
///
/// Preference reading per agent: listed objects by rank, then the implicit
/// endowment if unlisted, then all other unlisted objects tied at the
/// bottom. Refuses markets with more than 8 agents; the factorial budget
/// is the point of this checker, not a limitation to engineer around.
pub fn check_pareto_bruteforce(
    profile: &PreferenceProfile,
    allocation: &Allocation,
) -> Result<bool, TtcError> {
    if profile.null_count() > 0 {
        return Err(TtcError::NullsUnsupported { null_count: profile.null_count() });
    }
    let n = profile.n();
    if n > PARETO_MAX_N {
        return Err(TtcError::MarketTooLarge { n, max: PARETO_MAX_N });
    }
    if allocation.n() != n {
        return Err(TtcError::SizeMismatch { agents: n, assigned: allocation.n() });
    }

    // rank[i][j]: 1-based list position of object j+1 for agent i+1;
    // unlisted endowment ranks just below the list, anything else ties at
    // the very bottom.
    let worst = n + 2;
    let mut rank = vec![vec![0usize; n]; n];
    for i in 0..n {
        let list = profile.lists()[i].as_slice();
        for j in 0..n {
            rank[i][j] = worst;
        }
        rank[i][i] = list.len() + 1;
        for (pos, &obj) in list.iter().enumerate() {
            rank[i][obj as usize - 1] = pos + 1;
        }
    }
    let current: Vec<usize> =
        (0..n).map(|i| rank[i][allocation.as_slice()[i] as usize - 1]).collect();

    let dominated = |perm: &[u32]| -> bool {
        let mut strict = false;
        for i in 0..n {
            let r = rank[i][perm[i] as usize - 1];
            if r > current[i] {
                return false;
            }
            if r < current[i] {
                strict = true;
            }
        }
        strict
    };

    // Heap's algorithm over all permutations of 1..=n.
    let mut perm: Vec<u32> = (1..=n as u32).collect();
    if dominated(&perm) {
        return Ok(false);
    }
    let mut counters = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            if dominated(&perm) {
                return Ok(false);
            }
            counters[i] += 1;
            i = 0;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    Ok(true)
}
