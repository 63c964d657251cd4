// SPDX-License-Identifier: Apache-2.0

//! Preference profiles for square exchange markets.
//!
//! A market has `n` agents and `n` objects sharing the id space `1..=n`;
//! agent `i` is endowed with object `i`. Each agent ranks a subset of the
//! objects, most preferred first. Truncated lists are read as: unlisted
//! objects other than the agent's own endowment are unacceptable, while the
//! endowment is implicitly acceptable and sits below everything the agent
//! bothered to list. Optional null objects (ids `n+1..=n+null_count`) pad
//! lists so ragged markets can be squared off; the base experiments use
//! `null_count == 0`.
//!
//! All ids are 1-based in this module and in every serialized format;
//! algorithms convert to 0-based indexing internally.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Why a profile, allocation, or generator input was rejected.
///
/// Validation scans agents in id order and reports the first violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProfileError {
    /// The market has no agents.
    NoAgents,
    /// An agent's list is longer than the object universe.
    ListTooLong {
        /// 1-based id of the offending agent.
        agent: u32,
        /// Length of that agent's list.
        len: usize,
        /// Size of the object universe.
        max: usize,
    },
    /// An object id outside `1..=n+null_count`.
    IdOutOfRange {
        /// 1-based id of the offending agent.
        agent: u32,
        /// The out-of-range object id.
        id: u32,
        /// Largest valid object id.
        max: u32,
    },
    /// The same object listed twice by one agent.
    DuplicateId {
        /// 1-based id of the offending agent.
        agent: u32,
        /// The repeated object id.
        id: u32,
    },
    /// `lists` does not hold exactly one list per agent.
    WrongAgentCount {
        /// Declared number of agents.
        expected: usize,
        /// Number of lists supplied.
        found: usize,
    },
    /// Requested truncation length outside `1..=n`.
    BadTruncation {
        /// The rejected list length.
        l: usize,
        /// Number of agents.
        n: usize,
    },
    /// Two objects with equal utility cannot be ranked strictly.
    TiedUtility {
        /// 1-based id of the agent whose ranking is ambiguous.
        agent: u32,
        /// Smaller id of the tied pair.
        first: u32,
        /// Larger id of the tied pair.
        second: u32,
    },
    /// Utility values must be finite to induce a ranking.
    NonFiniteUtility {
        /// 1-based id of the agent being ranked for.
        agent: u32,
        /// Object whose utility came back non-finite.
        object: u32,
    },
    /// An allocation assigns the same object twice.
    DuplicateAssignment {
        /// The doubly assigned object id.
        object: u32,
    },
}

impl fmt::Display for ProfileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ProfileError::NoAgents => write!(f, "profile has no agents"),
            ProfileError::ListTooLong { agent, len, max } => {
                write!(f, "agent {agent}: list length {len} exceeds {max} objects")
            }
            ProfileError::IdOutOfRange { agent, id, max } => {
                write!(f, "agent {agent}: object id {id} outside 1..={max}")
            }
            ProfileError::DuplicateId { agent, id } => {
                write!(f, "agent {agent}: object {id} listed twice")
            }
            ProfileError::WrongAgentCount { expected, found } => {
                write!(f, "expected {expected} agent lists, found {found}")
            }
            ProfileError::BadTruncation { l, n } => {
                write!(f, "truncation length {l} outside 1..={n}")
            }
            ProfileError::TiedUtility { agent, first, second } => {
                write!(
                    f,
                    "agent {agent}: objects {first} and {second} have equal utility; \
                     a strict ranking is undefined"
                )
            }
            ProfileError::NonFiniteUtility { agent, object } => {
                write!(f, "agent {agent}: utility for object {object} is not finite")
            }
            ProfileError::DuplicateAssignment { object } => {
                write!(f, "object {object} assigned twice")
            }
        }
    }
}

impl core::error::Error for ProfileError {}

/// Where padded null objects are inserted in each list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullPlacement {
    /// Append below every agent's true list (least preferred).
    Tail,
}

/// Immutable ranked-preference profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceProfile {
    n: usize,
    null_count: usize,
    lists: Vec<Vec<u32>>,
}

impl PreferenceProfile {
    /// Validates and wraps raw parts. `lists[i]` ranks agent `i+1`'s
    /// acceptable objects, most preferred first.
    pub fn new(n: usize, null_count: usize, lists: Vec<Vec<u32>>) -> Result<Self, ProfileError> {
        validate_parts(n, null_count, &lists)?;
        Ok(Self { n, null_count, lists })
    }

    /// Number of agents (equals the number of real objects).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of padded null objects.
    pub fn null_count(&self) -> usize {
        self.null_count
    }

    /// Size of the object universe, `n + null_count`.
    pub fn object_count(&self) -> usize {
        self.n + self.null_count
    }

    /// Agent `agent`'s ranked list (1-based agent id).
    ///
    /// # Panics
    ///
    /// Panics if `agent` is not in `1..=n`.
    pub fn list(&self, agent: u32) -> &[u32] {
        assert!(agent >= 1 && agent as usize <= self.n, "agent {agent} outside 1..={}", self.n);
        &self.lists[agent as usize - 1]
    }

    /// All lists, indexed by agent id minus one.
    pub fn lists(&self) -> &[Vec<u32>] {
        &self.lists
    }

    /// True when every agent ranks every real object and nothing is padded.
    pub fn is_full(&self) -> bool {
        self.null_count == 0 && self.lists.iter().all(|l| l.len() == self.n)
    }

    /// Re-runs construction validation; constructed profiles always pass.
    pub fn validate(&self) -> Result<(), ProfileError> {
        validate_parts(self.n, self.null_count, &self.lists)
    }

    /// 1-based rank of `object` in `agent`'s list, if listed.
    pub fn position_of(&self, agent: u32, object: u32) -> Option<usize> {
        self.list(agent).iter().position(|&o| o == object).map(|p| p + 1)
    }

    /// Copy of the profile with `extra` fresh null objects spliced into
    /// every list at the given placement. Fresh ids continue the universe,
    /// `object_count()+1` onward.
    pub fn pad_null(&self, extra: usize, placement: NullPlacement) -> PreferenceProfile {
        let base = self.object_count() as u32;
        let fresh: Vec<u32> = (base + 1..=base + extra as u32).collect();
        let lists = self
            .lists
            .iter()
            .map(|l| {
                let mut l = l.clone();
                match placement {
                    NullPlacement::Tail => l.extend_from_slice(&fresh),
                }
                l
            })
            .collect();
        let padded = PreferenceProfile { n: self.n, null_count: self.null_count + extra, lists };
        debug_assert!(padded.validate().is_ok());
        padded
    }
}

fn validate_parts(n: usize, null_count: usize, lists: &[Vec<u32>]) -> Result<(), ProfileError> {
    if n == 0 {
        return Err(ProfileError::NoAgents);
    }
    if lists.len() != n {
        return Err(ProfileError::WrongAgentCount { expected: n, found: lists.len() });
    }
    let max = (n + null_count) as u32;
    let mut seen = vec![0u32; max as usize + 1];
    for (idx, list) in lists.iter().enumerate() {
        let agent = idx as u32 + 1;
        if list.len() > max as usize {
            return Err(ProfileError::ListTooLong { agent, len: list.len(), max: max as usize });
        }
        for &id in list {
            if id == 0 || id > max {
                return Err(ProfileError::IdOutOfRange { agent, id, max });
            }
            if seen[id as usize] == agent {
                return Err(ProfileError::DuplicateId { agent, id });
            }
            seen[id as usize] = agent;
        }
    }
    Ok(())
}

/// One object per agent; objects never repeat.
///
/// With a real-object universe (`null_count == 0`) a complete allocation is
/// a permutation of `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    assignment: Vec<u32>,
}

impl Allocation {
    /// `assignment[i]` is the object of agent `i+1`; ids range over
    /// `1..=universe` and may not repeat.
    pub fn new(assignment: Vec<u32>, universe: usize) -> Result<Self, ProfileError> {
        if assignment.is_empty() {
            return Err(ProfileError::NoAgents);
        }
        let max = universe as u32;
        let mut taken = vec![false; universe + 1];
        for (idx, &id) in assignment.iter().enumerate() {
            let agent = idx as u32 + 1;
            if id == 0 || id > max {
                return Err(ProfileError::IdOutOfRange { agent, id, max });
            }
            if taken[id as usize] {
                return Err(ProfileError::DuplicateAssignment { object: id });
            }
            taken[id as usize] = true;
        }
        Ok(Self { assignment })
    }

    /// Object assigned to `agent` (1-based).
    ///
    /// # Panics
    ///
    /// Panics if `agent` is not in `1..=n`.
    pub fn object_of(&self, agent: u32) -> u32 {
        assert!(
            agent >= 1 && agent as usize <= self.assignment.len(),
            "agent {agent} outside 1..={}",
            self.assignment.len()
        );
        self.assignment[agent as usize - 1]
    }

    /// Assignment slice, indexed by agent id minus one.
    pub fn as_slice(&self) -> &[u32] {
        &self.assignment
    }

    /// Number of agents covered.
    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    /// True when the allocation is a permutation of the real objects
    /// `1..=n`, i.e. no nulls appear and everything real is assigned.
    pub fn is_permutation(&self) -> bool {
        let n = self.assignment.len() as u32;
        self.assignment.iter().all(|&id| id >= 1 && id <= n)
    }
}

/// Seeded random profile: each agent's list is the first `l` entries of an
/// independent uniform random permutation of `1..=n`.
///
/// The stream is a ChaCha8 generator seeded with `seed`; one (n, l, seed)
/// triple always reproduces the same profile within a build.
pub fn generate_random(n: usize, l: usize, seed: u64) -> Result<PreferenceProfile, ProfileError> {
    if n == 0 {
        return Err(ProfileError::NoAgents);
    }
    if l == 0 || l > n {
        return Err(ProfileError::BadTruncation { l, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<u32> = (1..=n as u32).collect();
    let mut lists = Vec::with_capacity(n);
    for _ in 0..n {
        let (head, _) = pool.partial_shuffle(&mut rng, l);
        lists.push(head.to_vec());
    }
    Ok(PreferenceProfile { n, null_count: 0, lists })
}

/// Full ranking induced by a cardinal utility: agent `i` ranks all objects
/// by strictly decreasing `u(i, j)`.
///
/// Equal or non-finite utilities are rejected rather than broken
/// arbitrarily, naming the agent and the offending objects.
pub fn generate_from_utility<F>(n: usize, u: F) -> Result<PreferenceProfile, ProfileError>
where
    F: Fn(u32, u32) -> f64,
{
    if n == 0 {
        return Err(ProfileError::NoAgents);
    }
    let mut lists = Vec::with_capacity(n);
    for agent in 1..=n as u32 {
        let mut scored: Vec<(u32, f64)> = (1..=n as u32).map(|j| (j, u(agent, j))).collect();
        for &(object, value) in &scored {
            if !value.is_finite() {
                return Err(ProfileError::NonFiniteUtility { agent, object });
            }
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        for pair in scored.windows(2) {
            if pair[0].1 == pair[1].1 {
                let (a, b) = (pair[0].0, pair[1].0);
                return Err(ProfileError::TiedUtility {
                    agent,
                    first: a.min(b),
                    second: a.max(b),
                });
            }
        }
        lists.push(scored.into_iter().map(|(j, _)| j).collect());
    }
    Ok(PreferenceProfile { n, null_count: 0, lists })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn walkthrough() -> PreferenceProfile {
        PreferenceProfile::new(3, 0, vec![vec![2, 1, 3], vec![1, 2, 3], vec![1, 3, 2]]).unwrap()
    }

    #[test]
    fn constructs_and_reads_back() {
        let p = walkthrough();
        assert_eq!(p.n(), 3);
        assert_eq!(p.null_count(), 0);
        assert_eq!(p.list(1), &[2, 1, 3]);
        assert_eq!(p.list(3), &[1, 3, 2]);
        assert!(p.is_full());
        assert_eq!(p.position_of(1, 2), Some(1));
        assert_eq!(p.position_of(1, 1), Some(2));
        assert_eq!(p.position_of(2, 9), None);
        p.validate().unwrap();
    }

    #[test]
    fn rejects_empty_market() {
        assert_eq!(PreferenceProfile::new(0, 0, vec![]).unwrap_err(), ProfileError::NoAgents);
    }

    #[test]
    fn rejects_wrong_list_count() {
        assert_eq!(
            PreferenceProfile::new(2, 0, vec![vec![1]]).unwrap_err(),
            ProfileError::WrongAgentCount { expected: 2, found: 1 }
        );
    }

    #[test]
    fn names_first_violating_agent() {
        // Agent 2 carries the first violation even though agent 3 has one too.
        let err = PreferenceProfile::new(
            3,
            0,
            vec![vec![1, 2], vec![1, 4], vec![2, 2]],
        )
        .unwrap_err();
        assert_eq!(err, ProfileError::IdOutOfRange { agent: 2, id: 4, max: 3 });
    }

    #[test]
    fn rejects_duplicate_within_list() {
        let err = PreferenceProfile::new(2, 0, vec![vec![1], vec![2, 2]]).unwrap_err();
        assert_eq!(err, ProfileError::DuplicateId { agent: 2, id: 2 });
    }

    #[test]
    fn rejects_zero_id() {
        let err = PreferenceProfile::new(2, 0, vec![vec![0], vec![1]]).unwrap_err();
        assert_eq!(err, ProfileError::IdOutOfRange { agent: 1, id: 0, max: 2 });
    }

    #[test]
    fn rejects_overlong_list() {
        let err = PreferenceProfile::new(1, 0, vec![vec![1, 1]]).unwrap_err();
        assert_eq!(err, ProfileError::ListTooLong { agent: 1, len: 2, max: 1 });
    }

    #[test]
    fn same_list_for_two_agents_is_fine() {
        PreferenceProfile::new(2, 0, vec![vec![1, 2], vec![1, 2]]).unwrap();
    }

    #[test]
    fn empty_lists_are_allowed() {
        // An agent may find nothing acceptable; it then keeps its endowment.
        let p = PreferenceProfile::new(2, 0, vec![vec![], vec![1]]).unwrap();
        assert_eq!(p.list(1), &[] as &[u32]);
    }

    #[test]
    fn null_ids_extend_the_universe() {
        let p = PreferenceProfile::new(2, 1, vec![vec![1, 3], vec![2]]).unwrap();
        assert_eq!(p.object_count(), 3);
        assert!(!p.is_full());
    }

    #[test]
    fn random_profiles_are_seed_deterministic() {
        let a = generate_random(5, 5, 7).unwrap();
        let b = generate_random(5, 5, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_random(5, 5, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_profiles_validate_and_truncate() {
        for seed in 0..20 {
            let p = generate_random(9, 4, seed).unwrap();
            p.validate().unwrap();
            assert!(p.lists().iter().all(|l| l.len() == 4));
        }
        let full = generate_random(6, 6, 3).unwrap();
        assert!(full.is_full());
    }

    #[test]
    fn random_rejects_bad_truncation() {
        assert_eq!(
            generate_random(4, 0, 1).unwrap_err(),
            ProfileError::BadTruncation { l: 0, n: 4 }
        );
        assert_eq!(
            generate_random(4, 5, 1).unwrap_err(),
            ProfileError::BadTruncation { l: 5, n: 4 }
        );
        assert_eq!(generate_random(0, 0, 1).unwrap_err(), ProfileError::NoAgents);
    }

    #[test]
    fn utility_ranking_sorts_descending() {
        // Distinct utilities per agent; agent 1's row is (0, -1, -4).
        let p = generate_from_utility(3, |i, j| {
            if i == 1 {
                -((j as f64 - 1.0) * (j as f64 - 1.0))
            } else {
                -(j as f64) - 10.0 * i as f64
            }
        })
        .unwrap();
        assert_eq!(p.list(1), &[1, 2, 3]);
        assert_eq!(p.list(2), &[1, 2, 3]);
        assert!(p.is_full());
    }

    #[test]
    fn utility_ties_name_agent_and_pair() {
        // Squared distance ties objects 1 and 3 for agent 2.
        let err = generate_from_utility(3, |i, j| {
            let d = j as f64 - i as f64;
            -(d * d)
        })
        .unwrap_err();
        assert_eq!(err, ProfileError::TiedUtility { agent: 2, first: 1, second: 3 });
    }

    #[test]
    fn utility_rejects_non_finite() {
        let err = generate_from_utility(2, |_, j| if j == 2 { f64::NAN } else { 0.0 }).unwrap_err();
        assert_eq!(err, ProfileError::NonFiniteUtility { agent: 1, object: 2 });
    }

    #[test]
    fn tail_padding_appends_fresh_nulls() {
        let p = walkthrough().pad_null(2, NullPlacement::Tail);
        assert_eq!(p.n(), 3);
        assert_eq!(p.null_count(), 2);
        assert_eq!(p.object_count(), 5);
        assert_eq!(p.list(1), &[2, 1, 3, 4, 5]);
        assert_eq!(p.list(3), &[1, 3, 2, 4, 5]);
        p.validate().unwrap();
    }

    #[test]
    fn padding_twice_keeps_ids_fresh() {
        let p = walkthrough().pad_null(1, NullPlacement::Tail).pad_null(1, NullPlacement::Tail);
        assert_eq!(p.null_count(), 2);
        assert_eq!(p.list(2), &[1, 2, 3, 4, 5]);
    }

    #[test]
    fn allocation_validates_bijection() {
        let a = Allocation::new(vec![2, 1, 3], 3).unwrap();
        assert!(a.is_permutation());
        assert_eq!(a.object_of(1), 2);
        assert_eq!(
            Allocation::new(vec![2, 2, 3], 3).unwrap_err(),
            ProfileError::DuplicateAssignment { object: 2 }
        );
        assert_eq!(
            Allocation::new(vec![4, 1, 2], 3).unwrap_err(),
            ProfileError::IdOutOfRange { agent: 1, id: 4, max: 3 }
        );
    }

    #[test]
    fn allocation_with_null_is_not_a_permutation() {
        let a = Allocation::new(vec![4, 1, 2], 4).unwrap();
        assert!(!a.is_permutation());
    }

    #[test]
    fn errors_render_with_agent_context() {
        use alloc::string::ToString;
        let msg = ProfileError::DuplicateId { agent: 7, id: 3 }.to_string();
        assert!(msg.contains("agent 7"), "{msg}");
        assert!(msg.contains("object 3"), "{msg}");
        let msg = ProfileError::NoAgents.to_string();
        assert!(msg.contains("no agents"), "{msg}");
    }
}
