//! Exact two-dimensionally capacitated assignment with locked pairs,
//! compatibility gating, and co-placement bonuses.
//!
//! [`solve`] is a depth-first branch-and-bound. [`brute_force_oracle`]
//! enumerates every placement for small requests and [`greedy_warm_start`]
//! supplies a feasible starting incumbent. All three share one objective
//! function and one tie-break, so the exact methods agree on placements and
//! not only on objective values.

mod relax;
mod search;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::model::{CrossRef, Instance, ScoreMatrix};

pub use relax::{lagrangian_bound, solve_relaxation, Relaxation, RelaxationInput};

/// Literal used for unplaced cases in tabular exports.
pub const UNASSIGNED: &str = "UNASSIGNED";

/// Case and member capacity of a location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Capacity {
    pub cases: u32,
    pub members: u32,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRequest {
    pub instance: Instance,
    pub matrix: ScoreMatrix,
    /// Case id → location id. Locked cases ignore compatibility.
    #[serde(default)]
    pub locks: BTreeMap<String, String>,
    /// Location id → replacement capacities.
    #[serde(default)]
    pub capacity_overrides: BTreeMap<String, Capacity>,
    /// Added once per co-placed cross-referenced pair.
    #[serde(default)]
    pub cross_ref_bonus: f64,
    #[serde(default = "default_true")]
    pub allow_unassigned: bool,
}

impl SolveRequest {
    pub fn new(instance: Instance, matrix: ScoreMatrix) -> Self {
        SolveRequest {
            instance,
            matrix,
            locks: BTreeMap::new(),
            capacity_overrides: BTreeMap::new(),
            cross_ref_bonus: 0.0,
            allow_unassigned: true,
        }
    }

    pub fn effective_capacity(&self, location: usize) -> Capacity {
        let loc = &self.instance.locations[location];
        self.capacity_overrides.get(&loc.id).copied().unwrap_or(Capacity {
            cases: loc.case_capacity,
            members: loc.member_capacity,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Proven optimal.
    Optimal,
    /// Search stopped early; the placement is the best incumbent found.
    Interrupted,
    /// Feasible but unproven (greedy construction).
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes_explored: u64,
    pub relaxations_solved: u64,
    /// Upper bound on the objective proven at the root.
    pub best_bound: f64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Case id → location id, `None` when unassigned.
    pub placement: BTreeMap<String, Option<String>>,
    pub objective: f64,
    pub status: SolveStatus,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("locked cases exceed capacity at {}", .locations.join(", "))]
    InfeasibleLocks { locations: Vec<String> },
    #[error("no placement satisfies every constraint")]
    Infeasible,
    #[error("search interrupted before any feasible placement was found")]
    Interrupted,
    #[error("unknown case {0}")]
    UnknownCase(String),
    #[error("unknown location {0}")]
    UnknownLocation(String),
    #[error("score matrix does not match the instance")]
    MatrixMismatch,
    #[error("cross-reference bonus {0} must be finite and non-negative")]
    InvalidBonus(f64),
    #[error("brute force is limited to 8 cases and 4 locations, got {cases} x {locations}")]
    OracleTooLarge { cases: usize, locations: usize },
}

impl SolveError {
    pub fn code(&self) -> &'static str {
        match self {
            SolveError::InfeasibleLocks { .. } => "INFEASIBLE_LOCKS",
            SolveError::Infeasible => "INFEASIBLE",
            SolveError::Interrupted => "INTERRUPTED",
            SolveError::UnknownCase(_) => "UNKNOWN_CASE",
            SolveError::UnknownLocation(_) => "UNKNOWN_LOCATION",
            SolveError::MatrixMismatch => "MATRIX_MISMATCH",
            SolveError::InvalidBonus(_) => "INVALID_BONUS",
            SolveError::OracleTooLarge { .. } => "ORACLE_TOO_LARGE",
        }
    }
}

/// Cooperative cancellation flag polled between node expansions.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, AtomicOrdering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(AtomicOrdering::Relaxed)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub cancel: Option<CancelToken>,
    pub node_limit: Option<u64>,
}

/// A cross-reference that earns the bonus when satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Link {
    /// Two cases placed at the same location.
    Pair(usize, usize),
    /// A case placed at a specific location.
    Anchor(usize, usize),
}

/// Objective evaluation shared by the solvers and the interactive board.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    pub request: &'a SolveRequest,
    links: Vec<Link>,
    /// Per case, indices into `links`.
    touching: Vec<Vec<usize>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(request: &'a SolveRequest) -> Self {
        let instance = &request.instance;
        let index = instance.index();
        let mut set = BTreeSet::new();
        for (a, case) in instance.cases.iter().enumerate() {
            for link in &case.cross_refs {
                match link {
                    CrossRef::Case(other) => {
                        if let Some(b) = index.case(other) {
                            if a != b {
                                set.insert(Link::Pair(a.min(b), a.max(b)));
                            }
                        }
                    }
                    CrossRef::Location(loc) => {
                        if let Some(l) = index.location(loc) {
                            set.insert(Link::Anchor(a, l));
                        }
                    }
                }
            }
        }
        let links: Vec<Link> = set.into_iter().collect();
        let mut touching = vec![Vec::new(); instance.cases.len()];
        for (k, link) in links.iter().enumerate() {
            match *link {
                Link::Pair(a, b) => {
                    touching[a].push(k);
                    touching[b].push(k);
                }
                Link::Anchor(a, _) => touching[a].push(k),
            }
        }
        Evaluator {
            request,
            links,
            touching,
        }
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn links_touching(&self, case: usize) -> impl Iterator<Item = Link> + '_ {
        self.touching[case].iter().map(move |&k| self.links[k])
    }

    pub fn pair_score(&self, case: usize, slot: Option<usize>) -> f64 {
        slot.map_or(0.0, |l| self.request.matrix.score(case, l))
    }

    pub fn link_satisfied(link: Link, placement: &[Option<usize>]) -> bool {
        match link {
            Link::Pair(a, b) => placement[a].is_some() && placement[a] == placement[b],
            Link::Anchor(a, l) => placement[a] == Some(l),
        }
    }

    pub fn satisfied_links(&self, placement: &[Option<usize>]) -> usize {
        self.links
            .iter()
            .filter(|&&l| Self::link_satisfied(l, placement))
            .count()
    }

    /// Satisfied links involving `case` under `placement`.
    pub fn satisfied_touching(&self, case: usize, placement: &[Option<usize>]) -> usize {
        self.links_touching(case)
            .filter(|&l| Self::link_satisfied(l, placement))
            .count()
    }

    /// Pair scores summed in case order, plus the bonus for every satisfied
    /// link. Every solver compares objectives through this one function.
    pub fn objective(&self, placement: &[Option<usize>]) -> f64 {
        let pairs: f64 = placement
            .iter()
            .enumerate()
            .map(|(i, &slot)| self.pair_score(i, slot))
            .fold(0.0, |acc, v| acc + v);
        if self.request.cross_ref_bonus == 0.0 {
            pairs
        } else {
            pairs + self.request.cross_ref_bonus * self.satisfied_links(placement) as f64
        }
    }
}

/// Request compiled to index form, with locks checked.
pub(crate) struct Problem<'a> {
    pub eval: Evaluator<'a>,
    pub n_loc: usize,
    pub members: Vec<u32>,
    pub capacity: Vec<Capacity>,
    pub locked: Vec<Option<usize>>,
    /// Case indices sorted by id.
    pub case_order: Vec<usize>,
    /// Position of each location in id order.
    pub loc_rank: Vec<usize>,
}

impl<'a> Problem<'a> {
    pub fn compile(req: &'a SolveRequest) -> Result<Self, SolveError> {
        let instance = &req.instance;
        if !req.matrix.matches(instance) {
            return Err(SolveError::MatrixMismatch);
        }
        if !req.cross_ref_bonus.is_finite() || req.cross_ref_bonus < 0.0 {
            return Err(SolveError::InvalidBonus(req.cross_ref_bonus));
        }
        let index = instance.index();
        for loc in req.capacity_overrides.keys() {
            index
                .location(loc)
                .ok_or_else(|| SolveError::UnknownLocation(loc.clone()))?;
        }
        let n_loc = instance.locations.len();
        let mut locked = vec![None; instance.cases.len()];
        for (case, loc) in &req.locks {
            let i = index.case(case).ok_or_else(|| SolveError::UnknownCase(case.clone()))?;
            let j = index
                .location(loc)
                .ok_or_else(|| SolveError::UnknownLocation(loc.clone()))?;
            locked[i] = Some(j);
        }
        let members: Vec<u32> = instance.cases.iter().map(|c| c.member_count).collect();
        let capacity: Vec<Capacity> = (0..n_loc).map(|j| req.effective_capacity(j)).collect();

        let mut load = vec![(0u64, 0u64); n_loc];
        for (i, slot) in locked.iter().enumerate() {
            if let Some(j) = *slot {
                load[j].0 += 1;
                load[j].1 += members[i] as u64;
            }
        }
        let mut violating: Vec<String> = (0..n_loc)
            .filter(|&j| load[j].0 > capacity[j].cases as u64 || load[j].1 > capacity[j].members as u64)
            .map(|j| instance.locations[j].id.clone())
            .collect();
        if !violating.is_empty() {
            violating.sort();
            return Err(SolveError::InfeasibleLocks { locations: violating });
        }

        let mut case_order: Vec<usize> = (0..instance.cases.len()).collect();
        case_order.sort_by(|&a, &b| instance.cases[a].id.cmp(&instance.cases[b].id));
        let mut by_id: Vec<usize> = (0..n_loc).collect();
        by_id.sort_by(|&a, &b| instance.locations[a].id.cmp(&instance.locations[b].id));
        let mut loc_rank = vec![0; n_loc];
        for (rank, &j) in by_id.iter().enumerate() {
            loc_rank[j] = rank;
        }

        Ok(Problem {
            eval: Evaluator::new(req),
            n_loc,
            members,
            capacity,
            locked,
            case_order,
            loc_rank,
        })
    }

    pub fn request(&self) -> &'a SolveRequest {
        self.eval.request
    }

    pub fn n_cases(&self) -> usize {
        self.members.len()
    }

    /// Compatible locations of a free case that could hold it on their own.
    pub fn options(&self, case: usize) -> Vec<usize> {
        let m = &self.request().matrix;
        (0..self.n_loc)
            .filter(|&j| {
                m.is_compatible(case, j)
                    && self.capacity[j].cases >= 1
                    && self.capacity[j].members >= self.members[case]
            })
            .collect()
    }

    fn slot_rank(&self, slot: Option<usize>) -> usize {
        slot.map_or(self.n_loc, |j| self.loc_rank[j])
    }

    /// Tie-break order: compare cases in id order, preferring the location
    /// with the smaller id and any location over unassigned.
    pub fn key_cmp(&self, a: &[Option<usize>], b: &[Option<usize>]) -> Ordering {
        for &i in &self.case_order {
            let ord = self.slot_rank(a[i]).cmp(&self.slot_rank(b[i]));
            if ord != Ordering::Equal {
                return ord;
            }
        }
        Ordering::Equal
    }

    /// True when `(obj, placement)` beats the incumbent.
    pub fn better(&self, obj: f64, placement: &[Option<usize>], incumbent: Option<&(f64, Vec<Option<usize>>)>) -> bool {
        match incumbent {
            None => true,
            Some((best, best_p)) => obj > *best || (obj == *best && self.key_cmp(placement, best_p) == Ordering::Less),
        }
    }

    pub fn fits(&self, placement: &[Option<usize>]) -> bool {
        let mut load = vec![(0u64, 0u64); self.n_loc];
        for (i, slot) in placement.iter().enumerate() {
            if let Some(j) = *slot {
                load[j].0 += 1;
                load[j].1 += self.members[i] as u64;
            }
        }
        (0..self.n_loc)
            .all(|j| load[j].0 <= self.capacity[j].cases as u64 && load[j].1 <= self.capacity[j].members as u64)
    }

    pub fn to_assignment(
        &self,
        placement: &[Option<usize>],
        objective: f64,
        status: SolveStatus,
        stats: SolveStats,
    ) -> Assignment {
        let instance = &self.request().instance;
        let placement = placement
            .iter()
            .enumerate()
            .map(|(i, slot)| {
                (
                    instance.cases[i].id.clone(),
                    slot.map(|j| instance.locations[j].id.clone()),
                )
            })
            .collect();
        Assignment {
            placement,
            objective,
            status,
            stats,
        }
    }
}

/// Converts an id-keyed placement to index form. Missing cases count as unassigned.
pub fn placement_indices(
    instance: &Instance,
    placement: &BTreeMap<String, Option<String>>,
) -> Result<Vec<Option<usize>>, SolveError> {
    let index = instance.index();
    let mut out = vec![None; instance.cases.len()];
    for (case, slot) in placement {
        let i = index.case(case).ok_or_else(|| SolveError::UnknownCase(case.clone()))?;
        out[i] = match slot {
            Some(loc) => Some(
                index
                    .location(loc)
                    .ok_or_else(|| SolveError::UnknownLocation(loc.clone()))?,
            ),
            None => None,
        };
    }
    Ok(out)
}

/// Optimal assignment by branch-and-bound.
pub fn solve(request: &SolveRequest) -> Result<Assignment, SolveError> {
    solve_with(request, &SolveOptions::default())
}

pub fn solve_with(request: &SolveRequest, options: &SolveOptions) -> Result<Assignment, SolveError> {
    let started = Instant::now();
    let problem = Problem::compile(request)?;
    let warm = greedy_placement(&problem).ok();
    let outcome = search::run(&problem, warm, options)?;
    let stats = SolveStats {
        nodes_explored: outcome.nodes,
        relaxations_solved: outcome.relaxations,
        best_bound: outcome.root_bound,
        elapsed_ms: started.elapsed().as_millis() as u64,
    };
    let status = if outcome.interrupted {
        SolveStatus::Interrupted
    } else {
        SolveStatus::Optimal
    };
    Ok(problem.to_assignment(&outcome.placement, outcome.objective, status, stats))
}

fn greedy_placement(problem: &Problem<'_>) -> Result<(f64, Vec<Option<usize>>), SolveError> {
    let req = problem.request();
    let m = &req.matrix;
    let mut placement = problem.locked.clone();
    let mut res: Vec<(i64, i64)> = problem
        .capacity
        .iter()
        .map(|c| (c.cases as i64, c.members as i64))
        .collect();
    for (i, slot) in placement.iter().enumerate() {
        if let Some(j) = *slot {
            res[j].0 -= 1;
            res[j].1 -= problem.members[i] as i64;
        }
    }
    let mut free: Vec<(usize, Vec<usize>)> = (0..problem.n_cases())
        .filter(|&i| problem.locked[i].is_none())
        .map(|i| {
            let mut opts = problem.options(i);
            opts.sort_by(|&a, &b| {
                m.score(i, b)
                    .total_cmp(&m.score(i, a))
                    .then(problem.loc_rank[a].cmp(&problem.loc_rank[b]))
            });
            (i, opts)
        })
        .collect();
    let best = |(i, opts): &(usize, Vec<usize>)| opts.first().map_or(f64::NEG_INFINITY, |&j| m.score(*i, j));
    let ids = &req.instance.cases;
    free.sort_by(|a, b| best(b).total_cmp(&best(a)).then_with(|| ids[a.0].id.cmp(&ids[b.0].id)));

    for (i, opts) in &free {
        let need = problem.members[*i] as i64;
        match opts.iter().find(|&&j| res[j].0 >= 1 && res[j].1 >= need) {
            Some(&j) => {
                placement[*i] = Some(j);
                res[j].0 -= 1;
                res[j].1 -= need;
            }
            None if req.allow_unassigned => {}
            None => return Err(SolveError::Infeasible),
        }
    }
    Ok((problem.eval.objective(&placement), placement))
}

/// Feasible placement built greedily: locks first, then cases by decreasing
/// best score, each into its best location with room left.
pub fn greedy_warm_start(request: &SolveRequest) -> Result<Assignment, SolveError> {
    let started = Instant::now();
    let problem = Problem::compile(request)?;
    let (objective, placement) = greedy_placement(&problem)?;
    let stats = SolveStats {
        elapsed_ms: started.elapsed().as_millis() as u64,
        ..SolveStats::default()
    };
    Ok(problem.to_assignment(&placement, objective, SolveStatus::Heuristic, stats))
}

pub const ORACLE_MAX_CASES: usize = 8;
pub const ORACLE_MAX_LOCATIONS: usize = 4;

/// Exhaustive enumeration of every placement vector. Reference only.
pub fn brute_force_oracle(request: &SolveRequest) -> Result<Assignment, SolveError> {
    let (cases, locations) = (request.instance.cases.len(), request.instance.locations.len());
    if cases > ORACLE_MAX_CASES || locations > ORACLE_MAX_LOCATIONS {
        return Err(SolveError::OracleTooLarge { cases, locations });
    }
    let started = Instant::now();
    let problem = Problem::compile(request)?;
    let m = &request.matrix;
    let choices: Vec<Vec<Option<usize>>> = (0..cases)
        .map(|i| match problem.locked[i] {
            Some(j) => vec![Some(j)],
            None => {
                let mut c: Vec<Option<usize>> = (0..locations).filter(|&j| m.is_compatible(i, j)).map(Some).collect();
                if request.allow_unassigned {
                    c.push(None);
                }
                c
            }
        })
        .collect();

    let mut best: Option<(f64, Vec<Option<usize>>)> = None;
    let mut digits = vec![0usize; cases];
    let mut placement = vec![None; cases];
    let mut visited = 0u64;
    if choices.iter().all(|c| !c.is_empty()) {
        'outer: loop {
            for i in 0..cases {
                placement[i] = choices[i][digits[i]];
            }
            visited += 1;
            if problem.fits(&placement) {
                let obj = problem.eval.objective(&placement);
                if problem.better(obj, &placement, best.as_ref()) {
                    best = Some((obj, placement.clone()));
                }
            }
            for i in 0..cases {
                digits[i] += 1;
                if digits[i] < choices[i].len() {
                    continue 'outer;
                }
                digits[i] = 0;
            }
            break;
        }
    }
    let (objective, placement) = best.ok_or(SolveError::Infeasible)?;
    let stats = SolveStats {
        nodes_explored: visited,
        relaxations_solved: 0,
        best_bound: objective,
        elapsed_ms: started.elapsed().as_millis() as u64,
    };
    Ok(problem.to_assignment(&placement, objective, SolveStatus::Optimal, stats))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationSubscription {
    pub location_id: String,
    pub placed_cases: u32,
    pub placed_members: u32,
    pub case_capacity: u32,
    pub member_capacity: u32,
    /// Placed cases over case capacity (1.0 when the capacity is zero).
    pub fill_ratio: f64,
    pub undersubscribed: bool,
    pub full: bool,
}

pub const UNDERSUBSCRIBED_BELOW: f64 = 0.5;

/// Occupancy of every location under `placement`, against effective capacities.
pub fn subscription_report(
    placement: &BTreeMap<String, Option<String>>,
    request: &SolveRequest,
) -> Vec<LocationSubscription> {
    let instance = &request.instance;
    let index = instance.index();
    let mut counts = vec![(0u32, 0u32); instance.locations.len()];
    for (case, slot) in placement {
        let (Some(i), Some(loc)) = (index.case(case), slot) else {
            continue;
        };
        if let Some(j) = index.location(loc) {
            counts[j].0 += 1;
            counts[j].1 += instance.cases[i].member_count;
        }
    }
    instance
        .locations
        .iter()
        .enumerate()
        .map(|(j, loc)| {
            let cap = request.effective_capacity(j);
            let (cases, members) = counts[j];
            let fill_ratio = if cap.cases == 0 {
                1.0
            } else {
                cases as f64 / cap.cases as f64
            };
            LocationSubscription {
                location_id: loc.id.clone(),
                placed_cases: cases,
                placed_members: members,
                case_capacity: cap.cases,
                member_capacity: cap.members,
                fill_ratio,
                undersubscribed: fill_ratio < UNDERSUBSCRIBED_BELOW,
                full: cases >= cap.cases || members >= cap.members,
            }
        })
        .collect()
}
