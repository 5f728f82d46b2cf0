//! Seeded synthetic instances for tests, benchmarks, and demos.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{Case, CrossRef, Instance, Location, ScoreMatrix, ScoreMode};
use crate::optimizer::{Capacity, SolveRequest};
use crate::schedule::{day_violations, schedule_cost, Meeting, Schedule, ScheduleConfig};
use crate::score::sigmoid;

#[derive(Debug, Clone, Copy)]
pub struct SmallRequestShape {
    pub max_cases: usize,
    pub max_locations: usize,
    pub max_members: u32,
    /// Probability that a pair is compatible.
    pub compatible: f64,
    /// Probability that the request carries random locks.
    pub lock_rate: f64,
    pub cross_refs: bool,
}

impl Default for SmallRequestShape {
    fn default() -> Self {
        SmallRequestShape {
            max_cases: 6,
            max_locations: 3,
            max_members: 4,
            compatible: 0.75,
            lock_rate: 0.2,
            cross_refs: false,
        }
    }
}

/// Random small request with arbitrary scores, masks, capacities, and
/// (sometimes) locks. Locks may be capacity-infeasible.
pub fn small_request<R: Rng>(rng: &mut R, shape: &SmallRequestShape) -> SolveRequest {
    let n_cases = rng.gen_range(1..=shape.max_cases);
    let n_locs = rng.gen_range(1..=shape.max_locations);
    let mut locations: Vec<Location> = (0..n_locs)
        .map(|j| {
            let cases = rng.gen_range(0..=3);
            let members = rng.gen_range(0..=3 * shape.max_members);
            Location::new(format!("L{j}"), cases, members)
        })
        .collect();
    locations.shuffle(rng);
    let mut cases: Vec<Case> = (0..n_cases)
        .map(|i| {
            let mut c = Case::new(format!("C{i}"));
            c.member_count = rng.gen_range(1..=shape.max_members);
            c.employable_count = rng.gen_range(0..=c.member_count);
            c
        })
        .collect();
    cases.shuffle(rng);
    if shape.cross_refs {
        for i in 0..n_cases {
            if rng.gen_bool(0.3) {
                let other = rng.gen_range(0..n_cases);
                if other != i {
                    let id = cases[other].id.clone();
                    cases[i].cross_refs.insert(CrossRef::Case(id));
                }
            }
            if rng.gen_bool(0.2) {
                let loc = locations[rng.gen_range(0..n_locs)].id.clone();
                cases[i].cross_refs.insert(CrossRef::Location(loc));
            }
        }
    }
    let instance = Instance::new(cases, locations, 0, ScoreMode::OutcomePredicted);
    let scores: Vec<f64> = (0..n_cases * n_locs)
        .map(|_| (rng.gen_range(0.0..4.0f64) * 1000.0).round() / 1000.0)
        .collect();
    let compatible: Vec<bool> = (0..n_cases * n_locs).map(|_| rng.gen_bool(shape.compatible)).collect();
    let matrix = ScoreMatrix::new(
        instance.cases.iter().map(|c| c.id.clone()).collect(),
        instance.locations.iter().map(|l| l.id.clone()).collect(),
        scores,
        compatible,
    )
    .expect("valid synthetic matrix");
    let mut req = SolveRequest::new(instance, matrix);
    if rng.gen_bool(shape.lock_rate) {
        let n_locks = rng.gen_range(1..=n_cases.min(2));
        for _ in 0..n_locks {
            let c = req.instance.cases[rng.gen_range(0..n_cases)].id.clone();
            let l = req.instance.locations[rng.gen_range(0..n_locs)].id.clone();
            req.locks.insert(c, l);
        }
    }
    if rng.gen_bool(0.2) {
        let l = req.instance.locations[rng.gen_range(0..n_locs)].id.clone();
        req.capacity_overrides.insert(
            l,
            Capacity {
                cases: rng.gen_range(0..=4),
                members: rng.gen_range(0..=10),
            },
        );
    }
    if shape.cross_refs {
        req.cross_ref_bonus = rng.gen_range(0.0..1.0);
    }
    req
}

/// Student-to-center instance built by planting a capacity-respecting
/// allocation first and then drawing preference lists that contain each
/// student's planted center. Returns the instance and the planted center
/// index per student.
pub fn planted_allocation<R: Rng>(
    rng: &mut R,
    students: usize,
    centers: usize,
    list_length: usize,
    dimension: usize,
) -> (Instance, Vec<usize>) {
    let mut capacity = vec![0u32; centers];
    let mut planted = Vec::with_capacity(students);
    for s in 0..students {
        let c = if s < centers { s } else { rng.gen_range(0..centers) };
        capacity[c] += 1;
        planted.push(c);
    }
    let locations: Vec<Location> = (0..centers)
        .map(|j| {
            let slack = rng.gen_range(0..=2);
            let mut l = Location::new(format!("P{j:02}"), capacity[j] + slack, capacity[j] + slack);
            l.desired_levels = (0..dimension).map(|_| rng.gen_range(0.0..1.0)).collect();
            l
        })
        .collect();
    let cases: Vec<Case> = (0..students)
        .map(|s| {
            let mut c = Case::new(format!("S{s:04}"));
            let mut others: Vec<usize> = (0..centers).filter(|&j| j != planted[s]).collect();
            others.shuffle(rng);
            let mut ranked: Vec<usize> = others.into_iter().take(list_length.saturating_sub(1)).collect();
            let at = rng.gen_range(0..=ranked.len());
            ranked.insert(at, planted[s]);
            c.preference_ranks = ranked.iter().map(|&j| locations[j].id.clone()).collect();
            let centers: BTreeSet<String> = locations
                .iter()
                .filter(|l| !c.preference_ranks.contains(&l.id))
                .take(1)
                .map(|l| l.id.clone())
                .collect();
            c.refusals = centers;
            c.attributes.levels = (0..dimension).map(|_| rng.gen_range(0.0..1.0)).collect();
            c
        })
        .collect();
    (
        Instance::new(cases, locations, dimension, ScoreMode::PreferenceAttribute),
        planted,
    )
}

/// Rows of standard normal features with labels drawn from the logistic
/// model `sigmoid(intercept + weights . x)`.
pub fn logistic_data<R: Rng>(rng: &mut R, n: usize, weights: &[f64], intercept: f64) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = weights.iter().map(|_| StandardNormal.sample(rng)).collect();
        let z = intercept + row.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>();
        y.push(rng.gen::<f64>() < sigmoid(z));
        x.push(row);
    }
    (x, y)
}

/// Meetings scattered uniformly in a box around a center point.
pub fn meetings_around<R: Rng>(
    rng: &mut R,
    n: usize,
    center: (f64, f64),
    spread_deg: f64,
    duration: u32,
) -> Vec<Meeting> {
    (0..n)
        .map(|k| Meeting {
            client_id: format!("M{k:03}"),
            latitude: center.0 + rng.gen_range(-spread_deg..spread_deg),
            longitude: center.1 + rng.gen_range(-spread_deg..spread_deg),
            duration_minutes: duration,
            selected: true,
        })
        .collect()
}

/// A uniformly shuffled grouping whose day sizes and minutes respect
/// `config`, drawn by rejection. `None` after 1000 rejected draws.
pub fn random_feasible_partition<R: Rng>(
    rng: &mut R,
    meetings: &[Meeting],
    config: &ScheduleConfig,
) -> Option<Schedule> {
    let n = meetings.len();
    let counts = config.used_day_range(n);
    for _ in 0..1000 {
        let k = *counts.choose(rng)?;
        let mut sizes = vec![config.min_per_day as usize; k];
        for _ in 0..n.saturating_sub(k * config.min_per_day as usize) {
            let open: Vec<usize> = (0..k).filter(|&d| sizes[d] < config.max_per_day as usize).collect();
            sizes[*open.choose(rng)?] += 1;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut day_groups: Vec<Vec<String>> = Vec::with_capacity(config.days as usize);
        let mut at = 0;
        for size in sizes {
            day_groups.push(
                order[at..at + size]
                    .iter()
                    .map(|&m| meetings[m].client_id.clone())
                    .collect(),
            );
            at += size;
        }
        day_groups.resize(config.days as usize, Vec::new());
        if day_violations(&day_groups, meetings, config).ok()?.is_empty() {
            let cost = schedule_cost(&day_groups, meetings).ok()?;
            return Some(Schedule {
                day_groups,
                cost,
                feasible: true,
                violations: Vec::new(),
            });
        }
    }
    None
}
