//! Groups geo-located meetings into days so that each day's meetings sit
//! close together, under per-day count and minute limits.
//!
//! The cost of a day is the summed great-circle distance from each meeting
//! to the day's centroid (arithmetic mean of latitude and longitude). Count
//! limits apply to non-empty days only.

use std::collections::HashSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_RESTARTS: u32 = 16;

const LLOYD_ITERATIONS: usize = 50;
const IMPROVEMENT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meeting {
    pub client_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub duration_minutes: u32,
    pub selected: bool,
}

impl Meeting {
    pub fn new(client_id: impl Into<String>, latitude: f64, longitude: f64, duration_minutes: u32) -> Self {
        Meeting {
            client_id: client_id.into(),
            latitude,
            longitude,
            duration_minutes,
            selected: true,
        }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        let bad = |reason: &str| {
            Err(ScheduleError::InvalidMeeting {
                client_id: self.client_id.clone(),
                reason: reason.to_string(),
            })
        };
        if !(-90.0..=90.0).contains(&self.latitude) {
            return bad("latitude outside [-90, 90]");
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return bad("longitude outside [-180, 180]");
        }
        if self.duration_minutes == 0 {
            return bad("duration must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub days: u32,
    pub min_per_day: u32,
    pub max_per_day: u32,
    pub max_minutes_per_day: u32,
}

impl Default for ScheduleConfig {
    /// Five days of three to nine meetings, six hours each.
    fn default() -> Self {
        ScheduleConfig {
            days: 5,
            min_per_day: 3,
            max_per_day: 9,
            max_minutes_per_day: 360,
        }
    }
}

impl ScheduleConfig {
    /// Whether a day holding `count` meetings is allowed (empty days always are).
    pub fn count_ok(&self, count: usize) -> bool {
        count == 0 || (self.min_per_day as usize..=self.max_per_day as usize).contains(&count)
    }

    /// Numbers of used days that can hold exactly `n` meetings.
    pub fn used_day_range(&self, n: usize) -> Vec<usize> {
        if n == 0 {
            return vec![0];
        }
        let (min, max) = (self.min_per_day as usize, self.max_per_day as usize);
        (1..=self.days as usize)
            .filter(|&k| k * min <= n && n <= k * max)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeasibilityCode {
    InvalidConfig,
    TooManyPerDay,
    TooFewForMin,
    CountPartitionImpossible,
    MeetingTooLong,
    MinutesExceedCapacity,
}

impl FeasibilityCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeasibilityCode::InvalidConfig => "INVALID_CONFIG",
            FeasibilityCode::TooManyPerDay => "TOO_MANY_PER_DAY",
            FeasibilityCode::TooFewForMin => "TOO_FEW_FOR_MIN",
            FeasibilityCode::CountPartitionImpossible => "COUNT_PARTITION_IMPOSSIBLE",
            FeasibilityCode::MeetingTooLong => "MEETING_TOO_LONG",
            FeasibilityCode::MinutesExceedCapacity => "MINUTES_EXCEED_CAPACITY",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityIssue {
    pub code: FeasibilityCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub issues: Vec<FeasibilityIssue>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, code: FeasibilityCode) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, issue) in self.issues.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", issue.code.as_str(), issue.message)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DayViolationCode {
    DayTooFew,
    DayTooMany,
    DayMinutesExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayViolation {
    pub day: usize,
    pub code: DayViolationCode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// One list of client ids per day; unused days are empty.
    pub day_groups: Vec<Vec<String>>,
    /// Kilometers.
    pub cost: f64,
    pub feasible: bool,
    pub violations: Vec<DayViolation>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScheduleError {
    #[error("meeting {client_id}: {reason}")]
    InvalidMeeting { client_id: String, reason: String },
    #[error("unknown meeting {0}")]
    UnknownMeeting(String),
    #[error("meeting {0} is scheduled more than once")]
    DuplicateMeeting(String),
    #[error("no feasible schedule: {0}")]
    Infeasible(FeasibilityReport),
    #[error("repair could not satisfy the day constraints")]
    RepairFailed,
}

impl ScheduleError {
    pub fn code(&self) -> &'static str {
        match self {
            ScheduleError::InvalidMeeting { .. } => "INVALID_MEETING",
            ScheduleError::UnknownMeeting(_) => "UNKNOWN_MEETING",
            ScheduleError::DuplicateMeeting(_) => "DUPLICATE_MEETING",
            ScheduleError::Infeasible(_) | ScheduleError::RepairFailed => "INFEASIBLE",
        }
    }
}

/// Keeps the first meeting per client id.
pub fn deduplicate(meetings: &[Meeting]) -> (Vec<Meeting>, usize) {
    let mut seen = HashSet::new();
    let unique: Vec<Meeting> = meetings
        .iter()
        .filter(|m| seen.insert(m.client_id.as_str()))
        .cloned()
        .collect();
    let removed = meetings.len() - unique.len();
    (unique, removed)
}

/// Selected meetings, deduplicated.
pub fn prepare(meetings: &[Meeting]) -> (Vec<Meeting>, usize) {
    let selected: Vec<Meeting> = meetings.iter().filter(|m| m.selected).cloned().collect();
    deduplicate(&selected)
}

/// Necessary conditions for a schedule to exist.
pub fn check_feasibility(meetings: &[Meeting], config: &ScheduleConfig) -> FeasibilityReport {
    let mut issues = Vec::new();
    let mut push = |code, message: String| issues.push(FeasibilityIssue { code, message });
    if config.days == 0 || config.max_minutes_per_day == 0 || config.min_per_day > config.max_per_day {
        push(
            FeasibilityCode::InvalidConfig,
            format!(
                "days {} and minutes {} must be positive, min {} must not exceed max {}",
                config.days, config.max_minutes_per_day, config.min_per_day, config.max_per_day
            ),
        );
        return FeasibilityReport { issues };
    }
    let n = meetings.len();
    let days = config.days as usize;
    if n > days * config.max_per_day as usize {
        push(
            FeasibilityCode::TooManyPerDay,
            format!("{n} meetings exceed {} days x {} per day", days, config.max_per_day),
        );
    } else if n > 0 && n < config.min_per_day as usize {
        push(
            FeasibilityCode::TooFewForMin,
            format!("{n} meetings cannot fill a day of at least {}", config.min_per_day),
        );
    } else if config.used_day_range(n).is_empty() {
        push(
            FeasibilityCode::CountPartitionImpossible,
            format!(
                "{n} meetings cannot be split into days of {} to {}",
                config.min_per_day, config.max_per_day
            ),
        );
    }
    for m in meetings
        .iter()
        .filter(|m| m.duration_minutes > config.max_minutes_per_day)
    {
        push(
            FeasibilityCode::MeetingTooLong,
            format!(
                "{} lasts {} minutes, over the daily {}",
                m.client_id, m.duration_minutes, config.max_minutes_per_day
            ),
        );
    }
    let total: u64 = meetings.iter().map(|m| m.duration_minutes as u64).sum();
    let capacity = days as u64 * config.max_minutes_per_day as u64;
    if total > capacity {
        push(
            FeasibilityCode::MinutesExceedCapacity,
            format!("{total} minutes exceed {capacity} available"),
        );
    }
    FeasibilityReport { issues }
}

/// Great-circle distance in kilometers between two (lat, lon) points in degrees.
pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (p1, p2) = (a.0.to_radians(), b.0.to_radians());
    let dp = p2 - p1;
    let dl = (b.1 - a.1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

fn centroid(points: &[(f64, f64)], group: &[usize]) -> (f64, f64) {
    let n = group.len() as f64;
    let (lat, lon) = group
        .iter()
        .fold((0.0, 0.0), |acc, &k| (acc.0 + points[k].0, acc.1 + points[k].1));
    (lat / n, lon / n)
}

fn group_cost(points: &[(f64, f64)], group: &[usize]) -> f64 {
    if group.len() < 2 {
        return 0.0;
    }
    let c = centroid(points, group);
    group.iter().map(|&k| haversine_km(points[k], c)).sum()
}

fn lookup<'m>(meetings: &'m [Meeting]) -> impl Fn(&str) -> Result<usize, ScheduleError> + 'm {
    move |id| {
        meetings
            .iter()
            .position(|m| m.client_id == id)
            .ok_or_else(|| ScheduleError::UnknownMeeting(id.to_string()))
    }
}

fn to_indices(day_groups: &[Vec<String>], meetings: &[Meeting]) -> Result<Vec<Vec<usize>>, ScheduleError> {
    let find = lookup(meetings);
    let mut seen = HashSet::new();
    day_groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|id| {
                    let k = find(id)?;
                    if !seen.insert(k) {
                        return Err(ScheduleError::DuplicateMeeting(id.clone()));
                    }
                    Ok(k)
                })
                .collect()
        })
        .collect()
}

/// The centroid-dispersion objective of a grouping, in kilometers.
pub fn schedule_cost(day_groups: &[Vec<String>], meetings: &[Meeting]) -> Result<f64, ScheduleError> {
    let groups = to_indices(day_groups, meetings)?;
    let points = coordinates(meetings);
    Ok(groups
        .iter()
        .map(|g| group_cost(&points, g))
        .fold(0.0, |acc, v| acc + v))
}

/// Per-day constraint violations of a grouping.
pub fn day_violations(
    day_groups: &[Vec<String>],
    meetings: &[Meeting],
    config: &ScheduleConfig,
) -> Result<Vec<DayViolation>, ScheduleError> {
    let groups = to_indices(day_groups, meetings)?;
    let mut out = Vec::new();
    for (day, g) in groups.iter().enumerate() {
        if g.is_empty() {
            continue;
        }
        if g.len() < config.min_per_day as usize {
            out.push(DayViolation {
                day,
                code: DayViolationCode::DayTooFew,
            });
        }
        if g.len() > config.max_per_day as usize {
            out.push(DayViolation {
                day,
                code: DayViolationCode::DayTooMany,
            });
        }
        let minutes: u64 = g.iter().map(|&k| meetings[k].duration_minutes as u64).sum();
        if minutes > config.max_minutes_per_day as u64 {
            out.push(DayViolation {
                day,
                code: DayViolationCode::DayMinutesExceeded,
            });
        }
    }
    Ok(out)
}

fn coordinates(meetings: &[Meeting]) -> Vec<(f64, f64)> {
    meetings.iter().map(|m| (m.latitude, m.longitude)).collect()
}

/// Index-level working state shared by construction, repair, and search.
struct Layout<'a> {
    points: Vec<(f64, f64)>,
    durations: Vec<u64>,
    config: &'a ScheduleConfig,
}

impl<'a> Layout<'a> {
    fn new(meetings: &[Meeting], config: &'a ScheduleConfig) -> Self {
        Layout {
            points: coordinates(meetings),
            durations: meetings.iter().map(|m| m.duration_minutes as u64).collect(),
            config,
        }
    }

    fn minutes(&self, group: &[usize]) -> u64 {
        group.iter().map(|&k| self.durations[k]).sum()
    }

    fn day_ok(&self, group: &[usize]) -> bool {
        self.config.count_ok(group.len()) && self.minutes(group) <= self.config.max_minutes_per_day as u64
    }

    fn cost(&self, groups: &[Vec<usize>]) -> f64 {
        groups
            .iter()
            .map(|g| group_cost(&self.points, g))
            .fold(0.0, |acc, v| acc + v)
    }

    fn feasible(&self, groups: &[Vec<usize>]) -> bool {
        groups.iter().all(|g| self.day_ok(g))
    }

    /// k-means++ seeding followed by Lloyd iterations on great-circle distance.
    fn kmeans(&self, k: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
        let n = self.points.len();
        let mut centers = vec![self.points[rng.gen_range(0..n)]];
        while centers.len() < k {
            let weights: Vec<f64> = self
                .points
                .iter()
                .map(|&p| {
                    centers
                        .iter()
                        .map(|&c| haversine_km(p, c))
                        .fold(f64::INFINITY, f64::min)
                        .powi(2)
                })
                .collect();
            let total: f64 = weights.iter().sum();
            let next = if total > 0.0 {
                let mut draw = rng.gen_range(0.0..total);
                weights
                    .iter()
                    .position(|&w| {
                        draw -= w;
                        draw < 0.0
                    })
                    .unwrap_or(n - 1)
            } else {
                rng.gen_range(0..n)
            };
            centers.push(self.points[next]);
        }
        for _ in 0..LLOYD_ITERATIONS {
            let mut members = vec![Vec::new(); k];
            for (idx, &p) in self.points.iter().enumerate() {
                members[self.nearest(p, &centers)].push(idx);
            }
            let updated: Vec<(f64, f64)> = members
                .iter()
                .zip(&centers)
                .map(|(g, &c)| if g.is_empty() { c } else { centroid(&self.points, g) })
                .collect();
            if updated == centers {
                break;
            }
            centers = updated;
        }
        centers
    }

    fn nearest(&self, p: (f64, f64), centers: &[(f64, f64)]) -> usize {
        let mut best = 0;
        for (c, &center) in centers.iter().enumerate() {
            if haversine_km(p, center) < haversine_km(p, centers[best]) {
                best = c;
            }
        }
        best
    }

    /// Capacity-aware assignment to fixed centers, nearest pairs first.
    fn assign_to(&self, centers: &[(f64, f64)]) -> Option<Vec<Vec<usize>>> {
        let n = self.points.len();
        let k = centers.len();
        let mut pairs: Vec<(f64, usize, usize)> = (0..n)
            .flat_map(|m| (0..k).map(move |d| (m, d)))
            .map(|(m, d)| (haversine_km(self.points[m], centers[d]), m, d))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut groups = vec![Vec::new(); k];
        let mut minutes = vec![0u64; k];
        let mut placed = vec![false; n];
        for (_, m, d) in pairs {
            if placed[m]
                || groups[d].len() >= self.config.max_per_day as usize
                || minutes[d] + self.durations[m] > self.config.max_minutes_per_day as u64
            {
                continue;
            }
            groups[d].push(m);
            minutes[d] += self.durations[m];
            placed[m] = true;
        }
        if placed.iter().any(|p| !p) {
            return None;
        }
        self.fill_underfull(groups, centers)
    }

    /// First-fit by decreasing duration; a geometry-blind fallback start.
    fn first_fit(&self, k: usize) -> Option<Vec<Vec<usize>>> {
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        order.sort_by(|&a, &b| self.durations[b].cmp(&self.durations[a]).then(a.cmp(&b)));
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
        for m in order {
            let day = (0..k)
                .filter(|&d| {
                    groups[d].len() < self.config.max_per_day as usize
                        && self.minutes(&groups[d]) + self.durations[m] <= self.config.max_minutes_per_day as u64
                })
                .min_by_key(|&d| (groups[d].len(), d))?;
            groups[day].push(m);
        }
        let centers: Vec<(f64, f64)> = groups
            .iter()
            .map(|g| {
                if g.is_empty() {
                    self.points[0]
                } else {
                    centroid(&self.points, g)
                }
            })
            .collect();
        self.fill_underfull(groups, &centers)
    }

    /// Moves meetings from days above the minimum into days below it,
    /// closest to the receiving day's center first.
    fn fill_underfull(&self, mut groups: Vec<Vec<usize>>, centers: &[(f64, f64)]) -> Option<Vec<Vec<usize>>> {
        let min = self.config.min_per_day as usize;
        let cap = self.config.max_minutes_per_day as u64;
        while let Some(short) = (0..groups.len()).find(|&d| groups[d].len() < min) {
            let minutes = self.minutes(&groups[short]);
            let mut best: Option<(f64, usize, usize)> = None;
            for (d, g) in groups.iter().enumerate() {
                if d == short || g.len() <= min {
                    continue;
                }
                for (pos, &m) in g.iter().enumerate() {
                    if minutes + self.durations[m] > cap {
                        continue;
                    }
                    let dist = haversine_km(self.points[m], centers[short]);
                    if best.is_none_or(|b| dist < b.0) {
                        best = Some((dist, d, pos));
                    }
                }
            }
            let (_, d, pos) = best?;
            let m = groups[d].remove(pos);
            groups[short].push(m);
        }
        self.feasible(&groups).then_some(groups)
    }

    /// Best-improvement relocations and swaps between days until none
    /// lowers the cost while keeping every day within its limits.
    fn improve(&self, groups: &mut [Vec<usize>]) {
        let k = groups.len();
        let mut costs: Vec<f64> = groups.iter().map(|g| group_cost(&self.points, g)).collect();
        loop {
            let mut best: Option<(f64, Vec<usize>, Vec<usize>, usize, usize)> = None;
            let mut consider = |delta: f64, ga: Vec<usize>, gb: Vec<usize>, a: usize, b: usize| {
                if delta < -IMPROVEMENT_EPS && best.as_ref().is_none_or(|cur| delta < cur.0) {
                    best = Some((delta, ga, gb, a, b));
                }
            };
            for a in 0..k {
                for b in 0..k {
                    if a == b {
                        continue;
                    }
                    for pa in 0..groups[a].len() {
                        let m = groups[a][pa];
                        let mut ga = groups[a].clone();
                        ga.remove(pa);
                        let mut gb = groups[b].clone();
                        gb.push(m);
                        gb.sort_unstable();
                        if self.day_ok(&ga) && self.day_ok(&gb) {
                            let delta =
                                group_cost(&self.points, &ga) + group_cost(&self.points, &gb) - costs[a] - costs[b];
                            consider(delta, ga, gb, a, b);
                        }
                        if b < a {
                            continue;
                        }
                        for pb in 0..groups[b].len() {
                            let mut sa = groups[a].clone();
                            sa[pa] = groups[b][pb];
                            sa.sort_unstable();
                            let mut sb = groups[b].clone();
                            sb[pb] = m;
                            sb.sort_unstable();
                            if self.day_ok(&sa) && self.day_ok(&sb) {
                                let delta =
                                    group_cost(&self.points, &sa) + group_cost(&self.points, &sb) - costs[a] - costs[b];
                                consider(delta, sa, sb, a, b);
                            }
                        }
                    }
                }
            }
            match best {
                Some((_, ga, gb, a, b)) => {
                    costs[a] = group_cost(&self.points, &ga);
                    costs[b] = group_cost(&self.points, &gb);
                    groups[a] = ga;
                    groups[b] = gb;
                }
                None => return,
            }
        }
    }
}

fn finish(mut groups: Vec<Vec<usize>>, meetings: &[Meeting], config: &ScheduleConfig) -> Schedule {
    for g in groups.iter_mut() {
        g.sort_unstable();
    }
    groups.sort_by_key(|g| g.first().copied().unwrap_or(usize::MAX));
    groups.resize(config.days as usize, Vec::new());
    let day_groups: Vec<Vec<String>> = groups
        .iter()
        .map(|g| g.iter().map(|&k| meetings[k].client_id.clone()).collect())
        .collect();
    let cost = schedule_cost(&day_groups, meetings).expect("ids come from meetings");
    let violations = day_violations(&day_groups, meetings, config).expect("ids come from meetings");
    Schedule {
        feasible: violations.is_empty(),
        day_groups,
        cost,
        violations,
    }
}

fn validate_all(meetings: &[Meeting]) -> Result<(), ScheduleError> {
    meetings.iter().try_for_each(Meeting::validate)
}

/// Best schedule over `DEFAULT_RESTARTS` seeded restarts.
pub fn build_schedule(meetings: &[Meeting], config: &ScheduleConfig, seed: u64) -> Result<Schedule, ScheduleError> {
    build_schedule_with(meetings, config, seed, DEFAULT_RESTARTS)
}

/// Schedules the selected, deduplicated meetings. Restart `i` seeds its
/// k-means with `seed + i`; every feasible number of used days is tried and
/// the cheapest result wins, earliest restart on ties.
pub fn build_schedule_with(
    meetings: &[Meeting],
    config: &ScheduleConfig,
    seed: u64,
    restarts: u32,
) -> Result<Schedule, ScheduleError> {
    let (meetings, _) = prepare(meetings);
    validate_all(&meetings)?;
    let report = check_feasibility(&meetings, config);
    if !report.is_feasible() {
        return Err(ScheduleError::Infeasible(report));
    }
    if meetings.is_empty() {
        return Ok(finish(Vec::new(), &meetings, config));
    }
    let layout = Layout::new(&meetings, config);
    let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
    let offer = |best: &mut Option<(f64, Vec<Vec<usize>>)>, mut groups: Vec<Vec<usize>>| {
        layout.improve(&mut groups);
        let cost = layout.cost(&groups);
        if best.as_ref().is_none_or(|b| cost < b.0) {
            *best = Some((cost, groups));
        }
    };
    for r in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        for k in config.used_day_range(meetings.len()) {
            let centers = layout.kmeans(k, &mut rng);
            if let Some(groups) = layout.assign_to(&centers) {
                offer(&mut best, groups);
            }
        }
    }
    if best.is_none() {
        for k in config.used_day_range(meetings.len()) {
            if let Some(groups) = layout.first_fit(k) {
                offer(&mut best, groups);
            }
        }
    }
    let (_, groups) = best.ok_or(ScheduleError::RepairFailed)?;
    Ok(finish(groups, &meetings, config))
}

/// Local search from an existing feasible grouping; never raises the cost.
pub fn local_search_improve(
    schedule: &Schedule,
    meetings: &[Meeting],
    config: &ScheduleConfig,
) -> Result<Schedule, ScheduleError> {
    let mut groups = to_indices(&schedule.day_groups, meetings)?;
    groups.resize(groups.len().max(config.days as usize), Vec::new());
    let layout = Layout::new(meetings, config);
    if layout.feasible(&groups) {
        layout.improve(&mut groups);
    }
    let day_groups: Vec<Vec<String>> = groups
        .iter()
        .map(|g| g.iter().map(|&k| meetings[k].client_id.clone()).collect())
        .collect();
    let cost = schedule_cost(&day_groups, meetings)?;
    let violations = day_violations(&day_groups, meetings, config)?;
    Ok(Schedule {
        feasible: violations.is_empty(),
        day_groups,
        cost,
        violations,
    })
}

/// Exact optimum by enumerating every labelling of meetings to days, for
/// at most 10 meetings. `None` when no feasible grouping exists.
pub fn exhaustive_schedule(meetings: &[Meeting], config: &ScheduleConfig) -> Option<Schedule> {
    let n = meetings.len();
    assert!(n <= 10, "exhaustive scheduling is limited to 10 meetings");
    let days = config.days as usize;
    let layout = Layout::new(meetings, config);
    let mut labels = vec![0usize; n];
    let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
    loop {
        // Canonical labelling: each new day index appears in order.
        let mut seen = 0;
        let canonical = labels.iter().all(|&l| {
            if l > seen {
                return false;
            }
            if l == seen {
                seen += 1;
            }
            true
        });
        if canonical {
            let mut groups = vec![Vec::new(); days];
            for (m, &l) in labels.iter().enumerate() {
                groups[l].push(m);
            }
            if layout.feasible(&groups) {
                let cost = layout.cost(&groups);
                if best.as_ref().is_none_or(|b| cost < b.0) {
                    best = Some((cost, groups));
                }
            }
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return best.map(|(_, g)| finish(g, meetings, config));
            }
            labels[pos] += 1;
            if labels[pos] < days {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
}
