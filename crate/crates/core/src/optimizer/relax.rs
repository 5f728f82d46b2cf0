//! Capacity relaxation used for bounding.
//!
//! Member capacities are folded into a per-location slot count, which turns
//! the remaining problem into a transportation problem. It is solved exactly
//! by successive augmenting paths over the (small) location graph, and the
//! final path values give one price per location. Those prices certify an
//! upper bound through [`lagrangian_bound`], which stays valid for any
//! non-negative prices; the solvers only ever prune on that certificate.

use crate::model::ScoreMatrix;

/// Improvements smaller than this are ignored when relaxing path values.
const EPS: f64 = 1e-12;

pub struct RelaxationInput<'a> {
    pub matrix: &'a ScoreMatrix,
    /// Case indices, in insertion order.
    pub cases: &'a [usize],
    /// Candidate locations per entry of `cases`.
    pub options: &'a [Vec<usize>],
    /// Maximum number of cases per location.
    pub slots: &'a [u32],
    pub allow_unassigned: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation {
    /// Location per entry of `cases`.
    pub choice: Vec<Option<usize>>,
    pub value: f64,
    /// Non-negative price of one slot at each location.
    pub prices: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
enum Via {
    Free,
    Drop(usize),
    Move(usize, usize),
}

struct PathValues {
    /// Best value of freeing one slot at each location; `None` if impossible.
    gain: Vec<Option<f64>>,
    via: Vec<Via>,
}

struct State<'i, 'a> {
    input: &'i RelaxationInput<'a>,
    at: Vec<Vec<usize>>,
    choice: Vec<Option<usize>>,
}

impl State<'_, '_> {
    fn score(&self, c: usize, l: usize) -> f64 {
        self.input.matrix.score(self.input.cases[c], l)
    }

    fn path_values(&self) -> PathValues {
        let n_loc = self.input.slots.len();
        let full: Vec<bool> = (0..n_loc)
            .map(|l| self.at[l].len() >= self.input.slots[l] as usize)
            .collect();
        let mut gain: Vec<Option<f64>> = full.iter().map(|&f| if f { None } else { Some(0.0) }).collect();
        let mut via = vec![Via::Free; n_loc];

        if self.input.allow_unassigned {
            for l in (0..n_loc).filter(|&l| full[l]) {
                for &c in &self.at[l] {
                    let v = -self.score(c, l);
                    if gain[l].is_none_or(|g| v > g) {
                        gain[l] = Some(v);
                        via[l] = Via::Drop(c);
                    }
                }
            }
        }

        // best single move out of each full location, per destination
        let mut edge = vec![f64::NEG_INFINITY; n_loc * n_loc];
        let mut mover = vec![usize::MAX; n_loc * n_loc];
        for a in (0..n_loc).filter(|&a| full[a]) {
            for &c in &self.at[a] {
                let here = self.score(c, a);
                for &b in &self.input.options[c] {
                    if b == a {
                        continue;
                    }
                    let v = self.score(c, b) - here;
                    if v > edge[a * n_loc + b] {
                        edge[a * n_loc + b] = v;
                        mover[a * n_loc + b] = c;
                    }
                }
            }
        }

        for _ in 0..n_loc {
            let mut changed = false;
            for a in (0..n_loc).filter(|&a| full[a]) {
                for b in 0..n_loc {
                    let w = edge[a * n_loc + b];
                    let Some(gb) = gain[b] else { continue };
                    if w == f64::NEG_INFINITY {
                        continue;
                    }
                    let cand = w + gb;
                    if gain[a].is_none_or(|ga| cand > ga + EPS) {
                        gain[a] = Some(cand);
                        via[a] = Via::Move(mover[a * n_loc + b], b);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        PathValues { gain, via }
    }

    fn insert(&mut self, c: usize, target: usize, paths: &PathValues) {
        self.choice[c] = Some(target);
        self.at[target].push(c);
        let mut cur = target;
        for _ in 0..=self.input.slots.len() {
            match paths.via[cur] {
                Via::Free => return,
                Via::Drop(out) => {
                    self.at[cur].retain(|&x| x != out);
                    self.choice[out] = None;
                    return;
                }
                Via::Move(out, next) => {
                    self.at[cur].retain(|&x| x != out);
                    self.at[next].push(out);
                    self.choice[out] = Some(next);
                    cur = next;
                }
            }
        }
    }
}

/// Optimal slot-capacitated assignment of `input.cases`, or `None` when
/// every case must be placed and that is impossible.
pub fn solve_relaxation(input: &RelaxationInput<'_>) -> Option<Relaxation> {
    let n_loc = input.slots.len();
    let mut state = State {
        input,
        at: vec![Vec::new(); n_loc],
        choice: vec![None; input.cases.len()],
    };
    for c in 0..input.cases.len() {
        let paths = state.path_values();
        let mut best: Option<(f64, Option<usize>)> = input.allow_unassigned.then_some((0.0, None));
        for &j in &input.options[c] {
            if let Some(g) = paths.gain[j] {
                let v = state.score(c, j) + g;
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, Some(j)));
                }
            }
        }
        if let (_, Some(j)) = best? { state.insert(c, j, &paths) }
    }

    let paths = state.path_values();
    let cap = price_cap(input);
    let prices = paths.gain.iter().map(|g| g.map_or(cap, |v| (-v).max(0.0))).collect();
    let value = state
        .choice
        .iter()
        .enumerate()
        .filter_map(|(c, slot)| slot.map(|l| state.score(c, l)))
        .sum();
    Some(Relaxation {
        choice: state.choice,
        value,
        prices,
    })
}

fn price_cap(input: &RelaxationInput<'_>) -> f64 {
    let mut max = 0.0f64;
    for (c, opts) in input.options.iter().enumerate() {
        for &j in opts {
            max = max.max(input.matrix.score(input.cases[c], j));
        }
    }
    2.0 * max + 1.0
}

/// `sum(price * slots) + sum over cases of the best priced option`: an upper
/// bound on the relaxation value for any non-negative prices. Returns
/// negative infinity when some case has no option and must be placed.
pub fn lagrangian_bound(input: &RelaxationInput<'_>, prices: &[f64]) -> f64 {
    let mut total: f64 = prices.iter().zip(input.slots).map(|(p, &s)| p * s as f64).sum();
    for (c, opts) in input.options.iter().enumerate() {
        let case = input.cases[c];
        let mut term = if input.allow_unassigned { 0.0 } else { f64::NEG_INFINITY };
        for &j in opts {
            term = term.max(input.matrix.score(case, j) - prices[j]);
        }
        if term == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        total += term;
    }
    total
}
