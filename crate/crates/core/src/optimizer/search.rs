//! Depth-first branch-and-bound over the unlocked cases.
//!
//! Cases are branched in order of decreasing spread between their best and
//! second-best option. Each node carries a slot relaxation (see `relax`);
//! its prices give an O(1) bound per child, and a fresh relaxation is only
//! solved when a child departs from its parent's relaxed choice and survives
//! that bound. A relaxed solution that also respects member capacity is a
//! feasible placement and is offered as an incumbent immediately.

use std::rc::Rc;

use super::relax::{lagrangian_bound, solve_relaxation, Relaxation, RelaxationInput};
use super::{Evaluator, Link, Problem, SolveError, SolveOptions};

/// Searches with more free cases than this run on a thread with a larger stack.
const INLINE_DEPTH: usize = 256;

pub(super) struct Outcome {
    pub placement: Vec<Option<usize>>,
    pub objective: f64,
    pub interrupted: bool,
    pub nodes: u64,
    pub relaxations: u64,
    pub root_bound: f64,
}

#[derive(Clone)]
struct NodeRelax {
    sol: Rc<Relaxation>,
    /// Branch position of `sol.choice[0]`.
    offset: usize,
    member_feasible: bool,
    offered: bool,
}

impl NodeRelax {
    fn choice(&self, pos: usize) -> Option<usize> {
        self.sol.choice[pos - self.offset]
    }
}

struct Search<'p, 'a> {
    p: &'p Problem<'a>,
    order: Vec<usize>,
    options: Vec<Vec<usize>>,
    placement: Vec<Option<usize>>,
    decided: Vec<bool>,
    res: Vec<(i64, i64)>,
    fixed_value: f64,
    incumbent: Option<(f64, Vec<Option<usize>>)>,
    opts: &'p SolveOptions,
    nodes: u64,
    relaxations: u64,
    interrupted: bool,
}

fn tolerance(obj: f64) -> f64 {
    1e-9 * obj.abs().max(1.0)
}

impl<'p, 'a> Search<'p, 'a> {
    fn new(p: &'p Problem<'a>, warm: Option<(f64, Vec<Option<usize>>)>, opts: &'p SolveOptions) -> Self {
        let req = p.request();
        let m = &req.matrix;
        let n = p.n_cases();
        let options: Vec<Vec<usize>> = (0..n).map(|i| p.options(i)).collect();

        let placement = p.locked.clone();
        let decided: Vec<bool> = p.locked.iter().map(Option::is_some).collect();
        let mut res: Vec<(i64, i64)> = p.capacity.iter().map(|c| (c.cases as i64, c.members as i64)).collect();
        let mut fixed_value = 0.0;
        for i in 0..n {
            if let Some(j) = p.locked[i] {
                res[j].0 -= 1;
                res[j].1 -= p.members[i] as i64;
                fixed_value += m.score(i, j);
            }
        }

        let spread = |i: usize| {
            let mut v: Vec<f64> = options[i].iter().map(|&j| m.score(i, j)).collect();
            if req.allow_unassigned {
                v.push(0.0);
            }
            v.sort_by(|a, b| b.total_cmp(a));
            if v.len() >= 2 {
                v[0] - v[1]
            } else {
                f64::INFINITY
            }
        };
        let cases = &req.instance.cases;
        let mut order: Vec<(f64, usize)> = (0..n).filter(|&i| !decided[i]).map(|i| (spread(i), i)).collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| cases[a.1].id.cmp(&cases[b.1].id)));

        Search {
            p,
            order: order.into_iter().map(|(_, i)| i).collect(),
            options,
            placement,
            decided,
            res,
            fixed_value,
            incumbent: warm,
            opts,
            nodes: 0,
            relaxations: 0,
            interrupted: false,
        }
    }

    fn fits(&self, case: usize, loc: usize) -> bool {
        self.res[loc].0 >= 1 && self.res[loc].1 >= self.p.members[case] as i64
    }

    fn live_options(&self, case: usize) -> Vec<usize> {
        self.options[case]
            .iter()
            .copied()
            .filter(|&j| self.fits(case, j))
            .collect()
    }

    fn min_members(&self, k: usize) -> i64 {
        self.order[k..]
            .iter()
            .map(|&i| self.p.members[i] as i64)
            .min()
            .unwrap_or(1)
            .max(1)
    }

    fn slots(&self, m_min: i64) -> Vec<u32> {
        self.res.iter().map(|&(c, r)| c.min(r / m_min).max(0) as u32).collect()
    }

    fn prune(&self, bound: f64) -> bool {
        match &self.incumbent {
            Some((obj, _)) => bound < obj - tolerance(*obj),
            None => bound == f64::NEG_INFINITY,
        }
    }

    fn offer(&mut self, placement: &[Option<usize>]) {
        let obj = self.p.eval.objective(placement);
        if self.p.better(obj, placement, self.incumbent.as_ref()) {
            self.incumbent = Some((obj, placement.to_vec()));
        }
    }

    /// Bonus for satisfied links plus every link not yet ruled out.
    fn bonus_upper(&self) -> f64 {
        let bonus = self.p.request().cross_ref_bonus;
        if bonus == 0.0 {
            return 0.0;
        }
        let open = self
            .p
            .eval
            .links()
            .iter()
            .filter(|&&link| match link {
                Link::Pair(a, b) => match (self.decided[a], self.decided[b]) {
                    (true, true) => Evaluator::link_satisfied(link, &self.placement),
                    (true, false) => self.placement[a].is_some(),
                    (false, true) => self.placement[b].is_some(),
                    (false, false) => true,
                },
                Link::Anchor(a, l) => {
                    if self.decided[a] {
                        self.placement[a] == Some(l)
                    } else {
                        self.options[a].contains(&l)
                    }
                }
            })
            .count();
        bonus * open as f64
    }

    fn relax_at(&mut self, k: usize) -> Option<NodeRelax> {
        let rem = &self.order[k..];
        let m_min = self.min_members(k);
        let slots = self.slots(m_min);
        let options: Vec<Vec<usize>> = rem.iter().map(|&i| self.live_options(i)).collect();
        let input = RelaxationInput {
            matrix: &self.p.request().matrix,
            cases: rem,
            options: &options,
            slots: &slots,
            allow_unassigned: self.p.request().allow_unassigned,
        };
        let sol = solve_relaxation(&input)?;
        self.relaxations += 1;
        let mut used = vec![0i64; self.res.len()];
        for (c, slot) in sol.choice.iter().enumerate() {
            if let Some(j) = *slot {
                used[j] += self.p.members[rem[c]] as i64;
            }
        }
        let member_feasible = used.iter().zip(&self.res).all(|(u, r)| *u <= r.1);
        Some(NodeRelax {
            sol: Rc::new(sol),
            offset: k,
            member_feasible,
            offered: false,
        })
    }

    fn stop_requested(&self) -> bool {
        self.opts.cancel.as_ref().is_some_and(|c| c.is_cancelled())
            || self.opts.node_limit.is_some_and(|limit| self.nodes >= limit)
    }

    fn dfs(&mut self, k: usize, mut relax: NodeRelax) {
        if self.stop_requested() {
            self.interrupted = true;
            return;
        }
        self.nodes += 1;

        if relax.member_feasible && !relax.offered {
            let mut full = self.placement.clone();
            for pos in k..self.order.len() {
                full[self.order[pos]] = relax.choice(pos);
            }
            self.offer(&full);
            relax.offered = true;
        }
        if k == self.order.len() {
            return;
        }

        let req = self.p.request();
        let m = &req.matrix;
        let prices = relax.sol.prices.clone();
        let rem = &self.order[k..];
        let m_min = self.min_members(k);
        let slots = self.slots(m_min);
        let options: Vec<Vec<usize>> = rem.iter().map(|&i| self.live_options(i)).collect();
        let input = RelaxationInput {
            matrix: m,
            cases: rem,
            options: &options,
            slots: &slots,
            allow_unassigned: req.allow_unassigned,
        };
        let node_lagrangian = lagrangian_bound(&input, &prices);
        let bonus_ub = self.bonus_upper();
        if self.prune(self.fixed_value + node_lagrangian + bonus_ub) {
            return;
        }

        let i = self.order[k];
        let need = self.p.members[i] as i64;
        let term_i = options[0]
            .iter()
            .map(|&j| m.score(i, j) - prices[j])
            .fold(if req.allow_unassigned { 0.0 } else { f64::NEG_INFINITY }, f64::max);
        let preferred = relax.choice(k);

        let mut children: Vec<(Option<usize>, f64)> = options[0]
            .iter()
            .map(|&j| (Some(j), m.score(i, j) - prices[j]))
            .collect();
        if req.allow_unassigned {
            children.push((None, 0.0));
        }
        let rank = |s: Option<usize>| s.map_or(self.p.n_loc, |j| self.p.loc_rank[j]);
        children.sort_by(|a, b| {
            (b.0 == preferred)
                .cmp(&(a.0 == preferred))
                .then(b.1.total_cmp(&a.1))
                .then(rank(a.0).cmp(&rank(b.0)))
        });

        for (child, _) in children {
            let score = child.map_or(0.0, |j| m.score(i, j));
            let mut bound = self.fixed_value + score + node_lagrangian - term_i + bonus_ub;
            if let Some(j) = child {
                let (c, r) = self.res[j];
                let after = (c - 1).min((r - need) / m_min).max(0) as f64;
                bound -= prices[j] * (slots[j] as f64 - after);
            }
            if self.prune(bound) {
                continue;
            }

            self.placement[i] = child;
            self.decided[i] = true;
            if let Some(j) = child {
                self.res[j].0 -= 1;
                self.res[j].1 -= need;
            }
            self.fixed_value += score;

            let next = if child == preferred {
                Some(relax.clone())
            } else {
                self.relax_at(k + 1)
            };
            if let Some(next) = next {
                self.dfs(k + 1, next);
            }

            self.fixed_value -= score;
            if let Some(j) = child {
                self.res[j].0 += 1;
                self.res[j].1 += need;
            }
            self.placement[i] = None;
            self.decided[i] = false;
            if self.interrupted {
                return;
            }
        }
    }

    fn root(&mut self) -> Result<(NodeRelax, f64), SolveError> {
        let req = self.p.request();
        if !req.allow_unassigned && self.order.iter().any(|&i| self.options[i].is_empty()) {
            return Err(SolveError::Infeasible);
        }
        let relax = self.relax_at(0).ok_or(SolveError::Infeasible)?;
        let m_min = self.min_members(0);
        let slots = self.slots(m_min);
        let options: Vec<Vec<usize>> = self.order.iter().map(|&i| self.live_options(i)).collect();
        let input = RelaxationInput {
            matrix: &req.matrix,
            cases: &self.order,
            options: &options,
            slots: &slots,
            allow_unassigned: req.allow_unassigned,
        };
        let bound = self.fixed_value + lagrangian_bound(&input, &relax.sol.prices) + self.bonus_upper();
        Ok((relax, bound))
    }

    fn finish(self, root_bound: f64) -> Result<Outcome, SolveError> {
        match self.incumbent {
            Some((objective, placement)) => Ok(Outcome {
                placement,
                objective,
                interrupted: self.interrupted,
                nodes: self.nodes,
                relaxations: self.relaxations,
                root_bound,
            }),
            None if self.interrupted => Err(SolveError::Interrupted),
            None => Err(SolveError::Infeasible),
        }
    }
}

pub(super) fn run(
    problem: &Problem<'_>,
    warm: Option<(f64, Vec<Option<usize>>)>,
    options: &SolveOptions,
) -> Result<Outcome, SolveError> {
    let go = || {
        let mut search = Search::new(problem, warm, options);
        let (relax, bound) = search.root()?;
        search.dfs(0, relax);
        search.finish(bound)
    };
    let free = problem.locked.iter().filter(|s| s.is_none()).count();
    if free <= INLINE_DEPTH {
        return go();
    }
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .name("bnb".into())
            .stack_size(1024 * 1024 + free * 4096)
            .spawn_scoped(scope, go)
            .expect("spawn search thread")
            .join()
            .expect("search thread panicked")
    })
}
