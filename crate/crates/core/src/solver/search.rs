//! Depth-first branch-and-bound over disjunctive pair orientations.
//!
//! Each node carries earliest starts (`est`) and latest starts (`lst`) for
//! every operation. `est` comes from release times and the precedence graph;
//! `lst` from the horizon and, once an incumbent exists, from per-job
//! completion deadlines that any strictly better schedule must meet. After
//! every decision the node is propagated to a fixpoint:
//!
//! * heads forward and tails backward through all oriented arcs,
//! * deadlines re-derived from the incumbent and the current heads,
//! * a one-machine energy check (earliest head plus load must fit before the
//!   latest completion),
//! * immediate selection: an open pair whose one orientation no longer fits
//!   between `est` and `lst` is fixed the other way.
//!
//! Branching takes the machine with the most open pairs (lowest index on
//! ties) and its first open pair in (job, op) order, trying the operation
//! with the smaller head first.

use std::collections::VecDeque;
use std::time::Instant;

use super::graph::OpGraph;
use super::{LowerBoundMode, PartialOrdering, SolveConfig, SolveResult, SolveStatus};
use crate::formulation::ConstraintSet;
use crate::model::{JobShopInstance, Objective, Schedule, Time};

const OPEN: i8 = 0;
const A_FIRST: i8 = 1;
const B_FIRST: i8 = -1;

#[derive(Clone)]
struct Node {
    est: Vec<Time>,
    lst: Vec<Time>,
    orient: Vec<i8>,
}

struct Search<'a> {
    g: OpGraph,
    instance: &'a JobShopInstance,
    objective: Objective,
    use_machine_bound: bool,
    use_job_bound: bool,
    ub: Time,
    best: Option<Vec<Time>>,
    root_lb: Time,
    nodes: u64,
    started: Instant,
    config: SolveConfig,
    hit_limit: bool,
    proved: bool,
}

pub(super) fn run(instance: &JobShopInstance, constraints: ConstraintSet, config: &SolveConfig) -> SolveResult {
    let started = Instant::now();
    let mut search = Search::new(instance, constraints, config.lower_bound_mode, *config, started);
    let mut root = search.root();
    if search.propagate_all(&mut root) {
        search.root_lb = search.bound(&root);
        search.dfs(root);
    }
    let schedule = search.best.as_ref().map(|flat| {
        Schedule::from_starts(instance, search.g.unflatten(flat)).expect("prerequisites checked before search")
    });
    let status = match (search.hit_limit && !search.proved, schedule.is_some()) {
        (false, true) => SolveStatus::Optimal,
        (false, false) => SolveStatus::Infeasible,
        (true, true) => SolveStatus::Feasible,
        (true, false) => SolveStatus::TimedOut,
    };
    SolveResult { status, schedule, nodes_explored: search.nodes, elapsed: started.elapsed() }
}

pub(super) fn partial_bound(
    instance: &JobShopInstance,
    constraints: ConstraintSet,
    partial: &PartialOrdering,
    mode: LowerBoundMode,
) -> Time {
    let config = SolveConfig { lower_bound_mode: mode, ..SolveConfig::default() };
    let search = Search::new(instance, constraints, mode, config, Instant::now());
    let mut node = search.root();
    let mut forward = VecDeque::new();
    let mut backward = VecDeque::new();
    for &(first, second) in &partial.fixed {
        let (a, b) = (search.g.id(first), search.g.id(second));
        let Some(k) = search.g.pairs.iter().position(|p| (p.a, p.b) == (a.min(b), a.max(b))) else {
            continue;
        };
        let dir = if a < b { A_FIRST } else { B_FIRST };
        if node.orient[k] == -dir {
            return Time::MAX;
        }
        node.orient[k] = dir;
        forward.push_back(a);
        backward.push_back(b);
    }
    forward.extend(0..search.g.n);
    backward.extend(0..search.g.n);
    if !search.propagate(&mut node, forward, backward) {
        return Time::MAX;
    }
    search.bound(&node)
}

impl<'a> Search<'a> {
    fn new(
        instance: &'a JobShopInstance,
        constraints: ConstraintSet,
        mode: LowerBoundMode,
        config: SolveConfig,
        started: Instant,
    ) -> Self {
        Search {
            g: OpGraph::new(instance, constraints),
            instance,
            objective: instance.objective(),
            use_machine_bound: matches!(mode, LowerBoundMode::MaxLoad | LowerBoundMode::Both),
            use_job_bound: matches!(mode, LowerBoundMode::JobLength | LowerBoundMode::Both),
            ub: Time::MAX,
            best: None,
            root_lb: 0,
            nodes: 0,
            started,
            config,
            hit_limit: false,
            proved: false,
        }
    }

    fn root(&self) -> Node {
        let g = &self.g;
        Node { est: g.earliest.clone(), lst: vec![g.horizon; g.n], orient: vec![OPEN; g.pairs.len()] }
    }

    fn completion_lb(&self, node: &Node, job: usize) -> Time {
        let last = self.g.last_of_job[job];
        node.est[last] + self.g.duration[last]
    }

    fn job_cost(&self, job: usize, completion: Time) -> Time {
        crate::model::job_cost(self.instance, job, completion)
    }

    fn is_max_objective(&self) -> bool {
        matches!(self.objective, Objective::Makespan | Objective::MaxTardiness)
    }

    /// Latest completion of `job` such that its cost stays within `budget`.
    fn deadline(&self, job: usize, budget: Time) -> Time {
        let inst = self.instance;
        let due = || inst.due_dates().expect("due dates")[job];
        let weight = || inst.weights().expect("weights")[job];
        match self.objective {
            Objective::Makespan => budget,
            Objective::MaxTardiness => due() + budget,
            Objective::TotalWeightedTardiness => due() + budget / weight(),
            Objective::TotalFlowTime => inst.release(job) + budget,
            Objective::TotalWeightedFlowTime => inst.release(job) + budget / weight(),
        }
    }

    /// Lower bound on the objective of any completion of `node`.
    fn bound(&self, node: &Node) -> Time {
        let jobs = 0..self.g.last_of_job.len();
        let costs = jobs.map(|j| self.job_cost(j, self.completion_lb(node, j)));
        let mut lb = if self.is_max_objective() { costs.max().unwrap_or(0) } else { costs.sum() };
        if !self.use_job_bound {
            lb = 0;
        }
        if self.use_machine_bound && self.objective == Objective::Makespan {
            for ops in &self.g.machine_ops {
                if ops.is_empty() {
                    continue;
                }
                let head = ops.iter().map(|&o| node.est[o]).min().unwrap_or(0);
                let load: Time = ops.iter().map(|&o| self.g.duration[o]).sum();
                let tail = ops.iter().map(|&o| self.tail(o)).min().unwrap_or(0);
                lb = lb.max(head + load + tail);
            }
        }
        lb
    }

    fn tail(&self, op: usize) -> Time {
        // Chain tails only hold when route order is enforced.
        if self.g.chained {
            self.g.job_tail[op]
        } else {
            0
        }
    }

    fn forward(&self, node: &mut Node, queue: &mut VecDeque<usize>) -> bool {
        let g = &self.g;
        let mut pops = 0usize;
        let cap = g.n * g.n + g.n + 1;
        while let Some(u) = queue.pop_front() {
            pops += 1;
            if pops > cap {
                return false;
            }
            let eu = node.est[u];
            let succ = g.out_arcs[u].iter().map(|a| (a.to, a.lag));
            let disj = g.pairs_of[u].iter().filter_map(|&k| {
                let p = g.pairs[k];
                match node.orient[k] {
                    A_FIRST if p.a == u => Some((p.b, g.duration[u])),
                    B_FIRST if p.b == u => Some((p.a, g.duration[u])),
                    _ => None,
                }
            });
            for (v, lag) in succ.chain(disj) {
                let cand = eu + lag;
                if cand > node.est[v] {
                    if cand > node.lst[v] {
                        return false;
                    }
                    node.est[v] = cand;
                    queue.push_back(v);
                }
            }
        }
        true
    }

    fn backward(&self, node: &mut Node, queue: &mut VecDeque<usize>) -> bool {
        let g = &self.g;
        let mut pops = 0usize;
        let cap = g.n * g.n + g.n + 1;
        while let Some(u) = queue.pop_front() {
            pops += 1;
            if pops > cap {
                return false;
            }
            let lu = node.lst[u];
            let pred = g.in_arcs[u].iter().map(|a| (a.from, a.lag));
            let disj = g.pairs_of[u].iter().filter_map(|&k| {
                let p = g.pairs[k];
                match node.orient[k] {
                    A_FIRST if p.b == u => Some((p.a, g.duration[p.a])),
                    B_FIRST if p.a == u => Some((p.b, g.duration[p.b])),
                    _ => None,
                }
            });
            for (w, lag) in pred.chain(disj) {
                let cand = lu - lag;
                if cand < node.lst[w] {
                    if cand < node.est[w] {
                        return false;
                    }
                    node.lst[w] = cand;
                    queue.push_back(w);
                }
            }
        }
        true
    }

    /// Tightens last-operation latest starts from the incumbent.
    fn apply_deadlines(&self, node: &mut Node, queue: &mut VecDeque<usize>) -> bool {
        if self.ub == Time::MAX {
            return true;
        }
        let jobs = self.g.last_of_job.len();
        let costs: Vec<Time> = (0..jobs).map(|j| self.job_cost(j, self.completion_lb(node, j))).collect();
        let total: Time = costs.iter().sum();
        if !self.is_max_objective() && self.use_job_bound && total >= self.ub {
            return false;
        }
        for j in 0..jobs {
            let budget = if self.is_max_objective() || !self.use_job_bound {
                self.ub - 1
            } else {
                self.ub - 1 - (total - costs[j])
            };
            if budget < 0 {
                return false;
            }
            let last = self.g.last_of_job[j];
            let latest = self.deadline(j, budget) - self.g.duration[last];
            if latest < node.lst[last] {
                if latest < node.est[last] {
                    return false;
                }
                node.lst[last] = latest;
                queue.push_back(last);
            }
        }
        true
    }

    fn machines_fit(&self, node: &Node) -> bool {
        if !self.use_machine_bound {
            return true;
        }
        self.g.machine_ops.iter().all(|ops| {
            if ops.len() < 2 {
                return true;
            }
            let head = ops.iter().map(|&o| node.est[o]).min().unwrap_or(0);
            let load: Time = ops.iter().map(|&o| self.g.duration[o]).sum();
            let latest_end = ops.iter().map(|&o| node.lst[o] + self.g.duration[o]).max().unwrap_or(0);
            head + load <= latest_end
        })
    }

    fn propagate_all(&self, node: &mut Node) -> bool {
        let forward: VecDeque<usize> = (0..self.g.n).collect();
        let backward: VecDeque<usize> = (0..self.g.n).collect();
        self.propagate(node, forward, backward)
    }

    fn propagate(&self, node: &mut Node, mut forward: VecDeque<usize>, mut backward: VecDeque<usize>) -> bool {
        loop {
            if !self.forward(node, &mut forward) {
                return false;
            }
            if !self.apply_deadlines(node, &mut backward) {
                return false;
            }
            if !self.backward(node, &mut backward) {
                return false;
            }
            if !self.machines_fit(node) {
                return false;
            }
            for (k, p) in self.g.pairs.iter().enumerate() {
                if node.orient[k] != OPEN {
                    continue;
                }
                let a_first = node.est[p.a] + self.g.duration[p.a] <= node.lst[p.b];
                let b_first = node.est[p.b] + self.g.duration[p.b] <= node.lst[p.a];
                let (dir, first, second) = match (a_first, b_first) {
                    (false, false) => return false,
                    (true, false) => (A_FIRST, p.a, p.b),
                    (false, true) => (B_FIRST, p.b, p.a),
                    (true, true) => continue,
                };
                node.orient[k] = dir;
                forward.push_back(first);
                backward.push_back(second);
            }
            if forward.is_empty() && backward.is_empty() {
                return true;
            }
        }
    }

    fn out_of_budget(&mut self) -> bool {
        if let Some(limit) = self.config.node_limit {
            if self.nodes >= limit {
                return true;
            }
        }
        self.nodes.is_multiple_of(256) && self.started.elapsed() >= self.config.time_limit
    }

    fn choose(&self, node: &Node) -> Option<usize> {
        let mut open_per_machine = vec![0usize; self.g.machine_ops.len()];
        for (k, p) in self.g.pairs.iter().enumerate() {
            if node.orient[k] == OPEN {
                open_per_machine[p.machine] += 1;
            }
        }
        let (machine, &count) = open_per_machine.iter().enumerate().max_by(|(i, x), (j, y)| x.cmp(y).then(j.cmp(i)))?;
        if count == 0 {
            return None;
        }
        self.g.pairs.iter().enumerate().position(|(k, p)| p.machine == machine && node.orient[k] == OPEN)
    }

    fn dfs(&mut self, node: Node) {
        if self.hit_limit || self.proved {
            return;
        }
        self.nodes += 1;
        if self.out_of_budget() {
            self.hit_limit = true;
            return;
        }
        let Some(k) = self.choose(&node) else {
            self.record(&node);
            return;
        };
        let p = self.g.pairs[k];
        let order = if node.est[p.a] <= node.est[p.b] { [A_FIRST, B_FIRST] } else { [B_FIRST, A_FIRST] };
        for dir in order {
            let mut child = node.clone();
            child.orient[k] = dir;
            let (first, second) = if dir == A_FIRST { (p.a, p.b) } else { (p.b, p.a) };
            if self.propagate(&mut child, VecDeque::from([first]), VecDeque::from([second])) {
                self.dfs(child);
            }
            if self.hit_limit || self.proved {
                return;
            }
        }
    }

    fn record(&mut self, node: &Node) {
        let jobs = 0..self.g.last_of_job.len();
        let costs = jobs.map(|j| self.job_cost(j, self.completion_lb(node, j)));
        let value = if self.is_max_objective() { costs.max().unwrap_or(0) } else { costs.sum() };
        if value < self.ub {
            self.ub = value;
            self.best = Some(node.est.clone());
            if value <= self.root_lb {
                self.proved = true;
            }
        }
    }
}
