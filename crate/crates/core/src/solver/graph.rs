//! Operation graph shared by the search: flat operation ids, static
//! precedence arcs and the disjunctive pairs left to orient.

use crate::formulation::ConstraintSet;
use crate::model::{ExtraPrecedence, JobShopInstance, OpRef, Time};

/// `start[to] >= start[from] + lag`.
#[derive(Debug, Clone, Copy)]
pub(super) struct Arc {
    pub from: usize,
    pub to: usize,
    pub lag: Time,
}

#[derive(Debug, Clone, Copy)]
pub(super) struct Pair {
    pub machine: usize,
    /// Lower flat id.
    pub a: usize,
    pub b: usize,
}

pub(super) struct OpGraph {
    pub n: usize,
    pub duration: Vec<Time>,
    pub last_of_job: Vec<usize>,
    pub job_offset: Vec<usize>,
    pub earliest: Vec<Time>,
    pub horizon: Time,
    pub out_arcs: Vec<Vec<Arc>>,
    pub in_arcs: Vec<Vec<Arc>>,
    pub pairs: Vec<Pair>,
    /// Pair indices touching each operation.
    pub pairs_of: Vec<Vec<usize>>,
    /// Operations on each machine that take part in disjunctive pairs.
    pub machine_ops: Vec<Vec<usize>>,
    /// Sum of durations after each operation within its job.
    pub job_tail: Vec<Time>,
    pub chained: bool,
}

impl OpGraph {
    pub fn new(instance: &JobShopInstance, constraints: ConstraintSet) -> Self {
        let mut job_offset = Vec::with_capacity(instance.num_jobs());
        let mut duration = Vec::new();
        let mut machine_of = Vec::new();
        let mut job_tail = Vec::new();
        for j in 0..instance.num_jobs() {
            job_offset.push(duration.len());
            let ps = instance.durations(j);
            for (i, &p) in ps.iter().enumerate() {
                duration.push(p);
                machine_of.push(instance.route(j)[i]);
                job_tail.push(ps[i + 1..].iter().sum());
            }
        }
        let n = duration.len();
        let id = |op: OpRef| job_offset[op.job] + op.op;
        let last_of_job: Vec<usize> =
            (0..instance.num_jobs()).map(|j| job_offset[j] + instance.num_ops(j) - 1).collect();

        let mut earliest = vec![0; n];
        if constraints.release {
            for j in 0..instance.num_jobs() {
                earliest[job_offset[j]] = instance.release(j);
            }
        }

        let mut arcs = Vec::new();
        if constraints.job_precedence {
            for j in 0..instance.num_jobs() {
                for o in job_offset[j]..last_of_job[j] {
                    arcs.push(Arc { from: o, to: o + 1, lag: duration[o] });
                }
            }
        }
        for p in instance.extra_precedences() {
            match *p {
                ExtraPrecedence::EndBeforeStart { before, after } => {
                    let (from, to) = (id(before), id(after));
                    arcs.push(Arc { from, to, lag: duration[from] });
                }
                ExtraPrecedence::EndBeforeAllCompletions { op } => {
                    let from = id(op);
                    for &last in &last_of_job {
                        if last != from {
                            arcs.push(Arc { from, to: last, lag: duration[from] - duration[last] });
                        }
                    }
                }
            }
        }
        let mut out_arcs = vec![Vec::new(); n];
        let mut in_arcs = vec![Vec::new(); n];
        for arc in arcs {
            out_arcs[arc.from].push(arc);
            in_arcs[arc.to].push(arc);
        }

        let mut pairs = Vec::new();
        let mut machine_ops = vec![Vec::new(); instance.num_machines()];
        if constraints.no_overlap {
            for o in 0..n {
                machine_ops[machine_of[o]].push(o);
            }
            for (machine, ops) in machine_ops.iter().enumerate() {
                for (k, &a) in ops.iter().enumerate() {
                    for &b in &ops[k + 1..] {
                        pairs.push(Pair { machine, a, b });
                    }
                }
            }
        }
        let mut pairs_of = vec![Vec::new(); n];
        for (k, p) in pairs.iter().enumerate() {
            pairs_of[p.a].push(k);
            pairs_of[p.b].push(k);
        }

        OpGraph {
            n,
            duration,
            last_of_job,
            job_offset,
            earliest,
            horizon: instance.horizon(),
            out_arcs,
            in_arcs,
            pairs,
            pairs_of,
            machine_ops,
            job_tail,
            chained: constraints.job_precedence,
        }
    }

    pub fn id(&self, op: OpRef) -> usize {
        self.job_offset[op.job] + op.op
    }

    /// Start times per job and operation from flat start times.
    pub fn unflatten(&self, starts: &[Time]) -> Vec<Vec<Time>> {
        (0..self.last_of_job.len()).map(|j| starts[self.job_offset[j]..=self.last_of_job[j]].to_vec()).collect()
    }
}
