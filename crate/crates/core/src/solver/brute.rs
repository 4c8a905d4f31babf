//! Exhaustive oracle: every combination of machine sequences, each turned
//! into its earliest-start schedule by longest paths.

use std::time::Instant;

use super::{SolveError, SolveResult, SolveStatus};
use crate::model::{ExtraPrecedence, JobShopInstance, OpRef, Schedule, Time};

/// Default cap on the total number of operations.
pub const BRUTE_FORCE_CAP: usize = 9;

pub fn brute_force(instance: &JobShopInstance) -> Result<SolveResult, SolveError> {
    brute_force_with_cap(instance, BRUTE_FORCE_CAP)
}

pub fn brute_force_with_cap(instance: &JobShopInstance, cap: usize) -> Result<SolveResult, SolveError> {
    let started = Instant::now();
    instance.check_prerequisites()?;
    let ops: Vec<OpRef> = instance.ops().collect();
    if ops.len() > cap {
        return Err(SolveError::CapExceeded { ops: ops.len(), cap });
    }

    // (before, after, lag): start[after] >= start[before] + lag
    let mut fixed: Vec<(OpRef, OpRef, Time)> = Vec::new();
    for job in 0..instance.num_jobs() {
        for i in 1..instance.num_ops(job) {
            let prev = OpRef::new(job, i - 1);
            fixed.push((prev, OpRef::new(job, i), instance.duration(prev)));
        }
    }
    for p in instance.extra_precedences() {
        match *p {
            ExtraPrecedence::EndBeforeStart { before, after } => fixed.push((before, after, instance.duration(before))),
            ExtraPrecedence::EndBeforeAllCompletions { op } => {
                for job in 0..instance.num_jobs() {
                    let last = OpRef::new(job, instance.num_ops(job) - 1);
                    fixed.push((op, last, instance.duration(op) - instance.duration(last)));
                }
            }
        }
    }

    let mut per_machine: Vec<Vec<OpRef>> = vec![Vec::new(); instance.num_machines()];
    for &op in &ops {
        per_machine[instance.machine(op)].push(op);
    }
    let sequences: Vec<Vec<Vec<OpRef>>> = per_machine.iter().map(|o| permutations(o)).collect();

    let mut best: Option<Schedule> = None;
    let mut combos: u64 = 0;
    let mut choice = vec![0usize; sequences.len()];
    loop {
        combos += 1;
        let mut arcs = fixed.clone();
        for (m, &c) in choice.iter().enumerate() {
            for w in sequences[m][c].windows(2) {
                arcs.push((w[0], w[1], instance.duration(w[0])));
            }
        }
        if let Some(starts) = earliest_starts(instance, &arcs) {
            let schedule = Schedule::from_starts(instance, starts).expect("shape matches");
            if best.as_ref().is_none_or(|b| schedule.objective_value < b.objective_value) {
                best = Some(schedule);
            }
        }
        // odometer over machine sequence choices
        let mut m = 0;
        while m < choice.len() {
            choice[m] += 1;
            if choice[m] < sequences[m].len() {
                break;
            }
            choice[m] = 0;
            m += 1;
        }
        if m == choice.len() {
            break;
        }
    }

    let status = if best.is_some() { SolveStatus::Optimal } else { SolveStatus::Infeasible };
    Ok(SolveResult { status, schedule: best, nodes_explored: combos, elapsed: started.elapsed() })
}

fn permutations(items: &[OpRef]) -> Vec<Vec<OpRef>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Longest-path start times, or `None` if the arcs contain a positive cycle.
fn earliest_starts(instance: &JobShopInstance, arcs: &[(OpRef, OpRef, Time)]) -> Option<Vec<Vec<Time>>> {
    let mut starts: Vec<Vec<Time>> = (0..instance.num_jobs())
        .map(|j| {
            let mut row = vec![0; instance.num_ops(j)];
            row[0] = instance.release(j);
            row
        })
        .collect();
    let n = instance.total_ops();
    for _ in 0..=n {
        let mut changed = false;
        for &(a, b, lag) in arcs {
            let need = starts[a.job][a.op] + lag;
            if starts[b.job][b.op] < need {
                starts[b.job][b.op] = need;
                changed = true;
            }
        }
        if !changed {
            return Some(starts);
        }
    }
    None
}
