//! Slot-level replay of a fold plan, and the fully parallel reference it
//! must agree with.
//!
//! One iteration is phase 1 (every point reduces its edges, every edge is
//! updated from that reduction) followed by phase 2 (the same per
//! hyperplane). The folded run does this through the plan's memories one
//! read or write per unit per slot, checking port usage as it goes.

use std::fmt::Debug;
use std::io::{self, Write};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::folding::FoldPlan;
use crate::par;
use crate::projective::{Edge, IncidenceGraph};

pub use crate::check::{check_plan, PlanReport};

/// How an edge combines the vertex reduction with its previous value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum UpdateRule {
    /// `new = reduced`
    #[default]
    Assign,
    /// `new = old ⊕ reduced`, with the kernel's own reduction as `⊕`.
    AddReduced,
}

/// A commutative, associative reduction plus an edge update rule.
pub trait Kernel: Sync {
    type Word: Clone + PartialEq + Debug + Send + Sync;

    fn name(&self) -> &'static str;
    fn identity(&self) -> Self::Word;
    fn reduce(&self, a: &Self::Word, b: &Self::Word) -> Self::Word;
    fn rule(&self) -> UpdateRule;
    fn random_word<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Word;

    fn update(&self, reduced: &Self::Word, old: &Self::Word) -> Self::Word {
        match self.rule() {
            UpdateRule::Assign => reduced.clone(),
            UpdateRule::AddReduced => self.reduce(old, reduced),
        }
    }

    fn reduce_all<'a, I>(&self, words: I) -> Self::Word
    where
        I: IntoIterator<Item = &'a Self::Word>,
        Self::Word: 'a,
    {
        words
            .into_iter()
            .fold(self.identity(), |acc, w| self.reduce(&acc, w))
    }
}

/// Exclusive-or over `width`-bit words.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct XorKernel {
    pub width: u32,
    pub rule: UpdateRule,
}

impl Default for XorKernel {
    fn default() -> Self {
        Self {
            width: 16,
            rule: UpdateRule::Assign,
        }
    }
}

impl XorKernel {
    fn mask(&self) -> u64 {
        if self.width >= 64 {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        }
    }
}

impl Kernel for XorKernel {
    type Word = u64;

    fn name(&self) -> &'static str {
        "xor"
    }

    fn identity(&self) -> u64 {
        0
    }

    fn reduce(&self, a: &u64, b: &u64) -> u64 {
        (a ^ b) & self.mask()
    }

    fn rule(&self) -> UpdateRule {
        self.rule
    }

    fn random_word<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.random::<u64>() & self.mask()
    }
}

/// Exact integer sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SumKernel {
    pub rule: UpdateRule,
}

impl Kernel for SumKernel {
    type Word = BigUint;

    fn name(&self) -> &'static str {
        "sum"
    }

    fn identity(&self) -> BigUint {
        BigUint::ZERO
    }

    fn reduce(&self, a: &BigUint, b: &BigUint) -> BigUint {
        a + b
    }

    fn rule(&self) -> UpdateRule {
        self.rule
    }

    fn random_word<R: Rng + ?Sized>(&self, rng: &mut R) -> BigUint {
        BigUint::from(rng.random::<u32>())
    }
}

/// One value per edge, indexed like the incidence graph's edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeState<W> {
    pub values: Vec<W>,
    pub iteration: usize,
    /// Seed of the initial fill, when it was random.
    pub seed: Option<u64>,
}

impl<W: Clone> EdgeState<W> {
    pub fn filled(n_edges: usize, value: W) -> Self {
        Self {
            values: vec![value; n_edges],
            iteration: 0,
            seed: None,
        }
    }

    pub fn random<K: Kernel<Word = W>>(kernel: &K, n_edges: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            values: (0..n_edges).map(|_| kernel.random_word(&mut rng)).collect(),
            iteration: 0,
            seed: Some(seed),
        }
    }
}

/// Every point reduces its edges; every edge takes the update.
pub fn reference_phase1<K: Kernel>(
    graph: &IncidenceGraph,
    kernel: &K,
    values: &[K::Word],
) -> Vec<K::Word> {
    par::map_range(0..graph.n_vertices(), |p| {
        let own = &values[graph.point_edge_indices(p)];
        let r = kernel.reduce_all(own);
        own.iter()
            .map(|old| kernel.update(&r, old))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Every hyperplane reduces its edges; every edge takes the update.
pub fn reference_phase2<K: Kernel>(
    graph: &IncidenceGraph,
    kernel: &K,
    values: &[K::Word],
) -> Vec<K::Word> {
    let per_hyperplane = par::map_range(0..graph.n_vertices(), |h| {
        let idx = graph.hyperplane_edge_indices(h);
        let r = kernel.reduce_all(idx.iter().map(|&e| &values[e]));
        idx.into_iter()
            .map(|e| (e, kernel.update(&r, &values[e])))
            .collect::<Vec<_>>()
    });
    let mut out = values.to_vec();
    for (e, v) in per_hyperplane.into_iter().flatten() {
        out[e] = v;
    }
    out
}

pub fn run_reference<K: Kernel>(
    graph: &IncidenceGraph,
    kernel: &K,
    init: &EdgeState<K::Word>,
    iters: usize,
) -> EdgeState<K::Word> {
    let mut state = init.clone();
    for _ in 0..iters {
        let mid = reference_phase1(graph, kernel, &state.values);
        state.values = reference_phase2(graph, kernel, &mid);
        state.iteration += 1;
    }
    state
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub record_trace: bool,
    /// Let the write-back of one step share slots with the next step's reads.
    pub overlap: bool,
    /// Stop at the first conflict or double read instead of recording it.
    pub abort_on_conflict: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            record_trace: false,
            overlap: false,
            abort_on_conflict: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Read,
    Write,
}

impl Op {
    pub fn as_str(self) -> &'static str {
        match self {
            Op::Read => "read",
            Op::Write => "write",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub slot: usize,
    pub unit: usize,
    pub mem: usize,
    pub addr: usize,
    pub op: Op,
    pub edge: Edge,
}

/// Two or more units on one memory port in one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conflict {
    pub slot: usize,
    pub mem: usize,
    pub port: &'static str,
    pub units: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DoubleRead {
    pub slot: usize,
    pub unit: usize,
    pub mem: usize,
    pub addr: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimTrace {
    pub records: Vec<TraceRecord>,
    pub conflicts: Vec<Conflict>,
    pub double_reads: Vec<DoubleRead>,
    pub reads: usize,
    pub writes: usize,
    pub phase1_reads: usize,
    /// Idle phase-1 read slots summed over units and iterations.
    pub idle_slots: usize,
    /// Phase-1 read schedule length per unit.
    pub phase1_slots: usize,
    /// Timeline slots per iteration, both phases, reads and writes.
    pub slots_per_iteration: usize,
    pub iterations: usize,
    pub seed: Option<u64>,
}

impl SimTrace {
    /// Busy fraction of the phase-1 read schedule.
    pub fn utilization(&self) -> f64 {
        let busy = self.phase1_reads;
        if busy + self.idle_slots == 0 {
            return 1.0;
        }
        busy as f64 / (busy + self.idle_slots) as f64
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "slot,unit,mem,addr,op,edge_point,edge_hyperplane")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.slot,
                r.unit,
                r.mem,
                r.addr,
                r.op.as_str(),
                r.edge.point,
                r.edge.hyperplane
            )?;
        }
        Ok(())
    }
}

/// A scheduled access: read at `read_at`, write back at `write_at`. Reads
/// sharing `group` on one unit form one vertex evaluation.
#[derive(Debug, Clone, Copy)]
struct Access {
    unit: usize,
    group: usize,
    mem: usize,
    addr: usize,
    read_at: usize,
    write_at: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: usize,
    /// Reads before writes within a slot.
    write: bool,
    unit: usize,
    access: usize,
}

struct PhaseProgram {
    accesses: Vec<Access>,
    events: Vec<Event>,
    groups_per_unit: usize,
    span: usize,
}

impl PhaseProgram {
    fn new(accesses: Vec<Access>, groups_per_unit: usize, span: usize) -> Self {
        let mut events: Vec<Event> = accesses
            .iter()
            .enumerate()
            .flat_map(|(i, a)| {
                [(a.read_at, false), (a.write_at, true)].map(|(time, write)| Event {
                    time,
                    write,
                    unit: a.unit,
                    access: i,
                })
            })
            .collect();
        events.sort_unstable();
        Self {
            accesses,
            events,
            groups_per_unit,
            span,
        }
    }
}

fn phase1_program(plan: &FoldPlan, overlap: bool) -> PhaseProgram {
    let step = plan.phase1.step_len().max(1);
    let accesses = plan
        .phase1
        .units
        .iter()
        .enumerate()
        .flat_map(|(u, acc)| {
            acc.iter().map(move |a| {
                let (r, o) = (a.slot / step, a.slot % step);
                let read_at = if overlap { a.slot } else { 2 * r * step + o };
                Access {
                    unit: u,
                    group: r,
                    mem: a.mem,
                    addr: a.addr,
                    read_at,
                    write_at: read_at + step,
                }
            })
        })
        .collect();
    let steps = plan.partition.params.points_per_block;
    let span = if overlap {
        (steps + 1) * step
    } else {
        2 * steps * step
    };
    PhaseProgram::new(accesses, steps, span)
}

fn phase2_program(plan: &FoldPlan, overlap: bool) -> PhaseProgram {
    let d = plan.graph.degree();
    let accesses = plan
        .phase2
        .iter()
        .enumerate()
        .flat_map(|(u, tasks)| {
            tasks.iter().enumerate().flat_map(move |(n, t)| {
                t.addrs.iter().enumerate().map(move |(i, &addr)| {
                    let read_at = if overlap { n * d + i } else { 2 * n * d + i };
                    Access {
                        unit: u,
                        group: n,
                        mem: u,
                        addr,
                        read_at,
                        write_at: read_at + d,
                    }
                })
            })
        })
        .collect();
    let tasks = plan.phase2.iter().map(Vec::len).max().unwrap_or(0);
    let span = if overlap {
        (tasks + 1) * d
    } else {
        2 * tasks * d
    };
    PhaseProgram::new(accesses, tasks, span)
}

struct Machine<'a, K: Kernel> {
    kernel: &'a K,
    mems: Vec<Vec<K::Word>>,
    owner: &'a [Vec<Option<usize>>],
    units: usize,
    options: SimOptions,
    trace: SimTrace,
}

impl<K: Kernel> Machine<'_, K> {
    fn run_phase(&mut self, prog: &PhaseProgram, base: usize) -> Result<()> {
        let mut acc: Vec<Vec<K::Word>> =
            vec![vec![self.kernel.identity(); prog.groups_per_unit]; self.units];
        let mut held: Vec<Option<K::Word>> = vec![None; prog.accesses.len()];
        let mut read_seen: Vec<Vec<bool>> =
            self.mems.iter().map(|m| vec![false; m.len()]).collect();
        let mut pending: Vec<(usize, K::Word)> = Vec::new();

        let mut i = 0;
        while i < prog.events.len() {
            let time = prog.events[i].time;
            let end = i + prog.events[i..]
                .iter()
                .take_while(|e| e.time == time)
                .count();
            let slot = base + time;
            self.check_ports(&prog.events[i..end], prog, slot)?;
            for ev in &prog.events[i..end] {
                let a = prog.accesses[ev.access];
                if !ev.write {
                    if std::mem::replace(&mut read_seen[a.mem][a.addr], true) {
                        let dr = DoubleRead {
                            slot,
                            unit: a.unit,
                            mem: a.mem,
                            addr: a.addr,
                        };
                        if self.options.abort_on_conflict {
                            return Err(Error::DoubleRead {
                                slot,
                                unit: a.unit,
                                mem: a.mem,
                                addr: a.addr,
                            });
                        }
                        self.trace.double_reads.push(dr);
                    }
                    let v = self.mems[a.mem][a.addr].clone();
                    let g = &mut acc[a.unit][a.group];
                    *g = self.kernel.reduce(g, &v);
                    held[ev.access] = Some(v);
                    self.trace.reads += 1;
                } else {
                    let old = held[ev.access].take().expect("write follows its read");
                    pending.push((ev.access, self.kernel.update(&acc[a.unit][a.group], &old)));
                    self.trace.writes += 1;
                }
                if self.options.record_trace {
                    self.trace.records.push(TraceRecord {
                        slot,
                        unit: a.unit,
                        mem: a.mem,
                        addr: a.addr,
                        op: if ev.write { Op::Write } else { Op::Read },
                        edge: Edge::new(usize::MAX, usize::MAX),
                    });
                }
            }
            for (ai, v) in pending.drain(..) {
                let a = prog.accesses[ai];
                self.mems[a.mem][a.addr] = v;
            }
            i = end;
        }
        Ok(())
    }

    fn check_ports(&mut self, events: &[Event], prog: &PhaseProgram, slot: usize) -> Result<()> {
        for (write, port) in [(false, "read"), (true, "write")] {
            let mut uses: Vec<(usize, usize)> = events
                .iter()
                .filter(|e| e.write == write)
                .map(|e| (prog.accesses[e.access].mem, e.unit))
                .collect();
            uses.sort_unstable();
            let mut k = 0;
            while k < uses.len() {
                let mem = uses[k].0;
                let n = uses[k..].iter().take_while(|u| u.0 == mem).count();
                if n > 1 {
                    let units = uses[k..k + n].iter().map(|u| u.1).collect();
                    let c = Conflict {
                        slot,
                        mem,
                        port,
                        units,
                    };
                    if self.options.abort_on_conflict {
                        return Err(Error::Conflict {
                            slot,
                            mem,
                            port,
                            units: c.units,
                        });
                    }
                    self.trace.conflicts.push(c);
                }
                k += n;
            }
        }
        Ok(())
    }
}

fn validate_accesses(plan: &FoldPlan, prog: &PhaseProgram, phase: u8) -> Result<()> {
    let map = &plan.memory_map;
    for a in &prog.accesses {
        if a.mem >= map.mem_count || a.addr >= map.mem_size {
            return Err(Error::InvalidPlan(format!(
                "phase {phase} unit {} accesses memory {} address {} outside {}x{}",
                a.unit, a.mem, a.addr, map.mem_count, map.mem_size
            )));
        }
    }
    Ok(())
}

/// Replays the plan slot by slot. Edge values are loaded into the memories
/// through the memory map and read back the same way at the end.
pub fn run_folded<K: Kernel>(
    plan: &FoldPlan,
    kernel: &K,
    init: &EdgeState<K::Word>,
    iters: usize,
    options: SimOptions,
) -> Result<(EdgeState<K::Word>, SimTrace)> {
    let map = &plan.memory_map;
    if init.values.len() != map.mem.len() {
        return Err(Error::InvalidPlan(format!(
            "{} initial values for {} mapped edges",
            init.values.len(),
            map.mem.len()
        )));
    }
    let owner = map.inverse()?;
    let p1 = phase1_program(plan, options.overlap);
    let p2 = phase2_program(plan, options.overlap);
    validate_accesses(plan, &p1, 1)?;
    validate_accesses(plan, &p2, 2)?;

    let mut mems = vec![vec![kernel.identity(); map.mem_size]; map.mem_count];
    for (e, v) in init.values.iter().enumerate() {
        let (m, a) = map.location(e);
        mems[m][a] = v.clone();
    }
    let period = p1.span + p2.span;
    let mut machine = Machine {
        kernel,
        mems,
        owner: &owner,
        units: plan.units(),
        options,
        trace: SimTrace {
            phase1_slots: plan.phase1_len(),
            slots_per_iteration: period,
            iterations: iters,
            seed: init.seed,
            ..SimTrace::default()
        },
    };
    for it in 0..iters {
        let before = machine.trace.reads;
        machine.run_phase(&p1, it * period)?;
        machine.trace.phase1_reads += machine.trace.reads - before;
        machine.run_phase(&p2, it * period + p1.span)?;
        machine.trace.idle_slots += plan.phase1.idle_slots;
    }

    let mut trace = machine.trace;
    for r in &mut trace.records {
        if let Some(e) = machine.owner[r.mem][r.addr] {
            r.edge = plan.graph.edge(e);
        }
    }
    let values = (0..map.mem.len())
        .map(|e| {
            let (m, a) = map.location(e);
            machine.mems[m][a].clone()
        })
        .collect();
    let state = EdgeState {
        values,
        iteration: init.iteration + iters,
        seed: init.seed,
    };
    Ok((state, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::folding::fold_plan;
    use crate::projective::{build_space, incidence_graph, ProjParams};
    use proptest::prelude::*;

    fn graph(m: u32, q: u64) -> IncidenceGraph {
        incidence_graph(&build_space(ProjParams::new(m, q)).unwrap())
    }

    #[test]
    fn zero_iterations_leave_state_alone() {
        let g = graph(3, 2);
        let k = XorKernel::default();
        let init = EdgeState::random(&k, g.n_edges(), 9);
        assert_eq!(run_reference(&g, &k, &init, 0), init);
    }

    #[test]
    fn degree_one_fixpoint() {
        let g = graph(1, 2);
        let k = XorKernel::default();
        let init = EdgeState::filled(g.n_edges(), 1u64);
        assert_eq!(run_reference(&g, &k, &init, 1).values, vec![1; 3]);
    }

    #[test]
    fn sum_of_ones_is_the_degree() {
        let g = graph(5, 2);
        let k = SumKernel::default();
        let out = reference_phase1(&g, &k, &vec![BigUint::from(1u32); g.n_edges()]);
        assert!(out.iter().all(|v| *v == BigUint::from(31u32)));
        // Phase 2 then sums 31 copies of 31.
        let out = reference_phase2(&g, &k, &out);
        assert!(out.iter().all(|v| *v == BigUint::from(961u32)));
    }

    #[test]
    fn folded_matches_reference_p5_planes() {
        let plan = fold_plan(5, 2, 2).unwrap();
        let k = XorKernel::default();
        let init = EdgeState::random(&k, plan.graph.n_edges(), 42);
        let want = run_reference(&plan.graph, &k, &init, 3);
        let (got, trace) = run_folded(&plan, &k, &init, 3, SimOptions::default()).unwrap();
        assert_eq!(got, want);
        assert_eq!(trace.phase1_slots, 217);
        assert!(trace.conflicts.is_empty());
        assert_eq!(trace.idle_slots, 0);
        assert_eq!(trace.utilization(), 1.0);
        assert_eq!(trace.seed, Some(42));
    }

    #[test]
    fn overlap_and_add_rule() {
        let plan = fold_plan(5, 2, 1).unwrap();
        let k = SumKernel {
            rule: UpdateRule::AddReduced,
        };
        let init = EdgeState::random(&k, plan.graph.n_edges(), 1);
        let want = run_reference(&plan.graph, &k, &init, 2);
        let opts = SimOptions {
            overlap: true,
            ..SimOptions::default()
        };
        let (got, trace) = run_folded(&plan, &k, &init, 2, opts).unwrap();
        assert_eq!(got, want);
        assert_eq!(trace.phase1_slots, 93);
        assert!(trace.conflicts.is_empty());
        // Overlapped timeline is shorter than the split one.
        let (_, split) = run_folded(&plan, &k, &init, 1, SimOptions::default()).unwrap();
        assert!(trace.slots_per_iteration < split.slots_per_iteration);
    }

    #[test]
    fn trace_rows_name_edges() {
        let plan = fold_plan(3, 2, 1).unwrap();
        let k = XorKernel::default();
        let init = EdgeState::random(&k, plan.graph.n_edges(), 5);
        let opts = SimOptions {
            record_trace: true,
            ..SimOptions::default()
        };
        let (_, trace) = run_folded(&plan, &k, &init, 1, opts).unwrap();
        let n = plan.graph.n_edges();
        assert_eq!(trace.records.len(), 4 * n);
        assert!(trace.records.windows(2).all(|w| w[0].slot <= w[1].slot));
        assert!(trace
            .records
            .iter()
            .all(|r| plan.graph.edge_index(r.edge).is_some()));
        let mut csv = Vec::new();
        trace.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("slot,unit,mem,addr,op,edge_point,edge_hyperplane\n"));
        assert_eq!(text.lines().count(), 4 * n + 1);
    }

    #[test]
    fn swapped_slots_conflict() {
        let mut plan = fold_plan(5, 2, 2).unwrap();
        let acc = &mut plan.phase1.units[0];
        let (a, b) = (acc[1], acc[10]);
        acc[1].mem = b.mem;
        acc[1].addr = b.addr;
        acc[10].mem = a.mem;
        acc[10].addr = a.addr;
        let k = XorKernel::default();
        let init = EdgeState::random(&k, plan.graph.n_edges(), 1);
        match run_folded(&plan, &k, &init, 1, SimOptions::default()) {
            Err(Error::Conflict { slot, .. }) => assert_eq!(slot, 1),
            other => panic!("expected conflict, got {other:?}"),
        }
        let opts = SimOptions {
            abort_on_conflict: false,
            ..SimOptions::default()
        };
        let (_, trace) = run_folded(&plan, &k, &init, 1, opts).unwrap();
        assert!(!trace.conflicts.is_empty());
        assert_eq!(trace.conflicts[0].slot, 1);
    }

    proptest! {
        #[test]
        fn reduction_order_is_irrelevant(
            words in proptest::collection::vec(any::<u64>(), 1..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let mut shuffled = words.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let x = XorKernel::default();
            prop_assert_eq!(x.reduce_all(&words), x.reduce_all(&shuffled));
            let s = SumKernel::default();
            let big: Vec<BigUint> = words.iter().map(|&w| BigUint::from(w)).collect();
            let big_shuffled: Vec<BigUint> = shuffled.iter().map(|&w| BigUint::from(w)).collect();
            prop_assert_eq!(s.reduce_all(&big), s.reduce_all(&big_shuffled));
        }

        #[test]
        fn folded_equals_reference_on_random_inputs(seed in any::<u64>(), iters in 0usize..3) {
            let plan = fold_plan(3, 2, 1).unwrap();
            let k = XorKernel { width: 13, rule: UpdateRule::AddReduced };
            let init = EdgeState::random(&k, plan.graph.n_edges(), seed);
            let want = run_reference(&plan.graph, &k, &init, iters);
            let (got, _) = run_folded(&plan, &k, &init, iters, SimOptions::default()).unwrap();
            prop_assert_eq!(got, want);
        }
    }
}
