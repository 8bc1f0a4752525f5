//! Folding a spread onto `B` processing units and `B` memories.
//!
//! Unit `i` owns the points of block `i` and memory `i` holds every edge
//! whose hyperplane lies in group `i`. Phase 1 walks the block's points one
//! at a time and, in round `j`, fetches from memory `(i+j) mod B`; phase 2
//! evaluates the unit's own hyperplanes from its own memory.

use crate::error::{Error, Result};
use crate::par;
use crate::partition::{spread_partition, CarrierStrategy, DegreeProfile, SpreadPartition};
use crate::projective::{
    build_space, incidence_graph, Edge, IncidenceGraph, ProjParams, ProjectiveSpace,
};

/// Edge placement: `mem[e]`, `addr[e]` for every edge index `e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryMap {
    pub mem_count: usize,
    pub mem_size: usize,
    pub mem: Vec<usize>,
    pub addr: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MapEntry {
    pub edge: Edge,
    pub mem: usize,
    pub addr: usize,
}

impl MemoryMap {
    pub fn location(&self, edge_index: usize) -> (usize, usize) {
        (self.mem[edge_index], self.addr[edge_index])
    }

    pub fn entries<'a>(&'a self, graph: &'a IncidenceGraph) -> impl Iterator<Item = MapEntry> + 'a {
        (0..self.mem.len()).map(move |e| MapEntry {
            edge: graph.edge(e),
            mem: self.mem[e],
            addr: self.addr[e],
        })
    }

    /// `table[mem][addr]` = edge index stored there. Fails on a location
    /// outside the memories or holding two edges.
    pub fn inverse(&self) -> Result<Vec<Vec<Option<usize>>>> {
        let mut table = vec![vec![None; self.mem_size]; self.mem_count];
        for e in 0..self.mem.len() {
            let (m, a) = self.location(e);
            let cell = table
                .get_mut(m)
                .and_then(|row| row.get_mut(a))
                .ok_or_else(|| {
                    Error::InvalidPlan(format!("edge {e} placed outside memory at ({m}, {a})"))
                })?;
            if let Some(other) = cell.replace(e) {
                return Err(Error::InvalidPlan(format!(
                    "edges {other} and {e} share memory {m} address {a}"
                )));
            }
        }
        Ok(table)
    }
}

/// One phase-1 access by a unit: during `slot` it reads `mem[addr]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SlotAccess {
    pub slot: usize,
    pub mem: usize,
    pub addr: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phase1 {
    /// Per unit, accesses in slot order. Idle slots are absent.
    pub units: Vec<Vec<SlotAccess>>,
    /// Padded length of each round within a point step.
    pub round_lengths: Vec<usize>,
    pub idle_slots: usize,
}

impl Phase1 {
    pub fn step_len(&self) -> usize {
        self.round_lengths.iter().sum()
    }

    /// Offset within a point step at which round `j` starts.
    pub fn round_start(&self, j: usize) -> usize {
        self.round_lengths[..j].iter().sum()
    }

    /// Round containing `offset` within a point step.
    pub fn round_of(&self, offset: usize) -> Option<usize> {
        let mut end = 0;
        self.round_lengths.iter().position(|&len| {
            end += len;
            offset < end
        })
    }
}

/// One phase-2 hyperplane evaluation: `addrs[n]` is the local address of
/// the edge to the hyperplane's `n`-th point. Together these form the LUT.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperplaneTask {
    pub hyperplane: usize,
    pub addrs: Vec<usize>,
}

/// Address generation: a plain counter per memory in phase 1 and a lookup
/// table per unit in phase 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressGen {
    pub counter_limits: Vec<usize>,
    /// `lut[unit][task][n]`.
    pub lut: Vec<Vec<Vec<usize>>>,
}

impl AddressGen {
    pub fn counter(&self, mem: usize) -> std::ops::Range<usize> {
        0..self.counter_limits[mem]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FoldOptions {
    pub carrier_strategy: CarrierStrategy,
}

#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub space: ProjectiveSpace,
    pub graph: IncidenceGraph,
    pub partition: SpreadPartition,
    pub profile: DegreeProfile,
    pub memory_map: MemoryMap,
    pub phase1: Phase1,
    pub phase2: Vec<Vec<HyperplaneTask>>,
}

impl FoldPlan {
    pub fn units(&self) -> usize {
        self.partition.params.blocks
    }

    /// Phase-1 read schedule length per unit, idle slots included.
    pub fn phase1_len(&self) -> usize {
        self.partition.params.points_per_block * self.phase1.step_len()
    }

    /// Phase-2 read count per unit.
    pub fn phase2_len(&self) -> usize {
        self.partition.params.points_per_block * self.graph.degree()
    }

    pub fn address_gen(&self) -> AddressGen {
        AddressGen {
            counter_limits: vec![self.memory_map.mem_size; self.memory_map.mem_count],
            lut: self
                .phase2
                .iter()
                .map(|tasks| tasks.iter().map(|t| t.addrs.clone()).collect())
                .collect(),
        }
    }

    /// Points per unit.
    pub fn fold_factor(&self) -> usize {
        self.partition.params.points_per_block
    }
}

/// Edges unit `i` reads for point-step `r`, round `j`: those of the step's
/// point whose hyperplane lies in group `(i+j) mod B`, in hyperplane order.
fn round_edges(
    graph: &IncidenceGraph,
    partition: &SpreadPartition,
    i: usize,
    r: usize,
    j: usize,
) -> Vec<usize> {
    let b = partition.params.blocks;
    let point = partition.blocks[i].points[r];
    let target = (i + j) % b;
    graph
        .point_edge_indices(point)
        .filter(|&e| partition.hyperplanes.group_of[graph.edge(e).hyperplane] == target)
        .collect()
}

/// Per unit, chronological `(slot, edge index)` phase-1 reads.
type Layout = Vec<Vec<(usize, usize)>>;

/// The read layout plus padded round lengths and the idle count.
fn phase1_layout(
    graph: &IncidenceGraph,
    partition: &SpreadPartition,
) -> (Layout, Vec<usize>, usize) {
    let fp = partition.params;
    let b = fp.blocks;
    let rounds: Vec<Vec<Vec<Vec<usize>>>> = par::map_range(0..b, |i| {
        (0..fp.points_per_block)
            .map(|r| {
                (0..b)
                    .map(|j| round_edges(graph, partition, i, r, j))
                    .collect()
            })
            .collect()
    });
    let mut lengths = vec![0; b];
    for per_unit in &rounds {
        for per_step in per_unit {
            for (j, es) in per_step.iter().enumerate() {
                lengths[j] = lengths[j].max(es.len());
            }
        }
    }
    let step_len: usize = lengths.iter().sum();
    let mut idle = 0;
    let units = rounds
        .iter()
        .map(|per_unit| {
            let mut out = Vec::new();
            for (r, per_step) in per_unit.iter().enumerate() {
                let mut start = r * step_len;
                for (j, es) in per_step.iter().enumerate() {
                    out.extend(es.iter().enumerate().map(|(n, &e)| (start + n, e)));
                    idle += lengths[j] - es.len();
                    start += lengths[j];
                }
            }
            out
        })
        .collect();
    (units, lengths, idle)
}

/// Places every edge in the memory of its hyperplane's group, with
/// addresses handed out in phase-1 access order so that each memory is read
/// by a plain counter.
pub fn build_memory_map(partition: &SpreadPartition, graph: &IncidenceGraph) -> Result<MemoryMap> {
    let (units, _, _) = phase1_layout(graph, partition);
    memory_map_from_layout(partition, graph, &units)
}

fn memory_map_from_layout(
    partition: &SpreadPartition,
    graph: &IncidenceGraph,
    units: &[Vec<(usize, usize)>],
) -> Result<MemoryMap> {
    let b = partition.params.blocks;
    let total = graph.n_edges();
    if !total.is_multiple_of(b) {
        return Err(Error::Inconsistent(format!(
            "{total} edges do not split evenly over {b} memories"
        )));
    }
    let mem_size = total / b;
    for (i, g) in partition.hyperplanes.groups.iter().enumerate() {
        if g.len() * graph.degree() != mem_size {
            return Err(Error::Inconsistent(format!(
                "group {i} holds {} edges, memories hold {mem_size}",
                g.len() * graph.degree()
            )));
        }
    }
    let mut events: Vec<(usize, usize, usize)> = units
        .iter()
        .enumerate()
        .flat_map(|(u, acc)| acc.iter().map(move |&(slot, e)| (slot, u, e)))
        .collect();
    events.sort_unstable();

    let mut mem = vec![usize::MAX; total];
    let mut addr = vec![usize::MAX; total];
    let mut counter = vec![0; b];
    for (_, _, e) in events {
        let m = partition.hyperplanes.group_of[graph.edge(e).hyperplane];
        if mem[e] != usize::MAX {
            return Err(Error::Inconsistent(format!("edge {e} scheduled twice")));
        }
        mem[e] = m;
        addr[e] = counter[m];
        counter[m] += 1;
    }
    if let Some(e) = mem.iter().position(|&m| m == usize::MAX) {
        let edge = graph.edge(e);
        return Err(Error::Inconsistent(format!(
            "edge ({}, {}) never scheduled",
            edge.point, edge.hyperplane
        )));
    }
    Ok(MemoryMap {
        mem_count: b,
        mem_size,
        mem,
        addr,
    })
}

pub fn build_phase1_schedule(
    partition: &SpreadPartition,
    graph: &IncidenceGraph,
    memory_map: &MemoryMap,
) -> Phase1 {
    let (units, round_lengths, idle_slots) = phase1_layout(graph, partition);
    Phase1 {
        units: resolve_accesses(units, memory_map),
        round_lengths,
        idle_slots,
    }
}

fn resolve_accesses(
    units: Vec<Vec<(usize, usize)>>,
    memory_map: &MemoryMap,
) -> Vec<Vec<SlotAccess>> {
    units
        .into_iter()
        .map(|acc| {
            acc.into_iter()
                .map(|(slot, e)| {
                    let (mem, addr) = memory_map.location(e);
                    SlotAccess { slot, mem, addr }
                })
                .collect()
        })
        .collect()
}

pub fn build_phase2_schedule(
    partition: &SpreadPartition,
    graph: &IncidenceGraph,
    memory_map: &MemoryMap,
) -> Result<Vec<Vec<HyperplaneTask>>> {
    par::map_range(0..partition.params.blocks, |i| {
        partition.hyperplanes.groups[i]
            .iter()
            .map(|&h| {
                let addrs = graph
                    .hyperplane_edge_indices(h)
                    .into_iter()
                    .map(|e| {
                        let (m, a) = memory_map.location(e);
                        if m != i {
                            let edge = graph.edge(e);
                            return Err(Error::Inconsistent(format!(
                                "edge ({}, {}) of group {i} resides in memory {m}",
                                edge.point, edge.hyperplane
                            )));
                        }
                        Ok(a)
                    })
                    .collect::<Result<_>>()?;
                Ok(HyperplaneTask {
                    hyperplane: h,
                    addrs,
                })
            })
            .collect()
    })
    .into_iter()
    .collect()
}

/// Composes a plan from an already built space and spread.
pub fn fold_spread(space: ProjectiveSpace, partition: SpreadPartition) -> Result<FoldPlan> {
    let graph = incidence_graph(&space);
    let profile = partition.degree_profile(&space);
    let (units, round_lengths, idle_slots) = phase1_layout(&graph, &partition);
    let memory_map = memory_map_from_layout(&partition, &graph, &units)?;
    let phase1 = Phase1 {
        units: resolve_accesses(units, &memory_map),
        round_lengths,
        idle_slots,
    };
    let phase2 = build_phase2_schedule(&partition, &graph, &memory_map)?;
    Ok(FoldPlan {
        space,
        graph,
        partition,
        profile,
        memory_map,
        phase1,
        phase2,
    })
}

pub fn fold_plan(m: u32, q: u64, k: u32) -> Result<FoldPlan> {
    fold_plan_with(m, q, k, FoldOptions::default())
}

pub fn fold_plan_with(m: u32, q: u64, k: u32, options: FoldOptions) -> Result<FoldPlan> {
    let space = build_space(ProjParams::new(m, q))?;
    let partition = spread_partition(&space, k, options.carrier_strategy)?;
    fold_spread(space, partition)
}
