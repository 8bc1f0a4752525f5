//! JSON form of a fold plan.
//!
//! The document carries only integers. Geometry and spread are rebuilt from
//! `params` on load; the memory map and both schedules are taken verbatim so
//! that a hand-edited plan can be checked rather than silently repaired.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::folding::{FoldPlan, HyperplaneTask, MemoryMap, Phase1, SlotAccess};
use crate::galois::DEFAULT_MAX_ORDER;
use crate::partition::{spread_partition, CarrierAssignment, CarrierStrategy};
use crate::projective::{build_space_with, incidence_graph, Edge, ProjParams};

pub const SCHEMA: &str = "pgfold-plan/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDocument {
    pub schema: String,
    pub params: PlanParams,
    pub memories: Memories,
    pub memory_map: Vec<MapRow>,
    pub phase1: Vec<Vec<SlotRow>>,
    pub phase2: Vec<Vec<TaskRow>>,
    pub degree_profile: Vec<usize>,
    pub idle_slots: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanParams {
    pub m: u32,
    pub q: u64,
    pub k: u32,
    pub p: u64,
    pub e: u32,
    /// Primitive polynomial over GF(p), leading coefficient first.
    pub poly: Vec<u32>,
    pub carriers: CarrierAssignment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Memories {
    pub count: usize,
    pub size: usize,
}

/// `[point, hyperplane, mem, addr]`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapRow(pub usize, pub usize, pub usize, pub usize);

/// `[slot, mem, addr]`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRow(pub usize, pub usize, pub usize);

/// `[hyperplane, [addr, ...]]`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRow(pub usize, pub Vec<usize>);

impl PlanDocument {
    pub fn from_plan(plan: &FoldPlan) -> Self {
        let fp = plan.partition.params;
        let spec = plan.space.field().spec();
        Self {
            schema: SCHEMA.to_string(),
            params: PlanParams {
                m: fp.m,
                q: fp.q,
                k: fp.k,
                p: spec.p,
                e: spec.e,
                poly: spec.poly.clone(),
                carriers: plan.partition.assignment,
            },
            memories: Memories {
                count: plan.memory_map.mem_count,
                size: plan.memory_map.mem_size,
            },
            memory_map: plan
                .memory_map
                .entries(&plan.graph)
                .map(|en| MapRow(en.edge.point, en.edge.hyperplane, en.mem, en.addr))
                .collect(),
            phase1: plan
                .phase1
                .units
                .iter()
                .map(|acc| acc.iter().map(|a| SlotRow(a.slot, a.mem, a.addr)).collect())
                .collect(),
            phase2: plan
                .phase2
                .iter()
                .map(|tasks| {
                    tasks
                        .iter()
                        .map(|t| TaskRow(t.hyperplane, t.addrs.clone()))
                        .collect()
                })
                .collect(),
            degree_profile: plan.phase1.round_lengths.clone(),
            idle_slots: plan.phase1.idle_slots,
        }
    }

    /// Rebuilds geometry and spread from `params` and attaches the stored
    /// map and schedules. Structural problems (unknown edges, wrong unit
    /// counts) are rejected here; everything else is left for the checker.
    pub fn into_plan(self) -> Result<FoldPlan> {
        let bad = |path: String, message: String| Error::PlanFormat { path, message };
        if self.schema != SCHEMA {
            return Err(bad(
                "schema".into(),
                format!("unsupported schema {:?}, expected {SCHEMA:?}", self.schema),
            ));
        }
        let pp = &self.params;
        let space = build_space_with(
            ProjParams::new(pp.m, pp.q),
            Some(pp.poly.clone()),
            DEFAULT_MAX_ORDER,
        )
        .map_err(|e| bad("params".into(), e.to_string()))?;
        let spec = space.field().spec();
        if (spec.p, spec.e) != (pp.p, pp.e) {
            return Err(bad(
                "params".into(),
                format!(
                    "p = {}, e = {} do not match q = {}, m = {} (expected p = {}, e = {})",
                    pp.p, pp.e, pp.q, pp.m, spec.p, spec.e
                ),
            ));
        }
        let strategy = match pp.carriers {
            CarrierAssignment::Matching => CarrierStrategy::Matching,
            _ => CarrierStrategy::Auto,
        };
        let partition = spread_partition(&space, pp.k, strategy)
            .map_err(|e| bad("params".into(), e.to_string()))?;
        if partition.assignment != pp.carriers {
            return Err(bad(
                "params.carriers".into(),
                format!("spread rebuilds with {:?} carriers", partition.assignment),
            ));
        }
        let graph = incidence_graph(&space);
        let b = partition.params.blocks;

        let n = graph.n_edges();
        if self.memory_map.len() != n {
            return Err(bad(
                "memory_map".into(),
                format!("{} rows for {n} edges", self.memory_map.len()),
            ));
        }
        let mut mem = vec![usize::MAX; n];
        let mut addr = vec![usize::MAX; n];
        for (i, &MapRow(point, hyperplane, m, a)) in self.memory_map.iter().enumerate() {
            let path = format!("memory_map[{i}]");
            let e = graph
                .edge_index(Edge::new(point, hyperplane))
                .ok_or_else(|| {
                    bad(
                        path.clone(),
                        format!("({point}, {hyperplane}) is not an edge"),
                    )
                })?;
            if mem[e] != usize::MAX {
                return Err(bad(
                    path,
                    format!("edge ({point}, {hyperplane}) listed twice"),
                ));
            }
            mem[e] = m;
            addr[e] = a;
        }
        for (what, len) in [("phase1", self.phase1.len()), ("phase2", self.phase2.len())] {
            if len != b {
                return Err(bad(
                    what.into(),
                    format!("{len} units listed, expected {b}"),
                ));
            }
        }
        if self.degree_profile.len() != b {
            return Err(bad(
                "degree_profile".into(),
                format!("{} rounds listed, expected {b}", self.degree_profile.len()),
            ));
        }

        let profile = partition.degree_profile(&space);
        Ok(FoldPlan {
            memory_map: MemoryMap {
                mem_count: self.memories.count,
                mem_size: self.memories.size,
                mem,
                addr,
            },
            phase1: Phase1 {
                units: self
                    .phase1
                    .into_iter()
                    .map(|acc| {
                        acc.into_iter()
                            .map(|SlotRow(slot, mem, addr)| SlotAccess { slot, mem, addr })
                            .collect()
                    })
                    .collect(),
                round_lengths: self.degree_profile,
                idle_slots: self.idle_slots,
            },
            phase2: self
                .phase2
                .into_iter()
                .map(|tasks| {
                    tasks
                        .into_iter()
                        .map(|TaskRow(hyperplane, addrs)| HyperplaneTask { hyperplane, addrs })
                        .collect()
                })
                .collect(),
            space,
            graph,
            partition,
            profile,
        })
    }
}

/// Canonical serialization: fixed field order, compact, trailing newline.
pub fn to_json(plan: &FoldPlan) -> String {
    document_to_json(&PlanDocument::from_plan(plan))
}

pub fn document_to_json(doc: &PlanDocument) -> String {
    let mut s = serde_json::to_string(doc).expect("plan documents always serialize");
    s.push('\n');
    s
}

/// Parses a document, reporting the path of the first offending field.
pub fn parse_document(text: &str) -> Result<PlanDocument> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::PlanFormat {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn from_json(text: &str) -> Result<FoldPlan> {
    parse_document(text)?.into_plan()
}
