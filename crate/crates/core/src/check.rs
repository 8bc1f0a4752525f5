//! Static verification of a fold plan against its spread. Nothing here trusts
//! the builder: every invariant is recomputed from the graph and partition.

use std::collections::BTreeSet;

use crate::folding::FoldPlan;
use crate::par;
use crate::projective::Edge;
use crate::report::{Check, Report};

pub type PlanReport = Report;

fn show(e: Edge) -> String {
    format!("({}, {})", e.point, e.hyperplane)
}

/// `table[mem][addr]`: first edge claiming each in-range location.
fn location_table(plan: &FoldPlan) -> Vec<Vec<Option<usize>>> {
    let map = &plan.memory_map;
    let mut table = vec![vec![None; map.mem_size]; map.mem_count];
    for e in 0..map.mem.len() {
        let (m, a) = map.location(e);
        if let Some(cell) = table.get_mut(m).and_then(|r| r.get_mut(a)) {
            cell.get_or_insert(e);
        }
    }
    table
}

fn lookup(table: &[Vec<Option<usize>>], mem: usize, addr: usize) -> Option<usize> {
    table.get(mem).and_then(|r| r.get(addr)).copied().flatten()
}

pub fn check_plan(plan: &FoldPlan) -> PlanReport {
    let table = location_table(plan);
    let mut checks = vec![
        memory_shape(plan),
        residency(plan),
        address_uniqueness(plan),
        unit_count(plan),
        slot_order(plan),
        round_rotation(plan),
    ];
    checks.push(step_ownership(plan, &table));
    checks.push(phase1_coverage(plan, &table));
    checks.push(slot_injectivity(plan));
    checks.push(counter_property(plan));
    checks.push(degree_profile(plan));
    checks.push(idle_accounting(plan));
    checks.push(phase2_groups(plan));
    checks.push(phase2_lut(plan, &table));
    checks.push(phase2_coverage(plan));
    Report { checks }
}

fn memory_shape(plan: &FoldPlan) -> Check {
    let map = &plan.memory_map;
    let b = plan.units();
    let n = plan.graph.n_edges();
    let cases = [
        (
            map.mem_count == b,
            format!("{} memories for {b} units", map.mem_count),
        ),
        (
            map.mem_size * b == n,
            format!("{b} memories of {} words for {n} edges", map.mem_size),
        ),
        (
            map.mem.len() == n && map.addr.len() == n,
            format!("map covers {} of {n} edges", map.mem.len()),
        ),
    ];
    Check::from_outcomes(
        "memory-shape",
        cases
            .into_iter()
            .map(|(ok, w)| if ok { Ok(()) } else { Err(w) }),
    )
}

fn residency(plan: &FoldPlan) -> Check {
    let group_of = &plan.partition.hyperplanes.group_of;
    Check::from_outcomes(
        "residency",
        plan.memory_map.entries(&plan.graph).map(|en| {
            let g = group_of[en.edge.hyperplane];
            if en.mem == g {
                Ok(())
            } else {
                Err(format!(
                    "edge {} stored in memory {} but hyperplane {} belongs to group {g}",
                    show(en.edge),
                    en.mem,
                    en.edge.hyperplane
                ))
            }
        }),
    )
}

fn address_uniqueness(plan: &FoldPlan) -> Check {
    let map = &plan.memory_map;
    let mut owner: Vec<Vec<Option<Edge>>> = vec![vec![None; map.mem_size]; map.mem_count];
    let outcomes: Vec<_> = map
        .entries(&plan.graph)
        .map(
            |en| match owner.get_mut(en.mem).and_then(|r| r.get_mut(en.addr)) {
                None => Err(format!(
                    "edge {} placed at memory {} address {}, outside {}x{}",
                    show(en.edge),
                    en.mem,
                    en.addr,
                    map.mem_count,
                    map.mem_size
                )),
                Some(cell) => match cell.replace(en.edge) {
                    Some(prev) => Err(format!(
                        "edges {} and {} share memory {} address {}",
                        show(prev),
                        show(en.edge),
                        en.mem,
                        en.addr
                    )),
                    None => Ok(()),
                },
            },
        )
        .collect();
    Check::from_outcomes("address-uniqueness", outcomes)
}

fn unit_count(plan: &FoldPlan) -> Check {
    let b = plan.units();
    let cases = [
        (plan.phase1.units.len(), "phase 1"),
        (plan.phase2.len(), "phase 2"),
    ];
    Check::from_outcomes(
        "unit-count",
        cases.into_iter().map(|(n, what)| {
            if n == b {
                Ok(())
            } else {
                Err(format!("{what} lists {n} units, expected {b}"))
            }
        }),
    )
}

fn slot_order(plan: &FoldPlan) -> Check {
    let len = plan.phase1_len();
    let outcomes = plan.phase1.units.iter().enumerate().flat_map(|(u, acc)| {
        acc.iter().enumerate().map(move |(n, a)| {
            if a.slot >= len {
                Err(format!(
                    "unit {u} access {n} at slot {} past end {len}",
                    a.slot
                ))
            } else if n > 0 && acc[n - 1].slot >= a.slot {
                Err(format!("unit {u} slots out of order at slot {}", a.slot))
            } else {
                Ok(())
            }
        })
    });
    Check::from_outcomes("slot-order", outcomes.collect::<Vec<_>>())
}

fn round_rotation(plan: &FoldPlan) -> Check {
    let b = plan.units();
    let step = plan.phase1.step_len().max(1);
    let outcomes = plan.phase1.units.iter().enumerate().flat_map(|(u, acc)| {
        acc.iter()
            .map(move |a| match plan.phase1.round_of(a.slot % step) {
                Some(j) if a.mem == (u + j) % b => Ok(()),
                Some(j) => Err(format!(
                    "unit {u} slot {} is in round {j} but accesses memory {}, expected {}",
                    a.slot,
                    a.mem,
                    (u + j) % b
                )),
                None => Err(format!("unit {u} slot {} lies in no round", a.slot)),
            })
    });
    Check::from_outcomes("round-rotation", outcomes.collect::<Vec<_>>())
}

fn step_ownership(plan: &FoldPlan, table: &[Vec<Option<usize>>]) -> Check {
    let step = plan.phase1.step_len().max(1);
    let blocks = &plan.partition.blocks;
    let outcomes = plan.phase1.units.iter().enumerate().flat_map(|(u, acc)| {
        acc.iter().map(move |a| {
            let Some(e) = lookup(table, a.mem, a.addr) else {
                return Err(format!(
                    "unit {u} slot {} reads empty memory {} address {}",
                    a.slot, a.mem, a.addr
                ));
            };
            let edge = plan.graph.edge(e);
            let r = a.slot / step;
            match blocks.get(u).and_then(|b| b.points.get(r)) {
                Some(&p) if p == edge.point => Ok(()),
                Some(&p) => Err(format!(
                    "unit {u} slot {} reads edge {} during the step of point {p}",
                    a.slot,
                    show(edge)
                )),
                None => Err(format!("unit {u} slot {} has no point step", a.slot)),
            }
        })
    });
    Check::from_outcomes("step-ownership", outcomes.collect::<Vec<_>>())
}

fn phase1_coverage(plan: &FoldPlan, table: &[Vec<Option<usize>>]) -> Check {
    let mut reads = vec![0usize; plan.graph.n_edges()];
    for acc in &plan.phase1.units {
        for a in acc {
            if let Some(e) = lookup(table, a.mem, a.addr) {
                reads[e] += 1;
            }
        }
    }
    Check::from_outcomes(
        "phase1-read-once",
        reads.iter().enumerate().map(|(e, &c)| {
            if c == 1 {
                Ok(())
            } else {
                Err(format!(
                    "edge {} read {c} times in phase 1",
                    show(plan.graph.edge(e))
                ))
            }
        }),
    )
}

fn slot_injectivity(plan: &FoldPlan) -> Check {
    let len = plan.phase1_len();
    let mut by_slot: Vec<Vec<(usize, usize)>> = vec![Vec::new(); len];
    for (u, acc) in plan.phase1.units.iter().enumerate() {
        for a in acc {
            if let Some(v) = by_slot.get_mut(a.slot) {
                v.push((a.mem, u));
            }
        }
    }
    let outcomes = par::map_slice(&by_slot, |v| {
        let mut v = v.clone();
        v.sort_unstable();
        match v.windows(2).find(|w| w[0].0 == w[1].0) {
            Some(w) => Err((w[0].0, w[0].1, w[1].1)),
            None => Ok(()),
        }
    });
    Check::from_outcomes(
        "slot-injectivity",
        outcomes.into_iter().enumerate().map(|(s, r)| {
            r.map_err(|(m, a, b)| format!("slot {s}: units {a} and {b} both access memory {m}"))
        }),
    )
}

fn counter_property(plan: &FoldPlan) -> Check {
    let mut accesses: Vec<(usize, usize, usize, usize)> = plan
        .phase1
        .units
        .iter()
        .enumerate()
        .flat_map(|(u, acc)| acc.iter().map(move |a| (a.mem, a.slot, u, a.addr)))
        .collect();
    accesses.sort_unstable();
    let mut outcomes = Vec::with_capacity(accesses.len());
    let mut next = vec![0usize; plan.memory_map.mem_count.max(plan.units())];
    for (m, s, u, a) in accesses {
        let Some(expected) = next.get_mut(m) else {
            outcomes.push(Err(format!(
                "unit {u} slot {s} accesses missing memory {m}"
            )));
            continue;
        };
        outcomes.push(if a == *expected {
            Ok(())
        } else {
            Err(format!(
                "memory {m} at slot {s} (unit {u}) reads address {a}, counter is at {expected}"
            ))
        });
        *expected += 1;
    }
    for (m, &n) in next.iter().enumerate().take(plan.memory_map.mem_count) {
        if n != plan.memory_map.mem_size {
            outcomes.push(Err(format!(
                "memory {m} counter stops at {n} of {}",
                plan.memory_map.mem_size
            )));
        }
    }
    Check::from_outcomes("counter-property", outcomes)
}

fn degree_profile(plan: &FoldPlan) -> Check {
    let lens = &plan.phase1.round_lengths;
    let expected = &plan.profile.rounds;
    let mut outcomes = vec![if lens == expected {
        Ok(())
    } else {
        Err(format!(
            "round lengths {lens:?}, profile gives {expected:?}"
        ))
    }];
    let b = plan.units();
    let step = plan.phase1.step_len().max(1);
    let ppb = plan.partition.params.points_per_block;
    let mut counts = vec![vec![vec![0usize; lens.len()]; ppb]; b];
    for (u, acc) in plan.phase1.units.iter().enumerate().take(b) {
        for a in acc {
            if let (Some(j), Some(per_step)) = (
                plan.phase1.round_of(a.slot % step),
                counts[u].get_mut(a.slot / step),
            ) {
                per_step[j] += 1;
            }
        }
    }
    let g = &plan.partition.hyperplanes.group_of;
    for (u, per_unit) in counts.iter().enumerate() {
        for (r, per_step) in per_unit.iter().enumerate() {
            let point = plan.partition.blocks[u].points[r];
            let mut want = vec![0usize; b];
            for &h in plan.graph.hyperplanes_of(point) {
                want[(g[h] + b - u) % b] += 1;
            }
            outcomes.push(if *per_step == want {
                Ok(())
            } else {
                Err(format!(
                    "unit {u} point {point}: per-round reads {per_step:?}, incidence gives {want:?}"
                ))
            });
        }
    }
    Check::from_outcomes("degree-profile", outcomes)
}

fn idle_accounting(plan: &FoldPlan) -> Check {
    let busy: usize = plan.phase1.units.iter().map(Vec::len).sum();
    let total = plan.units() * plan.phase1_len();
    let cases = [
        total.checked_sub(busy) == Some(plan.phase1.idle_slots),
        plan.phase1.idle_slots > 0 || busy == plan.graph.n_edges(),
    ];
    Check::from_outcomes(
        "idle-accounting",
        cases.into_iter().map(|ok| {
            if ok {
                Ok(())
            } else {
                Err(format!(
                    "{busy} busy of {total} slots, {} idle reported",
                    plan.phase1.idle_slots
                ))
            }
        }),
    )
}

fn phase2_groups(plan: &FoldPlan) -> Check {
    let outcomes = plan.phase2.iter().enumerate().map(|(u, tasks)| {
        let got: Vec<usize> = tasks.iter().map(|t| t.hyperplane).collect();
        match plan.partition.hyperplanes.groups.get(u) {
            Some(want) if got == *want => Ok(()),
            Some(want) => Err(format!(
                "unit {u} evaluates hyperplanes {got:?}, group is {want:?}"
            )),
            None => Err(format!("unit {u} has no hyperplane group")),
        }
    });
    Check::from_outcomes("phase2-groups", outcomes.collect::<Vec<_>>())
}

fn phase2_lut(plan: &FoldPlan, table: &[Vec<Option<usize>>]) -> Check {
    let graph = &plan.graph;
    let outcomes = plan.phase2.iter().enumerate().flat_map(|(u, tasks)| {
        tasks.iter().flat_map(move |t| {
            let pts = graph.points_of(t.hyperplane);
            let len_ok = if t.addrs.len() == pts.len() {
                Ok(())
            } else {
                Err(format!(
                    "unit {u} hyperplane {} lists {} addresses for {} points",
                    t.hyperplane,
                    t.addrs.len(),
                    pts.len()
                ))
            };
            std::iter::once(len_ok).chain(t.addrs.iter().zip(pts).map(move |(&a, &p)| {
                let want = Edge::new(p, t.hyperplane);
                match lookup(table, u, a).map(|e| graph.edge(e)) {
                    Some(got) if got == want => Ok(()),
                    Some(got) => Err(format!(
                        "unit {u} lut entry for {} points at address {a} holding {}",
                        show(want),
                        show(got)
                    )),
                    None => Err(format!(
                        "unit {u} lut entry for {} points at empty local address {a}",
                        show(want)
                    )),
                }
            }))
        })
    });
    Check::from_outcomes("phase2-lut", outcomes.collect::<Vec<_>>())
}

fn phase2_coverage(plan: &FoldPlan) -> Check {
    let size = plan.memory_map.mem_size;
    let outcomes = plan.phase2.iter().enumerate().map(|(u, tasks)| {
        let mut seen = BTreeSet::new();
        for t in tasks {
            for &a in &t.addrs {
                if a >= size || !seen.insert(a) {
                    return Err(format!(
                        "unit {u} address {a} out of range or read twice in phase 2"
                    ));
                }
            }
        }
        if seen.len() == size {
            Ok(())
        } else {
            Err(format!(
                "unit {u} covers {} of {size} local addresses",
                seen.len()
            ))
        }
    });
    Check::from_outcomes("phase2-coverage", outcomes.collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::folding::fold_plan;

    fn failing(r: &PlanReport) -> Vec<&'static str> {
        r.failures().map(|c| c.name).collect()
    }

    #[test]
    fn generated_plans_pass() {
        for (m, q, k) in [(1, 2, 0), (3, 2, 1), (5, 2, 2), (5, 2, 1), (3, 3, 1)] {
            let r = check_plan(&fold_plan(m, q, k).unwrap());
            assert!(r.all_passed(), "P({m},{q}) k={k}:\n{r}");
        }
    }

    #[test]
    fn moved_edge_is_named() {
        let mut plan = fold_plan(5, 2, 2).unwrap();
        plan.memory_map.mem[10] = (plan.memory_map.mem[10] + 1) % 9;
        let r = check_plan(&plan);
        let res = r.get("residency").unwrap();
        assert!(!res.passed);
        let e = plan.graph.edge(10);
        assert!(res
            .witness
            .as_ref()
            .unwrap()
            .contains(&format!("({}, {})", e.point, e.hyperplane)));
    }

    #[test]
    fn swapped_edges_across_memories() {
        let mut plan = fold_plan(5, 2, 1).unwrap();
        let map = &mut plan.memory_map;
        let other = (0..map.mem.len())
            .find(|&e| map.mem[e] != map.mem[0])
            .unwrap();
        map.mem.swap(0, other);
        map.addr.swap(0, other);
        let r = check_plan(&plan);
        assert!(failing(&r).contains(&"residency"));
        assert!(failing(&r).contains(&"phase2-lut"));
    }

    #[test]
    fn swapped_slots_within_a_unit() {
        let mut plan = fold_plan(5, 2, 2).unwrap();
        let acc = &mut plan.phase1.units[4];
        let (a, b) = (acc[3], acc[40]);
        acc[3] = crate::folding::SlotAccess { slot: a.slot, ..b };
        acc[40] = crate::folding::SlotAccess { slot: b.slot, ..a };
        let r = check_plan(&plan);
        assert!(!r.all_passed());
        assert!(failing(&r).contains(&"slot-injectivity"));
    }

    #[test]
    fn wrong_idle_count() {
        let mut plan = fold_plan(3, 2, 1).unwrap();
        plan.phase1.idle_slots = 2;
        assert_eq!(failing(&check_plan(&plan)), vec!["idle-accounting"]);
    }
}
