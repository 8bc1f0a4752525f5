//! Exhaustive structural checks on a built spread.
//!
//! Each check enumerates every case it covers and reports the first
//! counterexample it meets. Nothing here is needed to build a schedule; it
//! is the evidence that the schedule's counting assumptions hold.

use std::collections::HashSet;

use crate::par;
use crate::partition::SpreadPartition;
use crate::projective::{hyperplanes_through_flat, phi, Flat, ProjectiveSpace};
use crate::report::{Check, Report};

pub type LemmaReport = Report;

fn collect(name: &'static str, outcomes: Vec<Result<(), String>>) -> Check {
    Check::from_outcomes(name, outcomes)
}

pub fn verify_spread_lemmas(space: &ProjectiveSpace, spread: &SpreadPartition) -> LemmaReport {
    let checks = vec![
        disjoint_cover(space, spread),
        closure(space, spread),
        off_block_incidence(space, spread),
        inside_or_disjoint(spread),
        pair_spans(space, spread),
        carrier_intersections(space, spread),
        hyperplane_group_sizes(spread),
        blocks_per_carrier(spread),
        degree_identity(space, spread),
        shift_equivariance(space, spread),
    ];
    LemmaReport { checks }
}

fn disjoint_cover(space: &ProjectiveSpace, spread: &SpreadPartition) -> Check {
    let mut outcomes = Vec::new();
    let mut owner = vec![None; space.n_points()];
    for (i, b) in spread.blocks.iter().enumerate() {
        for &x in &b.points {
            outcomes.push(match owner[x].replace(i) {
                Some(j) => Err(format!("point {x} in blocks {j} and {i}")),
                None => Ok(()),
            });
        }
    }
    for (x, o) in owner.iter().enumerate() {
        if o.is_none() {
            outcomes.push(Err(format!("point {x} in no block")));
        }
    }
    let mut seen = vec![0usize; space.n_hyperplanes()];
    for g in &spread.hyperplanes.groups {
        for &h in g {
            seen[h] += 1;
        }
    }
    for (h, &c) in seen.iter().enumerate() {
        outcomes.push(if c == 1 {
            Ok(())
        } else {
            Err(format!("hyperplane {h} lies in {c} groups"))
        });
    }
    collect("disjoint-cover", outcomes)
}

fn closure(space: &ProjectiveSpace, spread: &SpreadPartition) -> Check {
    let flats: Vec<(&str, usize, &Flat)> = spread
        .blocks
        .iter()
        .enumerate()
        .map(|(i, f)| ("block", i, f))
        .chain(
            spread
                .carriers
                .iter()
                .enumerate()
                .map(|(i, f)| ("carrier", i, f)),
        )
        .collect();
    let outcomes = par::map_slice(&flats, |(kind, i, f)| {
        if space.span(&f.points) == **f {
            Ok(())
        } else {
            Err(format!("{kind} {i} is not closed under span"))
        }
    });
    collect("span-closure", outcomes)
}

/// A point outside block `S` meets exactly as many hyperplanes through `S`
/// as there are hyperplanes through a (k+1)-flat.
fn off_block_incidence(space: &ProjectiveSpace, spread: &SpreadPartition) -> Check {
    let fp = spread.params;
    let through_block = hyperplanes_through_flat(fp.m, fp.k, fp.q).unwrap_or(0) as usize;
    let expected = hyperplanes_through_flat(fp.m, fp.k + 1, fp.q).unwrap_or(0) as usize;
    let per_block = par::map_range(0..spread.blocks.len(), |i| {
        let block = &spread.blocks[i];
        let hs = space.hyperplanes_containing(&block.points);
        let mut out = Vec::new();
        if hs.len() != through_block {
            out.push(Err(format!(
                "block {i} lies in {} hyperplanes, expected {through_block}",
                hs.len()
            )));
        }
        for x in (0..space.n_points()).filter(|&x| !block.contains(x)) {
            let c = hs.iter().filter(|&&h| space.incident(x, h)).count();
            out.push(if c == expected {
                Ok(())
            } else {
                Err(format!(
                    "point {x} meets {c} hyperplanes through block {i}, expected {expected}"
                ))
            });
        }
        out
    });
    collect(
        "off-block-incidence",
        per_block.into_iter().flatten().collect(),
    )
}

fn inside_or_disjoint(spread: &SpreadPartition) -> Check {
    let per_block = par::map_slice(&spread.blocks, |b| {
        spread
            .carriers
            .iter()
            .enumerate()
            .map(|(j, t)| {
                if b.is_subset_of(t) || b.is_disjoint_from(t) {
                    Ok(())
                } else {
                    Err(format!(
                        "block {} meets carrier {j} in {} of {} points",
                        spread.block_of(b.points[0]),
                        b.intersection(t).len(),
                        b.len()
                    ))
                }
            })
            .collect::<Vec<_>>()
    });
    collect(
        "inside-or-disjoint",
        per_block.into_iter().flatten().collect(),
    )
}

/// Spans of a fixed block with each other block: all of dimension 2k+1, and
/// exactly `(Q^{t-1}-1)/(Q-1)` distinct ones with `Q = q^{k+1}`.
fn pair_spans(space: &ProjectiveSpace, spread: &SpreadPartition) -> Check {
    let fp = spread.params;
    let big_q = (fp.q as u128).pow(fp.k + 1);
    let expected = ((big_q.pow(fp.t - 1) - 1) / (big_q - 1)) as usize;
    let b = spread.blocks.len();
    let outcomes = par::map_range(0..b, |i| {
        let mut distinct = HashSet::new();
        for j in (0..b).filter(|&j| j != i) {
            let mut pts = spread.blocks[i].points.clone();
            pts.extend(&spread.blocks[j].points);
            let f = space.span(&pts);
            if f.dim != 2 * fp.k as usize + 1 {
                return Err(format!(
                    "span of blocks {i} and {j} has dimension {}",
                    f.dim
                ));
            }
            distinct.insert(f.points);
        }
        if distinct.len() == expected {
            Ok(())
        } else {
            Err(format!(
                "block {i} spans {} distinct flats with the others, expected {expected}",
                distinct.len()
            ))
        }
    });
    collect("pair-spans", outcomes)
}

/// Distinct carriers meet in a flat of vector dimension `(t-2)(k+1)` and
/// share no hyperplane.
fn carrier_intersections(space: &ProjectiveSpace, spread: &SpreadPartition) -> Check {
    let fp = spread.params;
    let q = fp.q as u128;
    let vdim = (fp.t - 2) * (fp.k + 1);
    let expected = ((q.pow(vdim) - 1) / (q - 1)) as usize;
    let c = spread.carriers.len();
    let per_carrier = par::map_range(0..c, |i| {
        let mut out = Vec::new();
        for j in i + 1..c {
            let (a, b) = (&spread.carriers[i], &spread.carriers[j]);
            let common = a.intersection(b);
            if common.len() != expected {
                out.push(Err(format!(
                    "carriers {i} and {j} share {} points, expected {expected}",
                    common.len()
                )));
                continue;
            }
            if !common.is_empty() && space.span(&common).points != common {
                out.push(Err(format!("carriers {i} and {j} meet in a non-flat")));
                continue;
            }
            let shared = spread.hyperplanes.groups[i]
                .iter()
                .find(|h| spread.hyperplanes.groups[j].contains(h));
            out.push(match shared {
                Some(h) => Err(format!("carriers {i} and {j} share hyperplane {h}")),
                None => Ok(()),
            });
        }
        out
    });
    collect(
        "carrier-intersections",
        per_carrier.into_iter().flatten().collect(),
    )
}

fn hyperplane_group_sizes(spread: &SpreadPartition) -> Check {
    let n = spread.params.points_per_block;
    let outcomes = spread
        .hyperplanes
        .groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            if g.len() == n {
                Ok(())
            } else {
                Err(format!(
                    "group {i} has {} hyperplanes, expected {n}",
                    g.len()
                ))
            }
        })
        .collect();
    collect("group-size-equals-block-size", outcomes)
}

/// Every block lies in exactly `(q^{(k+1)(t-1)}-1)/(q^{k+1}-1)` carriers.
fn blocks_per_carrier(spread: &SpreadPartition) -> Check {
    let expected = spread.params.carriers_per_block;
    let outcomes = par::map_slice(&spread.blocks, |b| {
        let c = spread.carriers.iter().filter(|t| b.is_subset_of(t)).count();
        if c == expected {
            Ok(())
        } else {
            Err(format!(
                "block {} lies in {c} carriers, expected {expected}",
                spread.block_of(b.points[0])
            ))
        }
    });
    collect("carriers-per-block", outcomes)
}

/// hyperplanes through S + (hyperplanes through an (m-k)-flat)·(B - carriers
/// per block) equals the point degree, both as formulas and as enumerated.
fn degree_identity(space: &ProjectiveSpace, spread: &SpreadPartition) -> Check {
    let fp = spread.params;
    let lhs = (|| -> crate::Result<u64> {
        let local = hyperplanes_through_flat(fp.m, fp.k, fp.q)?;
        let remote = hyperplanes_through_flat(fp.m, fp.m - fp.k, fp.q)?;
        Ok(local + remote * (fp.blocks - fp.carriers_per_block) as u64)
    })();
    let rhs = phi(fp.m as i64 - 1, fp.m as i64 - 2, fp.q);
    let mut outcomes = vec![match (lhs, rhs) {
        (Ok(l), Ok(r)) if l == r => Ok(()),
        (l, r) => Err(format!("identity gives {l:?} vs degree {r:?}")),
    }];
    let profile = spread.degree_profile(space);
    outcomes.push(
        if profile.is_uniform() && profile.total() == space.degree() {
            Ok(())
        } else {
            Err(format!(
                "enumerated profile sums to {} (uniform: {}), degree {}",
                profile.total(),
                profile.is_uniform(),
                space.degree()
            ))
        },
    );
    collect("degree-identity", outcomes)
}

fn shift_equivariance(space: &ProjectiveSpace, spread: &SpreadPartition) -> Check {
    let b = spread.blocks.len();
    let outcomes = (0..b)
        .map(|i| {
            if space.shift(&spread.blocks[i], 1).points == spread.blocks[(i + 1) % b].points {
                Ok(())
            } else {
                Err(format!(
                    "alpha does not map block {i} onto block {}",
                    (i + 1) % b
                ))
            }
        })
        .collect();
    collect("block-shift-equivariance", outcomes)
}
