//! Coset-decomposition spreads and their dual carriers.
//!
//! With `m+1 = (k+1)·t`, GF(q^{k+1}) sits inside GF(q^{m+1}) and the cosets of
//! its multiplicative group split the points into `B` disjoint k-flats
//! (blocks). Each block is paired with a carrier flat `T_i ⊇ S_i`; the
//! hyperplanes containing `T_i` form hyperplane group `i`.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galois;
use crate::par;
use crate::projective::{Flat, ProjectiveSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldCase {
    /// `t = 2`: blocks are their own carriers.
    Odd,
    /// `t ≥ 3`: carriers are spans of `t-1` blocks.
    EvenFactorable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoldParams {
    pub m: u32,
    pub q: u64,
    /// Projective dimension of each block.
    pub k: u32,
    /// Cofactor `(m+1)/(k+1)`.
    pub t: u32,
    pub case: FoldCase,
    /// Number of blocks, `(q^{m+1}-1)/(q^{k+1}-1)`; also the coset stride β.
    pub blocks: usize,
    pub points_per_block: usize,
    /// How many carriers contain any one block.
    pub carriers_per_block: usize,
}

impl FoldParams {
    pub fn new(m: u32, q: u64, k: u32) -> Result<Self> {
        galois::prime_power(q)?;
        let (total, block) = (m + 1, k + 1);
        if total % block != 0 {
            return Err(Error::BlockDimension { k, block, total });
        }
        let t = total / block;
        if t < 2 {
            return Err(Error::Cofactor {
                t,
                reason: "need at least two blocks per carrier span",
            });
        }
        let pow = |e: u32| -> Result<u128> {
            (q as u128)
                .checked_pow(e)
                .ok_or(Error::Overflow("fold parameters"))
        };
        let group = pow(total)? - 1;
        let sub = pow(block)? - 1;
        let blocks = galois::subgroup_stride(
            u64::try_from(group).map_err(|_| Error::Overflow("fold parameters"))?,
            sub as u64,
        )? as usize;
        let points_per_block = (sub / (q as u128 - 1)) as usize;
        let carriers_per_block = ((pow(block * (t - 1))? - 1) / sub) as usize;
        Ok(Self {
            m,
            q,
            k,
            t,
            case: if t == 2 {
                FoldCase::Odd
            } else {
                FoldCase::EvenFactorable
            },
            blocks,
            points_per_block,
            carriers_per_block,
        })
    }

    /// Coset stride β in the exponent group.
    pub fn stride(&self) -> usize {
        self.blocks
    }

    /// Number of points in the whole space.
    pub fn n_points(&self) -> usize {
        self.blocks * self.points_per_block
    }

    fn check_space(&self, space: &ProjectiveSpace) -> Result<()> {
        let sp = space.params();
        if sp.m != self.m || sp.q != self.q {
            return Err(Error::Inconsistent(format!(
                "fold parameters for P({}, GF({})) applied to P({}, GF({}))",
                self.m, self.q, sp.m, sp.q
            )));
        }
        if self.n_points() != space.n_points() {
            return Err(Error::Inconsistent(format!(
                "{} blocks of {} points do not cover {} points",
                self.blocks,
                self.points_per_block,
                space.n_points()
            )));
        }
        Ok(())
    }
}

/// Block `i` consists of the exponents `i + jβ` (mod `q^{m+1}-1`), reduced
/// to point indices; every block is checked to be a k-flat.
pub fn coset_point_partition(space: &ProjectiveSpace, k: u32) -> Result<Vec<Flat>> {
    let sp = space.params();
    let params = FoldParams::new(sp.m, sp.q, k)?;
    params.check_space(space)?;
    let group = space.field().group_order() as usize;
    let beta = params.stride();
    let coset_len = group / beta;

    let blocks = par::map_range(0..params.blocks, |i| -> Result<Flat> {
        let mut points: Vec<usize> = (0..coset_len)
            .map(|j| space.point_of_exponent(((i + j * beta) % group) as i64))
            .collect();
        points.sort_unstable();
        points.dedup();
        if points.len() != params.points_per_block {
            return Err(Error::Inconsistent(format!(
                "block {i} has {} points, expected {}",
                points.len(),
                params.points_per_block
            )));
        }
        let flat = space.span(&points);
        if flat.points != points || flat.dim != k as usize {
            return Err(Error::Inconsistent(format!(
                "block {i} is not a {k}-flat (its span has dimension {} and {} points)",
                flat.dim,
                flat.len()
            )));
        }
        Ok(flat)
    });
    blocks.into_iter().collect()
}

/// Partition of hyperplane indices into carrier groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperplanePartition {
    pub groups: Vec<Vec<usize>>,
    pub group_of: Vec<usize>,
}

impl HyperplanePartition {
    fn from_carriers(space: &ProjectiveSpace, carriers: &[Flat]) -> Result<Self> {
        let groups = par::map_slice(carriers, |t| space.hyperplanes_containing(&t.points));
        let mut group_of = vec![usize::MAX; space.n_hyperplanes()];
        for (i, g) in groups.iter().enumerate() {
            for &h in g {
                if group_of[h] != usize::MAX {
                    return Err(Error::Inconsistent(format!(
                        "hyperplane {h} contains carriers {} and {i}",
                        group_of[h]
                    )));
                }
                group_of[h] = i;
            }
        }
        if let Some(h) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(Error::Inconsistent(format!(
                "hyperplane {h} contains no carrier"
            )));
        }
        Ok(Self { groups, group_of })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarrierAssignment {
    /// Blocks are their own carriers.
    Identity,
    /// `T_i = α^i · T_0`.
    Equivariant,
    /// Bipartite matching over all distinct carriers.
    Matching,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CarrierStrategy {
    /// Equivariant orbit, falling back to matching if the orbit is short.
    #[default]
    Auto,
    /// Always use matching.
    Matching,
}

#[derive(Debug, Clone)]
pub struct Carriers {
    pub carriers: Vec<Flat>,
    pub hyperplanes: HyperplanePartition,
    pub assignment: CarrierAssignment,
}

fn block_params(space: &ProjectiveSpace, blocks: &[Flat]) -> Result<FoldParams> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::Inconsistent("empty block list".into()))?;
    let sp = space.params();
    let params = FoldParams::new(sp.m, sp.q, first.dim as u32)?;
    if blocks.len() != params.blocks {
        return Err(Error::Inconsistent(format!(
            "{} blocks given, expected {}",
            blocks.len(),
            params.blocks
        )));
    }
    Ok(params)
}

/// Odd case: each block carries itself.
pub fn build_carriers_odd(space: &ProjectiveSpace, blocks: &[Flat]) -> Result<Carriers> {
    let params = block_params(space, blocks)?;
    if params.t != 2 {
        return Err(Error::Cofactor {
            t: params.t,
            reason: "blocks carry themselves only when t = 2",
        });
    }
    let carriers = blocks.to_vec();
    let hyperplanes = HyperplanePartition::from_carriers(space, &carriers)?;
    Ok(Carriers {
        carriers,
        hyperplanes,
        assignment: CarrierAssignment::Identity,
    })
}

/// Even-but-factorable case, `t ≥ 3`.
pub fn build_carriers_even(space: &ProjectiveSpace, blocks: &[Flat]) -> Result<Carriers> {
    build_carriers_even_with(space, blocks, CarrierStrategy::Auto)
}

pub fn build_carriers_even_with(
    space: &ProjectiveSpace,
    blocks: &[Flat],
    strategy: CarrierStrategy,
) -> Result<Carriers> {
    let params = block_params(space, blocks)?;
    if params.t < 3 {
        return Err(Error::Cofactor {
            t: params.t,
            reason: "carrier spans need t >= 3",
        });
    }
    let target_dim = (params.m - params.k - 1) as usize;

    let (carriers, assignment) = match strategy {
        CarrierStrategy::Auto => match equivariant_carriers(space, blocks, params.t) {
            Some(c) => (c, CarrierAssignment::Equivariant),
            None => (
                matched_carriers(space, blocks, params.t)?,
                CarrierAssignment::Matching,
            ),
        },
        CarrierStrategy::Matching => (
            matched_carriers(space, blocks, params.t)?,
            CarrierAssignment::Matching,
        ),
    };

    for (i, (s, t)) in blocks.iter().zip(&carriers).enumerate() {
        if t.dim != target_dim || !s.is_subset_of(t) {
            return Err(Error::Inconsistent(format!(
                "carrier {i} has dimension {} (expected {target_dim}) or misses its block",
                t.dim
            )));
        }
    }
    let hyperplanes = HyperplanePartition::from_carriers(space, &carriers)?;
    Ok(Carriers {
        carriers,
        hyperplanes,
        assignment,
    })
}

/// `T_0` spans `S_0` and the first `t-2` later blocks not already inside the
/// growing span; `T_i` is its shift by `α^i`. `None` if the orbit repeats.
fn equivariant_carriers(space: &ProjectiveSpace, blocks: &[Flat], t: u32) -> Option<Vec<Flat>> {
    let mut span = blocks[0].clone();
    let mut used = 1;
    for block in &blocks[1..] {
        if used == t - 1 {
            break;
        }
        if block.is_subset_of(&span) {
            continue;
        }
        let mut pts = span.points.clone();
        pts.extend(&block.points);
        span = space.span(&pts);
        used += 1;
    }
    let orbit: Vec<Flat> = (0..blocks.len()).map(|i| space.shift(&span, i)).collect();
    let distinct: HashSet<&Vec<usize>> = orbit.iter().map(|f| &f.points).collect();
    (distinct.len() == blocks.len()).then_some(orbit)
}

/// Every distinct span of `t-1` independent blocks, sorted by point set.
pub fn enumerate_carriers(space: &ProjectiveSpace, blocks: &[Flat], t: u32) -> Vec<Flat> {
    fn grow(
        space: &ProjectiveSpace,
        blocks: &[Flat],
        span: &Flat,
        next: usize,
        remaining: u32,
        out: &mut BTreeSet<Vec<usize>>,
    ) {
        if remaining == 0 {
            out.insert(span.points.clone());
            return;
        }
        for j in next..blocks.len() {
            if blocks[j].is_subset_of(span) {
                continue;
            }
            let mut pts = span.points.clone();
            pts.extend(&blocks[j].points);
            let wider = space.span(&pts);
            grow(space, blocks, &wider, j + 1, remaining - 1, out);
        }
    }

    let mut found = BTreeSet::new();
    for (i, b) in blocks.iter().enumerate() {
        grow(space, blocks, b, i + 1, t - 2, &mut found);
    }
    found.into_iter().map(|pts| space.span(&pts)).collect()
}

fn matched_carriers(space: &ProjectiveSpace, blocks: &[Flat], t: u32) -> Result<Vec<Flat>> {
    let all = enumerate_carriers(space, blocks, t);
    let candidates: Vec<Vec<usize>> = blocks
        .iter()
        .map(|s| {
            all.iter()
                .enumerate()
                .filter(|(_, c)| s.is_subset_of(c))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();

    // Kuhn's augmenting paths, blocks and candidates in index order.
    fn augment(
        block: usize,
        candidates: &[Vec<usize>],
        owner: &mut [Option<usize>],
        seen: &mut [bool],
    ) -> bool {
        for &c in &candidates[block] {
            if seen[c] {
                continue;
            }
            seen[c] = true;
            if owner[c].is_none_or(|other| augment(other, candidates, owner, seen)) {
                owner[c] = Some(block);
                return true;
            }
        }
        false
    }

    let mut owner: Vec<Option<usize>> = vec![None; all.len()];
    for block in 0..blocks.len() {
        let mut seen = vec![false; all.len()];
        if !augment(block, &candidates, &mut owner, &mut seen) {
            return Err(Error::Inconsistent(format!(
                "no carrier matching for block {block}: {} distinct carriers, {} candidates",
                all.len(),
                candidates[block].len()
            )));
        }
    }
    let mut assigned: Vec<Option<Flat>> = vec![None; blocks.len()];
    for (c, o) in owner.iter().enumerate() {
        if let Some(b) = o {
            assigned[*b] = Some(all[c].clone());
        }
    }
    Ok(assigned.into_iter().map(|f| f.expect("matched")).collect())
}

/// Per-round counts: `rounds[j]` is the number of hyperplanes of group
/// `(i+j) mod B` incident to a point of block `i`, maximized over all points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeProfile {
    pub rounds: Vec<usize>,
    pub deviations: Vec<ProfileDeviation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProfileDeviation {
    pub block: usize,
    pub point: usize,
    pub round: usize,
    pub count: usize,
}

impl DegreeProfile {
    pub fn is_uniform(&self) -> bool {
        self.deviations.is_empty()
    }

    pub fn total(&self) -> usize {
        self.rounds.iter().sum()
    }
}

pub fn degree_profile(
    space: &ProjectiveSpace,
    blocks: &[Flat],
    hyperplanes: &HyperplanePartition,
) -> DegreeProfile {
    let b = blocks.len();
    // counts[i][r][j]
    let counts: Vec<Vec<Vec<usize>>> = par::map_range(0..b, |i| {
        blocks[i]
            .points
            .iter()
            .map(|&x| {
                (0..b)
                    .map(|j| {
                        hyperplanes.groups[(i + j) % b]
                            .iter()
                            .filter(|&&h| space.incident(x, h))
                            .count()
                    })
                    .collect()
            })
            .collect()
    });
    let mut rounds = vec![0usize; b];
    for per_block in &counts {
        for per_point in per_block {
            for (j, &c) in per_point.iter().enumerate() {
                rounds[j] = rounds[j].max(c);
            }
        }
    }
    let mut deviations = Vec::new();
    for (i, per_block) in counts.iter().enumerate() {
        for (r, per_point) in per_block.iter().enumerate() {
            for (j, &c) in per_point.iter().enumerate() {
                if c != rounds[j] {
                    deviations.push(ProfileDeviation {
                        block: i,
                        point: blocks[i].points[r],
                        round: j,
                        count: c,
                    });
                }
            }
        }
    }
    DegreeProfile { rounds, deviations }
}

/// The full spread: blocks, carriers, hyperplane groups.
#[derive(Debug, Clone)]
pub struct SpreadPartition {
    pub params: FoldParams,
    pub blocks: Vec<Flat>,
    pub carriers: Vec<Flat>,
    pub hyperplanes: HyperplanePartition,
    pub assignment: CarrierAssignment,
}

pub fn spread_partition(
    space: &ProjectiveSpace,
    k: u32,
    strategy: CarrierStrategy,
) -> Result<SpreadPartition> {
    let blocks = coset_point_partition(space, k)?;
    let params = block_params(space, &blocks)?;
    let carriers = match params.case {
        FoldCase::Odd => build_carriers_odd(space, &blocks)?,
        FoldCase::EvenFactorable => build_carriers_even_with(space, &blocks, strategy)?,
    };
    for (i, g) in carriers.hyperplanes.groups.iter().enumerate() {
        if g.len() != params.points_per_block {
            return Err(Error::Inconsistent(format!(
                "hyperplane group {i} has {} members, expected {}",
                g.len(),
                params.points_per_block
            )));
        }
    }
    Ok(SpreadPartition {
        params,
        blocks,
        carriers: carriers.carriers,
        hyperplanes: carriers.hyperplanes,
        assignment: carriers.assignment,
    })
}

impl SpreadPartition {
    pub fn degree_profile(&self, space: &ProjectiveSpace) -> DegreeProfile {
        degree_profile(space, &self.blocks, &self.hyperplanes)
    }

    /// Block index owning `point`.
    pub fn block_of(&self, point: usize) -> usize {
        point % self.params.blocks
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projective::{build_space, ProjParams};

    fn space(m: u32, q: u64) -> ProjectiveSpace {
        build_space(ProjParams::new(m, q)).unwrap()
    }

    /// Brute-force hyperplane grouping: all hyperplanes containing every
    /// point of the carrier, straight from the incidence predicate.
    fn brute_groups(s: &ProjectiveSpace, carriers: &[Flat]) -> Vec<Vec<usize>> {
        carriers
            .iter()
            .map(|t| {
                (0..s.n_hyperplanes())
                    .filter(|&h| t.points.iter().all(|&x| s.incident(x, h)))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn fold_params() {
        let p = FoldParams::new(5, 2, 2).unwrap();
        assert_eq!(
            (p.t, p.blocks, p.points_per_block, p.case),
            (2, 9, 7, FoldCase::Odd)
        );
        let p = FoldParams::new(5, 2, 1).unwrap();
        assert_eq!(
            (p.t, p.blocks, p.points_per_block, p.carriers_per_block),
            (3, 21, 3, 5)
        );
        let p = FoldParams::new(8, 2, 2).unwrap();
        assert_eq!((p.blocks, p.carriers_per_block), (73, 9));
        assert_eq!(
            FoldParams::new(5, 2, 3).unwrap_err(),
            Error::BlockDimension {
                k: 3,
                block: 4,
                total: 6
            }
        );
        assert!(matches!(
            FoldParams::new(5, 2, 5),
            Err(Error::Cofactor { t: 1, .. })
        ));
    }

    #[test]
    fn p5_plane_blocks() {
        let s = space(5, 2);
        let blocks = coset_point_partition(&s, 2).unwrap();
        assert_eq!(blocks.len(), 9);
        assert_eq!(blocks[0].points, vec![0, 9, 18, 27, 36, 45, 54]);
        assert!(blocks.iter().all(|b| b.len() == 7 && b.dim == 2));
    }

    #[test]
    fn p5_line_blocks() {
        let s = space(5, 2);
        let blocks = coset_point_partition(&s, 1).unwrap();
        assert_eq!(blocks.len(), 21);
        for (i, b) in blocks.iter().enumerate() {
            assert_eq!(b.points, vec![i, i + 21, i + 42]);
        }
    }

    #[test]
    fn p1_singletons() {
        let s = space(1, 2);
        let blocks = coset_point_partition(&s, 0).unwrap();
        assert_eq!(
            blocks.iter().map(|b| b.points.clone()).collect::<Vec<_>>(),
            vec![vec![0], vec![1], vec![2]]
        );
        let c = build_carriers_odd(&s, &blocks).unwrap();
        assert!(c.hyperplanes.groups.iter().all(|g| g.len() == 1));
    }

    #[test]
    fn non_divisible_block_dim() {
        let s = space(5, 2);
        assert!(matches!(
            coset_point_partition(&s, 3),
            Err(Error::BlockDimension { .. })
        ));
    }

    #[test]
    fn odd_carriers() {
        for (m, q, k, groups, size) in [(5u32, 2u64, 2u32, 9usize, 7usize), (3, 2, 1, 5, 3)] {
            let s = space(m, q);
            let blocks = coset_point_partition(&s, k).unwrap();
            let c = build_carriers_odd(&s, &blocks).unwrap();
            assert_eq!(c.hyperplanes.groups.len(), groups);
            assert!(c.hyperplanes.groups.iter().all(|g| g.len() == size));
            assert_eq!(c.hyperplanes.groups, brute_groups(&s, &c.carriers));
        }
        let s = space(5, 2);
        let lines = coset_point_partition(&s, 1).unwrap();
        assert!(matches!(
            build_carriers_odd(&s, &lines),
            Err(Error::Cofactor { t: 3, .. })
        ));
        let planes = coset_point_partition(&s, 2).unwrap();
        assert!(matches!(
            build_carriers_even(&s, &planes),
            Err(Error::Cofactor { t: 2, .. })
        ));
    }

    #[test]
    fn even_carriers_p5_lines() {
        let s = space(5, 2);
        let blocks = coset_point_partition(&s, 1).unwrap();
        let c = build_carriers_even(&s, &blocks).unwrap();
        assert_eq!(c.assignment, CarrierAssignment::Equivariant);
        assert_eq!(c.carriers.len(), 21);
        for t in &c.carriers {
            assert_eq!(t.dim, 3);
            assert_eq!(blocks.iter().filter(|b| b.is_subset_of(t)).count(), 5);
        }
        for b in &blocks {
            assert_eq!(c.carriers.iter().filter(|t| b.is_subset_of(t)).count(), 5);
        }
        assert!(c.hyperplanes.groups.iter().all(|g| g.len() == 3));
        assert_eq!(c.hyperplanes.groups, brute_groups(&s, &c.carriers));
    }

    #[test]
    fn even_carriers_p8_planes() {
        let s = space(8, 2);
        let blocks = coset_point_partition(&s, 2).unwrap();
        let c = build_carriers_even(&s, &blocks).unwrap();
        assert_eq!(c.carriers.len(), 73);
        for t in &c.carriers {
            assert_eq!(blocks.iter().filter(|b| b.is_subset_of(t)).count(), 9);
        }
        for b in &blocks {
            assert_eq!(c.carriers.iter().filter(|t| b.is_subset_of(t)).count(), 9);
        }
        assert!(c.hyperplanes.groups.iter().all(|g| g.len() == 7));
        assert_eq!(c.hyperplanes.groups, brute_groups(&s, &c.carriers));
    }

    #[test]
    fn matching_fallback_is_a_valid_bijection() {
        let s = space(5, 2);
        let blocks = coset_point_partition(&s, 1).unwrap();
        assert_eq!(enumerate_carriers(&s, &blocks, 3).len(), 21);
        let c = build_carriers_even_with(&s, &blocks, CarrierStrategy::Matching).unwrap();
        assert_eq!(c.assignment, CarrierAssignment::Matching);
        let distinct: HashSet<_> = c.carriers.iter().map(|t| t.points.clone()).collect();
        assert_eq!(distinct.len(), 21);
        for (b, t) in blocks.iter().zip(&c.carriers) {
            assert!(b.is_subset_of(t));
        }
    }

    #[test]
    fn degree_profiles() {
        let s = space(5, 2);
        let p = spread_partition(&s, 2, CarrierStrategy::Auto).unwrap();
        let d = p.degree_profile(&s);
        assert!(d.is_uniform());
        assert_eq!(d.rounds, vec![7, 3, 3, 3, 3, 3, 3, 3, 3]);

        let p = spread_partition(&s, 1, CarrierStrategy::Auto).unwrap();
        let d = p.degree_profile(&s);
        assert!(d.is_uniform());
        assert_eq!(d.rounds[0], 3);
        assert_eq!(d.rounds[1..].iter().filter(|&&c| c == 3).count(), 4);
        assert_eq!(d.rounds[1..].iter().filter(|&&c| c == 1).count(), 16);
        assert_eq!(d.total(), 31);
    }

    #[test]
    fn degree_profile_ternary() {
        let s = space(3, 3);
        let p = spread_partition(&s, 1, CarrierStrategy::Auto).unwrap();
        let d = p.degree_profile(&s);
        assert!(d.is_uniform());
        assert_eq!(d.rounds, vec![4, 1, 1, 1, 1, 1, 1, 1, 1, 1]);

        // Brute force: every point of block 0 against every hyperplane group.
        for &x in &p.blocks[0].points {
            let mut per_group = vec![0usize; 10];
            for h in 0..s.n_hyperplanes() {
                if s.incident(x, h) {
                    per_group[p.hyperplanes.group_of[h]] += 1;
                }
            }
            assert_eq!(per_group, d.rounds);
        }
    }

    #[test]
    fn block_shift_equivariance() {
        for (m, q, k) in [(5u32, 2u64, 1u32), (5, 2, 2), (3, 3, 1)] {
            let s = space(m, q);
            let p = spread_partition(&s, k, CarrierStrategy::Auto).unwrap();
            let b = p.blocks.len();
            for i in 0..b {
                assert_eq!(
                    s.shift(&p.blocks[i], 1).points,
                    p.blocks[(i + 1) % b].points
                );
                assert_eq!(p.block_of(p.blocks[i].points[0]), i);
            }
        }
    }
}
