//! Cross-checks against oracles that share no code with the library: field
//! elements as plain polynomial coefficient vectors, traces as matrix traces,
//! and a vertex-by-vertex evaluation straight from the incidence predicate.

use pgfold::folding::fold_plan;
use pgfold::galois::default_primitive_poly;
use pgfold::projective::{build_space, phi, ProjParams, ProjectiveSpace};
use pgfold::simulator::{
    run_folded, EdgeState, Kernel, SimOptions, SumKernel, UpdateRule, XorKernel,
};

/// `a·b mod poly` over GF(p); coefficient vectors constant-first, `poly`
/// leading-first and monic.
fn mulmod(a: &[u64], b: &[u64], poly: &[u32], p: u64) -> Vec<u64> {
    let e = poly.len() - 1;
    let mut prod = vec![0u64; a.len() + b.len()];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + x * y) % p;
        }
    }
    for d in (e..prod.len()).rev() {
        let c = prod[d];
        if c == 0 {
            continue;
        }
        // x^e = -(lower terms of poly)
        for t in 1..=e {
            let coeff = poly[t] as u64;
            prod[d - t] = (prod[d - t] + (p - coeff % p) * c) % p;
        }
        prod[d] = 0;
    }
    prod.truncate(e);
    prod
}

/// `α^i` as coefficients, by repeated multiplication by `x`.
fn powers(poly: &[u32], p: u64) -> Vec<Vec<u64>> {
    let e = poly.len() - 1;
    let order = p.pow(e as u32) - 1;
    let mut x = vec![0u64; e];
    if e > 1 {
        x[1] = 1;
    } else {
        x[0] = (p - poly[1] as u64 % p) % p;
    }
    let mut cur = vec![0u64; e];
    cur[0] = 1;
    (0..order)
        .map(|_| {
            let out = cur.clone();
            cur = mulmod(&cur, &x, poly, p);
            out
        })
        .collect()
}

/// Absolute trace: trace of the multiplication-by-`y` matrix.
fn matrix_trace(y: &[u64], poly: &[u32], p: u64) -> u64 {
    let e = y.len();
    (0..e)
        .map(|i| {
            let mut basis = vec![0u64; e];
            basis[i] = 1;
            mulmod(y, &basis, poly, p)[i]
        })
        .sum::<u64>()
        % p
}

fn oracle_incidence(m: u32, q: u64) -> (ProjectiveSpace, Vec<Vec<bool>>) {
    let space = build_space(ProjParams::new(m, q)).unwrap();
    let poly = space.field().spec().poly.clone();
    let pw = powers(&poly, q);
    let n = space.n_points();
    let zero: Vec<bool> = (0..n)
        .map(|j| matrix_trace(&pw[j], &poly, q) == 0)
        .collect();
    let inc = (0..n)
        .map(|x| (0..n).map(|h| zero[(x + h) % n]).collect())
        .collect();
    (space, inc)
}

#[test]
fn trace_incidence_matches_matrix_oracle() {
    for (m, q) in [(2, 2), (3, 2), (5, 2), (2, 3), (3, 3)] {
        let (space, inc) = oracle_incidence(m, q);
        for (x, row) in inc.iter().enumerate() {
            for (h, &want) in row.iter().enumerate() {
                assert_eq!(
                    space.incident(x, h),
                    want,
                    "P({m},{q}) point {x} hyperplane {h}"
                );
            }
        }
    }
}

#[test]
fn oracle_field_agrees_on_default_polynomials() {
    assert_eq!(default_primitive_poly(2, 3).unwrap(), vec![1, 0, 1, 1]);
    assert_eq!(default_primitive_poly(3, 2).unwrap(), vec![1, 1, 2]);
    assert_eq!(
        default_primitive_poly(2, 6).unwrap(),
        vec![1, 0, 0, 0, 0, 1, 1]
    );
    // The oracle's powers of x really are all distinct for these.
    for (p, e) in [(2u64, 3u32), (3, 2), (2, 6), (3, 4)] {
        let poly = default_primitive_poly(p, e).unwrap();
        let mut pw = powers(&poly, p);
        pw.sort();
        pw.dedup();
        assert_eq!(pw.len() as u64, p.pow(e) - 1);
    }
}

#[test]
fn design_counts_from_the_oracle() {
    for (m, q) in [(3u32, 2u64), (5, 2), (3, 3)] {
        let (_, inc) = oracle_incidence(m, q);
        let n = inc.len();
        let per_point = phi(m as i64 - 1, 0, q).unwrap() as usize;
        let per_pair = phi(m as i64 - 2, 0, q).unwrap() as usize;
        for row in &inc {
            assert_eq!(row.iter().filter(|&&b| b).count(), per_point);
        }
        for x in 0..n {
            for y in x + 1..n {
                let both = (0..n).filter(|&h| inc[x][h] && inc[y][h]).count();
                assert_eq!(both, per_pair, "P({m},{q}) points {x}, {y}");
            }
        }
    }
}

/// One iteration evaluated vertex by vertex from the predicate, with edges
/// keyed by (point, hyperplane).
fn oracle_iterations<K: Kernel>(
    space: &ProjectiveSpace,
    kernel: &K,
    mut value: std::collections::BTreeMap<(usize, usize), K::Word>,
    iters: usize,
) -> std::collections::BTreeMap<(usize, usize), K::Word> {
    let n = space.n_points();
    for _ in 0..iters {
        for x in 0..n {
            let hs: Vec<usize> = (0..n).filter(|&h| space.incident(x, h)).collect();
            let r = kernel.reduce_all(hs.iter().map(|&h| &value[&(x, h)]));
            for h in hs {
                let v = kernel.update(&r, &value[&(x, h)]);
                value.insert((x, h), v);
            }
        }
        for h in 0..n {
            let ps: Vec<usize> = (0..n).filter(|&x| space.incident(x, h)).collect();
            let r = kernel.reduce_all(ps.iter().map(|&x| &value[&(x, h)]));
            for x in ps {
                let v = kernel.update(&r, &value[&(x, h)]);
                value.insert((x, h), v);
            }
        }
    }
    value
}

fn folded_matches_oracle<K: Kernel>(m: u32, q: u64, k: u32, kernel: &K, seed: u64, iters: usize) {
    let plan = fold_plan(m, q, k).unwrap();
    let init = EdgeState::random(kernel, plan.graph.n_edges(), seed);
    let keyed = plan
        .graph
        .edges()
        .zip(init.values.iter().cloned())
        .map(|(e, v)| ((e.point, e.hyperplane), v))
        .collect();
    let want = oracle_iterations(&plan.space, kernel, keyed, iters);
    let (got, trace) = run_folded(&plan, kernel, &init, iters, SimOptions::default()).unwrap();
    assert!(trace.conflicts.is_empty());
    for (i, e) in plan.graph.edges().enumerate() {
        assert_eq!(
            got.values[i],
            want[&(e.point, e.hyperplane)],
            "P({m},{q}) k={k} edge {e:?}"
        );
    }
}

#[test]
fn folded_run_matches_predicate_oracle() {
    for (m, q, k) in [
        (1, 2, 0),
        (3, 2, 1),
        (5, 2, 2),
        (5, 2, 1),
        (3, 3, 1),
        (2, 2, 0),
    ] {
        folded_matches_oracle(m, q, k, &XorKernel::default(), 7, 2);
        folded_matches_oracle(
            m,
            q,
            k,
            &SumKernel {
                rule: UpdateRule::AddReduced,
            },
            11,
            1,
        );
    }
}
