//! Finite projective spaces P(m, GF(q)) built from GF(q^{m+1}).
//!
//! Point `i` is the class of `α^i` modulo GF(q)*, i.e. the exponents
//! congruent to `i` mod `N = (q^{m+1}-1)/(q-1)`. Hyperplane `b` is the set of
//! points `x` with `Tr(α^b · α^x) = 0`, the trace taken down to GF(q).

use crate::error::{Error, Result};
use crate::galois::{self, FieldElement, FieldSpec, FiniteField};
use crate::par;

/// Number of `l`-flats inside an `n`-flat over GF(s): the Gaussian binomial
/// `[n+1, l+1]_s`.
///
/// `l = -1` counts the empty flat and yields 1, so the function also serves
/// as "hyperplanes through an (m-1)-flat".
pub fn phi(n: i64, l: i64, s: u64) -> Result<u64> {
    if s < 2 || n < -1 || l < -1 || l > n {
        return Err(Error::PhiDomain { n, l, s });
    }
    let s = s as u128;
    let power = |k: i64| -> Result<u128> { s.checked_pow(k as u32).ok_or(Error::Overflow("phi")) };
    let mut acc: u128 = 1;
    for i in 0..=l {
        let num = power(n + 1 - i)? - 1;
        let den = power(i + 1)? - 1;
        // Each partial product is itself a Gaussian binomial, so the
        // division is exact.
        acc = acc.checked_mul(num).ok_or(Error::Overflow("phi"))? / den;
    }
    u64::try_from(acc).map_err(|_| Error::Overflow("phi"))
}

/// Hyperplanes of P(m, GF(q)) containing a fixed `f`-flat; zero once the
/// flat is the whole space.
pub fn hyperplanes_through_flat(m: u32, f: u32, q: u64) -> Result<u64> {
    if f >= m {
        return Ok(0);
    }
    let codim = m as i64 - f as i64;
    phi(codim - 1, codim - 2, q)
}

/// Number of points of P(d, GF(s)), `(s^{d+1}-1)/(s-1)`.
pub fn point_count(d: u32, s: u64) -> Result<u64> {
    let total = (s as u128)
        .checked_pow(d + 1)
        .ok_or(Error::Overflow("point count"))?;
    u64::try_from((total - 1) / (s as u128 - 1)).map_err(|_| Error::Overflow("point count"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProjParams {
    /// Projective dimension.
    pub m: u32,
    /// Base field order, a prime power.
    pub q: u64,
}

impl ProjParams {
    pub fn new(m: u32, q: u64) -> Self {
        Self { m, q }
    }
}

/// A point/hyperplane incidence pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub point: usize,
    pub hyperplane: usize,
}

impl Edge {
    pub fn new(point: usize, hyperplane: usize) -> Self {
        Self { point, hyperplane }
    }
}

/// A projective subspace stored as its explicit point set. Equality looks at
/// the point set only; the basis is whichever one the span happened to pick.
#[derive(Debug, Clone)]
pub struct Flat {
    /// Projective dimension.
    pub dim: usize,
    /// Sorted point indices.
    pub points: Vec<usize>,
    /// Representative exponents of GF(q)-independent spanning points.
    pub basis: Vec<usize>,
}

impl PartialEq for Flat {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points
    }
}

impl Eq for Flat {}

impl Flat {
    pub fn contains(&self, point: usize) -> bool {
        self.points.binary_search(&point).is_ok()
    }

    pub fn is_subset_of(&self, other: &Flat) -> bool {
        self.points.iter().all(|&x| other.contains(x))
    }

    pub fn is_disjoint_from(&self, other: &Flat) -> bool {
        self.points.iter().all(|&x| !other.contains(x))
    }

    pub fn intersection(&self, other: &Flat) -> Vec<usize> {
        self.points
            .iter()
            .copied()
            .filter(|&x| other.contains(x))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ProjectiveSpace {
    params: ProjParams,
    /// `q = p^b`.
    base_degree: u32,
    field: FiniteField,
    n_points: usize,
    /// `zero_trace[j]` iff `Tr(α^j) = 0`, for `j` in `[0, N)`.
    zero_trace: Vec<bool>,
    hyperplane_size: usize,
    /// Packed vectors of GF(q)*, i.e. `α^{jN}`.
    scalar_logs: Vec<u64>,
}

pub fn build_space(params: ProjParams) -> Result<ProjectiveSpace> {
    build_space_with(params, None, galois::DEFAULT_MAX_ORDER)
}

/// Builds the space, optionally over a caller-supplied primitive polynomial
/// for GF(q^{m+1}) (given over the prime field).
pub fn build_space_with(
    params: ProjParams,
    poly: Option<Vec<u32>>,
    bound: u64,
) -> Result<ProjectiveSpace> {
    let (p, b) = galois::prime_power(params.q)?;
    let e = b
        .checked_mul(params.m + 1)
        .ok_or(Error::Overflow("extension degree"))?;
    let order = (p as u128).saturating_pow(e);
    if order > bound as u128 {
        return Err(Error::SizeBound { order, bound });
    }
    let poly = match poly {
        Some(poly) => poly,
        None => galois::default_primitive_poly_bounded(p, e, bound)?,
    };
    let field = galois::build_field_bounded(FieldSpec::new(p, e, poly), bound)?;
    let n_points = point_count(params.m, params.q)? as usize;

    let zero_trace = par::map_range(0..n_points, |j| {
        field
            .relative_trace(FieldElement::Pow(j as u64), b)
            .map(FieldElement::is_zero)
            .unwrap_or(false)
    });
    let hyperplane_size = zero_trace.iter().filter(|&&z| z).count();
    let scalar_logs = (0..params.q - 1).map(|j| j * n_points as u64).collect();

    let space = ProjectiveSpace {
        params,
        base_degree: b,
        field,
        n_points,
        zero_trace,
        hyperplane_size,
        scalar_logs,
    };
    if params.m >= 1 {
        let expected = phi(params.m as i64 - 1, 0, params.q)? as usize;
        if space.hyperplane_size != expected {
            return Err(Error::Inconsistent(format!(
                "hyperplane has {} points, expected {expected}",
                space.hyperplane_size
            )));
        }
    }
    Ok(space)
}

impl ProjectiveSpace {
    pub fn params(&self) -> ProjParams {
        self.params
    }

    pub fn field(&self) -> &FiniteField {
        &self.field
    }

    pub fn base_degree(&self) -> u32 {
        self.base_degree
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_hyperplanes(&self) -> usize {
        self.n_points
    }

    /// Points per hyperplane, equal to the vertex degree of the incidence graph.
    pub fn degree(&self) -> usize {
        self.hyperplane_size
    }

    /// Canonical point index of an arbitrary exponent.
    pub fn point_of_exponent(&self, exponent: i64) -> usize {
        exponent.rem_euclid(self.n_points as i64) as usize
    }

    pub fn incident(&self, point: usize, hyperplane: usize) -> bool {
        self.zero_trace[(point + hyperplane) % self.n_points]
    }

    pub fn hyperplane_points(&self, hyperplane: usize) -> Vec<usize> {
        (0..self.n_points)
            .filter(|&x| self.incident(x, hyperplane))
            .collect()
    }

    pub fn hyperplanes_through_point(&self, point: usize) -> Vec<usize> {
        (0..self.n_points)
            .filter(|&h| self.incident(point, h))
            .collect()
    }

    pub fn flat_in_hyperplane(&self, flat: &Flat, hyperplane: usize) -> bool {
        flat.points.iter().all(|&x| self.incident(x, hyperplane))
    }

    /// All hyperplanes containing every point of `points`.
    pub fn hyperplanes_containing(&self, points: &[usize]) -> Vec<usize> {
        (0..self.n_points)
            .filter(|&h| points.iter().all(|&x| self.incident(x, h)))
            .collect()
    }

    /// The smallest flat containing `points`: close their representative
    /// vectors under addition and GF(q)-scaling.
    pub fn span(&self, points: &[usize]) -> Flat {
        assert!(!points.is_empty(), "span of an empty point set");
        let f = &self.field;
        let n = f.group_order();
        let mut member = vec![false; f.order() as usize];
        member[0] = true;
        let mut vectors: Vec<u32> = vec![0];
        let mut basis = Vec::new();

        for &x in points {
            let v = f.to_vector(FieldElement::Pow(x as u64 % n));
            if member[v as usize] {
                continue;
            }
            basis.push(x);
            let current = vectors.clone();
            for &s in &self.scalar_logs {
                let scaled = f.to_vector(FieldElement::Pow((s + x as u64) % n));
                for &w in &current {
                    let u = f.add_vectors(w, scaled);
                    if !member[u as usize] {
                        member[u as usize] = true;
                        vectors.push(u);
                    }
                }
            }
        }

        let mut pts: Vec<usize> = vectors
            .iter()
            .filter_map(|&v| f.log_of_vector(v))
            .map(|l| (l % self.n_points as u64) as usize)
            .collect();
        pts.sort_unstable();
        pts.dedup();
        Flat {
            dim: basis.len() - 1,
            points: pts,
            basis,
        }
    }

    /// Image of `flat` under multiplication by `α^shift`.
    pub fn shift(&self, flat: &Flat, shift: usize) -> Flat {
        let n = self.n_points;
        let mut points: Vec<usize> = flat.points.iter().map(|&x| (x + shift) % n).collect();
        points.sort_unstable();
        Flat {
            dim: flat.dim,
            points,
            basis: flat.basis.iter().map(|&x| (x + shift) % n).collect(),
        }
    }

    /// All lines contained in `flat`.
    pub fn lines_in(&self, flat: &Flat) -> Vec<Flat> {
        let mut lines: Vec<Flat> = Vec::new();
        for (i, &a) in flat.points.iter().enumerate() {
            for &b in &flat.points[i + 1..] {
                let line = self.span(&[a, b]);
                // A line is found first through its two smallest points.
                if line.points[0] == a && line.points[1] == b {
                    lines.push(line);
                }
            }
        }
        lines
    }
}

/// Point/hyperplane incidence graph with a dense edge enumeration: edges are
/// ordered by point, then hyperplane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceGraph {
    n: usize,
    degree: usize,
    point_adj: Vec<Vec<usize>>,
    hyperplane_adj: Vec<Vec<usize>>,
}

pub fn incidence_graph(space: &ProjectiveSpace) -> IncidenceGraph {
    let n = space.n_points();
    let point_adj = par::map_range(0..n, |x| space.hyperplanes_through_point(x));
    let hyperplane_adj = par::map_range(0..n, |h| space.hyperplane_points(h));
    IncidenceGraph {
        n,
        degree: space.degree(),
        point_adj,
        hyperplane_adj,
    }
}

impl IncidenceGraph {
    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_edges(&self) -> usize {
        self.n * self.degree
    }

    pub fn hyperplanes_of(&self, point: usize) -> &[usize] {
        &self.point_adj[point]
    }

    pub fn points_of(&self, hyperplane: usize) -> &[usize] {
        &self.hyperplane_adj[hyperplane]
    }

    pub fn edge_index(&self, edge: Edge) -> Option<usize> {
        let adj = self.point_adj.get(edge.point)?;
        adj.binary_search(&edge.hyperplane)
            .ok()
            .map(|pos| edge.point * self.degree + pos)
    }

    pub fn edge(&self, index: usize) -> Edge {
        let point = index / self.degree;
        Edge::new(point, self.point_adj[point][index % self.degree])
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.point_adj
            .iter()
            .enumerate()
            .flat_map(|(p, hs)| hs.iter().map(move |&h| Edge::new(p, h)))
    }

    /// Edge indices incident on `hyperplane`, ordered by point.
    pub fn hyperplane_edge_indices(&self, hyperplane: usize) -> Vec<usize> {
        self.hyperplane_adj[hyperplane]
            .iter()
            .map(|&p| {
                self.edge_index(Edge::new(p, hyperplane))
                    .expect("transpose adjacency out of sync")
            })
            .collect()
    }

    /// Edge indices incident on `point`, ordered by hyperplane.
    pub fn point_edge_indices(&self, point: usize) -> std::ops::Range<usize> {
        point * self.degree..(point + 1) * self.degree
    }
}
