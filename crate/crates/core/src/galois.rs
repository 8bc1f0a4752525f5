//! Galois fields GF(p^e) in discrete-log form.
//!
//! Nonzero elements are stored as exponents of a fixed primitive element α.
//! Multiplication is exponent addition modulo `p^e - 1`; addition goes through
//! the coefficient-vector form, packed as a base-`p` integer whose digit `i`
//! is the coefficient of `x^i`.

use std::fmt;

use crate::error::{Error, Result};

/// Largest field order built unless the caller asks for more.
pub const DEFAULT_MAX_ORDER: u64 = 1 << 20;

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Splits `q` into `(p, b)` with `q = p^b`, `p` prime.
pub fn prime_power(q: u64) -> Result<(u64, u32)> {
    if q < 2 {
        return Err(Error::NotPrimePower { q });
    }
    let p = (2..=q).find(|d| q.is_multiple_of(*d)).unwrap_or(q);
    let mut rest = q;
    let mut b = 0;
    while rest.is_multiple_of(p) {
        rest /= p;
        b += 1;
    }
    if rest != 1 {
        return Err(Error::NotPrimePower { q });
    }
    Ok((p, b))
}

fn checked_order(p: u64, e: u32) -> u128 {
    (p as u128).saturating_pow(e)
}

/// Field parameters. `poly` runs from the leading coefficient down to the
/// constant term: `[1, 0, 1, 1]` is `x^3 + x + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSpec {
    pub p: u64,
    pub e: u32,
    pub poly: Vec<u32>,
}

impl FieldSpec {
    pub fn new(p: u64, e: u32, poly: Vec<u32>) -> Self {
        Self { p, e, poly }
    }

    /// Spec with the deterministic default primitive polynomial.
    pub fn with_default_poly(p: u64, e: u32) -> Result<Self> {
        let poly = default_primitive_poly(p, e)?;
        Ok(Self { p, e, poly })
    }

    pub fn order(&self) -> u128 {
        checked_order(self.p, self.e)
    }

    fn validate_shape(&self, bound: u64) -> Result<()> {
        if !is_prime(self.p) {
            return Err(Error::NotPrime { p: self.p });
        }
        if self.e == 0 {
            return Err(Error::ZeroDegree);
        }
        let order = self.order();
        if order > bound as u128 {
            return Err(Error::SizeBound { order, bound });
        }
        if self.poly.len() != self.e as usize + 1 {
            return Err(Error::InvalidPolynomial(format!(
                "expected {} coefficients for degree {}, got {}",
                self.e + 1,
                self.e,
                self.poly.len()
            )));
        }
        if self.poly[0] != 1 {
            return Err(Error::InvalidPolynomial(
                "leading coefficient must be 1".into(),
            ));
        }
        if let Some(c) = self.poly.iter().find(|&&c| c as u64 >= self.p) {
            return Err(Error::InvalidPolynomial(format!(
                "coefficient {c} is not reduced modulo {}",
                self.p
            )));
        }
        Ok(())
    }
}

/// Packed coefficient-vector arithmetic for GF(p)^e.
#[derive(Debug, Clone)]
struct VectorOps {
    p: u32,
    e: u32,
    top: u32,
    /// `x^e` expressed in lower powers, i.e. the negated low coefficients.
    reduction: u32,
}

impl VectorOps {
    fn new(p: u32, e: u32, poly: &[u32]) -> Self {
        let e_us = e as usize;
        let mut reduction = 0u32;
        let mut place = 1u32;
        for j in 0..e_us {
            let c = poly[e_us - j];
            reduction += ((p - c) % p) * place;
            place = place.wrapping_mul(p);
        }
        Self {
            p,
            e,
            top: p.pow(e - 1),
            reduction,
        }
    }

    fn add(&self, a: u32, b: u32) -> u32 {
        if self.p == 2 {
            return a ^ b;
        }
        let (mut a, mut b) = (a, b);
        let mut out = 0;
        let mut place = 1;
        for _ in 0..self.e {
            out += ((a % self.p + b % self.p) % self.p) * place;
            a /= self.p;
            b /= self.p;
            place *= self.p;
        }
        out
    }

    fn scale(&self, a: u32, s: u32) -> u32 {
        if s == 0 {
            return 0;
        }
        if self.p == 2 {
            return a;
        }
        let mut a = a;
        let mut out = 0;
        let mut place = 1;
        for _ in 0..self.e {
            out += ((a % self.p) * s % self.p) * place;
            a /= self.p;
            place *= self.p;
        }
        out
    }

    fn neg(&self, a: u32) -> u32 {
        self.scale(a, self.p - 1)
    }

    fn times_x(&self, v: u32) -> u32 {
        let high = v / self.top;
        let shifted = (v % self.top) * self.p;
        self.add(shifted, self.scale(self.reduction, high))
    }
}

/// Multiplicative order of `x` modulo `poly` over GF(p), or `None` when `x`
/// is not a unit of the quotient ring.
pub fn order_of_x(p: u64, e: u32, poly: &[u32]) -> Option<u64> {
    let ops = VectorOps::new(p as u32, e, poly);
    let limit = p.pow(e) - 1;
    let one = 1u32;
    let mut v = one;
    for i in 1..=limit {
        v = ops.times_x(v);
        if v == one {
            return Some(i);
        }
    }
    None
}

/// The lexicographically smallest (leading coefficient first) primitive
/// polynomial of degree `e` over GF(p).
pub fn default_primitive_poly(p: u64, e: u32) -> Result<Vec<u32>> {
    default_primitive_poly_bounded(p, e, DEFAULT_MAX_ORDER)
}

pub fn default_primitive_poly_bounded(p: u64, e: u32, bound: u64) -> Result<Vec<u32>> {
    if !is_prime(p) {
        return Err(Error::NotPrime { p });
    }
    if e == 0 {
        return Err(Error::ZeroDegree);
    }
    let order = checked_order(p, e);
    if order > bound as u128 {
        return Err(Error::SizeBound { order, bound });
    }
    let order = order as u64;
    // Packed low coefficients compare numerically exactly like the sequence
    // c_{e-1}, ..., c_0 compares lexicographically.
    for low in 1..order {
        if low % p == 0 {
            continue;
        }
        let mut poly = vec![1u32];
        let mut digits = Vec::with_capacity(e as usize);
        let mut rest = low;
        for _ in 0..e {
            digits.push((rest % p) as u32);
            rest /= p;
        }
        poly.extend(digits.iter().rev());
        if order_of_x(p, e, &poly) == Some(order - 1) {
            return Ok(poly);
        }
    }
    Err(Error::Inconsistent(format!(
        "no primitive polynomial of degree {e} over GF({p})"
    )))
}

/// Either zero or `α^i` with `i` reduced modulo the group order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldElement {
    Zero,
    Pow(u64),
}

impl FieldElement {
    pub fn is_zero(self) -> bool {
        matches!(self, FieldElement::Zero)
    }

    pub fn exponent(self) -> Option<u64> {
        match self {
            FieldElement::Zero => None,
            FieldElement::Pow(i) => Some(i),
        }
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldElement::Zero => write!(f, "0"),
            FieldElement::Pow(i) => write!(f, "a^{i}"),
        }
    }
}

/// GF(p^e) with materialized exp/log tables. Immutable once built.
#[derive(Debug, Clone)]
pub struct FiniteField {
    spec: FieldSpec,
    order: u64,
    ops: VectorOps,
    exp_table: Vec<u32>,
    log_table: Vec<u32>,
}

const NO_LOG: u32 = u32::MAX;

pub fn build_field(spec: FieldSpec) -> Result<FiniteField> {
    build_field_bounded(spec, DEFAULT_MAX_ORDER)
}

pub fn build_field_bounded(spec: FieldSpec, bound: u64) -> Result<FiniteField> {
    spec.validate_shape(bound)?;
    let order = spec.order() as u64;
    let group = order - 1;
    let ops = VectorOps::new(spec.p as u32, spec.e, &spec.poly);

    let mut exp_table = Vec::with_capacity(group as usize);
    let mut log_table = vec![NO_LOG; order as usize];
    let mut v = 1u32;
    for i in 0..group {
        if log_table[v as usize] != NO_LOG {
            return Err(Error::NotPrimitive {
                found: Some(i),
                expected: group,
            });
        }
        log_table[v as usize] = i as u32;
        exp_table.push(v);
        v = ops.times_x(v);
        if v == 0 {
            return Err(Error::NotPrimitive {
                found: None,
                expected: group,
            });
        }
    }
    if v != 1 {
        let found = order_of_x(spec.p, spec.e, &spec.poly);
        return Err(Error::NotPrimitive {
            found,
            expected: group,
        });
    }

    Ok(FiniteField {
        spec,
        order,
        ops,
        exp_table,
        log_table,
    })
}

impl FiniteField {
    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn characteristic(&self) -> u64 {
        self.spec.p
    }

    pub fn degree(&self) -> u32 {
        self.spec.e
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    /// Order of the multiplicative group, `p^e - 1`.
    pub fn group_order(&self) -> u64 {
        self.order - 1
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement::Zero
    }

    pub fn one(&self) -> FieldElement {
        FieldElement::Pow(0)
    }

    pub fn alpha(&self) -> FieldElement {
        self.from_exponent(1)
    }

    pub fn from_exponent(&self, i: i64) -> FieldElement {
        FieldElement::Pow(i.rem_euclid(self.group_order() as i64) as u64)
    }

    /// Packed coefficient vector of `a`.
    pub fn to_vector(&self, a: FieldElement) -> u32 {
        match a {
            FieldElement::Zero => 0,
            FieldElement::Pow(i) => self.exp_table[i as usize],
        }
    }

    /// Element with packed coefficient vector `v`; `v` must be below the order.
    pub fn from_vector(&self, v: u32) -> FieldElement {
        if v == 0 {
            FieldElement::Zero
        } else {
            FieldElement::Pow(self.log_table[v as usize] as u64)
        }
    }

    /// Coefficients of `a`, constant term first.
    pub fn coefficients(&self, a: FieldElement) -> Vec<u32> {
        let p = self.spec.p as u32;
        let mut v = self.to_vector(a);
        (0..self.spec.e)
            .map(|_| {
                let d = v % p;
                v /= p;
                d
            })
            .collect()
    }

    pub fn exp_table(&self) -> &[u32] {
        &self.exp_table
    }

    /// Discrete log of a packed nonzero vector (`None` for zero).
    pub fn log_of_vector(&self, v: u32) -> Option<u64> {
        match self.log_table.get(v as usize) {
            Some(&l) if l != NO_LOG => Some(l as u64),
            _ => None,
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElement> + '_ {
        std::iter::once(FieldElement::Zero).chain((0..self.group_order()).map(FieldElement::Pow))
    }

    pub(crate) fn add_vectors(&self, a: u32, b: u32) -> u32 {
        self.ops.add(a, b)
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        match (a, b) {
            (FieldElement::Zero, x) | (x, FieldElement::Zero) => x,
            _ => self.from_vector(self.ops.add(self.to_vector(a), self.to_vector(b))),
        }
    }

    pub fn neg(&self, a: FieldElement) -> FieldElement {
        self.from_vector(self.ops.neg(self.to_vector(a)))
    }

    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        match (a, b) {
            (FieldElement::Pow(i), FieldElement::Pow(j)) => {
                FieldElement::Pow((i + j) % self.group_order())
            }
            _ => FieldElement::Zero,
        }
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement> {
        match a {
            FieldElement::Zero => Err(Error::ZeroInverse),
            FieldElement::Pow(i) => {
                let n = self.group_order();
                Ok(FieldElement::Pow((n - i) % n))
            }
        }
    }

    /// `a^k`; negative powers of zero are a domain error.
    pub fn pow(&self, a: FieldElement, k: i64) -> Result<FieldElement> {
        match a {
            FieldElement::Zero if k == 0 => Ok(self.one()),
            FieldElement::Zero if k > 0 => Ok(FieldElement::Zero),
            FieldElement::Zero => Err(Error::ZeroInverse),
            FieldElement::Pow(i) => {
                let n = self.group_order() as i128;
                let exp = (i as i128 * k as i128).rem_euclid(n);
                Ok(FieldElement::Pow(exp as u64))
            }
        }
    }

    /// `a^(p^s)`, the `s`-fold Frobenius image.
    pub fn frobenius(&self, a: FieldElement, s: u32) -> FieldElement {
        match a {
            FieldElement::Zero => FieldElement::Zero,
            FieldElement::Pow(i) => {
                let n = self.group_order() as u128;
                let mut factor = 1u128;
                for _ in 0..s {
                    factor = factor * self.spec.p as u128 % n.max(1);
                }
                FieldElement::Pow(((i as u128 * factor) % n.max(1)) as u64)
            }
        }
    }

    /// Trace from GF(p^e) down to its subfield GF(p^sub_degree).
    pub fn relative_trace(&self, x: FieldElement, sub_degree: u32) -> Result<FieldElement> {
        if sub_degree == 0 || !self.spec.e.is_multiple_of(sub_degree) {
            return Err(Error::NotDivisor {
                sub: sub_degree,
                degree: self.spec.e,
            });
        }
        let terms = self.spec.e / sub_degree;
        let mut acc = 0u32;
        let mut term = x;
        for _ in 0..terms {
            acc = self.ops.add(acc, self.to_vector(term));
            term = self.frobenius(term, sub_degree);
        }
        Ok(self.from_vector(acc))
    }

    /// Whether `x` lies in the subfield GF(p^sub_degree).
    pub fn in_subfield(&self, x: FieldElement, sub_degree: u32) -> bool {
        self.frobenius(x, sub_degree) == x
    }
}

/// `β = group_order / subgroup_order`, so that `⟨α^β⟩` has `subgroup_order`
/// elements.
pub fn subgroup_stride(group_order: u64, subgroup_order: u64) -> Result<u64> {
    if subgroup_order == 0 || !group_order.is_multiple_of(subgroup_order) {
        return Err(Error::NotDivisible {
            group: group_order,
            sub: subgroup_order,
        });
    }
    Ok(group_order / subgroup_order)
}
