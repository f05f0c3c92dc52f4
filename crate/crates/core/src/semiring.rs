//! Commutative semi-rings carried as tuple annotations.
//!
//! Every relation and message is tagged with a [`SemiringKind`]; values of
//! different kinds (or covariance values of different dimension) never mix.
//! Three instances are registered:
//!
//! | kind            | domain                     | inverse |
//! |-----------------|----------------------------|---------|
//! | `NatCount`      | `u64`                      | no      |
//! | `IntCountRing`  | `i64`                      | yes     |
//! | `Covariance(d)` | `(c, s ∈ R^d, Q ∈ R^{d×d})` | yes     |

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemiringError {
    #[error("semi-ring mismatch: expected {expected}, found {found}")]
    Mismatch { expected: String, found: String },
    #[error("{0} has no additive inverse; deletions are unsupported")]
    NoInverse(&'static str),
    #[error("count overflow in {0}")]
    Overflow(&'static str),
    #[error("covariance value has inconsistent dimensions (expected d = {expected})")]
    Dimension { expected: usize },
}

/// Shape of the payload each value carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueArity {
    Scalar,
    /// Scalar count, length-`d` vector, `d × d` matrix.
    ScalarVectorMatrix(usize),
}

/// Static description of a registered semi-ring instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SemiringSpec {
    pub name: &'static str,
    pub has_additive_inverse: bool,
    pub arity: ValueArity,
}

/// The semi-ring instance a session (and every relation in it) works over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SemiringKind {
    NatCount,
    IntCountRing,
    Covariance(usize),
}

impl SemiringKind {
    pub fn spec(&self) -> SemiringSpec {
        match *self {
            SemiringKind::NatCount => SemiringSpec {
                name: "nat_count",
                has_additive_inverse: false,
                arity: ValueArity::Scalar,
            },
            SemiringKind::IntCountRing => SemiringSpec {
                name: "int_count_ring",
                has_additive_inverse: true,
                arity: ValueArity::Scalar,
            },
            SemiringKind::Covariance(d) => SemiringSpec {
                name: "covariance",
                has_additive_inverse: true,
                arity: ValueArity::ScalarVectorMatrix(d),
            },
        }
    }

    pub fn has_additive_inverse(&self) -> bool {
        self.spec().has_additive_inverse
    }

    pub fn zero(&self) -> Value {
        match *self {
            SemiringKind::NatCount => Value::Nat(0),
            SemiringKind::IntCountRing => Value::Int(0),
            SemiringKind::Covariance(d) => Value::Cov(Box::new(Covariance::zero(d))),
        }
    }

    pub fn one(&self) -> Value {
        match *self {
            SemiringKind::NatCount => Value::Nat(1),
            SemiringKind::IntCountRing => Value::Int(1),
            SemiringKind::Covariance(d) => Value::Cov(Box::new(Covariance::one(d))),
        }
    }

    /// The value a single occurrence of a tuple is annotated with when no
    /// feature payload is attached (a count of one).
    pub fn unit(&self) -> Value {
        self.one()
    }

    /// Checks that `v` belongs to this instance.
    pub fn check(&self, v: &Value) -> Result<(), SemiringError> {
        match (self, v) {
            (SemiringKind::NatCount, Value::Nat(_)) | (SemiringKind::IntCountRing, Value::Int(_)) => {
                Ok(())
            }
            (SemiringKind::Covariance(d), Value::Cov(c)) => {
                if c.dim() == *d && c.quad.len() == d * d {
                    Ok(())
                } else {
                    Err(SemiringError::Dimension { expected: *d })
                }
            }
            _ => Err(SemiringError::Mismatch {
                expected: self.to_string(),
                found: v.kind().to_string(),
            }),
        }
    }
}

impl fmt::Display for SemiringKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemiringKind::Covariance(d) => write!(f, "covariance({d})"),
            other => f.write_str(other.spec().name),
        }
    }
}

/// Count, feature sums, and sums of pairwise feature products.
///
/// `quad` is a dense row-major `d × d` symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    pub count: f64,
    pub sums: Vec<f64>,
    pub quad: Vec<f64>,
}

impl Covariance {
    pub fn zero(d: usize) -> Self {
        Covariance {
            count: 0.0,
            sums: vec![0.0; d],
            quad: vec![0.0; d * d],
        }
    }

    pub fn one(d: usize) -> Self {
        Covariance {
            count: 1.0,
            ..Covariance::zero(d)
        }
    }

    pub fn dim(&self) -> usize {
        self.sums.len()
    }

    pub fn quad_at(&self, i: usize, j: usize) -> f64 {
        self.quad[i * self.dim() + j]
    }

    fn is_zero(&self) -> bool {
        self.count == 0.0 && self.sums.iter().all(|&x| x == 0.0) && self.quad.iter().all(|&x| x == 0.0)
    }

    fn add(&self, o: &Covariance) -> Covariance {
        Covariance {
            count: self.count + o.count,
            sums: self.sums.iter().zip(&o.sums).map(|(a, b)| a + b).collect(),
            quad: self.quad.iter().zip(&o.quad).map(|(a, b)| a + b).collect(),
        }
    }

    // (c1 c2, c1 s2 + c2 s1, c1 Q2 + c2 Q1 + s1 s2^T + s2 s1^T)
    fn mul(&self, o: &Covariance) -> Covariance {
        let d = self.dim();
        let (c1, c2) = (self.count, o.count);
        let sums = (0..d).map(|i| c1 * o.sums[i] + c2 * self.sums[i]).collect();
        let mut quad = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let k = i * d + j;
                quad[k] = c1 * o.quad[k]
                    + c2 * self.quad[k]
                    + (self.sums[i] * o.sums[j] + o.sums[i] * self.sums[j]);
            }
        }
        Covariance {
            count: c1 * c2,
            sums,
            quad,
        }
    }

    fn negate(&self) -> Covariance {
        Covariance {
            count: -self.count,
            sums: self.sums.iter().map(|x| -x).collect(),
            quad: self.quad.iter().map(|x| -x).collect(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..i).all(|j| self.quad_at(i, j) == self.quad_at(j, i)))
    }
}

/// A semi-ring annotation.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Nat(u64),
    Int(i64),
    Cov(Box<Covariance>),
}

impl Value {
    pub fn kind(&self) -> SemiringKind {
        match self {
            Value::Nat(_) => SemiringKind::NatCount,
            Value::Int(_) => SemiringKind::IntCountRing,
            Value::Cov(c) => SemiringKind::Covariance(c.dim()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Value::Nat(n) => *n == 0,
            Value::Int(n) => *n == 0,
            Value::Cov(c) => c.is_zero(),
        }
    }

    pub fn add(&self, other: &Value) -> Result<Value, SemiringError> {
        match (self, other) {
            (Value::Nat(a), Value::Nat(b)) => a
                .checked_add(*b)
                .map(Value::Nat)
                .ok_or(SemiringError::Overflow("add")),
            (Value::Int(a), Value::Int(b)) => a
                .checked_add(*b)
                .map(Value::Int)
                .ok_or(SemiringError::Overflow("add")),
            (Value::Cov(a), Value::Cov(b)) if a.dim() == b.dim() => {
                Ok(Value::Cov(Box::new(a.add(b))))
            }
            _ => Err(mismatch(self, other)),
        }
    }

    pub fn mul(&self, other: &Value) -> Result<Value, SemiringError> {
        match (self, other) {
            (Value::Nat(a), Value::Nat(b)) => a
                .checked_mul(*b)
                .map(Value::Nat)
                .ok_or(SemiringError::Overflow("mul")),
            (Value::Int(a), Value::Int(b)) => a
                .checked_mul(*b)
                .map(Value::Int)
                .ok_or(SemiringError::Overflow("mul")),
            (Value::Cov(a), Value::Cov(b)) if a.dim() == b.dim() => {
                Ok(Value::Cov(Box::new(a.mul(b))))
            }
            _ => Err(mismatch(self, other)),
        }
    }

    pub fn negate(&self) -> Result<Value, SemiringError> {
        match self {
            Value::Nat(_) => Err(SemiringError::NoInverse("nat_count")),
            Value::Int(a) => a
                .checked_neg()
                .map(Value::Int)
                .ok_or(SemiringError::Overflow("negate")),
            Value::Cov(c) => Ok(Value::Cov(Box::new(c.negate()))),
        }
    }

    /// Scalar view of a count value; covariance values report their count.
    pub fn as_f64(&self) -> f64 {
        match self {
            Value::Nat(n) => *n as f64,
            Value::Int(n) => *n as f64,
            Value::Cov(c) => c.count,
        }
    }

    pub fn as_covariance(&self) -> Option<&Covariance> {
        match self {
            Value::Cov(c) => Some(c),
            _ => None,
        }
    }

    /// Equality up to a relative tolerance on floating payloads; exact for counts.
    pub fn approx_eq(&self, other: &Value, rel_tol: f64) -> bool {
        match (self, other) {
            (Value::Cov(a), Value::Cov(b)) => {
                let close = |x: f64, y: f64| (x - y).abs() <= rel_tol * x.abs().max(y.abs()).max(1.0);
                a.dim() == b.dim()
                    && close(a.count, b.count)
                    && a.sums.iter().zip(&b.sums).all(|(x, y)| close(*x, *y))
                    && a.quad.iter().zip(&b.quad).all(|(x, y)| close(*x, *y))
            }
            _ => self == other,
        }
    }

    pub(crate) fn write_bytes(&self, out: &mut Vec<u8>) {
        match self {
            Value::Nat(n) => {
                out.push(0);
                out.extend_from_slice(&n.to_le_bytes());
            }
            Value::Int(n) => {
                out.push(1);
                out.extend_from_slice(&n.to_le_bytes());
            }
            Value::Cov(c) => {
                out.push(2);
                out.extend_from_slice(&(c.dim() as u64).to_le_bytes());
                for x in std::iter::once(&c.count).chain(&c.sums).chain(&c.quad) {
                    out.extend_from_slice(&x.to_bits().to_le_bytes());
                }
            }
        }
    }
}

fn mismatch(a: &Value, b: &Value) -> SemiringError {
    SemiringError::Mismatch {
        expected: a.kind().to_string(),
        found: b.kind().to_string(),
    }
}

/// Standard covariance lifting of a dense feature vector: `(1, x, x xᵀ)`.
pub fn lift(values: &[f64]) -> Value {
    let d = values.len();
    let mut quad = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            quad[i * d + j] = values[i] * values[j];
        }
    }
    Value::Cov(Box::new(Covariance {
        count: 1.0,
        sums: values.to_vec(),
        quad,
    }))
}

/// Lifts features that occupy a subset of the `d` global slots; every other
/// slot is zero. Used when each relation contributes only its own columns.
pub fn lift_sparse(d: usize, slots: &[(usize, f64)]) -> Value {
    let mut dense = vec![0.0; d];
    for &(slot, v) in slots {
        dense[slot] = v;
    }
    lift(&dense)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cov(c: f64, s: &[f64], q: &[f64]) -> Value {
        Value::Cov(Box::new(Covariance {
            count: c,
            sums: s.to_vec(),
            quad: q.to_vec(),
        }))
    }

    #[test]
    fn nat_count_arithmetic() {
        let k = SemiringKind::NatCount;
        assert_eq!(Value::Nat(3).add(&Value::Nat(5)).unwrap(), Value::Nat(8));
        assert_eq!(Value::Nat(8).mul(&Value::Nat(5)).unwrap(), Value::Nat(40));
        assert_eq!(Value::Nat(7).add(&k.zero()).unwrap(), Value::Nat(7));
        assert_eq!(Value::Nat(7).mul(&k.one()).unwrap(), Value::Nat(7));
    }

    #[test]
    fn covariance_identities() {
        let v = cov(1.0, &[2.0, 3.0], &[4.0, 6.0, 6.0, 9.0]);
        let k = SemiringKind::Covariance(2);
        assert_eq!(v.add(&k.zero()).unwrap(), v);
        assert_eq!(v.mul(&k.one()).unwrap(), v);
    }

    #[test]
    fn covariance_product_matches_cross_product_expansion() {
        // Two single-tuple relations with features at different slots: the
        // joined tuple has feature vector (2, 3).
        let a = lift_sparse(2, &[(0, 2.0)]);
        let b = lift_sparse(2, &[(1, 3.0)]);
        let joined = [2.0, 3.0];
        let mut expect_q = [0.0; 4];
        for i in 0..2 {
            for j in 0..2 {
                expect_q[i * 2 + j] = joined[i] * joined[j];
            }
        }
        assert_eq!(a.mul(&b).unwrap(), cov(1.0, &joined, &expect_q));

        // Same slot, d = 1: lift(2) × lift(3) = (1, 5, [[4 + 9 + 2·2·3]]).
        let p = lift(&[2.0]).mul(&lift(&[3.0])).unwrap();
        assert_eq!(p, cov(1.0, &[5.0], &[25.0]));
    }

    #[test]
    fn lift_cases() {
        assert_eq!(lift(&[2.0, 3.0]), cov(1.0, &[2.0, 3.0], &[4.0, 6.0, 6.0, 9.0]));
        assert_eq!(lift(&[]), cov(1.0, &[], &[]));
        assert_eq!(lift(&[0.0, 0.0, 0.0]), cov(1.0, &[0.0; 3], &[0.0; 9]));
    }

    #[test]
    fn negate_cases() {
        assert_eq!(Value::Int(5).negate().unwrap(), Value::Int(-5));
        assert_eq!(Value::Int(0).negate().unwrap(), Value::Int(0));
        let z = SemiringKind::Covariance(2).zero();
        assert!(z.negate().unwrap().is_zero());
        assert!(matches!(Value::Nat(3).negate(), Err(SemiringError::NoInverse(_))));
    }

    #[test]
    fn mixing_instances_is_an_error() {
        assert!(Value::Nat(1).add(&Value::Int(1)).is_err());
        assert!(lift(&[1.0]).mul(&lift(&[1.0, 2.0])).is_err());
        assert!(SemiringKind::NatCount.check(&Value::Int(2)).is_err());
        assert!(SemiringKind::Covariance(3).check(&lift(&[1.0])).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        assert!(Value::Nat(u64::MAX).add(&Value::Nat(1)).is_err());
        assert!(Value::Int(i64::MAX).mul(&Value::Int(2)).is_err());
    }
}
