//! Prime-field arithmetic and canonical projective coordinates.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    let n = n as u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Smallest non-square in GF(q)*, q an odd prime.
pub fn smallest_nonsquare(q: u32) -> u32 {
    let squares: std::collections::HashSet<u64> =
        (1..q as u64).map(|x| x * x % q as u64).collect();
    (2..q as u64)
        .find(|x| !squares.contains(x))
        .expect("odd prime field has a non-square") as u32
}

/// An element of GF(q), q prime. Mixed-modulus arithmetic panics.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fp {
    value: u32,
    modulus: u32,
}

impl Fp {
    pub fn new(value: i64, modulus: u32) -> Fp {
        debug_assert!(modulus >= 2);
        Fp {
            value: value.rem_euclid(modulus as i64) as u32,
            modulus,
        }
    }

    pub fn zero(modulus: u32) -> Fp {
        Fp { value: 0, modulus }
    }

    pub fn one(modulus: u32) -> Fp {
        Fp { value: 1, modulus }
    }

    pub fn value(self) -> u32 {
        self.value
    }

    pub fn modulus(self) -> u32 {
        self.modulus
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    pub fn pow(self, mut e: u32) -> Fp {
        let mut base = self;
        let mut acc = Fp::one(self.modulus);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; panics on zero.
    pub fn inv(self) -> Fp {
        assert!(!self.is_zero(), "inverse of zero in GF({})", self.modulus);
        self.pow(self.modulus - 2)
    }
}

impl Add for Fp {
    type Output = Fp;
    fn add(self, rhs: Fp) -> Fp {
        debug_assert_eq!(self.modulus, rhs.modulus);
        let mut v = self.value + rhs.value;
        if v >= self.modulus {
            v -= self.modulus;
        }
        Fp {
            value: v,
            modulus: self.modulus,
        }
    }
}

impl Sub for Fp {
    type Output = Fp;
    fn sub(self, rhs: Fp) -> Fp {
        debug_assert_eq!(self.modulus, rhs.modulus);
        let v = if self.value >= rhs.value {
            self.value - rhs.value
        } else {
            self.value + self.modulus - rhs.value
        };
        Fp {
            value: v,
            modulus: self.modulus,
        }
    }
}

impl Mul for Fp {
    type Output = Fp;
    fn mul(self, rhs: Fp) -> Fp {
        debug_assert_eq!(self.modulus, rhs.modulus);
        Fp {
            value: ((self.value as u64 * rhs.value as u64) % self.modulus as u64) as u32,
            modulus: self.modulus,
        }
    }
}

impl Neg for Fp {
    type Output = Fp;
    fn neg(self) -> Fp {
        Fp::zero(self.modulus) - self
    }
}

impl fmt::Debug for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// A point of PG(n-1, q) stored in canonical form: the last nonzero
/// coordinate equals 1. Ordering is lexicographic on coordinate values,
/// which fixes point ids across runs.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProjectivePoint {
    coords: Vec<Fp>,
}

impl ProjectivePoint {
    /// Canonicalizes; returns None for the all-zero tuple.
    pub fn new(coords: Vec<Fp>) -> Option<ProjectivePoint> {
        let last_nonzero = coords.iter().rposition(|c| !c.is_zero())?;
        let scale = coords[last_nonzero].inv();
        let coords = coords.iter().map(|&c| c * scale).collect();
        Some(ProjectivePoint { coords })
    }

    pub fn coords(&self) -> &[Fp] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn values(&self) -> Vec<u32> {
        self.coords.iter().map(|c| c.value()).collect()
    }
}

impl fmt::Debug for ProjectivePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?})", self.coords)
    }
}

/// All points of PG(n-1, q) in canonical form, lexicographically sorted.
pub fn projective_points(n: usize, q: u32) -> Vec<ProjectivePoint> {
    let mut out = Vec::new();
    let mut tuple = vec![Fp::zero(q); n];
    enumerate_rec(&mut tuple, 0, q, &mut out);
    out.sort();
    out.dedup();
    out
}

fn enumerate_rec(tuple: &mut Vec<Fp>, idx: usize, q: u32, out: &mut Vec<ProjectivePoint>) {
    if idx == tuple.len() {
        if let Some(p) = ProjectivePoint::new(tuple.clone()) {
            out.push(p);
        }
        return;
    }
    for v in 0..q {
        tuple[idx] = Fp::new(v as i64, q);
        enumerate_rec(tuple, idx + 1, q, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn primality() {
        assert!(is_prime(3) && is_prime(5) && is_prime(7));
        assert!(!is_prime(1) && !is_prime(4) && !is_prime(9));
    }

    #[test]
    fn inverses() {
        for q in [3u32, 5, 7, 11] {
            for v in 1..q {
                let x = Fp::new(v as i64, q);
                assert_eq!((x * x.inv()).value(), 1);
            }
        }
    }

    #[test]
    fn nonsquares() {
        assert_eq!(smallest_nonsquare(3), 2);
        assert_eq!(smallest_nonsquare(5), 2);
        assert_eq!(smallest_nonsquare(7), 3);
    }

    #[test]
    fn projective_point_count() {
        // (q^n - 1) / (q - 1)
        assert_eq!(projective_points(3, 3).len(), 13);
        assert_eq!(projective_points(6, 3).len(), 364);
        assert_eq!(projective_points(5, 3).len(), 121);
    }

    proptest! {
        // canonical(canonical(p)) == canonical(p), and scaling is a no-op
        #[test]
        fn canonicalization_idempotent(vals in proptest::collection::vec(0i64..7, 6), qi in 0usize..3, s in 1i64..7) {
            let q = [3u32, 5, 7][qi];
            let coords: Vec<Fp> = vals.iter().map(|&v| Fp::new(v, q)).collect();
            if let Some(p) = ProjectivePoint::new(coords.clone()) {
                let again = ProjectivePoint::new(p.coords().to_vec()).unwrap();
                prop_assert_eq!(&again, &p);
                if s % q as i64 != 0 {
                    let scale = Fp::new(s, q);
                    let scaled: Vec<Fp> = coords.iter().map(|&c| c * scale).collect();
                    let p2 = ProjectivePoint::new(scaled).unwrap();
                    prop_assert_eq!(&p2, &p);
                }
            }
        }
    }
}
