//! Exact rational linear algebra: dense matrices, deterministic RREF,
//! affine solution spaces, inverses, characteristic polynomials.
//!
//! Pivoting is always on the leftmost column with a nonzero entry in the
//! first available row; exact arithmetic makes numerical pivoting moot and
//! this rule keeps solution-space presentations reproducible.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub type Rat = BigRational;

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Renders a rational as "num/den" (den always present, in lowest terms).
pub fn rat_str(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

#[derive(Clone, PartialEq, Eq)]
pub struct RatMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Rat>,
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix {
            rows,
            cols,
            data: vec![Rat::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rat::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c));
        RatMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_int_rows(rows: &[Vec<i64>]) -> Self {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| rat_int(v)).collect())
                .collect(),
        )
    }

    pub fn row(&self, i: usize) -> &[Rat] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul(&self, other: &RatMatrix) -> RatMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = RatMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let prod = a * &other[(k, j)];
                    out[(i, j)] += prod;
                }
            }
        }
        out
    }

    pub fn scale(&self, s: &Rat) -> RatMatrix {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    /// In-place reduced row echelon form restricted to the first
    /// `pivot_cols` columns (the rest ride along, e.g. an augmented
    /// right-hand side or provenance block). Returns the pivot columns.
    pub fn rref_within(&mut self, pivot_cols: usize) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..pivot_cols.min(self.cols) {
            let Some(pr) = (row..self.rows).find(|&r| !self[(r, col)].is_zero()) else {
                continue;
            };
            self.swap_rows(row, pr);
            let inv = self[(row, col)].recip();
            for j in 0..self.cols {
                let v = &self[(row, j)] * &inv;
                self[(row, j)] = v;
            }
            for r in 0..self.rows {
                if r != row && !self[(r, col)].is_zero() {
                    let factor = self[(r, col)].clone();
                    for j in 0..self.cols {
                        let v = &self[(r, j)] - &factor * &self[(row, j)];
                        self[(r, j)] = v;
                    }
                }
            }
            pivots.push(col);
            row += 1;
            if row == self.rows {
                break;
            }
        }
        pivots
    }

    pub fn rref(&mut self) -> Vec<usize> {
        self.rref_within(self.cols)
    }

    pub fn rank(mut self) -> usize {
        self.rref().len()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn inverse(&self) -> Option<RatMatrix> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut aug = RatMatrix::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, n + i)] = Rat::one();
        }
        let pivots = aug.rref_within(n);
        if pivots.len() < n {
            return None;
        }
        let mut inv = RatMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = aug[(i, n + j)].clone();
            }
        }
        Some(inv)
    }

    pub fn trace(&self) -> Rat {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)].clone()).sum()
    }

    /// Characteristic polynomial by the Faddeev-LeVerrier recurrence.
    /// Returns coefficients [c_0, ..., c_n] of c_0 + c_1 x + ... + c_n x^n
    /// with c_n = 1.
    pub fn char_poly(&self) -> Vec<Rat> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut coeffs = vec![Rat::zero(); n + 1];
        coeffs[n] = Rat::one();
        let mut m = self.clone(); // M_1 = A
        for k in 1..=n {
            let c = -(m.trace() / rat_int(k as i64));
            coeffs[n - k] = c;
            if k < n {
                // M_{k+1} = A (M_k + c_{n-k} I)
                let mut shifted = m.clone();
                for i in 0..n {
                    let v = &shifted[(i, i)] + &coeffs[n - k];
                    shifted[(i, i)] = v;
                }
                m = self.mul(&shifted);
            }
        }
        coeffs
    }
}

impl std::ops::Index<(usize, usize)> for RatMatrix {
    type Output = Rat;
    fn index(&self, (i, j): (usize, usize)) -> &Rat {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RatMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rat {
        &mut self.data[i * self.cols + j]
    }
}

impl std::fmt::Debug for RatMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.rows {
            writeln!(f, "{:?}", self.row(i))?;
        }
        Ok(())
    }
}

/// Exact rank of an integer matrix by fraction-free Bareiss elimination.
/// Much faster than rational RREF on matrices whose entries would otherwise
/// force per-operation gcd normalization.
pub fn bareiss_rank(mut m: Vec<Vec<BigInt>>) -> usize {
    use num_traits::Zero as _;
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut prev = BigInt::from(1);
    let mut rank = 0;
    let mut row = 0;
    for col in 0..cols {
        let Some(pivot_row) = (row..rows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(row, pivot_row);
        for r in (row + 1)..rows {
            for c in (col + 1)..cols {
                let num = &m[row][col] * &m[r][c] - &m[r][col] * &m[row][c];
                m[r][c] = num / &prev;
            }
            m[r][col] = BigInt::zero();
        }
        prev = m[row][col].clone();
        rank += 1;
        row += 1;
        if row == rows {
            break;
        }
    }
    rank
}

/// Rank of a rational matrix via a common-denominator scaling and Bareiss.
pub fn rational_rank_bareiss(rows: &[Vec<Rat>]) -> usize {
    let scaled: Vec<Vec<BigInt>> = rows
        .iter()
        .map(|r| {
            let mut denom = BigInt::from(1);
            for v in r {
                denom = num_integer::lcm(denom, v.denom().clone());
            }
            r.iter()
                .map(|v| (v * Rat::from_integer(denom.clone())).to_integer())
                .collect()
        })
        .collect();
    bareiss_rank(scaled)
}

pub fn poly_eval(coeffs: &[Rat], x: &Rat) -> Rat {
    let mut acc = Rat::zero();
    for c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Affine solution set of a linear system: particular + span(basis).
#[derive(Clone, Debug)]
pub struct AffineSolution {
    pub unknowns: usize,
    pub particular: Vec<Rat>,
    /// One vector per free column, in free-column order.
    pub basis: Vec<Vec<Rat>>,
    pub pivot_cols: Vec<usize>,
    pub free_cols: Vec<usize>,
}

impl AffineSolution {
    /// The affine function of unknown `v` over the free parameters:
    /// (constant, coefficient per free column).
    pub fn affine_function(&self, v: usize) -> (Rat, Vec<Rat>) {
        let coeffs = self.basis.iter().map(|b| b[v].clone()).collect();
        (self.particular[v].clone(), coeffs)
    }

    /// Unknowns with a constant affine function, and their values.
    pub fn pinned(&self) -> Vec<(usize, Rat)> {
        (0..self.unknowns)
            .filter(|&v| self.basis.iter().all(|b| b[v].is_zero()))
            .map(|v| (v, self.particular[v].clone()))
            .collect()
    }

    pub fn contains(&self, point: &[Rat]) -> bool {
        assert_eq!(point.len(), self.unknowns);
        // Solve for the free parameters directly, then compare.
        let params: Vec<Rat> = self.free_cols.iter().map(|&f| point[f].clone()).collect();
        (0..self.unknowns).all(|v| {
            let mut expect = self.particular[v].clone();
            for (b, p) in self.basis.iter().zip(&params) {
                expect += &b[v] * p;
            }
            expect == point[v]
        })
    }
}

pub enum LinearOutcome {
    Solved(AffineSolution),
    /// Coefficients of the row combination that reduces to 0 = nonzero.
    Inconsistent { combination: Vec<Rat> },
}

/// Solves the system given as augmented rows [a_1 .. a_n | b]. Tracks row
/// provenance so an inconsistency can name the offending combination.
pub fn solve_affine(rows: &[Vec<Rat>], unknowns: usize) -> LinearOutcome {
    let nrows = rows.len();
    if nrows == 0 {
        return LinearOutcome::Solved(AffineSolution {
            unknowns,
            particular: vec![Rat::zero(); unknowns],
            basis: (0..unknowns)
                .map(|f| {
                    let mut v = vec![Rat::zero(); unknowns];
                    v[f] = Rat::one();
                    v
                })
                .collect(),
            pivot_cols: vec![],
            free_cols: (0..unknowns).collect(),
        });
    }
    // Layout: [coefficients | rhs | provenance identity]
    let cols = unknowns + 1 + nrows;
    let mut aug = RatMatrix::zeros(nrows, cols);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), unknowns + 1);
        for (j, v) in r.iter().enumerate() {
            aug[(i, j)] = v.clone();
        }
        aug[(i, unknowns + 1 + i)] = Rat::one();
    }
    let pivots = aug.rref_within(unknowns);
    for i in 0..nrows {
        let coeff_zero = (0..unknowns).all(|j| aug[(i, j)].is_zero());
        if coeff_zero && !aug[(i, unknowns)].is_zero() {
            let combination = (0..nrows)
                .map(|k| aug[(i, unknowns + 1 + k)].clone())
                .collect();
            return LinearOutcome::Inconsistent { combination };
        }
    }
    let free_cols: Vec<usize> = (0..unknowns).filter(|c| !pivots.contains(c)).collect();
    let mut particular = vec![Rat::zero(); unknowns];
    for (row, &pc) in pivots.iter().enumerate() {
        particular[pc] = aug[(row, unknowns)].clone();
    }
    let basis = free_cols
        .iter()
        .map(|&f| {
            let mut v = vec![Rat::zero(); unknowns];
            v[f] = Rat::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -aug[(row, f)].clone();
            }
            v
        })
        .collect();
    LinearOutcome::Solved(AffineSolution {
        unknowns,
        particular,
        basis,
        pivot_cols: pivots,
        free_cols,
    })
}

/// Integer roots of a monic integer polynomial, found by scanning
/// candidates in [-bound, bound]; returns (root, multiplicity) pairs.
pub fn integer_roots(coeffs: &[Rat], bound: i64) -> Vec<(i64, usize)> {
    let mut out = Vec::new();
    let mut poly: Vec<Rat> = coeffs.to_vec();
    for cand in -bound..=bound {
        let x = rat_int(cand);
        let mut mult = 0;
        while poly.len() > 1 && poly_eval(&poly, &x).is_zero() {
            poly = deflate(&poly, &x);
            mult += 1;
        }
        if mult > 0 {
            out.push((cand, mult));
        }
    }
    out
}

fn deflate(poly: &[Rat], root: &Rat) -> Vec<Rat> {
    // Synthetic division by (x - root).
    let n = poly.len() - 1;
    let mut quot = vec![Rat::zero(); n];
    let mut carry = Rat::zero();
    for k in (0..n).rev() {
        let c = &poly[k + 1] + &carry;
        carry = &c * root;
        quot[k] = c;
    }
    debug_assert!((&poly[0] + carry).is_zero());
    quot
}

/// Exact eigenvalues of a 2x2 integer matrix, if they are integers.
pub fn int_2x2_eigenvalues(m: [[i64; 2]; 2]) -> Option<[i64; 2]> {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4 * det;
    if disc < 0 {
        return None;
    }
    let s = (disc as f64).sqrt() as i64;
    let s = (s - 2..=s + 2).find(|&c| c >= 0 && c * c == disc)?;
    if (tr + s) % 2 != 0 {
        return None;
    }
    Some([(tr + s) / 2, (tr - s) / 2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rref_and_rank() {
        let mut m = RatMatrix::from_int_rows(&[
            vec![1, 2, 3],
            vec![2, 4, 6],
            vec![1, 0, 1],
        ]);
        let pivots = m.rref();
        assert_eq!(pivots, vec![0, 1]);
    }

    #[test]
    fn inverse_roundtrip() {
        let m = RatMatrix::from_int_rows(&[vec![2, 1], vec![7, 4]]);
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), RatMatrix::identity(2));
        let sing = RatMatrix::from_int_rows(&[vec![1, 2], vec![2, 4]]);
        assert!(sing.inverse().is_none());
    }

    #[test]
    fn char_poly_companion() {
        // x^2 - 5x + 6 has roots 2, 3
        let m = RatMatrix::from_int_rows(&[vec![2, 0], vec![0, 3]]);
        let cp = m.char_poly();
        assert_eq!(cp, vec![rat_int(6), rat_int(-5), rat_int(1)]);
        assert_eq!(integer_roots(&cp, 10), vec![(2, 1), (3, 1)]);
    }

    #[test]
    fn affine_solution_structure() {
        // x + y = 3, with z free
        let rows = vec![vec![rat_int(1), rat_int(1), rat_int(0), rat_int(3)]];
        match solve_affine(&rows, 3) {
            LinearOutcome::Solved(sol) => {
                assert_eq!(sol.pivot_cols, vec![0]);
                assert_eq!(sol.free_cols, vec![1, 2]);
                assert!(sol.contains(&[rat_int(1), rat_int(2), rat_int(9)]));
                assert!(!sol.contains(&[rat_int(1), rat_int(1), rat_int(0)]));
            }
            _ => panic!("expected solution"),
        }
    }

    #[test]
    fn inconsistency_combination() {
        let rows = vec![
            vec![rat_int(1), rat_int(1), rat_int(1)],
            vec![rat_int(2), rat_int(2), rat_int(5)],
        ];
        match solve_affine(&rows, 2) {
            LinearOutcome::Inconsistent { combination } => {
                // combination . rows must zero out coefficients, not rhs
                let lhs0 = &combination[0] * &rows[0][0] + &combination[1] * &rows[1][0];
                let rhs = &combination[0] * &rows[0][2] + &combination[1] * &rows[1][2];
                assert!(lhs0.is_zero());
                assert!(!rhs.is_zero());
            }
            _ => panic!("expected inconsistency"),
        }
    }

    #[test]
    fn eig_2x2() {
        assert_eq!(int_2x2_eigenvalues([[2, 18], [6, 14]]), Some([20, -4]));
        assert_eq!(int_2x2_eigenvalues([[12, 18], [6, 24]]), Some([30, 6]));
    }

    proptest! {
        // Bareiss elimination and rational RREF agree on the rank.
        #[test]
        fn bareiss_matches_rref(seed in proptest::collection::vec(-5i64..6, 20)) {
            let rows: Vec<Vec<i64>> = seed.chunks(5).map(|c| c.to_vec()).collect();
            let rref_rank = RatMatrix::from_int_rows(&rows).rank();
            let ints: Vec<Vec<BigInt>> = rows
                .iter()
                .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
                .collect();
            prop_assert_eq!(bareiss_rank(ints), rref_rank);
        }

        // Every vector produced from the solution parametrization satisfies
        // the original equations.
        #[test]
        fn solution_satisfies_system(seed in proptest::collection::vec(-4i64..5, 12), t1 in -3i64..4, t2 in -3i64..4) {
            let rows: Vec<Vec<Rat>> = seed.chunks(4).map(|c| c.iter().map(|&v| rat_int(v)).collect()).collect();
            if let LinearOutcome::Solved(sol) = solve_affine(&rows, 3) {
                let params = [rat_int(t1), rat_int(t2)];
                let mut point = sol.particular.clone();
                for (b, t) in sol.basis.iter().zip(params.iter()) {
                    for (p, bv) in point.iter_mut().zip(b) {
                        *p += bv * t;
                    }
                }
                for r in &rows {
                    let lhs: Rat = (0..3).map(|j| &r[j] * &point[j]).sum();
                    prop_assert_eq!(lhs, r[3].clone());
                }
                prop_assert!(sol.contains(&point));
            }
        }
    }
}
