//! Eigenmatrices, Krein parameters and the spherical embedding, all in
//! exact rational arithmetic.
//!
//! Candidate eigenmatrices are not eigendecomposed but *certified*: with a
//! verified intersection tensor the adjacency matrices A_0..A_d form a basis
//! of the Bose-Mesner algebra (disjoint supports), so the idempotent and
//! annihilation identities reduce to (d+1)-dimensional coefficient
//! identities which are checked exactly. For schemes without a candidate,
//! eigenvalues are read off the intersection algebra of relation 1 and must
//! be integers.

use std::collections::BTreeSet;

use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{PwError, PwResult};
use crate::linalg::{integer_roots, rat_int, solve_affine, LinearOutcome, Rat, RatMatrix};
use crate::scheme::{AssociationScheme, IntersectionTensor};

#[derive(Clone)]
pub struct Eigenmatrices {
    /// P[(i, j)]: eigenvalue of A_j on the i-th eigenspace; row 0 = valencies.
    pub p: RatMatrix,
    /// Q[(j, i)]: idempotent coordinates, E_i = |X|^-1 sum_j Q[(j,i)] A_j;
    /// row 0 = multiplicities.
    pub q: RatMatrix,
    pub mults: Vec<u64>,
}

fn rat_u(n: u64) -> Rat {
    rat_int(n as i64)
}

/// The closed-form eigenmatrices of the Penttila-Williford scheme.
pub fn pw_eigenmatrices(r: u64) -> Eigenmatrices {
    let ri = r as i64;
    let p = RatMatrix::from_int_rows(&[
        vec![
            1,
            (ri - 1) * (ri * ri + 1),
            ri * (ri - 2) * (ri * ri + 1),
            (ri - 1) * (ri * ri + 1),
            1,
        ],
        vec![1, ri * ri + 1, 0, -(ri * ri + 1), -1],
        vec![1, ri - 1, -2 * ri, ri - 1, 1],
        vec![1, -ri + 1, 0, ri - 1, -1],
        vec![
            1,
            -(ri - 1) * (ri - 1),
            2 * ri * (ri - 2),
            -(ri - 1) * (ri - 1),
            1,
        ],
    ]);
    let half = |n: i64| Rat::new(n.into(), 2.into());
    let q_rows = vec![
        vec![
            rat_int(1),
            half(ri * (ri - 1) * (ri - 1)),
            half((ri - 2) * (ri + 1) * (ri * ri + 1)),
            half(ri * (ri - 1) * (ri * ri + 1)),
            half(ri * (ri * ri + 1)),
        ],
        vec![
            rat_int(1),
            half(ri * (ri - 1)),
            half((ri - 2) * (ri + 1)),
            half(-ri * (ri - 1)),
            half(-ri * (ri - 1)),
        ],
        vec![
            rat_int(1),
            rat_int(0),
            rat_int(-(ri + 1)),
            rat_int(0),
            rat_int(ri),
        ],
        vec![
            rat_int(1),
            half(-ri * (ri - 1)),
            half((ri - 2) * (ri + 1)),
            half(ri * (ri - 1)),
            half(-ri * (ri - 1)),
        ],
        vec![
            rat_int(1),
            half(-ri * (ri - 1) * (ri - 1)),
            half((ri - 2) * (ri + 1) * (ri * ri + 1)),
            half(-ri * (ri - 1) * (ri * ri + 1)),
            half(ri * (ri * ri + 1)),
        ],
    ];
    let q = RatMatrix::from_rows(q_rows);
    let mults = (0..5)
        .map(|i| q[(0, i)].to_integer().to_u64().expect("positive multiplicity"))
        .collect();
    Eigenmatrices { p, q, mults }
}

/// Full exact certificate for candidate eigenmatrices against a *verified*
/// intersection tensor: PQ = QP = |X| I, row/column normalizations, column
/// orthogonality, idempotency E_a E_b = delta E_a, resolution of identity,
/// and the annihilation identities A_j E_a = P_{aj} E_a.
pub fn verify_eigenmatrices(
    tensor: &IntersectionTensor,
    valencies: &[u64],
    eig: &Eigenmatrices,
) -> PwResult<()> {
    let d = tensor.classes();
    let n: u64 = valencies.iter().sum();
    let nrat = rat_u(n);
    let p = &eig.p;
    let q = &eig.q;
    if p.rows != d + 1 || p.cols != d + 1 || q.rows != d + 1 || q.cols != d + 1 {
        return Err(PwError::Spectral("eigenmatrix dimensions".into()));
    }

    let pq = p.mul(q);
    let qp = q.mul(p);
    let scaled_id = RatMatrix::identity(d + 1).scale(&nrat);
    if pq != scaled_id {
        return Err(PwError::Spectral("PQ != |X| I".into()));
    }
    if qp != scaled_id {
        return Err(PwError::Spectral("QP != |X| I".into()));
    }

    for j in 0..=d {
        if p[(0, j)] != rat_u(valencies[j]) {
            return Err(PwError::Spectral(format!(
                "P row 0 entry {j} is {} but valency is {}",
                p[(0, j)],
                valencies[j]
            )));
        }
        if p[(j, 0)] != rat_int(1) || q[(j, 0)] != rat_int(1) {
            return Err(PwError::Spectral("column 0 of P and Q must be all ones".into()));
        }
        if q[(0, j)] != rat_u(eig.mults[j]) {
            return Err(PwError::Spectral("Q row 0 must equal the multiplicities".into()));
        }
    }
    if eig.mults.iter().sum::<u64>() != n {
        return Err(PwError::Spectral("multiplicities do not sum to |X|".into()));
    }

    // Column orthogonality n_j Q_{ji} = m_i P_{ij}.
    for i in 0..=d {
        for j in 0..=d {
            if rat_u(valencies[j]) * &q[(j, i)] != rat_u(eig.mults[i]) * &p[(i, j)] {
                return Err(PwError::Spectral(format!(
                    "column orthogonality fails at (i, j) = ({i}, {j})"
                )));
            }
        }
    }

    // Idempotency in the A-basis: sum_{i,j} Q_{ia} Q_{jb} p^k_{ij}
    // must equal |X| delta_ab Q_{ka}.
    for a in 0..=d {
        for b in 0..=d {
            for k in 0..=d {
                let mut lhs = Rat::zero();
                for i in 0..=d {
                    for j in 0..=d {
                        let pk = tensor.get(k, i, j);
                        if pk != 0 {
                            lhs += &q[(i, a)] * &q[(j, b)] * rat_u(pk);
                        }
                    }
                }
                let rhs = if a == b {
                    &nrat * &q[(k, a)]
                } else {
                    Rat::zero()
                };
                if lhs != rhs {
                    return Err(PwError::Spectral(format!(
                        "E_{a} E_{b} != {} E_{a} at A_{k} coefficient",
                        if a == b { "1" } else { "0" }
                    )));
                }
            }
        }
    }

    // Resolution of identity: sum_a E_a = A_0.
    for k in 0..=d {
        let sum: Rat = (0..=d).map(|a| q[(k, a)].clone()).sum();
        let rhs = if k == 0 { nrat.clone() } else { Rat::zero() };
        if sum != rhs {
            return Err(PwError::Spectral("sum of idempotents is not the identity".into()));
        }
    }

    // Annihilation: sum_i p^k_{ji} Q_{ia} = P_{aj} Q_{ka}.
    for a in 0..=d {
        for j in 0..=d {
            for k in 0..=d {
                let mut lhs = Rat::zero();
                for i in 0..=d {
                    let pk = tensor.get(k, j, i);
                    if pk != 0 {
                        lhs += rat_u(pk) * &q[(i, a)];
                    }
                }
                if lhs != &p[(a, j)] * &q[(k, a)] {
                    return Err(PwError::Spectral(format!(
                        "A_{j} E_{a} != P[{a},{j}] E_{a} at A_{k} coefficient"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Eigenmatrices for an abstract scheme: eigenvalues of relation 1 from its
/// intersection algebra. Requires the minimal polynomial to split over the
/// rationals with d+1 distinct roots (relation 1 generates the algebra);
/// anything else is rejected.
pub fn eigenmatrices_from_tensor(
    tensor: &IntersectionTensor,
    valencies: &[u64],
) -> PwResult<Eigenmatrices> {
    let d = tensor.classes();
    let n: u64 = valencies.iter().sum();
    // M[j][k] = p^k_{1j}: the matrix of "multiply by A_1" on the A-basis,
    // acting on eigen-rows u by (M u)_j = sum_k p^k_{1j} u_k = theta u_j.
    let mut m = RatMatrix::zeros(d + 1, d + 1);
    for j in 0..=d {
        for k in 0..=d {
            m[(j, k)] = rat_u(tensor.get(k, 1, j));
        }
    }
    let cp = m.char_poly();
    let bound = valencies[1] as i64;
    let roots = integer_roots(&cp, bound);
    let total: usize = roots.iter().map(|&(_, m)| m).sum();
    if total != d + 1 {
        return Err(PwError::Spectral(format!(
            "characteristic polynomial of the relation-1 algebra has {total} integer roots \
             (with multiplicity) out of {}; irrational or repeated eigenvalues are out of scope",
            d + 1
        )));
    }
    if roots.len() != d + 1 {
        return Err(PwError::Spectral(
            "relation 1 does not generate the algebra (repeated eigenvalues)".into(),
        ));
    }
    let mut rows: Vec<(i64, Vec<Rat>)> = Vec::new();
    for &(theta, _) in &roots {
        let mut hom = Vec::new();
        for j in 0..=d {
            let mut row: Vec<Rat> = (0..=d).map(|k| m[(j, k)].clone()).collect();
            row[j] -= rat_int(theta);
            row.push(Rat::zero());
            hom.push(row);
        }
        let sol = match solve_affine(&hom, d + 1) {
            LinearOutcome::Solved(s) => s,
            LinearOutcome::Inconsistent { .. } => unreachable!("homogeneous system"),
        };
        if sol.basis.len() != 1 {
            return Err(PwError::Spectral(format!(
                "eigenvalue {theta} has a {}-dimensional eigenspace in the algebra",
                sol.basis.len()
            )));
        }
        let v = &sol.basis[0];
        if v[0].is_zero() {
            return Err(PwError::Spectral(
                "eigen-row cannot be normalized at coordinate 0".into(),
            ));
        }
        let scale = v[0].recip();
        rows.push((theta, v.iter().map(|x| x * &scale).collect()));
    }
    // Row 0 must be the valency row; remaining rows in descending eigenvalue
    // order, matching the usual presentation.
    let val_row: Vec<Rat> = valencies.iter().map(|&v| rat_u(v)).collect();
    let pos = rows
        .iter()
        .position(|(_, row)| *row == val_row)
        .ok_or_else(|| PwError::Spectral("no eigen-row equals the valency vector".into()))?;
    let first = rows.remove(pos);
    rows.sort_by(|a, b| b.0.cmp(&a.0));
    let mut ordered = vec![first];
    ordered.extend(rows);
    let p = RatMatrix::from_rows(ordered.into_iter().map(|(_, r)| r).collect());
    let q = p
        .inverse()
        .ok_or_else(|| PwError::Spectral("P is singular".into()))?
        .scale(&rat_u(n));
    let mut mults = Vec::with_capacity(d + 1);
    for i in 0..=d {
        let mv = &q[(0, i)];
        if !mv.is_integer() || mv.is_negative() || mv.is_zero() {
            return Err(PwError::Spectral(format!(
                "multiplicity {i} = {mv} is not a positive integer"
            )));
        }
        mults.push(mv.to_integer().to_u64().unwrap());
    }
    let eig = Eigenmatrices { p, q, mults };
    verify_eigenmatrices(tensor, valencies, &eig)?;
    Ok(eig)
}

// ---------------------------------------------------------------------------
// Krein parameters
// ---------------------------------------------------------------------------

#[derive(Clone)]
pub struct KreinTensor {
    d: usize,
    vals: Vec<Rat>,
}

impl KreinTensor {
    pub fn classes(&self) -> usize {
        self.d
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> &Rat {
        &self.vals[(k * (self.d + 1) + i) * (self.d + 1) + j]
    }

    /// Zero entries with all of i, j, k in 1..=d.
    pub fn vanishing_triples(&self) -> BTreeSet<(usize, usize, usize)> {
        let mut out = BTreeSet::new();
        for i in 1..=self.d {
            for j in 1..=self.d {
                for k in 1..=self.d {
                    if self.get(k, i, j).is_zero() {
                        out.insert((i, j, k));
                    }
                }
            }
        }
        out
    }
}

/// q^k_{ij} = |X|^-1 sum_l Q_{li} Q_{lj} P_{kl}; any negative entry is an
/// error (the input was not an association scheme).
pub fn krein_parameters(eig: &Eigenmatrices, n: u64) -> PwResult<KreinTensor> {
    let d = eig.p.rows - 1;
    let nrat = rat_u(n);
    let mut vals = Vec::with_capacity((d + 1).pow(3));
    for k in 0..=d {
        for i in 0..=d {
            for j in 0..=d {
                let mut s = Rat::zero();
                for l in 0..=d {
                    s += &eig.q[(l, i)] * &eig.q[(l, j)] * &eig.p[(k, l)];
                }
                let v = s / &nrat;
                if v.is_negative() {
                    return Err(PwError::Spectral(format!(
                        "negative Krein parameter q^{k}_{{{i},{j}}} = {v}"
                    )));
                }
                vals.push(v);
            }
        }
    }
    Ok(KreinTensor { d, vals })
}

fn orbit(seeds: &[(usize, usize, usize)]) -> BTreeSet<(usize, usize, usize)> {
    let mut out = BTreeSet::new();
    for &(a, b, c) in seeds {
        for perm in [
            (a, b, c),
            (a, c, b),
            (b, a, c),
            (b, c, a),
            (c, a, b),
            (c, b, a),
        ] {
            out.insert(perm);
        }
    }
    out
}

/// The vanishing triples used in the triple-system derivation: (i, j, k)
/// meaning q^k_{ij} = 0, closed under all permutations (m_k q^k_{ij} is
/// fully symmetric for a symmetric scheme, so the orbit closure is sound).
pub fn pw_krein_vanishing() -> BTreeSet<(usize, usize, usize)> {
    orbit(&[
        (1, 1, 1),
        (1, 3, 1),
        (1, 4, 1),
        (1, 2, 2),
        (1, 4, 2),
        (1, 3, 3),
        (1, 4, 4),
    ])
}

/// The complete zero set of the Krein tensor on 1..=4 indices: the scheme is
/// Q-bipartite, so every triple with i+j+k odd vanishes, and the orbit of
/// (1, 1, 4) vanishes on top of the parity pattern. This strictly contains
/// [`pw_krein_vanishing`].
pub fn pw_krein_zero_closure() -> BTreeSet<(usize, usize, usize)> {
    let mut out = BTreeSet::new();
    for i in 1..=4usize {
        for j in 1..=4usize {
            for k in 1..=4usize {
                if (i + j + k) % 2 == 1 {
                    out.insert((i, j, k));
                }
            }
        }
    }
    out.extend(orbit(&[(1, 1, 4)]));
    out
}

// ---------------------------------------------------------------------------
// Spherical embedding Gram matrix
// ---------------------------------------------------------------------------

pub struct SphericalGram {
    /// Inner product value per relation class: Q_{i1} + Q_{i4}.
    pub class_values: Vec<Rat>,
    /// Exact rank of the |X| x |X| Gram matrix.
    pub rank: usize,
    /// Independent RREF rank when the matrix is small enough to afford it.
    pub rref_rank: Option<usize>,
    /// Positive semidefiniteness, certified by G^2 = |X| G with G symmetric
    /// (all eigenvalues in {0, |X|}).
    pub psd: bool,
}

const RREF_RANK_LIMIT: usize = 200;

/// Gram matrix of the projections into eigenspaces 1 and 4, scaled by |X|:
/// entries depend only on the relation class. The rank is obtained exactly
/// from the idempotent identity G^2 = |X| G (eigenvalues 0 or |X|, so
/// rank = trace / |X|), cross-checked by rational elimination on small
/// instances.
pub fn spherical_gram(scheme: &AssociationScheme, eig: &Eigenmatrices) -> PwResult<SphericalGram> {
    let d = scheme.classes();
    let n = scheme.size();
    let class_values: Vec<Rat> = (0..=d)
        .map(|i| &eig.q[(i, 1)] + &eig.q[(i, 4)])
        .collect();
    // Common denominator 2 clears all entries for the PW matrices; scale by
    // the actual lcm of denominators to stay general.
    let mut denom = num_bigint::BigInt::from(1);
    for v in &class_values {
        denom = num_integer::lcm(denom.clone(), v.denom().clone());
    }
    let scaled: Vec<i64> = class_values
        .iter()
        .map(|v| {
            (v * Rat::from_integer(denom.clone()))
                .to_integer()
                .to_i64()
                .ok_or_else(|| PwError::Spectral("gram entry overflow".into()))
        })
        .collect::<PwResult<Vec<i64>>>()?;
    let scale = denom.to_i64().ok_or_else(|| PwError::Spectral("gram scale overflow".into()))?;

    // g[x][y] = scale * gram(x, y), integral.
    let row_of = |x: u32| -> Vec<i64> {
        scheme
            .relation_row(x)
            .iter()
            .map(|&c| scaled[c as usize])
            .collect()
    };
    // Verify (scale G)^2 == (scale |X|) (scale G) row by row.
    let rows: Vec<Vec<i64>> = (0..n as u32).map(row_of).collect();
    let target = scale * n as i64;
    for x in 0..n {
        for y in 0..n {
            let mut acc: i64 = 0;
            for z in 0..n {
                acc += rows[x][z] * rows[z][y];
            }
            if acc != target * rows[x][y] {
                return Err(PwError::Spectral(format!(
                    "gram idempotent identity fails at ({x}, {y})"
                )));
            }
        }
    }
    let trace: i64 = (0..n).map(|x| rows[x][x]).sum();
    if trace % target != 0 {
        return Err(PwError::Spectral("gram trace not divisible by |X|".into()));
    }
    let rank = (trace / target) as usize;

    let rref_rank = if n <= RREF_RANK_LIMIT {
        let mat = RatMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| rat_int(v)).collect())
                .collect(),
        );
        Some(mat.rank())
    } else {
        None
    };
    if let Some(rr) = rref_rank {
        if rr != rank {
            return Err(PwError::Spectral(format!(
                "gram rank disagreement: idempotent route {rank}, elimination {rr}"
            )));
        }
    }
    Ok(SphericalGram {
        class_values,
        rank,
        rref_rank,
        psd: true,
    })
}

/// Rank of the Gram submatrix on {x} ∪ R_3(x): whether the embedded vectors
/// of x and its 3-neighbors span the (n_3 + 1)-dimensional eigenspace sum.
/// Reported as a value, with no expected answer attached.
pub fn embedding_basis_rank(scheme: &AssociationScheme, eig: &Eigenmatrices, x: u32) -> usize {
    let d = scheme.classes();
    let class_values: Vec<Rat> = (0..=d)
        .map(|i| &eig.q[(i, 1)] + &eig.q[(i, 4)])
        .collect();
    let mut members = vec![x];
    members.extend(scheme.neighbors(x, 3));
    let rows: Vec<Vec<Rat>> = members
        .iter()
        .map(|&a| {
            members
                .iter()
                .map(|&b| class_values[scheme.relation(a, b) as usize].clone())
                .collect()
        })
        .collect();
    crate::linalg::rational_rank_bareiss(&rows)
}
