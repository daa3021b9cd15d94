//! Triple intersection numbers: the 64-unknown linear systems attached to a
//! triple of relation classes, their exact solution spaces, the
//! nonnegativity propagation rule, and the brute-force counting oracle.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{PwError, PwResult};
use crate::linalg::{rat_int, rat_str, solve_affine, AffineSolution, LinearOutcome, Rat};
use crate::scheme::{AssociationScheme, IntersectionTensor};
use crate::spectral::Eigenmatrices;

pub const UNKNOWNS: usize = 64;

/// Unknown [l m n] with l, m, n in 1..=4, at index (l-1)*16 + (m-1)*4 + (n-1).
#[inline]
pub fn unknown_index(l: usize, m: usize, n: usize) -> usize {
    debug_assert!((1..=4).contains(&l) && (1..=4).contains(&m) && (1..=4).contains(&n));
    (l - 1) * 16 + (m - 1) * 4 + (n - 1)
}

pub fn unknown_triple(idx: usize) -> (usize, usize, usize) {
    (idx / 16 + 1, (idx / 4) % 4 + 1, idx % 4 + 1)
}

pub fn unknown_name(idx: usize) -> String {
    let (l, m, n) = unknown_triple(idx);
    format!("[{l} {m} {n}]")
}

#[derive(Clone, Copy, Default)]
pub struct SystemOptions {
    /// Add [l m n] = [sigma(l) sigma(m) sigma(n)] identities for the
    /// symmetry group induced by coinciding classes (full S3 when A = B = C).
    pub symmetry: bool,
    /// Add the vanishing-Krein equations.
    pub krein: bool,
}

pub struct TripleSystem {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    /// Augmented rows [coefficients | rhs], 65 wide.
    pub rows: Vec<Vec<Rat>>,
    pub sum_rows: usize,
    pub symmetry_rows: usize,
    pub krein_rows: usize,
    pub symmetry_used: bool,
    pub krein_used: bool,
}

/// The (r, s, t) tuples whose vanishing-Krein equations are added: every
/// vanishing Krein triple of the scheme (the Q-bipartite parity pattern
/// plus the orbit of (1,1,4); 35 tuples). Feeding only the subset quoted in
/// the usual derivation leaves a 4-dimensional rational solution space in
/// which the zero-forcing dependencies do not yet hold; the full zero set
/// cuts it to the expected one-parameter line.
pub fn krein_equation_tuples() -> Vec<(usize, usize, usize)> {
    crate::spectral::pw_krein_zero_closure().into_iter().collect()
}

/// Builds the linear system for the ordered class triple (A, B, C): the 48
/// sum equations, optional symmetry identities, optional vanishing-Krein
/// rows (which require eigenmatrices).
pub fn build_system(
    tensor: &IntersectionTensor,
    eig: Option<&Eigenmatrices>,
    a: usize,
    b: usize,
    c: usize,
    opts: SystemOptions,
) -> PwResult<TripleSystem> {
    let d = tensor.classes();
    for cls in [a, b, c] {
        if cls < 1 || cls > d {
            return Err(PwError::BadClassIndex(cls, d));
        }
    }
    if d != 4 {
        return Err(PwError::BadClassIndex(d, 4));
    }
    let delta = |x: usize, y: usize| -> i64 { i64::from(x == y) };
    let mut rows: Vec<Vec<Rat>> = Vec::new();

    // sum_l [l m n] = p^B_{mn} - delta_{mA} delta_{nC}
    for m in 1..=4 {
        for n in 1..=4 {
            let mut row = vec![Rat::zero(); UNKNOWNS + 1];
            for l in 1..=4 {
                row[unknown_index(l, m, n)] = rat_int(1);
            }
            row[UNKNOWNS] = rat_int(tensor.get(b, m, n) as i64 - delta(m, a) * delta(n, c));
            rows.push(row);
        }
    }
    // sum_m [l m n] = p^C_{ln} - delta_{lA} delta_{nB}
    for l in 1..=4 {
        for n in 1..=4 {
            let mut row = vec![Rat::zero(); UNKNOWNS + 1];
            for m in 1..=4 {
                row[unknown_index(l, m, n)] = rat_int(1);
            }
            row[UNKNOWNS] = rat_int(tensor.get(c, l, n) as i64 - delta(l, a) * delta(n, b));
            rows.push(row);
        }
    }
    // sum_n [l m n] = p^A_{lm} - delta_{lC} delta_{mB}
    for l in 1..=4 {
        for m in 1..=4 {
            let mut row = vec![Rat::zero(); UNKNOWNS + 1];
            for n in 1..=4 {
                row[unknown_index(l, m, n)] = rat_int(1);
            }
            row[UNKNOWNS] = rat_int(tensor.get(a, l, m) as i64 - delta(l, c) * delta(m, b));
            rows.push(row);
        }
    }
    let sum_rows = rows.len();

    let mut symmetry_rows = 0;
    if opts.symmetry {
        // Reordering the base triple maps the system onto itself whenever
        // the touched classes coincide: A=B allows swapping positions 1 and
        // 3, B=C positions 1 and 2, A=C positions 2 and 3. Close the
        // applicable transpositions into a group and identify orbits.
        let mut gens: Vec<[usize; 3]> = Vec::new();
        if a == b {
            gens.push([2, 1, 0]);
        }
        if b == c {
            gens.push([1, 0, 2]);
        }
        if a == c {
            gens.push([0, 2, 1]);
        }
        let mut group: BTreeSet<[usize; 3]> = BTreeSet::new();
        group.insert([0, 1, 2]);
        loop {
            let mut grew = false;
            let current: Vec<[usize; 3]> = group.iter().copied().collect();
            for g in &gens {
                for h in &current {
                    let composed = [h[g[0]], h[g[1]], h[g[2]]];
                    if group.insert(composed) {
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }
        // One identity per unknown linking it to its orbit representative.
        for idx in 0..UNKNOWNS {
            let (l, m, n) = unknown_triple(idx);
            let t = [l, m, n];
            let rep = group
                .iter()
                .map(|sigma| unknown_index(t[sigma[0]], t[sigma[1]], t[sigma[2]]))
                .min()
                .unwrap();
            if rep != idx {
                let mut row = vec![Rat::zero(); UNKNOWNS + 1];
                row[idx] = rat_int(1);
                row[rep] = rat_int(-1);
                rows.push(row);
                symmetry_rows += 1;
            }
        }
    }

    let mut krein_rows = 0;
    if opts.krein {
        let eig = eig.ok_or_else(|| {
            PwError::MissingPrerequisite("krein rows need eigenmatrices".into())
        })?;
        let q = &eig.q;
        for (r, s, t) in krein_equation_tuples() {
            let mut row = vec![Rat::zero(); UNKNOWNS + 1];
            for l in 1..=4 {
                for m in 1..=4 {
                    for n in 1..=4 {
                        row[unknown_index(l, m, n)] = &q[(l, r)] * &q[(m, s)] * &q[(n, t)];
                    }
                }
            }
            let rhs = -(&q[(0, r)] * &q[(a, s)] * &q[(c, t)])
                - (&q[(a, r)] * &q[(0, s)] * &q[(b, t)])
                - (&q[(c, r)] * &q[(b, s)] * &q[(0, t)]);
            row[UNKNOWNS] = rhs;
            rows.push(row);
            krein_rows += 1;
        }
    }

    Ok(TripleSystem {
        a,
        b,
        c,
        rows,
        sum_rows,
        symmetry_rows,
        krein_rows,
        symmetry_used: opts.symmetry,
        krein_used: opts.krein,
    })
}

/// The solved system: particular + null-space basis, plus the unknowns the
/// equations already force to constants.
pub struct SolutionSpace {
    pub solution: AffineSolution,
    pub pinned: BTreeMap<usize, Rat>,
}

impl SolutionSpace {
    fn from_affine(solution: AffineSolution) -> Self {
        let pinned = solution.pinned().into_iter().collect();
        SolutionSpace { solution, pinned }
    }

    /// Affine function of one unknown over the free parameters.
    pub fn function_of(&self, v: usize) -> (Rat, Vec<Rat>) {
        self.solution.affine_function(v)
    }

    pub fn functions_equal(&self, u: usize, v: usize) -> bool {
        self.function_of(u) == self.function_of(v)
    }

    /// True when the function of v equals c times the function of u.
    pub fn function_is_multiple(&self, v: usize, u: usize, c: &Rat) -> bool {
        let (ku, fu) = self.function_of(u);
        let (kv, fv) = self.function_of(v);
        kv == &ku * c && fu.iter().zip(&fv).all(|(a, b)| b == &(a * c))
    }
}

pub fn solve(system: &TripleSystem) -> PwResult<SolutionSpace> {
    match solve_affine(&system.rows, UNKNOWNS) {
        LinearOutcome::Solved(sol) => Ok(SolutionSpace::from_affine(sol)),
        LinearOutcome::Inconsistent { combination } => {
            let involved: Vec<String> = combination
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(i, c)| format!("{} x row {i}", rat_str(c)))
                .collect();
            Err(PwError::InconsistentSystem(format!(
                "row combination [{}] reduces to 0 = nonzero",
                involved.join(", ")
            )))
        }
    }
}

pub struct PropagationOutcome {
    pub space: SolutionSpace,
    /// Unknowns newly forced to a constant by the rule (with their values).
    pub newly_pinned: BTreeMap<usize, Rat>,
    pub iterations: usize,
}

impl std::fmt::Debug for PropagationOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "PropagationOutcome(newly_pinned={:?}, iterations={})",
            self.newly_pinned
                .iter()
                .map(|(k, v)| (unknown_name(*k), rat_str(v)))
                .collect::<Vec<_>>(),
            self.iterations
        )
    }
}

/// Nonnegativity propagation: the unknowns are counts, so whenever two of
/// them satisfy v = -c u with c > 0 across the whole solution space, both
/// must vanish. Pins are added as equations and the system re-solved until
/// no pair fires. A pair involving an unknown already pinned to a nonzero
/// constant is a contradiction.
pub fn nonneg_propagate(
    system: &TripleSystem,
    space: &SolutionSpace,
) -> PwResult<PropagationOutcome> {
    let mut rows = system.rows.clone();
    let mut current = SolutionSpace::from_affine(space.solution.clone());
    let before: BTreeMap<usize, Rat> = current.pinned.clone();
    let mut iterations = 0;
    loop {
        let mut fired = None;
        'search: for u in 0..UNKNOWNS {
            let (ku, fu) = current.function_of(u);
            let u_zero = ku.is_zero() && fu.iter().all(|x| x.is_zero());
            if u_zero {
                continue;
            }
            for v in 0..UNKNOWNS {
                if v == u {
                    continue;
                }
                // candidate c from the first nonzero coordinate of f_u
                let (kv, fv) = current.function_of(v);
                let c = if !ku.is_zero() {
                    -(&kv / &ku)
                } else {
                    let pos = fu.iter().position(|x| !x.is_zero()).unwrap();
                    -(&fv[pos] / &fu[pos])
                };
                if !c.is_positive() {
                    continue;
                }
                let neg_c = -c.clone();
                if kv != &ku * &neg_c || fu.iter().zip(&fv).any(|(a, b)| b != &(a * &neg_c)) {
                    continue;
                }
                fired = Some((u, v, c));
                break 'search;
            }
        }
        let Some((u, v, _c)) = fired else { break };
        iterations += 1;
        // An unknown already constant and nonzero cannot be re-pinned to 0.
        for w in [u, v] {
            let (k, f) = current.function_of(w);
            if f.iter().all(|x| x.is_zero()) && !k.is_zero() {
                return Err(PwError::PinContradiction {
                    unknown: unknown_name(w),
                    existing: rat_str(&k),
                    new: "0/1".into(),
                });
            }
        }
        for w in [u, v] {
            let mut row = vec![Rat::zero(); UNKNOWNS + 1];
            row[w] = rat_int(1);
            rows.push(row);
        }
        match solve_affine(&rows, UNKNOWNS) {
            LinearOutcome::Solved(sol) => current = SolutionSpace::from_affine(sol),
            LinearOutcome::Inconsistent { .. } => {
                return Err(PwError::PinContradiction {
                    unknown: unknown_name(u),
                    existing: "non-constant".into(),
                    new: "0/1".into(),
                });
            }
        }
    }
    let newly_pinned = current
        .pinned
        .iter()
        .filter(|(k, _)| !before.contains_key(*k))
        .map(|(k, v)| (*k, v.clone()))
        .collect();
    Ok(PropagationOutcome {
        space: current,
        newly_pinned,
        iterations,
    })
}

/// Brute-force triple counts: entry [l m n] is the number of z with
/// (x, z) in R_l, (y, z) in R_m, (u, z) in R_n.
pub fn triple_numbers_bruteforce(
    scheme: &AssociationScheme,
    x: u32,
    y: u32,
    u: u32,
) -> [u64; UNKNOWNS] {
    let mut counts = [0u64; UNKNOWNS];
    let rx = scheme.relation_row(x);
    let ry = scheme.relation_row(y);
    let ru = scheme.relation_row(u);
    for z in 0..scheme.size() {
        let (l, m, n) = (rx[z] as usize, ry[z] as usize, ru[z] as usize);
        if l >= 1 && m >= 1 && n >= 1 {
            counts[unknown_index(l, m, n)] += 1;
        }
    }
    counts
}

/// Checks a brute-force count vector against every equation of the system;
/// returns the first violated row if any.
pub fn check_counts_in_system(system: &TripleSystem, counts: &[u64; UNKNOWNS]) -> Option<usize> {
    ScaledRows::from_system(system).check(counts)
}

/// Integer-scaled view of the system rows: each row is multiplied by the
/// lcm of its denominators once, so count vectors can be substituted with
/// plain i128 arithmetic in bulk sweeps.
pub struct ScaledRows {
    rows: Vec<(Vec<i128>, i128)>,
}

impl ScaledRows {
    pub fn from_system(system: &TripleSystem) -> Self {
        use num_bigint::BigInt;
        use num_traits::ToPrimitive;
        let rows = system
            .rows
            .iter()
            .map(|row| {
                let mut denom = BigInt::from(1);
                for v in row {
                    denom = num_integer::lcm(denom, v.denom().clone());
                }
                let scale = Rat::from_integer(denom);
                let ints: Vec<i128> = row
                    .iter()
                    .map(|v| {
                        (v * &scale)
                            .to_integer()
                            .to_i128()
                            .expect("scaled coefficient fits i128")
                    })
                    .collect();
                let rhs = ints[UNKNOWNS];
                (ints[..UNKNOWNS].to_vec(), rhs)
            })
            .collect();
        ScaledRows { rows }
    }

    pub fn check(&self, counts: &[u64; UNKNOWNS]) -> Option<usize> {
        for (ri, (coeffs, rhs)) in self.rows.iter().enumerate() {
            let mut lhs: i128 = 0;
            for (c, &v) in coeffs.iter().zip(counts.iter()) {
                if *c != 0 && v != 0 {
                    lhs += c * v as i128;
                }
            }
            if lhs != *rhs {
                return Some(ri);
            }
        }
        None
    }
}

// ---------------------------------------------------------------------------
// Serializable solution document (CLI / bindings surface)
// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct DependencyDoc {
    pub target: String,
    pub constant: String,
    pub terms: Vec<(String, String)>,
}

#[derive(Serialize)]
pub struct SolutionDocument {
    pub format_version: u32,
    pub triple: [usize; 3],
    pub symmetry: bool,
    pub krein: bool,
    pub equations: usize,
    pub pinned: BTreeMap<String, String>,
    pub free: Vec<String>,
    pub dependencies: Vec<DependencyDoc>,
    /// Unknowns pinned only after nonnegativity propagation.
    pub propagated: BTreeMap<String, String>,
}

pub fn solution_document(
    system: &TripleSystem,
    outcome: &PropagationOutcome,
) -> SolutionDocument {
    let space = &outcome.space;
    let pinned = space
        .pinned
        .iter()
        .map(|(k, v)| (unknown_name(*k), rat_str(v)))
        .collect();
    let free = space
        .solution
        .free_cols
        .iter()
        .map(|&c| unknown_name(c))
        .collect();
    let mut dependencies = Vec::new();
    for &p in &space.solution.pivot_cols {
        if space.pinned.contains_key(&p) {
            continue;
        }
        let (k, f) = space.function_of(p);
        let terms: Vec<(String, String)> = space
            .solution
            .free_cols
            .iter()
            .zip(&f)
            .filter(|(_, c)| !c.is_zero())
            .map(|(&fc, c)| (unknown_name(fc), rat_str(c)))
            .collect();
        dependencies.push(DependencyDoc {
            target: unknown_name(p),
            constant: rat_str(&k),
            terms,
        });
    }
    let propagated = outcome
        .newly_pinned
        .iter()
        .map(|(k, v)| (unknown_name(*k), rat_str(v)))
        .collect();
    SolutionDocument {
        format_version: 1,
        triple: [system.a, system.b, system.c],
        symmetry: system.symmetry_used,
        krein: system.krein_used,
        equations: system.rows.len(),
        pinned,
        free,
        dependencies,
        propagated,
    }
}
