//! Association schemes on a dense relation table, the Penttila-Williford
//! scheme on the outer points of the model, the closed-form parameter
//! tables, and the scheme JSON format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PwError, PwResult};
use crate::geometry::{OuterPoints, QuadricModel};
use crate::parallel::run_partitioned;

/// A symmetric association scheme with a dense relation table. Structural
/// invariants (zero diagonal, symmetry, class range, regular valencies) are
/// enforced at construction; well-definedness of the intersection numbers is
/// the separate, exhaustive check in [`intersection_numbers`].
#[derive(Clone, PartialEq, Eq)]
pub struct AssociationScheme {
    n: usize,
    d: usize,
    rel: Vec<u8>,
    valencies: Vec<u64>,
}

impl std::fmt::Debug for AssociationScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "AssociationScheme(n={}, d={}, valencies={:?})",
            self.n, self.d, self.valencies
        )
    }
}

impl AssociationScheme {
    pub fn from_relation_table(n: usize, d: usize, rel: Vec<u8>) -> PwResult<Self> {
        if rel.len() != n * n {
            return Err(PwError::NotAScheme(format!(
                "relation table has {} entries, expected {}",
                rel.len(),
                n * n
            )));
        }
        if d == 0 || d > 255 {
            return Err(PwError::NotAScheme(format!("unsupported class count {d}")));
        }
        for x in 0..n {
            if rel[x * n + x] != 0 {
                return Err(PwError::NotAScheme(format!(
                    "relation({x}, {x}) = {}, expected 0",
                    rel[x * n + x]
                )));
            }
        }
        for x in 0..n {
            for y in (x + 1)..n {
                let a = rel[x * n + y];
                let b = rel[y * n + x];
                if a != b {
                    return Err(PwError::NotAScheme(format!(
                        "relation not symmetric at ({x}, {y}): {a} vs {b}"
                    )));
                }
                if a == 0 || a as usize > d {
                    return Err(PwError::NotAScheme(format!(
                        "relation({x}, {y}) = {a} out of range 1..={d}"
                    )));
                }
            }
        }
        // Regularity: every class has the same row count everywhere.
        let mut valencies = vec![0u64; d + 1];
        {
            let mut counts = vec![0u64; d + 1];
            for y in 0..n {
                counts[rel[y] as usize] += 1;
            }
            valencies.copy_from_slice(&counts);
        }
        for x in 1..n {
            let mut counts = vec![0u64; d + 1];
            for y in 0..n {
                counts[rel[x * n + y] as usize] += 1;
            }
            if counts != valencies {
                return Err(PwError::NotAScheme(format!(
                    "vertex {x} has class counts {counts:?}, vertex 0 has {valencies:?}"
                )));
            }
        }
        Ok(AssociationScheme {
            n,
            d,
            rel,
            valencies,
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn classes(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn relation(&self, x: u32, y: u32) -> u8 {
        self.rel[x as usize * self.n + y as usize]
    }

    pub fn valencies(&self) -> &[u64] {
        &self.valencies
    }

    pub fn relation_row(&self, x: u32) -> &[u8] {
        &self.rel[x as usize * self.n..(x as usize + 1) * self.n]
    }

    /// Neighbors of x in class i, increasing.
    pub fn neighbors(&self, x: u32, i: u8) -> Vec<u32> {
        self.relation_row(x)
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c == i)
            .map(|(y, _)| y as u32)
            .collect()
    }

    /// Per-vertex bitsets of one relation class.
    pub fn class_bitsets(&self, i: u8) -> Vec<crate::bits::BitSet> {
        (0..self.n)
            .map(|x| {
                let mut b = crate::bits::BitSet::new(self.n);
                for (y, &c) in self.relation_row(x as u32).iter().enumerate() {
                    if c == i {
                        b.set(y);
                    }
                }
                b
            })
            .collect()
    }

    /// The unique 4-related partner, for schemes with n_4 = 1.
    pub fn partner(&self, x: u32, class: u8) -> Option<u32> {
        let mut it = self
            .relation_row(x)
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c == class)
            .map(|(y, _)| y as u32);
        let first = it.next()?;
        if it.next().is_some() {
            return None;
        }
        Some(first)
    }
}

/// p^k_{ij} for 0 <= i, j, k <= d.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct IntersectionTensor {
    d: usize,
    p: Vec<u64>,
}

impl IntersectionTensor {
    pub fn new(d: usize) -> Self {
        IntersectionTensor {
            d,
            p: vec![0; (d + 1) * (d + 1) * (d + 1)],
        }
    }

    pub fn classes(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> u64 {
        self.p[(k * (self.d + 1) + i) * (self.d + 1) + j]
    }

    #[inline]
    pub fn set(&mut self, k: usize, i: usize, j: usize, v: u64) {
        self.p[(k * (self.d + 1) + i) * (self.d + 1) + j] = v;
    }
}

/// Computes p^k_{ij} from one base pair per class, then verifies the counts
/// are constant over every base pair; non-constancy means the input was not
/// an association scheme.
pub fn intersection_numbers(
    scheme: &AssociationScheme,
    threads: usize,
) -> PwResult<IntersectionTensor> {
    let n = scheme.n;
    let d = scheme.d;
    let mut tensor = IntersectionTensor::new(d);
    // Base pair per class: first pair found in row-major order.
    let mut base: Vec<Option<(u32, u32)>> = vec![None; d + 1];
    base[0] = Some((0, 0));
    'outer: for x in 0..n as u32 {
        for y in 0..n as u32 {
            let k = scheme.relation(x, y) as usize;
            if base[k].is_none() {
                base[k] = Some((x, y));
                if base.iter().all(|b| b.is_some()) {
                    break 'outer;
                }
            }
        }
    }
    for k in 0..=d {
        let Some((x, y)) = base[k] else {
            return Err(PwError::NotAScheme(format!("relation {k} is empty")));
        };
        for z in 0..n as u32 {
            let i = scheme.relation(x, z) as usize;
            let j = scheme.relation(z, y) as usize;
            tensor.set(k, i, j, tensor.get(k, i, j) + 1);
        }
    }
    // Exhaustive constancy check over all ordered pairs.
    let witness = run_partitioned(n, threads, |range| {
        let mut local: Option<String> = None;
        'rows: for x in range {
            for y in 0..n {
                let k = scheme.rel[x * n + y] as usize;
                let mut counts = vec![0u64; (d + 1) * (d + 1)];
                let row_x = &scheme.rel[x * n..(x + 1) * n];
                for z in 0..n {
                    let i = row_x[z] as usize;
                    let j = scheme.rel[z * n + y] as usize;
                    counts[i * (d + 1) + j] += 1;
                }
                for i in 0..=d {
                    for j in 0..=d {
                        if counts[i * (d + 1) + j] != tensor.get(k, i, j) {
                            local = Some(format!(
                                "p^{k}_{{{i},{j}}} is {} at base pair ({x}, {y}) but {} at the reference pair",
                                counts[i * (d + 1) + j],
                                tensor.get(k, i, j)
                            ));
                            break 'rows;
                        }
                    }
                }
            }
        }
        local
    });
    if let Some(w) = witness.into_iter().flatten().next() {
        return Err(PwError::NotAScheme(w));
    }
    Ok(tensor)
}

/// Recounts p^k_{ij} for one explicit base pair; brute-force oracle used to
/// spot-check the tensor from an independent path.
pub fn recount_base_pair(scheme: &AssociationScheme, x: u32, y: u32) -> Vec<Vec<u64>> {
    let d = scheme.d;
    let mut counts = vec![vec![0u64; d + 1]; d + 1];
    for z in 0..scheme.n as u32 {
        counts[scheme.relation(x, z) as usize][scheme.relation(z, y) as usize] += 1;
    }
    counts
}

// ---------------------------------------------------------------------------
// Penttila-Williford closed forms
// ---------------------------------------------------------------------------

/// Valencies (n_0, ..., n_4) of the Penttila-Williford scheme of parameter r.
pub fn pw_valencies(r: u64) -> [u64; 5] {
    [
        1,
        (r - 1) * (r * r + 1),
        (r * r - 2 * r) * (r * r + 1),
        (r - 1) * (r * r + 1),
        1,
    ]
}

pub fn pw_vertex_count(r: u64) -> u64 {
    r * r * r * r - r * r
}

/// Infers r from a vertex count |X| = r^4 - r^2, if any r >= 3 matches.
pub fn infer_r(n: u64) -> Option<u64> {
    (3..).take_while(|r| pw_vertex_count(*r) <= n).find(|&r| pw_vertex_count(r) == n)
}

/// The full intersection tensor of the Penttila-Williford scheme with
/// parameter r, from the printed closed forms. The (2,2) entry of the p^4
/// table equals n_2 = r(r-2)(r^2+1), forced by the row-sum identity.
pub fn pw_intersection_tensor(r: u64) -> IntersectionTensor {
    let mut t = IntersectionTensor::new(4);
    let nv = pw_valencies(r);
    // k = 0: p^0_{ij} = delta_ij n_i.
    for i in 0..=4 {
        t.set(0, i, i, nv[i]);
    }
    // Boundary entries: p^k_{0j} = delta_{kj}, p^k_{i0} = delta_{ik}.
    for k in 1..=4 {
        t.set(k, 0, k, 1);
        t.set(k, k, 0, 1);
    }
    let ri = r as i64;
    let quart_a = (ri * ri * ri * ri - 4 * ri * ri * ri + 5 * ri * ri - 2 * ri) as u64;
    let quart_b = (ri * ri * ri * ri - 4 * ri * ri * ri + 7 * ri * ri - 8 * ri) as u64;
    let table1: [[u64; 4]; 4] = [
        [r * r, r * r * (r - 2), r - 2, 0],
        [r * r * (r - 2), quart_a, r * r * (r - 2), 0],
        [r - 2, r * r * (r - 2), r * r, 1],
        [0, 0, 1, 0],
    ];
    let c1 = (r - 1) * (r - 1) * (r - 1);
    let table2: [[u64; 4]; 4] = [
        [r * (r - 1), c1, r * (r - 1), 0],
        [c1, quart_b, c1, 1],
        [r * (r - 1), c1, r * (r - 1), 0],
        [0, 1, 0, 0],
    ];
    let table3: [[u64; 4]; 4] = [
        [r - 2, r * r * (r - 2), r * r, 1],
        [r * r * (r - 2), quart_a, r * r * (r - 2), 0],
        [r * r, r * r * (r - 2), r - 2, 0],
        [1, 0, 0, 0],
    ];
    let table4: [[u64; 4]; 4] = [
        [0, 0, (r - 1) * (r * r + 1), 0],
        [0, r * (r - 2) * (r * r + 1), 0, 0],
        [(r - 1) * (r * r + 1), 0, 0, 0],
        [0, 0, 0, 0],
    ];
    for (k, table) in [(1, table1), (2, table2), (3, table3), (4, table4)] {
        for i in 1..=4 {
            for j in 1..=4 {
                t.set(k, i, j, table[i - 1][j - 1]);
            }
        }
    }
    t
}

// ---------------------------------------------------------------------------
// Building the scheme from the model
// ---------------------------------------------------------------------------

/// Classifies an ordered pair of outer points: 0 identity, 3 collinear,
/// 4 equal ovoids, else 1 or 2 by ovoid intersection size 1 or r+1.
pub fn classify_pair(model: &QuadricModel, outer: &OuterPoints, x: u32, y: u32) -> PwResult<u8> {
    if x == y {
        return Ok(0);
    }
    let r = model.q as usize;
    if outer.collinear[x as usize].get(y as usize) {
        return Ok(3);
    }
    if outer.ovoids[x as usize] == outer.ovoids[y as usize] {
        return Ok(4);
    }
    match outer.ovoids[x as usize].intersection_count(&outer.ovoids[y as usize]) {
        1 => Ok(1),
        s if s == r + 1 => Ok(2),
        s => Err(PwError::UnclassifiablePair {
            x,
            y,
            detail: format!("non-collinear pair with ovoid intersection {s}"),
        }),
    }
}

/// The Penttila-Williford scheme on the outer points of the model. Vertex i
/// corresponds to `outer.ids[i]`.
pub fn build_pw_scheme(model: &QuadricModel, outer: &OuterPoints) -> PwResult<AssociationScheme> {
    let n = outer.len();
    let mut rel = vec![0u8; n * n];
    for x in 0..n as u32 {
        for y in (x + 1)..n as u32 {
            let c = classify_pair(model, outer, x, y)?;
            rel[x as usize * n + y as usize] = c;
            rel[y as usize * n + x as usize] = c;
        }
    }
    AssociationScheme::from_relation_table(n, 4, rel)
}

// ---------------------------------------------------------------------------
// Scheme JSON persistence
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SchemeDocument {
    format_version: u32,
    size: usize,
    classes: usize,
    relations: Vec<u8>,
}

pub fn save_scheme(scheme: &AssociationScheme, path: &Path) -> PwResult<()> {
    let doc = SchemeDocument {
        format_version: 1,
        size: scheme.n,
        classes: scheme.d,
        relations: scheme.rel.clone(),
    };
    fs::write(path, serde_json::to_string(&doc)?)?;
    Ok(())
}

/// Loads and validates a scheme file. Validation failures (shape, symmetry,
/// range, regularity) surface as [`PwError::BadSchemeFile`].
pub fn load_scheme(path: &Path) -> PwResult<AssociationScheme> {
    let text = fs::read_to_string(path)?;
    load_scheme_str(&text)
}

pub fn load_scheme_str(text: &str) -> PwResult<AssociationScheme> {
    let doc: SchemeDocument = serde_json::from_str(text)
        .map_err(|e| PwError::BadSchemeFile(format!("malformed json: {e}")))?;
    if doc.format_version != 1 {
        return Err(PwError::BadSchemeFile(format!(
            "unsupported format_version {}",
            doc.format_version
        )));
    }
    AssociationScheme::from_relation_table(doc.size, doc.classes, doc.relations)
        .map_err(|e| PwError::BadSchemeFile(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_elliptic_quadric_gq, build_outer_points, build_parabolic_subgq};

    fn q3_scheme() -> (QuadricModel, OuterPoints, AssociationScheme) {
        let model = build_elliptic_quadric_gq(3, 7).unwrap();
        let sub = build_parabolic_subgq(&model).unwrap();
        let outer = build_outer_points(&model, &sub).unwrap();
        let scheme = build_pw_scheme(&model, &outer).unwrap();
        (model, outer, scheme)
    }

    #[test]
    fn q3_scheme_valencies() {
        let (_, _, scheme) = q3_scheme();
        assert_eq!(scheme.size(), 72);
        assert_eq!(scheme.valencies(), &[1, 20, 30, 20, 1]);
        assert_eq!(pw_valencies(3), [1, 20, 30, 20, 1]);
        assert_eq!(pw_valencies(5), [1, 104, 390, 104, 1]);
    }

    #[test]
    fn q3_antipode_is_relation_4() {
        let (_, outer, scheme) = q3_scheme();
        for x in 0..scheme.size() as u32 {
            let a = outer.antipode_of(x);
            assert_eq!(scheme.relation(x, a), 4);
            assert_eq!(scheme.partner(x, 4), Some(a));
        }
    }

    #[test]
    fn q3_intersection_tensor_matches_expected() {
        let (_, _, scheme) = q3_scheme();
        let tensor = intersection_numbers(&scheme, 1).unwrap();
        let expected = pw_intersection_tensor(3);
        assert_eq!(tensor, expected);
        assert_eq!(tensor.get(3, 3, 3), 1);
        assert_eq!(tensor.get(2, 3, 3), 6);
        assert_eq!(tensor.get(1, 2, 2), 12);
        assert_eq!(tensor.get(2, 2, 2), 12);
        assert_eq!(tensor.get(4, 2, 2), 30);
        // p^4_{13} = n_1 = n_3
        assert_eq!(tensor.get(4, 1, 3), 20);
    }

    #[test]
    fn relation_1_pairs_collinear_with_antipode() {
        let (_, outer, scheme) = q3_scheme();
        for x in 0..scheme.size() as u32 {
            let xa = outer.antipode_of(x);
            for y in 0..scheme.size() as u32 {
                match scheme.relation(x, y) {
                    1 => assert_eq!(scheme.relation(xa, y), 3),
                    2 => assert_eq!(scheme.relation(xa, y), 2),
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn tensor_row_sums() {
        let t = pw_intersection_tensor(5);
        let nv = pw_valencies(5);
        for k in 0..=4 {
            for i in 0..=4 {
                let sum: u64 = (0..=4).map(|j| t.get(k, i, j)).sum();
                assert_eq!(sum, nv[i], "row sum p^{k}_{i},*");
            }
        }
    }

    #[test]
    fn save_load_roundtrip() {
        let (_, _, scheme) = q3_scheme();
        let dir = std::env::temp_dir().join("pwlab-test-roundtrip.json");
        save_scheme(&scheme, &dir).unwrap();
        let loaded = load_scheme(&dir).unwrap();
        assert!(loaded == scheme);
        std::fs::remove_file(&dir).ok();
    }

    #[test]
    fn load_rejects_asymmetric() {
        let doc = r#"{"format_version":1,"size":2,"classes":1,"relations":[0,1,0,0]}"#;
        let err = load_scheme_str(doc).unwrap_err();
        assert!(err.to_string().contains("symmetric"), "{err}");
    }

    #[test]
    fn load_rejects_out_of_range() {
        let doc = r#"{"format_version":1,"size":2,"classes":1,"relations":[0,2,2,0]}"#;
        let err = load_scheme_str(doc).unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");
    }

    #[test]
    fn recount_matches_tensor() {
        let (_, _, scheme) = q3_scheme();
        let tensor = intersection_numbers(&scheme, 1).unwrap();
        for (x, y) in [(0u32, 1u32), (5, 40), (17, 3), (70, 71)] {
            let k = scheme.relation(x, y) as usize;
            let counts = recount_base_pair(&scheme, x, y);
            for i in 0..=4 {
                for j in 0..=4 {
                    assert_eq!(counts[i][j], tensor.get(k, i, j));
                }
            }
        }
    }
}
