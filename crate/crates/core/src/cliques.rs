//! Maximal {0,3}-cliques and the structures built on them: antipodal
//! cliques, two-cores and their extended classes, pencil splits, the two
//! model-verified hypotheses, congruence classes, quotient matrices,
//! theta profiles and the partition family.
//!
//! Everything operates on a concrete scheme with Penttila-Williford
//! parameters; characterization failures carry a minimal witness so an
//! abstract input scheme that is *not* the classical one gets a concrete
//! counterexample instead of a bare failure.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::bits::BitSet;
use crate::error::{PwError, PwResult};
use crate::scheme::{infer_r, AssociationScheme};

/// Deterministic generator for the sampled hypothesis sweep.
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

pub struct CliqueLab<'a> {
    pub scheme: &'a AssociationScheme,
    pub r: usize,
    /// Sorted member lists, in lexicographic order; the id of a clique is
    /// its position here.
    pub cliques: Vec<Vec<u32>>,
    /// Vertex -> ids of the r^2+1 cliques through it.
    pub vertex_cliques: Vec<Vec<u32>>,
    /// Vertex -> its unique 4-related partner.
    pub antipode: Vec<u32>,
    /// Clique -> image clique under the antipode map.
    pub clique_antipode: Vec<u32>,
    clique_index: HashMap<Vec<u32>, u32>,
    edge_clique: HashMap<(u32, u32), u32>,
    rel1: Vec<BitSet>,
    rel2: Vec<BitSet>,
    rel3: Vec<BitSet>,
}

impl<'a> CliqueLab<'a> {
    /// Enumerates every maximal {0,3}-clique through the closure of each
    /// 3-related pair, verifying the closure is a clique of size r, that
    /// each 3-related pair lies in exactly one clique, and that every
    /// vertex carries r^2 + 1 cliques.
    pub fn new(scheme: &'a AssociationScheme) -> PwResult<Self> {
        let n = scheme.size();
        let r = infer_r(n as u64).ok_or_else(|| {
            PwError::Characterization(format!("no parameter r matches |X| = {n}"))
        })? as usize;

        let rel1 = scheme.class_bitsets(1);
        let rel2 = scheme.class_bitsets(2);
        let rel3 = scheme.class_bitsets(3);

        let mut clique_set: BTreeSet<Vec<u32>> = BTreeSet::new();
        for x in 0..n as u32 {
            for y in rel3[x as usize].ones().map(|v| v as u32) {
                if y <= x {
                    continue;
                }
                let mut members: Vec<u32> = vec![x, y];
                members.extend(
                    rel3[x as usize]
                        .ones()
                        .filter(|&z| rel3[y as usize].get(z))
                        .map(|z| z as u32),
                );
                members.sort_unstable();
                if members.len() != r {
                    return Err(PwError::Characterization(format!(
                        "closure of 3-related pair ({x}, {y}) has {} vertices, expected {r}",
                        members.len()
                    )));
                }
                for (i, &a) in members.iter().enumerate() {
                    for &b in &members[i + 1..] {
                        if scheme.relation(a, b) != 3 {
                            return Err(PwError::Characterization(format!(
                                "closure of ({x}, {y}) contains the non-3-related pair ({a}, {b})"
                            )));
                        }
                    }
                }
                clique_set.insert(members);
            }
        }
        let cliques: Vec<Vec<u32>> = clique_set.into_iter().collect();
        let clique_index: HashMap<Vec<u32>, u32> = cliques
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i as u32))
            .collect();

        let mut vertex_cliques = vec![Vec::new(); n];
        let mut edge_clique = HashMap::new();
        for (ci, c) in cliques.iter().enumerate() {
            for (i, &a) in c.iter().enumerate() {
                vertex_cliques[a as usize].push(ci as u32);
                for &b in &c[i + 1..] {
                    if let Some(prev) = edge_clique.insert((a, b), ci as u32) {
                        return Err(PwError::Characterization(format!(
                            "3-related pair ({a}, {b}) lies in two cliques {prev} and {ci}"
                        )));
                    }
                }
            }
        }
        for x in 0..n {
            if vertex_cliques[x].len() != r * r + 1 {
                return Err(PwError::Characterization(format!(
                    "vertex {x} lies on {} cliques, expected {}",
                    vertex_cliques[x].len(),
                    r * r + 1
                )));
            }
        }
        // Every 3-related pair must be covered.
        let edges: usize = (0..n).map(|x| rel3[x].count()).sum::<usize>() / 2;
        if edge_clique.len() != edges {
            return Err(PwError::Characterization(format!(
                "{} of {} 3-related pairs lie in a clique",
                edge_clique.len(),
                edges
            )));
        }

        let mut antipode = vec![0u32; n];
        for x in 0..n as u32 {
            antipode[x as usize] = scheme.partner(x, 4).ok_or_else(|| {
                PwError::Characterization(format!("vertex {x} has no unique 4-related partner"))
            })?;
        }
        let mut clique_antipode = Vec::with_capacity(cliques.len());
        for (ci, c) in cliques.iter().enumerate() {
            let mut image: Vec<u32> = c.iter().map(|&v| antipode[v as usize]).collect();
            image.sort_unstable();
            let id = *clique_index.get(&image).ok_or_else(|| {
                PwError::Characterization(format!(
                    "antipodal image of clique {ci} is not a clique"
                ))
            })?;
            clique_antipode.push(id);
        }

        Ok(CliqueLab {
            scheme,
            r,
            cliques,
            vertex_cliques,
            antipode,
            clique_antipode,
            clique_index,
            edge_clique,
            rel1,
            rel2,
            rel3,
        })
    }

    pub fn clique_of_edge(&self, x: u32, y: u32) -> Option<u32> {
        let key = (x.min(y), x.max(y));
        self.edge_clique.get(&key).copied()
    }

    pub fn clique_id(&self, members: &[u32]) -> Option<u32> {
        let mut m = members.to_vec();
        m.sort_unstable();
        self.clique_index.get(&m).copied()
    }

    /// The two-core of a clique: vertices 2-related to every member.
    pub fn two_core(&self, c: u32) -> Vec<u32> {
        let members = &self.cliques[c as usize];
        let first = &self.rel2[members[0] as usize];
        first
            .ones()
            .filter(|&z| {
                members[1..]
                    .iter()
                    .all(|&w| self.rel2[w as usize].get(z))
            })
            .map(|z| z as u32)
            .collect()
    }

    /// The extended core T_C: the two-core plus the clique and its
    /// antipodal clique, sorted.
    pub fn extended_core(&self, c: u32) -> Vec<u32> {
        let mut out = self.two_core(c);
        out.extend_from_slice(&self.cliques[c as usize]);
        out.extend_from_slice(&self.cliques[self.clique_antipode[c as usize] as usize]);
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Verifies the structure of one extended core: its size, the 1- and
    /// 3-degree of each two-core vertex inside the two-core, and closure
    /// under the antipode.
    pub fn check_core(&self, c: u32) -> PwResult<()> {
        let r = self.r;
        let core = self.two_core(c);
        let ext = self.extended_core(c);
        if ext.len() != r * r * r - r * r {
            return Err(PwError::Characterization(format!(
                "extended core of clique {c} has {} vertices, expected {}",
                ext.len(),
                r * r * r - r * r
            )));
        }
        let mut core_bits = BitSet::new(self.scheme.size());
        for &z in &core {
            core_bits.set(z as usize);
        }
        for &z in &core {
            let d1 = self.rel1[z as usize].intersection_count(&core_bits);
            let d3 = self.rel3[z as usize].intersection_count(&core_bits);
            if d1 != r - 1 || d3 != r - 1 {
                return Err(PwError::Characterization(format!(
                    "two-core vertex {z} of clique {c} has (1,3)-degrees ({d1}, {d3}), expected ({}, {})",
                    r - 1,
                    r - 1
                )));
            }
            if !core_bits.get(self.antipode[z as usize] as usize) {
                return Err(PwError::Characterization(format!(
                    "two-core of clique {c} is not antipode-closed at vertex {z}"
                )));
            }
        }
        Ok(())
    }

    /// Vertices outside a clique that are 3-related to it see exactly one
    /// member 3-related and one member 1-related, and there are r^3 (r-1)
    /// of them.
    pub fn check_outside_contact(&self, c: u32) -> PwResult<()> {
        let r = self.r;
        let members = &self.cliques[c as usize];
        let anti = &self.cliques[self.clique_antipode[c as usize] as usize];
        if members.iter().any(|m| anti.contains(m)) {
            return Err(PwError::Characterization(format!(
                "clique {c} meets its antipodal clique"
            )));
        }
        let mut contact = 0usize;
        for z in 0..self.scheme.size() as u32 {
            if members.contains(&z) {
                continue;
            }
            let three = members
                .iter()
                .filter(|&&w| self.scheme.relation(z, w) == 3)
                .count();
            if three == 0 {
                continue;
            }
            contact += 1;
            let one = members
                .iter()
                .filter(|&&w| self.scheme.relation(z, w) == 1)
                .count();
            let three_anti = anti
                .iter()
                .filter(|&&w| self.scheme.relation(z, w) == 3)
                .count();
            if three != 1 || one != 1 || three_anti != 1 {
                return Err(PwError::Characterization(format!(
                    "vertex {z} against clique {c}: {three} members 3-related, {one} 1-related, \
                     {three_anti} antipodal members 3-related; each should be 1"
                )));
            }
        }
        if contact != r * r * r * (r - 1) {
            return Err(PwError::Characterization(format!(
                "{contact} vertices are 3-related to clique {c}, expected {}",
                r * r * r * (r - 1)
            )));
        }
        Ok(())
    }

    /// Each member of the antipodal clique is 1-related to every member of
    /// the original except its own antipode (which is 4-related).
    pub fn check_antipodal_relations(&self, c: u32) -> PwResult<()> {
        let members = &self.cliques[c as usize];
        for &x in members {
            let xa = self.antipode[x as usize];
            for &y in members {
                let expected = if y == x { 4 } else { 1 };
                if self.scheme.relation(y, xa) != expected {
                    return Err(PwError::Characterization(format!(
                        "relation({y}, antipode({x})) = {} in clique {c}, expected {expected}",
                        self.scheme.relation(y, xa)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The split of the clique pencil through x induced by a 2-related vertex
/// y: cliques containing a (then unique) 3-related vertex of y, cliques
/// lying entirely in the 2-relation of y, and any that do neither.
#[derive(Clone, Debug)]
pub struct PencilSplit {
    pub crossing: Vec<u32>,
    pub avoiding: Vec<u32>,
    pub unsplit: Vec<u32>,
}

impl CliqueLab<'_> {
    pub fn pencil_split(&self, x: u32, y: u32) -> PencilSplit {
        debug_assert_eq!(self.scheme.relation(x, y), 2);
        let mut split = PencilSplit {
            crossing: Vec::new(),
            avoiding: Vec::new(),
            unsplit: Vec::new(),
        };
        for &ci in &self.vertex_cliques[x as usize] {
            let members = &self.cliques[ci as usize];
            let mut any3 = false;
            let mut all2 = true;
            for &w in members {
                match self.scheme.relation(y, w) {
                    3 => {
                        any3 = true;
                        all2 = false;
                    }
                    2 => {}
                    0 => all2 = false,
                    _ => all2 = false,
                }
            }
            if any3 {
                split.crossing.push(ci);
            } else if all2 {
                split.avoiding.push(ci);
            } else {
                split.unsplit.push(ci);
            }
        }
        split
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMode {
    Exhaustive,
    /// Full sweep over x, sampled (u, v) pairs per vertex.
    Sampled { seed: u64, pairs_per_vertex: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct PencilSumWitness {
    pub x: u32,
    pub u: u32,
    pub v: u32,
    pub detail: String,
}

/// Result of the pencil-sum sweep: for every x and every 3-related pair
/// (u, v) inside the 2-neighborhood of x, the shared-crossing count m and
/// the common-3-neighbor count n satisfy n <= 1, m + n = r^2 - 2r, and the
/// avoiding overlap identity |avoid(u) ∩ avoid(v)| = m - r^2 + 2r + 1.
#[derive(Clone, Debug, Serialize)]
pub struct PencilSumReport {
    pub pass: bool,
    pub triples_checked: u64,
    pub expected_sum: usize,
    pub sampled: bool,
    pub witness: Option<PencilSumWitness>,
}

impl CliqueLab<'_> {
    pub fn check_pencil_sums(&self, mode: SweepMode) -> PencilSumReport {
        let r = self.r;
        let n_verts = self.scheme.size();
        let expected_sum = r * r - 2 * r;
        let mut triples_checked = 0u64;
        let mut witness = None;

        'sweep: for x in 0..n_verts as u32 {
            let two_nbrs: Vec<u32> = self.rel2[x as usize].ones().map(|v| v as u32).collect();
            let pencil = &self.vertex_cliques[x as usize];
            let pos_of: HashMap<u32, usize> =
                pencil.iter().enumerate().map(|(i, &c)| (c, i)).collect();
            // crossing masks over pencil positions, avoiding = complement
            // once the split is total
            let mut masks: HashMap<u32, u64> = HashMap::new();
            let mut mask_of = |lab: &Self, u: u32, witness: &mut Option<PencilSumWitness>| -> Option<u64> {
                if let Some(&m) = masks.get(&u) {
                    return Some(m);
                }
                let split = lab.pencil_split(x, u);
                if !split.unsplit.is_empty() {
                    *witness = Some(PencilSumWitness {
                        x,
                        u,
                        v: u,
                        detail: format!(
                            "clique {} through {x} neither crosses nor avoids {u}",
                            split.unsplit[0]
                        ),
                    });
                    return None;
                }
                if split.crossing.len() != r * (r - 1) || split.avoiding.len() != r + 1 {
                    *witness = Some(PencilSumWitness {
                        x,
                        u,
                        v: u,
                        detail: format!(
                            "pencil split sizes ({}, {}) at ({x}, {u}), expected ({}, {})",
                            split.crossing.len(),
                            split.avoiding.len(),
                            r * (r - 1),
                            r + 1
                        ),
                    });
                    return None;
                }
                let mut m = 0u64;
                for c in &split.crossing {
                    m |= 1 << pos_of[c];
                }
                masks.insert(u, m);
                Some(m)
            };

            let pairs: Vec<(u32, u32)> = match mode {
                SweepMode::Exhaustive => {
                    let mut ps = Vec::new();
                    for &u in &two_nbrs {
                        for v in self.rel3[u as usize].ones().map(|v| v as u32) {
                            if v > u && self.rel2[x as usize].get(v as usize) {
                                ps.push((u, v));
                            }
                        }
                    }
                    ps
                }
                SweepMode::Sampled {
                    seed,
                    pairs_per_vertex,
                } => {
                    let mut rng = SplitMix64(seed ^ (x as u64).wrapping_mul(0x2545f4914f6cdd1d));
                    let mut ps = Vec::new();
                    let mut guard = 0;
                    while ps.len() < pairs_per_vertex && guard < pairs_per_vertex * 64 {
                        guard += 1;
                        let u = two_nbrs[rng.below(two_nbrs.len())];
                        let thirds: Vec<u32> = self.rel3[u as usize]
                            .ones()
                            .filter(|&v| self.rel2[x as usize].get(v))
                            .map(|v| v as u32)
                            .collect();
                        if thirds.is_empty() {
                            continue;
                        }
                        let v = thirds[rng.below(thirds.len())];
                        ps.push((u.min(v), u.max(v)));
                    }
                    ps
                }
            };

            for (u, v) in pairs {
                let Some(mu) = mask_of(self, u, &mut witness) else {
                    break 'sweep;
                };
                let Some(mv) = mask_of(self, v, &mut witness) else {
                    break 'sweep;
                };
                let m = (mu & mv).count_ones() as usize;
                let n = self.rel3[x as usize]
                    .intersection_count3(&self.rel3[u as usize], &self.rel3[v as usize]);
                triples_checked += 1;
                if n > 1 {
                    witness = Some(PencilSumWitness {
                        x,
                        u,
                        v,
                        detail: format!("common 3-neighbor count n = {n} exceeds 1"),
                    });
                    break 'sweep;
                }
                if m + n != expected_sum {
                    witness = Some(PencilSumWitness {
                        x,
                        u,
                        v,
                        detail: format!("m + n = {m} + {n} != {expected_sum}"),
                    });
                    break 'sweep;
                }
                // avoiding overlap: |avoid(u) ∩ avoid(v)| = m - r^2 + 2r + 1
                let full = (1u64 << (r * r + 1)) - 1;
                let avoid_overlap = (!mu & !mv & full).count_ones() as usize;
                let expected_overlap = (m + 2 * r + 1) as i64 - (r * r) as i64;
                if avoid_overlap as i64 != expected_overlap {
                    witness = Some(PencilSumWitness {
                        x,
                        u,
                        v,
                        detail: format!(
                            "avoiding overlap {avoid_overlap}, expected {expected_overlap}"
                        ),
                    });
                    break 'sweep;
                }
            }
        }
        PencilSumReport {
            pass: witness.is_none(),
            triples_checked,
            expected_sum,
            sampled: matches!(mode, SweepMode::Sampled { .. }),
            witness,
        }
    }
}

/// Common element of a sunflower family: `sets` must be r subsets of the
/// ground set, each of size r+1, pairwise intersecting in exactly one
/// element, and covering the ground set of size r^2+1. Under those
/// preconditions a common element exists; not finding one is reported as a
/// characterization failure.
pub fn sunflower_common(sets: &[Vec<u32>], ground: &[u32]) -> PwResult<u32> {
    let r = sets.len();
    if ground.len() != r * r + 1 {
        return Err(PwError::SunflowerPrecondition(format!(
            "ground set has {} elements, expected r^2+1 = {}",
            ground.len(),
            r * r + 1
        )));
    }
    let ground_set: BTreeSet<u32> = ground.iter().copied().collect();
    for (i, s) in sets.iter().enumerate() {
        if s.len() != r + 1 {
            return Err(PwError::SunflowerPrecondition(format!(
                "set {i} has {} elements, expected r+1 = {}",
                s.len(),
                r + 1
            )));
        }
        if !s.iter().all(|e| ground_set.contains(e)) {
            return Err(PwError::SunflowerPrecondition(format!(
                "set {i} leaves the ground set"
            )));
        }
    }
    for i in 0..r {
        for j in (i + 1)..r {
            let inter = sets[i]
                .iter()
                .filter(|e| sets[j].contains(e))
                .count();
            if inter != 1 {
                return Err(PwError::SunflowerPrecondition(format!(
                    "sets {i} and {j} intersect in {inter} elements, expected 1"
                )));
            }
        }
    }
    let covered: BTreeSet<u32> = sets.iter().flatten().copied().collect();
    if covered != ground_set {
        return Err(PwError::SunflowerPrecondition(
            "the sets do not cover the ground set".into(),
        ));
    }
    let common: Vec<u32> = sets[0]
        .iter()
        .copied()
        .filter(|e| sets[1..].iter().all(|s| s.contains(e)))
        .collect();
    match common.as_slice() {
        [e] => Ok(*e),
        [] => Err(PwError::Characterization(
            "sunflower preconditions hold but no common element exists".into(),
        )),
        _ => Err(PwError::Characterization(
            "sunflower family has several common elements".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// Congruence classes
// ---------------------------------------------------------------------------

pub struct CongruenceClass {
    pub cliques: Vec<u32>,
    pub members: Vec<u32>,
    pub member_bits: BitSet,
}

pub struct CongruenceClasses {
    pub classes: Vec<CongruenceClass>,
    /// Clique id -> class id.
    pub clique_class: Vec<u32>,
}

impl CliqueLab<'_> {
    fn congruent(&self, c: u32, d: u32) -> bool {
        if c == d {
            return true;
        }
        self.cliques[c as usize].iter().all(|&x| {
            self.cliques[d as usize]
                .iter()
                .all(|&y| self.scheme.relation(x, y) != 3)
        })
    }

    /// Groups cliques by congruence (no 3-related cross pair), verifies the
    /// relation is an equivalence, and that each class is the extended core
    /// of each of its cliques, partitioned by them.
    pub fn congruence_classes(&self) -> PwResult<CongruenceClasses> {
        let r = self.r;
        let n_cl = self.cliques.len();
        // Group by extended core; then verify congruence agrees with the
        // grouping, which doubles as the transitivity check.
        let mut by_core: BTreeMap<Vec<u32>, Vec<u32>> = BTreeMap::new();
        for c in 0..n_cl as u32 {
            by_core.entry(self.extended_core(c)).or_default().push(c);
        }
        let mut classes = Vec::new();
        let mut clique_class = vec![u32::MAX; n_cl];
        for (members, cliques) in by_core {
            let id = classes.len() as u32;
            if cliques.len() != r * r - r {
                return Err(PwError::Characterization(format!(
                    "congruence class {id} contains {} cliques, expected {}",
                    cliques.len(),
                    r * r - r
                )));
            }
            for &c in &cliques {
                clique_class[c as usize] = id;
            }
            let mut member_bits = BitSet::new(self.scheme.size());
            for &m in &members {
                member_bits.set(m as usize);
            }
            classes.push(CongruenceClass {
                cliques,
                members,
                member_bits,
            });
        }
        // Congruence must agree with the grouping on every clique pair:
        // same class => congruent, different class => not congruent. Any
        // disagreement is an intransitivity (or a core mismatch) witness.
        for c in 0..n_cl as u32 {
            for d in (c + 1)..n_cl as u32 {
                let same = clique_class[c as usize] == clique_class[d as usize];
                let cong = self.congruent(c, d);
                if same != cong {
                    return Err(PwError::Characterization(format!(
                        "cliques {c} and {d}: congruent = {cong} but same extended core = {same} \
                         (congruence is not an equivalence with core classes)"
                    )));
                }
            }
        }
        // Each class is partitioned by its cliques and contains no other
        // 3-related pair.
        for (id, class) in classes.iter().enumerate() {
            let clique_vertex_count: usize = class
                .cliques
                .iter()
                .map(|&c| self.cliques[c as usize].len())
                .sum();
            if clique_vertex_count != class.members.len() {
                return Err(PwError::Characterization(format!(
                    "class {id} is not partitioned by its cliques"
                )));
            }
            let mut seen = BTreeSet::new();
            for &c in &class.cliques {
                for &v in &self.cliques[c as usize] {
                    if !seen.insert(v) {
                        return Err(PwError::Characterization(format!(
                            "class {id}: cliques overlap at vertex {v}"
                        )));
                    }
                }
            }
            for &x in &class.members {
                for y in self.rel3[x as usize].ones().map(|v| v as u32) {
                    if y > x && class.member_bits.get(y as usize) {
                        let cl = self.clique_of_edge(x, y).unwrap();
                        if clique_class[cl as usize] != id as u32 {
                            return Err(PwError::Characterization(format!(
                                "class {id} contains the stray 3-related pair ({x}, {y})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(CongruenceClasses {
            classes,
            clique_class,
        })
    }
}

impl CongruenceClasses {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Pairwise intersection law for distinct classes: empty, or of size
/// r^2 - r with each clique of one class meeting exactly one clique of the
/// other in exactly one vertex.
pub fn check_class_intersections(lab: &CliqueLab, classes: &CongruenceClasses) -> PwResult<()> {
    let r = lab.r;
    for i in 0..classes.classes.len() {
        for j in (i + 1)..classes.classes.len() {
            let a = &classes.classes[i];
            let b = &classes.classes[j];
            let inter = a.member_bits.intersection_count(&b.member_bits);
            if inter == 0 {
                continue;
            }
            if inter != r * r - r {
                return Err(PwError::Characterization(format!(
                    "classes {i} and {j} intersect in {inter} vertices, expected 0 or {}",
                    r * r - r
                )));
            }
            for &c in &a.cliques {
                let hits: Vec<u32> = lab.cliques[c as usize]
                    .iter()
                    .copied()
                    .filter(|&v| b.member_bits.get(v as usize))
                    .collect();
                if hits.len() != 1 {
                    return Err(PwError::Characterization(format!(
                        "clique {c} of class {i} meets class {j} in {} vertices, expected 1",
                        hits.len()
                    )));
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct QuotientReport {
    pub b1: [[u64; 2]; 2],
    pub b2: [[u64; 2]; 2],
    pub eigenvalues_1: [i64; 2],
    pub eigenvalues_2: [i64; 2],
}

/// Row sums of the relation-1 and relation-2 adjacency matrices over the
/// partition {T, X \ T} must be constant; the resulting 2x2 quotient
/// matrices and their exact eigenvalues are compared to the closed forms.
pub fn quotient_matrices(
    lab: &CliqueLab,
    classes: &CongruenceClasses,
    class_id: u32,
) -> PwResult<QuotientReport> {
    let r = lab.r as u64;
    let class = &classes.classes[class_id as usize];
    let n = lab.scheme.size();
    let mut b1 = [[0u64; 2]; 2];
    let mut b2 = [[0u64; 2]; 2];
    let mut first = [true; 2];
    for x in 0..n as u32 {
        let side = usize::from(!class.member_bits.get(x as usize));
        let in1 = lab.rel1[x as usize].intersection_count(&class.member_bits) as u64;
        let in2 = lab.rel2[x as usize].intersection_count(&class.member_bits) as u64;
        let tot1 = lab.scheme.valencies()[1];
        let tot2 = lab.scheme.valencies()[2];
        let row = [in1, tot1 - in1, in2, tot2 - in2];
        if first[side] {
            b1[side][0] = row[0];
            b1[side][1] = row[1];
            b2[side][0] = row[2];
            b2[side][1] = row[3];
            first[side] = false;
        } else if b1[side][0] != row[0] || b2[side][0] != row[2] {
            return Err(PwError::Characterization(format!(
                "row sums over class {class_id} are not constant at vertex {x}"
            )));
        }
    }
    let expect_b1 = [
        [r - 1, r * r * r - r * r],
        [r * r - r, (r - 1) * (r * r - r + 1)],
    ];
    let expect_b2 = [
        [r * (r * r - r - 2), r * r * (r * r - 3 * r + 2)],
        [r * (r * r - 3 * r + 2), r * (r * r * r - 3 * r * r + 4 * r - 4)],
    ];
    if b1 != expect_b1 {
        return Err(PwError::Characterization(format!(
            "quotient of relation 1 is {b1:?}, expected {expect_b1:?}"
        )));
    }
    if b2 != expect_b2 {
        return Err(PwError::Characterization(format!(
            "quotient of relation 2 is {b2:?}, expected {expect_b2:?}"
        )));
    }
    let to_i = |m: [[u64; 2]; 2]| [[m[0][0] as i64, m[0][1] as i64], [m[1][0] as i64, m[1][1] as i64]];
    let e1 = crate::linalg::int_2x2_eigenvalues(to_i(b1))
        .ok_or_else(|| PwError::Characterization("quotient 1 has irrational eigenvalues".into()))?;
    let e2 = crate::linalg::int_2x2_eigenvalues(to_i(b2))
        .ok_or_else(|| PwError::Characterization("quotient 2 has irrational eigenvalues".into()))?;
    let ri = r as i64;
    let expect_e1 = [(ri - 1) * (ri * ri + 1), -(ri - 1) * (ri - 1)];
    let expect_e2 = [ri * (ri - 2) * (ri * ri + 1), 2 * ri * (ri - 2)];
    if e1 != expect_e1 {
        return Err(PwError::Characterization(format!(
            "quotient-1 eigenvalues {e1:?}, expected {expect_e1:?}"
        )));
    }
    if e2 != expect_e2 {
        return Err(PwError::Characterization(format!(
            "quotient-2 eigenvalues {e2:?}, expected {expect_e2:?}"
        )));
    }
    Ok(QuotientReport {
        b1,
        b2,
        eigenvalues_1: e1,
        eigenvalues_2: e2,
    })
}

/// The r+1 cliques through an outside vertex that avoid a class; every
/// avoided clique's own class is disjoint from it, and the remaining
/// r^2 - r pencil cliques each meet the class in exactly one vertex.
pub fn avoiding_cliques(
    lab: &CliqueLab,
    classes: &CongruenceClasses,
    class_id: u32,
    x: u32,
) -> PwResult<Vec<u32>> {
    let r = lab.r;
    let class = &classes.classes[class_id as usize];
    if class.member_bits.get(x as usize) {
        return Err(PwError::Characterization(format!(
            "vertex {x} lies in class {class_id}"
        )));
    }
    let mut avoiding = Vec::new();
    for &c in &lab.vertex_cliques[x as usize] {
        let hits = lab.cliques[c as usize]
            .iter()
            .filter(|&&v| class.member_bits.get(v as usize))
            .count();
        match hits {
            0 => avoiding.push(c),
            1 => {}
            _ => {
                return Err(PwError::Characterization(format!(
                    "clique {c} through {x} meets class {class_id} in {hits} vertices"
                )))
            }
        }
    }
    if avoiding.len() != r + 1 {
        return Err(PwError::Characterization(format!(
            "{} cliques through {x} avoid class {class_id}, expected {}",
            avoiding.len(),
            r + 1
        )));
    }
    for &c in &avoiding {
        let dc = classes.clique_class[c as usize];
        let other = &classes.classes[dc as usize];
        if !other.member_bits.is_disjoint(&class.member_bits) {
            return Err(PwError::Characterization(format!(
                "avoided clique {c} has class {dc} meeting class {class_id}"
            )));
        }
    }
    Ok(avoiding)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ThetaProfile {
    pub theta0: usize,
    pub theta1: usize,
    pub theta2: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ThetaReport {
    pub pass: bool,
    pub theta2_sum: u64,
    pub theta0_sum: u64,
    pub witness: Option<String>,
}

/// Theta profile of a vertex outside two disjoint classes: how many of its
/// pencil cliques meet their union in 0, 1 or 2 vertices.
pub fn theta_profile(
    lab: &CliqueLab,
    classes: &CongruenceClasses,
    t1: u32,
    t2: u32,
    x: u32,
) -> ThetaProfile {
    let a = &classes.classes[t1 as usize].member_bits;
    let b = &classes.classes[t2 as usize].member_bits;
    let mut counts = [0usize; 3];
    for &c in &lab.vertex_cliques[x as usize] {
        let hits = lab.cliques[c as usize]
            .iter()
            .filter(|&&v| a.get(v as usize) || b.get(v as usize))
            .count();
        counts[hits.min(2)] += 1;
    }
    ThetaProfile {
        theta0: counts[0],
        theta1: counts[1],
        theta2: counts[2],
    }
}

/// Verifies the two linear theta identities, the double-count of cliques
/// crossing both classes, and the covering hypothesis theta0 >= 1 for every
/// vertex outside the union of two disjoint classes.
pub fn check_theta(
    lab: &CliqueLab,
    classes: &CongruenceClasses,
    t1: u32,
    t2: u32,
) -> PwResult<ThetaReport> {
    let r = lab.r;
    let a = &classes.classes[t1 as usize];
    let b = &classes.classes[t2 as usize];
    if !a.member_bits.is_disjoint(&b.member_bits) {
        return Err(PwError::MissingPrerequisite(format!(
            "classes {t1} and {t2} are not disjoint"
        )));
    }
    let mut theta2_sum = 0u64;
    let mut theta0_sum = 0u64;
    let mut witness = None;
    for x in 0..lab.scheme.size() as u32 {
        if a.member_bits.get(x as usize) || b.member_bits.get(x as usize) {
            continue;
        }
        let p = theta_profile(lab, classes, t1, t2, x);
        if p.theta0 + p.theta1 + p.theta2 != r * r + 1
            || p.theta1 + 2 * p.theta2 != 2 * (r * r - r)
        {
            witness = Some(format!(
                "vertex {x} has profile ({}, {}, {}) violating the linear identities",
                p.theta0, p.theta1, p.theta2
            ));
            break;
        }
        if p.theta0 == 0 {
            witness = Some(format!(
                "vertex {x} lies on no clique avoiding classes {t1} and {t2}"
            ));
            break;
        }
        theta2_sum += p.theta2 as u64;
        theta0_sum += p.theta0 as u64;
    }
    let r64 = r as u64;
    let expect2 = r64 * (r64 - 2) * (r64 * r64 - r64) * (r64 * r64 - r64);
    let expect0 = (r64 * r64 - r64) * (r64 * r64 - r64);
    if witness.is_none() && theta2_sum != expect2 {
        witness = Some(format!(
            "sum of theta2 is {theta2_sum}, expected {expect2}"
        ));
    }
    if witness.is_none() && theta0_sum != expect0 {
        witness = Some(format!(
            "sum of theta0 is {theta0_sum}, expected {expect0}"
        ));
    }
    Ok(ThetaReport {
        pass: witness.is_none(),
        theta2_sum,
        theta0_sum,
        witness,
    })
}

/// The unique partition of the vertex set into classes determined by a
/// disjoint class pair, as sorted class ids. Requires theta0 = 1 for every
/// outside vertex (the covering hypothesis plus the counting identity).
pub fn partition_from_pair(
    lab: &CliqueLab,
    classes: &CongruenceClasses,
    t1: u32,
    t2: u32,
) -> PwResult<Vec<u32>> {
    let a = &classes.classes[t1 as usize];
    let b = &classes.classes[t2 as usize];
    if !a.member_bits.is_disjoint(&b.member_bits) {
        return Err(PwError::MissingPrerequisite(format!(
            "classes {t1} and {t2} are not disjoint"
        )));
    }
    let n = lab.scheme.size();
    let mut part = vec![t1, t2];
    let mut covered = BitSet::new(n);
    for &m in a.members.iter().chain(&b.members) {
        covered.set(m as usize);
    }
    while covered.count() < n {
        let x = (0..n).find(|&v| !covered.get(v)).unwrap() as u32;
        let mut avoiding = None;
        for &c in &lab.vertex_cliques[x as usize] {
            let disjoint = lab.cliques[c as usize]
                .iter()
                .all(|&v| !a.member_bits.get(v as usize) && !b.member_bits.get(v as usize));
            if disjoint {
                if avoiding.is_some() {
                    return Err(PwError::Characterization(format!(
                        "vertex {x} lies on two cliques avoiding classes {t1} and {t2}"
                    )));
                }
                avoiding = Some(c);
            }
        }
        let c = avoiding.ok_or_else(|| {
            PwError::Characterization(format!(
                "vertex {x} lies on no clique avoiding classes {t1} and {t2}"
            ))
        })?;
        let tc = classes.clique_class[c as usize];
        let class = &classes.classes[tc as usize];
        for &m in &class.members {
            if covered.get(m as usize) {
                return Err(PwError::Characterization(format!(
                    "class {tc} overlaps the partial partition at vertex {m}"
                )));
            }
            covered.set(m as usize);
        }
        part.push(tc);
    }
    part.sort_unstable();
    if part.len() != lab.r + 1 {
        return Err(PwError::Characterization(format!(
            "partition from pair ({t1}, {t2}) has {} classes, expected {}",
            part.len(),
            lab.r + 1
        )));
    }
    Ok(part)
}

/// All partitions generated by disjoint class pairs, deduplicated.
pub fn all_partitions(lab: &CliqueLab, classes: &CongruenceClasses) -> PwResult<Vec<Vec<u32>>> {
    let mut set: BTreeSet<Vec<u32>> = BTreeSet::new();
    let k = classes.classes.len();
    for i in 0..k as u32 {
        for j in (i + 1)..k as u32 {
            if classes.classes[i as usize]
                .member_bits
                .is_disjoint(&classes.classes[j as usize].member_bits)
            {
                set.insert(partition_from_pair(lab, classes, i, j)?);
            }
        }
    }
    Ok(set.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_elliptic_quadric_gq, build_outer_points, build_parabolic_subgq};
    use crate::scheme::build_pw_scheme;

    fn q3() -> AssociationScheme {
        let model = build_elliptic_quadric_gq(3, 7).unwrap();
        let sub = build_parabolic_subgq(&model).unwrap();
        let outer = build_outer_points(&model, &sub).unwrap();
        build_pw_scheme(&model, &outer).unwrap()
    }

    #[test]
    fn q3_clique_enumeration() {
        let scheme = q3();
        let lab = CliqueLab::new(&scheme).unwrap();
        assert_eq!(lab.r, 3);
        assert_eq!(lab.cliques.len(), 240);
        assert!(lab.cliques.iter().all(|c| c.len() == 3));
        assert!(lab.vertex_cliques.iter().all(|v| v.len() == 10));
        // closure size beyond the pair: r - 2 = 1
        for x in 0..72u32 {
            for y in (x + 1)..72 {
                if scheme.relation(x, y) == 3 {
                    let c = lab.clique_of_edge(x, y).unwrap();
                    assert_eq!(lab.cliques[c as usize].len(), 3);
                }
            }
        }
    }

    #[test]
    fn q3_antipodal_cliques() {
        let scheme = q3();
        let lab = CliqueLab::new(&scheme).unwrap();
        for c in 0..lab.cliques.len() as u32 {
            let a = lab.clique_antipode[c as usize];
            assert_eq!(lab.clique_antipode[a as usize], c, "involution");
            let inter = lab.cliques[c as usize]
                .iter()
                .filter(|m| lab.cliques[a as usize].contains(m))
                .count();
            assert_eq!(inter, 0, "clique meets its antipodal clique");
            lab.check_antipodal_relations(c).unwrap();
        }
    }

    #[test]
    fn q3_cores() {
        let scheme = q3();
        let lab = CliqueLab::new(&scheme).unwrap();
        for c in 0..lab.cliques.len() as u32 {
            let core = lab.two_core(c);
            let ext = lab.extended_core(c);
            assert_eq!(core.len(), 12);
            assert_eq!(ext.len(), 18);
            lab.check_core(c).unwrap();
            lab.check_outside_contact(c).unwrap();
        }
    }

    #[test]
    fn q3_pencil_split_sizes() {
        let scheme = q3();
        let lab = CliqueLab::new(&scheme).unwrap();
        let x = 0u32;
        for y in 0..72u32 {
            if scheme.relation(x, y) != 2 {
                continue;
            }
            let split = lab.pencil_split(x, y);
            assert!(split.unsplit.is_empty());
            assert_eq!(split.crossing.len(), 6);
            assert_eq!(split.avoiding.len(), 4);
        }
    }

    #[test]
    fn q3_pencil_sums_hold() {
        let scheme = q3();
        let lab = CliqueLab::new(&scheme).unwrap();
        let report = lab.check_pencil_sums(SweepMode::Exhaustive);
        assert!(report.pass, "{:?}", report.witness);
        assert_eq!(report.expected_sum, 3);
        assert!(report.triples_checked > 0);
    }

    #[test]
    fn sampled_sweep_is_deterministic() {
        let scheme = q3();
        let lab = CliqueLab::new(&scheme).unwrap();
        let mode = SweepMode::Sampled {
            seed: 42,
            pairs_per_vertex: 5,
        };
        let a = lab.check_pencil_sums(mode);
        let b = lab.check_pencil_sums(mode);
        assert!(a.pass && b.pass);
        assert_eq!(a.triples_checked, b.triples_checked);
    }

    #[test]
    fn sunflower_basics() {
        // hand-built: ground 0..=9, three sets of size 4 through 0, covering
        let sets = vec![
            vec![0, 1, 2, 3],
            vec![0, 4, 5, 6],
            vec![0, 7, 8, 9],
        ];
        let ground: Vec<u32> = (0..10).collect();
        assert_eq!(sunflower_common(&sets, &ground).unwrap(), 0);
        // pairwise intersection of size 2 violates the preconditions
        let bad = vec![
            vec![0, 1, 2, 3],
            vec![0, 1, 5, 6],
            vec![0, 7, 8, 9],
        ];
        assert!(matches!(
            sunflower_common(&bad, &ground),
            Err(PwError::SunflowerPrecondition(_))
        ));
    }

    #[test]
    fn q3_sunflower_on_avoiding_families() {
        let scheme = q3();
        let lab = CliqueLab::new(&scheme).unwrap();
        for c in (0..lab.cliques.len() as u32).step_by(24) {
            for &x in &lab.two_core(c) {
                let ground = lab.vertex_cliques[x as usize].clone();
                let sets: Vec<Vec<u32>> = lab.cliques[c as usize]
                    .iter()
                    .map(|&v| lab.pencil_split(x, v).avoiding)
                    .collect();
                let common = sunflower_common(&sets, &ground).unwrap();
                // the common clique lies inside the two-core of c
                let core = lab.two_core(c);
                assert!(lab.cliques[common as usize]
                    .iter()
                    .all(|m| core.contains(m)));
            }
        }
    }

    #[test]
    fn q3_congruence_classes() {
        let scheme = q3();
        let lab = CliqueLab::new(&scheme).unwrap();
        let classes = lab.congruence_classes().unwrap();
        assert_eq!(classes.len(), 40);
        for class in &classes.classes {
            assert_eq!(class.cliques.len(), 6);
            assert_eq!(class.members.len(), 18);
        }
        check_class_intersections(&lab, &classes).unwrap();
        // two-core decomposes into r^2 - r - 2 = 4 cliques of the class
        for c in 0..lab.cliques.len() as u32 {
            let class_id = classes.clique_class[c as usize];
            let class = &classes.classes[class_id as usize];
            let core = lab.two_core(c);
            let inside: Vec<u32> = class
                .cliques
                .iter()
                .copied()
                .filter(|&d| {
                    lab.cliques[d as usize]
                        .iter()
                        .all(|m| core.contains(m))
                })
                .collect();
            assert_eq!(inside.len(), 4);
        }
    }

    #[test]
    fn q3_quotients_and_outside_counts() {
        let scheme = q3();
        let lab = CliqueLab::new(&scheme).unwrap();
        let classes = lab.congruence_classes().unwrap();
        for t in 0..classes.len() as u32 {
            let rep = quotient_matrices(&lab, &classes, t).unwrap();
            assert_eq!(rep.b1, [[2, 18], [6, 14]]);
            assert_eq!(rep.b2, [[12, 18], [6, 24]]);
            assert_eq!(rep.eigenvalues_1, [20, -4]);
            assert_eq!(rep.eigenvalues_2, [30, 6]);
        }
        // x outside T: 6 vertices of T are 3-related, 6 are 2-related
        let class = &classes.classes[0];
        for x in 0..72u32 {
            if class.member_bits.get(x as usize) {
                continue;
            }
            let three = class
                .members
                .iter()
                .filter(|&&v| scheme.relation(x, v) == 3)
                .count();
            let two = class
                .members
                .iter()
                .filter(|&&v| scheme.relation(x, v) == 2)
                .count();
            assert_eq!(three, 6);
            assert_eq!(two, 6);
        }
    }

    #[test]
    fn q3_avoiding_cliques() {
        let scheme = q3();
        let lab = CliqueLab::new(&scheme).unwrap();
        let classes = lab.congruence_classes().unwrap();
        for t in 0..4u32 {
            for x in 0..72u32 {
                if classes.classes[t as usize].member_bits.get(x as usize) {
                    continue;
                }
                let av = avoiding_cliques(&lab, &classes, t, x).unwrap();
                assert_eq!(av.len(), 4);
            }
        }
    }

    #[test]
    fn q3_theta_and_partitions() {
        let scheme = q3();
        let lab = CliqueLab::new(&scheme).unwrap();
        let classes = lab.congruence_classes().unwrap();
        let mut checked_pairs = 0;
        for i in 0..classes.len() as u32 {
            for j in (i + 1)..classes.len() as u32 {
                if !classes.classes[i as usize]
                    .member_bits
                    .is_disjoint(&classes.classes[j as usize].member_bits)
                {
                    continue;
                }
                checked_pairs += 1;
                let report = check_theta(&lab, &classes, i, j).unwrap();
                assert!(report.pass, "{:?}", report.witness);
                assert_eq!(report.theta2_sum, 108);
                assert_eq!(report.theta0_sum, 36);
                // profile is forced to (1, 6, 3) at r = 3
                for x in 0..72u32 {
                    if classes.classes[i as usize].member_bits.get(x as usize)
                        || classes.classes[j as usize].member_bits.get(x as usize)
                    {
                        continue;
                    }
                    assert_eq!(
                        theta_profile(&lab, &classes, i, j, x),
                        ThetaProfile {
                            theta0: 1,
                            theta1: 6,
                            theta2: 3
                        }
                    );
                }
            }
        }
        assert_eq!(checked_pairs, 240);
        let partitions = all_partitions(&lab, &classes).unwrap();
        assert_eq!(partitions.len(), 40);
        assert!(partitions.iter().all(|p| p.len() == 4));
    }
}
