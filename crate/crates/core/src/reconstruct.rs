//! Rebuilding the quadrangle from scheme data: vertices and congruence
//! classes become points, cliques (extended by their class) and partitions
//! become lines. The result is pushed through the generic axiom checker,
//! the antipode involution is certified as an automorphism fixing the
//! subquadrangle pointwise, and in geometric mode the natural isomorphism
//! back to the source model is exhibited and verified.

use std::collections::HashMap;

use serde::Serialize;

use crate::bits::BitSet;
use crate::cliques::{CliqueLab, CongruenceClasses, PencilSumReport};
use crate::error::{PwError, PwResult};
use crate::geometry::{OuterPoints, QuadricModel, SubGq};
use crate::incidence::{verify_gq_axioms, AxiomReport, IncidenceStructure};

pub struct ReconstructedStructure {
    pub inc: IncidenceStructure,
    /// Type (i) points: scheme vertices, ids 0..num_vertex_points.
    pub num_vertex_points: usize,
    /// Type (ii) points: congruence classes, ids offset by the vertex count.
    pub num_class_points: usize,
    /// Type (a) lines: one per clique, ids 0..num_clique_lines.
    pub num_clique_lines: usize,
    /// Type (b) lines: one per partition, following the clique lines.
    pub num_partition_lines: usize,
}

impl ReconstructedStructure {
    pub fn class_point(&self, class_id: u32) -> u32 {
        self.num_vertex_points as u32 + class_id
    }

    pub fn is_class_point(&self, p: u32) -> bool {
        p as usize >= self.num_vertex_points
    }

    pub fn is_partition_line(&self, l: u32) -> bool {
        l as usize >= self.num_clique_lines
    }
}

/// Assembles the two-sorted incidence structure. Requires the pencil-sum
/// hypothesis report to have passed and a nonempty partition family (whose
/// construction already verified the covering hypothesis).
pub fn reconstruct(
    lab: &CliqueLab,
    classes: &CongruenceClasses,
    partitions: &[Vec<u32>],
    pencil_sums: &PencilSumReport,
) -> PwResult<ReconstructedStructure> {
    if !pencil_sums.pass {
        return Err(PwError::MissingPrerequisite(
            "pencil-sum hypothesis not verified on this scheme".into(),
        ));
    }
    if partitions.is_empty() {
        return Err(PwError::MissingPrerequisite(
            "no partitions available (covering hypothesis unverified)".into(),
        ));
    }
    let n = lab.scheme.size();
    let num_points = n + classes.len();
    let mut lines: Vec<Vec<u32>> = Vec::with_capacity(lab.cliques.len() + partitions.len());
    for (ci, members) in lab.cliques.iter().enumerate() {
        let mut line = members.clone();
        line.push(n as u32 + classes.clique_class[ci]);
        lines.push(line);
    }
    for part in partitions {
        lines.push(part.iter().map(|&t| n as u32 + t).collect());
    }
    let inc = IncidenceStructure::new(num_points, lines)?;
    Ok(ReconstructedStructure {
        inc,
        num_vertex_points: n,
        num_class_points: classes.len(),
        num_clique_lines: lab.cliques.len(),
        num_partition_lines: partitions.len(),
    })
}

#[derive(Serialize)]
pub struct ReconstructionReport {
    pub main: AxiomReport,
    pub sub: AxiomReport,
    pub involution_ok: bool,
    pub involution_witness: Option<String>,
    pub double_subtension_ok: bool,
}

/// The substructure on class points and partition lines.
pub fn class_substructure(rs: &ReconstructedStructure) -> PwResult<IncidenceStructure> {
    let offset = rs.num_vertex_points as u32;
    let lines: Vec<Vec<u32>> = rs
        .inc
        .lines()
        .iter()
        .skip(rs.num_clique_lines)
        .map(|l| l.iter().map(|&p| p - offset).collect())
        .collect();
    IncidenceStructure::new(rs.num_class_points, lines)
}

/// Runs the axiom checker on the reconstruction and its class substructure,
/// certifies the antipode involution as an automorphism fixing every class
/// point, and checks the class substructure is doubly subtended (every
/// subtended set of class points has exactly two subtenders, paired by the
/// involution).
pub fn verify_reconstruction(
    rs: &ReconstructedStructure,
    lab: &CliqueLab,
    classes: &CongruenceClasses,
) -> PwResult<ReconstructionReport> {
    let main = verify_gq_axioms(&rs.inc);
    let sub = verify_gq_axioms(&class_substructure(rs)?);

    // The involution: antipode on vertex points, identity on class points.
    let n = rs.num_vertex_points;
    let mut point_image: Vec<u32> = (0..rs.inc.num_points() as u32).collect();
    for x in 0..n {
        point_image[x] = lab.antipode[x];
    }
    let mut involution_witness = None;
    for x in 0..n as u32 {
        if point_image[x as usize] == x {
            involution_witness = Some(format!("involution fixes vertex point {x}"));
            break;
        }
        if point_image[point_image[x as usize] as usize] != x {
            involution_witness = Some(format!("involution is not an involution at {x}"));
            break;
        }
    }
    if involution_witness.is_none() {
        // Line (a) of clique c must map onto line (a) of the antipodal
        // clique, which requires the two cliques to share their class;
        // partition lines are fixed pointwise.
        for (ci, _) in lab.cliques.iter().enumerate() {
            let anti = lab.clique_antipode[ci] as usize;
            if classes.clique_class[ci] != classes.clique_class[anti] {
                involution_witness = Some(format!(
                    "clique {ci} and its antipodal clique lie in different classes"
                ));
                break;
            }
            let image: Vec<u32> = {
                let mut v: Vec<u32> = rs.inc.line(ci as u32)
                    .iter()
                    .map(|&p| point_image[p as usize])
                    .collect();
                v.sort_unstable();
                v
            };
            if image != *rs.inc.line(anti as u32) {
                involution_witness = Some(format!(
                    "involution image of clique line {ci} is not the antipodal clique line"
                ));
                break;
            }
        }
    }
    let involution_ok = involution_witness.is_none();

    // Double subtension inside the reconstruction: group vertex points by
    // their set of collinear class points.
    let mut double_subtension_ok = true;
    {
        let collinear = rs.inc.collinearity();
        let mut groups: HashMap<Vec<u32>, Vec<u32>> = HashMap::new();
        for x in 0..n as u32 {
            let ovoid: Vec<u32> = (n..rs.inc.num_points())
                .filter(|&t| collinear[x as usize].get(t))
                .map(|t| t as u32)
                .collect();
            groups.entry(ovoid).or_default().push(x);
        }
        for (_, members) in groups {
            if members.len() != 2
                || lab.antipode[members[0] as usize] != members[1]
            {
                double_subtension_ok = false;
                break;
            }
        }
    }

    Ok(ReconstructionReport {
        main,
        sub,
        involution_ok,
        involution_witness,
        double_subtension_ok,
    })
}

// ---------------------------------------------------------------------------
// Natural isomorphism (geometric mode)
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct IsomorphismWitness {
    /// Reconstructed point id -> target point id.
    pub point_map: Vec<u32>,
    /// Reconstructed line id -> target line id.
    pub line_map: Vec<u32>,
}

/// Checks a witness: both maps bijective and every line maps exactly onto
/// the point set of its image line.
pub fn verify_witness(
    a: &IncidenceStructure,
    b: &IncidenceStructure,
    w: &IsomorphismWitness,
) -> bool {
    if a.num_points() != b.num_points() || a.num_lines() != b.num_lines() {
        return false;
    }
    if w.point_map.len() != a.num_points() || w.line_map.len() != a.num_lines() {
        return false;
    }
    let mut seen_p = vec![false; b.num_points()];
    for &p in &w.point_map {
        if p as usize >= b.num_points() || seen_p[p as usize] {
            return false;
        }
        seen_p[p as usize] = true;
    }
    let mut seen_l = vec![false; b.num_lines()];
    for &l in &w.line_map {
        if l as usize >= b.num_lines() || seen_l[l as usize] {
            return false;
        }
        seen_l[l as usize] = true;
    }
    for (li, line) in a.lines().iter().enumerate() {
        let mut image: Vec<u32> = line.iter().map(|&p| w.point_map[p as usize]).collect();
        image.sort_unstable();
        if &image != b.line(w.line_map[li]) {
            return false;
        }
    }
    true
}

/// The natural map from a reconstruction built out of the classical model
/// back onto that model: vertex points to their outer points, each class to
/// the unique section point collinear with all members of any of its
/// cliques, clique lines to the model lines carrying them, partition lines
/// to section lines.
pub fn natural_isomorphism(
    model: &QuadricModel,
    sub: &SubGq,
    outer: &OuterPoints,
    lab: &CliqueLab,
    classes: &CongruenceClasses,
    partitions: &[Vec<u32>],
    rs: &ReconstructedStructure,
) -> PwResult<IsomorphismWitness> {
    let n = rs.num_vertex_points;
    let mut point_map = vec![u32::MAX; rs.inc.num_points()];
    for x in 0..n {
        point_map[x] = outer.ids[x];
    }

    // Class -> section point, via the parent line of any member clique.
    let parent_line_of_clique: Vec<u32> = lab
        .cliques
        .iter()
        .enumerate()
        .map(|(ci, members)| {
            let a = outer.ids[members[0] as usize];
            let b = outer.ids[members[1] as usize];
            model.gq.inc.common_line(a, b).ok_or_else(|| {
                PwError::Characterization(format!(
                    "clique {ci} members are not collinear in the model"
                ))
            })
        })
        .collect::<PwResult<Vec<u32>>>()?;
    for (t, class) in classes.classes.iter().enumerate() {
        let mut section_point = None;
        for &c in &class.cliques {
            let line = model.gq.inc.line(parent_line_of_clique[c as usize]);
            let subs: Vec<u32> = line
                .iter()
                .copied()
                .filter(|&p| sub.parent_point_index[p as usize].is_some())
                .collect();
            if subs.len() != 1 {
                return Err(PwError::Characterization(format!(
                    "model line of clique {c} meets the section in {} points",
                    subs.len()
                )));
            }
            match section_point {
                None => section_point = Some(subs[0]),
                Some(p) if p == subs[0] => {}
                Some(p) => {
                    return Err(PwError::Characterization(format!(
                        "class {t} maps to two section points {p} and {}",
                        subs[0]
                    )))
                }
            }
        }
        point_map[n + t] = section_point.unwrap();
    }

    // Lines: clique lines to their parent lines, partition lines to the
    // section line through the images of their classes.
    let mut line_map = vec![u32::MAX; rs.inc.num_lines()];
    for (ci, &pl) in parent_line_of_clique.iter().enumerate() {
        line_map[ci] = pl;
    }
    for (pi, part) in partitions.iter().enumerate() {
        let images: Vec<u32> = part.iter().map(|&t| point_map[n + t as usize]).collect();
        let candidate = model
            .gq
            .inc
            .common_line(images[0], images[1])
            .ok_or_else(|| {
                PwError::Characterization(format!(
                    "partition {pi} images are not collinear in the model"
                ))
            })?;
        let line = model.gq.inc.line(candidate);
        if !images.iter().all(|p| line.binary_search(p).is_ok()) {
            return Err(PwError::Characterization(format!(
                "partition {pi} images do not lie on one model line"
            )));
        }
        if sub.line_map.binary_search(&candidate).is_err() {
            return Err(PwError::Characterization(format!(
                "partition {pi} maps to a model line outside the section"
            )));
        }
        line_map[rs.num_clique_lines + pi] = candidate;
    }

    let witness = IsomorphismWitness {
        point_map,
        line_map,
    };
    if !verify_witness(&rs.inc, &model.gq.inc, &witness) {
        return Err(PwError::Characterization(
            "natural map is not an incidence-preserving bijection".into(),
        ));
    }
    Ok(witness)
}

// ---------------------------------------------------------------------------
// Generic backtracking isomorphism (fallback path)
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum IsoOutcome {
    Isomorphic(IsomorphismWitness),
    NonIsomorphic,
    /// The search budget ran out; distinct from a non-isomorphism verdict.
    BudgetExhausted,
}

/// Backtracking search for an isomorphism between two incidence structures,
/// pruned by iterated degree invariants on the bipartite incidence graph.
/// The budget caps the number of extension steps.
pub fn find_isomorphism(
    a: &IncidenceStructure,
    b: &IncidenceStructure,
    budget: u64,
) -> IsoOutcome {
    if a.num_points() != b.num_points() || a.num_lines() != b.num_lines() {
        return IsoOutcome::NonIsomorphic;
    }
    let inv_a = refine_invariants(a);
    let inv_b = refine_invariants(b);
    {
        let mut sa = inv_a.clone();
        let mut sb = inv_b.clone();
        sa.sort_unstable();
        sb.sort_unstable();
        if sa != sb {
            return IsoOutcome::NonIsomorphic;
        }
    }
    let coll_a = a.collinearity();
    let coll_b = b.collinearity();

    // Candidate target points per source point, filtered by invariant.
    let mut candidates: Vec<Vec<u32>> = vec![Vec::new(); a.num_points()];
    for p in 0..a.num_points() {
        for q in 0..b.num_points() {
            if inv_a[p] == inv_b[q] {
                candidates[p].push(q as u32);
            }
        }
    }
    // Static order: most constrained first.
    let mut order: Vec<u32> = (0..a.num_points() as u32).collect();
    order.sort_by_key(|&p| candidates[p as usize].len());

    struct Search {
        coll_a: Vec<BitSet>,
        coll_b: Vec<BitSet>,
        candidates: Vec<Vec<u32>>,
        order: Vec<u32>,
        map: Vec<u32>,
        used: Vec<bool>,
        steps: u64,
        budget: u64,
    }

    impl Search {
        fn consistent(&self, p: u32, q: u32) -> bool {
            for &src in &self.order {
                let img = self.map[src as usize];
                if img == u32::MAX {
                    continue;
                }
                if self.coll_a[p as usize].get(src as usize)
                    != self.coll_b[q as usize].get(img as usize)
                {
                    return false;
                }
            }
            true
        }

        fn go(&mut self, depth: usize) -> Option<bool> {
            if depth == self.order.len() {
                return Some(true);
            }
            let p = self.order[depth];
            let cands = self.candidates[p as usize].clone();
            for q in cands {
                if self.used[q as usize] {
                    continue;
                }
                self.steps += 1;
                if self.steps > self.budget {
                    return None;
                }
                if !self.consistent(p, q) {
                    continue;
                }
                self.map[p as usize] = q;
                self.used[q as usize] = true;
                match self.go(depth + 1) {
                    Some(true) => return Some(true),
                    Some(false) => {}
                    None => return None,
                }
                self.map[p as usize] = u32::MAX;
                self.used[q as usize] = false;
            }
            Some(false)
        }
    }

    let mut search = Search {
        coll_a,
        coll_b,
        candidates,
        order,
        map: vec![u32::MAX; a.num_points()],
        used: vec![false; b.num_points()],
        steps: 0,
        budget,
    };
    match search.go(0) {
        None => IsoOutcome::BudgetExhausted,
        Some(false) => IsoOutcome::NonIsomorphic,
        Some(true) => {
            let point_map = search.map;
            // Derive the line map from the point map.
            let mut index_b: HashMap<&Vec<u32>, u32> = HashMap::new();
            for (li, l) in b.lines().iter().enumerate() {
                index_b.insert(l, li as u32);
            }
            let mut line_map = Vec::with_capacity(a.num_lines());
            for l in a.lines() {
                let mut img: Vec<u32> = l.iter().map(|&p| point_map[p as usize]).collect();
                img.sort_unstable();
                match index_b.get(&img) {
                    Some(&li) => line_map.push(li),
                    None => return IsoOutcome::NonIsomorphic,
                }
            }
            let w = IsomorphismWitness {
                point_map,
                line_map,
            };
            if verify_witness(a, b, &w) {
                IsoOutcome::Isomorphic(w)
            } else {
                IsoOutcome::NonIsomorphic
            }
        }
    }
}

/// Three rounds of neighborhood-degree refinement over the bipartite
/// point/line incidence graph; returns a hash-like invariant per point.
fn refine_invariants(inc: &IncidenceStructure) -> Vec<u64> {
    let mut pinv: Vec<u64> = (0..inc.num_points())
        .map(|p| inc.lines_through(p as u32).len() as u64)
        .collect();
    let mut linv: Vec<u64> = inc.lines().iter().map(|l| l.len() as u64).collect();
    for _ in 0..3 {
        let new_linv: Vec<u64> = inc
            .lines()
            .iter()
            .map(|l| {
                let mut vals: Vec<u64> = l.iter().map(|&p| pinv[p as usize]).collect();
                vals.sort_unstable();
                mix(&vals)
            })
            .collect();
        let new_pinv: Vec<u64> = (0..inc.num_points())
            .map(|p| {
                let mut vals: Vec<u64> = inc
                    .lines_through(p as u32)
                    .iter()
                    .map(|&l| new_linv[l as usize])
                    .collect();
                vals.sort_unstable();
                mix(&vals)
            })
            .collect();
        pinv = new_pinv;
        linv = new_linv;
    }
    let _ = linv;
    pinv
}

fn mix(vals: &[u64]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &v in vals {
        h ^= v;
        h = h.wrapping_mul(0x100000001b3);
        h ^= h >> 29;
    }
    h
}

/// JSON document for a reconstructed structure: the shared incidence shape
/// plus a tags block recording point and line types.
#[derive(Serialize)]
pub struct ReconstructionDocument {
    pub format_version: u32,
    pub num_points: usize,
    pub lines: Vec<Vec<u32>>,
    pub tags: ReconstructionTags,
}

#[derive(Serialize)]
pub struct ReconstructionTags {
    /// "vertex" or "class" per point id.
    pub point_types: Vec<&'static str>,
    /// "clique" or "partition" per line id.
    pub line_types: Vec<&'static str>,
}

pub fn reconstruction_document(rs: &ReconstructedStructure) -> ReconstructionDocument {
    ReconstructionDocument {
        format_version: 1,
        num_points: rs.inc.num_points(),
        lines: rs.inc.lines().to_vec(),
        tags: ReconstructionTags {
            point_types: (0..rs.inc.num_points())
                .map(|p| if p < rs.num_vertex_points { "vertex" } else { "class" })
                .collect(),
            line_types: (0..rs.inc.num_lines())
                .map(|l| if l < rs.num_clique_lines { "clique" } else { "partition" })
                .collect(),
        },
    }
}
