//! The classical model: the generalized quadrangle of the zeros of an
//! elliptic quadratic form on six coordinates over GF(q), its parabolic
//! hyperplane section of order (q, q), subtended ovoids and antipodes.
//!
//! Nothing here is trusted from theory: ellipticity is certified by the
//! point count, orders by the axiom checker, double subtension by explicit
//! grouping of ovoids.

use std::collections::HashMap;

use serde::Serialize;

use crate::bits::BitSet;
use crate::error::{PwError, PwResult};
use crate::field::{is_prime, projective_points, smallest_nonsquare, Fp, ProjectivePoint};
use crate::incidence::{GeneralizedQuadrangle, IncidenceStructure};

pub const DEFAULT_Q_BOUND: u32 = 7;

/// A quadratic form given by its upper-triangular coefficient matrix.
#[derive(Clone)]
pub struct QuadraticForm {
    q: u32,
    /// coeff[i][j] for i <= j multiplies x_i x_j.
    coeff: Vec<Vec<Fp>>,
}

impl QuadraticForm {
    pub fn dim(&self) -> usize {
        self.coeff.len()
    }

    /// x0*x1 + x2*x3 + x4^2 + b*x5^2 with b = -(smallest non-square), so the
    /// binary part is anisotropic over GF(q). For q = 3 this gives b = 1.
    pub fn elliptic(q: u32) -> QuadraticForm {
        let n = 6;
        let mut coeff = vec![vec![Fp::zero(q); n]; n];
        coeff[0][1] = Fp::one(q);
        coeff[2][3] = Fp::one(q);
        coeff[4][4] = Fp::one(q);
        coeff[5][5] = Fp::new(-(smallest_nonsquare(q) as i64), q);
        QuadraticForm { q, coeff }
    }

    /// Restriction to the hyperplane x_drop = 0 (coordinate removed).
    pub fn section(&self, drop: usize) -> QuadraticForm {
        let keep: Vec<usize> = (0..self.dim()).filter(|&i| i != drop).collect();
        let coeff = keep
            .iter()
            .map(|&i| keep.iter().map(|&j| self.coeff[i][j]).collect())
            .collect();
        QuadraticForm { q: self.q, coeff }
    }

    pub fn evaluate(&self, p: &[Fp]) -> Fp {
        let mut acc = Fp::zero(self.q);
        for i in 0..self.dim() {
            for j in i..self.dim() {
                if !self.coeff[i][j].is_zero() {
                    acc = acc + self.coeff[i][j] * p[i] * p[j];
                }
            }
        }
        acc
    }

    /// Polar form B(x, y) = f(x+y) - f(x) - f(y).
    pub fn polar(&self, x: &[Fp], y: &[Fp]) -> Fp {
        let mut acc = Fp::zero(self.q);
        for i in 0..self.dim() {
            for j in i..self.dim() {
                let c = self.coeff[i][j];
                if c.is_zero() {
                    continue;
                }
                if i == j {
                    acc = acc + c * (x[i] * y[i] + x[i] * y[i]);
                } else {
                    acc = acc + c * (x[i] * y[j] + x[j] * y[i]);
                }
            }
        }
        acc
    }
}

/// The certified model GQ together with its coordinates.
pub struct QuadricModel {
    pub q: u32,
    pub form: QuadraticForm,
    /// Canonical coordinates per point id (lexicographic id order).
    pub coords: Vec<ProjectivePoint>,
    pub gq: GeneralizedQuadrangle,
    coord_index: HashMap<Vec<u32>, u32>,
}

impl QuadricModel {
    pub fn point_id(&self, p: &ProjectivePoint) -> Option<u32> {
        self.coord_index.get(&p.values()).copied()
    }
}

/// Builds the order-(q, q^2) quadrangle carried by the elliptic quadric.
pub fn build_elliptic_quadric_gq(q: u32, q_bound: u32) -> PwResult<QuadricModel> {
    if !is_prime(q) {
        return Err(PwError::NotPrime(q));
    }
    if q < 3 {
        return Err(PwError::TooSmall(q));
    }
    if q > q_bound {
        return Err(PwError::AboveBound(q, q_bound));
    }
    let form = QuadraticForm::elliptic(q);
    let coords: Vec<ProjectivePoint> = projective_points(6, q)
        .into_iter()
        .filter(|p| form.evaluate(p.coords()).is_zero())
        .collect();
    let expected_points = (q as usize + 1) * ((q as usize).pow(3) + 1);
    if coords.len() != expected_points {
        return Err(PwError::Characterization(format!(
            "quadric has {} points, expected {} (form is not elliptic)",
            coords.len(),
            expected_points
        )));
    }
    let coord_index: HashMap<Vec<u32>, u32> = coords
        .iter()
        .enumerate()
        .map(|(i, p)| (p.values(), i as u32))
        .collect();

    let lines = singular_lines(&form, &coords, &coord_index)?;
    let inc = IncidenceStructure::new(coords.len(), lines)?;
    let gq = GeneralizedQuadrangle::certify(inc).map_err(|r| {
        PwError::Characterization(format!("quadric geometry failed GQ axioms: {:?}", r.violations))
    })?;
    if gq.order != (q as usize, (q * q) as usize) {
        return Err(PwError::Characterization(format!(
            "unexpected order {:?}, wanted ({}, {})",
            gq.order,
            q,
            q * q
        )));
    }
    Ok(QuadricModel {
        q,
        form,
        coords,
        gq,
        coord_index,
    })
}

/// Totally singular lines by pairwise span closure, deduplicated by sorted
/// point-id sets.
fn singular_lines(
    form: &QuadraticForm,
    coords: &[ProjectivePoint],
    index: &HashMap<Vec<u32>, u32>,
) -> PwResult<Vec<Vec<u32>>> {
    let q = form.q;
    let mut lines = std::collections::BTreeSet::new();
    for i in 0..coords.len() {
        for j in (i + 1)..coords.len() {
            if !form.polar(coords[i].coords(), coords[j].coords()).is_zero() {
                continue;
            }
            // Span {p_i + t p_j} ∪ {p_j}; on a quadric with B(p_i, p_j) = 0
            // every point of the span is singular, which we still verify.
            let mut ids = vec![i as u32, j as u32];
            for t in 1..q {
                let scale = Fp::new(t as i64, q);
                let combo: Vec<Fp> = coords[i]
                    .coords()
                    .iter()
                    .zip(coords[j].coords())
                    .map(|(&a, &b)| a + b * scale)
                    .collect();
                if !form.evaluate(&combo).is_zero() {
                    return Err(PwError::Characterization(
                        "span of a polar pair left the quadric".into(),
                    ));
                }
                let p = ProjectivePoint::new(combo).expect("combination of distinct points");
                let id = index.get(&p.values()).ok_or_else(|| {
                    PwError::Characterization("span point missing from quadric".into())
                })?;
                ids.push(*id);
            }
            ids.sort_unstable();
            ids.dedup();
            if ids.len() != q as usize + 1 {
                return Err(PwError::Characterization(format!(
                    "span closed to {} points, expected {}",
                    ids.len(),
                    q + 1
                )));
            }
            lines.insert(ids);
        }
    }
    Ok(lines.into_iter().collect())
}

/// The hyperplane-section subquadrangle together with its embedding.
pub struct SubGq {
    pub gq: GeneralizedQuadrangle,
    /// sub point id -> parent point id (increasing).
    pub point_map: Vec<u32>,
    /// sub line id -> parent line id.
    pub line_map: Vec<u32>,
    /// parent point id -> sub point id.
    pub parent_point_index: Vec<Option<u32>>,
}

/// Coordinate dropped to form the subquadrangle hyperplane x_4 = 0; the
/// doubly subtending involution is then the sign flip on this coordinate.
pub const SECTION_COORD: usize = 4;

pub fn build_parabolic_subgq(model: &QuadricModel) -> PwResult<SubGq> {
    let q = model.q;
    let point_map: Vec<u32> = (0..model.coords.len() as u32)
        .filter(|&i| model.coords[i as usize].coords()[SECTION_COORD].is_zero())
        .collect();
    let mut parent_point_index = vec![None; model.coords.len()];
    for (si, &pi) in point_map.iter().enumerate() {
        parent_point_index[pi as usize] = Some(si as u32);
    }
    let mut line_map = Vec::new();
    let mut lines = Vec::new();
    for (li, line) in model.gq.inc.lines().iter().enumerate() {
        let inside = line
            .iter()
            .filter(|&&p| parent_point_index[p as usize].is_some())
            .count();
        if inside == line.len() {
            line_map.push(li as u32);
            lines.push(
                line.iter()
                    .map(|&p| parent_point_index[p as usize].unwrap())
                    .collect(),
            );
        } else if inside != 1 {
            // Every parent line must meet the section in a full line or in
            // exactly one point.
            return Err(PwError::DegenerateSection(format!(
                "parent line {li} meets the hyperplane in {inside} points"
            )));
        }
    }
    let inc = IncidenceStructure::new(point_map.len(), lines)?;
    let gq = GeneralizedQuadrangle::certify(inc).map_err(|r| {
        PwError::DegenerateSection(format!("section failed GQ axioms: {:?}", r.violations))
    })?;
    if gq.order != (q as usize, q as usize) {
        return Err(PwError::DegenerateSection(format!(
            "section order {:?}, wanted ({q}, {q})",
            gq.order
        )));
    }
    Ok(SubGq {
        gq,
        point_map,
        line_map,
        parent_point_index,
    })
}

/// A subtended ovoid: the section points collinear with an outer point.
#[derive(Clone, Debug, Serialize)]
pub struct Ovoid {
    /// Sub point ids, increasing.
    pub carrier: Vec<u32>,
    /// Outer point (parent id) subtending it.
    pub subtender: u32,
}

/// Outer points of the model with their ovoids and the antipode involution.
pub struct OuterPoints {
    /// Outer index -> parent point id (increasing).
    pub ids: Vec<u32>,
    /// Parent point id -> outer index.
    pub index_of_parent: Vec<Option<u32>>,
    /// Ovoid carrier per outer index, as a bitset over sub point ids.
    pub ovoids: Vec<BitSet>,
    /// Antipode involution on outer indexes.
    pub antipode: Vec<u32>,
    /// Collinearity between outer points (outer-index space).
    pub collinear: Vec<BitSet>,
}

pub fn build_outer_points(model: &QuadricModel, sub: &SubGq) -> PwResult<OuterPoints> {
    let r = model.q as usize;
    let parent_collinear = model.gq.inc.collinearity();
    let ids: Vec<u32> = (0..model.coords.len() as u32)
        .filter(|&p| sub.parent_point_index[p as usize].is_none())
        .collect();
    let mut index_of_parent = vec![None; model.coords.len()];
    for (oi, &p) in ids.iter().enumerate() {
        index_of_parent[p as usize] = Some(oi as u32);
    }

    let sub_collinear = sub.gq.inc.collinearity();
    let mut ovoids = Vec::with_capacity(ids.len());
    for &p in &ids {
        let mut o = BitSet::new(sub.point_map.len());
        for (si, &sp) in sub.point_map.iter().enumerate() {
            if parent_collinear[p as usize].get(sp as usize) {
                o.set(si);
            }
        }
        if o.count() != r * r + 1 {
            return Err(PwError::Characterization(format!(
                "outer point {p} subtends a set of size {}, expected {}",
                o.count(),
                r * r + 1
            )));
        }
        // An ovoid carries no collinear pair of the section.
        let members: Vec<usize> = o.ones().collect();
        for (a, &x) in members.iter().enumerate() {
            for &y in &members[a + 1..] {
                if sub_collinear[x].get(y) {
                    return Err(PwError::Characterization(format!(
                        "subtended set of {p} contains a collinear pair ({x}, {y})"
                    )));
                }
            }
        }
        ovoids.push(o);
    }

    // Group equal ovoids: doubly subtended means exactly two subtenders each.
    let mut groups: HashMap<&BitSet, Vec<u32>> = HashMap::new();
    for (oi, o) in ovoids.iter().enumerate() {
        groups.entry(o).or_default().push(oi as u32);
    }
    let mut antipode = vec![u32::MAX; ids.len()];
    for (_, members) in groups {
        if members.len() != 2 {
            return Err(PwError::NotDoublySubtended {
                point: ids[members[0] as usize],
                count: members.len(),
            });
        }
        antipode[members[0] as usize] = members[1];
        antipode[members[1] as usize] = members[0];
    }

    let mut collinear = vec![BitSet::new(ids.len()); ids.len()];
    for (oi, &p) in ids.iter().enumerate() {
        for (oj, &q2) in ids.iter().enumerate().skip(oi + 1) {
            if parent_collinear[p as usize].get(q2 as usize) {
                collinear[oi].set(oj);
                collinear[oj].set(oi);
            }
        }
    }

    Ok(OuterPoints {
        ids,
        index_of_parent,
        ovoids,
        antipode,
        collinear,
    })
}

impl OuterPoints {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// The ovoid subtended by an outer point, by outer index.
    pub fn subtended_ovoid(&self, outer_idx: u32) -> Ovoid {
        Ovoid {
            carrier: self.ovoids[outer_idx as usize]
                .ones()
                .map(|i| i as u32)
                .collect(),
            subtender: self.ids[outer_idx as usize],
        }
    }

    pub fn antipode_of(&self, outer_idx: u32) -> u32 {
        self.antipode[outer_idx as usize]
    }
}

/// Checks that the sign flip on the section coordinate is an automorphism
/// fixing the section pointwise and swapping every antipodal pair.
pub fn check_hyperplane_involution(
    model: &QuadricModel,
    sub: &SubGq,
    outer: &OuterPoints,
) -> PwResult<()> {
    let mut image = Vec::with_capacity(model.coords.len());
    for p in &model.coords {
        let mut c = p.coords().to_vec();
        c[SECTION_COORD] = -c[SECTION_COORD];
        if !model.form.evaluate(&c).is_zero() {
            return Err(PwError::Characterization(
                "sign flip does not preserve the quadric".into(),
            ));
        }
        let img = ProjectivePoint::new(c).expect("nonzero");
        let id = model
            .point_id(&img)
            .ok_or_else(|| PwError::Characterization("involution image missing".into()))?;
        image.push(id);
    }
    for (p, &img) in image.iter().enumerate() {
        if image[img as usize] != p as u32 {
            return Err(PwError::Characterization("flip is not an involution".into()));
        }
        match sub.parent_point_index[p] {
            Some(_) => {
                if img != p as u32 {
                    return Err(PwError::Characterization(format!(
                        "section point {p} moved by the involution"
                    )));
                }
            }
            None => {
                let oi = outer.index_of_parent[p].unwrap();
                let anti = outer.antipode_of(oi);
                if outer.ids[anti as usize] != img {
                    return Err(PwError::Characterization(format!(
                        "involution image of outer point {p} is not its antipode"
                    )));
                }
                if img == p as u32 {
                    return Err(PwError::Characterization(format!(
                        "involution fixes outer point {p}"
                    )));
                }
            }
        }
    }
    // Line preservation.
    let line_set: std::collections::HashSet<&Vec<u32>> = model.gq.inc.lines().iter().collect();
    for line in model.gq.inc.lines() {
        let mut img: Vec<u32> = line.iter().map(|&p| image[p as usize]).collect();
        img.sort_unstable();
        if !line_set.contains(&img) {
            return Err(PwError::Characterization(
                "involution does not preserve lines".into(),
            ));
        }
    }
    Ok(())
}

/// Ovoid intersection sizes must fall in {1, r+1, r^2+1} and correlate with
/// the collinearity cases; returns the first offending pair otherwise.
pub fn check_ovoid_intersections(model: &QuadricModel, outer: &OuterPoints) -> PwResult<()> {
    let r = model.q as usize;
    let n = outer.len();
    for x in 0..n {
        let xa = outer.antipode_of(x as u32) as usize;
        for y in (x + 1)..n {
            let size = outer.ovoids[x].intersection_count(&outer.ovoids[y]);
            let same = outer.ovoids[x] == outer.ovoids[y];
            let coll_x = outer.collinear[x].get(y);
            let coll_xa = outer.collinear[xa].get(y);
            let expected = if same {
                r * r + 1
            } else if coll_x || coll_xa {
                1
            } else {
                r + 1
            };
            if size != expected {
                return Err(PwError::Characterization(format!(
                    "ovoid intersection of outer pair ({x}, {y}) is {size}, expected {expected}"
                )));
            }
        }
    }
    Ok(())
}

/// JSON document for a built model: coordinates, lines, section embedding.
#[derive(Serialize)]
pub struct GqDocument {
    pub format_version: u32,
    pub q: u32,
    pub points: Vec<Vec<u32>>,
    pub lines: Vec<Vec<u32>>,
    pub sub_points: Vec<u32>,
    pub sub_lines: Vec<u32>,
}

pub fn gq_document(model: &QuadricModel, sub: &SubGq) -> GqDocument {
    GqDocument {
        format_version: 1,
        q: model.q,
        points: model.coords.iter().map(|p| p.values()).collect(),
        lines: model.gq.inc.lines().to_vec(),
        sub_points: sub.point_map.clone(),
        sub_lines: sub.line_map.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_q() {
        assert!(matches!(
            build_elliptic_quadric_gq(4, 7),
            Err(PwError::NotPrime(4))
        ));
        assert!(matches!(
            build_elliptic_quadric_gq(2, 7),
            Err(PwError::TooSmall(2))
        ));
        assert!(matches!(
            build_elliptic_quadric_gq(11, 7),
            Err(PwError::AboveBound(11, 7))
        ));
    }

    #[test]
    fn q3_model_counts() {
        let model = build_elliptic_quadric_gq(3, 7).unwrap();
        assert_eq!(model.gq.inc.num_points(), 112);
        assert_eq!(model.gq.inc.num_lines(), 280);
        assert_eq!(model.gq.order, (3, 9));
        // every point on t+1 = 10 lines
        for p in 0..112 {
            assert_eq!(model.gq.inc.lines_through(p).len(), 10);
        }
        let sub = build_parabolic_subgq(&model).unwrap();
        assert_eq!(sub.gq.inc.num_points(), 40);
        assert_eq!(sub.gq.inc.num_lines(), 40);
        assert_eq!(sub.gq.order, (3, 3));
    }

    #[test]
    fn q5_model_counts() {
        let model = build_elliptic_quadric_gq(5, 7).unwrap();
        assert_eq!(model.gq.inc.num_points(), 756);
        assert_eq!(model.gq.inc.num_lines(), 3276);
        assert_eq!(model.gq.order, (5, 25));
        let sub = build_parabolic_subgq(&model).unwrap();
        assert_eq!(sub.gq.inc.num_points(), 156);
        assert_eq!(sub.gq.inc.num_lines(), 156);
        assert_eq!(sub.gq.order, (5, 5));
    }

    #[test]
    #[ignore = "q = 7 build takes a couple of minutes; run explicitly"]
    fn q7_model_counts() {
        let model = build_elliptic_quadric_gq(7, 7).unwrap();
        assert_eq!(model.gq.inc.num_points(), 2752);
        assert_eq!(model.gq.inc.num_lines(), 17200);
        assert_eq!(model.gq.order, (7, 49));
        let sub = build_parabolic_subgq(&model).unwrap();
        assert_eq!(sub.gq.order, (7, 7));
        let outer = build_outer_points(&model, &sub).unwrap();
        assert_eq!(outer.len(), 2352);
    }

    #[test]
    fn q3_ovoids_and_antipodes() {
        let model = build_elliptic_quadric_gq(3, 7).unwrap();
        let sub = build_parabolic_subgq(&model).unwrap();
        let outer = build_outer_points(&model, &sub).unwrap();
        assert_eq!(outer.len(), 72);
        for x in 0..72u32 {
            let o = outer.subtended_ovoid(x);
            assert_eq!(o.carrier.len(), 10);
            let a = outer.antipode_of(x);
            assert_ne!(a, x);
            assert_eq!(outer.antipode_of(a), x);
            assert_eq!(outer.ovoids[x as usize], outer.ovoids[a as usize]);
        }
        check_hyperplane_involution(&model, &sub, &outer).unwrap();
        check_ovoid_intersections(&model, &outer).unwrap();
    }
}
