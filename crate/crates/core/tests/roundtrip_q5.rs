//! End-to-end round trip at q = 5, plus the relabeling determinism check
//! at q = 3: reconstructing a vertex-relabeled scheme yields the same
//! structure up to the induced relabeling.

use pwlab_core::cliques::{all_partitions, CliqueLab, SweepMode};
use pwlab_core::geometry::{build_elliptic_quadric_gq, build_outer_points, build_parabolic_subgq};
use pwlab_core::reconstruct::{
    natural_isomorphism, reconstruct, verify_reconstruction, verify_witness,
};
use pwlab_core::scheme::{build_pw_scheme, AssociationScheme};

#[test]
fn q5_reconstruction_roundtrip() {
    let model = build_elliptic_quadric_gq(5, 7).unwrap();
    let sub = build_parabolic_subgq(&model).unwrap();
    let outer = build_outer_points(&model, &sub).unwrap();
    let scheme = build_pw_scheme(&model, &outer).unwrap();
    assert_eq!(scheme.size(), 600);

    let lab = CliqueLab::new(&scheme).unwrap();
    assert_eq!(lab.cliques.len(), 3120);
    let classes = lab.congruence_classes().unwrap();
    assert_eq!(classes.len(), 156);
    let partitions = all_partitions(&lab, &classes).unwrap();
    assert_eq!(partitions.len(), 156);
    let hyp1 = lab.check_pencil_sums(SweepMode::Exhaustive);
    assert!(hyp1.pass, "{:?}", hyp1.witness);

    let rs = reconstruct(&lab, &classes, &partitions, &hyp1).unwrap();
    assert_eq!(rs.inc.num_points(), 756);
    assert_eq!(rs.inc.num_lines(), 3276);
    let report = verify_reconstruction(&rs, &lab, &classes).unwrap();
    assert_eq!(report.main.order, Some((5, 25)), "{:?}", report.main.violations);
    assert_eq!(report.sub.order, Some((5, 5)), "{:?}", report.sub.violations);
    assert!(report.involution_ok);
    assert!(report.double_subtension_ok);

    let witness =
        natural_isomorphism(&model, &sub, &outer, &lab, &classes, &partitions, &rs).unwrap();
    assert!(verify_witness(&rs.inc, &model.gq.inc, &witness));
}

#[test]
fn q3_reconstruction_commutes_with_relabeling() {
    let model = build_elliptic_quadric_gq(3, 7).unwrap();
    let sub = build_parabolic_subgq(&model).unwrap();
    let outer = build_outer_points(&model, &sub).unwrap();
    let scheme = build_pw_scheme(&model, &outer).unwrap();
    let n = scheme.size();

    // fixed permutation: multiply by 29 mod 72 (a unit) then rotate
    let perm: Vec<u32> = (0..n as u32).map(|x| ((x as usize * 29 + 5) % n) as u32).collect();
    let mut rel = vec![0u8; n * n];
    for x in 0..n {
        for y in 0..n {
            rel[perm[x] as usize * n + perm[y] as usize] = scheme.relation(x as u32, y as u32);
        }
    }
    let relabeled = AssociationScheme::from_relation_table(n, 4, rel).unwrap();

    let lab1 = CliqueLab::new(&scheme).unwrap();
    let lab2 = CliqueLab::new(&relabeled).unwrap();
    let classes1 = lab1.congruence_classes().unwrap();
    let classes2 = lab2.congruence_classes().unwrap();
    let parts1 = all_partitions(&lab1, &classes1).unwrap();
    let parts2 = all_partitions(&lab2, &classes2).unwrap();
    let hyp1 = lab1.check_pencil_sums(SweepMode::Exhaustive);
    let hyp2 = lab2.check_pencil_sums(SweepMode::Exhaustive);
    let rs1 = reconstruct(&lab1, &classes1, &parts1, &hyp1).unwrap();
    let rs2 = reconstruct(&lab2, &classes2, &parts2, &hyp2).unwrap();

    // induced class map: members through perm, then lookup
    let mut class_map = vec![u32::MAX; classes1.len()];
    for (i, class) in classes1.classes.iter().enumerate() {
        let mut image: Vec<u32> = class.members.iter().map(|&v| perm[v as usize]).collect();
        image.sort_unstable();
        let j = classes2
            .classes
            .iter()
            .position(|c| c.members == image)
            .expect("image class exists");
        class_map[i] = j as u32;
    }
    // the line families agree under the induced point map
    let point_map = |p: u32| -> u32 {
        if (p as usize) < n {
            perm[p as usize]
        } else {
            n as u32 + class_map[p as usize - n]
        }
    };
    let lines2: std::collections::BTreeSet<Vec<u32>> =
        rs2.inc.lines().iter().cloned().collect();
    for line in rs1.inc.lines() {
        let mut image: Vec<u32> = line.iter().map(|&p| point_map(p)).collect();
        image.sort_unstable();
        assert!(lines2.contains(&image), "line image missing: {image:?}");
    }
    assert_eq!(rs1.inc.num_lines(), rs2.inc.num_lines());
}
