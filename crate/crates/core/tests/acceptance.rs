//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line (run with --nocapture to see them). Every tolerance is exact; the
//! stated runtime budgets are asserted.

use std::time::{Duration, Instant};

use pwlab_core::cliques::{
    all_partitions, check_class_intersections, check_theta, quotient_matrices, theta_profile,
    CliqueLab, SweepMode, ThetaProfile,
};
use pwlab_core::geometry::{
    build_elliptic_quadric_gq, build_outer_points, build_parabolic_subgq, OuterPoints,
    QuadricModel, SubGq,
};
use pwlab_core::incidence::AxiomId;
use pwlab_core::linalg::rat_int;
use pwlab_core::reconstruct::{
    natural_isomorphism, reconstruct, verify_reconstruction, verify_witness,
};
use pwlab_core::scheme::{
    build_pw_scheme, intersection_numbers, load_scheme_str, pw_intersection_tensor, pw_valencies,
    save_scheme, AssociationScheme,
};
use pwlab_core::spectral::{
    krein_parameters, pw_eigenmatrices, pw_krein_vanishing, pw_krein_zero_closure,
    verify_eigenmatrices,
};
use pwlab_core::triples::{
    build_system, nonneg_propagate, solve, triple_numbers_bruteforce, unknown_index, ScaledRows,
    SystemOptions,
};

struct Fixture {
    model: QuadricModel,
    sub: SubGq,
    outer: OuterPoints,
    scheme: AssociationScheme,
}

fn fixture(q: u32) -> Fixture {
    let model = build_elliptic_quadric_gq(q, 7).expect("model");
    let sub = build_parabolic_subgq(&model).expect("section");
    let outer = build_outer_points(&model, &sub).expect("outer");
    let scheme = build_pw_scheme(&model, &outer).expect("scheme");
    Fixture {
        model,
        sub,
        outer,
        scheme,
    }
}

fn conclude(criterion: &str, started: Instant, budget: Option<Duration>) {
    let elapsed = started.elapsed();
    println!("acceptance {criterion}: PASS ({} ms)", elapsed.as_millis());
    if let Some(budget) = budget {
        assert!(
            elapsed < budget,
            "criterion {criterion} exceeded its budget: {elapsed:?} >= {budget:?}"
        );
    }
}

#[test]
fn criterion_01_model_construction_q3() {
    let start = Instant::now();
    let fx = fixture(3);
    assert_eq!(fx.model.gq.inc.num_points(), 112);
    assert_eq!(fx.model.gq.inc.num_lines(), 280);
    assert_eq!(fx.model.gq.order, (3, 9));
    assert_eq!(fx.sub.gq.inc.num_points(), 40);
    assert_eq!(fx.sub.gq.inc.num_lines(), 40);
    assert_eq!(fx.sub.gq.order, (3, 3));
    // build_outer_points certifies exactly two subtenders per ovoid; also
    // confirm the pairing is a fixed-point-free involution.
    assert_eq!(fx.outer.len(), 72);
    for x in 0..72u32 {
        let a = fx.outer.antipode_of(x);
        assert_ne!(a, x);
        assert_eq!(fx.outer.antipode_of(a), x);
        assert_eq!(fx.outer.ovoids[x as usize], fx.outer.ovoids[a as usize]);
        assert_eq!(fx.outer.subtended_ovoid(x).carrier.len(), 10);
    }
    conclude("1 (model construction, q=3)", start, Some(Duration::from_secs(5)));
}

#[test]
fn criterion_02_parameter_tables() {
    let start = Instant::now();
    let fx3 = fixture(3);
    let t3 = intersection_numbers(&fx3.scheme, 1).expect("q=3 tensor");
    assert_eq!(t3, pw_intersection_tensor(3));
    assert_eq!(t3.get(1, 2, 2), 12);
    assert_eq!(t3.get(2, 2, 2), 12);
    assert_eq!(t3.get(3, 3, 3), 1);
    assert_eq!(t3.get(4, 2, 2), 30);
    assert_eq!(fx3.scheme.valencies(), &pw_valencies(3));
    let q3_elapsed = start.elapsed();
    assert!(q3_elapsed < Duration::from_secs(10), "q=3 budget");

    let fx5 = fixture(5);
    let t5 = intersection_numbers(&fx5.scheme, 1).expect("q=5 tensor");
    assert_eq!(t5, pw_intersection_tensor(5));
    assert_eq!(fx5.scheme.valencies(), &pw_valencies(5));
    conclude("2 (parameter tables, q=3 and q=5)", start, Some(Duration::from_secs(180)));
}

#[test]
fn criterion_03_eigenmatrices() {
    let start = Instant::now();
    for q in [3u32, 5] {
        let fx = fixture(q);
        let tensor = intersection_numbers(&fx.scheme, 1).unwrap();
        let eig = pw_eigenmatrices(q as u64);
        // PQ = |X| I and every idempotent/annihilation identity, exactly.
        verify_eigenmatrices(&tensor, fx.scheme.valencies(), &eig).expect("certificate");
        if q == 3 {
            assert_eq!(eig.mults, vec![1, 6, 20, 30, 15]);
        }
    }
    conclude("3 (eigenmatrix certificates)", start, None);
}

#[test]
fn criterion_04_krein_pattern() {
    let start = Instant::now();
    for r in [3u64, 5] {
        let eig = pw_eigenmatrices(r);
        let n: u64 = pw_valencies(r).iter().sum();
        // nonnegativity is enforced inside krein_parameters
        let krein = krein_parameters(&eig, n).expect("nonnegative Krein parameters");
        let zeros = krein.vanishing_triples();
        // every listed triple (and each of its permutations) vanishes
        // exactly ...
        for &(i, j, k) in pw_krein_vanishing().iter() {
            assert!(
                zeros.contains(&(i, j, k)),
                "q^{k}_{{{i}{j}}} does not vanish at r = {r}"
            );
        }
        // ... and the complete zero set is the structural closure: the
        // Q-bipartite parity pattern plus the orbit of (1,1,4). The listed
        // set is a proper subset of the true zero set, so equality is
        // asserted against the closure.
        assert_eq!(zeros, pw_krein_zero_closure(), "zero set at r = {r}");
    }
    conclude("4 (Krein pattern, r in {3,5})", start, None);
}

#[test]
fn criterion_05_triple_solver_path() {
    let fx = fixture(3);
    let tensor = intersection_numbers(&fx.scheme, 1).unwrap();
    let eig = pw_eigenmatrices(3);
    let start = Instant::now();
    let system = build_system(
        &tensor,
        Some(&eig),
        3,
        3,
        3,
        SystemOptions {
            symmetry: true,
            krein: true,
        },
    )
    .unwrap();
    let space = solve(&system).unwrap();
    let i131 = unknown_index(1, 3, 1);
    let i133 = unknown_index(1, 3, 3);
    let i233 = unknown_index(2, 3, 3);
    assert!(space.functions_equal(i133, i131), "[1 3 3] = [1 3 1]");
    assert!(
        space.function_is_multiple(i233, i131, &rat_int(-2)),
        "[2 3 3] = -2 [1 3 1]"
    );
    let prop = nonneg_propagate(&system, &space).unwrap();
    assert_eq!(prop.space.pinned.get(&i133), Some(&rat_int(0)));
    assert_eq!(prop.space.pinned.get(&i233), Some(&rat_int(0)));
    assert_eq!(prop.space.pinned.get(&i131), Some(&rat_int(0)));
    conclude("5 (zero-forcing, solver path)", start, Some(Duration::from_secs(1)));
}

#[test]
fn criterion_06_triple_oracle_path() {
    let start = Instant::now();
    let fx = fixture(3);
    let tensor = intersection_numbers(&fx.scheme, 1).unwrap();
    let sum_system = build_system(&tensor, None, 3, 3, 3, SystemOptions::default()).unwrap();
    let rows = ScaledRows::from_system(&sum_system);
    let i133 = unknown_index(1, 3, 3);
    let i233 = unknown_index(2, 3, 3);
    let n = fx.scheme.size() as u32;
    let mut checked = 0u64;
    for x in 0..n {
        for y in (x + 1)..n {
            if fx.scheme.relation(x, y) != 3 {
                continue;
            }
            for z in (y + 1)..n {
                if fx.scheme.relation(x, z) != 3 || fx.scheme.relation(y, z) != 3 {
                    continue;
                }
                let counts = triple_numbers_bruteforce(&fx.scheme, x, y, z);
                assert_eq!(counts[i133], 0, "[1 3 3] at ({x},{y},{z})");
                assert_eq!(counts[i233], 0, "[2 3 3] at ({x},{y},{z})");
                assert_eq!(rows.check(&counts), None, "sum rows at ({x},{y},{z})");
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 240, "one triple per clique at r = 3");
    conclude("6 (zero-forcing, brute-force path)", start, Some(Duration::from_secs(30)));
}

#[test]
fn criterion_07_clique_structure() {
    let start = Instant::now();
    let fx = fixture(3);
    let lab = CliqueLab::new(&fx.scheme).unwrap();
    assert_eq!(lab.cliques.len(), 240);
    assert!(lab.cliques.iter().all(|c| c.len() == 3));
    assert!(lab.vertex_cliques.iter().all(|v| v.len() == 10));
    for c in 0..240u32 {
        lab.check_core(c).unwrap(); // |T_C| = 18, degrees (2, 2), antipode closure
        assert_eq!(lab.extended_core(c).len(), 18);
    }
    let classes = lab.congruence_classes().unwrap();
    assert_eq!(classes.len(), 40);
    check_class_intersections(&lab, &classes).unwrap(); // |T1 ∩ T2| in {0, 6}
    for c in 0..240u32 {
        // two-core splits into exactly r^2 - r - 2 = 4 class cliques
        let class = &classes.classes[classes.clique_class[c as usize] as usize];
        let core = lab.two_core(c);
        let inside = class
            .cliques
            .iter()
            .filter(|&&d| lab.cliques[d as usize].iter().all(|m| core.contains(m)))
            .count();
        assert_eq!(inside, 4);
    }
    for t in 0..40u32 {
        let rep = quotient_matrices(&lab, &classes, t).unwrap();
        assert_eq!(rep.b1, [[2, 18], [6, 14]]);
        assert_eq!(rep.b2, [[12, 18], [6, 24]]);
        assert_eq!(rep.eigenvalues_1, [20, -4]);
        assert_eq!(rep.eigenvalues_2, [30, 6]);
    }
    conclude("7 (clique structure, q=3)", start, Some(Duration::from_secs(30)));
}

#[test]
fn criterion_08_hypotheses_on_the_model() {
    let start = Instant::now();
    // q = 3, exhaustive
    let fx3 = fixture(3);
    let lab3 = CliqueLab::new(&fx3.scheme).unwrap();
    let rep3 = lab3.check_pencil_sums(SweepMode::Exhaustive);
    assert!(rep3.pass, "{:?}", rep3.witness);
    assert_eq!(rep3.expected_sum, 3);

    let classes3 = lab3.congruence_classes().unwrap();
    let mut theta2_total_checked = false;
    for i in 0..classes3.len() as u32 {
        for j in (i + 1)..classes3.len() as u32 {
            if !classes3.classes[i as usize]
                .member_bits
                .is_disjoint(&classes3.classes[j as usize].member_bits)
            {
                continue;
            }
            let rep = check_theta(&lab3, &classes3, i, j).unwrap();
            assert!(rep.pass, "{:?}", rep.witness);
            assert_eq!(rep.theta2_sum, 108);
            for x in 0..72u32 {
                if classes3.classes[i as usize].member_bits.get(x as usize)
                    || classes3.classes[j as usize].member_bits.get(x as usize)
                {
                    continue;
                }
                assert_eq!(
                    theta_profile(&lab3, &classes3, i, j, x),
                    ThetaProfile {
                        theta0: 1,
                        theta1: 6,
                        theta2: 3
                    }
                );
            }
            theta2_total_checked = true;
        }
    }
    assert!(theta2_total_checked);

    // q = 5, exhaustive (well within the stated budget)
    let fx5 = fixture(5);
    let lab5 = CliqueLab::new(&fx5.scheme).unwrap();
    let rep5 = lab5.check_pencil_sums(SweepMode::Exhaustive);
    assert!(rep5.pass, "{:?}", rep5.witness);
    assert_eq!(rep5.expected_sum, 15);
    conclude("8 (hypotheses on the model)", start, Some(Duration::from_secs(1800)));
}

#[test]
fn criterion_09_reconstruction_roundtrip() {
    let start = Instant::now();
    let fx = fixture(3);
    let lab = CliqueLab::new(&fx.scheme).unwrap();
    let classes = lab.congruence_classes().unwrap();
    let partitions = all_partitions(&lab, &classes).unwrap();
    let hyp1 = lab.check_pencil_sums(SweepMode::Exhaustive);
    let rs = reconstruct(&lab, &classes, &partitions, &hyp1).unwrap();
    let report = verify_reconstruction(&rs, &lab, &classes).unwrap();
    assert_eq!(report.main.order, Some((3, 9)));
    assert_eq!(report.sub.order, Some((3, 3)));
    assert!(report.involution_ok);
    assert!(report.double_subtension_ok);
    let witness = natural_isomorphism(
        &fx.model,
        &fx.sub,
        &fx.outer,
        &lab,
        &classes,
        &partitions,
        &rs,
    )
    .unwrap();
    assert!(verify_witness(&rs.inc, &fx.model.gq.inc, &witness));
    conclude("9 (reconstruction round trip, q=3)", start, Some(Duration::from_secs(60)));
}

#[test]
fn criterion_10_negative_controls() {
    let start = Instant::now();
    let fx = fixture(3);

    // (a) corrupting one relation entry of the scheme file fails validation
    let path = std::env::temp_dir().join("pwlab-acceptance-corrupt.json");
    save_scheme(&fx.scheme, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let old = doc["relations"][1].as_u64().unwrap();
    doc["relations"][1] = serde_json::Value::from(if old == 1 { 2 } else { 1 });
    let corrupted = serde_json::to_string(&doc).unwrap();
    let err = load_scheme_str(&corrupted).unwrap_err();
    assert!(err.to_string().contains("symmetric"), "witness: {err}");
    std::fs::remove_file(&path).ok();

    // (b) removing one partition leaves a point-degree witness at a class
    // point of the reconstruction
    let lab = CliqueLab::new(&fx.scheme).unwrap();
    let classes = lab.congruence_classes().unwrap();
    let partitions = all_partitions(&lab, &classes).unwrap();
    let hyp1 = lab.check_pencil_sums(SweepMode::Exhaustive);
    let rs = reconstruct(&lab, &classes, &partitions[1..], &hyp1).unwrap();
    let report = verify_reconstruction(&rs, &lab, &classes).unwrap();
    assert!(!report.main.certified());
    let v = report
        .main
        .violation(AxiomId::PointRegularity)
        .expect("a named first-axiom witness");
    assert!(rs.is_class_point(v.point.expect("witness point")));

    // (c) a random 72-vertex 5-relation symmetric partition is not a scheme
    let mut rng = pwlab_core::cliques::SplitMix64(0xacce97ed);
    let n = 72;
    let mut rel = vec![0u8; n * n];
    for x in 0..n {
        for y in (x + 1)..n {
            let c = (rng.below(4) + 1) as u8;
            rel[x * n + y] = c;
            rel[y * n + x] = c;
        }
    }
    match AssociationScheme::from_relation_table(n, 4, rel) {
        Err(e) => {
            // regularity failed; the witness names a vertex
            assert!(e.to_string().contains("class counts"), "witness: {e}");
        }
        Ok(scheme) => {
            // astronomically unlikely; the tensor constancy check must fail
            assert!(intersection_numbers(&scheme, 1).is_err());
        }
    }
    conclude("10 (negative controls)", start, Some(Duration::from_secs(10)));
}
