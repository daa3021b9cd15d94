//! Exhaustive oracle check at q = 3: the brute-force 64-array of every
//! ordered triple of distinct vertices satisfies every sum equation and
//! every vanishing-Krein equation of the system for its class triple.

use pwlab_core::geometry::{build_elliptic_quadric_gq, build_outer_points, build_parabolic_subgq};
use pwlab_core::scheme::{build_pw_scheme, intersection_numbers};
use pwlab_core::spectral::pw_eigenmatrices;
use pwlab_core::triples::{
    build_system, triple_numbers_bruteforce, ScaledRows, SystemOptions,
};

#[test]
fn every_triple_satisfies_its_system_q3() {
    let model = build_elliptic_quadric_gq(3, 7).unwrap();
    let sub = build_parabolic_subgq(&model).unwrap();
    let outer = build_outer_points(&model, &sub).unwrap();
    let scheme = build_pw_scheme(&model, &outer).unwrap();
    let tensor = intersection_numbers(&scheme, 1).unwrap();
    let eig = pw_eigenmatrices(3);

    // one system per class triple; symmetry identities are deliberately
    // left out (they constrain the solution set, not individual counts)
    let mut systems = Vec::with_capacity(64);
    for a in 1..=4 {
        for b in 1..=4 {
            for c in 1..=4 {
                let sys = build_system(
                    &tensor,
                    Some(&eig),
                    a,
                    b,
                    c,
                    SystemOptions {
                        symmetry: false,
                        krein: true,
                    },
                )
                .unwrap();
                systems.push(ScaledRows::from_system(&sys));
            }
        }
    }
    let system_of = |a: usize, b: usize, c: usize| &systems[(a - 1) * 16 + (b - 1) * 4 + (c - 1)];

    let n = scheme.size() as u32;
    let mut checked = 0u64;
    for x in 0..n {
        for y in 0..n {
            if y == x {
                continue;
            }
            for u in 0..n {
                if u == x || u == y {
                    continue;
                }
                let a = scheme.relation(x, y) as usize;
                let b = scheme.relation(y, u) as usize;
                let c = scheme.relation(u, x) as usize;
                let counts = triple_numbers_bruteforce(&scheme, x, y, u);
                assert_eq!(counts.iter().sum::<u64>(), 69);
                if let Some(row) = system_of(a, b, c).check(&counts) {
                    panic!(
                        "triple ({x}, {y}, {u}) with classes ({a}, {b}, {c}) violates row {row}"
                    );
                }
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 72 * 71 * 70);
}
