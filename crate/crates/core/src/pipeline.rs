//! The staged verification pipeline: build, scheme parameters, spectra,
//! triple systems, clique structure, hypotheses, reconstruction and (in
//! geometric mode) the isomorphism back to the source. A stage with a
//! failing check halts everything downstream; failures are reported, not
//! thrown.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde_json::{json, Value};

use crate::cliques::{
    all_partitions, avoiding_cliques, check_class_intersections, check_theta, quotient_matrices,
    sunflower_common, CliqueLab, CongruenceClasses, PencilSumReport, SweepMode,
};
use crate::error::PwResult;
use crate::geometry::{
    build_elliptic_quadric_gq, build_outer_points, build_parabolic_subgq,
    check_hyperplane_involution, check_ovoid_intersections, OuterPoints, QuadricModel, SubGq,
    DEFAULT_Q_BOUND,
};
use crate::linalg::rat_int;
use crate::reconstruct::{
    natural_isomorphism, reconstruct, verify_reconstruction, ReconstructedStructure,
};
use crate::report::{Report, StageLog};
use crate::scheme::{
    build_pw_scheme, infer_r, intersection_numbers, load_scheme, pw_intersection_tensor,
    pw_valencies, recount_base_pair, AssociationScheme, IntersectionTensor,
};
use crate::spectral::{
    eigenmatrices_from_tensor, embedding_basis_rank, krein_parameters, pw_eigenmatrices,
    pw_krein_vanishing, pw_krein_zero_closure, spherical_gram, verify_eigenmatrices,
    Eigenmatrices,
};
use crate::triples::{
    build_system, nonneg_propagate, solve, triple_numbers_bruteforce, unknown_index, ScaledRows,
    SystemOptions,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Build,
    Params,
    Eigen,
    Triples,
    Cliques,
    Hypotheses,
    Reconstruct,
    Iso,
}

pub const ALL_STAGES: [Stage; 8] = [
    Stage::Build,
    Stage::Params,
    Stage::Eigen,
    Stage::Triples,
    Stage::Cliques,
    Stage::Hypotheses,
    Stage::Reconstruct,
    Stage::Iso,
];

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Build => "build",
            Stage::Params => "params",
            Stage::Eigen => "eigen",
            Stage::Triples => "triples",
            Stage::Cliques => "cliques",
            Stage::Hypotheses => "hypotheses",
            Stage::Reconstruct => "reconstruct",
            Stage::Iso => "iso",
        }
    }

    pub fn parse(name: &str) -> Option<Stage> {
        ALL_STAGES.iter().copied().find(|s| s.name() == name)
    }

    fn prereqs(self) -> &'static [Stage] {
        match self {
            Stage::Build => &[],
            Stage::Params => &[Stage::Build],
            Stage::Eigen => &[Stage::Params],
            Stage::Triples => &[Stage::Eigen],
            Stage::Cliques => &[Stage::Params],
            Stage::Hypotheses => &[Stage::Cliques],
            Stage::Reconstruct => &[Stage::Hypotheses],
            Stage::Iso => &[Stage::Reconstruct],
        }
    }
}

#[derive(Clone, Debug)]
pub enum Mode {
    Geometric { q: u32 },
    Abstract { path: PathBuf },
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mode: Mode,
    /// None = every stage.
    pub checks: Option<BTreeSet<Stage>>,
    pub threads: usize,
    pub q_bound: u32,
    /// Sampled pencil-sum sweep (intended for q = 7).
    pub sample: bool,
    pub seed: u64,
    pub sample_pairs_per_vertex: usize,
    pub timings: bool,
}

impl RunConfig {
    pub fn geometric(q: u32) -> Self {
        RunConfig {
            mode: Mode::Geometric { q },
            checks: None,
            threads: 1,
            q_bound: DEFAULT_Q_BOUND,
            sample: false,
            seed: 0x5eed,
            sample_pairs_per_vertex: 50,
            timings: false,
        }
    }

    pub fn abstract_file(path: PathBuf) -> Self {
        RunConfig {
            mode: Mode::Abstract { path },
            ..RunConfig::geometric(0)
        }
    }
}

#[derive(Default)]
struct PipelineState {
    model: Option<QuadricModel>,
    sub: Option<SubGq>,
    outer: Option<OuterPoints>,
    scheme: Option<AssociationScheme>,
    r: Option<u64>,
    tensor: Option<IntersectionTensor>,
    eig: Option<Eigenmatrices>,
    lab_data: Option<LabData>,
}

struct LabData {
    classes: CongruenceClasses,
    partitions: Vec<Vec<u32>>,
    pencil_report: Option<PencilSumReport>,
    reconstruction: Option<ReconstructedStructure>,
}

/// Runs the selected stages (with their prerequisites) in order and
/// aggregates a report. Never panics on check failures: they become failing
/// records and downstream stages are skipped.
pub fn run_pipeline(config: &RunConfig) -> Report {
    let (mode_name, q) = match &config.mode {
        Mode::Geometric { q } => ("geometric", Some(*q)),
        Mode::Abstract { .. } => ("abstract", None),
    };
    let mut report = Report::new(mode_name, q);

    let selected: BTreeSet<Stage> = match &config.checks {
        None => ALL_STAGES.into_iter().collect(),
        Some(set) => {
            let mut closure = set.clone();
            loop {
                let mut grew = false;
                for s in closure.clone() {
                    for p in s.prereqs() {
                        grew |= closure.insert(*p);
                    }
                }
                if !grew {
                    break;
                }
            }
            closure
        }
    };
    let wanted = config.checks.clone();
    let include = |stage: Stage, log: &StageLog, report: &mut Report| {
        let keep = wanted.as_ref().map_or(true, |w| w.contains(&stage));
        for rec in &log.records {
            if keep || !rec.pass {
                report.records.push(rec.clone());
            }
        }
    };

    let mut state = PipelineState::default();
    let mut halted = false;
    // A CliqueLab borrows the scheme, so clique-dependent stages run inside
    // a nested scope once the scheme is final.
    for stage in ALL_STAGES {
        if !selected.contains(&stage) {
            continue;
        }
        if halted {
            report.skipped_stages.push(stage.name().into());
            continue;
        }
        if stage == Stage::Iso && matches!(config.mode, Mode::Abstract { .. }) {
            report
                .skipped_stages
                .push("iso (geometric mode only)".into());
            continue;
        }
        let mut log = StageLog::new(config.timings);
        match stage {
            Stage::Build => stage_build(config, &mut state, &mut log),
            Stage::Params => stage_params(config, &mut state, &mut log),
            Stage::Eigen => stage_eigen(config, &mut state, &mut log),
            Stage::Triples => stage_triples(config, &mut state, &mut log),
            Stage::Cliques | Stage::Hypotheses | Stage::Reconstruct | Stage::Iso => {
                stage_with_lab(stage, config, &mut state, &mut log)
            }
        }
        let ok = log.all_pass();
        include(stage, &log, &mut report);
        if !ok {
            halted = true;
        }
    }
    report.finalize();
    report
}

fn stage_build(config: &RunConfig, state: &mut PipelineState, log: &mut StageLog) {
    match &config.mode {
        Mode::Geometric { q } => {
            let q = *q;
            let model = log.run_result("gq-build", || {
                build_elliptic_quadric_gq(q, config.q_bound)
                    .map(|m| {
                        let values = json!({
                            "points": m.gq.inc.num_points(),
                            "lines": m.gq.inc.num_lines(),
                            "order": m.gq.order,
                        });
                        (m, Some(values))
                    })
                    .map_err(|e| e.to_string())
            });
            let Some(model) = model else { return };
            let expected_points = (q as usize + 1) * ((q as usize).pow(3) + 1);
            let expected_lines = ((q as usize).pow(2) + 1) * ((q as usize).pow(3) + 1);
            log.run("gq-counts", || {
                (
                    model.gq.inc.num_points() == expected_points
                        && model.gq.inc.num_lines() == expected_lines
                        && model.gq.order == (q as usize, (q * q) as usize),
                    None,
                    Some(json!({
                        "points": model.gq.inc.num_points(),
                        "lines": model.gq.inc.num_lines(),
                    })),
                )
            });
            let sub = log.run_result("subgq-section", || {
                build_parabolic_subgq(&model)
                    .map(|s| {
                        let values = json!({
                            "points": s.gq.inc.num_points(),
                            "lines": s.gq.inc.num_lines(),
                            "order": s.gq.order,
                        });
                        (s, Some(values))
                    })
                    .map_err(|e| e.to_string())
            });
            let Some(sub) = sub else {
                state.model = Some(model);
                return;
            };
            let outer = log.run_result("ovoids-double-subtension", || {
                build_outer_points(&model, &sub)
                    .map(|o| {
                        let values = json!({
                            "outer_points": o.len(),
                            "ovoid_size": (q * q + 1),
                        });
                        (o, Some(values))
                    })
                    .map_err(|e| e.to_string())
            });
            let Some(outer) = outer else {
                state.model = Some(model);
                state.sub = Some(sub);
                return;
            };
            log.run_result("hyperplane-involution", || {
                check_hyperplane_involution(&model, &sub, &outer)
                    .map(|_| ((), None))
                    .map_err(|e| e.to_string())
            });
            log.run_result("ovoid-intersection-cases", || {
                check_ovoid_intersections(&model, &outer)
                    .map(|_| ((), None))
                    .map_err(|e| e.to_string())
            });
            state.model = Some(model);
            state.sub = Some(sub);
            state.outer = Some(outer);
        }
        Mode::Abstract { path } => {
            let scheme = log.run_result("scheme-load", || {
                load_scheme(path)
                    .map(|s| {
                        let values = json!({
                            "size": s.size(),
                            "classes": s.classes(),
                            "valencies": s.valencies(),
                        });
                        (s, Some(values))
                    })
                    .map_err(|e| e.to_string())
            });
            state.scheme = scheme;
        }
    }
}

fn stage_params(config: &RunConfig, state: &mut PipelineState, log: &mut StageLog) {
    if state.scheme.is_none() {
        let (Some(model), Some(outer)) = (&state.model, &state.outer) else {
            log.run("scheme-build", || {
                (false, Some(Value::String("build stage incomplete".into())), None)
            });
            return;
        };
        let scheme = log.run_result("scheme-build", || {
            build_pw_scheme(model, outer)
                .map(|s| {
                    let values = json!({"size": s.size(), "valencies": s.valencies()});
                    (s, Some(values))
                })
                .map_err(|e| e.to_string())
        });
        state.scheme = scheme;
    }
    let Some(scheme) = &state.scheme else { return };

    let r = log.run_result("parameter-inference", || {
        infer_r(scheme.size() as u64)
            .filter(|_| scheme.classes() == 4)
            .map(|r| (r, Some(json!({"r": r}))))
            .ok_or_else(|| {
                format!(
                    "no Penttila-Williford parameter matches size {} with {} classes",
                    scheme.size(),
                    scheme.classes()
                )
            })
    });
    let Some(r) = r else { return };
    state.r = Some(r);

    log.run("valencies-expected", || {
        let expected = pw_valencies(r);
        (
            scheme.valencies() == expected,
            (scheme.valencies() != expected).then(|| {
                json!({"computed": scheme.valencies(), "expected": expected.to_vec()})
            }),
            Some(json!({"valencies": scheme.valencies()})),
        )
    });

    let tensor = log.run_result("intersection-constancy", || {
        intersection_numbers(scheme, config.threads)
            .map(|t| (t, None))
            .map_err(|e| e.to_string())
    });
    let Some(tensor) = tensor else { return };

    log.run("intersection-expected", || {
        let expected = pw_intersection_tensor(r);
        let mut mismatch = None;
        'out: for k in 0..=4 {
            for i in 0..=4 {
                for j in 0..=4 {
                    if tensor.get(k, i, j) != expected.get(k, i, j) {
                        mismatch = Some(json!({
                            "k": k, "i": i, "j": j,
                            "computed": tensor.get(k, i, j),
                            "expected": expected.get(k, i, j),
                        }));
                        break 'out;
                    }
                }
            }
        }
        (mismatch.is_none(), mismatch, None)
    });

    log.run("pair-recount-spotcheck", || {
        let n = scheme.size() as u32;
        let pairs = [(0, 1), (0, n - 1), (n / 2, n / 3), (n - 2, n - 1)];
        for (x, y) in pairs {
            let k = scheme.relation(x, y) as usize;
            let counts = recount_base_pair(scheme, x, y);
            for i in 0..=4 {
                for j in 0..=4 {
                    if counts[i][j] != tensor.get(k, i, j) {
                        return (
                            false,
                            Some(json!({"x": x, "y": y, "i": i, "j": j})),
                            None,
                        );
                    }
                }
            }
        }
        (true, None, None)
    });

    log.run("antipode-relation-swap", || {
        // (x,y) in R1 iff (x, y') in R3; (x,y) in R2 iff (x, y') in R2
        for x in 0..scheme.size() as u32 {
            let Some(xa) = scheme.partner(x, 4) else {
                return (
                    false,
                    Some(json!({"vertex": x, "detail": "no unique 4-partner"})),
                    None,
                );
            };
            for y in 0..scheme.size() as u32 {
                let rel = scheme.relation(x, y);
                let swapped = scheme.relation(xa, y);
                let expected = match rel {
                    1 => 3,
                    3 => 1,
                    2 => 2,
                    other => {
                        let _ = other;
                        continue;
                    }
                };
                if swapped != expected {
                    return (false, Some(json!({"x": x, "y": y})), None);
                }
            }
        }
        (true, None, None)
    });

    state.tensor = Some(tensor);
}

fn stage_eigen(_config: &RunConfig, state: &mut PipelineState, log: &mut StageLog) {
    let (Some(scheme), Some(tensor), Some(r)) = (&state.scheme, &state.tensor, state.r) else {
        log.run("eigen-candidate-certificate", || {
            (false, Some(Value::String("params stage incomplete".into())), None)
        });
        return;
    };
    let candidate = pw_eigenmatrices(r);
    let cand_ok = log.run_result("eigen-candidate-certificate", || {
        verify_eigenmatrices(tensor, scheme.valencies(), &candidate)
            .map(|_| ((), Some(json!({"multiplicities": candidate.mults}))))
            .map_err(|e| e.to_string())
    });
    if cand_ok.is_none() {
        return;
    }
    log.run_result("eigen-algebra-agreement", || {
        eigenmatrices_from_tensor(tensor, scheme.valencies())
            .map_err(|e| e.to_string())
            .and_then(|alg| {
                if alg.p == candidate.p && alg.q == candidate.q {
                    Ok(((), None))
                } else {
                    Err("algebra eigenmatrices differ from the closed forms".into())
                }
            })
    });

    let krein = log.run_result("krein-nonnegative", || {
        krein_parameters(&candidate, scheme.size() as u64)
            .map(|k| (k, None))
            .map_err(|e| e.to_string())
    });
    if let Some(krein) = krein {
        log.run("krein-listed-zeros", || {
            let zeros = krein.vanishing_triples();
            let listed = pw_krein_vanishing();
            let missing: Vec<_> = listed.difference(&zeros).collect();
            (
                missing.is_empty(),
                (!missing.is_empty()).then(|| json!(format!("{missing:?}"))),
                Some(json!({"listed": listed.len()})),
            )
        });
        log.run("krein-zero-closure", || {
            let zeros = krein.vanishing_triples();
            let closure = pw_krein_zero_closure();
            (
                zeros == closure,
                (zeros != closure).then(|| json!(format!("computed {zeros:?}"))),
                Some(json!({"zeros": zeros.len()})),
            )
        });
    }

    log.run_result("gram-rank", || {
        spherical_gram(scheme, &candidate)
            .map_err(|e| e.to_string())
            .and_then(|g| {
                let n3 = scheme.valencies()[3];
                let target = (n3 + 1) as usize;
                let diag_expected =
                    rat_int((candidate.mults[1] + candidate.mults[4]) as i64);
                if g.rank != target {
                    return Err(format!("gram rank {} != {}", g.rank, target));
                }
                if g.class_values[0] != diag_expected {
                    return Err("gram diagonal differs from m1 + m4".into());
                }
                let values = json!({
                    "rank": g.rank,
                    "rref_rank": g.rref_rank,
                    "psd": g.psd,
                });
                Ok(((), Some(values)))
            })
    });

    log.run("embedding-basis-rank", || {
        // Reported, not asserted: whether {x*} ∪ {y*: y in R3(x)} spans.
        let rank = embedding_basis_rank(scheme, &candidate, 0);
        let dim = scheme.valencies()[3] as usize + 1;
        (true, None, Some(json!({"rank": rank, "dimension": dim})))
    });

    state.eig = Some(candidate);
}

fn stage_triples(_config: &RunConfig, state: &mut PipelineState, log: &mut StageLog) {
    let (Some(scheme), Some(tensor), Some(eig)) = (&state.scheme, &state.tensor, &state.eig)
    else {
        log.run("triple-system", || {
            (false, Some(Value::String("eigen stage incomplete".into())), None)
        });
        return;
    };
    let full = log.run_result("triple-system", || {
        build_system(
            tensor,
            Some(eig),
            3,
            3,
            3,
            SystemOptions {
                symmetry: true,
                krein: true,
            },
        )
        .map(|s| {
            let values = json!({
                "equations": s.rows.len(),
                "sum_rows": s.sum_rows,
                "symmetry_rows": s.symmetry_rows,
                "krein_rows": s.krein_rows,
            });
            (s, Some(values))
        })
        .map_err(|e| e.to_string())
    });
    let Some(full) = full else { return };

    let space = log.run_result("triple-solver-dependencies", || {
        let space = solve(&full).map_err(|e| e.to_string())?;
        let i131 = unknown_index(1, 3, 1);
        let i133 = unknown_index(1, 3, 3);
        let i233 = unknown_index(2, 3, 3);
        if !space.functions_equal(i133, i131) {
            return Err("[1 3 3] does not equal [1 3 1] on the solution space".into());
        }
        if !space.function_is_multiple(i233, i131, &rat_int(-2)) {
            return Err("[2 3 3] does not equal -2 [1 3 1] on the solution space".into());
        }
        Ok((space, None))
    });
    let Some(space) = space else { return };

    log.run_result("triple-nonneg-pins", || {
        nonneg_propagate(&full, &space)
            .map_err(|e| e.to_string())
            .and_then(|prop| {
                for (l, m, n) in [(1, 3, 1), (1, 3, 3), (2, 3, 3)] {
                    let idx = unknown_index(l, m, n);
                    match prop.space.pinned.get(&idx) {
                        Some(v) if v == &rat_int(0) => {}
                        other => {
                            return Err(format!(
                                "[{l} {m} {n}] pinned to {other:?}, expected 0"
                            ))
                        }
                    }
                }
                let values = json!({
                    "newly_pinned": prop.newly_pinned.len(),
                    "iterations": prop.iterations,
                });
                Ok(((), Some(values)))
            })
    });

    // Oracle path: brute-force counts over every pairwise-3-related triple.
    let subst_system = match build_system(
        tensor,
        Some(eig),
        3,
        3,
        3,
        SystemOptions {
            symmetry: false,
            krein: true,
        },
    ) {
        Ok(s) => s,
        Err(_) => return,
    };
    let subst_rows = ScaledRows::from_system(&subst_system);
    log.run("triple-bruteforce-sweep", || {
        let n = scheme.size() as u32;
        let i133 = unknown_index(1, 3, 3);
        let i233 = unknown_index(2, 3, 3);
        let mut triples = 0u64;
        for x in 0..n {
            for y in (x + 1)..n {
                if scheme.relation(x, y) != 3 {
                    continue;
                }
                for z in (y + 1)..n {
                    if scheme.relation(x, z) != 3 || scheme.relation(y, z) != 3 {
                        continue;
                    }
                    triples += 1;
                    let counts = triple_numbers_bruteforce(scheme, x, y, z);
                    if counts[i133] != 0 || counts[i233] != 0 {
                        return (
                            false,
                            Some(json!({
                                "triple": [x, y, z],
                                "[1 3 3]": counts[i133],
                                "[2 3 3]": counts[i233],
                            })),
                            None,
                        );
                    }
                    if counts.iter().sum::<u64>() != scheme.size() as u64 - 3 {
                        return (
                            false,
                            Some(json!({"triple": [x, y, z], "detail": "total != |X| - 3"})),
                            None,
                        );
                    }
                    if let Some(row) = subst_rows.check(&counts) {
                        return (
                            false,
                            Some(json!({"triple": [x, y, z], "violated_row": row})),
                            None,
                        );
                    }
                }
            }
        }
        (triples > 0, None, Some(json!({"triples_checked": triples})))
    });

    // Spot-check mixed-class triples against their own systems.
    log.run("triple-bruteforce-mixed", || {
        let n = scheme.size() as u32;
        let mut rng = crate::cliques::SplitMix64(0x7a17);
        let mut checked = 0;
        while checked < 24 {
            let x = rng.below(n as usize) as u32;
            let y = rng.below(n as usize) as u32;
            let z = rng.below(n as usize) as u32;
            if x == y || y == z || x == z {
                continue;
            }
            let a = scheme.relation(x, y) as usize;
            let b = scheme.relation(y, z) as usize;
            let c = scheme.relation(z, x) as usize;
            let Ok(sys) = build_system(
                tensor,
                Some(eig),
                a,
                b,
                c,
                SystemOptions {
                    symmetry: false,
                    krein: true,
                },
            ) else {
                return (false, Some(json!({"triple": [x, y, z]})), None);
            };
            let counts = triple_numbers_bruteforce(scheme, x, y, z);
            if let Some(row) = ScaledRows::from_system(&sys).check(&counts) {
                return (
                    false,
                    Some(json!({"triple": [x, y, z], "violated_row": row})),
                    None,
                );
            }
            checked += 1;
        }
        (true, None, Some(json!({"triples_checked": checked})))
    });
}

fn stage_with_lab(stage: Stage, config: &RunConfig, state: &mut PipelineState, log: &mut StageLog) {
    // The lab borrows the scheme; lift it out of the state for the stage
    // (ids are deterministic, so labs rebuilt across stages agree).
    let Some(scheme) = state.scheme.take() else {
        log.run(stage.name(), || {
            (false, Some(Value::String("scheme unavailable".into())), None)
        });
        return;
    };
    match CliqueLab::new(&scheme) {
        Ok(lab) => {
            match stage {
                Stage::Cliques => stage_cliques(config, state, &lab, log),
                Stage::Hypotheses => stage_hypotheses(config, state, &lab, log),
                Stage::Reconstruct => stage_reconstruct(config, state, &lab, log),
                Stage::Iso => stage_iso(config, state, &lab, log),
                _ => unreachable!(),
            }
            drop(lab);
        }
        Err(e) => {
            log.run("clique-enumeration", || {
                (false, Some(Value::String(e.to_string())), None)
            });
        }
    }
    state.scheme = Some(scheme);
}

fn stage_cliques(
    _config: &RunConfig,
    state: &mut PipelineState,
    lab: &CliqueLab,
    log: &mut StageLog,
) {
    let r = lab.r;
    log.run("clique-enumeration", || {
        let expected = lab.scheme.size() * (r * r + 1) / r;
        (
            lab.cliques.len() == expected,
            (lab.cliques.len() != expected).then(|| {
                json!({"cliques": lab.cliques.len(), "expected": expected})
            }),
            Some(json!({
                "cliques": lab.cliques.len(),
                "size": r,
                "per_vertex": r * r + 1,
            })),
        )
    });
    log.run("antipodal-cliques", || {
        for c in 0..lab.cliques.len() as u32 {
            let a = lab.clique_antipode[c as usize];
            if lab.clique_antipode[a as usize] != c {
                return (false, Some(json!({"clique": c})), None);
            }
            if let Err(e) = lab.check_antipodal_relations(c) {
                return (false, Some(Value::String(e.to_string())), None);
            }
        }
        (true, None, None)
    });
    log.run("extended-cores", || {
        for c in 0..lab.cliques.len() as u32 {
            if let Err(e) = lab.check_core(c) {
                return (false, Some(Value::String(e.to_string())), None);
            }
        }
        (true, None, Some(json!({"core_size": r * r * r - r * r})))
    });
    log.run("outside-contact", || {
        for c in 0..lab.cliques.len() as u32 {
            if let Err(e) = lab.check_outside_contact(c) {
                return (false, Some(Value::String(e.to_string())), None);
            }
        }
        (true, None, None)
    });
    let classes = log.run_result("congruence-classes", || {
        lab.congruence_classes()
            .map_err(|e| e.to_string())
            .and_then(|classes| {
                let expected = (r + 1) * (r * r + 1);
                if classes.len() != expected {
                    return Err(format!(
                        "{} classes, expected {expected}",
                        classes.len()
                    ));
                }
                let values = json!({
                    "classes": classes.len(),
                    "cliques_per_class": r * r - r,
                    "vertices_per_class": r * r * r - r * r,
                });
                Ok((classes, Some(values)))
            })
    });
    let Some(classes) = classes else { return };
    log.run_result("class-intersections", || {
        check_class_intersections(lab, &classes)
            .map(|_| ((), None))
            .map_err(|e| e.to_string())
    });
    log.run_result("quotient-matrices", || {
        let mut sample = None;
        for t in 0..classes.len() as u32 {
            match quotient_matrices(lab, &classes, t) {
                Ok(rep) => sample = Some(rep),
                Err(e) => return Err(e.to_string()),
            }
        }
        let rep = sample.expect("at least one class");
        Ok((
            (),
            Some(json!({
                "b1": rep.b1,
                "b2": rep.b2,
                "eigenvalues_1": rep.eigenvalues_1,
                "eigenvalues_2": rep.eigenvalues_2,
            })),
        ))
    });
    log.run_result("avoiding-cliques", || {
        for t in 0..classes.len() as u32 {
            for x in 0..lab.scheme.size() as u32 {
                if classes.classes[t as usize].member_bits.get(x as usize) {
                    continue;
                }
                if let Err(e) = avoiding_cliques(lab, &classes, t, x) {
                    return Err(e.to_string());
                }
            }
        }
        Ok(((), Some(json!({"per_vertex": r + 1}))))
    });
    log.run_result("sunflower-cover", || {
        for c in 0..lab.cliques.len() as u32 {
            let core = lab.two_core(c);
            for &x in &core {
                let ground = lab.vertex_cliques[x as usize].clone();
                let sets: Vec<Vec<u32>> = lab.cliques[c as usize]
                    .iter()
                    .map(|&v| lab.pencil_split(x, v).avoiding)
                    .collect();
                let common = sunflower_common(&sets, &ground).map_err(|e| e.to_string())?;
                if !lab.cliques[common as usize]
                    .iter()
                    .all(|m| core.contains(m))
                {
                    return Err(format!(
                        "common clique {common} at ({c}, {x}) leaves the two-core"
                    ));
                }
            }
        }
        Ok(((), None))
    });
    state.lab_data = Some(LabData {
        classes,
        partitions: Vec::new(),
        pencil_report: None,
        reconstruction: None,
    });
}

fn stage_hypotheses(
    config: &RunConfig,
    state: &mut PipelineState,
    lab: &CliqueLab,
    log: &mut StageLog,
) {
    let Some(data) = &mut state.lab_data else {
        log.run("pencil-sum-constancy", || {
            (false, Some(Value::String("cliques stage incomplete".into())), None)
        });
        return;
    };
    let mode = if config.sample {
        SweepMode::Sampled {
            seed: config.seed,
            pairs_per_vertex: config.sample_pairs_per_vertex,
        }
    } else {
        SweepMode::Exhaustive
    };
    let mut report_slot = None;
    log.run("pencil-sum-constancy", || {
        let report = lab.check_pencil_sums(mode);
        let out = (
            report.pass,
            report
                .witness
                .as_ref()
                .map(|w| serde_json::to_value(w).unwrap()),
            Some(json!({
                "triples_checked": report.triples_checked,
                "expected_sum": report.expected_sum,
                "sampled": report.sampled,
            })),
        );
        report_slot = Some(report);
        out
    });
    let report = report_slot.expect("sweep ran");
    let pass = report.pass;
    data.pencil_report = Some(report);
    if !pass {
        return;
    }

    let classes = &data.classes;
    log.run("theta-profiles", || {
        let k = classes.len() as u32;
        let mut pairs = 0u64;
        for i in 0..k {
            for j in (i + 1)..k {
                if !classes.classes[i as usize]
                    .member_bits
                    .is_disjoint(&classes.classes[j as usize].member_bits)
                {
                    continue;
                }
                pairs += 1;
                match check_theta(lab, classes, i, j) {
                    Ok(rep) if rep.pass => {}
                    Ok(rep) => {
                        return (
                            false,
                            rep.witness.map(Value::String),
                            Some(json!({"pair": [i, j]})),
                        )
                    }
                    Err(e) => return (false, Some(Value::String(e.to_string())), None),
                }
            }
        }
        (
            pairs > 0,
            None,
            Some(json!({"disjoint_pairs": pairs})),
        )
    });
    let partitions = log.run_result("partition-family", || {
        all_partitions(lab, classes)
            .map_err(|e| e.to_string())
            .and_then(|parts| {
                let expected = (lab.r + 1) * (lab.r * lab.r + 1);
                if parts.len() != expected {
                    return Err(format!("{} partitions, expected {expected}", parts.len()));
                }
                if parts.iter().any(|p| p.len() != lab.r + 1) {
                    return Err("a partition has the wrong class count".into());
                }
                let values = json!({"partitions": parts.len(), "classes_each": lab.r + 1});
                Ok((parts, Some(values)))
            })
    });
    if let Some(parts) = partitions {
        data.partitions = parts;
    }
}

fn stage_reconstruct(
    _config: &RunConfig,
    state: &mut PipelineState,
    lab: &CliqueLab,
    log: &mut StageLog,
) {
    let Some(data) = &mut state.lab_data else {
        log.run("reconstruction", || {
            (false, Some(Value::String("hypotheses stage incomplete".into())), None)
        });
        return;
    };
    let Some(pencil) = &data.pencil_report else {
        log.run("reconstruction", || {
            (false, Some(Value::String("pencil-sum report missing".into())), None)
        });
        return;
    };
    let rs = log.run_result("reconstruction", || {
        reconstruct(lab, &data.classes, &data.partitions, pencil)
            .map(|rs| {
                let values = json!({
                    "points": rs.inc.num_points(),
                    "lines": rs.inc.num_lines(),
                    "vertex_points": rs.num_vertex_points,
                    "class_points": rs.num_class_points,
                });
                (rs, Some(values))
            })
            .map_err(|e| e.to_string())
    });
    let Some(rs) = rs else { return };
    match verify_reconstruction(&rs, lab, &data.classes) {
        Ok(rep) => {
            let r = lab.r;
            log.run("reconstruction-gq-order", || {
                (
                    rep.main.order == Some((r, r * r)),
                    (!rep.main.certified())
                        .then(|| serde_json::to_value(&rep.main.violations).unwrap()),
                    Some(json!({"order": rep.main.order})),
                )
            });
            log.run("reconstruction-subgq-order", || {
                (
                    rep.sub.order == Some((r, r)),
                    (!rep.sub.certified())
                        .then(|| serde_json::to_value(&rep.sub.violations).unwrap()),
                    Some(json!({"order": rep.sub.order})),
                )
            });
            log.run("reconstruction-involution", || {
                (
                    rep.involution_ok,
                    rep.involution_witness.clone().map(Value::String),
                    None,
                )
            });
            log.run("reconstruction-double-subtension", || {
                (rep.double_subtension_ok, None, None)
            });
        }
        Err(e) => {
            log.run("reconstruction-verification", || {
                (false, Some(Value::String(e.to_string())), None)
            });
        }
    }
    data.reconstruction = Some(rs);
}

fn stage_iso(
    _config: &RunConfig,
    state: &mut PipelineState,
    lab: &CliqueLab,
    log: &mut StageLog,
) {
    let (Some(model), Some(sub), Some(outer), Some(data)) = (
        &state.model,
        &state.sub,
        &state.outer,
        &state.lab_data,
    ) else {
        log.run("natural-isomorphism", || {
            (false, Some(Value::String("geometric context unavailable".into())), None)
        });
        return;
    };
    let Some(rs) = &data.reconstruction else {
        log.run("natural-isomorphism", || {
            (false, Some(Value::String("reconstruction unavailable".into())), None)
        });
        return;
    };
    log.run_result("natural-isomorphism", || {
        natural_isomorphism(model, sub, outer, lab, &data.classes, &data.partitions, rs)
            .map(|w| {
                let values = json!({
                    "points_mapped": w.point_map.len(),
                    "lines_mapped": w.line_map.len(),
                });
                ((), Some(values))
            })
            .map_err(|e| e.to_string())
    });
}

/// Convenience wrapper: full geometric pipeline for one q.
pub fn run_geometric(q: u32) -> Report {
    run_pipeline(&RunConfig::geometric(q))
}

pub fn load_config_scheme(config: &RunConfig) -> PwResult<AssociationScheme> {
    match &config.mode {
        Mode::Geometric { q } => {
            let model = build_elliptic_quadric_gq(*q, config.q_bound)?;
            let sub = build_parabolic_subgq(&model)?;
            let outer = build_outer_points(&model, &sub)?;
            build_pw_scheme(&model, &outer)
        }
        Mode::Abstract { path } => load_scheme(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q3_full_pipeline_passes() {
        let report = run_geometric(3);
        assert_eq!(report.summary, "pass", "{}", report.render_text());
        assert!(report.skipped_stages.is_empty());
    }

    #[test]
    fn stage_selection_filters_records() {
        let mut config = RunConfig::geometric(3);
        config.checks = Some([Stage::Params, Stage::Triples].into_iter().collect());
        let report = run_pipeline(&config);
        assert_eq!(report.summary, "pass", "{}", report.render_text());
        // no clique or reconstruction records
        assert!(report
            .records
            .iter()
            .all(|r| !r.check.starts_with("clique") && !r.check.starts_with("reconstruction")));
        // but params and triples records are present
        assert!(report.records.iter().any(|r| r.check == "intersection-expected"));
        assert!(report.records.iter().any(|r| r.check == "triple-nonneg-pins"));
    }

    #[test]
    fn corrupted_scheme_fails_and_halts() {
        use crate::scheme::save_scheme;
        let model = build_elliptic_quadric_gq(3, 7).unwrap();
        let sub = build_parabolic_subgq(&model).unwrap();
        let outer = build_outer_points(&model, &sub).unwrap();
        let scheme = build_pw_scheme(&model, &outer).unwrap();
        let path = std::env::temp_dir().join("pwlab-corrupt.json");
        save_scheme(&scheme, &path).unwrap();
        // corrupt one symmetric relation entry
        let text = std::fs::read_to_string(&path).unwrap();
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        let rels = doc["relations"].as_array_mut().unwrap();
        let n = 72;
        let (x, y) = (0usize, 1usize);
        let old = rels[x * n + y].as_u64().unwrap();
        let new = if old == 1 { 2 } else { 1 };
        rels[x * n + y] = new.into();
        rels[y * n + x] = new.into();
        std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();

        let config = RunConfig::abstract_file(path.clone());
        let report = run_pipeline(&config);
        assert_eq!(report.summary, "fail");
        assert!(!report.skipped_stages.is_empty());
        std::fs::remove_file(&path).ok();
    }
}
