//! Python bindings: the model builder, the scheme with its parameter
//! tensors, the triple-system solver and the staged verification pipeline.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use pwlab_core::cliques::CliqueLab;
use pwlab_core::geometry::{
    build_elliptic_quadric_gq, build_outer_points, build_parabolic_subgq,
};
use pwlab_core::pipeline::{run_pipeline, Mode, RunConfig, Stage};
use pwlab_core::scheme::{
    build_pw_scheme, intersection_numbers, load_scheme, save_scheme, AssociationScheme,
    IntersectionTensor,
};
use pwlab_core::spectral::{eigenmatrices_from_tensor, krein_parameters, pw_eigenmatrices};
use pwlab_core::triples::{
    build_system, nonneg_propagate, solution_document, solve, SystemOptions,
};
use pwlab_core::PwError;

fn err(e: PwError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Summary of the quadrangle model built over GF(q).
#[pyclass]
struct GqModel {
    #[pyo3(get)]
    q: u32,
    #[pyo3(get)]
    points: usize,
    #[pyo3(get)]
    lines: usize,
    #[pyo3(get)]
    order: (usize, usize),
    #[pyo3(get)]
    sub_points: usize,
    #[pyo3(get)]
    sub_lines: usize,
    #[pyo3(get)]
    sub_order: (usize, usize),
    #[pyo3(get)]
    outer_points: usize,
}

/// Builds the generalized quadrangle carried by the elliptic quadric over
/// GF(q) together with its hyperplane section, certifying both orders.
#[pyfunction]
#[pyo3(signature = (q, q_bound = 7))]
fn build_gq(q: u32, q_bound: u32) -> PyResult<GqModel> {
    let model = build_elliptic_quadric_gq(q, q_bound).map_err(err)?;
    let sub = build_parabolic_subgq(&model).map_err(err)?;
    let outer = build_outer_points(&model, &sub).map_err(err)?;
    Ok(GqModel {
        q,
        points: model.gq.inc.num_points(),
        lines: model.gq.inc.num_lines(),
        order: model.gq.order,
        sub_points: sub.gq.inc.num_points(),
        sub_lines: sub.gq.inc.num_lines(),
        sub_order: sub.gq.order,
        outer_points: outer.len(),
    })
}

/// An association scheme with a verified intersection tensor.
#[pyclass]
struct Scheme {
    inner: AssociationScheme,
    tensor: IntersectionTensor,
}

impl Scheme {
    fn from_parts(inner: AssociationScheme, threads: usize) -> PyResult<Self> {
        let tensor = intersection_numbers(&inner, threads).map_err(err)?;
        Ok(Scheme { inner, tensor })
    }
}

#[pymethods]
impl Scheme {
    /// Builds the scheme on the outer points of the model over GF(q).
    #[staticmethod]
    #[pyo3(signature = (q, q_bound = 7))]
    fn build(q: u32, q_bound: u32) -> PyResult<Self> {
        let model = build_elliptic_quadric_gq(q, q_bound).map_err(err)?;
        let sub = build_parabolic_subgq(&model).map_err(err)?;
        let outer = build_outer_points(&model, &sub).map_err(err)?;
        let scheme = build_pw_scheme(&model, &outer).map_err(err)?;
        Scheme::from_parts(scheme, 1)
    }

    /// Loads and validates a scheme JSON file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let scheme = load_scheme(std::path::Path::new(path)).map_err(err)?;
        Scheme::from_parts(scheme, 1)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_scheme(&self.inner, std::path::Path::new(path)).map_err(err)
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    #[getter]
    fn classes(&self) -> usize {
        self.inner.classes()
    }

    fn valencies(&self) -> Vec<u64> {
        self.inner.valencies().to_vec()
    }

    fn relation(&self, x: u32, y: u32) -> PyResult<u8> {
        let n = self.inner.size() as u32;
        if x >= n || y >= n {
            return Err(PyValueError::new_err("vertex out of range"));
        }
        Ok(self.inner.relation(x, y))
    }

    /// Intersection number p^k_{ij}, verified constant over all base pairs.
    fn intersection_number(&self, k: usize, i: usize, j: usize) -> PyResult<u64> {
        let d = self.inner.classes();
        if k > d || i > d || j > d {
            return Err(PyValueError::new_err("class index out of range"));
        }
        Ok(self.tensor.get(k, i, j))
    }

    /// Multiplicities of the eigenspaces, from the intersection algebra.
    fn multiplicities(&self) -> PyResult<Vec<u64>> {
        let eig =
            eigenmatrices_from_tensor(&self.tensor, self.inner.valencies()).map_err(err)?;
        Ok(eig.mults)
    }

    /// Krein parameter q^k_{ij} as a "num/den" string.
    fn krein_parameter(&self, k: usize, i: usize, j: usize) -> PyResult<String> {
        let eig =
            eigenmatrices_from_tensor(&self.tensor, self.inner.valencies()).map_err(err)?;
        let krein = krein_parameters(&eig, self.inner.size() as u64).map_err(err)?;
        let d = self.inner.classes();
        if k > d || i > d || j > d {
            return Err(PyValueError::new_err("class index out of range"));
        }
        Ok(pwlab_core::linalg::rat_str(krein.get(k, i, j)))
    }

    /// Number of maximal {0,3}-cliques.
    fn clique_count(&self) -> PyResult<usize> {
        let lab = CliqueLab::new(&self.inner).map_err(err)?;
        Ok(lab.cliques.len())
    }

    fn __repr__(&self) -> String {
        format!(
            "Scheme(size={}, classes={}, valencies={:?})",
            self.inner.size(),
            self.inner.classes(),
            self.inner.valencies()
        )
    }
}

/// Builds and solves the triple system for the class triple (a, b, c); runs
/// nonnegativity propagation and returns pinned values, free unknowns,
/// dependencies and the propagation pins as a dict.
#[pyfunction]
#[pyo3(signature = (q, a, b, c, krein = true, symmetry = true))]
fn solve_triple<'py>(
    py: Python<'py>,
    q: u32,
    a: usize,
    b: usize,
    c: usize,
    krein: bool,
    symmetry: bool,
) -> PyResult<Bound<'py, PyDict>> {
    build_elliptic_quadric_gq(q, 7).map_err(err)?; // validates q
    let tensor = pwlab_core::scheme::pw_intersection_tensor(q as u64);
    let eig = pw_eigenmatrices(q as u64);
    let system = build_system(&tensor, Some(&eig), a, b, c, SystemOptions { symmetry, krein })
        .map_err(err)?;
    let space = solve(&system).map_err(err)?;
    let outcome = nonneg_propagate(&system, &space).map_err(err)?;
    let doc = solution_document(&system, &outcome);

    let out = PyDict::new(py);
    out.set_item("triple", doc.triple)?;
    out.set_item("equations", doc.equations)?;
    let pinned = PyDict::new(py);
    for (k, v) in &doc.pinned {
        pinned.set_item(k, v)?;
    }
    out.set_item("pinned", pinned)?;
    let propagated = PyDict::new(py);
    for (k, v) in &doc.propagated {
        propagated.set_item(k, v)?;
    }
    out.set_item("propagated", propagated)?;
    out.set_item("free", doc.free.clone())?;
    let deps = PyList::empty(py);
    for d in &doc.dependencies {
        let dep = PyDict::new(py);
        dep.set_item("target", &d.target)?;
        dep.set_item("constant", &d.constant)?;
        dep.set_item("terms", d.terms.clone())?;
        deps.append(dep)?;
    }
    out.set_item("dependencies", deps)?;
    Ok(out)
}

/// Runs the staged verification pipeline. Exactly one of q and file must be
/// given. Returns (passed, report_json).
#[pyfunction]
#[pyo3(signature = (q = None, file = None, checks = None, sample = false, threads = 1))]
fn pipeline(
    q: Option<u32>,
    file: Option<String>,
    checks: Option<Vec<String>>,
    sample: bool,
    threads: usize,
) -> PyResult<(bool, String)> {
    let mode = match (q, file) {
        (Some(q), None) => Mode::Geometric { q },
        (None, Some(path)) => Mode::Abstract { path: path.into() },
        _ => {
            return Err(PyValueError::new_err(
                "exactly one of q and file is required",
            ))
        }
    };
    let mut config = match &mode {
        Mode::Geometric { q } => RunConfig::geometric(*q),
        Mode::Abstract { path } => RunConfig::abstract_file(path.clone()),
    };
    config.sample = sample;
    config.threads = threads.max(1);
    if let Some(names) = checks {
        let mut set = std::collections::BTreeSet::new();
        for name in names {
            let stage = Stage::parse(&name)
                .ok_or_else(|| PyValueError::new_err(format!("unknown stage '{name}'")))?;
            set.insert(stage);
        }
        config.checks = Some(set);
    }
    let report = run_pipeline(&config);
    Ok((report.summary == "pass", report.to_json()))
}

#[pymodule]
fn pwlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<GqModel>()?;
    m.add_class::<Scheme>()?;
    m.add_function(wrap_pyfunction!(build_gq, m)?)?;
    m.add_function(wrap_pyfunction!(solve_triple, m)?)?;
    m.add_function(wrap_pyfunction!(pipeline, m)?)?;
    Ok(())
}
