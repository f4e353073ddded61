use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use spreadcert::density::{discrepancy_profile, estimate_density};
use spreadcert::flow_round::{read_flow_graph, round_flow as round, write_flow_graph};
use spreadcert::generators::{generate as gen, GeneratorKind, GeneratorSpec};
use spreadcert::io::{read_point_set, write_point_set};
use spreadcert::oracle::{bottleneck_matching as matching, check_shift_invariance as shift_check, expand_units, Metric};
use spreadcert::spread::{uniform_spread_certificate, SpreadConfig};

create_exception!(spreadcert_py, SpreadcertError, PyException);

fn err(e: spreadcert::Error) -> PyErr {
    SpreadcertError::new_err(e.to_string())
}

fn metric(name: &str) -> PyResult<Metric> {
    match name {
        "linf" => Ok(Metric::Linf),
        "l2" => Ok(Metric::L2),
        _ => Err(SpreadcertError::new_err(format!("unknown metric {name:?}"))),
    }
}

fn to_py<'py>(py: Python<'py>, v: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (v,))
}

/// A finite point multiset inside a half-open box window.
#[pyclass(name = "PointSet", module = "spreadcert_py")]
pub struct PyPointSet {
    inner: spreadcert::PointSet,
}

#[pymethods]
impl PyPointSet {
    #[new]
    #[pyo3(signature = (lo, hi, points, multiplicities=None))]
    fn new(lo: Vec<f64>, hi: Vec<f64>, points: Vec<Vec<f64>>, multiplicities: Option<Vec<u32>>) -> PyResult<Self> {
        let window = spreadcert::Window::new(lo, hi).map_err(err)?;
        let mult = multiplicities.unwrap_or_else(|| vec![1; points.len()]);
        if mult.len() != points.len() {
            return Err(SpreadcertError::new_err("multiplicities and points differ in length"));
        }
        let inner = spreadcert::PointSet::new(window, points.into_iter().zip(mult).collect()).map_err(err)?;
        Ok(PyPointSet { inner })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyPointSet { inner: read_point_set(text).map_err(err)? })
    }

    fn dump(&self) -> String {
        write_point_set(&self.inner)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn window(&self) -> (Vec<f64>, Vec<f64>) {
        let w = self.inner.window();
        (w.lo.clone(), w.hi.clone())
    }

    /// Distinct points with their multiplicities.
    fn points(&self) -> Vec<(Vec<f64>, u32)> {
        self.inner.iter().map(|(p, m)| (p.to_vec(), m)).collect()
    }

    /// Points repeated by multiplicity.
    fn units(&self) -> Vec<Vec<f64>> {
        expand_units(&self.inner)
    }

    fn total(&self) -> u64 {
        self.inner.total()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("PointSet(dim={}, distinct={}, total={})", self.inner.dim(), self.inner.len(), self.inner.total())
    }
}

#[pyfunction]
#[pyo3(signature = (kind, lo, hi, alpha=1.0, eps=0.0, intensity=1.0, slope=None, seed=0))]
#[allow(clippy::too_many_arguments)]
fn generate(
    kind: &str,
    lo: Vec<f64>,
    hi: Vec<f64>,
    alpha: f64,
    eps: f64,
    intensity: f64,
    slope: Option<f64>,
    seed: u64,
) -> PyResult<PyPointSet> {
    let kind = match kind {
        "lattice" => GeneratorKind::Lattice,
        "perturbed-lattice" => GeneratorKind::PerturbedLattice,
        "cut-project1d" => GeneratorKind::CutProject1d,
        "cut-project2d" => GeneratorKind::CutProject2d,
        "poisson" => GeneratorKind::Poisson,
        _ => return Err(SpreadcertError::new_err(format!("unknown generator {kind:?}"))),
    };
    let window = spreadcert::Window::new(lo, hi).map_err(err)?;
    let mut spec = GeneratorSpec::new(kind, window);
    spec.spacing = alpha;
    spec.epsilon = eps;
    spec.intensity = intensity;
    if let Some(s) = slope {
        spec.slope = s;
    }
    spec.seed = seed;
    Ok(PyPointSet { inner: gen(&spec).map_err(err)? })
}

/// Normalized cube counts over every scale and center, as a dict.
#[pyfunction]
fn estimate(py: Python<'_>, set: &PyPointSet, scales: Vec<f64>, centers: Vec<Vec<f64>>) -> PyResult<Py<PyAny>> {
    let est = estimate_density(&set.inner, &scales, &centers).map_err(err)?;
    let v = serde_json::to_value(&est).map_err(|e| SpreadcertError::new_err(e.to_string()))?;
    Ok(to_py(py, &v.to_string())?.unbind())
}

#[pyfunction]
fn discrepancy(
    py: Python<'_>,
    set: &PyPointSet,
    density: f64,
    centers: Vec<Vec<f64>>,
    radii: Vec<f64>,
) -> PyResult<Py<PyAny>> {
    let prof = discrepancy_profile(&set.inner, density, &centers, &radii).map_err(err)?;
    let v = serde_json::to_value(&prof).map_err(|e| SpreadcertError::new_err(e.to_string()))?;
    Ok(to_py(py, &v.to_string())?.unbind())
}

/// Rounds a fractional flow given in flowgraph text form.
#[pyfunction]
fn round_flow(text: &str) -> PyResult<String> {
    let g = read_flow_graph(text).map_err(err)?;
    let r = round(&g).map_err(err)?;
    Ok(write_flow_graph(&r.to_graph(&g)))
}

#[pyfunction]
#[pyo3(signature = (a, b, metric="linf"))]
fn bottleneck_matching(py: Python<'_>, a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, metric: &str) -> PyResult<Py<PyAny>> {
    let r = matching(&a, &b, self::metric(metric)?).map_err(err)?;
    Ok(to_py(py, &r.to_json().to_string())?.unbind())
}

#[pyfunction]
#[pyo3(signature = (set, shift, bound, metric="linf"))]
fn check_shift_invariance(
    py: Python<'_>,
    set: &PyPointSet,
    shift: Vec<f64>,
    bound: f64,
    metric: &str,
) -> PyResult<Py<PyAny>> {
    let r = shift_check(&set.inner, &shift, bound, self::metric(metric)?).map_err(err)?;
    let v = serde_json::to_value(&r).map_err(|e| SpreadcertError::new_err(e.to_string()))?;
    Ok(to_py(py, &v.to_string())?.unbind())
}

/// Runs the spread pipeline and returns the certificate as a dict.
#[pyfunction]
#[pyo3(signature = (set, n=4, cap=4, density=None, metric="linf"))]
fn spread(
    py: Python<'_>,
    set: &PyPointSet,
    n: u32,
    cap: u32,
    density: Option<f64>,
    metric: &str,
) -> PyResult<Py<PyAny>> {
    let config = SpreadConfig {
        initial_n: n,
        cap,
        density,
        metric: self::metric(metric)?,
    };
    let cert = uniform_spread_certificate(&set.inner, &config).map_err(err)?;
    Ok(to_py(py, &cert.to_json())?.unbind())
}

#[pymodule]
fn spreadcert_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SpreadcertError", m.py().get_type::<SpreadcertError>())?;
    m.add_class::<PyPointSet>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(discrepancy, m)?)?;
    m.add_function(wrap_pyfunction!(round_flow, m)?)?;
    m.add_function(wrap_pyfunction!(bottleneck_matching, m)?)?;
    m.add_function(wrap_pyfunction!(check_shift_invariance, m)?)?;
    m.add_function(wrap_pyfunction!(spread, m)?)?;
    Ok(())
}
