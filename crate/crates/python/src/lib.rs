//! Python bindings: `import pyionscope`.

use ionscope::correlations::{CorrelationOrder, Pattern};
use ionscope::inference::{self, PatternDistance};
use ionscope::{model, sampling, Error};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Json(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Converts through JSON so nested serde structures arrive as plain dicts.
fn to_python<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| py_err(e.into()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "IonChain", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyIonChain(model::IonChain);

#[pymethods]
impl PyIonChain {
    #[new]
    #[pyo3(signature = (positions, isotope=None))]
    fn new(positions: Vec<f64>, isotope: Option<usize>) -> PyResult<Self> {
        model::IonChain::new(positions, isotope)
            .map(Self)
            .map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (n, spacing, isotope=None))]
    fn equally_spaced(n: usize, spacing: f64, isotope: Option<usize>) -> PyResult<Self> {
        model::IonChain::equally_spaced(n, spacing, isotope)
            .map(Self)
            .map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        model::IonChain::from_json_str(text)
            .map(Self)
            .map_err(py_err)
    }

    #[pyo3(signature = (isotope=None))]
    fn with_isotope(&self, isotope: Option<usize>) -> PyResult<Self> {
        self.0.with_isotope(isotope).map(Self).map_err(py_err)
    }

    #[getter]
    fn positions(&self) -> Vec<f64> {
        self.0.positions().to_vec()
    }

    #[getter]
    fn isotope(&self) -> Option<usize> {
        self.0.isotope()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    fn is_equally_spaced(&self) -> bool {
        self.0.is_equally_spaced()
    }

    fn __repr__(&self) -> String {
        format!(
            "IonChain(positions={:?}, isotope={:?})",
            self.0.positions(),
            self.0.isotope()
        )
    }
}

#[pyclass(name = "Slice", frozen, from_py_object)]
#[derive(Clone)]
pub struct PySlice(model::SliceSpec);

#[pymethods]
impl PySlice {
    #[staticmethod]
    #[pyo3(signature = (points=model::DEFAULT_GRID_POINTS))]
    fn grid2d(points: usize) -> Self {
        Self(model::SliceSpec::grid2d(points))
    }

    #[staticmethod]
    fn fixed_second(phi2: f64) -> Self {
        Self(model::SliceSpec::fixed_second(phi2))
    }

    #[staticmethod]
    fn opposite() -> Self {
        Self(model::SliceSpec::opposite())
    }

    #[staticmethod]
    fn offset_magnitude(offset: f64) -> Self {
        Self(model::SliceSpec::offset_magnitude(offset))
    }

    #[staticmethod]
    fn fixed_sin_delta(delta: f64) -> Self {
        Self(model::SliceSpec::fixed_sin_delta(delta))
    }

    fn with_scan(&self, phi_min: f64, phi_max: f64, points: usize) -> Self {
        Self(
            self.0
                .with_scan(model::ScanRange::new(phi_min, phi_max, points)),
        )
    }

    /// Detector pairs as a list of (phi1, phi2).
    fn resolve(&self) -> PyResult<Vec<(f64, f64)>> {
        Ok(model::resolve_slice(&self.0).map_err(py_err)?.points)
    }

    fn __repr__(&self) -> String {
        format!("Slice({:?})", self.0)
    }
}

#[pyclass(name = "Pattern", frozen)]
pub struct PyPattern(Pattern);

#[pymethods]
impl PyPattern {
    #[getter]
    fn axis(&self) -> Vec<f64> {
        self.0.axis.clone()
    }

    #[getter]
    fn points(&self) -> Vec<(f64, f64)> {
        self.0.points.clone()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values.clone()
    }

    #[getter]
    fn order(&self) -> u8 {
        self.0.order().as_u8()
    }

    #[getter]
    fn normalizable(&self) -> bool {
        self.0.normalizable
    }

    fn spread(&self) -> f64 {
        self.0.spread()
    }

    fn probabilities(&self) -> PyResult<Vec<f64>> {
        Ok(sampling::normalize(&self.0)
            .map_err(py_err)?
            .probs()
            .to_vec())
    }

    /// `seed` → list of bin indices.
    fn sample(&self, m: usize, seed: u64) -> PyResult<Vec<usize>> {
        let dist = sampling::normalize(&self.0).map_err(py_err)?;
        Ok(sampling::sample_events(&dist, m, seed).events)
    }

    /// Event set as the JSON document `{"seed", "bins", "events", ...}`.
    fn sample_json(&self, m: usize, seed: u64) -> PyResult<String> {
        let dist = sampling::normalize(&self.0).map_err(py_err)?;
        sampling::sample_events(&dist, m, seed)
            .to_json()
            .map_err(py_err)
    }

    /// (L-infinity, symmetrized KL) distance to another pattern.
    fn distance(&self, other: &PyPattern) -> PyResult<(f64, f64)> {
        let PatternDistance { linf, sym_kl } =
            inference::pattern_distance(&self.0, &other.0).map_err(py_err)?;
        Ok((linf, sym_kl))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyfunction]
fn phase_projection(chain: &PyIonChain, ion: usize, phi: f64) -> PyResult<f64> {
    let angle = model::DetectorAngle::new(phi).map_err(py_err)?;
    model::phase_projection(&chain.0, ion, angle).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (chain, slice, pulse_area=std::f64::consts::FRAC_PI_2))]
fn g1_pattern(chain: &PyIonChain, slice: &PySlice, pulse_area: f64) -> PyResult<PyPattern> {
    let pulse = model::ExcitationPulse::new(pulse_area).map_err(py_err)?;
    ionscope::g1_pattern(&chain.0, pulse, &slice.0)
        .map(PyPattern)
        .map_err(py_err)
}

#[pyfunction]
fn g2_pattern(chain: &PyIonChain, slice: &PySlice) -> PyResult<PyPattern> {
    ionscope::g2_pattern(&chain.0, &slice.0)
        .map(PyPattern)
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (order, chain, slice, pulse_area=std::f64::consts::PI))]
fn pattern_over_slice(
    order: u8,
    chain: &PyIonChain,
    slice: &PySlice,
    pulse_area: f64,
) -> PyResult<PyPattern> {
    let order = CorrelationOrder::try_from(order).map_err(py_err)?;
    let pulse = model::ExcitationPulse::new(pulse_area).map_err(py_err)?;
    ionscope::pattern_over_slice(order, &chain.0, pulse, &slice.0)
        .map(PyPattern)
        .map_err(py_err)
}

#[pyfunction]
fn g2_two_ion_closed(separation: f64, phi1: f64, phi2: f64) -> f64 {
    ionscope::g2_two_ion_closed(separation, phi1, phi2)
}

#[pyfunction]
fn g2_four_closed(d: f64, p: usize, phi1: f64, phi2: f64) -> PyResult<f64> {
    ionscope::g2_four_closed(d, p, phi1, phi2).map_err(py_err)
}

#[pyfunction]
fn g1_four_closed(d: f64, p: usize, phi1: f64) -> PyResult<f64> {
    ionscope::g1_four_closed(d, p, phi1).map_err(py_err)
}

/// Posterior over isotope positions for an event-set JSON document.
#[pyfunction]
fn posterior_over_positions(
    py: Python<'_>,
    events_json: &str,
    chain: &PyIonChain,
    slice: &PySlice,
) -> PyResult<Py<PyAny>> {
    let events = sampling::EventSet::from_json_str(events_json).map_err(py_err)?;
    let report =
        inference::posterior_over_positions(&events, &chain.0, &slice.0).map_err(py_err)?;
    to_python(py, &report)
}

#[pyfunction]
fn run_search_experiment(
    py: Python<'_>,
    chain: &PyIonChain,
    slice: &PySlice,
    true_p: usize,
    schedule: Vec<usize>,
    n_trials: usize,
    master_seed: u64,
) -> PyResult<Py<PyAny>> {
    let result = py
        .detach(|| {
            inference::run_search_experiment(
                &chain.0,
                &slice.0,
                true_p,
                &schedule,
                n_trials,
                master_seed,
            )
        })
        .map_err(py_err)?;
    to_python(py, &result)
}

/// Returns a dict with `mean`, `std_dev`, `trials` and the exact `expected`.
#[pyfunction]
fn classical_search_sim<'py>(
    py: Python<'py>,
    n: usize,
    n_trials: usize,
    master_seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let s = inference::classical_search_sim(n, n_trials, master_seed).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("mean", s.mean)?;
    d.set_item("std_dev", s.std_dev)?;
    d.set_item("trials", s.trials)?;
    d.set_item("expected", inference::classical_expected_probes(n))?;
    Ok(d)
}

#[pymodule]
fn pyionscope(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyIonChain>()?;
    m.add_class::<PySlice>()?;
    m.add_class::<PyPattern>()?;
    m.add_function(wrap_pyfunction!(phase_projection, m)?)?;
    m.add_function(wrap_pyfunction!(g1_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(g2_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(pattern_over_slice, m)?)?;
    m.add_function(wrap_pyfunction!(g2_two_ion_closed, m)?)?;
    m.add_function(wrap_pyfunction!(g2_four_closed, m)?)?;
    m.add_function(wrap_pyfunction!(g1_four_closed, m)?)?;
    m.add_function(wrap_pyfunction!(posterior_over_positions, m)?)?;
    m.add_function(wrap_pyfunction!(run_search_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(classical_search_sim, m)?)?;
    Ok(())
}
