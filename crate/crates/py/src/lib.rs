//! Python bindings: the map, its Markov processes and the main estimators.
//! Reports come back as plain dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use chirikov::control;
use chirikov::estimators::{self, McConfig};
use chirikov::harris::{self, ConstantsTable, DriftParams, MinorizationParams};
use chirikov::rds::{RngStreamSpec, TwoPointState};
use chirikov::structure;
use chirikov::torus::{PhasePair, ShearPair, TorusPoint};
use chirikov::transport::{run_decay_experiment, DecayExperiment};

fn err(e: chirikov::Error) -> PyErr {
    match e {
        chirikov::Error::InvalidParameter { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_dict<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    PyModule::import(py, "json")?.call_method1("loads", (s,))
}

fn pair(x: (f64, f64), y: (f64, f64)) -> PyResult<TwoPointState> {
    TwoPointState::new(TorusPoint::new(x.0, x.1), TorusPoint::new(y.0, y.1)).map_err(err)
}

/// The randomized map x ↦ V_{ω²} ∘ H_{ω¹}(x) with kick strength K (or a
/// Pierrehumbert sine-shear pair with amplitude A).
#[pyclass(name = "ShearMap", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
pub struct PyShearMap {
    sp: ShearPair,
    #[pyo3(get)]
    strength: f64,
}

#[pymethods]
impl PyShearMap {
    #[new]
    #[pyo3(signature = (k, model = "chirikov"))]
    fn new(k: f64, model: &str) -> PyResult<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(PyValueError::new_err("strength must be positive and finite"));
        }
        let sp = match model {
            "chirikov" => ShearPair::chirikov(k),
            "pierrehumbert" => ShearPair::pierrehumbert(k),
            _ => return Err(PyValueError::new_err(format!("unknown model {model}"))),
        };
        Ok(PyShearMap { sp, strength: k })
    }

    fn step(&self, x: (f64, f64), w: (f64, f64)) -> (f64, f64) {
        let y = self.sp.step(TorusPoint::new(x.0, x.1), PhasePair::new(w.0, w.1));
        (y.x1.value(), y.x2.value())
    }

    fn inverse(&self, x: (f64, f64), w: (f64, f64)) -> (f64, f64) {
        let y = self.sp.inverse(TorusPoint::new(x.0, x.1), PhasePair::new(w.0, w.1));
        (y.x1.value(), y.x2.value())
    }

    fn jacobian(&self, x: (f64, f64), w: (f64, f64)) -> [[f64; 2]; 2] {
        let m = self.sp.jacobian(TorusPoint::new(x.0, x.1), PhasePair::new(w.0, w.1));
        [[m.a, m.b], [m.c, m.d]]
    }

    /// Orbit of `x` under the given phase pairs, including the start.
    fn orbit(&self, x: (f64, f64), phases: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
        let mut p = TorusPoint::new(x.0, x.1);
        let mut out = vec![(p.x1.value(), p.x2.value())];
        for w in phases {
            p = self.sp.step(p, PhasePair::new(w.0, w.1));
            out.push((p.x1.value(), p.x2.value()));
        }
        out
    }

    fn __repr__(&self) -> String {
        format!("ShearMap({})", self.strength)
    }
}

#[pyfunction]
#[pyo3(signature = (k, p = 0.25, samples = 100_000, grid = 32, seed = 20240601, m = 2))]
fn contraction_estimate<'py>(py: Python<'py>, k: f64, p: f64, samples: u64, grid: usize, seed: u64, m: usize) -> PyResult<Bound<'py, PyAny>> {
    let cfg = McConfig::new(samples, seed, grid, grid);
    let r = estimators::contraction_estimate_with(ShearPair::chirikov(k), k, m, &[p], &cfg).map_err(err)?;
    to_dict(py, &r[0])
}

#[pyfunction]
#[pyo3(signature = (k, p, x, y, samples = 100_000, seed = 20240601))]
fn drift_check<'py>(py: Python<'py>, k: f64, p: f64, x: (f64, f64), y: (f64, f64), samples: u64, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let z = pair(x, y)?;
    let e = estimators::drift_check(k, p, &z, &McConfig::new(samples, seed, 1, 1)).map_err(err)?;
    to_dict(py, &serde_json::json!({"estimate": e, "V": estimators::drift_v(&z, p), "ratio": e.mean / estimators::drift_v(&z, p)}))
}

#[pyfunction]
#[pyo3(signature = (k, n_steps = 100_000, n_orbits = 16, seed = 20240601))]
fn lyapunov_exponent<'py>(py: Python<'py>, k: f64, n_steps: u64, n_orbits: u64, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &estimators::lyapunov_exponent(k, n_steps, n_orbits, RngStreamSpec::new(seed, 0)).map_err(err)?)
}

#[pyfunction]
fn singular_cos_integral(a: f64, b: f64, p: f64) -> PyResult<f64> {
    estimators::singular_cos_integral(a, b, p).map_err(err)
}

#[pyfunction]
fn det_xi_phi8<'py>(py: Python<'py>, k: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &structure::det_xi_phi8(k).map_err(err)?)
}

/// Ranks of the one-point, projective, two-point and Lyapunov submersion checks.
#[pyfunction]
fn submersion_ranks<'py>(py: Python<'py>, k: f64) -> PyResult<Bound<'py, PyAny>> {
    let s = structure::lyapunov_surjectivity(k).map_err(err)?;
    to_dict(
        py,
        &serde_json::json!({
            "one_point": structure::one_point_submersion(k).map_err(err)?.rank_at_tol,
            "projective": structure::projective_submersion(k).map_err(err)?.rank_at_tol,
            "two_point": structure::two_point_submersion(k).map_err(err)?.rank_at_tol,
            "two_point_n2": structure::two_point_submersion_n2(k).map_err(err)?.rank_at_tol,
            "lyapunov_position": s.position.rank_at_tol,
            "lyapunov_restricted": s.restricted.rank_at_tol,
        }),
    )
}

#[pyfunction]
fn harris_constants<'py>(py: Python<'py>, gamma: f64, c: f64, alpha: f64, r: f64, alpha0: f64, gamma0: f64) -> PyResult<Bound<'py, PyAny>> {
    let h = harris::harris_constants(DriftParams { gamma, c, m: 1 }, MinorizationParams { alpha, r, m: 1 }, alpha0, gamma0).map_err(err)?;
    to_dict(py, &h)
}

#[pyfunction]
#[pyo3(signature = (k, q = 1.0, p = 0.25))]
fn chirikov_headline_rates<'py>(py: Python<'py>, k: f64, q: f64, p: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &harris::chirikov_headline_rates(k, q, p, &ConstantsTable::default()).map_err(err)?)
}

#[pyfunction]
fn one_point_exact(x: (f64, f64), y: (f64, f64), k: f64) -> PyResult<(f64, f64)> {
    let w = control::one_point_exact(TorusPoint::new(x.0, x.1), TorusPoint::new(y.0, y.1), k).map_err(err)?;
    Ok((w.w1.value(), w.w2.value()))
}

/// Steers the pair (x, y) to within `eps` of (tx, ty); the phase list is
/// returned only when it has at most `max_phases` entries.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (x, y, tx, ty, eps, k, max_phases = 10_000))]
fn two_point_reach<'py>(py: Python<'py>, x: (f64, f64), y: (f64, f64), tx: (f64, f64), ty: (f64, f64), eps: f64, k: f64, max_phases: usize) -> PyResult<Bound<'py, PyAny>> {
    let r = control::two_point_reach(pair(x, y)?, pair(tx, ty)?, eps, k).map_err(err)?;
    let phases: Option<Vec<(f64, f64)>> = (r.steps <= max_phases).then(|| r.phases.iter().map(|w| (w.w1.value(), w.w2.value())).collect());
    to_dict(
        py,
        &serde_json::json!({
            "steps": r.steps, "final_distance": r.final_distance, "success": r.success,
            "stages": r.stages, "eps0": r.eps0, "phases": phases,
        }),
    )
}

/// Inviscid or diffusive decay of the real mode (1, 0); per-realization series.
#[pyfunction]
#[pyo3(signature = (k, nu = 0.0, steps = 50, realizations = 2, grid = 128, seed = 20240601))]
fn decay_experiment<'py>(py: Python<'py>, k: f64, nu: f64, steps: usize, realizations: usize, grid: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = DecayExperiment::chirikov(k, nu, steps, realizations, seed);
    cfg.grid = chirikov::transport::GridSpec::new(grid, true).map_err(err)?;
    to_dict(py, &run_decay_experiment(&cfg).map_err(err)?)
}

#[pymodule]
mod chirikov_py {
    #[pymodule_export]
    use super::{
        chirikov_headline_rates, contraction_estimate, decay_experiment, det_xi_phi8, drift_check, harris_constants, lyapunov_exponent, one_point_exact,
        singular_cos_integral, submersion_ranks, two_point_reach, PyShearMap,
    };
}
