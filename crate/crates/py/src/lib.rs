//! Python bindings: series arithmetic, frames, step predictions, towers and
//! their certificates.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use defect_tower::certificate::certify;
use defect_tower::frames::{self, ExtType, ExtensionFrame, Flavor, Predicted};
use defect_tower::monocheck;
use defect_tower::series::vars;
use defect_tower::tower::{self, TowerConfig, TowerState};
use defect_tower::valuation::{independence_test, rat_string, CutValue};
use defect_tower::{Error, Field, TruncSeries, Var};

fn err(e: Error) -> PyErr {
    match e {
        Error::PrecisionExhausted { .. } | Error::SearchExhausted(_) | Error::FieldTooSmall { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn type_number(t: ExtType) -> Option<u8> {
    match t {
        ExtType::Type0 => Some(0),
        ExtType::Type1 => Some(1),
        ExtType::Type2 => Some(2),
        ExtType::Unclassified => None,
    }
}

/// Truncated power series in `x, y` over `F_{p^n}`.
#[pyclass(name = "Series", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySeries {
    inner: TruncSeries,
}

#[pymethods]
impl PySeries {
    /// `terms` maps `(a, b)` to the integer coefficient of `x^a y^b`.
    #[new]
    #[pyo3(signature = (p, terms, prec, n = 1))]
    fn new(p: u32, terms: BTreeMap<(u32, u32), i64>, prec: u64, n: u32) -> PyResult<Self> {
        let field = Field::new(p, n).map_err(err)?;
        let terms: Vec<_> = terms.into_iter().collect();
        let inner = TruncSeries::from_ints(&field, &vars("x", "y"), &terms, prec).map_err(err)?;
        Ok(PySeries { inner })
    }

    #[getter]
    fn prec(&self) -> u64 {
        self.inner.prec()
    }

    fn terms(&self) -> BTreeMap<(u32, u32), u32> {
        self.inner.terms().clone()
    }

    fn __add__(&self, other: &PySeries) -> PyResult<PySeries> {
        Ok(PySeries { inner: self.inner.add(&other.inner).map_err(err)? })
    }

    fn __sub__(&self, other: &PySeries) -> PyResult<PySeries> {
        Ok(PySeries { inner: self.inner.sub(&other.inner).map_err(err)? })
    }

    fn __mul__(&self, other: &PySeries) -> PyResult<PySeries> {
        Ok(PySeries { inner: self.inner.mul(&other.inner).map_err(err)? })
    }

    fn __eq__(&self, other: &PySeries) -> bool {
        self.inner == other.inner
    }

    fn invert_unit(&self) -> PyResult<PySeries> {
        Ok(PySeries { inner: self.inner.invert_unit().map_err(err)? })
    }

    /// Partial derivative in `"x"` or `"y"`.
    fn partial(&self, var: &str) -> PyResult<PySeries> {
        let v = match var {
            "x" => Var::X,
            "y" => Var::Y,
            _ => return Err(PyValueError::new_err(format!("unknown variable `{var}`"))),
        };
        Ok(PySeries { inner: self.inner.partial(v).map_err(err)? })
    }

    /// `self(g, h)`.
    fn substitute(&self, g: &PySeries, h: &PySeries) -> PyResult<PySeries> {
        Ok(PySeries { inner: self.inner.substitute(&g.inner, &h.inner).map_err(err)? })
    }

    /// `(c, unit)`: least x-exponent and whether the series is `x^c` times a unit.
    fn x_ideal_exponent(&self) -> PyResult<(u32, bool)> {
        self.inner.x_ideal_exponent().map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Series({})", self.inner.to_text())
    }

    fn __str__(&self) -> String {
        self.inner.to_text()
    }
}

/// One arrow `R -> S` given by `u, v` as series in the parameters of `S`.
#[pyclass(name = "Frame", frozen)]
struct PyFrame {
    inner: ExtensionFrame,
}

#[pymethods]
impl PyFrame {
    #[getter]
    fn u(&self) -> PySeries {
        PySeries { inner: self.inner.u.clone() }
    }
    #[getter]
    fn v(&self) -> PySeries {
        PySeries { inner: self.inner.v.clone() }
    }
    /// 0, 1, 2, or None when unclassified.
    #[getter]
    fn ext_type(&self) -> Option<u8> {
        type_number(self.inner.ext_type)
    }
    #[getter]
    fn jac_exp(&self) -> u64 {
        self.inner.jac_exp
    }
    fn __repr__(&self) -> String {
        format!("Frame(type={:?}, c={})", self.inner.ext_type, self.inner.jac_exp)
    }
}

#[pyfunction]
#[pyo3(signature = (p, e, prec, n = 1))]
fn bootstrap(p: u32, e: u64, prec: u64, n: u32) -> PyResult<PyFrame> {
    Ok(PyFrame { inner: frames::bootstrap_artin_schreier(p, n, e, prec).map_err(err)? })
}

fn flavor(name: &str) -> PyResult<Flavor> {
    match name.to_ascii_lowercase().as_str() {
        "a" => Ok(Flavor::TheoremA),
        "b" => Ok(Flavor::TheoremB),
        _ => Err(PyValueError::new_err(format!("flavor must be 'a' or 'b', got `{name}`"))),
    }
}

/// Closed-form `(type, c1)` of a step from an arrow with exponent `c_bar`.
#[pyfunction]
fn predict(flavor_name: &str, p: u32, c_bar: u64, m: u64, q: u64) -> PyResult<(u8, Option<u64>)> {
    Ok(match frames::predict(flavor(flavor_name)?, p, c_bar, m, q).map_err(err)? {
        Predicted::Type0 => (0, None),
        Predicted::Typed { ext_type, c1 } => (type_number(ext_type).unwrap_or(255), Some(c1)),
    })
}

/// Runs a step on the synthetic arrow of exponent `c_bar` and returns the result.
#[pyfunction]
#[pyo3(signature = (flavor_name, p, c_bar, m, q, prec = 512))]
fn run_step(flavor_name: &str, p: u32, c_bar: u64, m: u64, q: u64, prec: u64) -> PyResult<PyFrame> {
    let fl = flavor(flavor_name)?;
    let field = Field::prime(p).map_err(err)?;
    let frame = match fl {
        Flavor::TheoremA => frames::synthetic_type1(&field, c_bar, prec),
        Flavor::TheoremB => frames::synthetic_type2(&field, c_bar, prec),
    }
    .map_err(err)?;
    let out = frames::step_any_alpha(&frame, fl, m, q, |s| {
        let mut o = frames::StepOptions::standard(&frame, s);
        o.prec = o.prec.min(prec);
        o
    })
    .map_err(err)?;
    Ok(PyFrame { inner: out.frame })
}

/// `δ = p δ` for the cut `r⁻` (side "-") or `r` (side "+").
#[pyfunction]
#[pyo3(signature = (num, den, p, side = "-"))]
fn is_independent_cut(num: i64, den: i64, p: u32, side: &str) -> PyResult<bool> {
    if den == 0 {
        return Err(PyValueError::new_err("zero denominator"));
    }
    let r = defect_tower::valuation::rat(num, den);
    let cut = match side {
        "-" => CutValue::minus(r),
        "+" => CutValue::exact(r),
        _ => return Err(PyValueError::new_err("side must be '-' or '+'")),
    };
    Ok(independence_test(&cut, p))
}

/// A built tower with its ledgers.
#[pyclass(name = "Tower", frozen)]
struct PyTower {
    state: TowerState,
}

#[pymethods]
impl PyTower {
    #[new]
    #[pyo3(signature = (p = 2, steps = 6, e = 1, n = 1, lambda_max = 4, prec = 1024))]
    fn new(py: Python<'_>, p: u32, steps: u32, e: u64, n: u32, lambda_max: u32, prec: u64) -> PyResult<Self> {
        let config = TowerConfig { p, n, e, steps, lambda_max, prec };
        let state = py.detach(|| tower::build(&config)).map_err(err)?;
        Ok(PyTower { state })
    }

    #[getter]
    fn level(&self) -> i64 {
        self.state.level
    }

    /// `R_i -> S_i`.
    fn lower(&self, level: i64) -> PyResult<PyFrame> {
        Ok(PyFrame { inner: self.state.rs(level).map_err(err)?.clone() })
    }

    /// `S_i -> T_i`.
    fn upper(&self, level: i64) -> PyResult<PyFrame> {
        Ok(PyFrame { inner: self.state.st(level).map_err(err)?.clone() })
    }

    /// `R_i -> T_i`.
    fn composite(&self, level: i64) -> PyResult<PyFrame> {
        Ok(PyFrame { inner: self.state.rt(level).map_err(err)?.clone() })
    }

    /// `A_i` of the lower (`"omega"`) or upper (`"mu"`) ledger as fraction strings.
    fn ledger(&self, which: &str) -> PyResult<Vec<String>> {
        let l = match which {
            "omega" => &self.state.omega,
            "mu" => &self.state.mu,
            _ => return Err(PyValueError::new_err("ledger must be 'omega' or 'mu'")),
        };
        Ok(l.jac_values.iter().map(rat_string).collect())
    }

    /// `(omega independent, mu independent)` at `r`.
    fn distance_verdicts(&self, r: u32) -> (bool, bool) {
        (self.state.omega.distance_verdict(r).is_independent(), self.state.mu.distance_verdict(r).is_independent())
    }

    /// Sweep report over `0..levels` as JSON.
    #[pyo3(signature = (levels = 4))]
    fn sweep_json(&self, levels: i64) -> PyResult<String> {
        let rep = monocheck::sweep(&self.state, 0..levels.min(self.state.level)).map_err(err)?;
        serde_json::to_string(&rep).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// Certificate as JSON, with the sweep over `0..sweep_levels`.
    #[pyo3(signature = (sweep_levels = 4))]
    fn certificate_json(&self, sweep_levels: i64) -> PyResult<String> {
        let range = 0..sweep_levels.min(self.state.level);
        let rep = if range.is_empty() { None } else { Some(monocheck::sweep(&self.state, range).map_err(err)?) };
        Ok(certify(&self.state, rep.as_ref()).map_err(err)?.to_json())
    }
}

#[pymodule]
fn defect_tower_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySeries>()?;
    m.add_class::<PyFrame>()?;
    m.add_class::<PyTower>()?;
    m.add_function(wrap_pyfunction!(bootstrap, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(run_step, m)?)?;
    m.add_function(wrap_pyfunction!(is_independent_cut, m)?)?;
    Ok(())
}
