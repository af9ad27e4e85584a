//! Python bindings: order books, snapshot series, representations,
//! perturbations, labels, checkpoints and the experiment grid.
//!
//! Structured results (metrics, summaries, sidecars) come back as plain
//! dicts and lists.

use std::path::PathBuf;

use lobrep::book::{BookEvent, BookState, Side, Tick};
use lobrep::dataset::{series_labels, window_tensor, SampleSpec};
use lobrep::eval::{metrics_from_indices, run_grid as grid, Checkpoint, ExperimentConfig, GridData};
use lobrep::ingest::{events_to_series, parse_event_csv, parse_fi2010, render_event_csv, Fi2010Options};
use lobrep::learn::ModelKind;
use lobrep::perturb::{perturb_event_stream, perturb_series, FillCap, Paradigm, PerturbationSpec};
use lobrep::represent::{Scheme, WindowConfig};
use lobrep::synth::{generate, SynthConfig};
use lobrep::tensor::{Sidecar, Tensor, TensorData};
use lobrep::{Class, LabelConfig, SnapshotSeries};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_loads<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn json_dumps(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.extract::<String>() {
        return Ok(s);
    }
    obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()
}

fn side(s: &str) -> PyResult<Side> {
    match s {
        "ask" | "a" => Ok(Side::Ask),
        "bid" | "b" => Ok(Side::Bid),
        _ => Err(err(format!("side must be 'ask' or 'bid', got {s:?}"))),
    }
}

fn parse_scheme(s: &str) -> PyResult<Scheme> {
    Scheme::parse(s).ok_or_else(|| err(format!("unknown scheme {s:?}")))
}

fn paradigm(s: &str) -> PyResult<Paradigm> {
    Paradigm::parse(s).ok_or_else(|| err(format!("unknown paradigm {s:?}")))
}

fn perturbation(p: &str, order_size: Option<u64>, fill_ticks: Option<u32>, allow_truncation: bool) -> PyResult<PerturbationSpec> {
    Ok(PerturbationSpec {
        paradigm: paradigm(p)?,
        order_size,
        fill_cap: fill_ticks.map_or(FillCap::DeepestLevel, FillCap::Ticks),
        allow_truncation,
    })
}

/// A price-level book on an integer tick grid.
#[pyclass(name = "Book")]
struct PyBook {
    inner: BookState,
}

#[pymethods]
impl PyBook {
    #[new]
    #[pyo3(signature = (tick_size=0.01, min_order_size=1))]
    fn new(tick_size: f64, min_order_size: u64) -> PyResult<Self> {
        Ok(Self { inner: BookState::new(tick_size, min_order_size).map_err(err)? })
    }

    /// Applies one event; `kind` is place, cancel or execute. A rejected
    /// event raises and leaves the book unchanged.
    fn apply(&mut self, kind: &str, side_: &str, price_ticks: i64, volume: u64) -> PyResult<()> {
        let s = side(side_)?;
        let ev = match kind {
            "place" => BookEvent::place(s, Tick(price_ticks), volume),
            "cancel" => BookEvent::cancel(s, Tick(price_ticks), volume),
            "execute" => BookEvent::execute(s, Tick(price_ticks), volume),
            _ => return Err(err(format!("unknown event kind {kind:?}"))),
        };
        self.inner.apply(&ev).map_err(err)
    }

    fn best_ask(&self) -> Option<i64> {
        self.inner.best_ask().map(|t| t.0)
    }

    fn best_bid(&self) -> Option<i64> {
        self.inner.best_bid().map(|t| t.0)
    }

    fn depth(&self, side_: &str) -> PyResult<usize> {
        Ok(self.inner.depth(side(side_)?))
    }

    fn volume_at(&self, side_: &str, price_ticks: i64) -> PyResult<u64> {
        Ok(self.inner.volume_at(side(side_)?, Tick(price_ticks)))
    }

    /// Top `levels` per side as `{"asks": [(price, volume)], "bids": [...]}`.
    fn snapshot<'py>(&self, py: Python<'py>, levels: usize) -> PyResult<Bound<'py, PyAny>> {
        let s = self.inner.snapshot(levels).map_err(err)?;
        let pairs = |v: &[lobrep::Level]| v.iter().map(|l| (l.price, l.volume)).collect::<Vec<_>>();
        json_loads(py, &serde_json::json!({ "asks": pairs(&s.asks), "bids": pairs(&s.bids) }))
    }

    /// A copy with empty ticks filled under the given paradigm.
    #[pyo3(signature = (paradigm, levels=10, order_size=None, fill_ticks=None))]
    fn perturbed(&self, paradigm: &str, levels: usize, order_size: Option<u64>, fill_ticks: Option<u32>) -> PyResult<Self> {
        let spec = perturbation(paradigm, order_size, fill_ticks, false)?;
        Ok(Self { inner: lobrep::perturb::perturb_book(&self.inner, &spec, levels).map_err(err)? })
    }
}

/// Ordered level snapshots sharing one tick grid.
#[pyclass(name = "Series", from_py_object)]
#[derive(Clone)]
struct PySeries {
    inner: SnapshotSeries,
}

#[pymethods]
impl PySeries {
    /// Replays a `seq,kind,side,price,volume` CSV. With `paradigm`, the
    /// perturbation is applied against the full book during replay.
    #[staticmethod]
    #[pyo3(signature = (text, tick_size=0.01, min_order_size=1, levels=10, paradigm=None, order_size=None, fill_ticks=None))]
    fn from_events_csv(
        text: &str,
        tick_size: f64,
        min_order_size: u64,
        levels: usize,
        paradigm: Option<&str>,
        order_size: Option<u64>,
        fill_ticks: Option<u32>,
    ) -> PyResult<Self> {
        let stream = parse_event_csv(text, tick_size, min_order_size).map_err(err)?;
        let inner = match paradigm {
            Some(p) => perturb_event_stream(&stream, &perturbation(p, order_size, fill_ticks, false)?, levels).map_err(err)?,
            None => events_to_series(&stream, levels).map_err(err)?,
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, tick_size=0.01, min_order_size=1, prenormalized=false))]
    fn read_fi2010(path: PathBuf, tick_size: f64, min_order_size: u64, prenormalized: bool) -> PyResult<Self> {
        let opts = Fi2010Options { tick_size, min_order_size, prenormalized, ..Default::default() };
        Ok(Self { inner: parse_fi2010(&path, &opts).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: serde_json::from_str(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(err)
    }

    /// Joins series as consecutive trading days.
    #[staticmethod]
    fn concat_days(parts: Vec<PySeries>) -> PyResult<Self> {
        let inner = SnapshotSeries::concat_days(parts.into_iter().map(|p| p.inner).collect()).map_err(err)?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn levels(&self) -> usize {
        self.inner.levels
    }

    #[getter]
    fn tick_size(&self) -> f64 {
        self.inner.tick_size
    }

    fn mids(&self) -> Vec<f64> {
        self.inner.mids()
    }

    /// `(start, end)` of each trading day.
    fn days(&self) -> Vec<(usize, usize)> {
        self.inner.days()
    }

    fn snapshot<'py>(&self, py: Python<'py>, t: usize) -> PyResult<Bound<'py, PyAny>> {
        let s = self.inner.snapshots.get(t).ok_or_else(|| err(format!("index {t} out of range")))?;
        json_loads(py, s)
    }

    #[pyo3(signature = (paradigm, order_size=None, fill_ticks=None, allow_truncation=false))]
    fn perturb(&self, paradigm: &str, order_size: Option<u64>, fill_ticks: Option<u32>, allow_truncation: bool) -> PyResult<Self> {
        let spec = perturbation(paradigm, order_size, fill_ticks, allow_truncation)?;
        Ok(Self { inner: perturb_series(&self.inner, &spec).map_err(err)? })
    }

    /// Representation of the window ending at `t`, as rows of floats.
    #[pyo3(signature = (scheme, t, history=10, half_width=20, sigma=1.0))]
    fn represent(&self, scheme: &str, t: usize, history: usize, half_width: usize, sigma: f64) -> PyResult<Vec<Vec<f64>>> {
        if t + 1 < history || t >= self.inner.len() {
            return Err(err(format!("no full window of {history} ends at {t}")));
        }
        let window = WindowConfig { history, half_width, sigma, ..WindowConfig::default() };
        window.validate().map_err(err)?;
        let spec = SampleSpec { window, ..SampleSpec::new(parse_scheme(scheme)?) };
        let r = window_tensor(&self.inner, t, &spec).map_err(err)?;
        Ok(r.data.chunks(r.cols).map(<[f64]>::to_vec).collect())
    }

    /// Class names per snapshot; `None` where the horizon leaves the day.
    #[pyo3(signature = (horizon=50, alpha=0.002))]
    fn labels(&self, horizon: usize, alpha: f64) -> PyResult<Vec<Option<&'static str>>> {
        let spec = SampleSpec { label: LabelConfig { horizon, alpha }, ..SampleSpec::new(Scheme::Mw) };
        let labels = series_labels(&self.inner, &spec).map_err(err)?;
        Ok(labels.into_iter().map(|c| c.map(Class::name)).collect())
    }
}

fn experiment(config: Option<&Bound<'_, PyAny>>) -> PyResult<ExperimentConfig> {
    match config {
        Some(c) => serde_json::from_str(&json_dumps(c)?).map_err(err),
        None => Ok(ExperimentConfig::default()),
    }
}

/// A trained model with its scaler and sampling settings.
#[pyclass(name = "Checkpoint")]
struct PyCheckpoint {
    inner: Checkpoint,
}

#[pymethods]
impl PyCheckpoint {
    /// Trains exactly as one grid cell would. `config` is a dict or JSON
    /// string of experiment keys.
    #[staticmethod]
    #[pyo3(signature = (train, model="linear", scheme="mw", seed=0, config=None))]
    fn fit(train: &PySeries, model: &str, scheme: &str, seed: u64, config: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let kind = ModelKind::parse(model).ok_or_else(|| err(format!("unknown model {model:?}")))?;
        let cfg = experiment(config)?;
        Ok(Self { inner: Checkpoint::fit(&train.inner, &cfg, kind, parse_scheme(scheme)?, seed).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: Checkpoint::load(&path).map_err(err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    #[pyo3(signature = (series, labels_from=None))]
    fn evaluate<'py>(&self, py: Python<'py>, series: &PySeries, labels_from: Option<&PySeries>) -> PyResult<Bound<'py, PyAny>> {
        let clean = labels_from.unwrap_or(series);
        json_loads(py, &self.inner.evaluate(&series.inner, &clean.inner).map_err(err)?)
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.inner.model.num_params()
    }
}

/// Macro precision, recall and F (percentages) with the confusion matrix.
/// Classes are given as names or indices (0 up, 1 stationary, 2 down).
#[pyfunction]
fn metrics<'py>(py: Python<'py>, preds: Vec<Bound<'py, PyAny>>, labels: Vec<Bound<'py, PyAny>>) -> PyResult<Bound<'py, PyAny>> {
    if preds.len() != labels.len() || preds.is_empty() {
        return Err(err("preds and labels must be non-empty and of equal length"));
    }
    let index = |v: &Bound<'py, PyAny>| -> PyResult<usize> {
        if let Ok(i) = v.extract::<usize>() {
            return if i < 3 { Ok(i) } else { Err(err(format!("class index {i} out of range"))) };
        }
        let name: String = v.extract()?;
        Class::ALL.iter().find(|c| c.name() == name).map(|c| c.index()).ok_or_else(|| err(format!("unknown class {name:?}")))
    };
    let p = preds.iter().map(index).collect::<PyResult<Vec<_>>>()?;
    let l = labels.iter().map(index).collect::<PyResult<Vec<_>>>()?;
    json_loads(py, &metrics_from_indices(&l, &p, 3))
}

/// Runs the grid on snapshot series. Returns `results_csv`, `summary`
/// (parsed summary.json) and `table`.
#[pyfunction]
#[pyo3(signature = (train, test, config=None))]
fn run_grid<'py>(py: Python<'py>, train: &PySeries, test: &PySeries, config: Option<&Bound<'py, PyAny>>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = experiment(config)?;
    let (a, b) = (train.inner.clone(), test.inner.clone());
    let report = py
        .detach(move || GridData::from_series(a, b, &cfg).and_then(|d| grid(&cfg, &d)))
        .map_err(err)?;
    let summary: serde_json::Value = serde_json::from_str(&report.summary_json().map_err(err)?).map_err(err)?;
    json_loads(
        py,
        &serde_json::json!({ "results_csv": report.results_csv(), "summary": summary, "table": report.table() }),
    )
}

/// Synthetic event stream as CSV text.
#[pyfunction]
#[pyo3(signature = (seed=0, events=50000))]
fn synth_events_csv(seed: u64, events: usize) -> PyResult<String> {
    Ok(render_event_csv(&generate(&SynthConfig { seed, events, ..SynthConfig::default() }).map_err(err)?))
}

/// Reads a tensor file: `(dims, flat values, sidecar dict or None)`.
#[pyfunction]
fn read_tensor<'py>(py: Python<'py>, path: PathBuf) -> PyResult<(Vec<usize>, Vec<f64>, Bound<'py, PyAny>)> {
    let t = Tensor::read(&path).map_err(err)?;
    let sidecar = match Sidecar::read(&path) {
        Ok(s) => json_loads(py, &s)?,
        Err(_) => py.None().into_bound(py),
    };
    Ok((t.dims.clone(), t.data.to_f64(), sidecar))
}

/// Writes an f32 tensor file with a minimal sidecar.
#[pyfunction]
#[pyo3(signature = (path, dims, values, kind="features"))]
fn write_tensor(path: PathBuf, dims: Vec<usize>, values: Vec<f64>, kind: &str) -> PyResult<()> {
    let t = Tensor::new(dims, TensorData::F32(values.iter().map(|&v| v as f32).collect())).map_err(err)?;
    t.write(&path).map_err(err)?;
    Sidecar { kind: kind.into(), shape: t.dims.clone(), ..Default::default() }.write(&path).map_err(err)
}

#[pymodule]
fn pylobrep(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBook>()?;
    m.add_class::<PySeries>()?;
    m.add_class::<PyCheckpoint>()?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(run_grid, m)?)?;
    m.add_function(wrap_pyfunction!(synth_events_csv, m)?)?;
    m.add_function(wrap_pyfunction!(read_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(write_tensor, m)?)?;
    m.add("SCHEMES", Scheme::ALL.iter().map(|s| s.name()).collect::<Vec<_>>())?;
    m.add("PARADIGMS", Paradigm::ALL.iter().map(|p| p.name()).collect::<Vec<_>>())?;
    Ok(())
}
