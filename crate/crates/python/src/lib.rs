// pyo3 0.22's method macros trip this lint on every `PyResult` return.
#![allow(clippy::useless_conversion)]

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use herdtrack_core::assign;
use herdtrack_core::filters::PenRegion;
use herdtrack_core::io::TracksFile;
use herdtrack_core::mask::{self as core_mask, BitMask, Connectivity, RleMask};
use herdtrack_core::metrics::{self, DetectionCounts, MetricsConfig};
use herdtrack_core::pipeline::{run_long_term, Backends, ReferenceDetector, ReferencePropagator, TrackingConfig};
use herdtrack_core::refine::{refine_mask_traced, RefineConfig, RefineState};
use herdtrack_core::mask::Point;
use herdtrack_core::reid::ReferenceEmbedder;
use herdtrack_core::simgen::{generate_scenario, ScenarioSpec};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Python object -> serde value through the json module.
fn from_py<T: serde::de::DeserializeOwned>(py: Python<'_>, obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    let text: String = match obj {
        None => "{}".into(),
        Some(o) if o.is_none() => "{}".into(),
        Some(o) => match o.extract::<String>() {
            Ok(s) => s,
            Err(_) => py.import_bound("json")?.call_method1("dumps", (o,))?.extract()?,
        },
    };
    serde_json::from_str(&text).map_err(err)
}

fn to_py(py: Python<'_>, value: &impl serde::Serialize) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(err)?;
    Ok(py.import_bound("json")?.call_method1("loads", (text,))?.unbind())
}

/// Binary mask over a `width` x `height` raster.
#[pyclass(name = "Mask", eq, module = "herdtrack")]
#[derive(Clone, PartialEq)]
struct PyMask {
    inner: BitMask,
}

#[pymethods]
impl PyMask {
    /// Empty mask, or one built from rows of booleans.
    #[new]
    #[pyo3(signature = (width, height, rows = None))]
    fn new(width: u32, height: u32, rows: Option<Vec<Vec<bool>>>) -> PyResult<Self> {
        let inner = match rows {
            None => BitMask::new(width, height),
            Some(rows) => {
                if rows.len() != height as usize || rows.iter().any(|r| r.len() != width as usize) {
                    return Err(err(format!("rows must be {height} lists of {width} values")));
                }
                let flat: Vec<bool> = rows.into_iter().flatten().collect();
                BitMask::from_dense(width, height, &flat).map_err(err)?
            }
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn rect(width: u32, height: u32, x: u32, y: u32, w: u32, h: u32) -> Self {
        Self {
            inner: BitMask::rect(width, height, x, y, w, h),
        }
    }

    /// From `{"size": [h, w], "counts": [...]}`.
    #[staticmethod]
    fn from_rle(py: Python<'_>, rle: &Bound<'_, PyAny>) -> PyResult<Self> {
        let rle: RleMask = from_py(py, Some(rle))?;
        Ok(Self {
            inner: core_mask::rle_decode(&rle).map_err(err)?,
        })
    }

    fn to_rle(&self, py: Python<'_>) -> PyResult<PyObject> {
        to_py(py, &core_mask::rle_encode(&self.inner))
    }

    fn to_rows(&self) -> Vec<Vec<bool>> {
        let (w, h) = self.inner.dims();
        (0..h).map(|y| (0..w).map(|x| self.inner.get(x, y)).collect()).collect()
    }

    #[getter]
    fn width(&self) -> u32 {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.height()
    }

    #[getter]
    fn area(&self) -> usize {
        self.inner.area()
    }

    fn get(&self, x: u32, y: u32) -> bool {
        x < self.inner.width() && y < self.inner.height() && self.inner.get(x, y)
    }

    fn iou(&self, other: &PyMask) -> PyResult<f64> {
        core_mask::mask_iou(&self.inner, &other.inner).map_err(err)
    }

    /// `(x, y)` mean of the set pixels.
    fn centroid(&self) -> PyResult<(f64, f64)> {
        let c = core_mask::centroid(&self.inner).map_err(err)?;
        Ok((c.x, c.y))
    }

    /// `[x, y, w, h]`, or None for an empty mask.
    fn bbox(&self) -> Option<[f64; 4]> {
        self.inner.bbox().map(|b| b.to_array())
    }

    /// Connected components, largest first.
    #[pyo3(signature = (connectivity = 8))]
    fn components(&self, connectivity: u8) -> PyResult<Vec<PyMask>> {
        let conn = match connectivity {
            4 => Connectivity::Four,
            8 => Connectivity::Eight,
            c => return Err(err(format!("connectivity must be 4 or 8, got {c}"))),
        };
        Ok(core_mask::connected_components(&self.inner, conn)
            .into_iter()
            .map(|b| PyMask { inner: b.mask })
            .collect())
    }

    fn __repr__(&self) -> String {
        format!("Mask({}x{}, area={})", self.inner.width(), self.inner.height(), self.inner.area())
    }
}

/// Minimum-cost assignment. Returns the column for each row (None when
/// unassigned) and the total cost.
#[pyfunction]
fn hungarian(cost: Vec<Vec<f64>>) -> PyResult<(Vec<Option<usize>>, f64)> {
    let r = assign::hungarian(&cost).map_err(err)?;
    Ok((r.mapping, r.total_cost))
}

#[pyfunction]
fn mota(fn_: u64, fp: u64, idsw: u64, gt: u64) -> f64 {
    metrics::mota_from_counts(fn_, fp, idsw, gt)
}

/// `(precision, recall, f1)` from detection counts.
#[pyfunction]
#[pyo3(name = "precision_recall_f1")]
fn prf(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64) {
    let p = metrics::precision_recall_f1(DetectionCounts { tp, fp, fn_ });
    (p.precision, p.recall, p.f1)
}

#[pyfunction]
fn jf_mean(j: f64, f: f64) -> f64 {
    metrics::jf_mean(j, f)
}

#[pyfunction]
#[pyo3(signature = (pred, gt, tolerance = None))]
fn boundary_f(pred: &PyMask, gt: &PyMask, tolerance: Option<u32>) -> PyResult<f64> {
    let (w, h) = gt.inner.dims();
    let tol = tolerance.unwrap_or_else(|| metrics::default_boundary_tolerance(w, h));
    metrics::boundary_f(&pred.inner, &gt.inner, tol).map_err(err)
}

/// One refinement step against a pen polygon. Returns the cleaned mask and
/// the centroid to carry to the next frame.
#[pyfunction]
#[pyo3(signature = (mask, pen_polygon, prev_centroid = None, config = None))]
fn refine_mask(
    py: Python<'_>,
    mask: &PyMask,
    pen_polygon: Vec<[f64; 2]>,
    prev_centroid: Option<(f64, f64)>,
    config: Option<&Bound<'_, PyAny>>,
) -> PyResult<(PyMask, Option<(f64, f64)>)> {
    let cfg: RefineConfig = from_py(py, config)?;
    cfg.validate().map_err(err)?;
    let (w, h) = mask.inner.dims();
    let pen = PenRegion::new(pen_polygon, w, h).map_err(err)?;
    let state = match prev_centroid {
        None => RefineState::default(),
        Some((x, y)) => RefineState {
            prev_centroid: Some(Point::new(x, y)),
            is_first_frame: false,
        },
    };
    let t = refine_mask_traced(&mask.inner, &pen, &state, &cfg).map_err(err)?;
    Ok((PyMask { inner: t.cleaned }, t.state.prev_centroid.map(|c| (c.x, c.y))))
}

/// Scores tracks against ground truth; both in the tracks JSON layout.
#[pyfunction]
#[pyo3(signature = (pred, gt, config = None))]
fn evaluate(
    py: Python<'_>,
    pred: &Bound<'_, PyAny>,
    gt: &Bound<'_, PyAny>,
    config: Option<&Bound<'_, PyAny>>,
) -> PyResult<PyObject> {
    let pred: TracksFile = from_py(py, Some(pred))?;
    let gt: TracksFile = from_py(py, Some(gt))?;
    let cfg: MetricsConfig = from_py(py, config)?;
    let report = metrics::evaluate(&pred.to_tracks().map_err(err)?, &gt.to_tracks().map_err(err)?, &cfg)
        .map_err(err)?;
    to_py(py, &report)
}

/// Generates a scenario and tracks it with the reference models. Returns a
/// dict with `tracks`, `gt` and `report`.
#[pyfunction]
#[pyo3(signature = (spec = None, config = None))]
fn simulate_and_track(
    py: Python<'_>,
    spec: Option<&Bound<'_, PyAny>>,
    config: Option<&Bound<'_, PyAny>>,
) -> PyResult<PyObject> {
    let spec: ScenarioSpec = from_py(py, spec)?;
    let cfg: TrackingConfig = from_py(py, config)?;
    cfg.validate().map_err(err)?;
    let (tracks, gt, report) = py.allow_threads(|| {
        let s = generate_scenario(&spec)?;
        let detector = ReferenceDetector {
            threshold: cfg.pipeline.detection_threshold,
        };
        let backends = Backends {
            detector: &detector,
            propagator: &ReferencePropagator::default(),
            embedder: &ReferenceEmbedder,
        };
        let r = run_long_term(&s.clips, &backends, &s.pen, &cfg)?;
        let mut file = TracksFile::from_tracks(&r.tracks);
        file.qc = r.report.final_qc.flags.clone();
        file.excluded_spans = r.report.excluded_spans.clone();
        Ok::<_, herdtrack_core::Error>((file, TracksFile::from_tracks(&s.gt), r.report))
    })
    .map_err(err)?;
    let out = PyDict::new_bound(py);
    out.set_item("tracks", to_py(py, &tracks)?)?;
    out.set_item("gt", to_py(py, &gt)?)?;
    out.set_item("report", to_py(py, &report)?)?;
    Ok(out.into_any().unbind())
}

#[pymodule]
fn herdtrack(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyMask>()?;
    m.add_function(wrap_pyfunction!(hungarian, m)?)?;
    m.add_function(wrap_pyfunction!(mota, m)?)?;
    m.add_function(wrap_pyfunction!(prf, m)?)?;
    m.add_function(wrap_pyfunction!(jf_mean, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_f, m)?)?;
    m.add_function(wrap_pyfunction!(refine_mask, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_and_track, m)?)?;
    Ok(())
}
