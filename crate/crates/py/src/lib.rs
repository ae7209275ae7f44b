//! Python bindings: datasets, the MPS projector, both training stages,
//! metrics and the verification suites.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use mpsvqc::checkpoint::Checkpoint;
use mpsvqc::data::{gen_synthetic, split, EmbeddingDataset, GenParams, SplitSpec};
use mpsvqc::metrics::MetricsReport;
use mpsvqc::mps::{angle_encode, contract_sequential, random_mps, MpsProjector};
use mpsvqc::train::{
    stage1_init, stage1_scores, stage1_train, stage2_scores, stage2_train, StageOneHead,
    TrainConfig,
};
use mpsvqc::verify::Suite;
use mpsvqc::vqc::{AnsatzSpec, CompiledAnsatz, Statevector, VqcModel};

fn err(e: mpsvqc::Error) -> PyErr {
    if e.is_usage() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "Dataset", module = "mpsvqc_py", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset(EmbeddingDataset);

#[pymethods]
impl PyDataset {
    #[staticmethod]
    #[pyo3(signature = (n=4000, d_emb=8, rho=0.5, margin=2.0, sigma=0.3, seed=0))]
    fn synthetic(n: usize, d_emb: usize, rho: f64, margin: f64, sigma: f64, seed: u64) -> PyResult<Self> {
        gen_synthetic(&GenParams {
            n,
            d_emb,
            rho,
            margin,
            sigma,
            seed,
        })
        .map(Self)
        .map_err(err)
    }

    /// Reads `.mmeb` or `.csv` by extension.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        EmbeddingDataset::load(&path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            self.0.save_csv(&path).map_err(err)
        } else {
            self.0.save_mmeb(&path).map_err(err)
        }
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn labels(&self) -> Vec<u8> {
        self.0.labels().to_vec()
    }

    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.0.len() {
            return Err(PyValueError::new_err(format!("row {i} out of range")));
        }
        Ok(self.0.row(i))
    }

    /// Stratified `(train, test)` split.
    #[pyo3(signature = (seed=0, train=0.8, test=0.2))]
    fn split(&self, seed: u64, train: f64, test: f64) -> PyResult<(Self, Self)> {
        let spec = SplitSpec {
            train,
            test,
            seed,
            ..Default::default()
        };
        let (tr, te) = split(&self.0, &spec).map_err(err)?;
        Ok((
            Self(self.0.subset(&tr).map_err(err)?),
            Self(self.0.subset(&te).map_err(err)?),
        ))
    }
}

/// Training configuration; keyword arguments override the defaults and
/// use the run-config key names.
#[pyclass(name = "TrainConfig", module = "mpsvqc_py", skip_from_py_object)]
#[derive(Clone)]
struct PyTrainConfig(TrainConfig);

#[pymethods]
impl PyTrainConfig {
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(py: Python<'_>, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut value = serde_json::to_value(TrainConfig::default())
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        if let Some(kw) = overrides {
            let text: String = py.import("json")?.call_method1("dumps", (kw,))?.extract()?;
            let patch: serde_json::Map<String, serde_json::Value> =
                serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
            let obj = value.as_object_mut().expect("config serializes to an object");
            for (k, v) in patch {
                obj.insert(k, v);
            }
        }
        let cfg: TrainConfig = serde_json::from_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
        cfg.validate().map_err(err)?;
        Ok(Self(cfg))
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0)
    }
}

#[pyclass(name = "MpsProjector", module = "mpsvqc_py", skip_from_py_object)]
#[derive(Clone)]
struct PyMps(MpsProjector);

#[pymethods]
impl PyMps {
    /// Random standard-mode chain in mixed canonical form.
    #[staticmethod]
    #[pyo3(signature = (length, chi, d_fused, center=0, seed=0))]
    fn random(length: usize, chi: usize, d_fused: usize, center: usize, seed: u64) -> PyResult<Self> {
        random_mps(length, chi, d_fused, center, seed).map(Self).map_err(err)
    }

    #[getter]
    fn length(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn max_bond(&self) -> usize {
        self.0.max_bond()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.0.param_count()
    }

    /// Fused feature of one embedding row (entries in `[-1, 1]`).
    fn contract(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        let phi = angle_encode(&values).map_err(err)?;
        Ok(contract_sequential(&self.0, &phi).map_err(err)?.values)
    }

    fn canonical_residual(&self) -> PyResult<f64> {
        Ok(self.0.canonical_residuals().map_err(err)?.max())
    }

    /// Truncating sweep; returns the new chain and the total discarded weight.
    fn truncate(&self, chi_set: usize) -> PyResult<(Self, f64)> {
        let (t, report) = self.0.sweep_truncate(chi_set).map_err(err)?;
        Ok((Self(t), report.total_discarded()))
    }
}

#[pyclass(name = "StageOne", module = "mpsvqc_py")]
struct PyStageOne {
    mps: MpsProjector,
    head: StageOneHead,
    losses: Vec<f64>,
}

#[pymethods]
impl PyStageOne {
    #[staticmethod]
    #[pyo3(signature = (data, config=None))]
    fn train(py: Python<'_>, data: &PyDataset, config: Option<&PyTrainConfig>) -> PyResult<Self> {
        let cfg = config.map_or_else(TrainConfig::default, |c| c.0.clone());
        let out = py
            .detach(|| {
                let (mps, head) = stage1_init(data.0.width(), &cfg)?;
                stage1_train(mps, head, &data.0, &cfg, &mut |_, _, _| Ok(()))
            })
            .map_err(err)?;
        Ok(Self {
            losses: out.report.steps.iter().map(|s| s.loss).collect(),
            mps: out.mps,
            head: out.head,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (mps, head) = Checkpoint::load(&path).and_then(|c| c.to_stage_one()).map_err(err)?;
        Ok(Self {
            mps,
            head,
            losses: Vec::new(),
        })
    }

    #[pyo3(signature = (path, seed=0))]
    fn save(&self, path: PathBuf, seed: u64) -> PyResult<()> {
        Checkpoint::stage_one(&self.mps, &self.head, seed, "").save(&path).map_err(err)
    }

    /// Live-class probability per row.
    fn scores(&self, py: Python<'_>, data: &PyDataset) -> PyResult<Vec<f64>> {
        py.detach(|| stage1_scores(&self.mps, &self.head, &data.0)).map_err(err)
    }

    #[getter]
    fn mps(&self) -> PyMps {
        PyMps(self.mps.clone())
    }

    /// Per-step training loss of the run that produced this model.
    #[getter]
    fn losses(&self) -> Vec<f64> {
        self.losses.clone()
    }
}

#[pyclass(name = "StageTwo", module = "mpsvqc_py")]
struct PyStageTwo {
    model: VqcModel,
    mps_checksum: String,
    losses: Vec<f64>,
}

#[pymethods]
impl PyStageTwo {
    /// Trains the circuit classifier on the frozen projector of `stage_one`.
    #[staticmethod]
    #[pyo3(signature = (stage_one, data, config=None))]
    fn train(
        py: Python<'_>,
        stage_one: &PyStageOne,
        data: &PyDataset,
        config: Option<&PyTrainConfig>,
    ) -> PyResult<Self> {
        let mut cfg = config.map_or_else(TrainConfig::default, |c| c.0.clone());
        cfg.stage = 2;
        let spec = cfg.ansatz().map_err(err)?;
        let out = py
            .detach(|| stage2_train(&stage_one.mps, &spec, &data.0, None, &cfg))
            .map_err(err)?;
        Ok(Self {
            losses: out.report.steps.iter().map(|s| s.loss).collect(),
            model: out.model,
            mps_checksum: out.mps_checksum,
        })
    }

    /// Loads a stage-two checkpoint; it must have been trained on `stage_one`.
    #[staticmethod]
    fn load(path: PathBuf, stage_one: &PyStageOne) -> PyResult<Self> {
        let ck = Checkpoint::load(&path).map_err(err)?;
        let checksum = stage_one.mps.checksum();
        if ck.recorded_mps_checksum().as_deref() != Some(checksum.as_str()) {
            return Err(PyValueError::new_err("checkpoint was trained on a different projector"));
        }
        Ok(Self {
            model: ck.to_stage_two().map_err(err)?,
            mps_checksum: checksum,
            losses: Vec::new(),
        })
    }

    #[pyo3(signature = (path, seed=0))]
    fn save(&self, path: PathBuf, seed: u64) -> PyResult<()> {
        Checkpoint::stage_two(&self.model, &self.mps_checksum, seed, "")
            .save(&path)
            .map_err(err)
    }

    fn scores(&self, py: Python<'_>, stage_one: &PyStageOne, data: &PyDataset) -> PyResult<Vec<f64>> {
        py.detach(|| stage2_scores(&stage_one.mps, &self.model, &data.0)).map_err(err)
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.model.param_count()
    }

    #[getter]
    fn losses(&self) -> Vec<f64> {
        self.losses.clone()
    }
}

#[pyclass(name = "Circuit", module = "mpsvqc_py")]
struct PyCircuit(CompiledAnsatz);

#[pymethods]
impl PyCircuit {
    #[new]
    #[pyo3(signature = (n_qubits, topology="chain", entangler="cnot"))]
    fn new(n_qubits: usize, topology: &str, entangler: &str) -> PyResult<Self> {
        let spec = AnsatzSpec::uniform(n_qubits, topology.parse().map_err(err)?, entangler.parse().map_err(err)?);
        spec.validate().map_err(err)?;
        CompiledAnsatz::new(&spec).map(Self).map_err(err)
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.0.param_count()
    }

    /// `<Z>` on each measured qubit after RY-encoding `angles` and running
    /// the circuit with `params`.
    fn expectations(&self, angles: Vec<f64>, params: Vec<f64>) -> PyResult<Vec<f64>> {
        let state = Statevector::product_ry(&angles).map_err(err)?;
        let out = self.0.run(&state, &params).map_err(err)?;
        self.0.measure(&out).map_err(err)
    }
}

/// APCER, BPCER, ACER at `threshold`, TPR at the FPR target and AUC, as a dict.
#[pyfunction]
#[pyo3(signature = (scores, labels, threshold=0.5, fpr_target=1e-3))]
fn metrics(py: Python<'_>, scores: Vec<f64>, labels: Vec<u8>, threshold: f64, fpr_target: f64) -> PyResult<Py<PyAny>> {
    let m = MetricsReport::compute(&scores, &labels, threshold, fpr_target).map_err(err)?;
    to_py(py, &m)
}

/// Runs a verification suite (`mps`, `vqc`, `trotter` or `all`) and returns
/// one dict per check.
#[pyfunction]
#[pyo3(signature = (suite="all", seed=0))]
fn verify(py: Python<'_>, suite: &str, seed: u64) -> PyResult<Py<PyAny>> {
    let suite: Suite = suite.parse().map_err(err)?;
    let report = py.detach(|| mpsvqc::verify::run(suite, seed, None)).map_err(err)?;
    to_py(py, &report.checks)
}

#[pymodule]
fn mpsvqc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyTrainConfig>()?;
    m.add_class::<PyMps>()?;
    m.add_class::<PyStageOne>()?;
    m.add_class::<PyStageTwo>()?;
    m.add_class::<PyCircuit>()?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
