//! Python bindings for the labelmodel crate.
//!
//! Exposes the label matrix, the independent and factor-graph label models,
//! the noise-aware linear model, the baselines, and the synthetic generator,
//! so the whole pipeline can be driven from Python in-process.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use labelmodel as lm;
use labelmodel::factor;
use labelmodel::independent;
use labelmodel::io;
use labelmodel::noise_aware;
use labelmodel::synth;

fn err(e: lm::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_edges(edges: Vec<(String, usize, usize)>) -> PyResult<Vec<lm::DependencyEdge>> {
    edges
        .into_iter()
        .map(|(kind, i, j)| {
            let kind = lm::DependencyKind::parse(&kind).map_err(err)?;
            lm::DependencyEdge::new(kind, i, j).map_err(err)
        })
        .collect()
}

fn train_config(
    step_size: f64,
    epochs: usize,
    batch_size: Option<usize>,
    seed: u64,
    target_eps: Option<f64>,
) -> independent::TrainConfig {
    independent::TrainConfig {
        step_size,
        epochs,
        batch_size: batch_size.unwrap_or(usize::MAX),
        seed,
        target_eps,
    }
}

/// Sparse matrix of labeling-function votes over {-1, 0, +1}.
#[pyclass(name = "LabelMatrix")]
#[derive(Clone)]
struct PyLabelMatrix {
    inner: lm::LabelMatrix,
}

#[pymethods]
impl PyLabelMatrix {
    /// Build from (row, col, label) triplets; labels must be -1 or +1.
    #[new]
    fn new(n: usize, m: usize, entries: Vec<(usize, usize, i8)>) -> PyResult<Self> {
        Ok(PyLabelMatrix {
            inner: lm::LabelMatrix::from_entries(n, m, &entries).map_err(err)?,
        })
    }

    /// Build from dense rows over {-1, 0, +1}; zeros are abstains.
    #[staticmethod]
    fn from_rows(m: usize, rows: Vec<Vec<i8>>) -> PyResult<Self> {
        Ok(PyLabelMatrix {
            inner: lm::LabelMatrix::from_dense_rows(m, &rows).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyLabelMatrix {
            inner: io::load_label_matrix(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::store_label_matrix(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    /// Row as a dense {-1, 0, +1} list.
    fn row(&self, r: usize) -> PyResult<Vec<i8>> {
        if r >= self.inner.n() {
            return Err(PyValueError::new_err(format!("row {r} out of range")));
        }
        Ok(self.inner.row_dense(r))
    }

    /// Coverage / overlap / conflict statistics.
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = lm::compute_lf_stats(&self.inner);
        let d = PyDict::new(py);
        d.set_item("coverage", s.coverage)?;
        d.set_item("overlap", s.overlap)?;
        d.set_item("conflict", s.conflict)?;
        d.set_item("per_lf_coverage", s.per_lf_coverage)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "LabelMatrix(n={}, m={}, nnz={})",
            self.inner.n(),
            self.inner.m(),
            self.inner.nnz()
        )
    }
}

/// Per-function accuracy/coverage parameters of the independent model.
#[pyclass(name = "IndependentParams")]
#[derive(Clone)]
struct PyIndependentParams {
    inner: independent::IndependentParams,
}

#[pymethods]
impl PyIndependentParams {
    #[new]
    fn new(alpha: Vec<f64>, beta: Vec<f64>) -> PyResult<Self> {
        Ok(PyIndependentParams {
            inner: independent::IndependentParams::new(alpha, beta).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyIndependentParams {
            inner: io::load_independent_params(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::store_independent_params(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn alpha(&self) -> Vec<f64> {
        self.inner.alpha().to_vec()
    }

    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.inner.beta().to_vec()
    }

    /// P(Y = +1 | lam) for one dense vote vector.
    fn posterior(&self, lam: Vec<i8>) -> PyResult<f64> {
        self.inner.posterior(&lam).map_err(err)
    }

    /// Posterior soft labels for every row of a matrix.
    fn soft_labels(&self, labels: &PyLabelMatrix) -> PyResult<Vec<f64>> {
        let nat = self.inner.to_natural().map_err(err)?;
        (0..labels.inner.n())
            .map(|r| nat.posterior(&labels.inner.row_dense(r)).map_err(err))
            .collect()
    }

    fn joint_prob(&self, lam: Vec<i8>, y: i8) -> PyResult<f64> {
        self.inner.joint_prob(&lam, y).map_err(err)
    }

    fn marginal_log_likelihood(&self, labels: &PyLabelMatrix) -> PyResult<f64> {
        self.inner.marginal_log_likelihood(&labels.inner).map_err(err)
    }

    /// Sample (labels, truth) from the model; deterministic per seed.
    fn sample(&self, n: usize, seed: u64) -> (PyLabelMatrix, Vec<i8>) {
        let (labels, truth) = self.inner.sample(n, seed);
        (PyLabelMatrix { inner: labels }, truth)
    }

    fn __repr__(&self) -> String {
        format!("IndependentParams(m={})", self.inner.m())
    }
}

/// Fit the independent model by projected SGD on the marginal likelihood.
/// Returns the parameters and the per-epoch objective trace.
#[pyfunction]
#[pyo3(signature = (labels, alpha_min, alpha_max, beta_min, beta_max,
                    step_size = 0.5, epochs = 300, batch_size = None,
                    seed = 0, target_eps = None))]
#[allow(clippy::too_many_arguments)]
fn fit_independent(
    labels: &PyLabelMatrix,
    alpha_min: f64,
    alpha_max: f64,
    beta_min: f64,
    beta_max: f64,
    step_size: f64,
    epochs: usize,
    batch_size: Option<usize>,
    seed: u64,
    target_eps: Option<f64>,
) -> PyResult<(PyIndependentParams, Vec<f64>)> {
    let bounds =
        independent::FeasibleBox::new(alpha_min, alpha_max, beta_min, beta_max).map_err(err)?;
    let cfg = train_config(step_size, epochs, batch_size, seed, target_eps);
    let fit = independent::fit_sgd(&labels.inner, &bounds, &cfg).map_err(err)?;
    Ok((
        PyIndependentParams { inner: fit.params },
        fit.objective_trace,
    ))
}

/// Dependency-aware factor-graph label model (factor list plus weights).
#[pyclass(name = "FactorModel")]
#[derive(Clone)]
struct PyFactorModel {
    spec: factor::FactorSpec,
    theta: factor::Theta,
}

#[pymethods]
impl PyFactorModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (theta, spec) = io::load_theta(&path).map_err(err)?;
        Ok(PyFactorModel { spec, theta })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::store_theta(&self.theta, &self.spec, &path).map_err(err)
    }

    #[getter]
    fn m(&self) -> usize {
        self.spec.m()
    }

    /// Total factor count M.
    #[getter]
    fn num_factors(&self) -> usize {
        self.spec.len()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.theta.weights().to_vec()
    }

    fn descriptors(&self) -> Vec<String> {
        self.spec.kinds().iter().map(|k| k.descriptor()).collect()
    }

    /// Exact P(Y = +1 | lam) from the two-state normalization.
    fn posterior(&self, lam: Vec<i8>) -> PyResult<f64> {
        self.spec.posterior_y(&self.theta, &lam).map_err(err)
    }

    fn soft_labels(&self, labels: &PyLabelMatrix) -> PyResult<Vec<f64>> {
        (0..labels.inner.n())
            .map(|r| {
                self.spec
                    .posterior_y(&self.theta, &labels.inner.row_dense(r))
                    .map_err(err)
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "FactorModel(m={}, num_factors={})",
            self.spec.m(),
            self.spec.len()
        )
    }
}

/// Fit the factor-graph model with contrastive Gibbs SGD. Edges are
/// (kind, i, j) with kind in {"similar", "fixes", "reinforces", "excludes"}.
/// With `nonneg_agree` the agreement weights are bounded below by zero,
/// which pins the posterior to the mode where functions beat chance.
#[pyfunction]
#[pyo3(signature = (labels, edges, theta_bound = 3.0, nonneg_agree = false,
                    similar_nonzero_only = false, step_size = 0.05,
                    epochs = 100, batch_size = 25, burn_in = 200, thin = 2,
                    chains = 1, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn fit_factor_graph(
    labels: &PyLabelMatrix,
    edges: Vec<(String, usize, usize)>,
    theta_bound: f64,
    nonneg_agree: bool,
    similar_nonzero_only: bool,
    step_size: f64,
    epochs: usize,
    batch_size: usize,
    burn_in: usize,
    thin: usize,
    chains: usize,
    seed: u64,
) -> PyResult<(PyFactorModel, Vec<f64>)> {
    let edges = parse_edges(edges)?;
    let spec =
        factor::FactorSpec::build(labels.inner.m(), &edges, similar_nonzero_only).map_err(err)?;
    let bounds = if nonneg_agree {
        factor::ThetaBounds::nonnegative_agreement(&spec, theta_bound).map_err(err)?
    } else {
        factor::ThetaBounds::uniform(-theta_bound, theta_bound, spec.len()).map_err(err)?
    };
    let cfg = train_config(step_size, epochs, Some(batch_size), seed, None);
    let gibbs = factor::GibbsConfig {
        burn_in,
        thin,
        chains,
        seed,
    };
    let fit = factor::fit_sgd_gibbs(&labels.inner, &spec, &bounds, &cfg, &gibbs).map_err(err)?;
    Ok((
        PyFactorModel {
            spec,
            theta: fit.theta,
        },
        fit.objective_trace,
    ))
}

/// Noise-aware linear model over features.
#[pyclass(name = "LinearModel")]
#[derive(Clone)]
struct PyLinearModel {
    inner: noise_aware::LinearModel,
}

#[pymethods]
impl PyLinearModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyLinearModel {
            inner: io::load_linear_model(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::store_linear_model(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho()
    }

    /// sigma(w . f(x)) for one feature row.
    fn predict_one(&self, features: Vec<f64>) -> PyResult<f64> {
        self.inner.predict(&features).map_err(err)
    }

    fn predict(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        features
            .iter()
            .map(|row| self.inner.predict(row).map_err(err))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "LinearModel(d={}, rho={})",
            self.inner.d(),
            self.inner.rho()
        )
    }
}

/// Train the noise-aware logistic model on soft labels.
#[pyfunction]
#[pyo3(signature = (features, soft_labels, rho, step_size = 1.0, epochs = 500,
                    batch_size = None, seed = 0))]
fn fit_noise_aware(
    features: Vec<Vec<f64>>,
    soft_labels: Vec<f64>,
    rho: f64,
    step_size: f64,
    epochs: usize,
    batch_size: Option<usize>,
    seed: u64,
) -> PyResult<PyLinearModel> {
    let d = features.first().map(Vec::len).unwrap_or(0);
    let matrix = lm::FeatureMatrix::from_rows(d, &features).map_err(err)?;
    let soft = noise_aware::SoftLabels::new(soft_labels).map_err(err)?;
    let cfg = train_config(step_size, epochs, batch_size, seed, None);
    Ok(PyLinearModel {
        inner: noise_aware::fit(&matrix, &soft, rho, &cfg).map_err(err)?,
    })
}

/// Mean noise-aware loss of `model` on the given data.
#[pyfunction]
fn noise_aware_loss(
    model: &PyLinearModel,
    features: Vec<Vec<f64>>,
    soft_labels: Vec<f64>,
) -> PyResult<f64> {
    let d = features.first().map(Vec::len).unwrap_or(0);
    let matrix = lm::FeatureMatrix::from_rows(d, &features).map_err(err)?;
    let soft = noise_aware::SoftLabels::new(soft_labels).map_err(err)?;
    noise_aware::noise_aware_loss(&model.inner, &matrix, &soft).map_err(err)
}

/// Soft majority vote of one dense vote vector.
#[pyfunction]
fn majority_vote(lam: Vec<i8>) -> f64 {
    lm::baselines::majority_vote(&lam)
}

/// First nonzero vote along `order` (0 when all abstain).
#[pyfunction]
fn itr_label(order: Vec<usize>, lam: Vec<i8>) -> PyResult<i8> {
    lm::baselines::itr_label(&order, &lam).map_err(err)
}

/// ITR ordering by descending true accuracy.
#[pyfunction]
fn oracle_itr_order(params: &PyIndependentParams) -> Vec<usize> {
    lm::baselines::oracle_itr_order(&params.inner)
}

/// Generate a synthetic dataset from a planted label model. Returns
/// (labels, features, truth, params, edges).
#[pyfunction]
#[pyo3(signature = (m_independent, n, beta_const = 0.1, mu_alpha = 0.75,
                    alpha_halfwidth = 0.25, d_features = 1000,
                    feature_strength = 0.5, n_fixing = 0, n_reinforcing = 0,
                    dep_accuracy = 0.9, dep_activation_rate = 0.8, seed = 0))]
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn generate_synthetic(
    m_independent: usize,
    n: usize,
    beta_const: f64,
    mu_alpha: f64,
    alpha_halfwidth: f64,
    d_features: usize,
    feature_strength: f64,
    n_fixing: usize,
    n_reinforcing: usize,
    dep_accuracy: f64,
    dep_activation_rate: f64,
    seed: u64,
) -> PyResult<(
    PyLabelMatrix,
    Vec<Vec<f64>>,
    Vec<i8>,
    PyIndependentParams,
    Vec<(String, usize, usize)>,
)> {
    let cfg = synth::SynthConfig {
        m_independent,
        n,
        beta_const,
        mu_alpha,
        alpha_halfwidth,
        d_features,
        feature_strength,
        n_fixing,
        n_reinforcing,
        dep_accuracy,
        dep_activation_rate,
        seed,
    };
    let params = synth::gen_lf_params(&cfg).map_err(err)?;
    let (labels, features, truth) = synth::gen_dataset(&cfg, &params).map_err(err)?;
    let (labels, edges) = synth::augment_with_dependent_lfs(&cfg, &labels, &truth).map_err(err)?;
    let feature_rows = (0..features.n()).map(|r| features.row(r).to_vec()).collect();
    let edge_tuples = edges
        .iter()
        .map(|e| (e.kind.as_str().to_string(), e.i, e.j))
        .collect();
    Ok((
        PyLabelMatrix { inner: labels },
        feature_rows,
        truth,
        PyIndependentParams { inner: params },
        edge_tuples,
    ))
}

#[pymodule]
fn labelmodel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLabelMatrix>()?;
    m.add_class::<PyIndependentParams>()?;
    m.add_class::<PyFactorModel>()?;
    m.add_class::<PyLinearModel>()?;
    m.add_function(wrap_pyfunction!(fit_independent, m)?)?;
    m.add_function(wrap_pyfunction!(fit_factor_graph, m)?)?;
    m.add_function(wrap_pyfunction!(fit_noise_aware, m)?)?;
    m.add_function(wrap_pyfunction!(noise_aware_loss, m)?)?;
    m.add_function(wrap_pyfunction!(majority_vote, m)?)?;
    m.add_function(wrap_pyfunction!(itr_label, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_itr_order, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    Ok(())
}
