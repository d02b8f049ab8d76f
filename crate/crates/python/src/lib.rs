//! Python bindings for groups, measures, walk bounds, Smith normal form,
//! abelian counting and the experiment harness.

use std::fmt::Display;

use cokerwalk::abelian::{self, AbelianGroup};
use cokerwalk::group::{
    abelian_group_from_factors, alternating_group, cyclic_group, dihedral_group, generated_subgroup, is_normal,
    quaternion_group, subgroup_lattice, symmetric_group, GroupRef, Subgroup,
};
use cokerwalk::harness::{self, ExperimentConfig, Overrides, BUILTINS};
use cokerwalk::intlinalg::{self, IntMatrix};
use cokerwalk::lab::{self, experiment_key, stream_rng, AbelianHom, BalancedMatrixModel, BlockSampler, Partition};
use cokerwalk::measure::{self, SignedMeasure};
use cokerwalk::spectral;
use cokerwalk::walk::{self, QuotientChain, WalkInstance};
use num_bigint::{BigInt, BigUint};
use pyo3::exceptions::{PyIOError, PyOverflowError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn core_err(e: cokerwalk::Error) -> PyErr {
    match e {
        cokerwalk::Error::CapExceeded { .. } => PyOverflowError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn harness_err(e: harness::HarnessError) -> PyErr {
    match e {
        harness::HarnessError::ConfigInvalid(_) => value_err(e),
        harness::HarnessError::CapExceeded(_) => PyOverflowError::new_err(e.to_string()),
        harness::HarnessError::Io(_) => PyIOError::new_err(e.to_string()),
    }
}

/// Finite group given by its Cayley table; elements are integers, 0 is the identity.
#[pyclass(frozen, name = "Group", module = "cokerwalk")]
struct PyGroup {
    inner: GroupRef,
}

impl PyGroup {
    fn subgroup(&self, elements: Vec<usize>) -> PyResult<Subgroup> {
        Subgroup::new(&self.inner, elements).map_err(core_err)
    }
}

#[pymethods]
impl PyGroup {
    /// Parses "Z/2 x Z/6", "D8", "Q8", "S4", "A5" or "trivial".
    #[staticmethod]
    fn parse(spec: &str) -> PyResult<Self> {
        Ok(PyGroup {
            inner: harness::parse_group(spec).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn cyclic(n: usize) -> PyResult<Self> {
        if n == 0 {
            return Err(value_err("cyclic group order must be positive"));
        }
        Ok(PyGroup { inner: cyclic_group(n) })
    }

    /// Dihedral group of order 2n.
    #[staticmethod]
    fn dihedral(n: usize) -> PyResult<Self> {
        if n < 1 {
            return Err(value_err("dihedral group needs n >= 1"));
        }
        Ok(PyGroup {
            inner: dihedral_group(n),
        })
    }

    #[staticmethod]
    fn symmetric(degree: usize) -> PyResult<Self> {
        if !(1..=7).contains(&degree) {
            return Err(value_err("symmetric group degree must be in 1..=7"));
        }
        Ok(PyGroup {
            inner: symmetric_group(degree).group().clone(),
        })
    }

    #[staticmethod]
    fn alternating(degree: usize) -> PyResult<Self> {
        if !(1..=7).contains(&degree) {
            return Err(value_err("alternating group degree must be in 1..=7"));
        }
        Ok(PyGroup {
            inner: alternating_group(degree).group().clone(),
        })
    }

    #[staticmethod]
    fn quaternion() -> Self {
        PyGroup {
            inner: quaternion_group(),
        }
    }

    /// Z/d₁ × … × Z/d_k in mixed-radix element order.
    #[staticmethod]
    fn abelian(factors: Vec<u64>) -> PyResult<Self> {
        if factors.contains(&0) {
            return Err(value_err("cyclic factors must be positive"));
        }
        Ok(PyGroup {
            inner: abelian_group_from_factors(&factors),
        })
    }

    #[staticmethod]
    fn from_table(table: Vec<Vec<usize>>) -> PyResult<Self> {
        Ok(PyGroup {
            inner: cokerwalk::FiniteGroup::from_cayley_table(table, None).map_err(core_err)?,
        })
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    fn __len__(&self) -> usize {
        self.inner.order()
    }

    fn __repr__(&self) -> String {
        format!("Group(order={})", self.inner.order())
    }

    fn mul(&self, g: usize, h: usize) -> PyResult<usize> {
        self.inner.check_element(g).map_err(core_err)?;
        self.inner.check_element(h).map_err(core_err)?;
        Ok(self.inner.mul(g, h))
    }

    fn inv(&self, g: usize) -> PyResult<usize> {
        self.inner.check_element(g).map_err(core_err)?;
        Ok(self.inner.inv(g))
    }

    fn element_order(&self, g: usize) -> PyResult<usize> {
        self.inner.check_element(g).map_err(core_err)?;
        Ok(self.inner.element_order(g))
    }

    fn is_abelian(&self) -> bool {
        self.inner.is_abelian()
    }

    /// Sorted elements of the subgroup generated by `gens`.
    fn generated(&self, gens: Vec<usize>) -> PyResult<Vec<usize>> {
        Ok(generated_subgroup(&self.inner, &gens)
            .map_err(core_err)?
            .elements()
            .to_vec())
    }

    /// Every subgroup as a sorted element list.
    fn subgroups(&self) -> PyResult<Vec<Vec<usize>>> {
        let lat = subgroup_lattice(&self.inner).map_err(core_err)?;
        Ok(lat.subgroups().iter().map(|h| h.elements().to_vec()).collect())
    }

    fn is_normal(&self, elements: Vec<usize>) -> PyResult<bool> {
        Ok(is_normal(&self.inner, &self.subgroup(elements)?))
    }
}

/// Real-valued measure on a finite group.
#[pyclass(frozen, name = "Measure", module = "cokerwalk")]
struct PyMeasure {
    inner: SignedMeasure,
}

#[pymethods]
impl PyMeasure {
    #[new]
    fn new(group: &PyGroup, weights: Vec<f64>) -> PyResult<Self> {
        Ok(PyMeasure {
            inner: SignedMeasure::new(&group.inner, weights).map_err(core_err)?,
        })
    }

    /// Probability measure; rejects negative weights or total mass away from 1.
    #[staticmethod]
    fn probability(group: &PyGroup, weights: Vec<f64>) -> PyResult<Self> {
        Ok(PyMeasure {
            inner: SignedMeasure::probability(&group.inner, weights).map_err(core_err)?,
        })
    }

    #[staticmethod]
    fn from_pairs(group: &PyGroup, pairs: Vec<(usize, f64)>) -> PyResult<Self> {
        Ok(PyMeasure {
            inner: SignedMeasure::from_pairs(&group.inner, &pairs).map_err(core_err)?,
        })
    }

    #[staticmethod]
    fn uniform(group: &PyGroup) -> Self {
        PyMeasure {
            inner: SignedMeasure::uniform(&group.inner),
        }
    }

    /// Uniform probability on the subgroup with the given elements.
    #[staticmethod]
    fn uniform_on(group: &PyGroup, elements: Vec<usize>) -> PyResult<Self> {
        Ok(PyMeasure {
            inner: SignedMeasure::uniform_on(&group.subgroup(elements)?),
        })
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.inner.mass()
    }

    fn support(&self) -> Vec<usize> {
        self.inner.support()
    }

    fn __repr__(&self) -> String {
        format!(
            "Measure(order={}, mass={})",
            self.inner.group().order(),
            self.inner.mass()
        )
    }

    /// self ∗ other, the law of x·y for x ~ self and y ~ other.
    fn convolve(&self, other: &PyMeasure) -> PyResult<PyMeasure> {
        Ok(PyMeasure {
            inner: measure::convolve(&self.inner, &other.inner).map_err(core_err)?,
        })
    }

    fn l2_distance(&self, other: &PyMeasure) -> PyResult<f64> {
        measure::l2_distance(&self.inner, &other.inner).map_err(core_err)
    }

    fn l2_distance_to_uniform(&self) -> PyResult<f64> {
        measure::l2_distance(&self.inner, &SignedMeasure::uniform(self.inner.group())).map_err(core_err)
    }

    /// Distance to the measures that are uniform on every left coset of the subgroup.
    fn distance_to_coset_uniform(&self, elements: Vec<usize>) -> PyResult<f64> {
        let h = Subgroup::new(self.inner.group(), elements).map_err(core_err)?;
        Ok(measure::project_coset_uniform(&self.inner, &h)
            .map_err(core_err)?
            .residual_norm)
    }

    /// (σ₂, elements of the subgroup generated by the support).
    fn second_singular_value(&self) -> PyResult<(f64, Vec<usize>)> {
        let rep = spectral::second_singular_value(&self.inner).map_err(core_err)?;
        Ok((rep.second_largest, rep.subgroup_used.elements().to_vec()))
    }

    fn singular_values(&self) -> PyResult<Vec<f64>> {
        spectral::singular_values(&spectral::convolution_matrix(&self.inner)).map_err(core_err)
    }

    /// Largest ε such that every coset of every proper subgroup has mass at most 1 − ε.
    fn epsilon_balanced(&self) -> PyResult<f64> {
        spectral::epsilon_balanced(&self.inner).map_err(core_err)
    }
}

/// Independent steps μ₁, …, μ_k on one group.
#[pyclass(frozen, name = "Walk", module = "cokerwalk")]
struct PyWalk {
    inner: WalkInstance,
}

#[pymethods]
impl PyWalk {
    #[new]
    fn new(group: &PyGroup, steps: Vec<PyRef<'_, PyMeasure>>) -> PyResult<Self> {
        let steps = steps.iter().map(|m| m.inner.clone()).collect();
        Ok(PyWalk {
            inner: WalkInstance::new(&group.inner, steps).map_err(core_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.steps().len()
    }

    fn distribution(&self) -> PyResult<PyMeasure> {
        Ok(PyMeasure {
            inner: self.inner.distribution().map_err(core_err)?,
        })
    }

    /// Exact squared L² distance from the walk's law to uniform.
    fn squared_distance(&self) -> PyResult<f64> {
        walk::exact_walk_distance(&self.inner).map_err(core_err)
    }

    /// Bound on the squared distance for an ascending tower of normal subgroups ending at the
    /// whole group; the greedy tower is used when none is given.
    #[pyo3(signature = (tower=None))]
    fn bound<'py>(&self, py: Python<'py>, tower: Option<Vec<Vec<usize>>>) -> PyResult<Bound<'py, PyDict>> {
        let g = self.inner.group();
        let chain = match tower {
            Some(t) => {
                let subs = t
                    .into_iter()
                    .map(|el| Subgroup::new(g, el))
                    .collect::<cokerwalk::Result<Vec<_>>>()
                    .map_err(core_err)?;
                QuotientChain::from_normal_tower(g, &subs)
            }
            None => walk::greedy_chain(g),
        }
        .map_err(core_err)?;
        let rep = walk::strong_walk_bound(&self.inner, &chain).map_err(core_err)?;
        let d = PyDict::new(py);
        d.set_item("lhs", rep.lhs)?;
        d.set_item("rhs", rep.rhs)?;
        d.set_item("feasible", rep.feasible)?;
        d.set_item("holds", rep.holds(1e-9))?;
        d.set_item("steps_per_level", rep.step_classification())?;
        d.set_item(
            "contributions",
            rep.levels.iter().map(|l| l.contribution).collect::<Vec<_>>(),
        )?;
        Ok(d)
    }
}

/// Finitely generated abelian group Z^r ⊕ Z/d₁ ⊕ … ⊕ Z/d_k in invariant-factor form.
#[pyclass(frozen, eq, name = "AbelianGroup", module = "cokerwalk")]
#[derive(PartialEq)]
struct PyAbelianGroup {
    inner: AbelianGroup,
}

#[pymethods]
impl PyAbelianGroup {
    #[new]
    #[pyo3(signature = (factors, free_rank=0))]
    fn new(factors: Vec<u64>, free_rank: usize) -> PyResult<Self> {
        if factors.contains(&0) {
            return Err(value_err("use free_rank for copies of Z"));
        }
        Ok(PyAbelianGroup {
            inner: AbelianGroup::from_factors(free_rank, &factors),
        })
    }

    #[staticmethod]
    fn parse(spec: &str) -> PyResult<Self> {
        Ok(PyAbelianGroup {
            inner: spec.parse().map_err(value_err)?,
        })
    }

    #[getter]
    fn free_rank(&self) -> usize {
        self.inner.free_rank()
    }

    #[getter]
    fn invariant_factors(&self) -> Vec<BigUint> {
        self.inner.invariant_factors().to_vec()
    }

    /// Order, or None for infinite groups.
    #[getter]
    fn order(&self) -> Option<BigUint> {
        self.inner.order()
    }

    fn tensor_mod(&self, a: u64) -> PyResult<Self> {
        if a == 0 {
            return Err(value_err("modulus must be positive"));
        }
        Ok(PyAbelianGroup {
            inner: abelian::tensor_mod(&self.inner, a),
        })
    }

    fn __str__(&self) -> String {
        self.inner.canonical_string()
    }

    fn __repr__(&self) -> String {
        format!("AbelianGroup({:?})", self.inner.canonical_string())
    }
}

fn int_matrix(rows: &[Vec<i64>]) -> PyResult<IntMatrix> {
    IntMatrix::from_rows(rows).map_err(core_err)
}

fn to_rows(m: &IntMatrix) -> BigRows {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

type BigRows = Vec<Vec<BigInt>>;

/// (L, diagonal, R) with L·A·R = D and L, R unimodular.
#[pyfunction]
fn smith_normal_form(rows: Vec<Vec<i64>>) -> PyResult<(BigRows, Vec<BigInt>, BigRows)> {
    let snf = intlinalg::smith_normal_form(&int_matrix(&rows)?);
    Ok((to_rows(&snf.left), snf.diag, to_rows(&snf.right)))
}

/// Z^m / A·Z^n for an m × n matrix A.
#[pyfunction]
fn cokernel(rows: Vec<Vec<i64>>) -> PyResult<PyAbelianGroup> {
    Ok(PyAbelianGroup {
        inner: intlinalg::cokernel(&int_matrix(&rows)?),
    })
}

/// cokernel(A) ⊗ Z/modulus.
#[pyfunction]
fn cokernel_mod(rows: Vec<Vec<i64>>, modulus: u64) -> PyResult<PyAbelianGroup> {
    Ok(PyAbelianGroup {
        inner: intlinalg::cokernel_mod(&int_matrix(&rows)?, modulus).map_err(core_err)?,
    })
}

#[pyfunction]
fn hom_count(a: &PyAbelianGroup, b: &PyAbelianGroup) -> PyResult<BigUint> {
    abelian::hom_count(&a.inner, &b.inner).map_err(core_err)
}

#[pyfunction]
fn sur_count(a: &PyAbelianGroup, b: &PyAbelianGroup) -> PyResult<BigUint> {
    abelian::sur_count(&a.inner, &b.inner).map_err(core_err)
}

/// Limiting probability, for u ≥ 1, that the cokernel of an n × (n+u) matrix is isomorphic to `b`.
#[pyfunction]
fn cokernel_mass(b: &PyAbelianGroup, u: u32) -> PyResult<f64> {
    abelian::lambda_u_finite_mass(&b.inner, u).map_err(core_err)
}

#[pyfunction]
fn sigma_bound_general(epsilon: f64, group_order: usize) -> f64 {
    spectral::sigma_bound_general(epsilon, group_order)
}

#[pyfunction]
fn sigma_bound_abelian(epsilon: f64, a: u64) -> f64 {
    spectral::sigma_bound_abelian(epsilon, a)
}

/// Random n × (n+u) integer matrices with independent blocks.
#[pyclass(frozen, name = "MatrixModel", module = "cokerwalk")]
struct PyMatrixModel {
    inner: BalancedMatrixModel,
}

#[pymethods]
impl PyMatrixModel {
    /// Independent entries drawn from `values` with probabilities `probs`.
    #[staticmethod]
    #[pyo3(signature = (n, values, probs, u=0))]
    fn iid(n: usize, values: Vec<i64>, probs: Vec<f64>, u: usize) -> PyResult<Self> {
        Ok(PyMatrixModel {
            inner: BalancedMatrixModel::iid(n, u, values, probs).map_err(core_err)?,
        })
    }

    /// h × w blocks sharing one sampler given as a JSON object, e.g.
    /// {"family": "shared-shift", "values": [0, 1], "probs": [0.7, 0.3], "shift_modulus": 2}.
    #[staticmethod]
    #[pyo3(signature = (n, h, w, sampler_json, u=0))]
    fn blocked(n: usize, h: usize, w: usize, sampler_json: &str, u: usize) -> PyResult<Self> {
        let sampler: BlockSampler = serde_json::from_str(sampler_json).map_err(value_err)?;
        sampler.validate().map_err(core_err)?;
        Ok(PyMatrixModel {
            inner: BalancedMatrixModel::blocked(n, u, h, w, sampler).map_err(core_err)?,
        })
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.n_rows(), self.inner.n_cols())
    }

    /// Deterministic draw number `index` of the stream keyed by `seed`.
    #[pyo3(signature = (seed, index=0))]
    fn sample(&self, seed: u64, index: u64) -> Vec<Vec<i64>> {
        let entries = self
            .inner
            .sample_entries(&mut stream_rng(seed, experiment_key("python-sample"), index));
        entries.chunks(self.inner.n_cols()).map(|r| r.to_vec()).collect()
    }

    /// Monte-Carlo estimate of E[#Sur(cok M, G)] with its standard error.
    fn moment<'py>(
        &self,
        py: Python<'py>,
        group: &PyAbelianGroup,
        samples: u64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let est = py
            .detach(|| {
                lab::moment_estimate(
                    &self.inner,
                    &group.inner,
                    samples,
                    seed,
                    experiment_key("python-moment"),
                )
            })
            .map_err(core_err)?;
        let d = PyDict::new(py);
        d.set_item("mean", est.mean)?;
        d.set_item("stderr", est.stderr)?;
        d.set_item("samples", est.samples_used)?;
        d.set_item("reference", est.reference)?;
        Ok(d)
    }
}

/// Depth of the map (Z/a)^n → G sending the i-th basis vector to images[i],
/// with contiguous blocks of `block_size` coordinates.
#[pyfunction]
#[pyo3(signature = (a, target_factors, images, delta, block_size=1))]
fn depth(a: u64, target_factors: Vec<u64>, images: Vec<Vec<u64>>, delta: f64, block_size: usize) -> PyResult<u64> {
    let f = AbelianHom::new(a, &target_factors, &images).map_err(core_err)?;
    let part = Partition::contiguous(images.len(), block_size).map_err(core_err)?;
    Ok(lab::depth(&f, &part, delta, 0).map_err(core_err)?.depth)
}

#[pyfunction]
fn a5_counterexample_probability() -> PyResult<f64> {
    walk::a5_counterexample_probability().map_err(core_err)
}

#[pyfunction]
fn builtin_experiments() -> Vec<(&'static str, &'static str)> {
    BUILTINS.iter().map(|b| (b.name, b.description)).collect()
}

/// Runs a config (path or builtin:NAME) in memory and returns its result rows.
#[pyfunction]
#[pyo3(signature = (config, seed=None, threads=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: &str,
    seed: Option<u64>,
    threads: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut cfg = ExperimentConfig::resolve(config).map_err(harness_err)?;
    cfg.apply(&Overrides {
        seed,
        threads,
        output_path: None,
    })
    .map_err(harness_err)?;
    let out = py.detach(|| harness::run(&cfg)).map_err(harness_err)?;
    out.rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("experiment_id", &r.experiment_id)?;
            d.set_item("statistic_name", &r.statistic_name)?;
            d.set_item("value", r.value)?;
            d.set_item("stderr", r.stderr)?;
            d.set_item("reference_value", r.reference_value)?;
            d.set_item("bound", r.bound)?;
            d.set_item("pass", r.pass)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
#[pyo3(name = "cokerwalk")]
fn cokerwalk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGroup>()?;
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyWalk>()?;
    m.add_class::<PyAbelianGroup>()?;
    m.add_class::<PyMatrixModel>()?;
    m.add_function(wrap_pyfunction!(smith_normal_form, m)?)?;
    m.add_function(wrap_pyfunction!(cokernel, m)?)?;
    m.add_function(wrap_pyfunction!(cokernel_mod, m)?)?;
    m.add_function(wrap_pyfunction!(hom_count, m)?)?;
    m.add_function(wrap_pyfunction!(sur_count, m)?)?;
    m.add_function(wrap_pyfunction!(cokernel_mass, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_bound_general, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_bound_abelian, m)?)?;
    m.add_function(wrap_pyfunction!(depth, m)?)?;
    m.add_function(wrap_pyfunction!(a5_counterexample_probability, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_experiments, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
