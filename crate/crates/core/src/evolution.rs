//! Evaluation of `T_t`, `Tⁿ`, and Cesàro means `C_t`.
//!
//! Rate-matrix semigroups are evaluated by uniformization, which preserves
//! positivity and stochasticity up to the series truncation; this is what the
//! lattice operations downstream rely on, and why a Padé-type scaling method
//! is not used here. Cesàro means for rate matrices use the augmented block
//! exponential, whose upper-right block is `∫₀ᵗ e^{sQ} ds` exactly. Transport
//! models have exact closed forms on their time grid; discrete-time models use
//! integer matrix powers.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::models::{CtmcModel, DtmcModel, Model, PdmpModel};
use crate::operator::{KernelOperator, SingularPart, StructuredOperator};
use crate::space::StateSpace;

pub const DEFAULT_TRUNCATION: f64 = 1e-14;

/// `e^{tQ}` by uniformization: with `q = 1.1·max_j |q_{jj}|` and
/// `P = I + Q/q`, sum `e^{−qt} (qt)^k/k! P^k` until the remaining Poisson
/// mass drops below `eps`. Large `qt` is handled by time splitting and
/// repeated squaring, which keeps every factor stochastic.
pub fn expm_uniformized(q_matrix: &DMatrix<f64>, t: f64, eps: f64) -> DMatrix<f64> {
    let n = q_matrix.nrows();
    let q_rate = 1.1 * (0..n).map(|j| q_matrix[(j, j)].abs()).fold(0.0, f64::max);
    let x = q_rate * t;
    if x == 0.0 {
        return DMatrix::identity(n, n);
    }
    if x > 30.0 {
        let halvings = ((x / 30.0).log2().ceil() as u32).max(1);
        let mut m = expm_uniformized(q_matrix, t / 2f64.powi(halvings as i32), eps);
        for _ in 0..halvings {
            m = &m * &m;
        }
        return m;
    }
    let p = DMatrix::identity(n, n) + q_matrix / q_rate;
    let mut coeff = (-x).exp();
    let mut cum = coeff;
    let mut acc = DMatrix::identity(n, n) * coeff;
    let mut pow = DMatrix::identity(n, n);
    let mut k = 0u32;
    while 1.0 - cum > eps && k < 10_000 {
        k += 1;
        coeff *= x / k as f64;
        pow = &pow * &p;
        acc += &pow * coeff;
        cum += coeff;
    }
    acc
}

/// Dense matrix exponential by scaling-and-squaring with a Taylor series.
/// Used for the augmented Cesàro block, which is not a generator.
pub fn expm_dense(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.iter().map(|x| x.abs()).fold(0.0, f64::max) * n as f64;
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let b = a / 2f64.powi(s);
    let mut acc = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=64u32 {
        term = (&term * &b) / k as f64;
        acc += &term;
        let tn = term.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if tn < 1e-18 {
            break;
        }
    }
    let mut m = acc;
    for _ in 0..s {
        m = &m * &m;
    }
    m
}

fn pdmp_grid_steps(model: &PdmpModel, t: f64) -> Result<usize> {
    let ratio = t / model.delta();
    let k = ratio.round();
    if (ratio - k).abs() > 1e-9 * ratio.abs().max(1.0) || k < 0.0 {
        return Err(Error::OffGridTime {
            t,
            delta: model.delta(),
        });
    }
    Ok(k as usize)
}

fn dtmc_steps(t: f64) -> Result<u64> {
    let k = t.round();
    if (t - k).abs() > 1e-9 * t.abs().max(1.0) || k < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "discrete-time semigroup is defined at integer times, found {t}"
        )));
    }
    Ok(k as u64)
}

fn shift_map(n: usize, steps: usize) -> Vec<usize> {
    (0..n).map(|j| (j + steps) % n).collect()
}

fn ctmc_semigroup(model: &CtmcModel, t: f64, eps: f64) -> Result<StructuredOperator> {
    let m = expm_uniformized(model.rates(), t, eps);
    Ok(StructuredOperator::from_kernel(KernelOperator::new(
        model.space().clone(),
        m,
    )?))
}

fn dtmc_power(model: &DtmcModel, steps: u64) -> KernelOperator {
    let n = model.space().n();
    let mut result = DMatrix::identity(n, n);
    let mut base = model.step().matrix().clone();
    let mut k = steps;
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        k >>= 1;
    }
    KernelOperator::new(model.space().clone(), result).expect("dimensions preserved")
}

fn pdmp_semigroup(model: &PdmpModel, t: f64) -> Result<StructuredOperator> {
    let steps = pdmp_grid_steps(model, t)?;
    let n = model.n();
    let lambda = model.jump_rate();
    let weight = (-lambda * t).exp();
    let singular = SingularPart::new(model.space(), weight, shift_map(n, steps))?;
    let kernel = if lambda > 0.0 {
        KernelOperator::rank_one(model.jump_target()).scale(1.0 - weight)
    } else {
        KernelOperator::zero(model.space().clone())
    };
    StructuredOperator::new(model.space().clone(), Some(singular), kernel)
}

/// The semigroup operator at time `t`.
pub fn semigroup_at(model: &Model, t: f64) -> Result<StructuredOperator> {
    semigroup_at_with(model, t, DEFAULT_TRUNCATION)
}

pub fn semigroup_at_with(model: &Model, t: f64, eps_trunc: f64) -> Result<StructuredOperator> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "semigroup time must be nonnegative, found {t}"
        )));
    }
    match model {
        Model::Ctmc(m) => ctmc_semigroup(m, t, eps_trunc),
        Model::Dtmc(m) => Ok(StructuredOperator::from_kernel(dtmc_power(
            m,
            dtmc_steps(t)?,
        ))),
        Model::Pdmp(m) => pdmp_semigroup(m, t),
    }
}

fn ctmc_cesaro(model: &CtmcModel, t: f64) -> Result<StructuredOperator> {
    let n = model.space().n();
    // exp of [[Q, I], [0, 0]]·t has upper-right block ∫₀ᵗ e^{sQ} ds
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            block[(i, j)] = model.rates()[(i, j)] * t;
        }
        block[(i, n + i)] = t;
    }
    let e = expm_dense(&block);
    let integral = e.view((0, n), (n, n)).into_owned();
    Ok(StructuredOperator::from_kernel(KernelOperator::new(
        model.space().clone(),
        integral / t,
    )?))
}

fn pdmp_cesaro(model: &PdmpModel, t: f64) -> Result<StructuredOperator> {
    let steps = pdmp_grid_steps(model, t)?;
    if steps == 0 {
        return Err(Error::InvalidArgument(
            "Cesàro mean needs a positive grid time".into(),
        ));
    }
    let n = model.n();
    let delta = model.delta();
    let lambda = model.jump_rate();
    let mut m = DMatrix::zeros(n, n);
    let mut singular_total = 0.0;
    for k in 0..steps {
        // ∫ over [kΔ, (k+1)Δ) of the surviving transport weight e^{−λs}
        let w = if lambda > 0.0 {
            ((-lambda * k as f64 * delta).exp() - (-lambda * (k + 1) as f64 * delta).exp())
                / lambda
        } else {
            delta
        };
        singular_total += w;
        for (j, &i) in shift_map(n, k).iter().enumerate() {
            m[(i, j)] += w;
        }
    }
    if lambda > 0.0 {
        let jump_weight = t - singular_total;
        let p = KernelOperator::rank_one(model.jump_target());
        m += p.matrix() * jump_weight;
    }
    Ok(StructuredOperator::from_kernel(KernelOperator::new(
        model.space().clone(),
        m / t,
    )?))
}

fn dtmc_cesaro(model: &DtmcModel, t: f64) -> Result<StructuredOperator> {
    let steps = dtmc_steps(t)?;
    if steps == 0 {
        return Err(Error::InvalidArgument(
            "Cesàro mean needs a positive number of steps".into(),
        ));
    }
    let n = model.space().n();
    let mut acc = DMatrix::identity(n, n);
    let mut pow = DMatrix::identity(n, n);
    for _ in 1..steps {
        pow = pow * model.step().matrix();
        acc += &pow;
    }
    Ok(StructuredOperator::from_kernel(KernelOperator::new(
        model.space().clone(),
        acc / steps as f64,
    )?))
}

/// The Cesàro mean `C_t = (1/t) ∫₀ᵗ T_s ds` (discrete average for step models).
pub fn cesaro_mean(model: &Model, t: f64) -> Result<StructuredOperator> {
    if t <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "Cesàro mean needs t > 0, found {t}"
        )));
    }
    match model {
        Model::Ctmc(m) => ctmc_cesaro(m, t),
        Model::Dtmc(m) => dtmc_cesaro(m, t),
        Model::Pdmp(m) => pdmp_cesaro(m, t),
    }
}

/// Trapezoid-rule Cesàro mean over `substeps` intervals. Slower and less
/// accurate than [`cesaro_mean`]; kept as an independent integration route
/// for validating the block method.
pub fn cesaro_mean_quadrature(model: &Model, t: f64, substeps: usize) -> Result<StructuredOperator> {
    if t <= 0.0 || substeps == 0 {
        return Err(Error::InvalidArgument(
            "quadrature Cesàro mean needs t > 0 and at least one substep".into(),
        ));
    }
    let h = t / substeps as f64;
    let n = model.space().n();
    let mut acc = DMatrix::zeros(n, n);
    for k in 0..=substeps {
        let weight = if k == 0 || k == substeps { 0.5 } else { 1.0 };
        let op = semigroup_at(model, k as f64 * h)?;
        acc += op.total_matrix() * (weight * h);
    }
    Ok(StructuredOperator::from_kernel(KernelOperator::new(
        model.space().clone(),
        acc / t,
    )?))
}

/// Split `T = K + R` into kernel part and singular remainder. For models
/// without declared singular structure the whole operator is the kernel part.
pub fn split(op: &StructuredOperator) -> (KernelOperator, StructuredOperator) {
    let kernel = op.kernel().clone();
    let remainder = StructuredOperator::new(
        op.space().clone(),
        op.singular().cloned(),
        KernelOperator::zero(op.space().clone()),
    )
    .expect("same space");
    (kernel, remainder)
}

/// Caching wrapper around [`semigroup_at`]. Keys are exact time bit patterns;
/// no interpolation ever happens between cached times. Not internally
/// synchronized: batch drivers give each worker its own evaluator.
#[derive(Debug, Clone)]
pub struct SemigroupEvaluator {
    model: Model,
    eps_trunc: f64,
    cache: HashMap<u64, StructuredOperator>,
}

impl SemigroupEvaluator {
    pub fn new(model: Model) -> Self {
        Self::with_truncation(model, DEFAULT_TRUNCATION)
    }

    pub fn with_truncation(model: Model, eps_trunc: f64) -> Self {
        Self {
            model,
            eps_trunc,
            cache: HashMap::new(),
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn at(&mut self, t: f64) -> Result<StructuredOperator> {
        if let Some(op) = self.cache.get(&t.to_bits()) {
            return Ok(op.clone());
        }
        let op = semigroup_at_with(&self.model, t, self.eps_trunc)?;
        debug_assert!(op.is_stochastic(10.0 * self.eps_trunc.max(1e-12)));
        self.cache.insert(t.to_bits(), op.clone());
        Ok(op)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CesaroMethod {
    ClosedForm,
    GridAverage { substeps: usize },
}

/// Caching wrapper around the Cesàro mean with a selectable method.
#[derive(Debug, Clone)]
pub struct CesaroEvaluator {
    model: Model,
    method: CesaroMethod,
    cache: HashMap<u64, StructuredOperator>,
}

impl CesaroEvaluator {
    pub fn new(model: Model) -> Self {
        Self {
            model,
            method: CesaroMethod::ClosedForm,
            cache: HashMap::new(),
        }
    }

    pub fn with_method(model: Model, method: CesaroMethod) -> Self {
        Self {
            model,
            method,
            cache: HashMap::new(),
        }
    }

    pub fn at(&mut self, t: f64) -> Result<StructuredOperator> {
        if let Some(op) = self.cache.get(&t.to_bits()) {
            return Ok(op.clone());
        }
        let op = match self.method {
            CesaroMethod::ClosedForm => cesaro_mean(&self.model, t)?,
            CesaroMethod::GridAverage { substeps } => {
                cesaro_mean_quadrature(&self.model, t, substeps)?
            }
        };
        self.cache.insert(t.to_bits(), op.clone());
        Ok(op)
    }
}
