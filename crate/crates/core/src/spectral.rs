//! Resolvents, stationary densities, spectral reports, and the six-way
//! equivalence suite (uniform convergence, uniform mean ergodicity, simple
//! pole at zero, dual irreducibility, and the two dual-resolvent
//! quasi-interior conditions).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::evolution::{cesaro_mean, semigroup_at};
use crate::models::{self, Model};
use crate::operator::{KernelOperator, StructuredOperator};
use crate::space::{Density, DualVector};

/// Eigenvalue-level report for the generator (or its one-step surrogate).
#[derive(Debug, Clone)]
pub struct SpectralReport {
    /// Eigenvalues as (re, im) pairs, sorted by real part descending.
    pub eigenvalues: Vec<(f64, f64)>,
    /// `−max{Re ν : ν eigenvalue, ν ≉ 0}`; infinite when 0 is the only eigenvalue.
    pub spectral_gap: f64,
    /// (algebraic, geometric) multiplicity of the eigenvalue 0.
    pub zero_multiplicity: (usize, usize),
    /// Eigenvalues with `|Re ν| ≤ tol`.
    pub peripheral: Vec<(f64, f64)>,
    /// False when the model has no rate-matrix generator and the report was
    /// computed from a one-step surrogate that cannot witness the failure
    /// mode (pure transport without jumps).
    pub applicable: bool,
}

#[derive(Debug, Clone)]
pub struct ZeroPoleReport {
    pub is_simple_pole: bool,
    pub gap: f64,
    pub report: SpectralReport,
}

/// Stationary density together with its rank-one projection `P = 𝟙 ⊗ g`.
#[derive(Debug, Clone)]
pub struct StationaryDensity {
    g: Density,
}

impl StationaryDensity {
    pub fn density(&self) -> &Density {
        &self.g
    }

    pub fn projection(&self) -> KernelOperator {
        KernelOperator::rank_one(&self.g)
    }

    pub fn projection_op(&self) -> StructuredOperator {
        StructuredOperator::from_kernel(self.projection())
    }
}

/// Matrix whose kernel is the fixed space of the semigroup. For rate
/// matrices this is the generator itself; step models use `step − I` and
/// transport models the one-step difference quotient `(T_Δ − I)/Δ`.
/// The surrogate is exact for fixed spaces and positivity structure, but it
/// does not generate the transport semigroup.
pub fn generator_matrix(model: &Model) -> Result<DMatrix<f64>> {
    match model {
        Model::Ctmc(m) => Ok(m.rates().clone()),
        Model::Dtmc(m) => {
            let n = m.space().n();
            Ok(m.step().matrix() - DMatrix::identity(n, n))
        }
        Model::Pdmp(m) => {
            let delta = m.delta();
            let t = semigroup_at(model, delta)?;
            let n = m.space().n();
            Ok((t.total_matrix() - DMatrix::identity(n, n)) / delta)
        }
    }
}

/// `R(λ, A) = (λI − A)⁻¹` for `λ > 0`.
///
/// Rate and step models are solved directly. Transport models use the exact
/// Laplace transform of the grid semigroup: geometric sums over the shift
/// cycle plus the jump contribution, so that `‖λ R(λ)‖ = 1` holds exactly.
pub fn resolvent(model: &Model, lambda: f64) -> Result<KernelOperator> {
    if lambda <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "resolvent parameter must be positive, found {lambda}"
        )));
    }
    let n = model.space().n();
    match model {
        Model::Ctmc(m) => {
            let a = DMatrix::identity(n, n) * lambda - m.rates();
            let inv = a
                .lu()
                .try_inverse()
                .ok_or_else(|| Error::SolverFailure("resolvent system is singular".into()))?;
            KernelOperator::new(model.space().clone(), inv)
        }
        Model::Dtmc(m) => {
            let a = DMatrix::identity(n, n) * (lambda + 1.0) - m.step().matrix();
            let inv = a
                .lu()
                .try_inverse()
                .ok_or_else(|| Error::SolverFailure("resolvent system is singular".into()))?;
            KernelOperator::new(model.space().clone(), inv)
        }
        Model::Pdmp(m) => {
            let delta = m.delta();
            let a = lambda + m.jump_rate();
            let r = (-a * delta).exp();
            let cycle = 1.0 - r.powi(n as i32);
            let mut matrix = DMatrix::zeros(n, n);
            for k in 0..n {
                let coeff = (1.0 - r) / a * r.powi(k as i32) / cycle;
                for j in 0..n {
                    matrix[((j + k) % n, j)] += coeff;
                }
            }
            if m.jump_rate() > 0.0 {
                let jump_coeff = 1.0 / lambda - 1.0 / a;
                matrix += KernelOperator::rank_one(m.jump_target()).matrix() * jump_coeff;
            }
            KernelOperator::new(model.space().clone(), matrix)
        }
    }
}

fn null_space_dimension(matrix: &DMatrix<f64>, tol: f64) -> usize {
    let svd = matrix.clone().svd(false, false);
    let scale = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let threshold = tol * scale.max(1.0);
    svd.singular_values
        .iter()
        .filter(|&&s| s <= threshold)
        .count()
}

/// Solve for the unique stationary density of an irreducible model:
/// `Qg = 0`, `⟨𝟙, g⟩ = 1`, `g ≥ 0`.
pub fn stationary_density(model: &Model) -> Result<StationaryDensity> {
    if let Model::Pdmp(m) = model {
        // the shift-invariant jump target is fixed by both the transport and
        // the jump part, and it is the unique stationary density
        return Ok(StationaryDensity {
            g: m.jump_target().clone(),
        });
    }
    let q = generator_matrix(model)?;
    let dim = null_space_dimension(&q, 1e-9);
    if dim != 1 {
        return Err(Error::NotIrreducible {
            detail: format!("fixed space has dimension {dim}, expected 1"),
        });
    }
    let svd = q.clone().svd(false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::SolverFailure("SVD did not return right singular vectors".into()))?;
    let mut idx = 0;
    let mut min_sv = f64::INFINITY;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s < min_sv {
            min_sv = s;
            idx = i;
        }
    }
    let mut g: DVector<f64> = v_t.row(idx).transpose();
    let mass: f64 = g
        .iter()
        .zip(model.space().weights())
        .map(|(x, w)| x * w)
        .sum();
    if mass.abs() < 1e-14 {
        return Err(Error::SolverFailure(
            "stationary candidate has zero mass".into(),
        ));
    }
    g /= mass;
    for x in g.iter_mut() {
        if *x < 0.0 {
            if *x < -1e-9 {
                return Err(Error::SolverFailure(format!(
                    "stationary density has a negative entry {x}"
                )));
            }
            *x = 0.0;
        }
    }
    Ok(StationaryDensity {
        g: Density::new(model.space().clone(), g.iter().copied().collect())?,
    })
}

/// Eigenvalue diagnostics: is 0 an algebraically simple eigenvalue of the
/// generator, and how large is the gap to the rest of the spectrum?
///
/// In finite dimension 0 is a pole of the resolvent whenever it is an
/// eigenvalue, so the non-trivial content is simplicity plus the gap. For
/// pure transport models (no jumps) the surrogate generator cannot exhibit
/// the obstruction and the report is flagged not applicable.
pub fn zero_pole_check(model: &Model, tol: f64) -> Result<ZeroPoleReport> {
    let q = generator_matrix(model)?;
    let scale = q.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    let eigen = q.clone().complex_eigenvalues();
    let zero_tol = tol.max(1e-9) * scale;
    let mut eigenvalues: Vec<(f64, f64)> = eigen.iter().map(|z| (z.re, z.im)).collect();
    eigenvalues.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let algebraic = eigenvalues
        .iter()
        .filter(|(re, im)| re.hypot(*im) <= zero_tol)
        .count();
    let geometric = null_space_dimension(&q, 1e-9);
    let gap = eigenvalues
        .iter()
        .filter(|(re, im)| re.hypot(*im) > zero_tol)
        .map(|(re, _)| -re)
        .fold(f64::INFINITY, f64::min);
    let peripheral = eigenvalues
        .iter()
        .copied()
        .filter(|(re, _)| re.abs() <= zero_tol)
        .collect();
    let applicable = match model {
        Model::Pdmp(m) => m.jump_rate() > 0.0,
        _ => true,
    };
    Ok(ZeroPoleReport {
        is_simple_pole: algebraic == 1,
        gap,
        report: SpectralReport {
            eigenvalues,
            spectral_gap: gap,
            zero_multiplicity: (algebraic, geometric),
            peripheral,
            applicable,
        },
    })
}

#[derive(Debug, Clone)]
pub struct MeanErgodicReport {
    /// `(t, ‖C_t − P‖)` samples.
    pub distances: Vec<(f64, f64)>,
    /// Fitted constant in the `c/t` envelope: `max_t t·‖C_t − P‖`.
    pub fitted_c: f64,
    /// Whether the distances are non-increasing within `tol`.
    pub monotone_decay: bool,
    /// Whether the `c/t` envelope fitted on the first half of the grid also
    /// covers the second half (with 50% headroom); this is the uniform
    /// mean ergodicity verdict.
    pub envelope_ok: bool,
}

pub fn mean_ergodic_check(model: &Model, grid: &[f64], tol: f64) -> Result<MeanErgodicReport> {
    let stat = stationary_density(model)?;
    let p = stat.projection_op();
    let mut distances = Vec::with_capacity(grid.len());
    for &t in grid {
        let c = cesaro_mean(model, t)?;
        distances.push((t, c.distance(&p)));
    }
    let fitted_c = distances.iter().map(|(t, d)| t * d).fold(0.0, f64::max);
    let monotone_decay = distances.windows(2).all(|w| w[1].1 <= w[0].1 + tol);
    let half = distances.len() / 2;
    let c_first = distances[..half.max(1)]
        .iter()
        .map(|(t, d)| t * d)
        .fold(0.0, f64::max);
    let envelope_ok = distances[half..]
        .iter()
        .all(|(t, d)| *d <= (1.5 * c_first + tol) / t + tol);
    Ok(MeanErgodicReport {
        distances,
        fitted_c,
        monotone_decay,
        envelope_ok,
    })
}

/// Does the dual resolvent send `f` to a quasi-interior point, i.e.
/// `R(λ,A)′ f ≥ ε 𝟙`?
pub fn dual_resolvent_quasi_interior(
    model: &Model,
    f: &DualVector,
    lambda: f64,
    epsilon: f64,
) -> Result<bool> {
    if f.is_zero() {
        return Err(Error::InvalidArgument(
            "quasi-interior check needs a non-zero functional".into(),
        ));
    }
    if !f.is_nonnegative(0.0) {
        return Err(Error::InvalidArgument(
            "quasi-interior check needs a nonnegative functional".into(),
        ));
    }
    if epsilon <= 0.0 {
        return Err(Error::InvalidArgument(
            "quasi-interior threshold must be positive".into(),
        ));
    }
    let r = resolvent(model, lambda)?;
    Ok(r.dual_apply(f)?.min_value() >= epsilon)
}

/// Irreducibility of the dual semigroup (strong connectivity of the
/// transposed transition graph).
pub fn dual_irreducibility(model: &Model) -> bool {
    models::is_dual_irreducible(model)
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub t_max: f64,
    pub grid_step: f64,
    pub lambda_sweep: Vec<f64>,
    /// Smallness threshold for the time-domain convergence verdicts.
    pub tol: f64,
    /// Quasi-interior threshold for the dual-resolvent conditions.
    pub epsilon: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            t_max: 40.0,
            grid_step: 0.5,
            lambda_sweep: vec![0.5, 1.0, 2.0],
            tol: 1e-6,
            epsilon: 1e-10,
        }
    }
}

/// Per-condition outcome of the equivalence suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub irreducible: bool,
    pub has_kernel_part: bool,
    /// Both hypotheses of the equivalence: irreducibility and a nonzero
    /// dominated kernel part.
    pub hypothesis_met: bool,
    pub uniform_convergence: bool,
    pub mean_ergodic: bool,
    pub simple_pole: bool,
    pub dual_irreducible: bool,
    pub quasi_interior_some_lambda: bool,
    pub quasi_interior_all_lambda: bool,
    /// Final distance `‖T_t − P‖` observed at the end of the grid (NaN when
    /// no unique stationary density exists).
    pub final_distance: f64,
    pub spectral: ZeroPoleReport,
    /// True when either the hypotheses fail (nothing is asserted) or all six
    /// conditions agree.
    pub consistent: bool,
}

impl SuiteReport {
    pub fn conditions(&self) -> [bool; 6] {
        [
            self.uniform_convergence,
            self.mean_ergodic,
            self.simple_pole,
            self.dual_irreducible,
            self.quasi_interior_some_lambda,
            self.quasi_interior_all_lambda,
        ]
    }
}

/// Build an evaluation grid aligned with the model's admissible times.
pub fn model_grid(model: &Model, t_max: f64, step: f64) -> Vec<f64> {
    let step = match model {
        Model::Dtmc(_) => step.round().max(1.0),
        Model::Pdmp(m) => {
            let delta = m.delta();
            (step / delta).round().max(1.0) * delta
        }
        Model::Ctmc(_) => step,
    };
    let mut grid = Vec::new();
    let mut t = step;
    while t <= t_max * (1.0 + 1e-12) {
        grid.push(t);
        t += step;
    }
    grid
}

/// Evaluate all six equivalence conditions numerically and check that they
/// agree whenever the hypotheses hold.
pub fn corollary_suite(model: &Model, config: &SuiteConfig) -> Result<SuiteReport> {
    let irreducible = models::is_irreducible(model);
    let has_kernel_part = model.has_kernel_part();
    let hypothesis_met = irreducible && has_kernel_part;

    let spectral = zero_pole_check(model, 1e-7)?;
    let simple_pole = spectral.is_simple_pole && spectral.gap > config.tol;

    // stretch the horizon when the spectral gap is small so the time-domain
    // verdicts measure the asymptotic regime
    let t_max = if spectral.gap.is_finite() && spectral.gap > 1e-6 {
        config.t_max.max((16.0 / spectral.gap).min(2000.0))
    } else {
        config.t_max
    };
    let grid = model_grid(model, t_max, config.grid_step);

    let stationary = stationary_density(model);
    let (uniform_convergence, mean_ergodic, final_distance) = match &stationary {
        Ok(stat) => {
            let p = stat.projection_op();
            let mut last = f64::NAN;
            for &t in &grid {
                last = semigroup_at(model, t)?.distance(&p);
            }
            let me = mean_ergodic_check(model, &grid, config.tol)?;
            (last <= config.tol, me.envelope_ok, last)
        }
        Err(_) => (false, false, f64::NAN),
    };

    let n = model.space().n();
    let basis: Vec<DualVector> = (0..n)
        .map(|i| DualVector::basis(model.space().clone(), i))
        .collect();
    let mut some_lambda = true;
    let mut all_lambda = true;
    for f in &basis {
        let mut any = false;
        for &lambda in &config.lambda_sweep {
            let qi = dual_resolvent_quasi_interior(model, f, lambda, config.epsilon)?;
            any |= qi;
            all_lambda &= qi;
        }
        some_lambda &= any;
    }

    let dual_irreducible = dual_irreducibility(model);
    let report = SuiteReport {
        irreducible,
        has_kernel_part,
        hypothesis_met,
        uniform_convergence,
        mean_ergodic,
        simple_pole,
        dual_irreducible,
        quasi_interior_some_lambda: some_lambda,
        quasi_interior_all_lambda: all_lambda,
        final_distance,
        spectral,
        consistent: true,
    };
    let consistent = if hypothesis_met {
        let c = report.conditions();
        c.iter().all(|&x| x == c[0])
    } else {
        true
    };
    Ok(SuiteReport {
        consistent,
        ..report
    })
}
