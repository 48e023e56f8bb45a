//! Uniform lower bounds, deficiency functionals, Doeblin masses, and
//! quantitative convergence certificates.
//!
//! The deficiency of a candidate `h` at a single operator is
//! `sup{‖(Tf − h)⁻‖ : 0 ≤ f, ‖f‖ = 1}`. Since `f ↦ ‖(Tf − h)⁻‖` is convex
//! and the extreme points of the normalized positive ball are the normalized
//! cell indicators, the supremum is attained at a column; a simplex
//! brute-force oracle validates this reduction on small spaces.

use crate::error::{Error, Result};
use crate::evolution::SemigroupEvaluator;
use crate::models::{self, Model};
use crate::operator::StructuredOperator;
use crate::space::Density;
use crate::spectral::stationary_density;

#[derive(Debug, Clone)]
pub struct DeficiencyReport {
    /// `max_j ‖(T(e_j/μ_j) − h)⁻‖₁`.
    pub deficiency: f64,
    /// Column attaining the maximum.
    pub attaining_column: usize,
}

/// Deficiency of the candidate lower bound `h` against a single stochastic
/// operator, evaluated at the extreme points of the positive unit ball.
pub fn deficiency(op: &StructuredOperator, h: &Density) -> Result<DeficiencyReport> {
    if !h.is_nonnegative(0.0) {
        return Err(Error::InvalidArgument(
            "a lower-bound candidate must be nonnegative".into(),
        ));
    }
    op.space().check_len(h.values().len())?;
    let n = op.space().n();
    let mut worst = 0.0;
    let mut attaining = 0;
    for j in 0..n {
        let col = op.column_density(j);
        let d = col.sub(h)?.neg_part().l1_norm();
        if d > worst {
            worst = d;
            attaining = j;
        }
    }
    Ok(DeficiencyReport {
        deficiency: worst,
        attaining_column: attaining,
    })
}

/// The largest density with zero deficiency at this single operator: the
/// entrywise infimum of the normalized columns.
pub fn maximal_lower_bound_at(op: &StructuredOperator) -> Density {
    let n = op.space().n();
    let mut h = op.column_density(0);
    for j in 1..n {
        let col = op.column_density(j);
        let values: Vec<f64> = h
            .values()
            .iter()
            .zip(col.values())
            .map(|(&a, &b)| a.min(b))
            .collect();
        h = Density::new(op.space().clone(), values).expect("same space");
    }
    h
}

/// Mass of the maximal single-time lower bound at time `t`; positivity is a
/// Doeblin minorization and yields geometric contraction.
pub fn doeblin_mass(model: &Model, t: f64) -> Result<f64> {
    let op = crate::evolution::semigroup_at(model, t)?;
    Ok(maximal_lower_bound_at(&op).l1_norm())
}

/// Geometric rate bound `‖T_t − P‖ ≤ c·ρ^{⌊t/t₀⌋}` attached to a certificate.
#[derive(Debug, Clone)]
pub struct RateBound {
    pub c: f64,
    pub rho: f64,
    pub t0: f64,
}

impl RateBound {
    pub fn eval(&self, t: f64) -> f64 {
        self.c * self.rho.powi((t / self.t0).floor() as i32)
    }
}

#[derive(Debug, Clone)]
pub struct AuditPoint {
    pub t: f64,
    pub deficiency: f64,
    pub measured_distance: f64,
    pub rate_bound: f64,
}

/// Machine-checkable witness of uniform convergence: the lower bound `h`
/// found at `t₀`, its mass `η`, the rank-one limit `P = 𝟙⊗g`, and the audited
/// rate bound `2(1−η)^{⌊t/t₀⌋}`.
#[derive(Debug, Clone)]
pub struct ConvergenceCertificate {
    pub h: Density,
    pub t0: f64,
    pub eta: f64,
    pub rate: RateBound,
    pub stationary: Density,
    pub audit: Vec<AuditPoint>,
}

#[derive(Debug, Clone)]
pub enum CertifyOutcome {
    Certified(ConvergenceCertificate),
    /// No lower bound with positive mass at this `t₀`; inconclusive on its
    /// own — callers sweep `t₀`.
    NoCertificate { eta: f64 },
}

/// Search for a uniform lower bound at `t₀` and, if one exists, audit the
/// deficiency and the geometric rate bound over the grid. Verification
/// failures are hard errors, never silent passes.
pub fn certify_uniform_convergence(
    model: &Model,
    t0: f64,
    audit_grid: &[f64],
    tol: f64,
) -> Result<CertifyOutcome> {
    if t0 <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "certification time must be positive, found {t0}"
        )));
    }
    let mut evaluator = SemigroupEvaluator::new(model.clone());
    let op0 = evaluator.at(t0)?;
    let h = maximal_lower_bound_at(&op0);
    let eta = h.l1_norm();
    if eta <= tol {
        return Ok(CertifyOutcome::NoCertificate { eta });
    }
    if !models::is_irreducible(model) {
        return Err(Error::NotIrreducible {
            detail: "certification needs a unique stationary density".into(),
        });
    }
    let stat = stationary_density(model)?;
    let p = stat.projection_op();
    let rate = RateBound {
        c: 2.0,
        rho: 1.0 - eta,
        t0,
    };
    let mut audit = Vec::new();
    for &t in audit_grid {
        if t < t0 {
            continue;
        }
        let op = evaluator.at(t)?;
        let def = deficiency(&op, &h)?;
        if def.deficiency > tol {
            return Err(Error::AuditFailure {
                t,
                check: "deficiency of the certified lower bound",
                margin: def.deficiency - tol,
            });
        }
        let measured = op.distance(&p);
        let bound = rate.eval(t);
        if measured > bound + tol.max(1e-9) {
            return Err(Error::AuditFailure {
                t,
                check: "geometric rate bound",
                margin: measured - bound,
            });
        }
        audit.push(AuditPoint {
            t,
            deficiency: def.deficiency,
            measured_distance: measured,
            rate_bound: bound,
        });
    }
    Ok(CertifyOutcome::Certified(ConvergenceCertificate {
        h,
        t0,
        eta,
        rate,
        stationary: stat.density().clone(),
        audit,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::semigroup_at;
    use crate::models::{
        build_ctmc_from_rows, build_dtmc, build_pdmp, build_rotation, random_irreducible_ctmc,
    };
    use crate::operator::KernelOperator;
    use crate::space::StateSpace;

    fn two_state() -> Model {
        let s = StateSpace::unit(2).unwrap();
        Model::Ctmc(build_ctmc_from_rows(s, &[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap())
    }

    fn cyclic_dtmc3() -> Model {
        let s = StateSpace::unit(3).unwrap();
        let shift = KernelOperator::from_rows(
            s,
            &[
                vec![0.0, 0.0, 1.0],
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
            ],
        )
        .unwrap();
        Model::Dtmc(build_dtmc(shift).unwrap())
    }

    #[test]
    fn deficiency_examples() {
        let s = StateSpace::unit(2).unwrap();
        let t = semigroup_at(&two_state(), 2f64.ln() / 2.0).unwrap();

        // h = 0 has zero deficiency against any stochastic operator
        let zero = Density::zero(s.clone());
        assert_eq!(deficiency(&t, &zero).unwrap().deficiency, 0.0);

        // rank-one 𝟙⊗(0.5, 0.5) against h = (0.6, 0.6)
        let p = StructuredOperator::from_kernel(KernelOperator::rank_one(
            &Density::new(s.clone(), vec![0.5, 0.5]).unwrap(),
        ));
        let h = Density::new(s.clone(), vec![0.6, 0.6]).unwrap();
        assert!((deficiency(&p, &h).unwrap().deficiency - 0.2).abs() < 1e-12);

        // both columns of T at t = ln2/2 dominate (0.25, 0.25)
        let h = Density::new(s.clone(), vec![0.25, 0.25]).unwrap();
        assert!(deficiency(&t, &h).unwrap().deficiency < 1e-12);

        let negative = Density::new(s, vec![0.1, -0.1]).unwrap();
        assert!(deficiency(&t, &negative).is_err());
    }

    #[test]
    fn maximal_lower_bound_examples() {
        let s = StateSpace::unit(3).unwrap();
        let id = StructuredOperator::identity(s);
        assert_eq!(maximal_lower_bound_at(&id).l1_norm(), 0.0);

        let t = semigroup_at(&two_state(), 2f64.ln() / 2.0).unwrap();
        let h = maximal_lower_bound_at(&t);
        assert!((h.values()[0] - 0.25).abs() < 1e-12);
        assert!((h.values()[1] - 0.25).abs() < 1e-12);
        assert!((h.l1_norm() - 0.5).abs() < 1e-12);

        let pdmp = Model::Pdmp(build_pdmp(4, 1.0, vec![1.0; 4]).unwrap());
        let op = semigroup_at(&pdmp, 1.0).unwrap();
        let h = maximal_lower_bound_at(&op);
        let expected = 1.0 - (-1f64).exp();
        assert!(h.values().iter().all(|&x| (x - expected).abs() < 1e-12));
        assert!((h.l1_norm() - expected).abs() < 1e-12);
    }

    #[test]
    fn doeblin_mass_examples() {
        // every power of a cyclic permutation has column minimum zero
        for n in 1..=6 {
            assert_eq!(doeblin_mass(&cyclic_dtmc3(), n as f64).unwrap(), 0.0);
        }
        let m = doeblin_mass(&two_state(), 2f64.ln() / 2.0).unwrap();
        assert!((m - 0.5).abs() < 1e-12);
        let rot = Model::Pdmp(build_rotation(4).unwrap());
        for k in 1..=8 {
            assert_eq!(doeblin_mass(&rot, k as f64 * 0.25).unwrap(), 0.0);
        }
    }

    #[test]
    fn certify_two_state() {
        let t0 = 2f64.ln() / 2.0;
        let grid: Vec<f64> = (1..=40).map(|k| k as f64 * t0).collect();
        let outcome = certify_uniform_convergence(&two_state(), t0, &grid, 1e-10).unwrap();
        match outcome {
            CertifyOutcome::Certified(cert) => {
                assert!((cert.eta - 0.5).abs() < 1e-12);
                assert!((cert.rate.rho - 0.5).abs() < 1e-12);
                // measured distance is e^{−2t}, dominated by 2·(1/2)^{⌊t/t₀⌋}
                for point in &cert.audit {
                    let exact = (-2.0 * point.t).exp();
                    assert!((point.measured_distance - exact).abs() < 1e-9);
                    assert!(point.measured_distance <= point.rate_bound + 1e-9);
                }
            }
            CertifyOutcome::NoCertificate { .. } => panic!("expected a certificate"),
        }
    }

    #[test]
    fn certify_rotation_returns_no_certificate() {
        let rot = Model::Pdmp(build_rotation(4).unwrap());
        let grid: Vec<f64> = (1..=16).map(|k| k as f64 * 0.25).collect();
        for t0 in [0.25, 1.0, 2.0] {
            match certify_uniform_convergence(&rot, t0, &grid, 1e-10).unwrap() {
                CertifyOutcome::NoCertificate { eta } => assert_eq!(eta, 0.0),
                CertifyOutcome::Certified(_) => panic!("rotation must not certify"),
            }
        }
    }

    #[test]
    fn certify_pdmp_eta_closed_form() {
        let model = Model::Pdmp(build_pdmp(4, 1.0, vec![1.0; 4]).unwrap());
        let grid: Vec<f64> = (1..=30).map(|k| k as f64).collect();
        match certify_uniform_convergence(&model, 1.0, &grid, 1e-10).unwrap() {
            CertifyOutcome::Certified(cert) => {
                assert!((cert.eta - (1.0 - (-1f64).exp())).abs() < 1e-12);
                for point in &cert.audit {
                    let exact = 1.5 * (-point.t).exp();
                    assert!((point.measured_distance - exact).abs() < 1e-9);
                }
            }
            CertifyOutcome::NoCertificate { .. } => panic!("expected a certificate"),
        }
    }

    #[test]
    fn same_norm_identity() {
        // ‖(T_t f − h)⁺‖ = ‖(T_t f − h)⁻‖ for unit-norm fixed points h
        for seed in 0..10 {
            let model = Model::Ctmc(random_irreducible_ctmc(5, 0.4, seed).unwrap());
            let g = stationary_density(&model).unwrap().density().clone();
            let op = semigroup_at(&model, 3.0).unwrap();
            for j in 0..model.space().n() {
                let f = Density::cell_indicator(model.space().clone(), j);
                let diff = op.apply(&f).unwrap().sub(&g).unwrap();
                let pos = diff.pos_part().l1_norm();
                let neg = diff.neg_part().l1_norm();
                assert!((pos - neg).abs() <= 1e-12);
                assert!((diff.l1_norm() - 2.0 * neg).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn deficiency_monotone_and_subadditive_under_sup() {
        let mut rng = crate::models::SplitMix64::new(99);
        for seed in 0..20 {
            let model = Model::Ctmc(random_irreducible_ctmc(4, 0.5, seed).unwrap());
            let op = semigroup_at(&model, 0.7).unwrap();
            let s = model.space().clone();
            let rand_h = |rng: &mut crate::models::SplitMix64| {
                Density::new(s.clone(), (0..4).map(|_| rng.uniform(0.0, 0.4)).collect()).unwrap()
            };
            let h1 = rand_h(&mut rng);
            let h2 = rand_h(&mut rng);
            let d1 = deficiency(&op, &h1).unwrap().deficiency;
            let d2 = deficiency(&op, &h2).unwrap().deficiency;
            // monotone: shrinking h shrinks the deficiency
            let smaller = h1.scale(0.5);
            assert!(deficiency(&op, &smaller).unwrap().deficiency <= d1 + 1e-12);
            // lattice closure: the join is at most as deficient as the sum
            let join = h1.sup(&h2).unwrap();
            let dj = deficiency(&op, &join).unwrap().deficiency;
            assert!(dj <= d1 + d2 + 1e-12);
        }
    }

    #[test]
    fn fixed_point_property_at_large_times() {
        for seed in [2, 7, 13] {
            let model = Model::Ctmc(random_irreducible_ctmc(6, 0.4, seed).unwrap());
            let s_large = 60.0;
            let h = maximal_lower_bound_at(&semigroup_at(&model, s_large).unwrap());
            for t in [0.5, 1.0, 2.0] {
                let op = semigroup_at(&model, t).unwrap();
                let moved = op.apply(&h).unwrap();
                assert!(moved.sub(&h).unwrap().l1_norm() <= 1e-8);
            }
        }
    }

    #[test]
    fn doeblin_mass_nondecreasing_for_ctmc() {
        for seed in [1, 4, 9] {
            let model = Model::Ctmc(random_irreducible_ctmc(5, 0.4, seed).unwrap());
            let mut prev = 0.0;
            for k in 1..=20 {
                let m = doeblin_mass(&model, k as f64 * 0.5).unwrap();
                assert!(m >= prev - 1e-9, "mass decreased at t = {}", k as f64 * 0.5);
                prev = m;
            }
            // mass approaches 1 for convergent models
            assert!(doeblin_mass(&model, 200.0).unwrap() > 0.999);
        }
    }
}
