//! Kernel and structured operators in density coordinates.
//!
//! A [`KernelOperator`] is a full matrix `t_{ij}` acting as
//! `(Tf)_i = Σ_j t_{ij} f_j`. A [`StructuredOperator`] additionally carries an
//! optional singular part `w·S_σ` (a weighted mass-preserving cell
//! permutation), mirroring the split of a positive operator into its
//! integral part and the rest. Lattice operations (entrywise meets) act on
//! kernel matrices; singular parts only meet singular parts with the same map.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::space::{Density, DualVector, StateSpace};

/// Operator norm on L(L¹_μ): `max_j (Σ_i μ_i |m_{ij}|) / μ_j`.
pub fn weighted_op_norm(space: &StateSpace, matrix: &DMatrix<f64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..space.n() {
        let mut s = 0.0;
        for i in 0..space.n() {
            s += space.weight(i) * matrix[(i, j)].abs();
        }
        best = best.max(s / space.weight(j));
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelOperator {
    space: StateSpace,
    matrix: DMatrix<f64>,
}

impl KernelOperator {
    pub fn new(space: StateSpace, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != space.n() || matrix.ncols() != space.n() {
            return Err(Error::DimensionMismatch {
                expected: space.n(),
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn from_rows(space: StateSpace, rows: &[Vec<f64>]) -> Result<Self> {
        let n = space.n();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rows.len(),
            });
        }
        let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(space, matrix)
    }

    pub fn zero(space: StateSpace) -> Self {
        let n = space.n();
        Self {
            matrix: DMatrix::zeros(n, n),
            space,
        }
    }

    pub fn identity(space: StateSpace) -> Self {
        let n = space.n();
        Self {
            matrix: DMatrix::identity(n, n),
            space,
        }
    }

    /// The rank-one stochastic projection `𝟙 ⊗ g`: `f ↦ ⟨𝟙, f⟩ g`,
    /// with matrix entries `g_i μ_j`.
    pub fn rank_one(g: &Density) -> Self {
        let space = g.space().clone();
        let n = space.n();
        let matrix = DMatrix::from_fn(n, n, |i, j| g.values()[i] * space.weight(j));
        Self { space, matrix }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, f: &Density) -> Result<Density> {
        self.space.check_len(f.values().len())?;
        Ok(Density::from_vector(
            self.space.clone(),
            &self.matrix * f.vector(),
        ))
    }

    /// Mass of column `j`: `Σ_i μ_i t_{ij}`; equals `μ_j` for stochastic operators.
    pub fn column_mass(&self, j: usize) -> f64 {
        (0..self.space.n())
            .map(|i| self.space.weight(i) * self.matrix[(i, j)])
            .sum()
    }

    pub fn is_positive(&self, tol: f64) -> bool {
        self.matrix.iter().all(|&x| x >= -tol)
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.matrix.iter().all(|&x| x.abs() <= tol)
    }

    pub fn op_norm(&self) -> f64 {
        weighted_op_norm(&self.space, &self.matrix)
    }

    pub fn is_stochastic(&self, tol: f64) -> bool {
        if !self.is_positive(tol) {
            return false;
        }
        (0..self.space.n()).all(|j| {
            (self.column_mass(j) - self.space.weight(j)).abs() <= tol * self.space.weight(j)
        })
    }

    /// Entrywise minimum; the lattice infimum of two positive kernel operators
    /// in this coordinate representation.
    pub fn meet(&self, other: &KernelOperator) -> Result<KernelOperator> {
        self.space.check_len(other.space.n())?;
        const POS_TOL: f64 = 1e-12;
        if !self.is_positive(POS_TOL) || !other.is_positive(POS_TOL) {
            return Err(Error::InvalidArgument(
                "operator meet requires positive operands".into(),
            ));
        }
        Ok(KernelOperator {
            space: self.space.clone(),
            matrix: self.matrix.zip_map(&other.matrix, f64::min),
        })
    }

    pub fn compose(&self, other: &KernelOperator) -> Result<KernelOperator> {
        self.space.check_len(other.space.n())?;
        Ok(KernelOperator {
            space: self.space.clone(),
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn add(&self, other: &KernelOperator) -> Result<KernelOperator> {
        self.space.check_len(other.space.n())?;
        Ok(KernelOperator {
            space: self.space.clone(),
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn sub(&self, other: &KernelOperator) -> Result<KernelOperator> {
        self.space.check_len(other.space.n())?;
        Ok(KernelOperator {
            space: self.space.clone(),
            matrix: &self.matrix - &other.matrix,
        })
    }

    pub fn scale(&self, a: f64) -> KernelOperator {
        KernelOperator {
            space: self.space.clone(),
            matrix: &self.matrix * a,
        }
    }

    /// Dual action in the μ-weighted pairing: `(T′φ)_j = (1/μ_j) Σ_i μ_i t_{ij} φ_i`,
    /// so that `⟨T′φ, f⟩ = ⟨φ, Tf⟩` exactly.
    pub fn dual_apply(&self, phi: &DualVector) -> Result<DualVector> {
        self.space.check_len(phi.values().len())?;
        let n = self.space.n();
        let mut out = DVector::zeros(n);
        for j in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                s += self.space.weight(i) * self.matrix[(i, j)] * phi.values()[i];
            }
            out[j] = s / self.space.weight(j);
        }
        Ok(DualVector::from_vector(self.space.clone(), out))
    }
}

/// Weighted deterministic-map part `w·S_σ` of a structured operator.
/// The map must preserve cell masses so that `S_σ` is stochastic.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularPart {
    weight: f64,
    map: Vec<usize>,
}

impl SingularPart {
    pub fn new(space: &StateSpace, weight: f64, map: Vec<usize>) -> Result<Self> {
        if weight < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "singular weight must be nonnegative, found {weight}"
            )));
        }
        space.check_len(map.len())?;
        let n = space.n();
        let mut seen = vec![false; n];
        for (j, &i) in map.iter().enumerate() {
            if i >= n || seen[i] {
                return Err(Error::InvalidArgument(
                    "singular map must be a permutation of the cells".into(),
                ));
            }
            seen[i] = true;
            if (space.weight(i) - space.weight(j)).abs() > 1e-12 * space.weight(j) {
                return Err(Error::InvalidArgument(format!(
                    "singular map sends cell {j} (mass {}) to cell {i} (mass {})",
                    space.weight(j),
                    space.weight(i)
                )));
            }
        }
        Ok(Self { weight, map })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Image cell of source cell `j`.
    pub fn map(&self) -> &[usize] {
        &self.map
    }
}

/// Positive operator split as `T = w·S_σ + kernel`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredOperator {
    space: StateSpace,
    singular: Option<SingularPart>,
    kernel: KernelOperator,
}

impl StructuredOperator {
    pub fn new(
        space: StateSpace,
        singular: Option<SingularPart>,
        kernel: KernelOperator,
    ) -> Result<Self> {
        space.check_len(kernel.space().n())?;
        if let Some(s) = &singular {
            space.check_len(s.map.len())?;
        }
        Ok(Self {
            space,
            singular,
            kernel,
        })
    }

    pub fn from_kernel(kernel: KernelOperator) -> Self {
        Self {
            space: kernel.space().clone(),
            singular: None,
            kernel,
        }
    }

    pub fn identity(space: StateSpace) -> Self {
        Self::from_kernel(KernelOperator::identity(space))
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn singular(&self) -> Option<&SingularPart> {
        self.singular.as_ref()
    }

    pub fn kernel(&self) -> &KernelOperator {
        &self.kernel
    }

    /// Full matrix including the singular part.
    pub fn total_matrix(&self) -> DMatrix<f64> {
        let mut m = self.kernel.matrix().clone();
        if let Some(s) = &self.singular {
            for (j, &i) in s.map.iter().enumerate() {
                m[(i, j)] += s.weight;
            }
        }
        m
    }

    pub fn to_kernel(&self) -> KernelOperator {
        KernelOperator {
            space: self.space.clone(),
            matrix: self.total_matrix(),
        }
    }

    pub fn apply(&self, f: &Density) -> Result<Density> {
        self.space.check_len(f.values().len())?;
        let mut out = self.kernel.matrix() * f.vector();
        if let Some(s) = &self.singular {
            for (j, &i) in s.map.iter().enumerate() {
                out[i] += s.weight * f.values()[j];
            }
        }
        Ok(Density::from_vector(self.space.clone(), out))
    }

    pub fn dual_apply(&self, phi: &DualVector) -> Result<DualVector> {
        self.to_kernel().dual_apply(phi)
    }

    pub fn op_norm(&self) -> f64 {
        weighted_op_norm(&self.space, &self.total_matrix())
    }

    pub fn is_stochastic(&self, tol: f64) -> bool {
        self.to_kernel().is_stochastic(tol)
    }

    /// Column `j` as a density (the image of the normalized cell indicator).
    pub fn column_density(&self, j: usize) -> Density {
        let m = self.total_matrix();
        let n = self.space.n();
        let wj = self.space.weight(j);
        let v = DVector::from_fn(n, |i, _| m[(i, j)] / wj);
        Density::from_vector(self.space.clone(), v)
    }

    /// Composition `self ∘ other` (apply `other` first). The singular part of
    /// the product is the product of the singular parts; all cross terms fall
    /// into the kernel part.
    pub fn compose(&self, other: &StructuredOperator) -> Result<StructuredOperator> {
        self.space.check_len(other.space.n())?;
        let n = self.space.n();
        let singular = match (&self.singular, &other.singular) {
            (Some(a), Some(b)) if a.weight > 0.0 && b.weight > 0.0 => {
                let map: Vec<usize> = (0..n).map(|j| a.map[b.map[j]]).collect();
                Some(SingularPart::new(&self.space, a.weight * b.weight, map)?)
            }
            _ => None,
        };
        // kernel of product = full product minus the composed singular part
        let mut m = self.total_matrix() * other.total_matrix();
        if let Some(s) = &singular {
            for (j, &i) in s.map.iter().enumerate() {
                m[(i, j)] -= s.weight;
            }
        }
        Ok(StructuredOperator {
            space: self.space.clone(),
            singular,
            kernel: KernelOperator {
                space: self.space.clone(),
                matrix: m,
            },
        })
    }

    /// Lattice meet in the structured representation: kernels meet entrywise;
    /// singular parts contribute only when both operators share the same map.
    pub fn meet(&self, other: &StructuredOperator) -> Result<StructuredOperator> {
        self.space.check_len(other.space.n())?;
        let kernel = self.kernel.meet(&other.kernel)?;
        let singular = match (&self.singular, &other.singular) {
            (Some(a), Some(b)) if a.map == b.map => Some(SingularPart::new(
                &self.space,
                a.weight.min(b.weight),
                a.map.clone(),
            )?),
            _ => None,
        };
        Ok(StructuredOperator {
            space: self.space.clone(),
            singular,
            kernel,
        })
    }

    /// `‖self − other‖` in the L(L¹_μ) operator norm.
    pub fn distance(&self, other: &StructuredOperator) -> f64 {
        weighted_op_norm(&self.space, &(self.total_matrix() - other.total_matrix()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit2() -> StateSpace {
        StateSpace::unit(2).unwrap()
    }

    #[test]
    fn op_norm_examples() {
        let s = unit2();
        assert_eq!(KernelOperator::identity(s.clone()).op_norm(), 1.0);
        let k = KernelOperator::from_rows(
            s.clone(),
            &[vec![0.25, -0.25], vec![-0.25, 0.25]],
        )
        .unwrap();
        assert_eq!(k.op_norm(), 0.5);
        // any stochastic operator has norm 1
        let t =
            KernelOperator::from_rows(s, &[vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap();
        assert!(t.is_stochastic(1e-12));
        assert!((t.op_norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stochastic_detects_mass_creation() {
        let s = unit2();
        assert!(KernelOperator::identity(s.clone()).is_stochastic(0.0));
        let bad =
            KernelOperator::from_rows(s, &[vec![1.0, 0.0], vec![0.1, 1.0]]).unwrap();
        assert!(!bad.is_stochastic(1e-10));
    }

    #[test]
    fn meet_examples() {
        let s3 = StateSpace::unit(3).unwrap();
        let shift = KernelOperator::from_rows(
            s3.clone(),
            &[
                vec![0.0, 0.0, 1.0],
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
            ],
        )
        .unwrap();
        let id = KernelOperator::identity(s3);
        let m = shift.meet(&id).unwrap();
        assert!(m.is_zero(0.0));

        let s = unit2();
        let t =
            KernelOperator::from_rows(s.clone(), &[vec![0.75, 0.25], vec![0.25, 0.75]])
                .unwrap();
        let p = KernelOperator::rank_one(
            &Density::new(s.clone(), vec![0.5, 0.5]).unwrap(),
        );
        let m = t.meet(&p).unwrap();
        assert_eq!(m.matrix()[(0, 0)], 0.5);
        assert_eq!(m.matrix()[(0, 1)], 0.25);
        assert_eq!(m.matrix()[(1, 0)], 0.25);
        assert_eq!(m.matrix()[(1, 1)], 0.5);

        // idempotence
        assert_eq!(t.meet(&t).unwrap(), t);
    }

    #[test]
    fn meet_rejects_signed_operators() {
        let s = unit2();
        let signed = KernelOperator::from_rows(
            s.clone(),
            &[vec![0.25, -0.25], vec![-0.25, 0.25]],
        )
        .unwrap();
        assert!(signed.meet(&KernelOperator::identity(s)).is_err());
    }

    #[test]
    fn dual_apply_examples() {
        let s = unit2();
        let t =
            KernelOperator::from_rows(s.clone(), &[vec![0.75, 0.25], vec![0.25, 0.75]])
                .unwrap();
        let one = DualVector::ones(s.clone());
        let out = t.dual_apply(&one).unwrap();
        assert!((out.values()[0] - 1.0).abs() < 1e-15);
        assert!((out.values()[1] - 1.0).abs() < 1e-15);

        let phi = DualVector::new(s.clone(), vec![0.3, -1.2]).unwrap();
        let id = KernelOperator::identity(s);
        assert_eq!(id.dual_apply(&phi).unwrap().values(), phi.values());
    }

    #[test]
    fn singular_part_validation() {
        let s = StateSpace::new(vec![1.0, 2.0]).unwrap();
        // swapping cells of different masses is not mass-preserving
        assert!(SingularPart::new(&s, 1.0, vec![1, 0]).is_err());
        assert!(SingularPart::new(&s, 1.0, vec![0, 1]).is_ok());
        assert!(SingularPart::new(&s, -0.5, vec![0, 1]).is_err());
        assert!(SingularPart::new(&s, 1.0, vec![0, 0]).is_err());
    }

    #[test]
    fn structured_total_matrix_and_compose() {
        let s = StateSpace::circle(3).unwrap();
        let shift = SingularPart::new(&s, 0.5, vec![1, 2, 0]).unwrap();
        let kernel = KernelOperator::rank_one(&Density::uniform(s.clone())).scale(0.5);
        let t = StructuredOperator::new(s.clone(), Some(shift), kernel).unwrap();
        assert!(t.is_stochastic(1e-12));

        let t2 = t.compose(&t).unwrap();
        assert!(t2.is_stochastic(1e-12));
        let sing = t2.singular().unwrap();
        assert!((sing.weight() - 0.25).abs() < 1e-15);
        assert_eq!(sing.map(), &[2, 0, 1]);
        // matrices agree with plain multiplication
        let direct = t.total_matrix() * t.total_matrix();
        assert!((t2.total_matrix() - direct).abs().max() < 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_positive_ops() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)>
        {
            (2usize..6).prop_flat_map(|n| {
                (
                    proptest::collection::vec(0.1f64..3.0, n),
                    proptest::collection::vec(0.0f64..2.0, n * n),
                    proptest::collection::vec(0.0f64..2.0, n * n),
                    proptest::collection::vec(0.0f64..2.0, n * n),
                )
            })
        }

        fn kernel(s: &StateSpace, entries: &[f64]) -> KernelOperator {
            let n = s.n();
            KernelOperator::new(
                s.clone(),
                DMatrix::from_fn(n, n, |i, j| entries[i * n + j]),
            )
            .unwrap()
        }

        proptest! {
            #[test]
            fn meet_lattice_laws((w, a, b, c) in random_positive_ops()) {
                let s = StateSpace::new(w).unwrap();
                let ta = kernel(&s, &a);
                let tb = kernel(&s, &b);
                let tc = kernel(&s, &c);
                // commutative, associative, idempotent
                prop_assert_eq!(ta.meet(&tb).unwrap(), tb.meet(&ta).unwrap());
                prop_assert_eq!(
                    ta.meet(&tb).unwrap().meet(&tc).unwrap(),
                    ta.meet(&tb.meet(&tc).unwrap()).unwrap()
                );
                prop_assert_eq!(ta.meet(&ta).unwrap(), ta.clone());
                // 0 ≤ meet ≤ ta entrywise
                let m = ta.meet(&tb).unwrap();
                for (x, y) in m.matrix().iter().zip(ta.matrix().iter()) {
                    prop_assert!(*x >= 0.0 && *x <= *y);
                }
            }

            #[test]
            fn op_norm_submultiplicative((w, a, b, _c) in random_positive_ops()) {
                let s = StateSpace::new(w).unwrap();
                let ta = kernel(&s, &a);
                let tb = kernel(&s, &b);
                let prod = ta.compose(&tb).unwrap();
                prop_assert!(prod.op_norm() <= ta.op_norm() * tb.op_norm() * (1.0 + 1e-12) + 1e-12);
            }

            #[test]
            fn duality_pairing((w, a, b, c) in random_positive_ops()) {
                let s = StateSpace::new(w).unwrap();
                let t = kernel(&s, &a);
                let n = s.n();
                let f = Density::new(s.clone(), b[..n].to_vec()).unwrap();
                let phi = DualVector::new(s.clone(), c[..n].to_vec()).unwrap();
                let lhs = t.apply(&f).unwrap().pair(&phi).unwrap();
                let rhs = f.pair(&t.dual_apply(&phi).unwrap()).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            }
        }
    }
}
