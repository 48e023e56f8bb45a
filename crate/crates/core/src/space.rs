//! The discretized measure space and the vectors living over it.
//!
//! A [`StateSpace`] is a finite cell decomposition with strictly positive cell
//! masses `μ_1..μ_n`. A [`Density`] stores values per unit mass, so its L¹
//! norm is `Σ_i μ_i |f_i|`. A [`DualVector`] stores plain pointwise values
//! with the sup norm; the pairing `⟨φ, f⟩ = Σ_i μ_i φ_i f_i` connects the two.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct StateSpace {
    weights: Arc<Vec<f64>>,
}

impl PartialEq for StateSpace {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights
    }
}

impl StateSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument(
                "a state space needs at least one cell".into(),
            ));
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveWeight { index, value });
            }
        }
        Ok(Self {
            weights: Arc::new(weights),
        })
    }

    /// `n` cells of unit mass.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    /// `n` equal cells tiling a circle of circumference 1 (cell width `1/n`).
    pub fn circle(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n() {
            Err(Error::DimensionMismatch {
                expected: self.n(),
                found: len,
            })
        } else {
            Ok(())
        }
    }
}

/// Element of the weighted L¹ space, stored in density coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    space: StateSpace,
    values: DVector<f64>,
}

impl Density {
    pub fn new(space: StateSpace, values: Vec<f64>) -> Result<Self> {
        space.check_len(values.len())?;
        Ok(Self {
            space,
            values: DVector::from_vec(values),
        })
    }

    pub(crate) fn from_vector(space: StateSpace, values: DVector<f64>) -> Self {
        debug_assert_eq!(space.n(), values.len());
        Self { space, values }
    }

    pub fn zero(space: StateSpace) -> Self {
        let n = space.n();
        Self::from_vector(space, DVector::zeros(n))
    }

    /// The uniform probability density: constant value `1 / Σ μ_i`.
    pub fn uniform(space: StateSpace) -> Self {
        let c = 1.0 / space.total_mass();
        let n = space.n();
        Self::from_vector(space, DVector::from_element(n, c))
    }

    /// Normalized indicator of cell `j`: value `1/μ_j` there, zero elsewhere.
    /// These are the extreme points of the positive part of the unit ball.
    pub fn cell_indicator(space: StateSpace, j: usize) -> Self {
        let mut v = DVector::zeros(space.n());
        v[j] = 1.0 / space.weight(j);
        Self::from_vector(space, v)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub(crate) fn vector(&self) -> &DVector<f64> {
        &self.values
    }

    /// `‖f‖₁ = Σ_i μ_i |f_i|`.
    pub fn l1_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.space.weights())
            .map(|(f, w)| w * f.abs())
            .sum()
    }

    /// Signed mass `⟨𝟙, f⟩ = Σ_i μ_i f_i`.
    pub fn mass(&self) -> f64 {
        self.values
            .iter()
            .zip(self.space.weights())
            .map(|(f, w)| w * f)
            .sum()
    }

    pub fn pos_part(&self) -> Density {
        Self::from_vector(self.space.clone(), self.values.map(|x| x.max(0.0)))
    }

    pub fn neg_part(&self) -> Density {
        Self::from_vector(self.space.clone(), self.values.map(|x| (-x).max(0.0)))
    }

    pub fn is_nonnegative(&self, tol: f64) -> bool {
        self.values.iter().all(|&x| x >= -tol)
    }

    pub fn scale(&self, a: f64) -> Density {
        Self::from_vector(self.space.clone(), &self.values * a)
    }

    pub fn add(&self, other: &Density) -> Result<Density> {
        self.space.check_len(other.values.len())?;
        Ok(Self::from_vector(
            self.space.clone(),
            &self.values + &other.values,
        ))
    }

    pub fn sub(&self, other: &Density) -> Result<Density> {
        self.space.check_len(other.values.len())?;
        Ok(Self::from_vector(
            self.space.clone(),
            &self.values - &other.values,
        ))
    }

    /// Lattice supremum `self ∨ other`.
    pub fn sup(&self, other: &Density) -> Result<Density> {
        self.space.check_len(other.values.len())?;
        Ok(Self::from_vector(
            self.space.clone(),
            self.values.zip_map(&other.values, f64::max),
        ))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `⟨φ, f⟩ = Σ_i μ_i φ_i f_i`.
    pub fn pair(&self, phi: &DualVector) -> Result<f64> {
        self.space.check_len(phi.values.len())?;
        Ok(self
            .values
            .iter()
            .zip(phi.values.iter())
            .zip(self.space.weights())
            .map(|((f, p), w)| w * f * p)
            .sum())
    }
}

/// Element of the weighted L∞ dual, stored as pointwise values.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    space: StateSpace,
    values: DVector<f64>,
}

impl DualVector {
    pub fn new(space: StateSpace, values: Vec<f64>) -> Result<Self> {
        space.check_len(values.len())?;
        Ok(Self {
            space,
            values: DVector::from_vec(values),
        })
    }

    pub(crate) fn from_vector(space: StateSpace, values: DVector<f64>) -> Self {
        debug_assert_eq!(space.n(), values.len());
        Self { space, values }
    }

    /// The constant-one functional 𝟙.
    pub fn ones(space: StateSpace) -> Self {
        let n = space.n();
        Self::from_vector(space, DVector::from_element(n, 1.0))
    }

    pub fn basis(space: StateSpace, i: usize) -> Self {
        let mut v = DVector::zeros(space.n());
        v[i] = 1.0;
        Self::from_vector(space, v)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub(crate) fn vector(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_nonnegative(&self, tol: f64) -> bool {
        self.values.iter().all(|&x| x >= -tol)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_norm_examples() {
        let s = StateSpace::unit(2).unwrap();
        let f = Density::new(s.clone(), vec![0.75, 0.25]).unwrap();
        assert_eq!(f.l1_norm(), 1.0);
        let z = Density::new(s.clone(), vec![0.0, 0.0]).unwrap();
        assert_eq!(z.l1_norm(), 0.0);

        let s = StateSpace::new(vec![2.0, 1.0]).unwrap();
        let f = Density::new(s, vec![0.25, 0.5]).unwrap();
        // 2·0.25 + 1·0.5
        assert_eq!(f.l1_norm(), 1.0);
    }

    #[test]
    fn pos_neg_split() {
        let s = StateSpace::unit(2).unwrap();
        let f = Density::new(s.clone(), vec![0.5, -0.25]).unwrap();
        assert_eq!(f.pos_part().values(), &[0.5, 0.0]);
        assert_eq!(f.neg_part().values(), &[0.0, 0.25]);

        let z = Density::zero(s.clone());
        assert_eq!(z.pos_part().values(), &[0.0, 0.0]);
        assert_eq!(z.neg_part().values(), &[0.0, 0.0]);

        let g = Density::new(s, vec![-1.0, -2.0]).unwrap();
        assert_eq!(g.pos_part().values(), &[0.0, 0.0]);
        assert_eq!(g.neg_part().values(), &[1.0, 2.0]);
    }

    #[test]
    fn rejects_bad_spaces() {
        assert!(StateSpace::new(vec![]).is_err());
        assert!(StateSpace::new(vec![1.0, 0.0]).is_err());
        assert!(StateSpace::new(vec![1.0, -2.0]).is_err());
        // n = 1 is allowed
        assert_eq!(StateSpace::unit(1).unwrap().n(), 1);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let s = StateSpace::unit(3).unwrap();
        assert!(Density::new(s, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn pairing_with_ones_is_mass() {
        let s = StateSpace::new(vec![2.0, 1.0, 0.5]).unwrap();
        let f = Density::new(s.clone(), vec![0.1, -0.2, 0.4]).unwrap();
        let one = DualVector::ones(s);
        assert!((f.pair(&one).unwrap() - f.mass()).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn space_and_values() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
            (1usize..8).prop_flat_map(|n| {
                (
                    proptest::collection::vec(0.1f64..4.0, n),
                    proptest::collection::vec(-5.0f64..5.0, n),
                )
            })
        }

        proptest! {
            #[test]
            fn pos_plus_neg_norm_is_norm((w, v) in space_and_values()) {
                let s = StateSpace::new(w).unwrap();
                let f = Density::new(s, v).unwrap();
                let lhs = f.pos_part().l1_norm() + f.neg_part().l1_norm();
                prop_assert!((lhs - f.l1_norm()).abs() <= 1e-12 * (1.0 + f.l1_norm()));
            }

            #[test]
            fn parts_recompose((w, v) in space_and_values()) {
                let s = StateSpace::new(w).unwrap();
                let f = Density::new(s, v).unwrap();
                let back = f.pos_part().sub(&f.neg_part()).unwrap();
                for (a, b) in back.values().iter().zip(f.values()) {
                    prop_assert_eq!(a, b);
                }
            }
        }
    }
}
