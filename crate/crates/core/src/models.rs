//! Semigroup-generating models: rate matrices, stochastic step matrices, and
//! circle transport with jumps, plus seeded example-family generators.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operator::KernelOperator;
use crate::space::{Density, StateSpace};

/// SplitMix64. Fixed 64-bit generator used for every seeded family so sweeps
/// replay bit-identically across implementations; reference vectors from the
/// public domain C version are pinned in the tests below.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Continuous-time model: generator `Q` in density coordinates, with
/// nonnegative off-diagonal rates and column mass conservation
/// `Σ_i μ_i q_{ij} = 0`.
#[derive(Debug, Clone)]
pub struct CtmcModel {
    space: StateSpace,
    rates: DMatrix<f64>,
}

impl CtmcModel {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }
}

pub fn build_ctmc(space: StateSpace, rates: DMatrix<f64>) -> Result<CtmcModel> {
    let n = space.n();
    if rates.nrows() != n || rates.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rates.nrows().max(rates.ncols()),
        });
    }
    for j in 0..n {
        let mut col_scale = 0.0f64;
        for i in 0..n {
            let q = rates[(i, j)];
            col_scale = col_scale.max(q.abs());
            if i != j && q < 0.0 {
                return Err(Error::NegativeEntry {
                    what: "rate matrix",
                    row: i,
                    col: j,
                    value: q,
                });
            }
        }
        let mass: f64 = (0..n).map(|i| space.weight(i) * rates[(i, j)]).sum();
        if mass.abs() > 1e-10 * (1.0 + col_scale) * space.weight(j).max(1.0) {
            return Err(Error::MassConservation {
                column: j,
                deviation: mass,
            });
        }
    }
    Ok(CtmcModel { space, rates })
}

pub fn build_ctmc_from_rows(space: StateSpace, rows: &[Vec<f64>]) -> Result<CtmcModel> {
    let n = space.n();
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rows.len(),
        });
    }
    build_ctmc(space, DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Discrete-time model: the semigroup is `(stepⁿ)_{n∈ℕ₀}`.
#[derive(Debug, Clone)]
pub struct DtmcModel {
    space: StateSpace,
    step: KernelOperator,
}

impl DtmcModel {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn step(&self) -> &KernelOperator {
        &self.step
    }
}

pub fn build_dtmc(step: KernelOperator) -> Result<DtmcModel> {
    if !step.is_stochastic(1e-10) {
        return Err(Error::NotStochastic {
            detail: "step matrix fails positivity or column mass check at 1e-10".into(),
        });
    }
    Ok(DtmcModel {
        space: step.space().clone(),
        step,
    })
}

/// Circle transport with exponential jumps to a shift-invariant target.
///
/// `n` equal cells of width `Δ = 1/n`; the flow shifts one cell per time `Δ`,
/// and jumps arrive at rate `λ` with post-jump density `ν`. Since `ν` is
/// shift-invariant, the semigroup has the exact closed form
/// `T_t = e^{−λt} S_t + (1 − e^{−λt}) 𝟙⊗ν` at every grid time `t ∈ Δ·ℕ₀`.
#[derive(Debug, Clone)]
pub struct PdmpModel {
    space: StateSpace,
    jump_rate: f64,
    jump_target: Density,
}

impl PdmpModel {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.n() as f64
    }

    pub fn jump_rate(&self) -> f64 {
        self.jump_rate
    }

    pub fn jump_target(&self) -> &Density {
        &self.jump_target
    }

    /// Image cell of cell `j` after one grid step.
    pub fn shift(&self, j: usize) -> usize {
        (j + 1) % self.n()
    }
}

pub fn build_pdmp(n: usize, jump_rate: f64, jump_target: Vec<f64>) -> Result<PdmpModel> {
    if n == 0 {
        return Err(Error::InvalidArgument("pdmp needs at least one cell".into()));
    }
    if jump_rate < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "jump rate must be nonnegative, found {jump_rate}"
        )));
    }
    let space = StateSpace::circle(n)?;
    let nu = Density::new(space.clone(), jump_target)?;
    if !nu.is_nonnegative(0.0) {
        return Err(Error::InvalidArgument(
            "jump target must be nonnegative".into(),
        ));
    }
    if (nu.mass() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "jump target mass must be 1, found {}",
            nu.mass()
        )));
    }
    // shift-invariance S ν = ν: (Sν)_{σ(j)} = ν_j
    for j in 0..n {
        let image = (j + 1) % n;
        if (nu.values()[image] - nu.values()[j]).abs() > 1e-12 {
            return Err(Error::InvalidArgument(
                "jump target must be invariant under the cell shift".into(),
            ));
        }
    }
    Ok(PdmpModel {
        space,
        jump_rate,
        jump_target: nu,
    })
}

/// Pure rotation: the jump part is absent.
pub fn build_rotation(n: usize) -> Result<PdmpModel> {
    let uniform = vec![1.0; n]; // density value 1 on cells of mass 1/n
    build_pdmp(n, 0.0, uniform)
}

#[derive(Debug, Clone)]
pub enum Model {
    Ctmc(CtmcModel),
    Dtmc(DtmcModel),
    Pdmp(PdmpModel),
}

impl Model {
    pub fn space(&self) -> &StateSpace {
        match self {
            Model::Ctmc(m) => m.space(),
            Model::Dtmc(m) => m.space(),
            Model::Pdmp(m) => m.space(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::Ctmc(_) => "ctmc",
            Model::Dtmc(_) => "dtmc",
            Model::Pdmp(_) => "pdmp",
        }
    }

    /// Whether the semigroup operators carry a nonzero kernel part.
    /// Rate-matrix and step-matrix semigroups are pure kernel operators;
    /// for the transport model this requires a positive jump rate.
    pub fn has_kernel_part(&self) -> bool {
        match self {
            Model::Ctmc(_) | Model::Dtmc(_) => true,
            Model::Pdmp(m) => m.jump_rate() > 0.0,
        }
    }
}

impl From<CtmcModel> for Model {
    fn from(m: CtmcModel) -> Self {
        Model::Ctmc(m)
    }
}

impl From<DtmcModel> for Model {
    fn from(m: DtmcModel) -> Self {
        Model::Dtmc(m)
    }
}

impl From<PdmpModel> for Model {
    fn from(m: PdmpModel) -> Self {
        Model::Pdmp(m)
    }
}

/// Rate-matrix model with a designated atom cell of strictly positive mass.
#[derive(Debug, Clone)]
pub struct AtomModel {
    pub ctmc: CtmcModel,
    pub atom: usize,
}

/// Directed adjacency of the model: edge `j → i` whenever mass can move from
/// cell `j` to cell `i` in one generator application (rates, step entries, or
/// flow/jump edges for the transport model).
fn adjacency(model: &Model) -> Vec<Vec<bool>> {
    let n = model.space().n();
    let mut adj = vec![vec![false; n]; n];
    match model {
        Model::Ctmc(m) => {
            for j in 0..n {
                for i in 0..n {
                    if i != j && m.rates()[(i, j)] > 0.0 {
                        adj[j][i] = true;
                    }
                }
            }
        }
        Model::Dtmc(m) => {
            for j in 0..n {
                for i in 0..n {
                    if i != j && m.step().matrix()[(i, j)] > 0.0 {
                        adj[j][i] = true;
                    }
                }
            }
        }
        Model::Pdmp(m) => {
            for j in 0..n {
                adj[j][m.shift(j)] = true;
                if m.jump_rate() > 0.0 {
                    for i in 0..n {
                        if m.jump_target().values()[i] > 0.0 && i != j {
                            adj[j][i] = true;
                        }
                    }
                }
            }
        }
    }
    adj
}

fn reachable(adj: &[Vec<bool>], start: usize, transpose: bool) -> Vec<bool> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            let edge = if transpose { adj[v][u] } else { adj[u][v] };
            if edge && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

fn strongly_connected(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    if n <= 1 {
        return true;
    }
    reachable(adj, 0, false).iter().all(|&r| r)
        && reachable(adj, 0, true).iter().all(|&r| r)
}

/// Strong connectivity of the transition graph; equivalent to semigroup
/// irreducibility in finite dimension.
pub fn is_irreducible(model: &Model) -> bool {
    strongly_connected(&adjacency(model))
}

/// Strong connectivity of the transposed graph (irreducibility of the dual
/// semigroup). In finite dimension this coincides with [`is_irreducible`];
/// both directions are checked explicitly all the same.
pub fn is_dual_irreducible(model: &Model) -> bool {
    let adj = adjacency(model);
    let n = adj.len();
    let mut t = vec![vec![false; n]; n];
    for j in 0..n {
        for i in 0..n {
            t[i][j] = adj[j][i];
        }
    }
    strongly_connected(&t)
}

/// Reproducible random irreducible rate-matrix model. A Hamiltonian cycle of
/// rates is always inserted so irreducibility holds by construction; extra
/// edges appear with probability `density`.
pub fn random_irreducible_ctmc(n: usize, density: f64, seed: u64) -> Result<CtmcModel> {
    if n < 2 {
        return Err(Error::InvalidArgument(
            "random model needs at least two cells".into(),
        ));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "density must lie in (0, 1], found {density}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let weights: Vec<f64> = (0..n).map(|_| rng.uniform(0.5, 2.0)).collect();
    let space = StateSpace::new(weights)?;
    let mut q = DMatrix::zeros(n, n);
    for j in 0..n {
        q[((j + 1) % n, j)] = rng.uniform(0.5, 1.5);
    }
    for j in 0..n {
        for i in 0..n {
            if i == j || i == (j + 1) % n {
                continue;
            }
            if rng.next_f64() < density {
                q[(i, j)] = rng.uniform(0.1, 1.0);
            }
        }
    }
    for j in 0..n {
        let off: f64 = (0..n)
            .filter(|&i| i != j)
            .map(|i| space.weight(i) * q[(i, j)])
            .sum();
        q[(j, j)] = -off / space.weight(j);
    }
    build_ctmc(space, q)
}

/// Seeded rate-matrix model with a designated atom cell (index 0) whose mass
/// is drawn separately; the inserted cycle guarantees a positive return rate.
pub fn random_atom_model(n: usize, density: f64, seed: u64) -> Result<AtomModel> {
    let base = random_irreducible_ctmc(n, density, seed)?;
    let mut rng = SplitMix64::new(seed ^ 0xA70E_A70E_A70E_A70E);
    let mut weights = base.space().weights().to_vec();
    weights[0] = rng.uniform(1.0, 3.0);
    let space = StateSpace::new(weights)?;
    let n = space.n();
    let mut q = base.rates().clone();
    // re-balance diagonals for the new masses
    for j in 0..n {
        let off: f64 = (0..n)
            .filter(|&i| i != j)
            .map(|i| space.weight(i) * q[(i, j)])
            .sum();
        q[(j, j)] = -off / space.weight(j);
    }
    Ok(AtomModel {
        ctmc: build_ctmc(space, q)?,
        atom: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix64_reference_vectors() {
        // First outputs of the public-domain splitmix64 with state 0.
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(rng.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn build_ctmc_examples() {
        let s = StateSpace::unit(2).unwrap();
        assert!(build_ctmc_from_rows(
            s.clone(),
            &[vec![-1.0, 1.0], vec![1.0, -1.0]]
        )
        .is_ok());
        // zero generator gives the identity semigroup
        assert!(build_ctmc_from_rows(s.clone(), &[vec![0.0, 0.0], vec![0.0, 0.0]]).is_ok());
        // mass leak in column 0
        let err = build_ctmc_from_rows(s.clone(), &[vec![-1.0, 0.0], vec![0.0, 0.0]]);
        assert!(matches!(err, Err(Error::MassConservation { column: 0, .. })));
        // negative off-diagonal rate
        let err = build_ctmc_from_rows(s, &[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        assert!(matches!(err, Err(Error::NegativeEntry { .. })));
    }

    #[test]
    fn irreducibility_examples() {
        let s = StateSpace::unit(2).unwrap();
        let m = build_ctmc_from_rows(s, &[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        assert!(is_irreducible(&Model::Ctmc(m)));

        // block-diagonal on 4 states: two invariant ideals
        let s4 = StateSpace::unit(4).unwrap();
        let m = build_ctmc_from_rows(
            s4,
            &[
                vec![-1.0, 1.0, 0.0, 0.0],
                vec![1.0, -1.0, 0.0, 0.0],
                vec![0.0, 0.0, -1.0, 1.0],
                vec![0.0, 0.0, 1.0, -1.0],
            ],
        )
        .unwrap();
        let model = Model::Ctmc(m);
        assert!(!is_irreducible(&model));
        assert!(!is_dual_irreducible(&model));

        // 3-state cyclic shift DTMC
        let s3 = StateSpace::unit(3).unwrap();
        let shift = KernelOperator::from_rows(
            s3,
            &[
                vec![0.0, 0.0, 1.0],
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
            ],
        )
        .unwrap();
        let m = build_dtmc(shift).unwrap();
        assert!(is_irreducible(&Model::Dtmc(m)));
    }

    #[test]
    fn random_ctmc_is_deterministic_and_valid() {
        let a = random_irreducible_ctmc(5, 0.3, 7).unwrap();
        let b = random_irreducible_ctmc(5, 0.3, 7).unwrap();
        assert_eq!(a.rates(), b.rates());
        assert_eq!(a.space().weights(), b.space().weights());
        assert!(is_irreducible(&Model::Ctmc(a.clone())));
        // re-validation passes
        assert!(build_ctmc(a.space().clone(), a.rates().clone()).is_ok());
    }

    #[test]
    fn pdmp_validation() {
        assert!(build_pdmp(4, 1.0, vec![1.0; 4]).is_ok());
        let rot = build_rotation(4).unwrap();
        assert_eq!(rot.jump_rate(), 0.0);
        // not shift-invariant
        let err = build_pdmp(4, 1.0, vec![4.0, 0.0, 0.0, 0.0]);
        assert!(err.is_err());
        // wrong mass
        assert!(build_pdmp(4, 1.0, vec![2.0; 4]).is_err());
    }

    #[test]
    fn atom_model_has_positive_mass_and_return() {
        for seed in 0..5 {
            let am = random_atom_model(6, 0.4, seed).unwrap();
            assert!(am.ctmc.space().weight(am.atom) > 0.0);
            assert!(is_irreducible(&Model::Ctmc(am.ctmc.clone())));
            // positive return rate into the atom
            let n = am.ctmc.space().n();
            assert!((0..n).any(|j| j != am.atom && am.ctmc.rates()[(am.atom, j)] > 0.0));
        }
    }
}
