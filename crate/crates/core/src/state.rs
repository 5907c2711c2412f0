//! The sequence space `[S]^d`, its mixed-radix indexing, and exact
//! probability vectors over it.
//!
//! Tokens are 0-based. Dimension 0 is the least-significant digit of the
//! state index, so `index = Σ_i token_i · S^i`. Every module and file
//! format in this crate uses that single encode order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on `S^d`: dense vectors of this length stay in memory.
pub const DEFAULT_MAX_STATES: usize = 1 << 24;

/// Absolute tolerance on the total mass of a probability vector.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// The space `[S]^d`: `alphabet` tokens per position, `dims` positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateSpace {
    alphabet: usize,
    dims: usize,
    size: usize,
}

impl StateSpace {
    pub fn new(alphabet: usize, dims: usize) -> Result<Self> {
        Self::with_cap(alphabet, dims, DEFAULT_MAX_STATES)
    }

    pub fn with_cap(alphabet: usize, dims: usize, max_states: usize) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::InvalidSpace(format!(
                "alphabet size must be >= 2, got {alphabet}"
            )));
        }
        if dims < 1 {
            return Err(Error::InvalidSpace("sequence length must be >= 1".into()));
        }
        let mut size = 1usize;
        for _ in 0..dims {
            size = size
                .checked_mul(alphabet)
                .filter(|&n| n <= max_states)
                .ok_or_else(|| {
                    Error::InvalidSpace(format!(
                        "{alphabet}^{dims} states exceeds the addressability cap {max_states}"
                    ))
                })?;
        }
        Ok(Self {
            alphabet,
            dims,
            size,
        })
    }

    /// Token alphabet size `S`.
    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    /// Sequence length `d`.
    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Total number of states `S^d`.
    pub fn num_states(&self) -> usize {
        self.size
    }

    /// Number of Hamming-1 neighbors of any state, `d(S-1)`.
    pub fn neighbor_count(&self) -> usize {
        self.dims * (self.alphabet - 1)
    }

    /// Place value `S^dim` of a dimension.
    #[inline]
    pub fn stride(&self, dim: usize) -> usize {
        self.alphabet.pow(dim as u32)
    }

    #[inline]
    pub fn token_at(&self, index: usize, dim: usize) -> usize {
        (index / self.stride(dim)) % self.alphabet
    }

    pub fn encode(&self, state: &SequenceState) -> Result<usize> {
        self.validate(state)?;
        Ok(state
            .tokens()
            .iter()
            .rev()
            .fold(0usize, |acc, &tok| acc * self.alphabet + tok))
    }

    pub fn decode(&self, index: usize) -> Result<SequenceState> {
        if index >= self.size {
            return Err(Error::InvalidState(format!(
                "index {index} out of range for {} states",
                self.size
            )));
        }
        let mut rest = index;
        let tokens = (0..self.dims)
            .map(|_| {
                let tok = rest % self.alphabet;
                rest /= self.alphabet;
                tok
            })
            .collect();
        Ok(SequenceState(tokens))
    }

    pub fn validate(&self, state: &SequenceState) -> Result<()> {
        if state.len() != self.dims {
            return Err(Error::InvalidState(format!(
                "expected {} tokens, got {}",
                self.dims,
                state.len()
            )));
        }
        if let Some((i, &tok)) = state
            .tokens()
            .iter()
            .enumerate()
            .find(|(_, &t)| t >= self.alphabet)
        {
            return Err(Error::InvalidState(format!(
                "token {tok} at position {i} is outside [0, {})",
                self.alphabet
            )));
        }
        Ok(())
    }

    /// Position of the neighbor `(dim, token)` of a state whose `dim`-th
    /// token is `current`, in canonical order (dimension ascending, then
    /// replacement token ascending with `current` skipped).
    #[inline]
    pub fn neighbor_slot(&self, dim: usize, current: usize, token: usize) -> usize {
        debug_assert_ne!(current, token);
        dim * (self.alphabet - 1) + if token < current { token } else { token - 1 }
    }

    /// Calls `f(slot, dim, token, neighbor_index)` for every Hamming-1
    /// neighbor of `index`, in canonical order.
    #[inline]
    pub fn for_each_neighbor(&self, index: usize, mut f: impl FnMut(usize, usize, usize, usize)) {
        let mut stride = 1usize;
        let mut slot = 0usize;
        for dim in 0..self.dims {
            let current = (index / stride) % self.alphabet;
            let base = index - current * stride;
            for token in (0..self.alphabet).filter(|&t| t != current) {
                f(slot, dim, token, base + token * stride);
                slot += 1;
            }
            stride *= self.alphabet;
        }
    }

    pub fn neighbors(&self, state: &SequenceState) -> Vec<Neighbor> {
        let mut out = Vec::with_capacity(self.neighbor_count());
        for (dim, &current) in state.tokens().iter().enumerate() {
            for token in (0..self.alphabet).filter(|&t| t != current) {
                out.push(Neighbor {
                    dim,
                    token,
                    state: state.replaced(dim, token),
                });
            }
        }
        out
    }

    /// Number of positions at which two state indices differ.
    pub fn hamming(&self, a: usize, b: usize) -> usize {
        (0..self.dims)
            .filter(|&i| self.token_at(a, i) != self.token_at(b, i))
            .count()
    }
}

/// A sequence `x = x^1 … x^d` of 0-based tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SequenceState(Vec<usize>);

impl SequenceState {
    pub fn new(tokens: Vec<usize>) -> Self {
        Self(tokens)
    }

    pub fn tokens(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The state with position `dim` replaced by `token`.
    pub fn replaced(&self, dim: usize, token: usize) -> Self {
        let mut tokens = self.0.clone();
        tokens[dim] = token;
        Self(tokens)
    }

    pub fn hamming(&self, other: &Self) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

impl From<Vec<usize>> for SequenceState {
    fn from(tokens: Vec<usize>) -> Self {
        Self(tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighbor {
    pub dim: usize,
    pub token: usize,
    pub state: SequenceState,
}

fn check_probability_vector(what: &str, mass: &[f64]) -> Result<f64> {
    if let Some((i, &m)) = mass
        .iter()
        .enumerate()
        .find(|(_, m)| !m.is_finite() || **m < 0.0)
    {
        return Err(Error::InvalidDistribution(format!(
            "{what}: entry {i} = {m} is not a finite nonnegative number"
        )));
    }
    let total: f64 = mass.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidDistribution(format!(
            "{what}: entries sum to {total}, not 1"
        )));
    }
    Ok(total)
}

/// Exact probability mass over all `S^d` states, in encode order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseDistribution {
    space: StateSpace,
    mass: Vec<f64>,
}

impl DenseDistribution {
    /// Validates and renormalizes once. Entries must sum to 1 within
    /// [`NORMALIZATION_TOL`].
    pub fn new(space: StateSpace, mut mass: Vec<f64>) -> Result<Self> {
        if mass.len() != space.num_states() {
            return Err(Error::SizeMismatch(format!(
                "mass has {} entries, space has {} states",
                mass.len(),
                space.num_states()
            )));
        }
        let total = check_probability_vector("dense mass", &mass)?;
        mass.iter_mut().for_each(|m| *m /= total);
        Ok(Self { space, mass })
    }

    /// Validates like [`DenseDistribution::new`] but keeps the entries
    /// bit-for-bit. Used to replay a mass recorded from an earlier run,
    /// where a second rescaling could move the last bits.
    pub(crate) fn recorded(space: StateSpace, mass: Vec<f64>) -> Result<Self> {
        let checked = Self::new(space, mass.clone())?;
        Ok(Self { mass, ..checked })
    }

    /// Normalizes an arbitrary nonnegative weight vector. Used for the
    /// outputs of propagation, which are stochastic up to rounding.
    pub(crate) fn from_weights(space: StateSpace, mut mass: Vec<f64>) -> Self {
        debug_assert_eq!(mass.len(), space.num_states());
        let total: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|m| *m /= total);
        Self { space, mass }
    }

    pub fn uniform(space: StateSpace) -> Self {
        let n = space.num_states();
        Self {
            space,
            mass: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(space: StateSpace, index: usize) -> Result<Self> {
        if index >= space.num_states() {
            return Err(Error::InvalidState(format!(
                "point-mass index {index} out of range"
            )));
        }
        let mut mass = vec![0.0; space.num_states()];
        mass[index] = 1.0;
        Ok(Self { space, mass })
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.mass[index]
    }

    pub fn into_mass(self) -> Vec<f64> {
        self.mass
    }

    /// Marginal law of one position.
    pub fn marginal(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.space.alphabet()];
        for (idx, &m) in self.mass.iter().enumerate() {
            out[self.space.token_at(idx, dim)] += m;
        }
        out
    }

    pub fn marginals(&self) -> Vec<Vec<f64>> {
        (0..self.space.dims()).map(|i| self.marginal(i)).collect()
    }

    /// Errors with the first zero-mass state, if any.
    pub fn check_full_support(&self) -> Result<()> {
        match self.mass.iter().position(|&m| m <= 0.0) {
            Some(state) => Err(Error::NoFullSupport { state }),
            None => Ok(()),
        }
    }

    pub fn has_full_support(&self) -> bool {
        self.check_full_support().is_ok()
    }
}

/// A product measure given by one marginal per position.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedDistribution {
    marginals: Vec<Vec<f64>>,
}

impl FactorizedDistribution {
    pub fn new(mut marginals: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = marginals.first() else {
            return Err(Error::InvalidDistribution("no marginals given".into()));
        };
        let alphabet = first.len();
        for (i, m) in marginals.iter_mut().enumerate() {
            if m.len() != alphabet {
                return Err(Error::SizeMismatch(format!(
                    "marginal {i} has {} entries, expected {alphabet}",
                    m.len()
                )));
            }
            let total = check_probability_vector(&format!("marginal {i}"), m)?;
            m.iter_mut().for_each(|p| *p /= total);
        }
        Ok(Self { marginals })
    }

    /// `dims` copies of one marginal.
    pub fn iid(marginal: Vec<f64>, dims: usize) -> Result<Self> {
        Self::new(vec![marginal; dims])
    }

    pub fn marginals(&self) -> &[Vec<f64>] {
        &self.marginals
    }

    pub fn alphabet(&self) -> usize {
        self.marginals[0].len()
    }

    pub fn dims(&self) -> usize {
        self.marginals.len()
    }

    pub fn space(&self) -> Result<StateSpace> {
        StateSpace::new(self.alphabet(), self.dims())
    }
}

/// Materializes a product measure as a dense vector:
/// `mass(x) = Π_i marginal_i(x^i)`.
pub fn expand_product(f: &FactorizedDistribution, space: StateSpace) -> Result<DenseDistribution> {
    if f.dims() != space.dims() || f.alphabet() != space.alphabet() {
        return Err(Error::SizeMismatch(format!(
            "{} marginals over {} tokens do not match S={}, d={}",
            f.dims(),
            f.alphabet(),
            space.alphabet(),
            space.dims()
        )));
    }
    // Grow the tensor one dimension at a time; dimension 0 varies fastest.
    let mut mass = vec![1.0];
    for marginal in f.marginals() {
        let mut next = Vec::with_capacity(mass.len() * marginal.len());
        for &p in marginal {
            next.extend(mass.iter().map(|&m| m * p));
        }
        mass = next;
    }
    Ok(DenseDistribution::from_weights(space, mass))
}

/// Either representation of a data law.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Dense(DenseDistribution),
    Product(FactorizedDistribution),
}

impl Distribution {
    pub fn space(&self) -> Result<StateSpace> {
        match self {
            Distribution::Dense(p) => Ok(p.space()),
            Distribution::Product(f) => f.space(),
        }
    }

    pub fn to_dense(&self) -> Result<DenseDistribution> {
        match self {
            Distribution::Dense(p) => Ok(p.clone()),
            Distribution::Product(f) => expand_product(f, f.space()?),
        }
    }
}

impl From<DenseDistribution> for Distribution {
    fn from(p: DenseDistribution) -> Self {
        Distribution::Dense(p)
    }
}

impl From<FactorizedDistribution> for Distribution {
    fn from(f: FactorizedDistribution) -> Self {
        Distribution::Product(f)
    }
}

/// On-disk JSON form:
/// `{"S":int,"d":int,"kind":"dense"|"product","mass":[...]|"marginals":[[...]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionFile {
    #[serde(rename = "S")]
    pub alphabet: usize,
    pub d: usize,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginals: Option<Vec<Vec<f64>>>,
}

impl DistributionFile {
    pub fn into_distribution(self) -> Result<Distribution> {
        let space = StateSpace::new(self.alphabet, self.d)?;
        match (self.kind.as_str(), self.mass, self.marginals) {
            ("dense", Some(mass), _) => Ok(DenseDistribution::new(space, mass)?.into()),
            ("product", _, Some(marginals)) => {
                let f = FactorizedDistribution::new(marginals)?;
                if f.dims() != space.dims() || f.alphabet() != space.alphabet() {
                    return Err(Error::SizeMismatch(
                        "marginals do not match the declared S and d".into(),
                    ));
                }
                Ok(f.into())
            }
            ("dense", None, _) => Err(Error::InvalidDistribution(
                "kind \"dense\" requires a \"mass\" array".into(),
            )),
            ("product", _, None) => Err(Error::InvalidDistribution(
                "kind \"product\" requires a \"marginals\" array".into(),
            )),
            (other, _, _) => Err(Error::InvalidDistribution(format!(
                "unknown kind {other:?}; expected \"dense\" or \"product\""
            ))),
        }
    }

    pub fn from_distribution(dist: &Distribution) -> Result<Self> {
        let space = dist.space()?;
        Ok(match dist {
            Distribution::Dense(p) => Self {
                alphabet: space.alphabet(),
                d: space.dims(),
                kind: "dense".into(),
                mass: Some(p.mass().to_vec()),
                marginals: None,
            },
            Distribution::Product(f) => Self {
                alphabet: space.alphabet(),
                d: space.dims(),
                kind: "product".into(),
                mass: None,
                marginals: Some(f.marginals().to_vec()),
            },
        })
    }
}

pub fn load_distribution(path: &Path) -> Result<Distribution> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let file: DistributionFile = serde_json::from_str(&text).map_err(|e| Error::Json {
        context: format!("parsing {}", path.display()),
        source: e,
    })?;
    file.into_distribution()
}

pub fn save_distribution(dist: &Distribution, path: &Path) -> Result<()> {
    let file = DistributionFile::from_distribution(dist)?;
    let text = serde_json::to_string(&file).map_err(|e| Error::Json {
        context: "serializing distribution".into(),
        source: e,
    })?;
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
