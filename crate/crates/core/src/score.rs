//! Exact discrete scores `s_t(x)_{i,x̂} = q_t(x^{\i}⊙x̂) / q_t(x)`, the
//! generalized I-divergence, and the score-bound quantities.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::forward_marginal_dense;
use crate::state::{DenseDistribution, Distribution, SequenceState, StateSpace};

/// The `d(S−1)` neighbor ratios at one anchor state, in canonical neighbor
/// order. Entries are positive whenever `t > 0`; at `t = 0` an entry is 0
/// for a neighbor outside the data support.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    space: StateSpace,
    anchor: usize,
    entries: Vec<f64>,
}

impl ScoreVector {
    pub fn new(space: StateSpace, anchor: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != space.neighbor_count() {
            return Err(Error::SizeMismatch(format!(
                "score vector has {} entries, expected {}",
                entries.len(),
                space.neighbor_count()
            )));
        }
        if anchor >= space.num_states() {
            return Err(Error::InvalidState(format!("anchor index {anchor} out of range")));
        }
        Ok(Self {
            space,
            anchor,
            entries,
        })
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    /// Entry for replacing position `dim` by `token`; `None` when `token`
    /// is the anchor's own token.
    pub fn get(&self, dim: usize, token: usize) -> Option<f64> {
        let current = self.space.token_at(self.anchor, dim);
        (token != current && token < self.space.alphabet())
            .then(|| self.entries[self.space.neighbor_slot(dim, current, token)])
    }

    pub fn sup_norm(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, &v| m.max(v))
    }
}

/// Total exit intensity `ŝ(x)_x`: the sum of all entries.
pub fn score_sum(s: &ScoreVector) -> f64 {
    s.entries().iter().sum()
}

/// Scores for every state at once, row-major `N × d(S−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    space: StateSpace,
    entries: Vec<f64>,
}

impl ScoreTable {
    pub fn new(space: StateSpace, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != space.num_states() * space.neighbor_count() {
            return Err(Error::SizeMismatch(format!(
                "score table has {} entries, expected {}",
                entries.len(),
                space.num_states() * space.neighbor_count()
            )));
        }
        Ok(Self { space, entries })
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    #[inline]
    pub fn row(&self, index: usize) -> &[f64] {
        let w = self.space.neighbor_count();
        &self.entries[index * w..(index + 1) * w]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn vector(&self, index: usize) -> ScoreVector {
        ScoreVector {
            space: self.space,
            anchor: index,
            entries: self.row(index).to_vec(),
        }
    }

    /// Per-state `ŝ(x)_x`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.space.num_states())
            .map(|i| self.row(i).iter().sum())
            .collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, &v| m.max(v))
    }

    pub fn map(mut self, f: impl Fn(f64) -> f64) -> Self {
        self.entries.iter_mut().for_each(|v| *v = f(*v));
        self
    }
}

/// The score map at one time, pinned to its exact forward marginal.
#[derive(Debug, Clone)]
pub struct ScoreField {
    marginal: DenseDistribution,
    t: f64,
}

impl ScoreField {
    pub fn new(p_data: &Distribution, t: f64) -> Result<Self> {
        Self::from_data(&p_data.to_dense()?, t)
    }

    pub fn from_data(p_data: &DenseDistribution, t: f64) -> Result<Self> {
        Ok(Self {
            marginal: forward_marginal_dense(p_data, t)?,
            t,
        })
    }

    pub fn marginal(&self) -> &DenseDistribution {
        &self.marginal
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Writes the score at `index` into `out` (length `d(S−1)`).
    #[inline]
    pub fn fill(&self, index: usize, out: &mut [f64]) -> Result<()> {
        let q = self.marginal.mass();
        let here = q[index];
        if !(here > 0.0) {
            return Err(Error::UndefinedScore { state: index });
        }
        self.marginal
            .space()
            .for_each_neighbor(index, |slot, _, _, nb| out[slot] = q[nb] / here);
        Ok(())
    }

    pub fn at_index(&self, index: usize) -> Result<ScoreVector> {
        let space = self.marginal.space();
        if index >= space.num_states() {
            return Err(Error::InvalidState(format!("index {index} out of range")));
        }
        let mut entries = vec![0.0; space.neighbor_count()];
        self.fill(index, &mut entries)?;
        Ok(ScoreVector {
            space,
            anchor: index,
            entries,
        })
    }

    pub fn at(&self, x: &SequenceState) -> Result<ScoreVector> {
        self.at_index(self.marginal.space().encode(x)?)
    }

    pub fn table(&self) -> Result<ScoreTable> {
        let space = self.marginal.space();
        let w = space.neighbor_count();
        let mut entries = vec![0.0; space.num_states() * w];
        for (index, row) in entries.chunks_exact_mut(w).enumerate() {
            self.fill(index, row)?;
        }
        Ok(ScoreTable { space, entries })
    }
}

pub fn exact_score(p_data: &Distribution, t: f64, x: &SequenceState) -> Result<ScoreVector> {
    ScoreField::new(p_data, t)?.at(x)
}

/// Uniform bound `1 + S/(e^t − 1)` on every exact score entry at `t > 0`.
pub fn score_upper_bound(alphabet: usize, t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("score bound needs t > 0, got {t}")));
    }
    Ok(1.0 + alphabet as f64 / t.exp_m1())
}

/// `L = max_{x,i,x̂} p(x^{\i}⊙x̂) / p(x)`; requires full support.
pub fn data_score_bound(p_data: &Distribution) -> Result<f64> {
    let dense = p_data.to_dense()?;
    dense.check_full_support()?;
    let field = ScoreField {
        marginal: dense,
        t: 0.0,
    };
    Ok(field.table()?.sup_norm())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Kappa {
    /// max/min of each position's data marginal.
    pub per_dim: Vec<f64>,
    /// Sum of squares of `per_dim`.
    pub sum_sq: f64,
}

pub fn kappa(p_data: &Distribution) -> Result<Kappa> {
    let marginals = match p_data {
        Distribution::Product(f) => f.marginals().to_vec(),
        Distribution::Dense(p) => p.marginals(),
    };
    let per_dim = marginals
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let lo = m.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = m.iter().cloned().fold(0.0, f64::max);
            if lo > 0.0 {
                Ok(hi / lo)
            } else {
                Err(Error::InvalidDistribution(format!(
                    "marginal {i} has a zero entry; kappa undefined"
                )))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let sum_sq = per_dim.iter().map(|k| k * k).sum();
    Ok(Kappa { per_dim, sum_sq })
}

/// One term `−a + b + a·log(a/b)` with `0·log 0 = 0`; `+∞` when `b = 0 < a`.
#[inline]
pub fn bregman_i_term(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        b
    } else if b == 0.0 {
        f64::INFINITY
    } else {
        -a + b + a * (a / b).ln()
    }
}

/// Generalized I-divergence `D_I(a ‖ b) = Σ_i (−a_i + b_i + a_i log(a_i/b_i))`.
pub fn bregman_i(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(format!(
            "I-divergence of vectors of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if let Some(v) = a.iter().chain(b).find(|v| !(**v >= 0.0)) {
        return Err(Error::param(
            "bregman_i",
            format!("entries must be nonnegative, got {v}"),
        ));
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| bregman_i_term(x, y)).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreMovement {
    pub per_entry: Vec<f64>,
    pub max: f64,
}

/// `|s_t(x) − s_{t_grid}(x)|` entrywise, for `0 < t ≤ t_grid`.
pub fn score_movement(
    p_data: &Distribution,
    t: f64,
    t_grid: f64,
    x: &SequenceState,
) -> Result<ScoreMovement> {
    if !(t > 0.0) || !(t <= t_grid) || !t_grid.is_finite() {
        return Err(Error::param(
            "t",
            format!("need 0 < t <= t_grid, got t = {t}, t_grid = {t_grid}"),
        ));
    }
    let dense = p_data.to_dense()?;
    let a = ScoreField::from_data(&dense, t)?.at(x)?;
    let b = ScoreField::from_data(&dense, t_grid)?.at(x)?;
    let per_entry: Vec<f64> = a
        .entries()
        .iter()
        .zip(b.entries())
        .map(|(u, v)| (u - v).abs())
        .collect();
    let max = per_entry.iter().cloned().fold(0.0, f64::max);
    Ok(ScoreMovement { per_entry, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::FactorizedDistribution;

    fn point0() -> Distribution {
        DenseDistribution::point_mass(StateSpace::new(2, 1).unwrap(), 0)
            .unwrap()
            .into()
    }

    #[test]
    fn uniform_scores_are_one() {
        let space = StateSpace::new(3, 2).unwrap();
        let u: Distribution = DenseDistribution::uniform(space).into();
        for &t in &[0.0, 0.3, 4.0] {
            for idx in 0..space.num_states() {
                let s = exact_score(&u, t, &space.decode(idx).unwrap()).unwrap();
                assert!(s.entries().iter().all(|&v| (v - 1.0).abs() < 1e-12));
                assert!((score_sum(&s) - 4.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn point_mass_scores_at_ln2() {
        let t = 2f64.ln();
        let s0 = exact_score(&point0(), t, &SequenceState::new(vec![0])).unwrap();
        let s1 = exact_score(&point0(), t, &SequenceState::new(vec![1])).unwrap();
        assert!((s0.entries()[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((s1.entries()[0] - 3.0).abs() < 1e-14);
        let bound = score_upper_bound(2, t).unwrap();
        assert!((bound - 3.0).abs() < 1e-14);
        assert!((s1.entries()[0] - bound).abs() < 1e-12);
        assert_eq!(score_sum(&s1), s1.entries()[0]);
        assert_eq!(s1.get(0, 0), Some(s1.entries()[0]));
        assert_eq!(s1.get(0, 1), None);
    }

    #[test]
    fn zero_mass_anchor_is_an_error() {
        let err = exact_score(&point0(), 0.0, &SequenceState::new(vec![1])).unwrap_err();
        assert!(matches!(err, Error::UndefinedScore { state: 1 }));
    }

    #[test]
    fn upper_bound_limits() {
        assert!((score_upper_bound(2, 50.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(score_upper_bound(2, 0.0).is_err());
        assert!(score_upper_bound(2, -1.0).is_err());
    }

    #[test]
    fn data_score_bound_cases() {
        let space = StateSpace::new(3, 2).unwrap();
        let u: Distribution = DenseDistribution::uniform(space).into();
        assert!((data_score_bound(&u).unwrap() - 1.0).abs() < 1e-12);
        let p: Distribution = DenseDistribution::new(StateSpace::new(2, 1).unwrap(), vec![0.75, 0.25])
            .unwrap()
            .into();
        assert!((data_score_bound(&p).unwrap() - 3.0).abs() < 1e-12);
        assert!(matches!(
            data_score_bound(&point0()),
            Err(Error::NoFullSupport { .. })
        ));
    }

    #[test]
    fn kappa_cases() {
        let space = StateSpace::new(4, 3).unwrap();
        let k = kappa(&DenseDistribution::uniform(space).into()).unwrap();
        assert!(k.per_dim.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!((k.sum_sq - 3.0).abs() < 1e-12);

        let p: Distribution = DenseDistribution::new(StateSpace::new(2, 1).unwrap(), vec![0.75, 0.25])
            .unwrap()
            .into();
        let k = kappa(&p).unwrap();
        assert!((k.per_dim[0] - 3.0).abs() < 1e-12);
        assert!((k.sum_sq - 9.0).abs() < 1e-12);

        let m = vec![0.5, 0.3, 0.2];
        let k1 = kappa(&FactorizedDistribution::iid(m.clone(), 1).unwrap().into()).unwrap();
        let k4 = kappa(&FactorizedDistribution::iid(m, 4).unwrap().into()).unwrap();
        assert!((k4.sum_sq - 4.0 * k1.per_dim[0].powi(2)).abs() < 1e-12);
        assert!(kappa(&point0()).is_err());
    }

    #[test]
    fn bregman_examples() {
        assert!((bregman_i(&[1.0], &[2.0]).unwrap() - (1.0 - 2f64.ln())).abs() < 1e-15);
        assert!((bregman_i(&[2.0], &[1.0]).unwrap() - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!((bregman_i(&[1.0], &[2.0]).unwrap() - 0.306853).abs() < 1e-6);
        assert!((bregman_i(&[2.0], &[1.0]).unwrap() - 0.386294).abs() < 1e-6);
        assert_eq!(bregman_i(&[0.0, 1.0], &[0.5, 1.0]).unwrap(), 0.5);
        assert_eq!(bregman_i(&[1.0], &[0.0]).unwrap(), f64::INFINITY);
        assert_eq!(bregman_i(&[0.0], &[0.0]).unwrap(), 0.0);
        assert!(bregman_i(&[1.0], &[1.0, 2.0]).is_err());
        assert!(bregman_i(&[-1.0], &[1.0]).is_err());
    }

    #[test]
    fn movement_examples() {
        let space = StateSpace::new(2, 2).unwrap();
        let u: Distribution = DenseDistribution::uniform(space).into();
        let m = score_movement(&u, 0.3, 0.9, &SequenceState::new(vec![0, 1])).unwrap();
        assert!(m.max.abs() < 1e-12);

        // s_t(1) = (1 + e^{-t}) / (1 - e^{-t}) for point mass at 0, S = 2
        let s = |t: f64| (1.0 + (-t).exp()) / (1.0 - (-t).exp());
        let m = score_movement(&point0(), 0.5, 0.75, &SequenceState::new(vec![1])).unwrap();
        let want = s(0.5) - s(0.75);
        assert!((m.max - want).abs() < 1e-12);
        assert!((m.max - 1.2924779).abs() < 1e-7);

        assert!(score_movement(&point0(), 0.8, 0.5, &SequenceState::new(vec![1])).is_err());
        assert!(score_movement(&point0(), 0.0, 0.5, &SequenceState::new(vec![1])).is_err());
    }

    #[test]
    fn movement_is_first_order_in_the_gap() {
        let f = FactorizedDistribution::new(vec![vec![0.7, 0.2, 0.1], vec![0.25, 0.5, 0.25]]).unwrap();
        let p: Distribution = f.into();
        let x = SequenceState::new(vec![2, 0]);
        for &t in &[0.5, 1.0, 2.0] {
            let a = score_movement(&p, t, t + 0.1, &x).unwrap().max;
            let b = score_movement(&p, t, t + 0.05, &x).unwrap().max;
            let ratio = b / a;
            assert!((0.4..=0.6).contains(&ratio), "t = {t}: ratio {ratio}");
        }
    }

    #[test]
    fn reciprocity_of_scores() {
        let p: Distribution = FactorizedDistribution::new(vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.2, 0.6]])
            .unwrap()
            .into();
        let field = ScoreField::new(&p, 0.4).unwrap();
        let space = p.space().unwrap();
        for idx in 0..space.num_states() {
            let s = field.at_index(idx).unwrap();
            space.for_each_neighbor(idx, |slot, dim, _, nb| {
                let back = field.at_index(nb).unwrap();
                let v = back.get(dim, space.token_at(idx, dim)).unwrap();
                assert!((s.entries()[slot] * v - 1.0).abs() < 1e-12);
            });
        }
    }
}
