//! Data-law specifications accepted by `--dist`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand_distr::{Distribution as _, Gamma};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::state::{load_distribution, DenseDistribution, Distribution, StateSpace};

/// Reserved trial coordinate for data generation, so data draws never
/// share a stream with sampler trials.
const DATA_STREAM_TRIAL: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Uniform,
    /// Point mass at a state index.
    Point(usize),
    /// Product law from a distribution file.
    Product(PathBuf),
    /// Dense law with i.i.d. `Gamma(alpha)` weights over all states,
    /// normalized; the draw is seeded.
    Dirichlet { alpha: f64, seed: u64 },
    /// Dense law from a distribution file.
    Dense(PathBuf),
    /// Any distribution file.
    File(PathBuf),
}

impl FromStr for DataSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::config("dist", format!("{why}: {s:?}"));
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        match head {
            "uniform" if rest.is_empty() => Ok(DataSpec::Uniform),
            "point" => rest.parse().map(DataSpec::Point).map_err(|_| bad("expected point:<state index>")),
            "product" if !rest.is_empty() => Ok(DataSpec::Product(rest.into())),
            "dense" if !rest.is_empty() => Ok(DataSpec::Dense(rest.into())),
            "dirichlet" => {
                let (a, seed) = rest.split_once(':').ok_or_else(|| bad("expected dirichlet:<alpha>:<seed>"))?;
                let alpha: f64 = a.parse().map_err(|_| bad("bad alpha"))?;
                if !(alpha > 0.0) || !alpha.is_finite() {
                    return Err(bad("alpha must be positive"));
                }
                let seed = seed.parse().map_err(|_| bad("bad seed"))?;
                Ok(DataSpec::Dirichlet { alpha, seed })
            }
            _ if s.ends_with(".json") => Ok(DataSpec::File(s.into())),
            _ => Err(bad("unknown data spec (uniform | point:i | product:file | dense:file | dirichlet:alpha:seed | file.json)")),
        }
    }
}

/// Draws a dense law with i.i.d. `Gamma(alpha, 1)` weights.
pub fn dirichlet_dense(space: StateSpace, alpha: f64, seed: u64) -> Result<DenseDistribution> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::param("alpha", e.to_string()))?;
    let mut rng = stream_rng(seed, DATA_STREAM_TRIAL, 0);
    let mut weights: Vec<f64> = (0..space.num_states()).map(|_| gamma.sample(&mut rng)).collect();
    // Gamma draws with tiny alpha can underflow; keep the law normalizable.
    if weights.iter().all(|&w| w == 0.0) {
        weights[0] = 1.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    DenseDistribution::new(space, weights)
}

fn check_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::config("dist", format!("file {} does not exist", path.display())));
    }
    Ok(())
}

fn check_space(dist: &Distribution, alphabet: Option<usize>, dims: Option<usize>) -> Result<()> {
    let space = dist.space()?;
    if alphabet.is_some_and(|s| s != space.alphabet()) || dims.is_some_and(|d| d != space.dims()) {
        return Err(Error::config(
            "dist",
            format!(
                "file describes S={}, d={} but S={:?}, d={:?} was requested",
                space.alphabet(),
                space.dims(),
                alphabet,
                dims
            ),
        ));
    }
    Ok(())
}

/// A resolved data law plus the realized mass for randomly drawn laws.
pub struct ResolvedData {
    pub dist: Distribution,
    pub drawn_mass: Option<Vec<f64>>,
}

/// Builds the data law. `recorded_mass` replays an earlier random draw.
pub fn resolve(
    spec: &DataSpec,
    alphabet: Option<usize>,
    dims: Option<usize>,
    recorded_mass: Option<&[f64]>,
) -> Result<ResolvedData> {
    let space = || -> Result<StateSpace> {
        match (alphabet, dims) {
            (Some(s), Some(d)) => StateSpace::new(s, d),
            _ => Err(Error::config("S/d", "--S and --d are required for this data spec")),
        }
    };
    let plain = |dist: Distribution| ResolvedData { dist, drawn_mass: None };
    Ok(match spec {
        DataSpec::Uniform => plain(DenseDistribution::uniform(space()?).into()),
        DataSpec::Point(i) => plain(DenseDistribution::point_mass(space()?, *i)?.into()),
        DataSpec::Dirichlet { alpha, seed } => {
            let space = space()?;
            let dense = match recorded_mass {
                Some(mass) => DenseDistribution::recorded(space, mass.to_vec())?,
                None => dirichlet_dense(space, *alpha, *seed)?,
            };
            ResolvedData {
                drawn_mass: Some(dense.mass().to_vec()),
                dist: dense.into(),
            }
        }
        DataSpec::Product(path) | DataSpec::Dense(path) | DataSpec::File(path) => {
            check_file(path)?;
            let dist = load_distribution(path)?;
            match (spec, &dist) {
                (DataSpec::Product(_), Distribution::Dense(_)) => {
                    return Err(Error::config("dist", "product: expects a file of kind \"product\""))
                }
                (DataSpec::Dense(_), Distribution::Product(_)) => {
                    return Err(Error::config("dist", "dense: expects a file of kind \"dense\""))
                }
                _ => {}
            }
            check_space(&dist, alphabet, dims)?;
            plain(dist)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!("uniform".parse::<DataSpec>().unwrap(), DataSpec::Uniform);
        assert_eq!("point:5".parse::<DataSpec>().unwrap(), DataSpec::Point(5));
        assert_eq!(
            "dirichlet:0.5:9".parse::<DataSpec>().unwrap(),
            DataSpec::Dirichlet { alpha: 0.5, seed: 9 }
        );
        assert_eq!("product:a.json".parse::<DataSpec>().unwrap(), DataSpec::Product("a.json".into()));
        assert_eq!("x/y.json".parse::<DataSpec>().unwrap(), DataSpec::File("x/y.json".into()));
        for bad in ["point:x", "dirichlet:1", "dirichlet:-1:2", "gauss", "uniform:3"] {
            assert!(bad.parse::<DataSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn dirichlet_is_seeded_and_replayable() {
        let space = StateSpace::new(3, 2).unwrap();
        let a = dirichlet_dense(space, 1.0, 4).unwrap();
        assert_eq!(a, dirichlet_dense(space, 1.0, 4).unwrap());
        assert_ne!(a, dirichlet_dense(space, 1.0, 5).unwrap());
        let spec = DataSpec::Dirichlet { alpha: 1.0, seed: 4 };
        let r = resolve(&spec, Some(3), Some(2), None).unwrap();
        let replay = resolve(&spec, Some(3), Some(2), r.drawn_mass.as_deref()).unwrap();
        assert_eq!(r.dist, replay.dist);
    }

    #[test]
    fn missing_space_or_file_is_a_config_error() {
        assert!(matches!(resolve(&DataSpec::Uniform, Some(2), None, None), Err(Error::Config { .. })));
        assert!(matches!(
            resolve(&DataSpec::File("/nonexistent/p.json".into()), None, None, None),
            Err(Error::Config { .. })
        ));
    }
}
