//! Last-layer unlearning behind a frozen feature map.
//!
//! Inputs pass through a deterministic [`FeatureMap`]; a ridge head is trained
//! on the encoded rows and every unlearning method operates on that head.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::load_feature_table;
use crate::error::{Error, Result};
use crate::leverage::HatState;
use crate::model::{accuracy, Dataset, DeletionRequest, RidgeModel};
use crate::numerics::{check_len, DenseMatrix};
use crate::unlearn::{run_method, Method, MethodOptions, UnlearnResult};

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMap {
    Identity,
    /// `x ↦ xW/√d_out` with `W` a seeded standard Gaussian `d_in × d_out` matrix.
    RandomProjection { seed: u64, weights: DenseMatrix },
    /// Row `i` of the dataset is replaced by row `i` of the table.
    PrecomputedTable { table: DenseMatrix },
}

impl FeatureMap {
    pub fn random_projection(input_dim: usize, output_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::invalid("projection dimensions must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (output_dim as f64).sqrt();
        let data = (0..input_dim * output_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect::<Vec<f64>>();
        Ok(FeatureMap::RandomProjection {
            seed,
            weights: DenseMatrix::from_row_major(input_dim, output_dim, data)?,
        })
    }

    pub fn from_table_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Self> {
        Ok(FeatureMap::PrecomputedTable {
            table: load_feature_table(path, has_header)?,
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FeatureMap::Identity => "identity",
            FeatureMap::RandomProjection { .. } => "random-projection",
            FeatureMap::PrecomputedTable { .. } => "precomputed-table",
        }
    }

    /// Output dimension given the raw input dimension.
    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self {
            FeatureMap::Identity => input_dim,
            FeatureMap::RandomProjection { weights, .. } => weights.cols(),
            FeatureMap::PrecomputedTable { table } => table.cols(),
        }
    }

    /// Encodes every row of `data`; labels are carried over unchanged.
    pub fn encode(&self, data: &Dataset) -> Result<Dataset> {
        match self {
            FeatureMap::Identity => Ok(data.clone()),
            FeatureMap::RandomProjection { weights, .. } => {
                check_len("random projection input", weights.rows(), data.dim())?;
                Dataset::new(data.x().matmul(weights)?, data.y().to_vec())
            }
            FeatureMap::PrecomputedTable { table } => {
                check_len("feature table rows", data.len(), table.rows())?;
                Dataset::new(table.clone(), data.y().to_vec())
            }
        }
    }
}

pub fn encode(map: &FeatureMap, data: &Dataset) -> Result<Dataset> {
    map.encode(data)
}

/// Linear head trained on encoded features, with its precomputed hat state.
#[derive(Debug, Clone)]
pub struct Head {
    pub map: FeatureMap,
    pub encoded: Dataset,
    pub hat: HatState,
}

impl Head {
    pub fn train(map: FeatureMap, data: &Dataset, lambda: f64) -> Result<Self> {
        let encoded = map.encode(data)?;
        let hat = HatState::new(&encoded, lambda)?;
        Ok(Self { map, encoded, hat })
    }

    pub fn model(&self) -> &RidgeModel {
        self.hat.model()
    }

    pub fn unlearn(&self, req: &DeletionRequest, method: Method, opts: &MethodOptions) -> Result<UnlearnResult> {
        run_method(method, &self.encoded, req, &self.hat, opts)
    }

    /// Classification accuracy of `theta` (a head in this encoded space) on `data`.
    pub fn accuracy_of(&self, theta: &[f64], data: &Dataset) -> Result<f64> {
        let encoded = self.map.encode(data)?;
        let m = RidgeModel {
            theta: theta.to_vec(),
            lambda: self.hat.lambda(),
        };
        accuracy(&m, &encoded)
    }
}

/// Encodes, trains the head and applies `method` in encoded space.
pub fn unlearn_head(
    map: &FeatureMap,
    data: &Dataset,
    req: &DeletionRequest,
    method: Method,
    lambda: f64,
    opts: &MethodOptions,
) -> Result<UnlearnResult> {
    Head::train(map.clone(), data, lambda)?.unlearn(req, method, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_synthetic_sparse;
    use crate::numerics::norm;
    use std::io::Write;

    #[test]
    fn identity_is_a_no_op() {
        let d = gen_synthetic_sparse(10, 4, 0.5, 1).unwrap();
        assert_eq!(FeatureMap::Identity.encode(&d).unwrap(), d);
    }

    #[test]
    fn projection_is_deterministic_and_linear() {
        let d = gen_synthetic_sparse(10, 4, 1.0, 1).unwrap();
        let a = FeatureMap::random_projection(4, 6, 3).unwrap();
        let b = FeatureMap::random_projection(4, 6, 3).unwrap();
        assert_eq!(a.encode(&d).unwrap(), b.encode(&d).unwrap());
        assert_eq!(a.output_dim(4), 6);
        let zero = Dataset::new(DenseMatrix::zeros(1, 4), vec![1.0]).unwrap();
        assert_eq!(norm(a.encode(&zero).unwrap().row(0)), 0.0);
        assert!(a.encode(&gen_synthetic_sparse(3, 5, 1.0, 1).unwrap()).is_err());
    }

    #[test]
    fn table_lookup_and_row_checks() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "1,2\n3,4\n5,6").unwrap();
        let map = FeatureMap::from_table_csv(f.path(), false).unwrap();
        let d = gen_synthetic_sparse(3, 7, 1.0, 2).unwrap();
        let enc = map.encode(&d).unwrap();
        assert_eq!(enc.row(2), &[5.0, 6.0]);
        assert_eq!(enc.y(), d.y());
        let too_many = gen_synthetic_sparse(4, 7, 1.0, 2).unwrap();
        assert!(map.encode(&too_many).is_err());
        let too_few = gen_synthetic_sparse(2, 7, 1.0, 2).unwrap();
        assert!(map.encode(&too_few).is_err());
    }
}
