// SPDX-License-Identifier: MIT OR Apache-2.0

use super::Dataset;
use crate::error::{Error, Result};
use crate::reasons::WorldSet;
use crate::rng::{self, tags};
use crate::tensor::Tensor;

/// A world set drawn from a dataset, with the examples' inputs attached.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldSample {
    pub worlds: WorldSet,
    /// Dataset index of each world.
    pub indices: Vec<usize>,
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    pub seed: u64,
}

/// Uniform sample of `n` distinct examples, in sampled order. World ids are
/// `split:index`; attributes are the dataset's label and group columns.
pub fn sample_worlds(dataset: &Dataset, n: usize, seed: u64) -> Result<WorldSample> {
    if n < 2 || n > dataset.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {n} worlds from {} examples",
            dataset.len()
        )));
    }
    let mut pool: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = rng::stream(seed, tags::WORLDS);
    // partial Fisher-Yates: the first n slots are the sample
    for i in 0..n {
        let j = i + rng::below_inclusive(&mut rng, (pool.len() - 1 - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(n);
    let ids = pool.iter().map(|i| format!("{}:{i}", dataset.split())).collect();
    let mut worlds = WorldSet::new(ids)?;
    for (name, values) in dataset.attributes() {
        worlds.set_attribute(name, pool.iter().map(|&i| values[i].clone()).collect())?;
    }
    Ok(WorldSample {
        worlds,
        inputs: dataset.batch(&pool)?,
        labels: pool.iter().map(|&i| dataset.labels()[i]).collect(),
        indices: pool,
        seed,
    })
}
