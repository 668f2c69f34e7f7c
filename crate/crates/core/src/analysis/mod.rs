// SPDX-License-Identifier: MIT OR Apache-2.0

//! Activation matrices over world samples and what is read off them:
//! strength tables, layerwise belief updates, PCA of reasons-characters and
//! k-NN cluster purity. Also the `RACT` dump format for external matrices.

pub mod dump;
mod heatmap;
mod layerwise;
mod matrix;
mod pca;
mod purity;

pub use heatmap::{strength_heatmap, LayerSummary, StrengthTable};
pub use layerwise::{layerwise_update, normalizations, update_layers, LayerwiseReport, Normalization};
pub use matrix::{class_propositions, label_proposition, ActivationMatrix, NeuronId};
pub use pca::{eigen_solvers, pca_project, Auto, EigenSolver, Jacobi, Pca, PowerIteration};
pub use purity::cluster_purity;

#[cfg(test)]
mod tests;
