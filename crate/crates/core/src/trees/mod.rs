//! Native tree ensembles: a Gini random forest and second-order gradient
//! boosting with histogram or GOSS growth.

mod forest;
mod gbdt;
mod model;
mod tree;

pub use forest::{fit_random_forest, gini, ForestConfig, MaxFeatures};
pub use gbdt::{fit_gbdt, fit_tree_on_gradients, goss_sample, BinMapper, BoostMode, GbdtConfig, GossSample};
pub use model::{argmax_rows, EnsembleKind, ModelConfig, TreeEnsembleModel};
pub use tree::{Node, Tree};

pub(crate) use model::{sigmoid, softmax_in_place};
