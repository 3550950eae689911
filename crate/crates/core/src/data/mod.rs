//! Flow-record ingestion: taxonomy, CSV loading, leakage-aware column
//! exclusion, one-hot encoding and class summaries.

mod encode;
mod labels;
pub mod reference;
mod summary;
mod table;
mod taxonomy;

pub use encode::{
    apply_exclusion_policy, describe, one_hot_encode, present_categorical, OneHotEncoder, Removal,
    GENIS_CATEGORICAL,
};
pub use labels::{LabelSpace, Task};
pub use summary::{summarize, DatasetSummary};
pub use table::{Column, ColumnData, FlowTable, LoadOptions, Loaded};
pub use taxonomy::{Category, ColumnKind, FeatureMeta, Taxonomy};
