//! Reward augmentation toward states that are both valuable and frequently
//! visited: pseudo-counts, the value/count partition, a closed-form tabular
//! discriminator and the `r + λ·log ω(s)` reward.

mod counts;
mod discriminator;
mod partition;

pub use counts::{update_counts, CountSource, HashedCounts, VisitCounts, DEFAULT_BUCKETS};
pub use discriminator::{
    augment_reward, fit_discriminator, fit_discriminator_counts, objective, DiscriminatorTable,
    DEFAULT_ALPHA,
};
pub use partition::{partition, DatasetCounts, PartitionConfig, StateDatasets};
