//! Phase 1: backbone, instance head and auto-encoder trained with instance
//! contrast, cluster contrast and reconstruction.

mod layers;
mod losses;
mod phase1;

pub use layers::{AutoEncoder, Backbone, Dense, IsmHead};
pub use losses::{
    cluster_contrastive_loss, cluster_entropy, cosine_similarity, instance_contrastive_loss,
    instance_reconstruction_loss, l1_total, LossReport, STOCHASTIC_TOL,
};
pub use phase1::{extract_features, train_phase1_epoch, Phase1Losses, Phase1Model};
