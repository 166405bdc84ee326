//! Phase 2: the trident network (auto-encoder plus two fused GCN streams)
//! and its self-training objective.

mod kmeans;
mod selftrain;
mod trident;

pub use kmeans::{kmeans_init_centers, KMeans};
pub use selftrain::{
    assign_clusters, kl_divergence, l2_total, max_row_deviation, soft_assignment, student_t_assignment,
    target_distribution, train_phase2_iteration, Phase2Losses, Phase2Report, TargetDistribution, TridentState,
    ROW_SUM_TOL,
};
pub use trident::{
    bottleneck_features, fuse_representations, gcn_layer, mgcn_reconstruction_loss, trident_forward, GcnStream,
    Trident, TridentOutput,
};
