//! Classification, link prediction and clustering metrics.

mod cluster;
mod metrics;

pub use cluster::{ari, clustering_protocol, clustering_run, kmeans, mean_score, nmi, ClusterAssignment, ClusterScore};
pub use metrics::{accuracy, link_metrics, macro_f1, ConfusionCounts, LinkMetrics};
