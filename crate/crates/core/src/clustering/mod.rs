//! Superpixel segmentation, k-means and the spatial → channel cluster hierarchy.

mod hierarchy;
mod kmeans;
mod slic;

pub use hierarchy::{
    build_cluster_model, is_partition, region_descriptors, ChannelGroup, ClusterModel,
    HierarchyConfig,
};
pub use kmeans::{kmeans, KMeansConfig, KMeansResult};
pub use slic::{slic_segment, RegionLabeling, SlicConfig};
