"""Graph autoencoder embeddings, validity indices and consensus clustering."""
from .consensus import ClusterAssignment, ConsensusMatrix, consensus_cluster, consensus_update
from .gae import decode, embed_graphs, train_gae
from .indices import all_indices, calinski_harabasz, davies_bouldin, silhouette
from .predictors import choose_k_inertia, density_cluster, gmm_fit, kmeans

__all__ = [
    "ClusterAssignment", "ConsensusMatrix", "all_indices", "calinski_harabasz", "choose_k_inertia",
    "consensus_cluster", "consensus_update", "davies_bouldin", "decode", "density_cluster",
    "embed_graphs", "gmm_fit", "kmeans", "silhouette", "train_gae",
]
