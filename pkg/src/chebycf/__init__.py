"""Chebyshev-interpolated graph filtering for implicit-feedback collaborative filtering."""

from chebycf.chebyshev import (
    ChebyFilterSpec,
    apply_chebyshev_filter,
    chebyshev_nodes,
    chebyshev_T,
    interpolation_coefficients,
    plateau,
    plateau_filter_spec,
)
from chebycf.evaluation import MetricsReport, evaluate, grid_search, ndcg_at_n, recall_at_n
from chebycf.model import (
    ChebyCFModel,
    HyperParams,
    fit,
    load_model,
    predict,
    recommend_topn,
    save_model,
)
from chebycf.sparse import (
    InteractionDataset,
    NormalizedGraph,
    apply_gram,
    apply_r_tilde,
    apply_r_tilde_t,
    apply_rescaled_laplacian,
    load_interactions,
    normalize,
)
from chebycf.svd import IdealPassBasis, apply_ideal, truncated_svd

__version__ = "0.1.0"

__all__ = [
    "ChebyCFModel",
    "ChebyFilterSpec",
    "HyperParams",
    "IdealPassBasis",
    "InteractionDataset",
    "MetricsReport",
    "NormalizedGraph",
    "apply_chebyshev_filter",
    "apply_gram",
    "apply_ideal",
    "apply_r_tilde",
    "apply_r_tilde_t",
    "apply_rescaled_laplacian",
    "chebyshev_T",
    "chebyshev_nodes",
    "evaluate",
    "fit",
    "grid_search",
    "interpolation_coefficients",
    "load_interactions",
    "load_model",
    "ndcg_at_n",
    "normalize",
    "plateau",
    "plateau_filter_spec",
    "predict",
    "recall_at_n",
    "recommend_topn",
    "save_model",
    "truncated_svd",
]
