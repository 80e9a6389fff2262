"""Layer-wise probing and perturbation robustness toolkit."""

from ._core import (
    EmbeddingError,
    ProbeError,
    SsfError,
    __version__,
    build_dataset,
    most_affected_layers,
    perturb,
    perturbation_names,
    probe_objective,
    read_embeddings,
    robustness_score,
    roundtrip_ssf,
    stratified_kfold,
    train,
    validate_ssf,
    write_embeddings,
)

__all__ = [
    "EmbeddingError",
    "ProbeError",
    "SsfError",
    "__version__",
    "build_dataset",
    "most_affected_layers",
    "perturb",
    "perturbation_names",
    "probe_objective",
    "read_embeddings",
    "robustness_score",
    "roundtrip_ssf",
    "stratified_kfold",
    "train",
    "validate_ssf",
    "write_embeddings",
]
