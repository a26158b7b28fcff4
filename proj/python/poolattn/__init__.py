"""Pooled spatial and channel attention: kernels, cost model and checks."""

from ._core import (
    Error,
    __version__,
    anchor_count,
    cost_cpa,
    cost_nonlocal,
    cost_spa,
    cpa_forward,
    gradcheck,
    gradcheck_manifest,
    nonlocal_forward,
    preset,
    pyramid_pool,
    random_projection,
    reduction_ratio,
    run_cli,
    spa_forward,
    synth_sample,
)

__all__ = [
    "Error",
    "__version__",
    "anchor_count",
    "cost_cpa",
    "cost_nonlocal",
    "cost_spa",
    "cpa_forward",
    "gradcheck",
    "gradcheck_manifest",
    "nonlocal_forward",
    "preset",
    "pyramid_pool",
    "random_projection",
    "reduction_ratio",
    "run_cli",
    "spa_forward",
    "synth_sample",
]
