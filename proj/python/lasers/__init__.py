"""Latent-space compression bottlenecks: sparse dictionary coding and vector
quantization, backed by the C++ core."""

from lasers._core import (
    LasersError,
    adaptive_beta,
    batch_omp,
    fold,
    generate_planted,
    init_dictionary,
    mse,
    naive_omp,
    perplexity,
    psnr,
    reconstruct,
    savitzky_golay,
    top_singular_projection,
    train,
    unfold,
    utilization,
    vq_assign,
    vq_reconstruct,
)

__all__ = [
    "LasersError",
    "adaptive_beta",
    "batch_omp",
    "fold",
    "generate_planted",
    "init_dictionary",
    "mse",
    "naive_omp",
    "perplexity",
    "psnr",
    "reconstruct",
    "savitzky_golay",
    "top_singular_projection",
    "train",
    "unfold",
    "utilization",
    "vq_assign",
    "vq_reconstruct",
]
