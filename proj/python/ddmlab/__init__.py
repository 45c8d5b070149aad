"""Domain disentanglement for multi-domain self-supervised pretraining."""

from ._core import (
    ConfigError,
    FormatError,
    InputError,
    IoError,
    NumericalError,
    barlow_twins_loss,
    colored_shapes,
    config_hash,
    encode,
    epsilon_schedule,
    gaussian_domains,
    kmeans,
    linear_probe,
    load_embeddings,
    loss_domain_variant,
    nt_xent,
    outlier_mask,
    pretrain,
    probe,
    sim,
    validate_config,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "InputError",
    "IoError",
    "NumericalError",
    "barlow_twins_loss",
    "colored_shapes",
    "config_hash",
    "encode",
    "epsilon_schedule",
    "gaussian_domains",
    "kmeans",
    "linear_probe",
    "load_embeddings",
    "loss_domain_variant",
    "nt_xent",
    "outlier_mask",
    "pretrain",
    "probe",
    "sim",
    "validate_config",
]
