"""Face descriptors with average-biased rectifiers and leave-one-out retrieval evaluation."""

from ._faceret import (
    FaceretError,
    Model,
    Variant,
    ab_relu,
    anmrr,
    cli,
    conv2d,
    desk_model,
    distance,
    evaluate,
    load_model,
    maxpool,
    mean_volume,
    parse_variant,
    rank_gallery,
    read_vgt,
    relu,
    selftest,
    standard_variants,
    write_vgt,
)

__all__ = [
    "FaceretError",
    "Model",
    "Variant",
    "ab_relu",
    "anmrr",
    "cli",
    "conv2d",
    "desk_model",
    "distance",
    "evaluate",
    "load_model",
    "maxpool",
    "mean_volume",
    "parse_variant",
    "rank_gallery",
    "read_vgt",
    "relu",
    "selftest",
    "standard_variants",
    "write_vgt",
]
