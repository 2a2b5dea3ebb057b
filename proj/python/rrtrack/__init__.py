from ._rrtrack import (
    BoundingBox,
    CropWindow,
    FormatError,
    NetworkConfig,
    NetworkParams,
    NumericalError,
    ShapeError,
    UsageError,
    crop_window_for,
    decode_prediction,
    encode_target,
    iou,
    mean_iou,
    read_ppm,
    run_cli,
    success_auc,
    track,
)

__all__ = [
    "BoundingBox",
    "CropWindow",
    "FormatError",
    "NetworkConfig",
    "NetworkParams",
    "NumericalError",
    "ShapeError",
    "UsageError",
    "crop_window_for",
    "decode_prediction",
    "encode_target",
    "iou",
    "mean_iou",
    "read_ppm",
    "run_cli",
    "success_auc",
    "track",
]
