"""Binary-class detector with weighted-entropy training for weakly supervised localization.

Boxes are (x1, y1, x2, y2) tuples in pixels. Loss functions return (value, grad_p, grad_t).
Config overrides use the CLI's key=value names, e.g. {"loss.eta": "0.25"}.
"""

from ._wend import (
    IoError,
    LossConfig,
    RegressionKind,
    ValidationError,
    assign_labels,
    bce,
    canonical_config,
    clip_box,
    decode_deltas,
    encode_deltas,
    eval,
    evaluate,
    gen_data,
    generate_anchors,
    giou,
    giou_loss,
    iou,
    nms,
    quality_loss,
    render,
    smooth_l1,
    supervised_loss,
    sweep,
    total_loss,
    train,
    we_weight,
    weighted_entropy_loss,
)

__all__ = [name for name in dir() if not name.startswith("_")]
