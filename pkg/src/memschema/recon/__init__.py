from .augment import Transform, augment_plan, transform_target, variant_id
from .head import HeadParams, head_forward, head_backward, loss_and_grad
from .train import (
    TrainConfig,
    VmsHeadReconstructor,
    category_folds,
    eval_recon,
    load_head,
    save_head,
    train_head,
)

__all__ = [
    "Transform",
    "augment_plan",
    "transform_target",
    "variant_id",
    "HeadParams",
    "head_forward",
    "head_backward",
    "loss_and_grad",
    "TrainConfig",
    "VmsHeadReconstructor",
    "category_folds",
    "eval_recon",
    "load_head",
    "save_head",
    "train_head",
]
