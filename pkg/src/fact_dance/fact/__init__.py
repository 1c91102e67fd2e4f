from .config import (
    FUSIONS,
    MASK_MODES,
    PRESETS,
    SUPERVISIONS,
    ConfigError,
    FactConfig,
    ablation_variants,
    desk_config,
    paper_config,
    tiny_config,
)
from .model import (
    FactParams,
    LengthError,
    attention_forward,
    causal_mask,
    fact_forward,
    future_n_loss,
    init_model,
    parameter_shapes,
)
from .normalize import FeatureNorm
from .train import shift_by_one_targets, supervision_targets, train_step
