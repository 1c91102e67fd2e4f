from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

MASK_MODES = ("full", "causal")
SUPERVISIONS = ("future_n", "shift_by_1")
FUSIONS = ("early", "late", "none")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FactConfig:
    hidden: int = 64
    heads: int = 4
    motion_layers: int = 2
    audio_layers: int = 2
    cross_layers: int = 4
    seed_frames: int = 40
    music_frames: int = 80
    future_n: int = 8
    mask_mode: str = "full"
    supervision: str = "future_n"
    fusion: str = "early"
    motion_dim: int = 219
    audio_dim: int = 35
    ff_mult: int = 2
    ff_activation: str = "relu"
    norm: str = "pre_layernorm_residual"
    init_std: float = 0.02
    dtype: str = "float32"
    # head output is added to the latest motion input frame
    predict_offset: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(ok: bool, msg: str):
            if not ok:
                raise ConfigError(msg)

        need(self.hidden > 0 and self.heads > 0, "hidden and heads must be positive")
        need(self.hidden % self.heads == 0, f"hidden ({self.hidden}) must be divisible by heads ({self.heads})")
        need(self.mask_mode in MASK_MODES, f"mask_mode must be one of {MASK_MODES}")
        need(self.supervision in SUPERVISIONS, f"supervision must be one of {SUPERVISIONS}")
        need(self.fusion in FUSIONS, f"fusion must be one of {FUSIONS}")
        need(self.ff_activation == "relu", "only the relu feed-forward activation is implemented")
        need(self.norm == "pre_layernorm_residual", "only pre_layernorm_residual blocks are implemented")
        need(self.dtype in ("float32", "float64"), "dtype must be float32 or float64")
        need(min(self.motion_layers, self.audio_layers, self.cross_layers) >= 0, "layer counts must be >= 0")
        need(self.motion_layers >= 1, "motion_layers must be >= 1")
        need(self.seed_frames >= 1 and self.music_frames >= self.seed_frames, "need music_frames >= seed_frames >= 1")
        need(self.future_n >= 1, "future_n must be >= 1")
        if self.fusion == "none":
            need(self.audio_layers == 0, "fusion=none requires audio_layers=0")
            need(self.cross_layers == 0, "fusion=none requires cross_layers=0")
        else:
            need(self.cross_layers >= 1, f"fusion={self.fusion} requires cross_layers >= 1")
        if self.fusion == "late":
            need(self.cross_layers == 1, "fusion=late uses a single cross-modal layer")
        if self.fusion == "early":
            need(self.cross_layers >= 2, "fusion=early uses a deep (>= 2 layer) cross-modal stack")
        need(self.n_out <= self.context_length, "more outputs than context positions")

    @property
    def head_dim(self) -> int:
        return self.hidden // self.heads

    @property
    def context_length(self) -> int:
        if self.fusion == "none":
            return self.seed_frames
        return self.seed_frames + self.music_frames

    @property
    def n_out(self) -> int:
        """Frames predicted per forward pass."""
        return self.future_n if self.supervision == "future_n" else self.seed_frames

    @property
    def next_frame_index(self) -> int:
        """Row of the forward output that predicts the frame right after the seed window."""
        return 0 if self.supervision == "future_n" else self.seed_frames - 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FactConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for k, v in d.items():
            if k not in known:
                continue
            default = known[k].default
            if isinstance(default, bool):
                v = str(v).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                v = int(v)
            elif isinstance(default, float):
                v = float(v)
            else:
                v = str(v)
            kwargs[k] = v
        try:
            return cls(**kwargs)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    def with_fusion(self, fusion: str) -> "FactConfig":
        """Re-budget layers for a fusion variant, keeping motion-path depth fixed.

        Early 2/2/12 becomes late 13/13/1 and no-fusion 14/0/0.
        """
        total = self.motion_layers + self.cross_layers
        if fusion == "early":
            if self.fusion != "early":
                raise ConfigError("early-fusion budgets are defined from an early config")
            return self
        if fusion == "late":
            return replace(self, fusion="late", motion_layers=total - 1, audio_layers=total - 1, cross_layers=1)
        if fusion == "none":
            return replace(self, fusion="none", motion_layers=total, audio_layers=0, cross_layers=0)
        raise ConfigError(f"unknown fusion {fusion!r}")


def paper_config() -> FactConfig:
    return FactConfig(
        hidden=800, heads=10, motion_layers=2, audio_layers=2, cross_layers=12,
        seed_frames=120, music_frames=240, future_n=20, predict_offset=False,
    )


def desk_config(**overrides) -> FactConfig:
    return replace(FactConfig(), **overrides)


def tiny_config(**overrides) -> FactConfig:
    base = FactConfig(
        hidden=16, heads=2, motion_layers=1, audio_layers=1, cross_layers=2,
        seed_frames=6, music_frames=10, future_n=3, dtype="float64",
    )
    return replace(base, **overrides)


PRESETS = {"paper": paper_config, "desk": desk_config, "tiny": tiny_config}


def ablation_variants(base: FactConfig) -> dict[str, FactConfig]:
    """Attention/supervision and fusion-depth variants of an early-fusion future-N config."""
    return {
        "causal_shift1": replace(base, mask_mode="causal", supervision="shift_by_1"),
        "full_f1": replace(base, future_n=1),
        f"full_f{base.future_n}": base,
        "late_fusion": base.with_fusion("late"),
        "no_fusion": base.with_fusion("none"),
    }
