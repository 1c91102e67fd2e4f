from .beats import SIGMA, beat_align, detect_kinematic_beats, kinetic_velocity, local_minima
from .distances import MetricInputError, diversity, frechet_distance
from .features import geometric_features, kinetic_features, relation_bits, relation_catalog
from .report import MetricReport, digest, evaluate_sets, sequence_beat_scores, write_report

__all__ = [
    "MetricInputError",
    "MetricReport",
    "SIGMA",
    "beat_align",
    "detect_kinematic_beats",
    "digest",
    "diversity",
    "evaluate_sets",
    "frechet_distance",
    "geometric_features",
    "kinetic_features",
    "kinetic_velocity",
    "local_minima",
    "relation_bits",
    "relation_catalog",
    "sequence_beat_scores",
    "write_report",
]
