"""
Módulo core de Ordinal Embedding Tool
Contiene geometría, diseños de comparaciones, embedders, métricas y experimentos
"""

from .designs import (
    DissimilarityOracle,
    ComparisonSet,
    QuadrupleDesign,
    TripleDesign,
    LocalDesign,
    LandmarkDesign,
    KnnGraphDesign,
    build_design,
)
from .embedders import (
    Embedding,
    EmbedReport,
    RefineSchedule,
    refine_embed,
    exact_rejection_embed,
    landmark_embed,
    verify_embedding,
)
from .geometry import Ball, DomainSpec, PointCloud, sample_domain, hausdorff_density
from .metrics import alignment_error, modulus_of_continuity

__all__ = [
    'Ball',
    'DomainSpec',
    'PointCloud',
    'sample_domain',
    'hausdorff_density',
    'DissimilarityOracle',
    'ComparisonSet',
    'QuadrupleDesign',
    'TripleDesign',
    'LocalDesign',
    'LandmarkDesign',
    'KnnGraphDesign',
    'build_design',
    'Embedding',
    'EmbedReport',
    'RefineSchedule',
    'refine_embed',
    'exact_rejection_embed',
    'landmark_embed',
    'verify_embedding',
    'alignment_error',
    'modulus_of_continuity',
]
