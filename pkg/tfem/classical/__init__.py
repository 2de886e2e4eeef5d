from tfem.classical.lloyd import LloydTrace, assign_nearest, kmeanspp, lloyd, lloyd_objective
from tfem.classical.minimax import MinimaxShadow, minimax_shadow
from tfem.classical.power import DeflationResult, deflation_bound, random_unit, topk_deflation
from tfem.classical.spectral import spectral_init

__all__ = [
    "DeflationResult",
    "LloydTrace",
    "MinimaxShadow",
    "assign_nearest",
    "deflation_bound",
    "kmeanspp",
    "lloyd",
    "lloyd_objective",
    "minimax_shadow",
    "random_unit",
    "spectral_init",
    "topk_deflation",
]
