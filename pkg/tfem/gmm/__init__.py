from tfem.gmm.instance import GmmInstance, generate_instance, imbalance_counts, one_hot
from tfem.gmm.metrics import ari, contingency, misclass, nmi, perm_loss

__all__ = [
    "GmmInstance",
    "ari",
    "contingency",
    "generate_instance",
    "imbalance_counts",
    "misclass",
    "nmi",
    "one_hot",
    "perm_loss",
]
