from tfem.linalg.kernels import (
    Mat,
    as_mat,
    fro,
    is_symmetric,
    jacobi_eigh,
    l2,
    op_norm,
    power_method_ref,
    relu,
    softmax_cols,
)

__all__ = [
    "Mat",
    "as_mat",
    "fro",
    "is_symmetric",
    "jacobi_eigh",
    "l2",
    "op_norm",
    "power_method_ref",
    "relu",
    "softmax_cols",
]
