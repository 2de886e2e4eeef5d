from tfem.transformer.container import decode_params, encode_params, load_params, save_params
from tfem.transformer.engine import Activation, AttnHead, Layer, TransformerParams, layer_forward, tf_forward
from tfem.transformer.norms import SpaceVerdict, param_norm, space_check

__all__ = [
    "Activation",
    "AttnHead",
    "Layer",
    "SpaceVerdict",
    "TransformerParams",
    "decode_params",
    "encode_params",
    "layer_forward",
    "load_params",
    "param_norm",
    "save_params",
    "space_check",
    "tf_forward",
]
