"""Thin layer over torch autograd.

All learned state lives in ``torch.Tensor``; this module only adds the
scalar-only ``backward`` contract and a float64 switch for gradient checks.
"""

import contextlib

import torch


def backward(scalar: torch.Tensor) -> None:
    """Reverse-mode pass from a 0-d tensor into every ``requires_grad`` leaf."""
    if scalar.dim() != 0:
        raise ValueError(f"backward needs a scalar, got shape {tuple(scalar.shape)}")
    scalar.backward()


@contextlib.contextmanager
def default_dtype(dtype: torch.dtype):
    previous = torch.get_default_dtype()
    torch.set_default_dtype(dtype)
    try:
        yield
    finally:
        torch.set_default_dtype(previous)
