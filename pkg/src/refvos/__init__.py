"""Desk-scale text-queried video object segmentation.

A trainable pipeline that encodes video frames jointly with a referring
query, generates per-frame mask priors and a global video feature,
fuses current-frame features with global context and a bounded memory
of past results, and decodes masks through a prompt-driven two-way
attention decoder. Built on an in-package float64 autodiff tape and
verified by finite differences and brute-force oracles.
"""

__version__ = "0.1.0"

from .autodiff import Tensor, Tape, backward, finite_difference_check

__all__ = ["Tensor", "Tape", "backward", "finite_difference_check", "__version__"]
