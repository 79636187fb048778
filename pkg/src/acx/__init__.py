"""Numerical almost complex geometry: structure fields, J-holomorphic discs,
Kobayashi-Royden metric brackets, cotangent lifts and non-isotropic scaling."""

__version__ = "0.1.0"
