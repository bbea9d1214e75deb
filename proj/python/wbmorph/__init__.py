"""Wasserstein barycenters constrained to a prior manifold, for image morphing."""

from ._core import *  # noqa: F401,F403
