"""Partial-identification bounds for counterfactual queries on binary causal models."""

from __future__ import annotations

__version__ = "0.1.0"
