"""Response graphs, replicator dynamics and finite-resolution chain components."""

from __future__ import annotations

__version__ = "0.1.0"
