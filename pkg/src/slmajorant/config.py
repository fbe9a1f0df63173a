"""Solver configuration shared by the extremal solvers, oracle and CLI."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .measures import ParameterError

__all__ = ["SolverConfig"]


@dataclass(frozen=True)
class SolverConfig:
    grid_n: int = 4096
    tol_eigen: float = 1e-10
    tol_outer: float = 1e-8
    tol_res: float = 1e-6
    max_iter: int = 500
    damping: float = 0.5
    k_atoms: int = 1
    seed: int = 42
    pos_tol: float = 1e-6
    output_dir: Path = field(default_factory=lambda: Path("."))

    def __post_init__(self):
        if self.grid_n < 16:
            raise ParameterError("grid_n must be at least 16")
        for name in ("tol_eigen", "tol_outer", "tol_res", "pos_tol"):
            if not (getattr(self, name) > 0.0):
                raise ParameterError(f"{name} must be positive")
        if not (0.0 < self.damping <= 1.0):
            raise ParameterError("damping must lie in (0, 1]")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be positive")
        if self.k_atoms < 1:
            raise ParameterError("k_atoms must be a positive integer")
        object.__setattr__(self, "output_dir", Path(self.output_dir))
