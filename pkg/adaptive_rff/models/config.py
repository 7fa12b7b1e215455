"""Solver, sampler and training configuration models."""

from typing import Literal, Optional

from pydantic import (
    Field,
    NonNegativeFloat,
    PositiveFloat,
    PositiveInt,
    model_validator,
)

from .base import ArffModel
from .frequency import LatticeSpec
from .target import BaseDistribution

WALK_MODE_BY_ALGORITHM = {
    "alg1": "continuous",
    "alg2": "lattice",
    "alg3": "adaptive",
}


class SolverConfig(ArffModel):
    """Regularization weights and stopping rules for the amplitude solve."""

    lambda1: NonNegativeFloat = 0.0
    lambda2: NonNegativeFloat = 0.0
    cg_rel_tol: PositiveFloat = 1e-3
    cg_max_iters: PositiveInt = 2000
    newton_tol: PositiveFloat = 1e-8
    newton_max_iters: PositiveInt = 50
    max_halvings: PositiveInt = 30


class CutoffConfig(ArffModel):
    """Amplitude cutoff epsilon and the base-distribution share q_eps."""

    epsilon: NonNegativeFloat = 0.0
    q_epsilon: float = Field(default=0.0, ge=0.0, lt=1.0)


class WalkConfig(ArffModel):
    """Random-walk proposal: continuous, lattice-projected, or adaptive."""

    delta: PositiveFloat
    mode: Literal["continuous", "lattice", "adaptive"] = "continuous"
    lattice: Optional[LatticeSpec] = None
    eps_hat: PositiveFloat = 1e-3

    @model_validator(mode="after")
    def _check_mode(self) -> "WalkConfig":
        if self.mode == "lattice" and self.lattice is None:
            raise ValueError("the lattice walk needs a lattice")
        return self


class TrainConfig(ArffModel):
    """Everything one resampling run needs besides the data."""

    algorithm: Literal["alg1", "alg2", "alg3"]
    K: PositiveInt
    iterations: PositiveInt
    walk: WalkConfig
    cutoff: CutoffConfig = Field(default_factory=CutoffConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    base: Optional[BaseDistribution] = None
    init: Literal["zero", "base"] = "zero"
    validation_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    snapshot_every: Optional[PositiveInt] = None
    full_history: bool = False
    verify_every: Optional[PositiveInt] = None
    record_timing: bool = False

    @model_validator(mode="after")
    def _check_algorithm(self) -> "TrainConfig":
        expected = WALK_MODE_BY_ALGORITHM[self.algorithm]
        if self.walk.mode != expected:
            raise ValueError(
                f"{self.algorithm} uses the {expected} walk, got {self.walk.mode}"
            )
        if self.algorithm == "alg2" and self.base is not None:
            if self.base.kind == "standard_normal":
                raise ValueError("alg2 needs a lattice base distribution")
        return self

    @property
    def lattice(self) -> Optional[LatticeSpec]:
        return self.walk.lattice if self.walk.mode == "lattice" else None


class ClassifierConfig(ArffModel):
    """One-vs-all cos/sin networks trained with the continuous walk."""

    K: PositiveInt = 2000
    iterations: PositiveInt = 300
    delta: PositiveFloat = 0.005
    lambda1: NonNegativeFloat = 2.0
    cg_rel_tol: PositiveFloat = 1e-4
    cg_max_iters: PositiveInt = 2000
    digits: tuple[int, ...] = tuple(range(10))
    seed: int = Field(default=0, ge=0, lt=2**64)
    jobs: PositiveInt = 1

    @model_validator(mode="after")
    def _check_digits(self) -> "ClassifierConfig":
        if len(self.digits) < 2 or len(set(self.digits)) != len(self.digits):
            raise ValueError("at least two distinct digits are required")
        if any(not 0 <= digit <= 9 for digit in self.digits):
            raise ValueError("digits must lie in 0..9")
        return self
