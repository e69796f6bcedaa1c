"""Shared machinery for the min-max Lagrangian solvers."""

from __future__ import annotations

import dataclasses
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from maxsamples import signals
from maxsamples.exceptions import ConfigurationError, SolverDivergedError
from maxsamples.numkit import Rng, SmoothIndicatorParams
from maxsamples.problem import PerturbProblem

logger = logging.getLogger(__name__)

# (outer, inner) iteration budgets per solver
DEFAULT_ITERATIONS: Dict[str, Tuple[int, int]] = {
    "ms": (10, 10_000),
    "bcms": (10, 100),
    "ccms": (20, 100),
    "kl": (10, 5_000),
}


@dataclass(frozen=True)
class HyperParams:
    """Solver hyperparameters.

    ``delta`` is used when the harness builds problems; solvers read the
    margin from the problem itself. ``outer_iters``/``inner_iters`` left as
    ``None`` take the per-solver defaults, ``num_draws`` left as ``None``
    becomes ``ceil(|S| / 2)``.
    """

    delta: float = 0.1
    kappa: float = 2.0
    tau: float = 0.0
    omega: float = 1.0
    num_samples: int = 100
    num_draws: Optional[int] = None
    epsilon: float = 0.05
    distance_weight: float = 1.0
    alpha: float = 0.05
    beta: float = 0.05
    gamma0: float = 0.5
    eta0: float = 0.5
    outer_iters: Optional[int] = None
    inner_iters: Optional[int] = None
    lambda0: float = 1.0
    mu0: float = 1.0
    noise_std: float = 0.1
    init_noise: float = 1e-3
    pi0: float = 0.5
    seed: int = 0

    def validate(self) -> "HyperParams":
        for name in ("alpha", "beta", "gamma0", "eta0", "omega", "kappa", "delta"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        for name in ("distance_weight", "lambda0", "mu0", "noise_std", "init_noise"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")
        if self.tau == 1.0:
            raise ConfigurationError("tau must differ from 1")
        if self.num_samples < 1:
            raise ConfigurationError("num_samples must be at least 1")
        if not 0 < self.epsilon < 1:
            raise ConfigurationError("epsilon must lie in (0, 1)")
        if not 0 < self.pi0 <= 1:
            raise ConfigurationError("pi0 must lie in (0, 1]")
        for name in ("outer_iters", "inner_iters", "num_draws"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigurationError(f"{name} must be at least 1")
        return self

    @classmethod
    def field_types(cls) -> Dict[str, Any]:
        return {f.name: f.type for f in dataclasses.fields(cls)}

    @classmethod
    def coerce(cls, name: str, value: Any) -> Any:
        """Convert a raw (e.g. command-line) value for field ``name``."""
        types = cls.field_types()
        if name not in types:
            raise ConfigurationError(f"unknown hyperparameter {name!r}")
        if value is None or (isinstance(value, str) and value.lower() == "none"):
            if "Optional" not in str(types[name]):
                raise ConfigurationError(f"{name} cannot be empty")
            return None
        try:
            number = float(value)
            if "int" not in str(types[name]):
                return number
            if not number.is_integer():
                raise ValueError(value)
            return int(number)
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"invalid value {value!r} for {name}") from e

    def override(self, overrides: Optional[Mapping[str, Any]] = None) -> "HyperParams":
        if not overrides:
            return self
        values = {name: self.coerce(name, v) for name, v in overrides.items()}
        return dataclasses.replace(self, **values).validate()

    @classmethod
    def from_settings(cls, overrides: Optional[Mapping[str, Any]] = None):
        """Defaults, then ``MAXSAMPLES["HYPERPARAMS"]``, then ``overrides``."""
        from maxsamples.conf import maxsamples_config

        return cls().override(maxsamples_config.hyperparams).override(overrides)

    def for_solver(self, name: str) -> "HyperParams":
        outer, inner = DEFAULT_ITERATIONS[name]
        return dataclasses.replace(
            self,
            outer_iters=self.outer_iters or outer,
            inner_iters=self.inner_iters or inner,
        )

    @property
    def indicator(self) -> SmoothIndicatorParams:
        return SmoothIndicatorParams(kappa=self.kappa, tau=self.tau)

    def as_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class TraceRow:
    outer_iter: int
    selected: int
    lagrangian: float
    lambda_norm: float
    mu_norm: float
    mu_grad_norm: float

    def as_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass
class SolverState:
    """Mutable optimisation state.

    ``selection`` is the binary ``z`` for MS, ``Pi`` for the chance solvers
    (entrywise in [0, 1] for BCMS, on the simplex for CCMS) and all ones for KL.
    """

    solver: str
    xhat: np.ndarray
    selection: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    outer: int = 0
    inner: int = 0
    lagrangian: float = math.nan
    trace: List[TraceRow] = field(default_factory=list)


class BaseSolver(ABC):
    """Template for the outer multiplier loop shared by every solver.

    Subclasses provide the initial selection, the inner loop over the primal
    variables, and the multiplier gradients. MS, BCMS and CCMS minimise over
    the multipliers (projected descent); KL maximises (projected ascent).
    """

    name: str = ""
    multiplier_ascent: bool = False

    def __init__(
        self,
        prob: PerturbProblem,
        hp: Optional[HyperParams] = None,
        warm_start: Optional[np.ndarray] = None,
    ):
        if hp is None:
            hp = HyperParams.from_settings()
        self.prob = prob
        self.hp = hp.validate().for_solver(self.name)
        self.rng = Rng(self.hp.seed)
        self.warm_start = warm_start
        self.mask = prob.mask.astype(float)

    # hooks

    @abstractmethod
    def initial_selection(self) -> np.ndarray:
        """Starting ``z`` or ``Pi``."""

    @abstractmethod
    def run_inner(self, state: SolverState) -> None:
        """Update ``xhat`` and ``selection`` for one outer iteration."""

    @abstractmethod
    def multiplier_gradients(self, state: SolverState) -> Tuple[np.ndarray, np.ndarray]:
        """Gradients of the Lagrangian with respect to ``lam`` and ``mu``."""

    # shared steps

    def initial_xhat(self) -> np.ndarray:
        prob = self.prob
        noise = (2.0 * self.rng.uniform(prob.X.shape) - 1.0) * self.hp.init_noise
        xhat = prob.X + noise * self.mask
        if self.warm_start is not None:
            warm = np.asarray(self.warm_start, dtype=float)
            m = warm.shape[0]
            if m > prob.n_samples or warm.shape[1:] != (prob.n_features,):
                raise ConfigurationError(
                    f"warm start of shape {warm.shape} does not fit {prob.X.shape}"
                )
            xhat[:m] = np.where(prob.mask, warm, prob.X[:m])
        return xhat

    def initial_multipliers(self) -> Tuple[np.ndarray, np.ndarray]:
        hp = self.hp
        p, n = self.prob.n_features, self.prob.n_samples
        lam = np.maximum(0.0, hp.lambda0 + self.rng.normal(hp.noise_std, p))
        mu = np.maximum(0.0, hp.mu0 + self.rng.normal(hp.noise_std, n))
        return lam, mu

    def step_sizes(self, t: int) -> Tuple[float, float]:
        """Decaying multiplier rates ``gamma0/(1+t)`` and ``eta0/(1+t)``."""
        return self.hp.gamma0 / (1.0 + t), self.hp.eta0 / (1.0 + t)

    def guard(self, state: SolverState, value: float) -> float:
        if not np.isfinite(value) or not np.all(np.isfinite(state.xhat)):
            signals.log_event(
                "solver_diverged",
                solver=self.name,
                outer_iter=state.outer,
                inner_iter=state.inner,
            )
            raise SolverDivergedError(
                self.name, state.outer, state.inner, f"Lagrangian value {value!r}"
            )
        return value

    def step_xhat(self, state: SolverState, direction: np.ndarray) -> None:
        state.xhat = state.xhat + self.hp.beta * direction * self.mask

    def selected_count(self, state: SolverState) -> int:
        from maxsamples.repair import finalize

        return finalize(self.prob, state.xhat).size

    def new_state(self) -> SolverState:
        xhat = self.initial_xhat()
        lam, mu = self.initial_multipliers()
        return SolverState(
            solver=self.name,
            xhat=xhat,
            selection=self.initial_selection(),
            lam=lam,
            mu=mu,
        )

    def solve(self) -> SolverState:
        state = self.new_state()
        sign = 1.0 if self.multiplier_ascent else -1.0
        for t in range(self.hp.outer_iters):
            self.run_inner(state)
            self.guard(state, state.lagrangian)

            grad_lam, grad_mu = self.multiplier_gradients(state)
            gamma, eta = self.step_sizes(t)
            state.lam = np.maximum(0.0, state.lam + sign * gamma * grad_lam)
            state.mu = np.maximum(0.0, state.mu + sign * eta * grad_mu)
            state.outer = t + 1

            row = TraceRow(
                outer_iter=t,
                selected=self.selected_count(state),
                lagrangian=float(state.lagrangian),
                lambda_norm=float(np.linalg.norm(state.lam)),
                mu_norm=float(np.linalg.norm(state.mu)),
                mu_grad_norm=float(np.linalg.norm(grad_mu)),
            )
            state.trace.append(row)
            signals.outer_iteration_completed.send(
                sender=type(self), state=state, row=row
            )

        signals.run_completed.send(sender=type(self), state=state)
        return state
