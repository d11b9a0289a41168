"""Continuous convection-diffusion problems -eps*Lap(u) + b.grad(u) + c*u = f.

All coefficient callables take numpy arrays ``(x, y)`` and must broadcast.
Only homogeneous Dirichlet data is supported.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, UnsupportedOperationError

Scalar2D = Callable[[np.ndarray, np.ndarray], np.ndarray]
ExactFn = Callable[[np.ndarray, np.ndarray], tuple]


def constant(value: float) -> Scalar2D:
    def fn(x, y):
        return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, float(value))

    fn.constant = float(value)
    return fn


@dataclass(frozen=True)
class ProblemSpec:
    epsilon: float
    b1: Scalar2D
    b2: Scalar2D
    c: Scalar2D
    f: Scalar2D
    mu0: float
    beta1: float
    beta2: float
    exact: Optional[ExactFn] = None
    div_b: Optional[Scalar2D] = None
    name: str = "custom"

    def __post_init__(self):
        for attr in ("epsilon", "mu0", "beta1", "beta2"):
            if not float(getattr(self, attr)) > 0:
                raise ConfigurationError(f"{attr} must be positive")

    @property
    def has_exact(self) -> bool:
        return self.exact is not None

    def reaction_margin(self, x, y) -> np.ndarray:
        """c - div(b)/2 at the given points (central differences if div_b is unset)."""
        x, y = np.asarray(x, float), np.asarray(y, float)
        if self.div_b is not None:
            div = self.div_b(x, y)
        else:
            h = 1e-6
            div = ((self.b1(x + h, y) - self.b1(x - h, y))
                   + (self.b2(x, y + h) - self.b2(x, y - h))) / (2 * h)
        return self.c(x, y) - 0.5 * div

    def check(self, n_samples: int = 101) -> None:
        """Validate data that cannot be checked at construction.

        Raises ConfigurationError if the exact solution (when present) does
        not vanish on the boundary.
        """
        if self.exact is None:
            return
        t = np.linspace(0.0, 1.0, n_samples)
        zero, one = np.zeros_like(t), np.ones_like(t)
        for x, y in ((t, zero), (t, one), (zero, t), (one, t)):
            u = self.exact(x, y)[0]
            if np.max(np.abs(u)) > 1e-12:
                raise ConfigurationError(
                    f"exact solution of problem {self.name!r} is nonzero on the boundary")


def eval_exact(problem: ProblemSpec, x, y):
    """Return ``(u, u_x, u_y)`` of the exact solution at ``(x, y)``."""
    if problem.exact is None:
        raise UnsupportedOperationError(f"problem {problem.name!r} has no exact solution")
    return problem.exact(np.asarray(x, float), np.asarray(y, float))


def make_test_problem(epsilon: float) -> ProblemSpec:
    """Constant-coefficient problem b=(2, 1), c=1 with two outflow layers.

    Exact solution u = g(x) h(y) with g = 2 sin(x) (1 - exp(-2(1-x)/eps)) and
    h = y^2 (1 - exp(-(1-y)/eps)). The source is written with the O(1/eps)
    terms cancelled by hand, so it stays finite even when exp underflows and
    1/eps**2 would overflow.
    """
    eps = float(epsilon)
    if not eps > 0:
        raise ConfigurationError("epsilon must be positive")

    def parts_x(x):
        ex = np.exp(-2.0 * (1.0 - x) / eps)
        s, c = np.sin(x), np.cos(x)
        g = 2.0 * s * (1.0 - ex)
        gx = 2.0 * c * (1.0 - ex) - (4.0 / eps) * s * ex
        # -eps*g'' + 2*g'
        lg = 2.0 * eps * s * (1.0 - ex) + 4.0 * c * (1.0 - ex) + 8.0 * c * ex
        return g, gx, lg

    def parts_y(y):
        ey = np.exp(-(1.0 - y) / eps)
        h = y * y * (1.0 - ey)
        hy = 2.0 * y * (1.0 - ey) - (y * y / eps) * ey
        # -eps*h'' + h'
        lh = -2.0 * eps * (1.0 - ey) + 2.0 * y * (1.0 - ey) + 4.0 * y * ey
        return h, hy, lh

    def exact(x, y):
        g, gx, _ = parts_x(x)
        h, hy, _ = parts_y(y)
        return g * h, gx * h, g * hy

    def f(x, y):
        g, _, lg = parts_x(np.asarray(x, float))
        h, _, lh = parts_y(np.asarray(y, float))
        return lg * h + g * lh + g * h

    return ProblemSpec(
        epsilon=eps,
        b1=constant(2.0),
        b2=constant(1.0),
        c=constant(1.0),
        f=f,
        mu0=1.0,
        beta1=2.0,
        beta2=1.0,
        exact=exact,
        div_b=constant(0.0),
        name="outflow-layers",
    )


def make_linear_problem(epsilon: float) -> ProblemSpec:
    """Exact solution u = 1 + 2x + 3y with the test problem's coefficients.

    The boundary data is not homogeneous, so this problem cannot be solved by
    the assembler; it exists for interpolation checks (linear reproduction).
    """

    def exact(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return 1.0 + 2.0 * x + 3.0 * y, np.full(x.shape, 2.0), np.full(x.shape, 3.0)

    def f(x, y):
        return 2.0 * 2.0 + 3.0 + exact(x, y)[0]

    return ProblemSpec(
        epsilon=float(epsilon), b1=constant(2.0), b2=constant(1.0), c=constant(1.0),
        f=f, mu0=1.0, beta1=2.0, beta2=1.0, exact=exact, div_b=constant(0.0),
        name="linear-exact",
    )


def make_anticoercive_problem(epsilon: float) -> ProblemSpec:
    """Test problem with the reaction flipped to c = -3 while still claiming mu0 = 1.

    The declared mu0 is a lie on purpose: the SD coercivity check must flag it.
    """
    base = make_test_problem(epsilon)
    return ProblemSpec(
        epsilon=base.epsilon, b1=base.b1, b2=base.b2, c=constant(-3.0), f=base.f,
        mu0=1.0, beta1=base.beta1, beta2=base.beta2, exact=None,
        div_b=constant(0.0), name="anti-coercive",
    )


PROBLEMS: dict[str, Callable[[float], ProblemSpec]] = {
    "outflow-layers": make_test_problem,
    "paper-sec5": make_test_problem,  # legacy alias
    "linear-exact": make_linear_problem,
    "anti-coercive": make_anticoercive_problem,
}


def get_problem(name: str, epsilon: float) -> ProblemSpec:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return factory(epsilon)
