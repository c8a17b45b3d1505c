"""Finite-sum nonsmooth test problems with selection and hull oracles.

f(x) = (1/N) sum_i f_i(x). Each problem answers value and selection queries
per component (what the sampled loop needs) and for the whole sum. The
piecewise-linear problems also describe conv(D_f(x)) exactly as a zonotope,
which is what the stationarity diagnostics consume.
"""
import itertools
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from config import Config
from utils.logger import get_logger

from .errors import HullUnavailableError, InvalidInputError, InvalidParameterError, TooManyKinksError
from .fields import as_vector


logger = get_logger(__name__)

SIDES = ("plus", "minus")
LOSSES = ("l1", "half-square")


@dataclass(frozen=True)
class HullDescription:
    """Finite vertex list whose convex hull is the described set."""

    vertices: np.ndarray

    def __post_init__(self):
        verts = np.atleast_2d(np.asarray(self.vertices, dtype=np.float64))
        if verts.shape[0] == 0:
            raise InvalidInputError("hull needs at least one vertex")
        object.__setattr__(self, "vertices", verts)

    @property
    def dimension(self) -> int:
        return int(self.vertices.shape[1])

    def __len__(self) -> int:
        return int(self.vertices.shape[0])


@dataclass(frozen=True)
class Zonotope:
    """
    center + sum_j s_j * generators[j] with every s_j in [-1, 1].

    For sums of absolute values of affine terms this is exactly conv(D_f(x)):
    smooth terms land in the center, every kinked term adds one generator.
    """

    center: np.ndarray
    generators: np.ndarray

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64)
        gens = np.asarray(self.generators, dtype=np.float64).reshape(-1, center.size)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "generators", gens)

    @property
    def kinks(self) -> int:
        return int(self.generators.shape[0])

    def vertices(self, cap: Optional[int] = None) -> HullDescription:
        """
        Enumerate center + sum(+-generators) over every sign pattern.

        Raises:
            TooManyKinksError: more generators than ``cap`` (defaults to Config.HULL_KINK_CAP)
        """
        cap = Config.HULL_KINK_CAP if cap is None else cap
        if self.kinks > cap:
            raise TooManyKinksError(self.kinks, cap)
        if self.kinks == 0:
            return HullDescription(self.center[None, :])
        signs = np.array(list(itertools.product((1.0, -1.0), repeat=self.kinks)))
        return HullDescription(self.center[None, :] + signs @ self.generators)


class FiniteSumProblem:
    """
    Base class for f(x) = (1/N) sum_i f_i(x) with per-component oracles.

    Subclasses implement the component oracles; averaging and input checks
    live here. Component indices are 0-based internally.
    """

    name = "finite-sum"
    has_hull = False

    def __init__(self, n_components: int, dimension: int):
        if n_components < 1 or dimension < 1:
            raise InvalidParameterError(
                f"need N >= 1 and n >= 1, got N={n_components}, n={dimension}"
            )
        self.n_components = n_components
        self.dimension = dimension

    def check_point(self, x) -> np.ndarray:
        """Validate x against the problem dimension."""
        x = as_vector(x, "x")
        if x.size != self.dimension:
            raise InvalidInputError(f"x has dimension {x.size}, problem expects {self.dimension}")
        return x

    def _check_component(self, i: int) -> None:
        if not 0 <= i < self.n_components:
            raise InvalidInputError(f"component index {i} outside [0, {self.n_components})")

    def component_value(self, i: int, x) -> float:
        raise NotImplementedError

    def component_selection(self, i: int, x) -> np.ndarray:
        raise NotImplementedError

    def full_objective(self, x) -> float:
        x = self.check_point(x)
        return sum(self.component_value(i, x) for i in range(self.n_components)) / self.n_components

    def full_selection(self, x) -> np.ndarray:
        x = self.check_point(x)
        total = np.zeros(self.dimension)
        for i in range(self.n_components):
            total += self.component_selection(i, x)
        return total / self.n_components

    def zonotope_at(self, x, radius: float = 0.0) -> Zonotope:
        raise HullUnavailableError(f"{self.name} exposes no hull oracle")

    def hull_at(self, x) -> HullDescription:
        raise HullUnavailableError(f"{self.name} exposes no hull oracle")

    def selection_variants(self, count: int) -> List["FiniteSumProblem"]:
        """Copies of the problem that differ only in the kink/activation selection rule."""
        return [self]

    def describe(self) -> dict:
        return {"name": self.name, "N": self.n_components, "n": self.dimension}


class PiecewiseLinearProblem(FiniteSumProblem):
    """
    Components are sums of absolute values of affine terms.

    f_i(x) = sum_{r in terms(i)} |<a_r, x> + c_r|.  At an exact kink
    (residual == 0) the selection takes the configured side limit: +1 for
    "plus", -1 for "minus".
    """

    has_hull = True

    def __init__(
        self,
        rows,
        offsets,
        owners: Sequence[int],
        n_components: int,
        side: str = "plus",
        name: str = "piecewise-linear",
    ):
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        offsets = np.asarray(offsets, dtype=np.float64).reshape(-1)
        owners = np.asarray(owners, dtype=np.int64).reshape(-1)
        if not (rows.shape[0] == offsets.size == owners.size):
            raise InvalidInputError("rows, offsets and owners must have one entry per term")
        if not (np.all(np.isfinite(rows)) and np.all(np.isfinite(offsets))):
            raise InvalidInputError("problem data contains non-finite entries")
        if side not in SIDES:
            raise InvalidParameterError(f"side must be one of {SIDES}, got {side!r}")
        super().__init__(n_components, rows.shape[1])
        if owners.min() < 0 or owners.max() >= n_components:
            raise InvalidInputError("term owner outside the component range")
        self.name = name
        self.rows = rows
        self.offsets = offsets
        self.owners = owners
        self.side = side
        self._kink_sign = 1.0 if side == "plus" else -1.0
        self._terms = [np.flatnonzero(owners == i) for i in range(n_components)]
        self._row_norms = np.linalg.norm(rows, axis=1)
        self.planted: Optional[np.ndarray] = None

    def _signs(self, residuals: np.ndarray) -> np.ndarray:
        s = np.sign(residuals)
        s[residuals == 0.0] = self._kink_sign
        return s

    def residuals(self, x) -> np.ndarray:
        return self.rows @ self.check_point(x) + self.offsets

    def component_value(self, i: int, x) -> float:
        self._check_component(i)
        idx = self._terms[i]
        x = self.check_point(x)
        return float(np.sum(np.abs(self.rows[idx] @ x + self.offsets[idx])))

    def component_selection(self, i: int, x) -> np.ndarray:
        self._check_component(i)
        idx = self._terms[i]
        x = self.check_point(x)
        s = self._signs(self.rows[idx] @ x + self.offsets[idx])
        return s @ self.rows[idx]

    def full_objective(self, x) -> float:
        return float(np.sum(np.abs(self.residuals(x)))) / self.n_components

    def full_selection(self, x) -> np.ndarray:
        return (self._signs(self.residuals(x)) @ self.rows) / self.n_components

    def zonotope_at(self, x, radius: float = 0.0) -> Zonotope:
        """
        conv(D_f(x)) as a zonotope; with radius > 0, terms whose hyperplane is
        within ``radius`` of x count as kinked.
        """
        if radius < 0.0:
            raise InvalidParameterError(f"radius must be >= 0, got {radius}")
        r = self.residuals(x)
        kinked = np.abs(r) <= radius * self._row_norms
        smooth = ~kinked
        center = (np.sign(r[smooth]) @ self.rows[smooth]) / self.n_components
        return Zonotope(center, self.rows[kinked] / self.n_components)

    def hull_at(self, x) -> HullDescription:
        return self.zonotope_at(x).vertices()

    def describe(self) -> dict:
        info = super().describe()
        info.update({"terms": int(self.rows.shape[0]), "side": self.side})
        return info


def make_counterexample(side: str = "plus") -> PiecewiseLinearProblem:
    """g(u, v) = |2u + v| + |u + 10|, a single component with two kinked terms."""
    return PiecewiseLinearProblem(
        rows=[[2.0, 1.0], [1.0, 0.0]],
        offsets=[0.0, 10.0],
        owners=[0, 0],
        n_components=1,
        side=side,
        name="counterexample",
    )


def make_l1_regression(A, b, side: str = "plus") -> PiecewiseLinearProblem:
    """
    Least absolute deviations: f_i(x) = |<a_i, x> - b_i|.

    Args:
        A: N x n design matrix
        b: N labels
        side: kink side limit used by the selection

    Raises:
        InvalidInputError: shape mismatch or non-finite data
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if A.shape[0] != b.size:
        raise InvalidInputError(f"A has {A.shape[0]} rows but b has {b.size} entries")
    return PiecewiseLinearProblem(
        rows=A,
        offsets=-b,
        owners=np.arange(A.shape[0]),
        n_components=A.shape[0],
        side=side,
        name="l1-regression",
    )


def synthetic_data(N: int, n: int, noise: float, seed: int):
    """Rows from a unit normal, labels from a planted unit-normal model plus uniform noise."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((N, n))
    planted = rng.standard_normal(n)
    b = A @ planted
    if noise > 0.0:
        b = b + rng.uniform(-noise, noise, size=N)
    return A, b, planted


def make_planted_l1_regression(
    N: int, n: int, noise: float = 0.0, seed: int = 0, side: str = "plus"
) -> PiecewiseLinearProblem:
    A, b, planted = synthetic_data(N, n, noise, seed)
    problem = make_l1_regression(A, b, side=side)
    problem.planted = planted
    logger.debug(f"Planted l1 regression N={N} n={n} noise={noise} seed={seed}")
    return problem


class ReluNetProblem(FiniteSumProblem):
    """
    One-hidden-layer ReLU network, x packs (W1, b1, w2, b2).

    The selection is reverse-mode differentiation with ReLU'(0) := c_relu,
    i.e. one conservative-field selection an AD framework would produce.
    At a zero residual the l1 loss derivative is taken as 0.
    """

    name = "relu-net"

    def __init__(self, widths: Sequence[int], data_a, data_b, loss: str = "l1", c_relu: float = 0.0):
        widths = [int(w) for w in widths]
        if len(widths) != 3 or widths[2] != 1 or min(widths) < 1:
            raise InvalidInputError(f"widths must be [n_in, n_hidden, 1], got {widths}")
        if loss not in LOSSES:
            raise InvalidParameterError(f"loss must be one of {LOSSES}, got {loss!r}")
        if not 0.0 <= c_relu <= 1.0:
            raise InvalidParameterError(f"c_relu must lie in [0, 1], got {c_relu}")
        a = np.atleast_2d(np.asarray(data_a, dtype=np.float64))
        b = np.asarray(data_b, dtype=np.float64).reshape(-1)
        if a.shape[1] != widths[0] or a.shape[0] != b.size:
            raise InvalidInputError(
                f"data shape {a.shape} / {b.size} labels does not match input width {widths[0]}"
            )
        n_in, hidden, _ = widths
        super().__init__(a.shape[0], hidden * n_in + 2 * hidden + 1)
        self.widths = widths
        self.data_a = a
        self.data_b = b
        self.loss = loss
        self.c_relu = float(c_relu)

    def unpack(self, x):
        """Split the flat parameter vector into (W1, b1, w2, b2)."""
        n_in, hidden, _ = self.widths
        x = self.check_point(x)
        cut1 = hidden * n_in
        W1 = x[:cut1].reshape(hidden, n_in)
        b1 = x[cut1:cut1 + hidden]
        w2 = x[cut1 + hidden:cut1 + 2 * hidden]
        b2 = x[-1]
        return W1, b1, w2, b2

    def _forward(self, x, a: np.ndarray):
        W1, b1, w2, b2 = self.unpack(x)
        z1 = a @ W1.T + b1
        h1 = np.maximum(z1, 0.0)
        out = h1 @ w2 + b2
        return (W1, w2), (z1, h1), out

    def _loss(self, residual: np.ndarray) -> np.ndarray:
        if self.loss == "l1":
            return np.abs(residual)
        return 0.5 * residual * residual

    def _loss_derivative(self, residual: np.ndarray) -> np.ndarray:
        if self.loss == "l1":
            return np.sign(residual)
        return residual

    def _backward(self, x, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        (W1, w2), (z1, h1), out = self._forward(x, a)
        dout = self._loss_derivative(out - b)
        relu_grad = np.where(z1 > 0.0, 1.0, np.where(z1 < 0.0, 0.0, self.c_relu))
        dz1 = (dout[:, None] * w2[None, :]) * relu_grad
        dW1 = dz1.T @ a
        db1 = dz1.sum(axis=0)
        dw2 = dout @ h1
        db2 = dout.sum()
        return np.concatenate([dW1.ravel(), db1, dw2, [db2]])

    def component_value(self, i: int, x) -> float:
        self._check_component(i)
        _, _, out = self._forward(x, self.data_a[i:i + 1])
        return float(self._loss(out - self.data_b[i:i + 1])[0])

    def component_selection(self, i: int, x) -> np.ndarray:
        self._check_component(i)
        return self._backward(x, self.data_a[i:i + 1], self.data_b[i:i + 1])

    def full_objective(self, x) -> float:
        _, _, out = self._forward(x, self.data_a)
        return float(np.mean(self._loss(out - self.data_b)))

    def full_selection(self, x) -> np.ndarray:
        return self._backward(x, self.data_a, self.data_b) / self.n_components

    def with_c_relu(self, c_relu: float) -> "ReluNetProblem":
        return ReluNetProblem(self.widths, self.data_a, self.data_b, self.loss, c_relu)

    def selection_variants(self, count: int) -> List[FiniteSumProblem]:
        return [self.with_c_relu(float(c)) for c in np.linspace(0.0, 1.0, count)]

    def describe(self) -> dict:
        info = super().describe()
        info.update({"widths": list(self.widths), "loss": self.loss, "c_relu": self.c_relu})
        return info


def make_relu_net(widths, data_a, data_b, loss: str = "l1", c_relu: float = 0.0) -> ReluNetProblem:
    return ReluNetProblem(widths, data_a, data_b, loss, c_relu)


def full_objective(problem: FiniteSumProblem, x) -> float:
    return problem.full_objective(x)


def full_selection(problem: FiniteSumProblem, x) -> np.ndarray:
    return problem.full_selection(x)


def hull_at(problem: FiniteSumProblem, x) -> HullDescription:
    """Vertex enumeration of conv(D_f(x)); raises HullUnavailableError on network problems."""
    return problem.hull_at(x)
