from typing import Callable, Optional

import numpy as np

from pycmc.config import DEFAULT_TOLERANCES, Tolerances
from pycmc.exceptions import DomainError
from pycmc.loopcore.annulus import Annulus
from pycmc.loopcore.linalg import IDENTITY, dagger, inv2
from pycmc.loopcore.matrix_loop import MatrixLoop

# step of the five-point θ-differences
THETA_STEP = 1e-3


class LoopFunction:
    """A loop given by a vectorized callable λ ↦ 2×2 matrix.

    Used wherever a loop must be evaluated off its sampling circle or close
    to a singularity (simple factors, dressed frames, reflected circles),
    where a truncated Laurent series would be ill-conditioned.

    Args:
        func: Callable, maps a 1-d array of λ to an array of shape (n, 2, 2).
        annulus: Optional[Annulus], annulus of validity. Default is ℂ*.
        radius: float, radius of the primary circle C_r.
        tag: Optional[str], "unitary", "positive", "hermitian" or None.
        name: Optional[str], label used in ``__repr__``.
    """

    def __init__(
        self,
        func: Callable,
        annulus: Optional[Annulus] = None,
        radius: float = 1.0,
        tag: Optional[str] = None,
        name: Optional[str] = None,
    ):
        self.func = func
        self.annulus = annulus if annulus is not None else Annulus.plane()
        self.radius = float(radius)
        self.tag = tag
        self.name = name or "loop"

    @classmethod
    def constant(cls, m, **kwargs) -> "LoopFunction":
        m = np.asarray(m, dtype=complex)
        return cls(lambda lam: np.broadcast_to(m, lam.shape + (2, 2)).copy(), **kwargs)

    @classmethod
    def identity(cls, **kwargs) -> "LoopFunction":
        return cls.constant(IDENTITY, name="id", **kwargs)

    def __repr__(self):
        return f"LoopFunction({self.name}, {self.annulus})"

    def eval(self, lam):
        lam = np.asarray(lam, dtype=complex)
        flat = lam.reshape(-1)
        inside = self.annulus.contains(flat)
        if not np.all(inside):
            raise DomainError(f"λ = {flat[~inside][0]:.6g} outside {self.annulus} of {self.name}")
        out = np.asarray(self.func(flat), dtype=complex)
        return out.reshape(lam.shape + (2, 2))

    __call__ = eval

    def star(self) -> "LoopFunction":
        func = self.func
        tag = self.tag if self.tag in ("unitary", "hermitian") else None
        return LoopFunction(
            lambda lam: dagger(func(1.0 / np.conj(lam))),
            annulus=self.annulus.inverted(),
            radius=1.0 / self.radius,
            tag=tag,
            name=f"{self.name}*",
        )

    def mul(self, other) -> "LoopFunction":
        other = as_loop_function(other, radius=self.radius)
        f, g = self.func, other.func
        tag = self.tag if self.tag == other.tag else None
        return LoopFunction(
            lambda lam: f(lam) @ g(lam),
            annulus=self.annulus.intersect(other.annulus),
            radius=self.radius,
            tag=tag,
            name=f"{self.name}·{other.name}",
        )

    def __matmul__(self, other):
        return self.mul(other)

    def __rmatmul__(self, other):
        return as_loop_function(other, radius=self.radius).mul(self)

    def inv(self, singular: float = DEFAULT_TOLERANCES.singular) -> "LoopFunction":
        func = self.func
        return LoopFunction(
            lambda lam: inv2(func(lam), singular),
            annulus=self.annulus,
            radius=self.radius,
            tag=self.tag,
            name=f"{self.name}⁻¹",
        )

    def theta_derivative(self, lam, h: float = THETA_STEP):
        """Five-point central difference of θ ↦ X(λe^{iθ}) at θ = 0."""
        lam = np.asarray(lam, dtype=complex)
        steps = np.exp(1j * h * np.array([-2.0, -1.0, 1.0, 2.0]))
        vals = [self.eval(lam * s) for s in steps]
        return (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h)

    def to_matrix_loop(
        self, radius: Optional[float] = None, tol: Tolerances = DEFAULT_TOLERANCES, **kwargs
    ) -> MatrixLoop:
        """Samples the function on C_r into a Laurent series (adaptive)."""
        radius = self.radius if radius is None else radius
        return MatrixLoop.from_function(self.eval, radius=radius, tol=tol, tag=self.tag, **kwargs)


def as_loop_function(x, radius: float = 1.0) -> LoopFunction:
    """Coerces a MatrixLoop, a constant matrix or a callable to a LoopFunction."""
    if isinstance(x, LoopFunction):
        return x
    if isinstance(x, MatrixLoop):
        return LoopFunction(x.eval, annulus=x.annulus, radius=x.radius, tag=x.tag, name=repr(x))
    if callable(x):
        return LoopFunction(x, radius=radius)
    return LoopFunction.constant(x, radius=radius, name="const")


def evaluate(x, lam):
    """Evaluates a loop-like object (MatrixLoop, LoopFunction, callable or matrix)."""
    if isinstance(x, (MatrixLoop, LoopFunction)):
        return x.eval(lam)
    lam = np.asarray(lam, dtype=complex)
    if callable(x):
        return np.asarray(x(lam.reshape(-1)), dtype=complex).reshape(lam.shape + (2, 2))
    return np.broadcast_to(np.asarray(x, dtype=complex), lam.shape + (2, 2)).copy()
