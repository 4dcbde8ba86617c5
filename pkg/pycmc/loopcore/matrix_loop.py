import logging
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from pycmc.config import DEFAULT_TOLERANCES, Tolerances
from pycmc.exceptions import BandwidthError, DomainError, PoleError, SingularLoopError
from pycmc.loopcore.annulus import Annulus, circle_points
from pycmc.loopcore.linalg import IDENTITY, adj2, dagger, det2, inv2, op_norm

# relative size below which trailing Laurent coefficients are dropped
TRIM_RTOL = 1e-15
# relative round-off level of a DFT coefficient, per log2 of the sample count
FFT_NOISE = 4 * np.finfo(float).eps
# largest |k log r| for which r^{-k} is rescaled without overflow
LOG_SCALE_CAP = 350.0


def _horner(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Σ_j coeffs[j] x^j for matrix coefficients, vectorized over x."""
    out = np.zeros(x.shape + (2, 2), dtype=complex)
    for c in coeffs[::-1]:
        out = out * x[:, None, None] + c
    return out


def _log_weights(ks: np.ndarray, circles: Tuple[float, float]) -> np.ndarray:
    lo, hi = circles
    ks = np.asarray(ks, dtype=float)
    return np.maximum(ks * np.log(lo), ks * np.log(hi))


class MatrixLoop:
    """A 2×2 matrix loop stored as a truncated two-sided Laurent series.

    The loop is X(λ) = Σ_{k=kmin}^{kmax} X_k λ^k. It is primarily defined on
    the circle C_r (``radius``); ``annulus`` is the declared annulus of
    validity, outside of which evaluation raises ``DomainError``. Trimming of
    negligible coefficients measures each X_k by its largest size
    max(lo^k, hi^k)·‖X_k‖ on the two ``circles`` (by default both equal to
    C_r), so that a unitary factor stored for the annulus 𝒜_{r,1/r} keeps
    the coefficients that matter on both boundary circles.

    Instances are immutable after construction.

    Args:
        coeffs: array of shape (n, 2, 2), the coefficients X_kmin, ..., X_kmax.
        kmin: int, Laurent index of ``coeffs[0]``.
        radius: float, radius r of the primary circle C_r.
        annulus: Optional[Annulus], annulus of validity. Default is ℂ*.
        tag: Optional[str], one of "unitary", "positive", "hermitian" or None.
        samples_hint: Optional[int], number of samples M used to build the loop.
        truncation_residual: float, size of what was dropped when truncating.
        circles: Optional[Tuple[float, float]], circles used by trimming.

    **Examples:**
        >>> loop = MatrixLoop.monomial(-1, [[0, 1], [0, 0]])
        >>> loop.eval(2.0)[0, 1]
        (0.5+0j)
    """

    def __init__(
        self,
        coeffs,
        kmin: int = 0,
        radius: float = 1.0,
        annulus: Optional[Annulus] = None,
        tag: Optional[str] = None,
        samples_hint: Optional[int] = None,
        truncation_residual: float = 0.0,
        circles: Optional[Tuple[float, float]] = None,
    ):
        coeffs = np.array(coeffs, dtype=complex)
        if coeffs.ndim == 2:
            coeffs = coeffs[None]
        assert coeffs.ndim == 3 and coeffs.shape[1:] == (2, 2), (
            f"coefficients must have shape (n, 2, 2), got {coeffs.shape}"
        )
        assert 0 < radius, f"radius must be positive, got {radius}"
        coeffs.flags.writeable = False
        self.coeffs = coeffs
        self.kmin = int(kmin)
        self.radius = float(radius)
        self.annulus = annulus if annulus is not None else Annulus.plane()
        self.tag = tag
        self.samples_hint = samples_hint
        self.truncation_residual = float(truncation_residual)
        self.circles = circles if circles is not None else (self.radius, self.radius)

    # ---------------------------------------------------------------- builders

    @classmethod
    def constant(cls, m, **kwargs) -> "MatrixLoop":
        return cls(np.asarray(m, dtype=complex)[None], 0, **kwargs)

    @classmethod
    def identity(cls, **kwargs) -> "MatrixLoop":
        return cls.constant(IDENTITY, **kwargs)

    @classmethod
    def monomial(cls, k: int, m, **kwargs) -> "MatrixLoop":
        return cls(np.asarray(m, dtype=complex)[None], k, **kwargs)

    @classmethod
    def from_samples(
        cls,
        values,
        radius: float = 1.0,
        trim_rtol: float = TRIM_RTOL,
        **kwargs,
    ) -> "MatrixLoop":
        """Builds a loop from values at the M equispaced points of C_r.

        The DFT of the samples gives ĉ_k = X_k r^k for |k| < M/2; the loop
        keeps the contiguous index range whose ĉ_k exceed ``trim_rtol``
        relative to the largest one. Off the unit circle, coefficients at the
        DFT round-off floor are zeroed before the r^{-k} rescaling, and indices
        with |k log r| beyond ``LOG_SCALE_CAP`` are dropped. The truncation
        residual is the dropped mass plus the size of the band edge (an
        aliasing indicator).

        Args:
            values: array of shape (M, 2, 2), values at radius·exp(2πij/M).
            radius: float, radius of the sampling circle.
            trim_rtol: float, relative trimming threshold.
            **kwargs: forwarded to the constructor (annulus, tag, circles).

        Returns:
            loop: MatrixLoop.
        """
        values = np.asarray(values, dtype=complex)
        m = values.shape[0]
        chat = np.fft.fft(values, axis=0) / m
        ks = np.rint(np.fft.fftfreq(m, d=1.0 / m)).astype(int)
        order = np.argsort(ks)
        ks, chat = ks[order], chat[order]
        norms = op_norm(chat)
        top = norms.max() if norms.size else 0.0
        if not np.isfinite(top):
            raise DomainError("from_samples: non-finite loop samples")
        if top == 0.0:
            return cls(np.zeros((1, 2, 2)), 0, radius=radius, samples_hint=m, **kwargs)
        log_r = np.log(radius)
        if log_r != 0.0:
            # below the FFT round-off floor ĉ_k carries no information about X_k
            floor = max(trim_rtol, FFT_NOISE * np.log2(max(m, 2))) * top
            noise = norms <= floor
            # r^{-k} is only representable for |k log r| up to the cap
            unscalable = ~noise & (np.abs(ks * log_r) > LOG_SCALE_CAP)
            chat = np.where((noise | unscalable)[:, None, None], 0.0, chat)
            capped = norms[unscalable].sum()
            norms = np.where(noise | unscalable, 0.0, norms)
        else:
            floor, capped = trim_rtol * top, 0.0
        keep = np.nonzero(norms > floor)[0]
        if not keep.size:
            raise DomainError(f"from_samples: no coefficient can be rescaled from radius {radius:g}")
        lo, hi = keep[0], keep[-1]
        dropped = norms[:lo].sum() + norms[hi + 1 :].sum() + capped
        edge = norms[np.abs(ks) > 3 * m // 8].max() if m >= 8 else 0.0
        kept_ks = ks[lo : hi + 1]
        coeffs = chat[lo : hi + 1] * np.exp(-kept_ks * log_r)[:, None, None]
        return cls(
            coeffs,
            int(kept_ks[0]),
            radius=radius,
            samples_hint=m,
            truncation_residual=max(dropped, edge),
            **kwargs,
        )

    @classmethod
    def from_function(
        cls,
        func: Callable,
        radius: float = 1.0,
        tol: Tolerances = DEFAULT_TOLERANCES,
        **kwargs,
    ) -> "MatrixLoop":
        """Adaptive sampling of a vectorized function λ ↦ 2×2 on C_r.

        Starts at bandwidth ``tol.bandwidth`` with M = max(tol.samples, 4K)
        samples and doubles until the interpolant reproduces ``func`` on the
        midpoints of the sampling grid to ``tol.truncation`` (relative to the
        sup of the function).

        Raises:
            BandwidthError: if the bandwidth would exceed ``tol.max_bandwidth``.
        """
        k = tol.bandwidth
        m = max(tol.samples, 4 * k)
        while True:
            loop = cls.from_samples(func(circle_points(radius, m)), radius=radius, **kwargs)
            mid = circle_points(radius, m, offset=0.5)
            ref = np.asarray(func(mid), dtype=complex)
            scale = max(1.0, float(op_norm(ref).max()))
            err = float(op_norm(loop._eval_flat(mid) - ref).max()) / scale
            if err <= tol.truncation:
                loop.truncation_residual = max(loop.truncation_residual / scale, err)
                return loop
            if 2 * k > tol.max_bandwidth:
                raise BandwidthError(
                    f"midpoint residual {err:.3e} above {tol.truncation:g} "
                    f"at maximal bandwidth {k}"
                )
            logging.debug(f"from_function: residual {err:.3e}, doubling bandwidth to {2 * k}")
            k, m = 2 * k, 2 * m

    @classmethod
    def from_dict(cls, d: Dict) -> "MatrixLoop":
        """Inverse of ``to_dict``."""
        entries = d["coeffs"]
        if not entries:
            return cls(np.zeros((1, 2, 2)), 0, radius=d.get("radius", 1.0), tag=d.get("tag"))
        ks = [int(e[0]) for e in entries]
        kmin, kmax = min(ks), max(ks)
        coeffs = np.zeros((kmax - kmin + 1, 2, 2), dtype=complex)
        for k, flat in entries:
            values = [complex(re, im) for re, im in flat]
            coeffs[k - kmin] = np.array(values).reshape(2, 2)
        return cls(coeffs, kmin, radius=d.get("radius", 1.0), tag=d.get("tag"))

    def to_dict(self) -> Dict:
        """JSON object {radius, tag, coeffs: [[k, [[re, im] × 4]], ...]}."""
        entries = []
        for k, c in zip(self.indices, self.coeffs):
            if np.any(c != 0):
                entries.append([int(k), [[float(v.real), float(v.imag)] for v in c.ravel()]])
        return {"radius": self.radius, "tag": self.tag, "coeffs": entries}

    # ------------------------------------------------------------- inspection

    @property
    def kmax(self) -> int:
        return self.kmin + len(self.coeffs) - 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.kmin, self.kmax + 1)

    @property
    def bandwidth(self) -> int:
        return max(abs(self.kmin), abs(self.kmax))

    def coefficient(self, k: int) -> np.ndarray:
        if self.kmin <= k <= self.kmax:
            return self.coeffs[k - self.kmin].copy()
        return np.zeros((2, 2), dtype=complex)

    def coefficient_range(self, kmin: int, kmax: int) -> np.ndarray:
        """Coefficients X_kmin..X_kmax, zero padded outside the stored range."""
        out = np.zeros((max(kmax - kmin + 1, 0), 2, 2), dtype=complex)
        lo, hi = max(kmin, self.kmin), min(kmax, self.kmax)
        if lo <= hi:
            out[lo - kmin : hi - kmin + 1] = self.coeffs[lo - self.kmin : hi - self.kmin + 1]
        return out

    def scaled_norms(self) -> np.ndarray:
        """‖X_k‖·max(lo^k, hi^k) for the trimming circles."""
        with np.errstate(divide="ignore"):
            log_norms = np.log(op_norm(self.coeffs))
        return np.exp(log_norms + _log_weights(self.indices, self.circles))

    def negative_tail(self) -> float:
        """Σ_{k<0} ‖X_k‖ r^k, the size of the non-positive part on C_r."""
        ks = self.indices
        mask = ks < 0
        if not np.any(mask):
            return 0.0
        with np.errstate(divide="ignore", over="ignore"):
            log_norms = np.log(op_norm(self.coeffs[mask]))
            return float(np.sum(np.exp(log_norms + ks[mask] * np.log(self.radius))))

    def is_positive(self, tol: float = DEFAULT_TOLERANCES.equality) -> bool:
        return self.negative_tail() <= tol

    def __repr__(self):
        tag = f", tag={self.tag}" if self.tag else ""
        return f"MatrixLoop(k={self.kmin}..{self.kmax}, r={self.radius:g}{tag})"

    # ------------------------------------------------------------- evaluation

    def _eval_flat(self, lam: np.ndarray) -> np.ndarray:
        out = np.zeros(lam.shape + (2, 2), dtype=complex)
        if self.kmax >= 0:
            out += _horner(self.coefficient_range(0, self.kmax), lam)
        if self.kmin < 0:
            neg = self.coefficient_range(self.kmin, -1)[::-1]
            if np.any(neg != 0):
                zero = lam == 0
                if np.any(zero):
                    raise PoleError("loop with negative Laurent coefficients evaluated at λ = 0")
                mu = 1.0 / lam
                out += mu[:, None, None] * _horner(neg, mu)
        return out

    def eval(self, lam):
        """Evaluates the loop at a point or an array of points.

        Args:
            lam: complex or array of complex.

        Returns:
            values: array of shape lam.shape + (2, 2).

        Raises:
            PoleError: at λ = 0 when negative coefficients are present.
            DomainError: outside the annulus of validity.
        """
        lam = np.asarray(lam, dtype=complex)
        flat = lam.reshape(-1)
        if not np.all(self.annulus.contains(flat)):
            bad = flat[~self.annulus.contains(flat)][0]
            raise DomainError(f"λ = {bad:.6g} outside {self.annulus}")
        return self._eval_flat(flat).reshape(lam.shape + (2, 2))

    __call__ = eval

    def det(self, lam):
        return det2(self.eval(lam))

    def samples(self, m: Optional[int] = None, offset: float = 0.0):
        """λ-samples on C_r and the loop values there."""
        if m is None:
            m = self.samples_hint or max(DEFAULT_TOLERANCES.samples, 4 * self.bandwidth)
        lam = circle_points(self.radius, m, offset)
        return lam, self.eval(lam)

    def theta_derivative(self) -> "MatrixLoop":
        """d/dθ at λ = e^{iθ}: Σ i k X_k λ^k."""
        ks = self.indices
        return self._like(self.coeffs * (1j * ks)[:, None, None], self.kmin, tag=None)

    # ------------------------------------------------------------- arithmetic

    def _like(self, coeffs, kmin, tag=None, **kwargs) -> "MatrixLoop":
        params = dict(
            radius=self.radius,
            annulus=self.annulus,
            tag=tag,
            samples_hint=self.samples_hint,
            truncation_residual=self.truncation_residual,
            circles=self.circles,
        )
        params.update(kwargs)
        return MatrixLoop(coeffs, kmin, **params)

    def trim(self, rtol: float = TRIM_RTOL) -> "MatrixLoop":
        """Drops leading and trailing coefficients below ``rtol`` (scaled)."""
        norms = self.scaled_norms()
        top = norms.max()
        if top == 0:
            return self._like(np.zeros((1, 2, 2)), 0, tag=self.tag)
        keep = np.nonzero(norms > rtol * top)[0]
        lo, hi = keep[0], keep[-1]
        dropped = norms[:lo].sum() + norms[hi + 1 :].sum()
        return self._like(
            self.coeffs[lo : hi + 1],
            self.kmin + lo,
            tag=self.tag,
            truncation_residual=self.truncation_residual + dropped,
        )

    def star(self) -> "MatrixLoop":
        """X*(λ) = conj(X(1/conj λ))ᵀ, i.e. (X*)_k = (X_{−k})ᴴ."""
        lo, hi = self.circles
        tag = self.tag if self.tag in ("unitary", "hermitian") else None
        return MatrixLoop(
            dagger(self.coeffs[::-1]),
            -self.kmax,
            radius=1.0 / self.radius,
            annulus=self.annulus.inverted(),
            tag=tag,
            samples_hint=self.samples_hint,
            truncation_residual=self.truncation_residual,
            circles=(1.0 / hi, 1.0 / lo),
        )

    def adjugate(self) -> "MatrixLoop":
        return self._like(adj2(self.coeffs), self.kmin, tag=self.tag)

    def mul(self, other, tol: Tolerances = DEFAULT_TOLERANCES) -> "MatrixLoop":
        """Product by exact coefficient convolution, trimmed to the bandwidth cap.

        Raises:
            BandwidthError: if the part beyond ``tol.max_bandwidth`` is larger
                than ``tol.truncation``.
        """
        if not isinstance(other, MatrixLoop):
            other = MatrixLoop.constant(other, radius=self.radius)
        n1, n2 = len(self.coeffs), len(other.coeffs)
        out = np.zeros((n1 + n2 - 1, 2, 2), dtype=complex)
        for i in range(n1):
            out[i : i + n2] += np.matmul(self.coeffs[i], other.coeffs)
        kmin = self.kmin + other.kmin
        tag = self.tag if self.tag == other.tag and self.tag in ("unitary", "positive") else None
        prod = self._like(
            out,
            kmin,
            tag=tag,
            annulus=self.annulus.intersect(other.annulus),
            truncation_residual=self.truncation_residual + other.truncation_residual,
        ).trim()
        cap = tol.max_bandwidth
        if prod.kmin < -cap or prod.kmax > cap:
            norms = prod.scaled_norms()
            ks = prod.indices
            excess = float(norms[(ks < -cap) | (ks > cap)].sum())
            if excess > tol.truncation * max(1.0, norms.max()):
                raise BandwidthError(
                    f"product bandwidth {prod.bandwidth} exceeds {cap} "
                    f"with truncation residual {excess:.3e}"
                )
            lo, hi = max(prod.kmin, -cap), min(prod.kmax, cap)
            prod = prod._like(
                prod.coefficient_range(lo, hi),
                lo,
                tag=prod.tag,
                truncation_residual=prod.truncation_residual + excess,
            )
        return prod

    def inv(self, tol: Tolerances = DEFAULT_TOLERANCES) -> "MatrixLoop":
        """Inverse loop.

        SL(2) loops (det ≡ 1 on samples) are inverted exactly by the
        coefficient-wise adjugate; otherwise adjugate/det is resampled.

        Raises:
            SingularLoopError: if |det| drops below ``tol.singular`` on C_r.
        """
        _, values = self.samples(max(tol.samples, 4 * self.bandwidth + 4))
        d = det2(values)
        if np.min(np.abs(d)) < tol.singular:
            raise SingularLoopError(
                f"loop determinant {np.min(np.abs(d)):.3e} below {tol.singular:g} on C_r"
            )
        if np.max(np.abs(d - 1)) <= tol.equality:
            return self.adjugate()
        logging.debug("inv: determinant not identically one, resampling adj/det")
        return MatrixLoop.from_function(
            lambda lam: inv2(self._eval_flat(lam), tol.singular),
            radius=self.radius,
            tol=tol,
            annulus=self.annulus,
            circles=self.circles,
        )

    def __matmul__(self, other):
        return self.mul(other)

    def _binary(self, other, sign: float) -> "MatrixLoop":
        if not isinstance(other, MatrixLoop):
            other = MatrixLoop.constant(other, radius=self.radius)
        lo, hi = min(self.kmin, other.kmin), max(self.kmax, other.kmax)
        coeffs = self.coefficient_range(lo, hi) + sign * other.coefficient_range(lo, hi)
        return self._like(coeffs, lo, annulus=self.annulus.intersect(other.annulus))

    def __add__(self, other):
        return self._binary(other, 1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __neg__(self):
        return self._like(-self.coeffs, self.kmin)

    def __mul__(self, scalar):
        return self._like(self.coeffs * complex(scalar), self.kmin)

    __rmul__ = __mul__
