"""2D Gaussian primitives: densities, divergences, entropy, covering area.

Every role in a formation is modelled as a bivariate Gaussian with a mixture
weight.  All formulas below are closed-form for the 2x2 case; no iterative
linear algebra is involved, so everything here is cheap and exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Additive diagonal regularization target: covariance eigenvalues are kept at
# or above this floor (in m^2) so that precision matrices always exist.
DEFAULT_EIGENVALUE_FLOOR = 1e-6

_SYMMETRY_TOL = 1e-12
_LOG_2PI = math.log(2.0 * math.pi)


def _eigenvalues_2x2(cov: np.ndarray) -> tuple[float, float]:
    """Eigenvalues of a symmetric 2x2 matrix, largest first (closed form)."""
    a, b, c = float(cov[0, 0]), float(cov[0, 1]), float(cov[1, 1])
    half_trace = 0.5 * (a + c)
    disc = math.hypot(0.5 * (a - c), b)
    return half_trace + disc, half_trace - disc


@dataclass(frozen=True)
class Gaussian2D:
    """One role's generating distribution: mean, covariance, mixture weight.

    The covariance must be symmetric within 1e-12; it is exactly symmetrized
    on construction and its eigenvalues are raised to ``eig_floor`` by adding
    to the diagonal when necessary.  Arrays are copied and frozen.
    """

    mean: np.ndarray
    cov: np.ndarray
    weight: float = 1.0
    eig_floor: float = field(default=DEFAULT_EIGENVALUE_FLOOR, compare=False)

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(2)
        cov = np.array(self.cov, dtype=float).reshape(2, 2)
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise ValueError("Gaussian parameters must be finite")
        if abs(cov[0, 1] - cov[1, 0]) > _SYMMETRY_TOL * max(1.0, abs(cov[0, 1])):
            raise ValueError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        lo = _eigenvalues_2x2(cov)[1]
        if lo < self.eig_floor:
            cov = cov + (self.eig_floor - lo) * np.eye(2)
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"weight {self.weight} outside [0, 1]")
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "weight", float(self.weight))

    @property
    def det(self) -> float:
        c = self.cov
        return float(c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0])

    @property
    def precision(self) -> np.ndarray:
        c = self.cov
        return np.array([[c[1, 1], -c[0, 1]], [-c[1, 0], c[0, 0]]]) / self.det

    def to_dict(self) -> dict:
        return {
            "mean": [float(v) for v in self.mean],
            "cov": [[float(v) for v in row] for row in self.cov],
            "weight": self.weight,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Gaussian2D":
        return cls(mean=np.array(d["mean"]), cov=np.array(d["cov"]),
                   weight=float(d["weight"]))


def covariance_eigenvalues(g: Gaussian2D) -> tuple[float, float]:
    """(lambda1, lambda2) of the covariance with lambda1 >= lambda2 > 0."""
    return _eigenvalues_2x2(g.cov)


def gaussian_log_pdf(g: Gaussian2D, x) -> np.ndarray | float:
    """Log-density of ``x`` under ``g`` in nats.

    ``x`` may be a single 2-vector or an (..., 2) array; the result has the
    leading shape of ``x``.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    diff = np.atleast_2d(x) - g.mean
    p = g.precision
    maha = (diff[:, 0] ** 2 * p[0, 0]
            + 2.0 * diff[:, 0] * diff[:, 1] * p[0, 1]
            + diff[:, 1] ** 2 * p[1, 1])
    out = -_LOG_2PI - 0.5 * math.log(g.det) - 0.5 * maha
    return float(out[0]) if scalar else out


def bhattacharyya_distance(p: Gaussian2D, q: Gaussian2D) -> float:
    """Bhattacharyya distance between two Gaussians.

    D = 1/8 dmu' S^-1 dmu + 1/2 ln(det S / sqrt(det Sp det Sq)) where
    S = (Sp + Sq) / 2.  Symmetric, zero iff the distributions coincide.
    """
    mid = 0.5 * (p.cov + q.cov)
    det_mid = mid[0, 0] * mid[1, 1] - mid[0, 1] * mid[1, 0]
    if det_mid <= 0.0:
        raise ArithmeticError("midpoint covariance is numerically singular")
    diff = p.mean - q.mean
    inv = np.array([[mid[1, 1], -mid[0, 1]], [-mid[1, 0], mid[0, 0]]]) / det_mid
    maha = float(diff @ inv @ diff)
    return 0.125 * maha + 0.5 * math.log(det_mid / math.sqrt(p.det * q.det))


def mahalanobis_between_means(p: Gaussian2D, q: Gaussian2D) -> float:
    """Mahalanobis distance between the means under the averaged covariance.

    Alternative alignment cost to the Bhattacharyya distance; ignores the
    shape mismatch term entirely.
    """
    mid = 0.5 * (p.cov + q.cov)
    det_mid = mid[0, 0] * mid[1, 1] - mid[0, 1] * mid[1, 0]
    if det_mid <= 0.0:
        raise ArithmeticError("midpoint covariance is numerically singular")
    diff = p.mean - q.mean
    inv = np.array([[mid[1, 1], -mid[0, 1]], [-mid[1, 0], mid[0, 0]]]) / det_mid
    return math.sqrt(max(0.0, float(diff @ inv @ diff)))


def kl_divergence(p: Gaussian2D, q: Gaussian2D) -> float:
    """KL(p || q) in nats, closed form for Gaussians.  Asymmetric, >= 0."""
    qinv = q.precision
    diff = q.mean - p.mean
    trace_term = float(np.trace(qinv @ p.cov))
    maha = float(diff @ qinv @ diff)
    val = 0.5 * (trace_term + maha - 2.0 + math.log(q.det / p.det))
    # identical inputs can land a few ulp below zero; true KL never does
    return 0.0 if -1e-9 < val < 0.0 else val


def differential_entropy(g: Gaussian2D) -> float:
    """Differential entropy in nats: 1/2 ln((2 pi e)^2 det cov)."""
    return 1.0 + _LOG_2PI + 0.5 * math.log(g.det)


def role_area(g: Gaussian2D, convention: str = "inverse") -> float:
    """Field area statistic for one role.

    ``convention="inverse"`` returns pi / sqrt(lambda1 * lambda2), the
    statistic used when comparing methods; ``convention="ellipse"`` returns
    the one-sigma ellipse area pi * sqrt(lambda1 * lambda2).
    """
    root = math.sqrt(g.det)
    if convention == "inverse":
        return math.pi / root
    if convention == "ellipse":
        return math.pi * root
    raise ValueError(f"unknown area convention: {convention!r}")
