"""Offspring distributions and their shifted step laws."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ValidationError

PMF_TOL = 1e-12
# probability mass dropped when truncating infinite-support laws
TRUNCATION_MASS = 1e-14


@dataclass(frozen=True, eq=False)
class OffspringLaw:
    """Probability mass function ``mu`` on the non-negative integers.

    ``pmf[j]`` is the probability of ``j`` children.  The step law of the
    coding walk is ``nu(j) = mu(j + 1)`` for ``j >= -1``; it is exposed as
    :attr:`step_pmf` with offset ``-1``.
    """

    pmf: np.ndarray
    tail_index: float | None = None
    name: str = ""
    truncated_mass: float = 0.0
    _cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        if pmf.ndim != 1 or pmf.size == 0:
            raise ValidationError("pmf must be a non-empty 1-d sequence")
        if np.any(pmf < 0) or not np.all(np.isfinite(pmf)):
            raise ValidationError("pmf entries must be finite and non-negative")
        total = pmf.sum()
        if abs(total - 1.0) > PMF_TOL:
            raise ValidationError(f"pmf sums to {total!r}, not 1")
        nz = np.flatnonzero(pmf)
        pmf = pmf[: nz[-1] + 1] / total
        if pmf.size > 1 and pmf[1] >= 1.0:
            raise ValidationError("mu(1) must be < 1")
        if self.tail_index is not None and not 1.0 < self.tail_index <= 2.0:
            raise ValidationError("tail_index must lie in (1, 2]")
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)
        cdf = np.cumsum(pmf)
        cdf[-1] = 1.0
        object.__setattr__(self, "_cdf", cdf)

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_mapping(cls, probs: Mapping[int, float], **kw) -> "OffspringLaw":
        if not probs:
            raise ValidationError("empty pmf")
        if min(probs) < 0:
            raise ValidationError("child counts must be non-negative")
        pmf = np.zeros(max(probs) + 1)
        for j, p in probs.items():
            pmf[j] += p
        return cls(pmf, **kw)

    @classmethod
    def binary(cls) -> "OffspringLaw":
        return cls(np.array([0.5, 0.0, 0.5]), name="binary")

    @classmethod
    def geometric(cls, p: float = 0.5) -> "OffspringLaw":
        """``mu(j) = p (1-p)^j``, truncated where the tail mass drops below 1e-14."""
        if not 0.0 < p < 1.0:
            raise ValidationError("geometric parameter must lie in (0, 1)")
        q = 1.0 - p
        # tail mass beyond J is q^(J+1)
        jmax = int(np.ceil(np.log(TRUNCATION_MASS) / np.log(q)))
        j = np.arange(jmax + 1)
        pmf = p * q**j
        dropped = 1.0 - pmf.sum()
        return cls(pmf / pmf.sum(), name=f"geometric({p:g})", truncated_mass=dropped)

    @classmethod
    def power_tail(cls, alpha: float, max_children: int = 10_000) -> "OffspringLaw":
        """Critical law with ``mu(j) ~ c j^(-1-alpha)`` on ``1 <= j <= max_children``.

        ``mu(0)`` and ``mu(1)`` are set so the mean is exactly one.  The finite
        support means the variance is finite, so the stable regime is only
        visible for sizes well below ``max_children ** alpha``.
        """
        if not 1.0 < alpha < 2.0:
            raise ValidationError("power_tail needs alpha in (1, 2)")
        j = np.arange(2, max_children + 1, dtype=float)
        w = j ** (-1.0 - alpha)
        # tail mass c*sum(w) with mean contribution c*sum(j w); leave room for mu(0), mu(1)
        c = 0.5 / np.dot(j, w)
        tail = c * w
        m_tail = np.dot(j, tail)  # == 0.5
        rest = 1.0 - tail.sum()
        # mu(1) + 2 mu(2..) ... solve mu(0) + mu(1) = rest, mu(1) = 1 - m_tail
        mu1 = 1.0 - m_tail
        mu0 = rest - mu1
        if mu0 <= 0:
            raise ValidationError("power_tail construction failed (mu(0) <= 0)")
        pmf = np.concatenate([[mu0, mu1], tail])
        return cls(pmf, tail_index=alpha, name=f"power_tail({alpha:g})")

    @classmethod
    def from_step_pmf(cls, step_probs: Mapping[int, float], **kw) -> "OffspringLaw":
        """Build ``mu`` from a step law ``nu`` given on ``{-1, 0, 1, ...}``."""
        return cls.from_mapping({j + 1: p for j, p in step_probs.items()}, **kw)

    # -- derived quantities ----------------------------------------------
    @property
    def support_max(self) -> int:
        return self.pmf.size - 1

    @property
    def mean(self) -> float:
        return float(np.dot(np.arange(self.pmf.size), self.pmf))

    @property
    def variance(self) -> float:
        if self.tail_index is not None and self.tail_index < 2.0:
            return float("inf")
        k = np.arange(self.pmf.size)
        return float(np.dot(k * k, self.pmf) - self.mean**2)

    @property
    def numerical_variance(self) -> float:
        """Variance of the (possibly truncated) stored pmf, always finite."""
        k = np.arange(self.pmf.size)
        return float(np.dot(k * k, self.pmf) - self.mean**2)

    @property
    def is_critical(self) -> bool:
        return abs(self.mean - 1.0) <= PMF_TOL

    @property
    def step_pmf(self) -> np.ndarray:
        """``nu`` as an array whose index 0 corresponds to the step -1."""
        return self.pmf

    def laplace_step(self, lam: float) -> float:
        """``E exp(-lam * xi)`` for one step ``xi ~ nu``."""
        j = np.arange(-1, self.pmf.size - 1)
        return float(np.dot(self.pmf, np.exp(-lam * j)))

    def sample_children(self, rng: np.random.Generator, size) -> np.ndarray:
        u = rng.random(size)
        return np.searchsorted(self._cdf, u, side="right").astype(np.int64)

    def __eq__(self, other):
        if not isinstance(other, OffspringLaw):
            return NotImplemented
        return np.array_equal(self.pmf, other.pmf) and self.tail_index == other.tail_index

    def __hash__(self):
        return hash((self.pmf.tobytes(), self.tail_index))

    def __repr__(self):
        label = self.name or "custom"
        return f"OffspringLaw({label}, support=0..{self.support_max}, mean={self.mean:.6g})"


PRESETS = {
    "binary": OffspringLaw.binary,
    "geometric": OffspringLaw.geometric,
}


def parse_law(text: str) -> OffspringLaw:
    """Parse a preset name or an inline pmf ``"p0,p1,p2,..."``."""
    text = text.strip()
    if text in PRESETS:
        return PRESETS[text]()
    if text.startswith("power_tail"):
        _, _, arg = text.partition(":")
        return OffspringLaw.power_tail(float(arg or 1.5))
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ValidationError(f"cannot parse law {text!r}") from exc
    return OffspringLaw(np.array(values), name="inline")
