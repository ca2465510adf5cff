"""Potentials on phase space and finitely supported (atomic) measures."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import HALF_PI, OK, map_batch
from .errors import InvalidInput, UnsupportedPotential
from .geometry import BilliardTable

__all__ = ["Potential", "EmpiricalMeasure"]


@dataclass(frozen=True)
class Potential:
    """One of three potential kinds.

    * ``zero``: g = 0
    * ``scaled_tau``: g = c * tau, tau the free flight to the next collision
    * ``tabulated``: piecewise constant on a grid ``values[s, i, j]`` over
      ``r / circumference`` in ``[0, 1)`` and ``phi`` in ``[-pi/2, pi/2]``
    """

    kind: str = "zero"
    c: float = 0.0
    values: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("zero", "scaled_tau", "tabulated"):
            raise UnsupportedPotential(f"unknown potential kind {self.kind!r}")
        if self.kind == "tabulated":
            v = np.asarray(self.values, dtype=float)
            if v.ndim != 3 or not np.all(np.isfinite(v)):
                raise InvalidInput("tabulated values must be a finite (D, nr, nphi) array")
            object.__setattr__(self, "values", v)

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def scaled_tau(cls, c: float):
        return cls("scaled_tau", float(c))

    @classmethod
    def tabulated(cls, values):
        return cls("tabulated", 0.0, np.asarray(values, dtype=float))

    @property
    def needs_tau(self) -> bool:
        return self.kind == "scaled_tau"

    def sup(self, tau_min: float | None = None, tau_max: float | None = None) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "tabulated":
            return float(self.values.max())
        if tau_max is None or tau_min is None:
            raise UnsupportedPotential("sup of c*tau needs free-flight bounds")
        return self.c * (tau_max if self.c >= 0 else tau_min)

    def __call__(self, table: BilliardTable, s, r, phi, tau=None) -> np.ndarray:
        s = np.asarray(s, dtype=np.int64)
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        if self.kind == "zero":
            return np.zeros(r.shape)
        if self.kind == "scaled_tau":
            if tau is None:
                st = map_batch(table, s.ravel(), r.ravel(), phi.ravel())
                tau = np.where(st.status == OK, st.tau, np.nan).reshape(r.shape)
            return self.c * np.asarray(tau, dtype=float)
        v = self.values
        if v.shape[0] != table.n_scatterers:
            raise InvalidInput("tabulated potential does not match the number of scatterers")
        nr, nphi = v.shape[1:]
        u = np.mod(r / table.circumferences[s], 1.0)
        i = np.minimum((u * nr).astype(np.int64), nr - 1)
        j = np.clip(((phi + HALF_PI) / np.pi * nphi).astype(np.int64), 0, nphi - 1)
        return v[s, i, j]

    def describe(self) -> dict:
        if self.kind == "scaled_tau":
            return {"kind": "scaled_tau", "c": self.c}
        if self.kind == "tabulated":
            return {"kind": "tabulated", "shape": list(self.values.shape)}
        return {"kind": "zero"}


@dataclass
class EmpiricalMeasure:
    """Atoms ``(scatterer[k], r[k], phi[k])`` with nonnegative ``weight[k]``."""

    scatterer: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    weight: np.ndarray
    dropped: int = 0

    def __post_init__(self):
        self.scatterer = np.asarray(self.scatterer, dtype=np.int64).ravel()
        self.r = np.asarray(self.r, dtype=float).ravel()
        self.phi = np.asarray(self.phi, dtype=float).ravel()
        self.weight = np.asarray(self.weight, dtype=float).ravel()
        if np.any(self.weight < 0):
            raise InvalidInput("measure weights must be nonnegative")
        if np.any(np.abs(self.phi) > HALF_PI):
            raise InvalidInput("atoms must satisfy |phi| <= pi/2")

    def __len__(self):
        return len(self.weight)

    @property
    def total(self) -> float:
        return float(self.weight.sum())

    def normalized(self) -> "EmpiricalMeasure":
        tot = self.total
        if not tot > 0:
            raise InvalidInput("cannot normalise a measure of zero mass")
        return EmpiricalMeasure(self.scatterer, self.r, self.phi, self.weight / tot, self.dropped)

    def integrate(self, f) -> float:
        """``f(scatterer, r, phi) -> array``."""
        return float(np.dot(self.weight, f(self.scatterer, self.r, self.phi)))

    def pushforward(self, table: BilliardTable, *, bound=None) -> "EmpiricalMeasure":
        """Image measure under T; atoms whose image is undefined are dropped and counted."""
        st = map_batch(table, self.scatterer, self.r, self.phi, bound=bound)
        ok = st.status == OK
        return EmpiricalMeasure(st.scatterer[ok], st.r[ok], st.phi[ok], self.weight[ok],
                                self.dropped + int((~ok).sum()))

    @classmethod
    def concatenate(cls, parts) -> "EmpiricalMeasure":
        parts = list(parts)
        return cls(np.concatenate([p.scatterer for p in parts]),
                   np.concatenate([p.r for p in parts]),
                   np.concatenate([p.phi for p in parts]),
                   np.concatenate([p.weight for p in parts]),
                   sum(p.dropped for p in parts))
