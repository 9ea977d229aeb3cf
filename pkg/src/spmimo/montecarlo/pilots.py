"""Random pilot allocation from an orthogonal DFT pilot book."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["dft_pilots", "PilotBook", "draw_pilot_book", "draw_assignments"]


def dft_pilots(tau: int) -> np.ndarray:
    """Rows ``phi_p[j] = exp(-2 pi i p j / tau)``: unit modulus, ``phi_p^H phi_q = tau delta_pq``."""
    j = np.arange(tau)
    return np.exp(-2j * np.pi * np.outer(j, j) / tau)


@dataclass(frozen=True)
class PilotBook:
    """Pilot indices of one coherence block.

    Attributes
    ----------
    assignment : ndarray of int, shape (n, K)
        Distinct indices in ``[0, tau)`` within each cell.
    tau : int
        Pilot length (``tau_p`` for RP, ``tau_c`` for SP).
    cell, k : int
        Typical UE; ``chi`` flags UEs sharing its pilot.
    """

    assignment: np.ndarray
    tau: int
    cell: int = 0
    k: int = 0

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.ndim != 2:
            raise ValueError("assignment must be (cells, users)")
        if a.min() < 0 or a.max() >= self.tau:
            raise ValueError("pilot index out of range")
        for row in a:
            if np.unique(row).size != row.size:
                raise ValueError("pilot indices must be distinct within a cell")
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    @property
    def chi(self) -> np.ndarray:
        return (self.assignment == self.assignment[self.cell, self.k]).astype(np.int8)

    def sequences(self) -> np.ndarray:
        """Pilot sequence of every UE, shape (n, K, tau)."""
        return dft_pilots(self.tau)[self.assignment]


def draw_assignments(gen: np.random.Generator, batch: int, n: int, K: int, tau: int) -> np.ndarray:
    """``batch`` independent allocations: each cell takes K distinct pilots uniformly at random."""
    if K > tau:
        raise ValueError("more users than pilots")
    keys = gen.random((batch, n, tau))
    return np.argsort(keys, axis=-1)[..., :K].astype(np.int64)


def draw_pilot_book(gen: np.random.Generator, n: int, K: int, tau: int, cell: int = 0,
                    k: int = 0) -> PilotBook:
    return PilotBook(draw_assignments(gen, 1, n, K, tau)[0], tau, cell, k)
