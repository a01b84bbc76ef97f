"""Ensemble statistics: waiting-time histograms, observable traces, averages."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .engine import Trajectory
from .errors import DimensionError, NoJumps
from .filling import FilledTrajectory, fill_states
from .operators import hermitize

__all__ = [
    "WtdHistogram",
    "ObservableTrace",
    "pooled_waits",
    "wtd_histogram",
    "histogram_from_waits",
    "observable_trace",
    "ensemble_average",
    "total_variation",
    "trace_distance",
    "jump_expectations",
]


@dataclass
class WtdHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def probabilities(self) -> np.ndarray:
        total = self.counts.sum()
        return self.counts / total if total else np.zeros_like(self.density)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    def merge(self, other: "WtdHistogram") -> "WtdHistogram":
        _check_edges(self, other)
        return _from_counts(self.bin_edges, self.counts + other.counts)


@dataclass
class ObservableTrace:
    times: np.ndarray
    values: np.ndarray
    label: str = ""


def pooled_waits(trajectories: Iterable[Trajectory], include_beyond_horizon: bool = False) -> np.ndarray:
    """All waiting times across trajectories and channels.

    The jump that crosses the horizon is right-censored and left out unless
    ``include_beyond_horizon`` is set.
    """
    waits = [
        r.waiting_time
        for traj in trajectories
        for r in traj.records
        if include_beyond_horizon or not r.beyond_horizon
    ]
    return np.asarray(waits, dtype=float)


def _from_counts(edges: np.ndarray, counts: np.ndarray) -> WtdHistogram:
    total = counts.sum()
    density = counts / (total * np.diff(edges)) if total else np.zeros(len(counts))
    return WtdHistogram(edges, counts, density)


def wtd_histogram(
    trajectories: Iterable[Trajectory],
    bin_edges: Sequence[float] | int | str | None = None,
    include_beyond_horizon: bool = False,
) -> WtdHistogram:
    """Histogram of pooled waiting times, normalized over the counted events.

    Args:
        trajectories: Gillespie or MCW trajectories.
        bin_edges: Explicit edges, a bin count (equal bins on ``[0, max]``),
            or a ``numpy`` rule name. Freedman–Diaconis by default.
        include_beyond_horizon: Keep the censored final jump of each trajectory.

    Raises:
        NoJumps: no waiting times to histogram.
    """
    return histogram_from_waits(pooled_waits(trajectories, include_beyond_horizon), bin_edges)


def histogram_from_waits(waits, bin_edges: Sequence[float] | int | str | None = None) -> WtdHistogram:
    """Histogram of raw waiting times; ``bin_edges`` as in :func:`wtd_histogram`."""
    waits = np.asarray(waits, dtype=float).reshape(-1)
    if waits.size == 0:
        raise NoJumps("no waiting times in the ensemble")
    if bin_edges is None:
        edges = np.histogram_bin_edges(waits, bins="fd")
    elif isinstance(bin_edges, str):
        edges = np.histogram_bin_edges(waits, bins=bin_edges)
    elif np.ndim(bin_edges) == 0:
        edges = np.linspace(0.0, waits.max(), int(bin_edges) + 1)
    else:
        edges = np.asarray(bin_edges, dtype=float)
    counts, _ = np.histogram(waits, bins=edges)
    return _from_counts(edges, counts)


def _check_edges(h1: WtdHistogram, h2: WtdHistogram):
    if h1.bin_edges.shape != h2.bin_edges.shape or not np.allclose(h1.bin_edges, h2.bin_edges, rtol=0, atol=1e-12):
        raise ValueError("histograms have different bin edges")


def total_variation(h1: WtdHistogram, h2: WtdHistogram) -> float:
    """Half the L1 distance between the bin probability masses."""
    _check_edges(h1, h2)
    return float(0.5 * np.abs(h1.probabilities - h2.probabilities).sum())


def observable_trace(filled: FilledTrajectory, O, label: str = "") -> ObservableTrace:
    """``Re tr(O rho(t))`` at each sample time of a filled trajectory."""
    O = np.asarray(O, dtype=np.complex128)
    d = filled.states.shape[-1]
    if O.shape != (d, d):
        raise DimensionError(f"observable has shape {O.shape}, states are {d}x{d}")
    values = np.einsum("ij,nji->n", O, filled.states).real
    return ObservableTrace(np.asarray(filled.sample_times), values, label)


def ensemble_average(trajectories: Sequence[Trajectory], tables, times, trace_tol: float = 1e-9) -> np.ndarray:
    """Average of the filled states over trajectories, shape ``(len(times), d, d)``."""
    if len(trajectories) == 0:
        raise ValueError("need at least one trajectory")
    times = np.asarray(times, dtype=float)
    acc = None
    for traj in trajectories:
        states = fill_states(traj, tables, times).states
        acc = states.copy() if acc is None else acc + states
    mean = acc / len(trajectories)
    traces = np.einsum("nii->n", mean).real
    drift = np.max(np.abs(traces - 1.0))
    if drift > trace_tol:
        raise ValueError(f"averaged trace drifted by {drift:.3e}")
    return hermitize(mean / traces[:, None, None])


def trace_distance(rho, sigma) -> float:
    """``0.5 * || rho - sigma ||_1``."""
    diff = hermitize(np.asarray(rho) - np.asarray(sigma))
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


def jump_expectations(
    trajectories: Iterable[Trajectory], O, t_min: float = 0.0, t_max: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Values of ``<O>`` on post-jump states with jump time in ``[t_min, t_max]``.

    Returns the values and the index of the trajectory each came from. The
    censored jump past the horizon is skipped.
    """
    O = np.asarray(O, dtype=np.complex128)
    values, owner = [], []
    for n, traj in enumerate(trajectories):
        hi = traj.horizon if t_max is None else t_max
        for r in traj.records:
            if r.beyond_horizon or r.absolute_time < t_min or r.absolute_time > hi:
                continue
            s = r.post_jump_state
            v = np.vdot(s, O @ s).real if s.ndim == 1 else np.einsum("ij,ji->", O, s).real
            values.append(v)
            owner.append(n)
    return np.asarray(values), np.asarray(owner, dtype=int)
