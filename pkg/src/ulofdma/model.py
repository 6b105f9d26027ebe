"""Core domain types and throughput evaluation for the multi-cell uplink.

The network has ``L`` cells, ``K`` users per cell and ``N`` subcarriers per
cell with full frequency reuse.  Each subcarrier of a cell is assigned to at
most one local user (binary allocation matrices), each user has an individual
power budget that couples its subcarriers, and cells interfere with each
other through the cross-gain matrices.

All array containers here are immutable value objects: the wrapped numpy
arrays are marked read-only at construction so instances can be shared freely
between concurrent trial workers.  All operations are pure functions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NetworkConfig",
    "ChannelSet",
    "Allocation",
    "PowerMatrix",
    "ValidationReport",
    "FEASIBILITY_TOL",
    "interference",
    "network_throughput",
    "validate",
    "equal_split_powers",
    "channels_to_json",
    "channels_from_json",
    "allocation_to_json",
    "allocation_from_json",
    "powers_to_json",
    "powers_from_json",
]

# Absolute slack, in watts, granted on per-user power budgets.  GP solvers
# return budget-active solutions only to finite precision.
FEASIBILITY_TOL = 1e-9


def _readonly(a):
    arr = np.ascontiguousarray(np.asarray(a, dtype=float))
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class NetworkConfig:
    """Static problem dimensions, budgets and solver knobs.

    ``p_max`` is the per-user power budget in watts (length ``K``),
    ``noise_power`` the per-subcarrier receiver noise in watts,
    ``convergence_eps`` the outer-loop stopping threshold (bps/Hz/cell) of
    the iterative reassignment scheme, capped at ``max_outer_iters`` sweeps.
    """

    L: int
    K: int
    N: int
    p_max: np.ndarray = None
    noise_power: float = 1.0
    convergence_eps: float = 1e-3
    max_outer_iters: int = 50
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("L", "K", "N"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")
        p = self.p_max
        if p is None:
            p = np.ones(self.K)
        p = _readonly(np.broadcast_to(np.asarray(p, dtype=float), (self.K,)))
        object.__setattr__(self, "p_max", p)
        if not np.all(p > 0):
            raise ValueError("all p_max entries must be > 0")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be > 0")
        if not self.convergence_eps > 0:
            raise ValueError("convergence_eps must be > 0")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")


@dataclass(frozen=True)
class ChannelSet:
    """Linear power gains of one channel realization.

    ``H[l]`` is the N x K matrix of direct gains toward the serving base
    station of cell ``l``.  ``G[l, j]`` (``j != l``) is the N x K matrix of
    interfering gains from the users of cell ``l`` into the base station of
    cell ``j``; the diagonal blocks ``G[l, l]`` are unused and kept at zero.

    ``meta`` optionally echoes the generator parameters of the realization.
    """

    H: np.ndarray  # (L, N, K)
    G: np.ndarray  # (L, L, N, K), zero diagonal blocks
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        H = _readonly(self.H)
        G = _readonly(self.G)
        if H.ndim != 3:
            raise ValueError("H must have shape (L, N, K)")
        L, N, K = H.shape
        if G.shape != (L, L, N, K):
            raise ValueError("G must have shape (L, L, N, K)")
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(G))):
            raise ValueError("channel gains must be finite")
        if (H < 0).any() or (G < 0).any():
            raise ValueError("channel gains must be >= 0")
        if np.any(G[np.arange(L), np.arange(L)] != 0.0):
            raise ValueError("diagonal blocks G[l, l] must be zero")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "G", G)

    @property
    def shape(self):
        return self.H.shape

    def g(self, l, j):
        """Interfering-gain matrix from the users of cell ``l`` into cell ``j``."""
        if l == j:
            raise IndexError("no interfering gains from a cell into itself")
        return self.G[l, j]


@dataclass(frozen=True)
class Allocation:
    """Binary subcarrier-to-user assignment matrices, one N x K per cell.

    A matrix may be partial (all-zero subcarrier rows) while a greedy scheme
    is still building it; a complete allocation has every row summing to
    exactly one.
    """

    A: np.ndarray  # (L, N, K) of {0, 1}

    def __post_init__(self):
        A = np.ascontiguousarray(np.asarray(self.A))
        if A.ndim != 3:
            raise ValueError("A must have shape (L, N, K)")
        if not np.isin(A, (0, 1)).all():
            raise ValueError("allocation entries must be 0 or 1")
        if (A.sum(axis=2) > 1).any():
            raise ValueError("a subcarrier may be assigned to at most one user per cell")
        A = A.astype(np.int8)
        A.flags.writeable = False
        object.__setattr__(self, "A", A)

    @property
    def complete(self) -> bool:
        return bool((self.A.sum(axis=2) == 1).all())

    def user_at(self, l, n):
        """Index of the user holding subcarrier ``n`` of cell ``l``, or None."""
        row = self.A[l, n]
        hits = np.flatnonzero(row)
        return int(hits[0]) if hits.size else None


@dataclass(frozen=True)
class PowerMatrix:
    """Per-cell transmit powers in watts, one N x K matrix per cell."""

    P: np.ndarray  # (L, N, K)

    def __post_init__(self):
        P = _readonly(self.P)
        if P.ndim != 3:
            raise ValueError("P must have shape (L, N, K)")
        if not np.all(np.isfinite(P)):
            raise ValueError("powers must be finite")
        if (P < 0).any():
            raise ValueError("powers must be >= 0")
        object.__setattr__(self, "P", P)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the feasibility checks, one flag per constraint family."""

    row_sum_ok: bool        # each subcarrier assigned to exactly one user
    binary_ok: bool         # allocation entries in {0, 1}
    budget_ok: bool         # per-user power totals within budget
    messages: tuple = ()
    warnings: tuple = ()    # non-fatal, e.g. power parked on unallocated pairs

    @property
    def ok(self) -> bool:
        return self.row_sum_ok and self.binary_ok and self.budget_ok


def _check_shapes(cfg: NetworkConfig, *arrays):
    expected = (cfg.L, cfg.N, cfg.K)
    for arr in arrays:
        if arr.shape != expected:
            raise ValueError(f"shape mismatch: expected {expected}, got {arr.shape}")


def interference(alloc: Allocation, powers: PowerMatrix, ch: ChannelSet,
                 n: int, l: int) -> float:
    """Cumulative interference, in watts, received at subcarrier ``n`` of cell
    ``l`` from the allocated users of all other cells."""
    L, N, K = ch.shape
    if not (0 <= n < N and 0 <= l < L):
        raise IndexError(f"subcarrier/cell index out of range: n={n}, l={l}")
    # G[j, l, n, :] carries the gains of cell j's users into cell l; the
    # zero diagonal block removes the own-cell term.
    contrib = alloc.A[:, n, :] * powers.P[:, n, :] * ch.G[:, l, n, :]
    return float(contrib.sum())


def _interference_map(alloc: Allocation, powers: PowerMatrix, ch: ChannelSet):
    """(N, L) array of received interference at every subcarrier of every cell."""
    ap = alloc.A * powers.P  # (L, N, K)
    return np.einsum("jnk,jlnk->nl", ap, ch.G)


def _per_link_rates(alloc: Allocation, powers: PowerMatrix, ch: ChannelSet,
                    noise_power: float):
    """(L, N) Shannon rates of the allocated links, zero on unallocated rows."""
    imap = _interference_map(alloc, powers, ch)  # (N, L)
    signal = (alloc.A * powers.P * ch.H).sum(axis=2)  # (L, N)
    return np.log2(1.0 + signal / (noise_power + imap.T))


def network_throughput(alloc: Allocation, powers: PowerMatrix, ch: ChannelSet,
                       cfg: NetworkConfig) -> float:
    """Average network throughput in bps/Hz/cell.

    The sum rate over all allocated links divided by the number of cells;
    the per-cell average is the unit every comparison here is reported in.
    """
    _check_shapes(cfg, alloc.A, powers.P, ch.H)
    report = validate(alloc, powers, cfg)
    if not report.ok:
        raise ValueError("infeasible input: " + "; ".join(report.messages))
    rates = _per_link_rates(alloc, powers, ch, cfg.noise_power)
    return float(rates.sum() / cfg.L)


def validate(alloc: Allocation, powers: PowerMatrix, cfg: NetworkConfig) -> ValidationReport:
    """Check an (allocation, powers) pair against the feasibility constraints.

    Reports exact-one-user-per-subcarrier, binarity and per-user budget
    compliance.  Power parked on unallocated pairs above ``FEASIBILITY_TOL``
    is flagged as a warning only: greedy construction keeps provisional
    powers on not-yet-assigned subcarriers and the throughput ignores them.
    """
    _check_shapes(cfg, alloc.A, powers.P)
    messages = []
    warnings = []

    row_sums = alloc.A.sum(axis=2)  # (L, N)
    row_ok = bool((row_sums == 1).all())
    if not row_ok:
        bad = np.argwhere(row_sums != 1)
        messages.append(f"subcarriers not assigned to exactly one user: {bad[:5].tolist()}")

    binary_ok = bool(np.isin(alloc.A, (0, 1)).all())  # enforced at construction
    if not binary_ok:
        messages.append("allocation entries outside {0, 1}")

    totals = powers.P.sum(axis=1)  # (L, K) per-user spent power
    budget_ok = bool((totals <= cfg.p_max[None, :] + FEASIBILITY_TOL).all())
    if not budget_ok:
        bad = np.argwhere(totals > cfg.p_max[None, :] + FEASIBILITY_TOL)
        messages.append(f"per-user power budget exceeded at (cell, user): {bad[:5].tolist()}")

    stray = (1 - alloc.A) * powers.P
    if (stray > FEASIBILITY_TOL).any():
        warnings.append("nonzero power on unallocated (subcarrier, user) pairs (ignored by throughput)")

    return ValidationReport(row_ok, binary_ok, budget_ok, tuple(messages), tuple(warnings))


def equal_split_powers(alloc: Allocation, cfg: NetworkConfig) -> PowerMatrix:
    """Each user's budget split equally over its assigned subcarriers.

    Users holding no subcarrier get zero power everywhere.
    """
    counts = alloc.A.sum(axis=1)  # (L, K)
    with np.errstate(divide="ignore"):
        share = np.where(counts > 0, cfg.p_max[None, :] / np.maximum(counts, 1), 0.0)
    return PowerMatrix(alloc.A * share[:, None, :])


# ---------------------------------------------------------------------------
# JSON serialization.  Matrices are row-major nested lists in linear units
# with an explicit L/K/N header, so channel realizations, allocations and
# power matrices can be frozen into golden files and re-imported bit-exactly.
# ---------------------------------------------------------------------------

def channels_to_json(ch: ChannelSet) -> str:
    L, N, K = ch.shape
    blocks = [
        {"from": l, "to": j, "gain": ch.G[l, j].tolist()}
        for l in range(L) for j in range(L) if j != l
    ]
    doc = {
        "kind": "channel-set",
        "L": L, "K": K, "N": N,
        "units": "linear",
        "H": ch.H.tolist(),
        "G": blocks,
        "meta": ch.meta,
    }
    return json.dumps(doc, indent=2)


def channels_from_json(text: str) -> ChannelSet:
    doc = json.loads(text)
    if doc.get("kind") != "channel-set":
        raise ValueError("not a channel-set document")
    L, K, N = doc["L"], doc["K"], doc["N"]
    H = np.asarray(doc["H"], dtype=float)
    G = np.zeros((L, L, N, K))
    for block in doc["G"]:
        G[block["from"], block["to"]] = np.asarray(block["gain"], dtype=float)
    return ChannelSet(H, G, meta=doc.get("meta", {}))


def _matrices_to_json(kind, arr, extra=None):
    L, N, K = arr.shape
    doc = {"kind": kind, "L": L, "K": K, "N": N, "cells": arr.tolist()}
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2)


def allocation_to_json(alloc: Allocation) -> str:
    return _matrices_to_json("allocation", alloc.A)


def allocation_from_json(text: str) -> Allocation:
    doc = json.loads(text)
    if doc.get("kind") != "allocation":
        raise ValueError("not an allocation document")
    return Allocation(np.asarray(doc["cells"]))


def powers_to_json(powers: PowerMatrix) -> str:
    return _matrices_to_json("powers", powers.P, {"units": "W"})


def powers_from_json(text: str) -> PowerMatrix:
    doc = json.loads(text)
    if doc.get("kind") != "powers":
        raise ValueError("not a powers document")
    return PowerMatrix(np.asarray(doc["cells"], dtype=float))
