"""Cell geometry, user placement and channel gain generation.

Channel gains combine a distance power law, log-normal shadowing and
Rayleigh (squared-envelope, unit-mean exponential) fading:

    gain_dB = -122 - 10 * gamma * log10(max(d, d_ref)) - S + 10 * log10(F)

with ``d`` in km, ``S ~ Normal(0, shadow_sigma_db)`` drawn once per
(user, base-station) link, and ``F`` drawn independently per subcarrier.
The shadowing draw is *subtracted*; the distribution is symmetric so this
only matters for golden-file stability.

Generation is fully determined by ``(config, seed)`` through a counter-based
Philox stream, so parallel Monte-Carlo trials never share generator state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ChannelSet

__all__ = [
    "GeometryConfig",
    "UserPlacement",
    "place_bs",
    "place_users",
    "gain_linear",
    "generate_channels",
    "noise_power",
]

PATHLOSS_INTERCEPT_DB = -122.0


@dataclass(frozen=True)
class GeometryConfig:
    """Cell geometry and propagation parameters.

    Distances are in km.  ``d_ref`` is the close-in reference distance below
    which the power law saturates.  ``noise_psd`` is the receiver noise power
    spectral density in W/Hz over ``bandwidth_hz`` of system bandwidth.
    """

    cell_radius: float = 1.0
    d_ref: float = 0.05
    pathloss_exp: float = 3.0
    shadow_sigma_db: float = 8.0
    bandwidth_hz: float = 2.0e7
    noise_psd: float = 8.6455e-15
    layout: str = "hex"

    def __post_init__(self):
        if not (self.cell_radius > self.d_ref > 0):
            raise ValueError("require cell_radius > d_ref > 0")
        if self.shadow_sigma_db < 0:
            raise ValueError("shadow_sigma_db must be >= 0")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be > 0")
        if self.layout not in ("hex", "linear"):
            raise ValueError(f"unknown layout {self.layout!r}")


@dataclass(frozen=True)
class UserPlacement:
    """2-D positions (km) of users and base stations.

    ``positions[l]`` is the (K, 2) array of the users served by cell ``l``;
    ``bs_positions`` is (L, 2).
    """

    positions: np.ndarray      # (L, K, 2)
    bs_positions: np.ndarray   # (L, 2)
    cell_radius: float = 1.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        bs = np.asarray(self.bs_positions, dtype=float)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "bs_positions", bs)
        dist = np.linalg.norm(pos - bs[:, None, :], axis=2)
        if (dist > self.cell_radius + 1e-9).any():
            raise ValueError("users must lie within the radius of their serving cell")


def place_bs(cfg: GeometryConfig, L: int) -> np.ndarray:
    """Base-station coordinates for ``L`` cells.

    ``hex`` layout: site 1 at the origin, sites 2..7 on a ring of radius
    ``2 * cell_radius`` at angles 0, 60, ..., 300 degrees (tangent circular
    cells); L between 2 and 7 takes the first L sites of that ordering.
    ``linear`` layout: collinear sites spaced ``2 * cell_radius`` apart.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    spacing = 2.0 * cfg.cell_radius
    if cfg.layout == "linear":
        return np.column_stack([spacing * np.arange(L), np.zeros(L)])
    if L > 7:
        raise ValueError("hex layout supports at most 7 cells (center plus first tier)")
    angles = np.deg2rad(60.0 * np.arange(6))
    ring = spacing * np.column_stack([np.cos(angles), np.sin(angles)])
    sites = np.vstack([[0.0, 0.0], ring])
    return sites[:L].copy()


def place_users(cfg: GeometryConfig, bs_positions: np.ndarray, scenario: str,
                K: int, seed: int = 0, d: float | None = None) -> UserPlacement:
    """Draw user positions for one of the two placement scenarios.

    Scenario ``"A"``: all users of a cell at distance ``d`` from their base
    station, at equally spaced angles 2*pi*k/K.  Deterministic.
    Scenario ``"B"``: users uniform over the serving disk, rejection-free
    (radius R*sqrt(u), angle 2*pi*v).
    """
    bs = np.asarray(bs_positions, dtype=float)
    L = bs.shape[0]
    if scenario == "A":
        if d is None:
            raise ValueError("scenario A needs the common user distance d")
        if not (cfg.d_ref <= d <= cfg.cell_radius):
            raise ValueError(f"scenario A distance must lie in [{cfg.d_ref}, {cfg.cell_radius}]")
        angles = 2.0 * np.pi * np.arange(K) / K
        offsets = d * np.column_stack([np.cos(angles), np.sin(angles)])
        pos = bs[:, None, :] + offsets[None, :, :]
        meta = {"scenario": "A", "d": d}
    elif scenario == "B":
        rng = np.random.Generator(np.random.Philox(key=seed))
        u = rng.random(size=(L, K))
        v = rng.random(size=(L, K))
        radius = cfg.cell_radius * np.sqrt(u)
        theta = 2.0 * np.pi * v
        offsets = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=2)
        pos = bs[:, None, :] + offsets
        meta = {"scenario": "B", "seed": seed}
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    return UserPlacement(pos, bs, cfg.cell_radius, meta=meta)


def gain_linear(distance: float, shadow_db: float, fading: float,
                cfg: GeometryConfig) -> float:
    """Linear power gain of a single link given its random draws."""
    if distance <= 0:
        raise ValueError("distance must be > 0")
    if fading <= 0:
        raise ValueError("fading draw must be > 0")
    d = max(distance, cfg.d_ref)
    gain_db = (PATHLOSS_INTERCEPT_DB
               - 10.0 * cfg.pathloss_exp * math.log10(d)
               - shadow_db
               + 10.0 * math.log10(fading))
    return 10.0 ** (gain_db / 10.0)


def generate_channels(cfg: GeometryConfig, placement: UserPlacement, N: int,
                      seed: int = 0) -> ChannelSet:
    """One channel realization for every (user, base station, subcarrier) link.

    Direct gains use the distance to the serving base station, interfering
    gains the distance from a user to every other base station.  Shadowing is
    a large-scale effect drawn once per (user, BS) link and shared by all
    subcarriers of that link; fading is independent per subcarrier.
    """
    pos = placement.positions           # (L, K, 2)
    bs = placement.bs_positions         # (L, 2)
    L, K, _ = pos.shape
    # distance from user (l, k) to base station j
    dist = np.linalg.norm(pos[:, :, None, :] - bs[None, None, :, :], axis=3)  # (L, K, L)
    dist = np.maximum(dist, cfg.d_ref)

    rng = np.random.Generator(np.random.Philox(key=seed))
    shadow = rng.normal(0.0, cfg.shadow_sigma_db, size=(L, K, L))
    fading = rng.exponential(1.0, size=(L, K, L, N))

    gain_db = (PATHLOSS_INTERCEPT_DB
               - 10.0 * cfg.pathloss_exp * np.log10(dist)[..., None]
               - shadow[..., None]
               + 10.0 * np.log10(fading))
    gains = 10.0 ** (gain_db / 10.0)    # (L, K, L, N)

    H = np.empty((L, N, K))
    G = np.zeros((L, L, N, K))
    for l in range(L):
        H[l] = gains[l, :, l, :].T      # (N, K)
        for j in range(L):
            if j != l:
                G[l, j] = gains[l, :, j, :].T
    meta = {
        "seed": seed,
        "N": N,
        "cell_radius": cfg.cell_radius,
        "d_ref": cfg.d_ref,
        "pathloss_exp": cfg.pathloss_exp,
        "shadow_sigma_db": cfg.shadow_sigma_db,
        "placement": dict(placement.meta),
    }
    return ChannelSet(H, G, meta=meta)


def noise_power(cfg: GeometryConfig, N: int) -> float:
    """Per-subcarrier receiver noise in watts: PSD times an equal bandwidth share."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return cfg.noise_psd * cfg.bandwidth_hz / N
