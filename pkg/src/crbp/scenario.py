"""Random network geometry and instance generation.

Base stations (one per primary channel) and secondary users are dropped
uniformly at random in the unit square.  Received power between SU i and
station a is tx_power * fading * distance^-alpha with i.i.d. unit-mean
exponential fading, a minimum-distance floor, and a hard cutoff below
which power is treated as exactly zero.  A channel is accessible when the
received power at its station reaches the access threshold; when a
station's PU is active, the same received power is the interference
coefficient.
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass, asdict, replace

import numpy as np

from .model import ProblemInstance

__all__ = [
    "ScenarioParams",
    "NetworkRealization",
    "default_params",
    "generate_network",
    "received_power",
    "sample_active_set",
    "derive_instance",
    "calibrate",
    "network_to_json",
    "network_from_json",
]


@dataclass(frozen=True)
class ScenarioParams:
    n_su: int = 100              # secondary users
    n_pu: int = 50               # primary channels / base stations
    alpha: float = 3.5           # path-loss exponent
    tx_power: float = 1.0        # SU transmit power (scales every received power)
    cutoff: float = 0.0          # received power below this is exactly 0
    access_threshold: float = 1.0  # min received power to use an idle channel
    theta: float = 1.0           # interference allowance per active PU
    priority: float = 1.0        # priority c for every SU
    min_distance: float = 1e-3   # distance floor to keep path loss finite
    seed: int = 0

    def validate(self) -> None:
        if self.n_su < 1 or self.n_pu < 1:
            raise ValueError("n_su and n_pu must be positive")
        if self.alpha <= 0 or self.tx_power <= 0:
            raise ValueError("alpha and tx_power must be positive")
        if self.cutoff < 0 or self.access_threshold < 0:
            raise ValueError("thresholds must be >= 0")
        if self.theta <= 0 or self.priority <= 0:
            raise ValueError("theta and priority must be positive")
        if self.min_distance <= 0:
            raise ValueError("min_distance must be positive")


@dataclass(frozen=True)
class NetworkRealization:
    """Sampled geometry plus the derived received-power matrix."""

    params: ScenarioParams
    su_pos: np.ndarray    # (n_su, 2)
    bs_pos: np.ndarray    # (n_pu, 2)
    fading: np.ndarray    # (n_su, n_pu), i.i.d. Exp(1)
    power: np.ndarray     # (n_su, n_pu), post-cutoff received power


def default_params(**overrides) -> ScenarioParams:
    """Packaged calibrated defaults (see the calibrate subcommand)."""
    path = importlib.resources.files("crbp").joinpath("data/calibrated.json")
    doc = json.loads(path.read_text())
    params = ScenarioParams(**doc["params"])
    if overrides:
        params = replace(params, **overrides)
    return params


def generate_network(params: ScenarioParams) -> NetworkRealization:
    """Sample a network realization; fully determined by params.seed.

    Draw order is fixed (BS positions, SU positions, fading) so a seed
    pins the whole realization.
    """
    params.validate()
    rng = np.random.default_rng(params.seed)
    bs_pos = rng.uniform(0.0, 1.0, size=(params.n_pu, 2))
    su_pos = rng.uniform(0.0, 1.0, size=(params.n_su, 2))
    fading = rng.exponential(1.0, size=(params.n_su, params.n_pu))
    diff = su_pos[:, None, :] - bs_pos[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    dist = np.maximum(dist, params.min_distance)
    power = params.tx_power * fading * dist ** (-params.alpha)
    power = np.where(power >= params.cutoff, power, 0.0)
    for arr in (su_pos, bs_pos, fading, power):
        arr.flags.writeable = False
    return NetworkRealization(params=params, su_pos=su_pos, bs_pos=bs_pos,
                              fading=fading, power=power)


def received_power(net: NetworkRealization, su: int, station: int) -> float:
    """Recompute the post-cutoff received power for one SU/station pair."""
    p = net.params
    d = float(np.hypot(*(net.su_pos[su] - net.bs_pos[station])))
    d = max(d, p.min_distance)
    raw = p.tx_power * float(net.fading[su, station]) * d ** (-p.alpha)
    return raw if raw >= p.cutoff else 0.0


def sample_active_set(n_pu: int, n_active: int, seed: int) -> np.ndarray:
    """Uniformly random set of active PU indices, sorted ascending."""
    if not 0 <= n_active <= n_pu:
        raise ValueError("n_active must lie in [0, n_pu]")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(n_pu, size=n_active, replace=False)
    return np.sort(chosen)


def derive_instance(net: NetworkRealization, active_set: np.ndarray) -> ProblemInstance:
    """Problem instance for a given set of active PUs.

    Idle stations become free channels (ascending station order); access is
    decided by the inclusive threshold on post-cutoff power.  Active
    stations keep their post-cutoff power as interference coefficients.
    """
    p = net.params
    active_set = np.asarray(active_set, dtype=np.int64)
    if active_set.size:
        if active_set.min() < 0 or active_set.max() >= p.n_pu:
            raise ValueError("active PU index out of range")
        if np.unique(active_set).size != active_set.size:
            raise ValueError("active set has duplicates")
    mask = np.zeros(p.n_pu, dtype=bool)
    mask[active_set] = True
    free_idx = np.nonzero(~mask)[0]
    act_idx = np.nonzero(mask)[0]
    access = (net.power[:, free_idx] >= p.access_threshold).astype(np.int8)
    interference = net.power[:, act_idx].astype(np.float64)
    return ProblemInstance(
        access=access,
        interference=interference,
        priority=np.full(p.n_su, p.priority),
        budget=np.full(len(act_idx), p.theta),
        metadata={
            "seed": p.seed,
            "params": asdict(p),
            "free_to_station": free_idx.tolist(),
            "active_to_station": act_idx.tolist(),
        },
    )


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

def calibrate(n_su: int = 100, n_pu: int = 50, target_access_degree: float = 6.0,
              target_interference_degree: float = 10.0, cutoff_fraction: float = 0.2,
              theta: float = 1.0, n_seeds: int = 20, base_seed: int = 20240):
    """Pick tx_power, cutoff and access_threshold from degree targets.

    Procedure: sample n_seeds raw networks (no cutoff, unit power) and pool
    the received powers.  The access threshold is the power quantile that
    leaves each SU with target_access_degree accessible stations on
    average, and the cutoff is the quantile that leaves each station with
    target_interference_degree interfering SUs on average.  Degrees are
    invariant under power scaling, so tx_power is then chosen to place the
    cutoff at cutoff_fraction * theta: that pins the smallest nonzero
    interference coefficient well below the allowance, the regime where
    thresholds arbitrate between several SUs instead of vetoing every one.

    Returns (params, diagnostics).
    """
    if not 0 < target_access_degree <= n_pu:
        raise ValueError("target_access_degree out of range")
    if not 0 < target_interference_degree <= n_su:
        raise ValueError("target_interference_degree out of range")
    raw = ScenarioParams(n_su=n_su, n_pu=n_pu, tx_power=1.0, cutoff=0.0,
                         access_threshold=0.0, theta=theta)
    pools = []
    for k in range(n_seeds):
        net = generate_network(replace(raw, seed=base_seed + k))
        pools.append(net.power.ravel())
    pool = np.concatenate(pools)
    access_q = np.quantile(pool, 1.0 - target_access_degree / n_pu)
    cutoff_q = np.quantile(pool, 1.0 - target_interference_degree / n_su)
    scale = cutoff_fraction * theta / cutoff_q
    params = replace(
        raw,
        tx_power=float(scale),
        cutoff=float(cutoff_fraction * theta),
        access_threshold=float(access_q * scale),
    )
    # the cutoff zeroes sub-cutoff powers before the access test, so the
    # realized access degree is gated by whichever threshold is higher
    diag = {
        "mean_access_degree": float((pool >= max(access_q, cutoff_q)).mean() * n_pu),
        "mean_interference_degree": float((pool >= cutoff_q).mean() * n_su),
        "raw_access_quantile": float(access_q),
        "raw_cutoff_quantile": float(cutoff_q),
        "n_seeds": n_seeds,
        "base_seed": base_seed,
        "targets": {
            "access_degree": target_access_degree,
            "interference_degree": target_interference_degree,
            "cutoff_fraction": cutoff_fraction,
        },
    }
    return params, diag


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def network_to_json(net: NetworkRealization) -> str:
    doc = {
        "params": asdict(net.params),
        "su_pos": net.su_pos.tolist(),
        "bs_pos": net.bs_pos.tolist(),
        "fading": net.fading.tolist(),
    }
    return json.dumps(doc, sort_keys=True)


def network_from_json(text: str) -> NetworkRealization:
    doc = json.loads(text)
    params = ScenarioParams(**doc["params"])
    su_pos = np.asarray(doc["su_pos"], dtype=np.float64)
    bs_pos = np.asarray(doc["bs_pos"], dtype=np.float64)
    fading = np.asarray(doc["fading"], dtype=np.float64)
    diff = su_pos[:, None, :] - bs_pos[None, :, :]
    dist = np.maximum(np.sqrt((diff * diff).sum(axis=2)), params.min_distance)
    power = params.tx_power * fading * dist ** (-params.alpha)
    power = np.where(power >= params.cutoff, power, 0.0)
    for arr in (su_pos, bs_pos, fading, power):
        arr.flags.writeable = False
    return NetworkRealization(params=params, su_pos=su_pos, bs_pos=bs_pos,
                              fading=fading, power=power)
