"""Birth-death chains on ``{0, ..., n}`` and their absorption times.

A chain is stored as rate arrays indexed by state. The embedded jump
chain moves up with probability ``up / (up + down + hold)`` and down with
probability ``down / (up + down + hold)``; the optional ``hold`` rate is a
self-loop that only matters when jumps are counted. State ``n`` never
moves up. With an absorbing boundary state 0 is a trap; the reflected
companion instead leaves 0 for 1 with probability one.

Every product and sum is accumulated in log space, so chains whose
absorption time is astronomically large stay finite as log-values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "BirthDeathChain",
    "RegimeVerdict",
    "stationary_reflected",
    "log_expected_absorption_from_1",
    "expected_absorption_from_1",
    "log_expected_absorption_from_L",
    "expected_absorption_from_L",
    "sis_upper_chain",
    "sis_lower_chain",
    "log_subcritical_series_bound",
    "subcritical_series_bound",
    "regime_classify",
    "upper_bound_report",
    "lower_bound_report",
]

ABSORBING = "absorbing"
REFLECTING = "reflecting"
CLOCKS = ("jumps", "time")

_EHRENFEST_RTOL = 1e-9


def _as_array(values, n: int, name: str) -> np.ndarray:
    if callable(values):
        arr = np.array([float(values(i)) for i in range(n + 1)])
    else:
        arr = np.asarray(values, dtype=float)
        if arr.shape != (n + 1,):
            raise ValueError(f"{name} must have length n + 1 = {n + 1}, got {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class BirthDeathChain:
    """Birth-death chain with rates indexed by state.

    Parameters
    ----------
    up, down : ndarray, shape (n + 1,)
        Up and down rates. ``up[n]`` is forced to zero and ``down[0]`` is
        ignored. ``up[0]`` is ignored too: the reflected companion always
        leaves 0 for 1.
    boundary : {"absorbing", "reflecting"}
    hold : ndarray, optional
        Self-loop rates; they lengthen jump counts but not times.
    """

    up: np.ndarray
    down: np.ndarray
    boundary: str = ABSORBING
    hold: np.ndarray | None = field(default=None)

    def __post_init__(self):
        up = np.array(self.up, dtype=float)
        down = np.array(self.down, dtype=float)
        if up.ndim != 1 or up.shape != down.shape or len(up) < 2:
            raise ValueError("up and down must be 1-d arrays of equal length >= 2")
        n = len(up) - 1
        hold = np.zeros(n + 1) if self.hold is None else np.array(self.hold, dtype=float)
        if hold.shape != up.shape:
            raise ValueError("hold must match up and down in length")
        if self.boundary not in (ABSORBING, REFLECTING):
            raise ValueError(f"boundary must be {ABSORBING!r} or {REFLECTING!r}")
        if not (np.isfinite(up).all() and np.isfinite(down).all() and np.isfinite(hold).all()):
            raise ValueError("rates must be finite")
        if (up < 0).any() or (hold < 0).any():
            raise ValueError("up and hold rates must be nonnegative")
        if (down[1:] <= 0).any():
            bad = int(np.nonzero(down[1:] <= 0)[0][0]) + 1
            raise ValueError(f"down rate must be positive at every state >= 1; state {bad} has {down[bad]}")
        up[n] = 0.0
        down[0] = 0.0
        for name, arr in (("up", up), ("down", down), ("hold", hold)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def from_rates(cls, n: int, up_rate: Callable[[int], float] | Sequence[float],
                   down_rate: Callable[[int], float] | Sequence[float],
                   boundary: str = ABSORBING) -> "BirthDeathChain":
        """Build from callables or sequences over states ``0..n``."""
        if n < 1:
            raise ValueError("state_max must be at least 1")
        up = _as_array(up_rate, n, "up_rate")
        down = _as_array(lambda i: down_rate(i) if i else 0.0, n, "down_rate") if callable(down_rate) \
            else _as_array(down_rate, n, "down_rate")
        return cls(up, down, boundary)

    @classmethod
    def from_jump_probabilities(cls, p_up: Sequence[float], p_down: Sequence[float] | None = None,
                                boundary: str = ABSORBING) -> "BirthDeathChain":
        """Build from jump probabilities; any shortfall from 1 becomes a self-loop.

        ``p_down`` defaults to ``1 - p_up``.
        """
        p_up = np.asarray(p_up, dtype=float)
        p_down = 1.0 - p_up if p_down is None else np.asarray(p_down, dtype=float)
        hold = 1.0 - p_up - p_down
        hold[0] = 0.0
        if (hold < -1e-12).any():
            raise ValueError("p_up + p_down exceeds 1")
        return cls(p_up, p_down, boundary, np.clip(hold, 0.0, None))

    @property
    def state_max(self) -> int:
        return len(self.up) - 1

    def with_boundary(self, boundary: str) -> "BirthDeathChain":
        return BirthDeathChain(self.up, self.down, boundary, self.hold)

    def reflected(self) -> "BirthDeathChain":
        """The same chain with state 0 sent to 1 with probability one."""
        return self.with_boundary(REFLECTING)

    def truncated(self, top: int) -> "BirthDeathChain":
        """Restriction to ``{0..top}``; ``top`` becomes the reflecting ceiling."""
        top = int(top)
        return BirthDeathChain(self.up[:top + 1], self.down[:top + 1], self.boundary, self.hold[:top + 1])

    def jump_probabilities(self) -> tuple[np.ndarray, np.ndarray]:
        """``(p_up, p_down)`` of the embedded jump chain; ``p_up[0] = 1``."""
        tot = self.up + self.down + self.hold
        with np.errstate(divide="ignore", invalid="ignore"):
            p_up = np.where(tot > 0, self.up / tot, 0.0)
            p_down = np.where(tot > 0, self.down / tot, 0.0)
        p_up[0], p_down[0] = 1.0, 0.0
        return p_up, p_down

    def reachable_top(self) -> int:
        """Highest state reachable from 1."""
        zero = np.nonzero(self.up[1:-1] == 0)[0]
        return int(zero[0]) + 1 if len(zero) else self.state_max

    def to_dict(self) -> dict:
        return {"state_max": self.state_max, "boundary": self.boundary,
                "up": self.up.tolist(), "down": self.down.tolist(), "hold": self.hold.tolist()}


def _log(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(x)


def _log_ratio_terms(chain: BirthDeathChain) -> np.ndarray:
    """Log of the closed-form terms ``prod_{i<=k} p(i-1,i) / p(i,i-1)`` for k = 1..n."""
    p_up, p_down = chain.jump_probabilities()
    steps = _log(p_up[:-1]) - _log(p_down[1:])
    return np.cumsum(steps)


def _log_time_terms(chain: BirthDeathChain) -> np.ndarray:
    """Log of ``prod_{i<k} up_i / prod_{i<=k} down_i``, the continuous-time terms."""
    n = chain.state_max
    log_up = np.concatenate(([0.0], _log(chain.up[1:n])))
    return np.cumsum(log_up - _log(chain.down[1:]))


def stationary_reflected(chain: BirthDeathChain, log: bool = False) -> np.ndarray:
    """Stationary law of the reflected jump chain by detailed balance.

    Parameters
    ----------
    chain : BirthDeathChain
        Must have the reflecting boundary.
    log : bool
        Return log-probabilities, which never underflow.

    Raises
    ------
    ValueError
        If the boundary is absorbing or some interior state has zero up
        rate, which splits the chain into closed classes.
    """
    if chain.boundary != REFLECTING:
        raise ValueError("stationary_reflected needs the reflecting boundary; use chain.reflected()")
    top = chain.reachable_top()
    if top < chain.state_max:
        raise ValueError(f"up rate is zero at interior state {top}; states above it are unreachable")
    log_pi = np.concatenate(([0.0], _log_ratio_terms(chain)))
    log_pi -= logsumexp(log_pi)
    return log_pi if log else np.exp(log_pi)


def _check_clock(clock: str) -> None:
    if clock not in CLOCKS:
        raise ValueError(f"clock must be one of {CLOCKS}, got {clock!r}")


def _check_absorbing(chain: BirthDeathChain) -> None:
    if chain.boundary != ABSORBING:
        raise ValueError("absorption times need the absorbing boundary")


def log_expected_absorption_from_1(chain: BirthDeathChain, clock: str = "jumps",
                                   check: bool = True) -> float:
    """Log of the expected absorption time from state 1, in closed form.

    ``clock="jumps"`` counts jump-chain steps; ``clock="time"`` gives the
    continuous time of the rate chain. With ``check`` the jump count is
    compared with the return-time identity of the reflected companion.
    """
    _check_absorbing(chain)
    _check_clock(clock)
    jumps = logsumexp(_log_ratio_terms(chain))
    if check:
        top = chain.reachable_top()
        part = chain.truncated(top) if top < chain.state_max else chain
        log_pi0 = stationary_reflected(part.reflected(), log=True)[0]
        lhs = np.logaddexp(jumps, 0.0)
        if abs(lhs + log_pi0) > _EHRENFEST_RTOL * max(1.0, abs(lhs)):
            raise RuntimeError(f"return-time identity failed: log(E+1)={lhs!r}, -log pi(0)={-log_pi0!r}")
    if clock == "jumps":
        return float(jumps)
    return float(logsumexp(_log_time_terms(chain)))


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def expected_absorption_from_1(chain: BirthDeathChain, clock: str = "jumps", check: bool = True) -> float:
    """Expected absorption time from state 1 (``inf`` if it overflows a float)."""
    return _exp(log_expected_absorption_from_1(chain, clock, check))


def _log_descent_times(chain: BirthDeathChain, clock: str) -> np.ndarray:
    """Log of D_j, the expected time to step from j down to j - 1, for j = 1..n.

    First-step analysis gives ``D_j = (c_j + up_j D_{j+1}) / down_j`` with
    ``c_j`` the total jump rate (jumps clock) or 1 (time clock). Solving
    from the top down is the exact tridiagonal solve of the hitting-time
    system and needs no subtraction.
    """
    n = chain.state_max
    log_up = _log(chain.up)
    log_down = _log(chain.down)
    if clock == "jumps":
        log_c = _log(chain.up + chain.down + chain.hold)
    else:
        log_c = np.zeros(n + 1)
    out = np.empty(n + 1)
    out[0] = -np.inf
    nxt = -np.inf
    for j in range(n, 0, -1):
        nxt = np.logaddexp(log_c[j], log_up[j] + nxt) - log_down[j]
        out[j] = nxt
    return out[1:]


def log_expected_absorption_from_L(chain: BirthDeathChain, L: int, clock: str = "jumps") -> float:
    """Log of the expected absorption time from state ``L``.

    The hitting time from ``L`` is the sum of the descent times
    ``D_1 + ... + D_L``.
    """
    _check_absorbing(chain)
    _check_clock(clock)
    if not 1 <= L <= chain.state_max:
        raise ValueError(f"L must lie in [1, {chain.state_max}], got {L}")
    return float(logsumexp(_log_descent_times(chain, clock)[:L]))


def expected_absorption_from_L(chain: BirthDeathChain, L: int, clock: str = "jumps") -> float:
    return _exp(log_expected_absorption_from_L(chain, L, clock))


def _check_nonneg(**values):
    for name, v in values.items():
        if not (v >= 0 and math.isfinite(v)):
            raise ValueError(f"{name} must be finite and nonnegative, got {v}")


def sis_upper_chain(beta: float, d_max: float, mu: float, n: int) -> BirthDeathChain:
    """Chain that dominates the infected count: up ``beta d_max i + mu``, down ``i``."""
    _check_nonneg(beta=beta, d_max=d_max, mu=mu)
    if n < 1:
        raise ValueError("n must be at least 1")
    i = np.arange(n + 1, dtype=float)
    return BirthDeathChain(beta * d_max * i + mu, i)


def sis_lower_chain(beta: float, eta_values, mu_values, m: int) -> BirthDeathChain:
    """Chain dominated by the infected count: up ``beta eta(i) i + mu(i)``, down ``i`` on ``{0..m}``.

    ``eta_values`` and ``mu_values`` are callables of ``i`` or sequences
    of length ``m + 1``. The caller must supply lower bounds on the true
    isoperimetric values.
    """
    _check_nonneg(beta=beta)
    if m < 1:
        raise ValueError("m must be at least 1")
    eta = _as_array(eta_values, m, "eta_values")
    mu = _as_array(mu_values, m, "mu_values")
    if (eta[1:] < 0).any() or (mu[1:] < 0).any():
        raise ValueError("eta and mu values must be nonnegative")
    i = np.arange(m + 1, dtype=float)
    up = beta * eta * i + mu
    up[0] = 0.0
    return BirthDeathChain(up, i)


def log_subcritical_series_bound(beta: float, d_max: float, mu: float, n: int) -> float:
    """Log of ``sum_k (beta d_max)^k (k+1)^(mu / (beta d_max))`` over k >= 1.

    The first ``n`` terms are summed exactly; the rest is bounded by a
    geometric majorant whose ratio is the largest term ratio beyond the
    partial sum.
    """
    _check_nonneg(beta=beta, d_max=d_max, mu=mu)
    x = beta * d_max
    if x >= 1:
        raise ValueError(f"series diverges for beta * d_max = {x} >= 1")
    if x == 0:
        return -math.inf
    s = mu / x
    lx = math.log(x)
    # extend the partial sum until the term ratio drops below one
    k_min = max(int(n), 1)
    if s > 0:
        k_min = max(k_min, math.ceil(1.0 / (x ** (-1.0 / s) - 1.0)))
    k = np.arange(1, k_min + 1, dtype=float)
    log_terms = k * lx + s * np.log(k + 1)
    nxt = k_min + 1
    log_ratio = lx + s * math.log((nxt + 1) / nxt)
    log_tail = (nxt * lx + s * math.log(nxt + 1)) - math.log1p(-math.exp(log_ratio))
    return float(logsumexp(np.append(log_terms, log_tail)))


def subcritical_series_bound(beta: float, d_max: float, mu: float, n: int) -> float:
    return _exp(log_subcritical_series_bound(beta, d_max, mu, n))


# ---------------------------------------------------------------------------
# regime classification


SUBCRITICAL = "SUBCRITICAL"
CRITICAL = "CRITICAL-CANDIDATE"
SUPERCRITICAL = "SUPERCRITICAL-CANDIDATE"
UNCLASSIFIED = "UNCLASSIFIED"


@dataclass(frozen=True)
class RegimeVerdict:
    label: str
    certificate: dict

    def to_dict(self) -> dict:
        return {"regime": self.label, "certificate": self.certificate}


def regime_classify(beta: float, metrics, strategy, alpha: float | None = None,
                    n: int | None = None) -> RegimeVerdict:
    """Place ``(beta, graph, strategy)`` in one of the three regimes.

    Parameters
    ----------
    beta : float
    metrics : GraphMetrics
        Needs ``d_max`` and ``lambda1``; the supercritical test also
        needs ``eta[floor(n**alpha)]``.
    strategy : StrategySpec
    alpha : float, optional
        Cap exponent; defaults to ``strategy.alpha``.
    n : int, optional
        Node count; defaults to ``metrics.node_count``.

    Returns
    -------
    RegimeVerdict
        The certificate names the inequality that fired and its margin.
    """
    bd = beta * metrics.d_max
    bl = beta * metrics.lambda1
    if strategy.constant_budget:
        if bd < 1:
            return RegimeVerdict(SUBCRITICAL, {"inequality": "beta*d_max < 1", "beta_d_max": bd,
                                               "margin": 1 - bd})
        if bl < 1:
            return RegimeVerdict(CRITICAL, {"inequality": "beta*lambda1 < 1 <= beta*d_max",
                                            "beta_lambda1": bl, "beta_d_max": bd, "margin": 1 - bl,
                                            "strength": bd})
        return RegimeVerdict(UNCLASSIFIED, {"reason": "beta*lambda1 >= 1 with constant budget",
                                            "beta_lambda1": bl, "beta_d_max": bd})
    alpha = strategy.alpha if alpha is None else alpha
    n = metrics.node_count if n is None else n
    if n is None:
        return RegimeVerdict(UNCLASSIFIED, {"reason": "node count unknown"})
    m = math.floor(n ** alpha)
    if m not in metrics.eta:
        return RegimeVerdict(UNCLASSIFIED, {"reason": f"eta({m}) not computed", "m": m})
    eta = metrics.eta[m]
    value = beta * eta + strategy.gamma
    cert = {"inequality": "beta*eta(floor(n^alpha)) + gamma > 1", "m": m, "eta": eta,
            "eta_exact": metrics.eta_exact.get(m), "value": value, "margin": value - 1}
    if value > 1:
        return RegimeVerdict(SUPERCRITICAL, cert)
    cert["reason"] = "growth condition not met"
    return RegimeVerdict(UNCLASSIFIED, cert)


# ---------------------------------------------------------------------------
# bound reports


def _log10(x: float) -> float:
    return x / math.log(10)


def upper_bound_report(beta: float, d_max: float, mu: float, n: int) -> dict:
    """Expected extinction time of the dominating chain, as a JSON-ready record."""
    chain = sis_upper_chain(beta, d_max, mu, n)
    bd = beta * d_max
    report = {
        "parameters": {"beta": beta, "d_max": d_max, "mu": mu, "n": n},
        "regime": SUBCRITICAL if bd < 1 else UNCLASSIFIED,
        "certificate": {"inequality": "beta*d_max < 1", "beta_d_max": bd, "margin": 1 - bd},
        "log_expected_absorption": {
            "jumps": log_expected_absorption_from_1(chain, "jumps"),
            "time": log_expected_absorption_from_1(chain, "time", check=False),
        },
        "method": "closed form in log space, checked against the reflected stationary law",
    }
    if bd < 1:
        report["log_series_bound"] = log_subcritical_series_bound(beta, d_max, mu, n)
    return report


def lower_bound_report(beta: float, eta_values, gamma: float, alpha: float, n: int) -> dict:
    """Expected extinction time of the dominated chain under uniform linear-scaling pressure.

    The chain lives on ``{0..floor(n**alpha)}`` with effective external
    rate ``gamma i (1 - i/n)``.
    """
    m = math.floor(n ** alpha)
    eta = _as_array(eta_values, m, "eta_values")
    chain = sis_lower_chain(beta, eta, lambda i: gamma * i * (1 - i / n), m)
    value = beta * eta[m] + gamma
    return {
        "parameters": {"beta": beta, "gamma": gamma, "alpha": alpha, "n": n, "m": m},
        "regime": SUPERCRITICAL if value > 1 else UNCLASSIFIED,
        "certificate": {"inequality": "beta*eta(floor(n^alpha)) + gamma > 1", "value": value,
                        "margin": value - 1},
        "log_expected_absorption": {
            "jumps": log_expected_absorption_from_1(chain, "jumps"),
            "time": log_expected_absorption_from_1(chain, "time", check=False),
        },
        "method": "closed form in log space, checked against the reflected stationary law",
    }
