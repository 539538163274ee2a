"""Censoring-aware summaries, bootstrap intervals and growth-law fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize, stats

__all__ = ["bootstrap_ci", "fit_scaling", "ScalingFit", "FAMILIES", "summarize_point"]

FAMILIES = ("constant", "log", "power", "stretched_exponential")
_PARAM_COUNT = {"constant": 1, "log": 1, "power": 2, "stretched_exponential": 2}
DEFAULT_A_GRID = tuple(np.round(np.arange(0.1, 1.51, 0.05), 2))


def bootstrap_ci(samples, level: float = 0.95, resamples: int = 2000, seed: int = 0,
                 statistic=np.mean) -> tuple[float, float]:
    """Percentile bootstrap interval for ``statistic`` of ``samples``.

    Deterministic under ``seed``.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("bootstrap_ci needs at least 2 samples")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if np.ptp(x) == 0:
        v = float(statistic(x))
        return v, v
    res = stats.bootstrap((x,), statistic, confidence_level=level, n_resamples=resamples,
                          method="percentile", random_state=np.random.default_rng(seed),
                          vectorized=True, batch=max(1, min(resamples, 20_000_000 // len(x))))
    return float(res.confidence_interval.low), float(res.confidence_interval.high)


@dataclass
class ScalingFit:
    """Result of :func:`fit_scaling`.

    ``fits`` maps each family to its parameters, AICc and residuals on
    the log scale; ``exponent`` and ``exponent_ci`` come from the power
    fit whatever family wins.
    """

    family: str
    params: dict
    exponent: float
    exponent_ci: tuple[float, float]
    fits: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"family": self.family, "params": self.params, "exponent": self.exponent,
                "exponent_ci": list(self.exponent_ci), "fits": self.fits}


def _wls(X, y, w):
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    resid = y - X @ coef
    return coef, resid, float(np.sum(w * resid ** 2))


def _aicc(rss, n_obs, k, floor):
    if n_obs - k - 1 <= 0:
        return math.inf
    return n_obs * math.log(max(rss, floor) / n_obs) + 2 * k + 2 * k * (k + 1) / (n_obs - k - 1)


def fit_scaling(points: Sequence[tuple], a_grid: Sequence[float] = DEFAULT_A_GRID,
                level: float = 0.95) -> ScalingFit:
    """Pick the growth law of ``T(n)`` among four families.

    Parameters
    ----------
    points : sequence of (n, T) or (n, T, stderr)
        Mean lifetimes. With standard errors the fits on ``log T`` are
        weighted by ``(T / stderr)**2``.
    a_grid : sequence of float
        Starting grid for the stretched-exponential shape ``a``; the
        best grid value is refined by a bounded scalar search.
    level : float
        Confidence level of the power-law exponent interval.

    Returns
    -------
    ScalingFit
        Families on the log scale: constant ``log T = b``, log
        ``log T = b + log log n``, power ``log T = b + k log n`` and
        stretched exponential ``log T = b + c n**a``. The winner has the
        smallest small-sample corrected AIC; near ties go to fewer
        parameters.

    Raises
    ------
    ValueError
        Fewer than 3 points, a single distinct ``n``, or nonpositive values.
    """
    pts = [tuple(p) for p in points]
    if len(pts) < 3:
        raise ValueError("fit_scaling needs at least 3 points")
    n = np.array([p[0] for p in pts], dtype=float)
    t = np.array([p[1] for p in pts], dtype=float)
    se = np.array([p[2] if len(p) > 2 and p[2] is not None else 0.0 for p in pts], dtype=float)
    if len(np.unique(n)) < 2:
        raise ValueError("fit_scaling needs at least two distinct n values")
    if (n <= 1).any() or (t <= 0).any() or not np.isfinite(t).all():
        raise ValueError("n must exceed 1 and T must be positive and finite")
    weighted = bool((se > 0).all())
    w = (t / se) ** 2 if weighted else np.ones(len(t))
    w = w / w.mean()
    y = np.log(t)
    x = np.log(n)
    N = len(y)
    floor = N * 1e-24 * max(1.0, float(np.mean(y ** 2)))
    ones = np.ones(N)
    fits = {}

    coef, r, rss = _wls(ones[:, None], y, w)
    fits["constant"] = {"params": {"c": float(math.exp(coef[0]))}, "rss": rss, "residuals": r.tolist()}

    coef, r, rss = _wls(ones[:, None], y - np.log(x), w)
    fits["log"] = {"params": {"c": float(math.exp(coef[0]))}, "rss": rss, "residuals": r.tolist()}

    X = np.column_stack([ones, x])
    coef, r, rss = _wls(X, y, w)
    fits["power"] = {"params": {"c": float(math.exp(coef[0])), "k": float(coef[1])}, "rss": rss,
                     "residuals": r.tolist()}
    k_hat = float(coef[1])
    dof = N - 2
    xtwx_inv = np.linalg.inv((X * w[:, None]).T @ X)
    if weighted:
        # weights are inverse variances up to the normalisation; inflate by
        # the reduced chi-square when the power law misfits
        scale = float(np.mean((t / se) ** 2))
        chi2_red = rss * scale / dof if dof > 0 else 1.0
        var_k = xtwx_inv[1, 1] / scale * max(1.0, chi2_red)
        q = stats.norm.ppf(0.5 + level / 2)
    else:
        var_k = xtwx_inv[1, 1] * rss / dof if dof > 0 else math.inf
        q = stats.t.ppf(0.5 + level / 2, dof) if dof > 0 else math.inf
    half = q * math.sqrt(var_k) if math.isfinite(var_k) else math.inf
    exponent_ci = (k_hat - half, k_hat + half)

    def stretched(a):
        Xa = np.column_stack([ones, n ** a])
        return _wls(Xa, y, w)

    grid = list(a_grid)
    best = min(grid, key=lambda a: stretched(a)[2])
    i = grid.index(best)
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda a: stretched(a)[2], bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-8})
        if res.fun < stretched(best)[2]:
            best = float(res.x)
    coef, r, rss = stretched(best)
    fits["stretched_exponential"] = {"params": {"b": float(coef[0]), "c": float(coef[1]), "a": float(best)},
                                     "rss": rss, "residuals": r.tolist()}

    for fam, f in fits.items():
        f["k"] = _PARAM_COUNT[fam]
        f["aicc"] = _aicc(f["rss"], N, f["k"], floor)
    order = sorted(FAMILIES, key=lambda fam: (fits[fam]["aicc"], fits[fam]["k"]))
    winner = order[0]
    # a near tie goes to the simpler family
    for fam in order[1:]:
        if fits[fam]["aicc"] - fits[winner]["aicc"] < 1e-9 and fits[fam]["k"] < fits[winner]["k"]:
            winner = fam
    return ScalingFit(winner, fits[winner]["params"], k_hat, exponent_ci, fits)


def summarize_point(outcomes, level: float = 0.95, resamples: int = 2000, seed: int = 0) -> dict:
    """Summary statistics of one sweep point.

    The mean, its standard error and bootstrap interval use uncensored
    runs only; ``mean_lower_bound`` and ``median`` use every run, with
    censored runs at their censoring time. ``censored_fraction`` always
    travels with them.
    """
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("no outcomes to summarize")
    times = np.array([o.extinction_time for o in outcomes], dtype=float)
    censored = np.array([o.censored for o in outcomes], dtype=bool)
    done = times[~censored]
    summary = {
        "replications": len(outcomes),
        "censored_fraction": float(censored.mean()),
        "uncensored": int(len(done)),
        "mean": float(done.mean()) if len(done) else None,
        "stderr": float(done.std(ddof=1) / math.sqrt(len(done))) if len(done) > 1 else None,
        "ci": list(bootstrap_ci(done, level, resamples, seed)) if len(done) > 1 else None,
        "ci_level": level,
        "median": float(np.median(times)),
        "mean_lower_bound": float(times.mean()),
        "mean_events": float(np.mean([o.event_count for o in outcomes])),
    }
    if outcomes[0].model == "SIR":
        eventual = np.array([o.eventual_infected for o in outcomes], dtype=float)
        summary["mean_eventual_infected"] = float(eventual[~censored].mean()) if len(done) else None
        summary["eventual_infected_stderr"] = (float(eventual[~censored].std(ddof=1) / math.sqrt(len(done)))
                                               if len(done) > 1 else None)
    else:
        summary["mean_peak_infected"] = float(np.mean([o.eventual_infected for o in outcomes]))
    return summary
