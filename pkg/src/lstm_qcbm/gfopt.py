"""Derivative-free minimizers: unconstrained COBYLA and Nelder-Mead.

Both share :class:`GfOptions` / :class:`GfResult` and count every objective
call against ``max_evals``; running out of budget is not an error, the best
point seen so far is returned.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError

Objective = Callable[[np.ndarray], float]


class InputError(ValueError):
    """Objective returned a non-finite value."""


@dataclass(frozen=True)
class GfOptions:
    max_evals: int = 50
    rho_begin: float = 0.5
    rho_end: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.max_evals < 1:
            raise ConfigurationError(f"max_evals must be >= 1, got {self.max_evals}")
        if not 0 < self.rho_end < self.rho_begin:
            raise ConfigurationError(
                f"need 0 < rho_end < rho_begin, got {self.rho_end}, {self.rho_begin}"
            )


@dataclass
class GfResult:
    best_x: np.ndarray
    best_f: float
    evals_used: int
    trace: list[tuple[int, float]] = field(default_factory=list)

    def write_trace_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["eval_index", "f_value"])
            for i, f in self.trace:
                writer.writerow([i, repr(f)])


class _Budget(Exception):
    pass


class _Counter:
    """Wraps the objective: enforces the budget and records the trace."""

    def __init__(self, objective: Objective, max_evals: int):
        self.objective = objective
        self.max_evals = max_evals
        self.trace: list[tuple[int, float]] = []
        self.best_x = None
        self.best_f = np.inf

    def __call__(self, x: np.ndarray) -> float:
        if len(self.trace) >= self.max_evals:
            raise _Budget
        f = float(self.objective(x.copy()))
        if not np.isfinite(f):
            raise InputError(f"objective returned {f} at evaluation {len(self.trace)}")
        self.trace.append((len(self.trace), f))
        if f < self.best_f:
            self.best_f = f
            self.best_x = x.copy()
        return f

    def result(self) -> GfResult:
        return GfResult(np.array(self.best_x), float(self.best_f), len(self.trace), self.trace)


def _start(objective: Objective, x0, options: GfOptions) -> tuple[_Counter, np.ndarray]:
    x0 = np.array(x0, dtype=np.float64).ravel()
    if x0.size < 1:
        raise ConfigurationError("x0 must have at least one entry")
    if not np.all(np.isfinite(x0)):
        raise InputError("x0 must be finite")
    return _Counter(objective, options.max_evals), x0


# COBYLA constants (Powell 1994, PRIMA conventions).
_ETA1, _ETA2 = 0.1, 0.7
_GAMMA1, _GAMMA2 = 0.5, 2.0
_FACTOR_ALPHA, _FACTOR_BETA = 0.25, 2.1


def minimize(objective: Objective, x0, options: GfOptions = GfOptions()) -> GfResult:
    """Unconstrained COBYLA.

    Keeps ``n + 1`` interpolation points, fits the linear model through them
    and steps to its minimizer on the trust-region sphere of radius
    ``delta``. ``delta`` grows after very successful steps and shrinks after
    poor ones but never drops below the resolution ``rho``; ``rho`` itself
    decreases from ``rho_begin`` to ``rho_end`` once the model cannot make
    progress on a well-poised simplex.
    """
    fn, x0 = _start(objective, x0, options)
    n = x0.size
    try:
        _cobyla(fn, x0, n, options.rho_begin, options.rho_end)
        # Converged with budget to spare: restart from the incumbent while
        # restarts keep finding strictly better points.
        while True:
            before = fn.best_f
            _cobyla(fn, fn.best_x, n, options.rho_begin, options.rho_end)
            if not fn.best_f < before:
                break
    except _Budget:
        pass
    return fn.result()


def _cobyla(fn: _Counter, x0: np.ndarray, n: int, rho_begin: float, rho_end: float) -> None:
    rho = delta = rho_begin
    # Row 0 is the pole (best point); rows 1..n the other vertices.
    sim = np.tile(x0, (n + 1, 1))
    fval = np.empty(n + 1)
    fval[0] = fn(x0)
    for j in range(n):
        sim[j + 1, j] += rho
        fval[j + 1] = fn(sim[j + 1])
        if fval[j + 1] < fval[0]:
            # keep the best point as the pole, mirroring the step as Powell does
            sim[[0, j + 1]] = sim[[j + 1, 0]]
            fval[[0, j + 1]] = fval[[j + 1, 0]]

    while True:
        disp = sim[1:] - sim[0]
        try:
            inv = np.linalg.inv(disp)  # disp @ inv == I; column j of inv is normal to face j
        except np.linalg.LinAlgError:
            inv = np.linalg.pinv(disp)
        grad = inv @ (fval[1:] - fval[0])
        gnorm = float(np.linalg.norm(grad))

        dnorm = delta if gnorm > 0 else 0.0
        shortd = dnorm < 0.5 * rho
        ratio = -np.inf
        if not shortd:
            step = -delta * grad / gnorm
            xnew = sim[0] + step
            fnew = fn(xnew)
            predicted = delta * gnorm
            ratio = (fval[0] - fnew) / predicted

            if ratio <= _ETA1:
                delta = _GAMMA1 * delta
            elif ratio <= _ETA2:
                delta = max(_GAMMA1 * delta, dnorm)
            else:
                delta = max(_GAMMA1 * delta, _GAMMA2 * dnorm)
            if delta <= 1.5 * rho:
                delta = rho

            _include_trial(sim, fval, inv, step, xnew, fnew, delta)
        else:
            delta = max(0.1 * delta, rho)
            if delta <= 1.5 * rho:
                delta = rho

        bad_step = shortd or ratio <= _ETA1
        if not bad_step:
            continue

        disp = sim[1:] - sim[0]
        try:
            inv = np.linalg.inv(disp)
        except np.linalg.LinAlgError:
            inv = np.linalg.pinv(disp)
        jgeo = _bad_vertex(disp, inv, delta)
        if jgeo is not None:
            _geometry_step(fn, sim, fval, inv, jgeo, delta, fval[1:] - fval[0])
        elif max(delta, dnorm) <= rho:
            if rho <= rho_end:
                return
            if rho > 250 * rho_end:
                rho_new = 0.1 * rho
            elif rho <= 16 * rho_end:
                rho_new = rho_end
            else:
                rho_new = np.sqrt(rho * rho_end)
            delta = max(0.5 * rho, rho_new)
            rho = rho_new


def _include_trial(sim, fval, inv, step, xnew, fnew, delta) -> None:
    # barycentric weights of the trial point relative to the current simplex
    lam = inv.T @ step
    lam0 = 1.0 - lam.sum()
    weights = np.abs(np.concatenate([[lam0], lam]))
    better = fnew < fval[0]
    centre = xnew if better else sim[0]
    dist = np.linalg.norm(sim - centre, axis=1)
    score = weights * np.maximum(1.0, (dist / delta) ** 2)
    if better:
        jdrop = int(np.argmax(score))
    else:
        score[0] = -np.inf  # never drop the pole for a worse point
        jdrop = int(np.argmax(score))
        if score[jdrop] <= 1.0:
            return
    sim[jdrop] = xnew
    fval[jdrop] = fnew
    if better and jdrop != 0:
        sim[[0, jdrop]] = sim[[jdrop, 0]]
        fval[[0, jdrop]] = fval[[jdrop, 0]]


def _bad_vertex(disp, inv, delta):
    """Index (1-based vertex) that spoils poisedness, or ``None``."""
    dist = np.linalg.norm(disp, axis=1)
    j = int(np.argmax(dist))
    if dist[j] > _FACTOR_BETA * delta:
        return j + 1
    sigma = 1.0 / np.linalg.norm(inv, axis=0)
    j = int(np.argmin(sigma))
    if sigma[j] < _FACTOR_ALPHA * delta:
        return j + 1
    return None


def _geometry_step(fn, sim, fval, inv, jvert, delta, fdiff) -> None:
    normal = inv[:, jvert - 1]
    normal = normal / np.linalg.norm(normal)
    grad = inv @ fdiff
    sign = -1.0 if grad @ normal > 0 else 1.0
    xnew = sim[0] + sign * 0.5 * delta * normal
    fnew = fn(xnew)
    sim[jvert] = xnew
    fval[jvert] = fnew
    if fnew < fval[0]:
        sim[[0, jvert]] = sim[[jvert, 0]]
        fval[[0, jvert]] = fval[[jvert, 0]]


def nelder_mead(objective: Objective, x0, options: GfOptions = GfOptions()) -> GfResult:
    """Nelder-Mead simplex search with coefficients 1, 2, 0.5, 0.5.

    Stops when every vertex lies within ``rho_end`` of the best one or the
    budget runs out.
    """
    fn, x0 = _start(objective, x0, options)
    try:
        _nelder_mead(fn, x0, options.rho_begin, options.rho_end)
    except _Budget:
        pass
    return fn.result()


def _nelder_mead(fn: _Counter, x0: np.ndarray, rho_begin: float, rho_end: float) -> None:
    n = x0.size
    sim = np.tile(x0, (n + 1, 1))
    for j in range(n):
        sim[j + 1, j] += rho_begin
    fval = np.array([fn(v) for v in sim])

    while True:
        order = np.argsort(fval, kind="stable")
        sim, fval = sim[order], fval[order]
        if np.max(np.linalg.norm(sim[1:] - sim[0], axis=1)) <= rho_end:
            return
        centroid = sim[:-1].mean(axis=0)
        xr = centroid + (centroid - sim[-1])
        fr = fn(xr)
        if fr < fval[0]:
            xe = centroid + 2.0 * (centroid - sim[-1])
            fe = fn(xe)
            if fe < fr:
                sim[-1], fval[-1] = xe, fe
            else:
                sim[-1], fval[-1] = xr, fr
            continue
        if fr < fval[-2]:
            sim[-1], fval[-1] = xr, fr
            continue
        if fr < fval[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = fn(xc)
            accept = fc <= fr
        else:
            xc = centroid + 0.5 * (sim[-1] - centroid)
            fc = fn(xc)
            accept = fc < fval[-1]
        if accept:
            sim[-1], fval[-1] = xc, fc
            continue
        for j in range(1, n + 1):
            sim[j] = sim[0] + 0.5 * (sim[j] - sim[0])
            fval[j] = fn(sim[j])
