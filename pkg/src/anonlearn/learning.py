"""Fictitious play and online mirror descent with per-round diagnostics.

Both loops work on any :class:`~anonlearn.game.GameInstance`; mirror descent
additionally needs the game's dual operations (``supports_omd``).
"""

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .game import CapabilityError, Profile, exploitability
from .measure import DEDUP_TOL, DiscreteMeasure, SupportTooLarge, mix

CSV_COLUMNS = ("n", "phi", "psi", "alpha", "d1_ref", "d1_step", "max_grad", "ms")


class RunError(RuntimeError):
    """A learning round failed; ``trace`` holds the rounds completed before it."""

    def __init__(self, message, trace, cause=None):
        super().__init__(message)
        self.trace = trace
        self.cause = cause


@dataclass
class Reference:
    """Stand-in for the equilibrium: a distribution and, for OMD diagnostics, the profile inducing it."""

    eta: DiscreteMeasure
    profile: np.ndarray = None
    exploitability: float = None


@dataclass
class StopRule:
    max_rounds: int = 500
    phi_tol: float = 1e-3
    patience: int = 3


@dataclass
class FpState:
    n: int
    profile: np.ndarray
    eta: DiscreteMeasure
    eta_bar: DiscreteMeasure
    history: list = None


@dataclass
class OmdState:
    n: int
    dual: np.ndarray
    profile: np.ndarray
    eta: DiscreteMeasure
    power: float = 1.0

    @property
    def beta(self):
        return self.n ** (-self.power)


@dataclass
class RunTrace:
    loop: str
    records: list = field(default_factory=list)
    converged: bool = False
    flags: list = field(default_factory=list)
    final_state: object = None
    error: str = None

    def column(self, key):
        return np.array([np.nan if r.get(key) is None else r[key] for r in self.records], dtype=float)

    @property
    def final_phi(self):
        vals = [r["phi"] for r in self.records if r.get("phi") is not None]
        return vals[-1] if vals else None

    def summary(self):
        return {"final_phi": self.final_phi, "rounds": len(self.records), "converged": bool(self.converged)}

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow([_fmt(r.get(c)) for c in CSV_COLUMNS])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _d1(game, mu, nu, cap):
    try:
        return game.distance(mu, nu, cap=cap)
    except SupportTooLarge:
        return None


def _pushforward(game, actions):
    return DiscreteMeasure(actions, game.weights, game.metric)


# -- fictitious play ---------------------------------------------------------------


def fp_init(game, profile=None, keep_history=True):
    A = np.array(game.default_profile() if profile is None else profile, dtype=float)
    eta = _pushforward(game, A)
    return FpState(1, A, eta, eta, [A] if keep_history else None)


def fp_step(state, game):
    """One round: best responses to the running average, then the average update.

    Returns ``(new_state, info)``; ``info`` holds ``phi`` (exploitability of the
    average before the update) and the best responses.
    """
    best = game.best_responses(state.eta_bar, warm=state.profile)
    phi = exploitability(game, state.eta_bar, best=best)
    eta_next = _pushforward(game, best)
    n = state.n
    bar_next = mix(state.eta_bar, eta_next, 1.0 / (n + 1))
    hist = None if state.history is None else state.history + [best]
    return FpState(n + 1, best, eta_next, bar_next, hist), {"phi": phi, "best": best}


def audit_mixture(state, game, atol=1e-12):
    """Largest weight mismatch between the running average and ``(1/n) sum_k eta_k`` built from history."""
    bar = state.eta_bar
    index = {bar.points[a].tobytes(): a for a in range(len(bar))}
    expected = np.zeros(len(bar))
    n = len(state.history)
    for A in state.history:
        for i, p in enumerate(A):
            a = index.get(np.ascontiguousarray(p).tobytes())
            if a is None:
                D = bar.metric.pairwise(p[None], bar.points)[0]
                a = int(np.argmin(D))
                if D[a] >= DEDUP_TOL:
                    return np.inf
            expected[a] += game.weights[i] / n
    return float(np.abs(expected - bar.weights).max())


# -- online mirror descent ------------------------------------------------------------


def omd_init(game, power=1.0):
    if not getattr(game, "supports_omd", False):
        raise CapabilityError(f"{type(game).__name__} does not provide subgradients and a mirror map")
    Y = np.array(game.initial_dual(), dtype=float)
    A = game.mirror_project(Y)
    return OmdState(1, Y, A, _pushforward(game, A), power)


def omd_step(state, game):
    """Dual step against the current subgradients, then the mirror map."""
    y = game.subgradients(state.profile, state.eta)
    beta = state.beta
    dual = state.dual - beta * y
    A = game.mirror_project(dual)
    ynorm = game.dual_norms(y)
    disp = game.primal_norms(A - state.profile)
    info = {
        "y": y,
        "max_grad": float(ynorm.max()),
        "disp_excess": float((disp - beta * ynorm).max()),
        "beta": beta,
    }
    return OmdState(state.n + 1, dual, A, _pushforward(game, A), state.power), info


# -- driver ----------------------------------------------------------------------


def _psi(game, eta, ref):
    """``integral of J(., ref) d(eta - ref)``."""
    return float(eta.weights @ game.costs(eta.points, ref.eta) - ref.eta.weights @ game.costs(ref.eta.points, ref.eta))


def run(
    loop,
    game,
    stop=None,
    reference=None,
    d1_cap=1024,
    phi_every=1,
    timing=False,
    power=1.0,
    profile=None,
    audit_until=64,
    audit_every=64,
    callback=None,
):
    """Drive ``loop`` ("fp" or "omd") until ``stop`` fires; one record per round.

    Records carry ``n, phi, psi, alpha, d1_ref, d1_step, max_grad, ms`` plus
    loop-specific extras (``d1_last``: distance between consecutive pushforwards;
    ``disp_excess`` for OMD). Failures raise :class:`RunError` with the partial trace.
    """
    stop = stop or StopRule()
    trace = RunTrace(loop)
    if loop == "fp":
        state = fp_init(game, profile)
    elif loop == "omd":
        state = omd_init(game, power)
        if not 0.5 < power <= 1.0:
            raise ValueError("step exponent must lie in (1/2, 1]")
        if power != 1.0:
            trace.flags.append("outside convergence guarantee: step 1/n^p with p != 1")
    else:
        raise ValueError(f"unknown loop {loop!r}")
    if reference is not None and loop == "omd" and reference.profile is None:
        raise ValueError("mirror descent diagnostics need the reference profile")
    streak = 0
    for _ in range(stop.max_rounds):
        n = state.n
        t0 = time.perf_counter()
        try:
            rec = _fp_round(state, game, reference, d1_cap) if loop == "fp" else _omd_round(state, game, reference, d1_cap, phi_every)
        except Exception as exc:  # surface with the partial trace
            trace.error = f"round {n}: {exc}"
            trace.final_state = state
            raise RunError(trace.error, trace, exc) from exc
        state, rec = rec
        if loop == "fp" and state.history is not None and (n <= audit_until or n % audit_every == 0):
            gap = audit_mixture(state, game)
            if gap > 1e-12:
                trace.error = f"round {n}: running average drifted from the history mean by {gap:.3e}"
                trace.final_state = state
                raise RunError(trace.error, trace)
        rec["ms"] = (time.perf_counter() - t0) * 1e3 if timing else None
        trace.records.append(rec)
        if callback is not None:
            callback(rec, state)
        phi = rec.get("phi")
        streak = streak + 1 if phi is not None and phi < stop.phi_tol else (streak if phi is None else 0)
        if streak >= stop.patience:
            trace.converged = True
            break
    trace.final_state = state
    return trace


def _fp_round(state, game, ref, cap):
    n = state.n
    new, info = fp_step(state, game)
    rec = {"n": n, "phi": info["phi"], "psi": None, "alpha": None, "max_grad": None}
    if ref is not None:
        rec["psi"] = _psi(game, state.eta_bar, ref)
        rec["d1_ref"] = _d1(game, state.eta_bar, ref.eta, cap)
    else:
        rec["d1_ref"] = None
    # the two averages differ by (eta_{n+1} - bar_n) / (n + 1)
    d = _d1(game, new.eta, state.eta_bar, cap)
    rec["d1_step"] = None if d is None else d / (n + 1)
    rec["d1_last"] = _d1(game, state.eta, new.eta, cap)
    return new, rec


def _omd_round(state, game, ref, cap, phi_every):
    n = state.n
    rec = {"n": n, "psi": None, "alpha": None, "d1_ref": None}
    if phi_every and (n - 1) % phi_every == 0:
        rec["phi"] = exploitability(game, state.eta, psi=Profile(state.profile))
    else:
        rec["phi"] = None
    new, info = omd_step(state, game)
    if ref is not None:
        rec["psi"] = _psi(game, state.eta, ref)
        rec["alpha"] = float(game.weights @ game.pairing(info["y"], state.profile - ref.profile))
        rec["d1_ref"] = _d1(game, state.eta, ref.eta, cap)
    rec["d1_step"] = _d1(game, state.eta, new.eta, cap)
    rec["d1_last"] = rec["d1_step"]
    rec["max_grad"] = info["max_grad"]
    rec["disp_excess"] = info["disp_excess"]
    rec["dual_norm"] = float(game.dual_norms(state.dual).max())
    return new, rec


# -- oracles for the convergence lemmas ----------------------------------------------


def sequence_lemma_check(phi, eps, atol=1e-12, floor=-1e-9):
    """Check a sequence against the hypothesis and conclusion pattern of the FP lemma.

    Hypothesis, at every index ``n >= 1``: ``phi[n+1] - phi[n] <= -phi[n]/(n+1) + eps[n]/n``.
    Conclusion, on the second half of the sequence: ``phi[n] >= floor`` and
    ``phi[n] <= (max(phi[1], 0) + 2 sum_{k<n} |eps[k]|) / n``, which is the
    bound the recursion implies.
    """
    phi = np.asarray(phi, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if phi.shape != eps.shape:
        raise ValueError(f"length mismatch: {phi.size} values of phi, {eps.size} of eps")
    if phi.size < 2:
        return True
    n = np.arange(1, phi.size + 1, dtype=float)
    lhs = phi[1:] - phi[:-1]
    rhs = -phi[:-1] / (n[:-1] + 1) + eps[:-1] / n[:-1]
    if np.any(lhs > rhs + atol * (1.0 + np.abs(phi[:-1]))):
        return False
    tail = slice(phi.size // 2, None)
    if np.any(phi[tail] < floor):
        return False
    partial = np.concatenate([[0.0], np.cumsum(np.abs(eps))[:-1]])
    bound = (max(phi[0], 0.0) + 2.0 * partial) / n
    return bool(np.all(phi[tail] <= bound[tail] + atol))


def recursion_excess(phi, d1_next, n0=1):
    """Per-round ratio ``[phi_{n+1} - phi_n + phi_n/(n+1)] / [(d_n + 1/n)/n]``.

    ``d1_next[k]`` is the distance between the pushforwards of rounds n+1 and n+2
    for ``n = n0 + k``. Returns the ratios for ``n = n0 .. n0 + len(phi) - 2``.
    """
    phi = np.asarray(phi, dtype=float)
    d = np.asarray(d1_next, dtype=float)[: phi.size - 1]
    n = n0 + np.arange(phi.size - 1, dtype=float)
    lhs = phi[1:] - phi[:-1] + phi[:-1] / (n + 1)
    return lhs / ((d + 1.0 / n) / n)


def fit_constant(ratios):
    """Smallest nonnegative constant dominating the ratios (NaNs ignored)."""
    r = np.asarray(ratios, dtype=float)
    r = r[np.isfinite(r)]
    return float(max(r.max(), 0.0)) if r.size else 0.0


def drift_check(d1_steps, fit_rounds=100, check_rounds=200, slack=2.0):
    """Fit ``C`` in ``d1(bar_n, bar_{n+1}) <= C/n`` on the first rounds and test it on the rest.

    Returns ``(ok, C, worst_ratio_on_check_rounds)``.
    """
    d = np.asarray(d1_steps, dtype=float)
    n = np.arange(1, d.size + 1, dtype=float)
    C = fit_constant((n * d)[:fit_rounds])
    tail = (n * d)[fit_rounds:check_rounds]
    worst = float(np.nanmax(tail)) if tail.size else 0.0
    return bool(worst <= slack * C + 1e-15), C, worst


__all__ = [
    "CSV_COLUMNS",
    "FpState",
    "OmdState",
    "Reference",
    "RunError",
    "RunTrace",
    "StopRule",
    "audit_mixture",
    "drift_check",
    "fit_constant",
    "fp_init",
    "fp_step",
    "omd_init",
    "omd_step",
    "recursion_excess",
    "run",
    "sequence_lemma_check",
]
