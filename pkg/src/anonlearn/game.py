"""Abstract anonymous game and game-agnostic verification tools."""

from dataclasses import dataclass, field

import numpy as np

from .measure import DEFAULT_LP_CAP, DiscreteMeasure, integrate, wasserstein1


class StructuralError(ValueError):
    """A profile does not fit the game (wrong player count or inadmissible action)."""


class CapabilityError(TypeError):
    """The game lacks an operation required by the requested learning loop."""


class GameInstance:
    """Anonymous game with K weighted players sharing one cost function.

    Subclasses provide ``weights`` (player masses), ``metric`` (ground metric on
    actions), ``costs``, ``best_responses`` and ``contains``. Actions are numpy
    arrays; a profile is the stack of all players' actions.

    Games that support mirror descent additionally implement ``subgradients``,
    ``mirror_project``, ``initial_dual``, ``dual_norms``, ``primal_norms`` and
    ``pairing``, and set ``supports_omd = True``.
    """

    weights = None
    metric = None
    supports_omd = False

    @property
    def n_players(self):
        return len(self.weights)

    # -- required ----------------------------------------------------------
    def costs(self, actions, eta):
        """Vector of ``J(a, eta)`` for every action in the stack ``actions``."""
        raise NotImplementedError

    def best_responses(self, eta, warm=None):
        """Stack of best responses of all players to ``eta``."""
        raise NotImplementedError

    def contains(self, i, action, tol=1e-9):
        raise NotImplementedError

    def default_profile(self):
        raise NotImplementedError

    # -- conveniences ------------------------------------------------------
    def cost(self, action, eta):
        return float(self.costs(np.asarray(action, dtype=float)[None], eta)[0])

    def best_response(self, i, eta):
        return self.best_responses(eta)[i]

    def encode_action(self, action):
        return np.asarray(action, dtype=float).reshape(-1).tolist()

    def distance(self, mu, nu, cap=DEFAULT_LP_CAP):
        """Distance used by the learning diagnostics (Wasserstein-1 by default)."""
        return wasserstein1(mu, nu, cap=cap)


@dataclass
class Profile:
    """Actions of all players, aligned with ``game.weights``."""

    actions: np.ndarray

    def __post_init__(self):
        self.actions = np.asarray(self.actions, dtype=float)

    def __len__(self):
        return self.actions.shape[0]

    def __getitem__(self, i):
        return self.actions[i]


def validate_profile(game, psi, tol=1e-9):
    if len(psi) != game.n_players:
        raise StructuralError(f"profile has {len(psi)} actions for {game.n_players} players")
    for i in range(game.n_players):
        if not game.contains(i, psi.actions[i], tol):
            raise StructuralError(f"action of player {i} is outside its action set")


def profile_pushforward(game, psi, check=True):
    """The measure putting mass ``lambda_i`` on the action of player ``i``."""
    if check:
        validate_profile(game, psi)
    return DiscreteMeasure(psi.actions, game.weights, game.metric)


def exploitability(game, eta, psi=None, best=None):
    """Average gain ``sum_i lambda_i [J(psi_i, eta) - J(BR(i, eta), eta)]``.

    When ``psi`` is omitted the played side is ``eta`` itself, i.e. the value is
    ``integral of J(., eta) d eta`` minus the best-response cost; this is the
    right form when ``eta`` is a running average of past profiles.
    """
    if best is None:
        best = game.best_responses(eta)
    br_cost = float(game.weights @ game.costs(best, eta))
    if psi is None:
        played = integrate(eta, lambda P: game.costs(P, eta), vectorized=True)
    else:
        played = float(game.weights @ game.costs(psi.actions, eta))
    return played - br_cost


@dataclass
class MonotonicityReport:
    min_value: float
    n_pairs: int
    n_violations: int
    tol: float
    witness: tuple = None
    values: list = field(default_factory=list, repr=False)

    @property
    def monotone(self):
        return self.n_violations == 0

    def to_record(self):
        return {
            "min_value": self.min_value,
            "n_pairs": self.n_pairs,
            "n_violations": self.n_violations,
            "tol": self.tol,
            "monotone": self.monotone,
        }


def monotonicity_value(game, eta, eta2):
    """``integral of (J(a, eta) - J(a, eta2)) d(eta - eta2)(a)``."""
    d1 = game.costs(eta.points, eta) - game.costs(eta.points, eta2)
    d2 = game.costs(eta2.points, eta) - game.costs(eta2.points, eta2)
    return float(eta.weights @ d1 - eta2.weights @ d2)


def check_monotonicity(game, sample_pairs, tol=1e-9):
    values = [monotonicity_value(game, a, b) for a, b in sample_pairs]
    if not values:
        return MonotonicityReport(float("nan"), 0, 0, tol)
    vals = np.array(values)
    bad = vals < -tol
    witness = None
    if bad.any():
        k = int(np.argmin(vals))
        witness = tuple(sample_pairs[k])
    return MonotonicityReport(float(vals.min()), len(values), int(bad.sum()), tol, witness, values)


def verify_equilibrium(game, psi, tol):
    """True iff no player can lower its cost by more than ``tol`` against ``psi``'s pushforward."""
    eta = profile_pushforward(game, psi)
    own = game.costs(psi.actions, eta)
    best = game.costs(game.best_responses(eta, warm=psi.actions), eta)
    return bool(np.all(own <= best + tol))


__all__ = [
    "GameInstance",
    "Profile",
    "StructuralError",
    "CapabilityError",
    "validate_profile",
    "profile_pushforward",
    "exploitability",
    "MonotonicityReport",
    "monotonicity_value",
    "check_monotonicity",
    "verify_equilibrium",
]
