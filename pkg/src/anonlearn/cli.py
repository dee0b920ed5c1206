"""Config-driven experiment runner.

    anonlearn run CONFIG [--out DIR] [--seed N] [--rounds N] [--quiet]

See ``configs/`` for commented examples of the YAML schema.
"""

import argparse
import copy
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np
import yaml

from .game import Profile, exploitability
from .learning import Reference, RunError, StopRule, run
from .measure import DiscreteMeasure
from .mfg import ConfigError as MfgConfigError
from .mfg import MfgConfig, MfgGame
from .population import COST_TABLES, PopulationError, PopulationGame, brute_force_equilibrium, cost_table

DEFAULTS = {
    "K": 100,
    "seed": 0,
    "learner": {
        "loop": "fp",
        "init": "default",
        "step_power": 1.0,
        "phi_every": 1,
        "stop": {"max_rounds": 500, "phi_tol": 1e-3},
    },
    "reference": None,
    "output": {"dir": "out", "timing": False, "d1_cap": 1024},
}

POPULATION_KEYS = {"type", "n_actions", "cost"}
MFG_KEYS = {"type", "d", "T", "n_steps", "M", "lagrangian", "f", "g", "m0", "R"}
TOP_KEYS = {"game", "learner", "K", "seed", "reference", "output"}
LEARNER_KEYS = {"loop", "init", "step_power", "phi_every", "stop"}
STOP_KEYS = {"max_rounds", "phi_tol"}
OUTPUT_KEYS = {"dir", "timing", "d1_cap"}
REFERENCE_KEYS = {"brute-force": {"kind", "grid"}, "fp": {"kind", "rounds"}}


class ConfigValidationError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n  " + "\n  ".join(self.errors))


@dataclass
class ExperimentConfig:
    game: dict
    learner: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS["learner"]))
    K: int = 100
    seed: int = 0
    reference: dict = None
    output: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS["output"]))

    def to_dict(self):
        return {
            "game": copy.deepcopy(self.game),
            "learner": copy.deepcopy(self.learner),
            "K": self.K,
            "seed": self.seed,
            "reference": copy.deepcopy(self.reference),
            "output": copy.deepcopy(self.output),
        }

    def to_text(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for k, v in (given or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _unknown(label, d, allowed):
    return [f"unknown key {label}{k!r}" for k in d if k not in allowed]


def _is_int(x):
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def _is_num(x):
    return isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool)


def parse_config(text):
    """Parse and validate a YAML document; raises :class:`ConfigValidationError` listing every problem."""
    try:
        doc = yaml.safe_load(text) if isinstance(text, str) else text
    except yaml.YAMLError as exc:
        raise ConfigValidationError([f"not valid YAML: {exc}"]) from exc
    if not isinstance(doc, dict):
        raise ConfigValidationError(["config must be a mapping"])
    errs = _unknown("", doc, TOP_KEYS)
    if "game" not in doc:
        errs.append("missing required key 'game'")
    game = doc.get("game") or {}
    learner = _merge(DEFAULTS["learner"], doc.get("learner"))
    output = _merge(DEFAULTS["output"], doc.get("output"))
    K = doc.get("K", DEFAULTS["K"])
    seed = doc.get("seed", DEFAULTS["seed"])
    reference = doc.get("reference", None)

    if not (_is_int(K) and K >= 1):
        errs.append("K must be an integer >= 1")
    if not (_is_int(seed) and 0 <= seed < 2**64):
        errs.append("seed must be an integer in [0, 2^64)")

    # learner
    errs += _unknown("learner.", learner, LEARNER_KEYS)
    if learner["loop"] not in ("fp", "omd"):
        errs.append("learner.loop must be 'fp' or 'omd'")
    if learner["init"] not in ("default", "random"):
        errs.append("learner.init must be 'default' or 'random'")
    p = learner["step_power"]
    if not (_is_num(p) and 0.5 < p <= 1.0):
        errs.append("learner.step_power must be in (0.5, 1]")
    if not (_is_int(learner["phi_every"]) and learner["phi_every"] >= 0):
        errs.append("learner.phi_every must be an integer >= 0")
    stop = learner["stop"]
    if not isinstance(stop, dict):
        errs.append("learner.stop must be a mapping")
    else:
        errs += _unknown("learner.stop.", stop, STOP_KEYS)
        if not (_is_int(stop.get("max_rounds")) and stop["max_rounds"] >= 0):
            errs.append("learner.stop.max_rounds must be an integer >= 0")
        if not (_is_num(stop.get("phi_tol")) and stop["phi_tol"] >= 0):
            errs.append("learner.stop.phi_tol must be >= 0")

    # output
    errs += _unknown("output.", output, OUTPUT_KEYS)
    if not isinstance(output.get("dir"), str):
        errs.append("output.dir must be a string")
    if not isinstance(output.get("timing"), bool):
        errs.append("output.timing must be true or false")
    cap = output.get("d1_cap")
    if not (cap is None or (_is_int(cap) and cap >= 2)):
        errs.append("output.d1_cap must be an integer >= 2 or null")

    # game
    gtype = game.get("type") if isinstance(game, dict) else None
    if gtype == "population":
        game = _merge({"n_actions": 3, "cost": {"name": "congestion-linear"}}, game)
        errs += _unknown("game.", game, POPULATION_KEYS)
        n = game["n_actions"]
        if not (_is_int(n) and n >= 2):
            errs.append("game.n_actions must be an integer >= 2")
        cost = game["cost"]
        if not isinstance(cost, dict) or cost.get("name") not in COST_TABLES:
            errs.append(f"game.cost.name must be one of {list(COST_TABLES)}")
        elif _is_int(n) and n >= 2:
            try:
                cost_table(n_actions=n, **cost)
            except (PopulationError, TypeError, ValueError) as exc:
                errs.append(f"game.cost: {exc}")
    elif gtype == "mfg":
        errs += _unknown("game.", game, MFG_KEYS)
        errs += _mfg_errors(game, K if _is_int(K) else 1, seed if _is_int(seed) else 0)
    elif "game" in doc:
        errs.append("game.type must be 'population' or 'mfg'")

    # reference
    if reference is not None:
        if not isinstance(reference, dict) or reference.get("kind") not in REFERENCE_KEYS:
            errs.append("reference.kind must be 'brute-force' or 'fp'")
        else:
            errs += _unknown("reference.", reference, REFERENCE_KEYS[reference["kind"]])
            if reference["kind"] == "brute-force":
                if gtype != "population":
                    errs.append("reference.kind 'brute-force' needs a population game")
                g = reference.setdefault("grid", 60)
                if not (_is_int(g) and 1 <= g <= 200):
                    errs.append("reference.grid must be an integer in [1, 200]")
                if gtype == "population" and _is_int(game.get("n_actions")) and game["n_actions"] > 5:
                    errs.append("reference.kind 'brute-force' needs n_actions <= 5")
            else:
                r = reference.setdefault("rounds", None)
                if r is not None and not (_is_int(r) and r >= 1):
                    errs.append("reference.rounds must be an integer >= 1")
    if errs:
        raise ConfigValidationError(errs)
    return ExperimentConfig(game=game, learner=learner, K=K, seed=seed, reference=reference, output=output)


def _mfg_kwargs(game, K, seed):
    kw = {k: v for k, v in game.items() if k != "type"}
    kw["K"] = K
    kw["seed"] = seed
    return kw


def _mfg_errors(game, K, seed):
    kw = _mfg_kwargs({k: v for k, v in game.items() if k in MFG_KEYS}, K, seed)
    try:
        MfgConfig(**kw)
    except MfgConfigError as exc:
        return [f"game.{e}" for e in exc.errors]
    except TypeError as exc:
        return [f"game: {exc}"]
    return []


# -- running ---------------------------------------------------------------------


def build_game(cfg):
    g = cfg.game
    if g["type"] == "population":
        n = g["n_actions"]
        init = None
        if cfg.learner["init"] == "random":
            init = np.random.default_rng(cfg.seed).integers(0, n, size=cfg.K)
        return PopulationGame(n, cost_table(n_actions=n, **g["cost"]), n_players=cfg.K, init=init)
    game = MfgGame(MfgConfig(**_mfg_kwargs(g, cfg.K, cfg.seed)))
    return game


def _initial_profile(cfg, game):
    if cfg.game["type"] == "mfg" and cfg.learner["init"] == "random":
        rng = np.random.default_rng(cfg.seed)
        mc = game.cfg
        V = rng.normal(size=(game.n_players, mc.n_steps, mc.d))
        from .mfg import nodes_from_xv, project_xv

        X = project_xv(np.concatenate([game.x0s[:, None], V], axis=1), game.x0s, mc)
        return nodes_from_xv(X, mc.dt)
    return None


def build_reference(cfg, game):
    ref = cfg.reference
    if ref is None:
        return None
    if ref["kind"] == "brute-force":
        m, _ = brute_force_equilibrium(game, ref["grid"])
        eta = DiscreteMeasure(game.eye[m > 0], m[m > 0], game.metric)
        return Reference(eta, np.tile(m, (game.n_players, 1)), 0.0)
    rounds = ref.get("rounds") or 4 * max(cfg.learner["stop"]["max_rounds"], 1)
    tr = run("fp", game, StopRule(rounds, 0.0), d1_cap=cfg.output["d1_cap"], audit_until=0)
    st = tr.final_state
    best = game.best_responses(st.eta_bar, warm=st.profile)
    eta = DiscreteMeasure(best, game.weights, game.metric)
    return Reference(eta, best, exploitability(game, eta, psi=Profile(best)))


PLOT_SCRIPT = '''"""Plot the diagnostics of trace.csv on log axes (needs matplotlib)."""
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
path = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "trace.csv")
with open(path) as fh:
    rows = list(csv.DictReader(fh))

fig, ax = plt.subplots(figsize=(7, 4.5))
for key, label in [("phi", "phi_n"), ("psi", "|psi_n|"), ("d1_ref", "d1 to reference"), ("d1_step", "d1 step")]:
    pts = [(int(r["n"]), abs(float(r[key]))) for r in rows if r[key] not in ("", None)]
    pts = [(n, v) for n, v in pts if v > 0]
    if pts:
        ax.loglog(*zip(*pts), label=label)
ax.set_xlabel("round n")
ax.legend()
ax.grid(True, which="both", alpha=0.3)
out = os.path.join(os.path.dirname(os.path.abspath(path)), "trace.png")
fig.savefig(out, dpi=120, bbox_inches="tight")
print(out)
'''


def run_experiment(cfg, out_dir=None, quiet=False):
    """Run the configured experiment and write its artifacts; returns the process exit status.

    0: converged by the stopping rule; 1: ran to ``max_rounds`` without converging;
    2: a learning round failed (partial trace kept); 3: output could not be written.
    """
    out_dir = out_dir or cfg.output["dir"]
    log = (lambda *a: None) if quiet else (lambda *a: print(*a, file=sys.stderr))
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "config.yaml"), "w") as fh:
            fh.write(cfg.to_text())
        with open(os.path.join(out_dir, "plot_trace.py"), "w") as fh:
            fh.write(PLOT_SCRIPT)
    except OSError as exc:
        print(f"error: cannot write to {out_dir}: {exc}", file=sys.stderr)
        return 3
    game = build_game(cfg)
    learner = cfg.learner
    stop = StopRule(learner["stop"]["max_rounds"], learner["stop"]["phi_tol"])
    status = 0
    error = None
    try:
        ref = build_reference(cfg, game)
        trace = run(
            learner["loop"],
            game,
            stop,
            reference=ref,
            d1_cap=cfg.output["d1_cap"],
            phi_every=learner["phi_every"],
            timing=cfg.output["timing"],
            power=learner["step_power"],
            profile=_initial_profile(cfg, game) if learner["loop"] == "fp" else None,
        )
    except RunError as exc:
        trace, error, status = exc.trace, str(exc), 2
    summary = trace.summary()
    if trace.flags:
        summary["flags"] = trace.flags
    if error:
        summary["error"] = error
    try:
        trace.to_csv(os.path.join(out_dir, "trace.csv"))
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        print(f"error: cannot write results to {out_dir}: {exc}", file=sys.stderr)
        return 3
    if error:
        log(f"error: {error}")
    log(f"{learner['loop']}: {summary['rounds']} rounds, final phi {summary['final_phi']}, converged {summary['converged']}")
    if status == 0 and not trace.converged:
        status = 1
    return status


def main(argv=None):
    parser = argparse.ArgumentParser(prog="anonlearn", description="Learning dynamics in monotone anonymous games.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run an experiment from a YAML config")
    p.add_argument("config", help="path to the YAML config")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, help="random seed (overrides seed)")
    p.add_argument("--rounds", type=int, help="maximum number of rounds (overrides learner.stop.max_rounds)")
    p.add_argument("--quiet", action="store_true", help="no progress output")
    args = parser.parse_args(argv)
    try:
        with open(args.config) as fh:
            doc = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return 3
    if isinstance(doc, dict):
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.rounds is not None:
            doc.setdefault("learner", {}).setdefault("stop", {})["max_rounds"] = args.rounds
        if args.out is not None:
            doc.setdefault("output", {})["dir"] = args.out
    try:
        cfg = parse_config(doc)
    except ConfigValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return run_experiment(cfg, quiet=args.quiet)


if __name__ == "__main__":
    sys.exit(main())
