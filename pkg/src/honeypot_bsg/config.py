"""JSON scenario documents: parsing, validation and field-level diagnostics."""

from __future__ import annotations

import hashlib
import json
from dataclasses import fields
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .game import SKILLS
from .network import GenerationSpec, Network, NetworkError, case_study_network, generate_network, load_network
from .sim import ATTACKER_MODES, POLICIES, TYPE_SPACES, AttackerSpec, ScenarioConfig


class ConfigError(ValueError):
    """Invalid scenario or experiment document. ``field`` is a dotted path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
        self.message = message


SCENARIO_KEYS = {
    "name",
    "network",
    "alpha",
    "honeypot_cost",
    "budget",
    "k_paths",
    "max_rounds",
    "policy",
    "seed",
    "attackers",
    "type_space",
    "prior",
    "attacker_mode",
    "initial_defense",
    "off_path_likelihood",
    "max_candidates",
    "max_strategies",
    "threads",
}


def read_json(path) -> Any:
    """Load a JSON file, turning decode errors into line/column diagnostics."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError("", f"{path}: no such file") from None
    except OSError as exc:
        raise ConfigError("", f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def bundled(kind: str, name: str) -> Path:
    """Path of a bundled scenario or experiment document."""
    p = resources.files("honeypot_bsg.data").joinpath(kind, f"{name}.json")
    return Path(str(p))


def bundled_names(kind: str) -> list[str]:
    d = resources.files("honeypot_bsg.data").joinpath(kind)
    return sorted(p.name[:-5] for p in d.iterdir() if p.name.endswith(".json"))


def _number(doc, key, where, default, *, integer=False):
    v = doc.get(key, default)
    ok = isinstance(v, int) if integer else isinstance(v, (int, float))
    if isinstance(v, bool) or not ok:
        raise ConfigError(f"{where}{key}", f"expected {'an integer' if integer else 'a number'}, got {v!r}")
    return v


def _resolve_network(doc, seed: int, base: Path | None) -> Network:
    if not isinstance(doc, Mapping) or len(doc) != 1:
        raise ConfigError("network", "expected exactly one of 'bundled', 'file' or 'generate'")
    (kind, value), = doc.items()
    try:
        if kind == "bundled":
            if value != "case-study":
                raise ConfigError("network.bundled", f"unknown bundled network {value!r} (available: 'case-study')")
            return case_study_network()
        if kind == "file":
            p = Path(value)
            if base is not None and not p.is_absolute():
                p = base / p
            if not p.exists():
                raise ConfigError("network.file", f"{p}: no such file")
            return load_network(p)
        if kind == "generate":
            if not isinstance(value, Mapping) or "n" not in value:
                raise ConfigError("network.generate", "needs at least 'n'")
            allowed = {f.name for f in fields(GenerationSpec)}
            extra = set(value) - allowed - {"n", "seed"}
            if extra:
                raise ConfigError("network.generate", f"unknown keys {sorted(extra)}")
            kw = {k: v for k, v in value.items() if k in allowed}
            if "target_values" in kw:
                kw["target_values"] = tuple(kw["target_values"])
            n = _number(value, "n", "network.generate.", None, integer=True)
            gseed = _number(value, "seed", "network.generate.", seed, integer=True)
            return generate_network(n, gseed, GenerationSpec(**kw))
    except NetworkError as exc:
        raise ConfigError(f"network.{kind}", str(exc)) from None
    except (TypeError, RuntimeError) as exc:
        raise ConfigError(f"network.{kind}", str(exc)) from None
    raise ConfigError("network", f"unknown network source {kind!r}")


def parse_scenario(doc: Any, base: Path | None = None, overrides: Mapping | None = None) -> ScenarioConfig:
    """Validate a scenario document and build a :class:`ScenarioConfig`.

    ``overrides`` replaces top-level keys before validation (the CLI uses it
    for ``--seed`` and ``--threads``).
    """
    if not isinstance(doc, Mapping):
        raise ConfigError("", "scenario document must be a JSON object")
    doc = dict(doc)
    if overrides:
        doc.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(doc) - SCENARIO_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    if "network" not in doc:
        raise ConfigError("network", "required")
    seed = _number(doc, "seed", "", 0, integer=True)
    if seed < 0:
        raise ConfigError("seed", "must be >= 0")
    net = _resolve_network(doc["network"], seed, base)

    if "alpha" in doc:
        alpha = _number(doc, "alpha", "", None)
        if not (0.0 < alpha < 1.0):
            raise ConfigError("alpha", f"must lie in the open interval (0, 1), got {alpha}")
        net = net.with_alpha(float(alpha))
    cost = _number(doc, "honeypot_cost", "", 3.0)
    if cost < 0:
        raise ConfigError("honeypot_cost", f"must be >= 0, got {cost}")
    budget = _number(doc, "budget", "", 2, integer=True)
    if budget < 0:
        raise ConfigError("budget", f"must be >= 0, got {budget}")
    k = _number(doc, "k_paths", "", 10, integer=True)
    if k < 1:
        raise ConfigError("k_paths", f"must be >= 1, got {k}")
    rounds = _number(doc, "max_rounds", "", 5, integer=True)
    if rounds < 1:
        raise ConfigError("max_rounds", f"must be >= 1, got {rounds}")
    threads = _number(doc, "threads", "", 1, integer=True)
    if threads < 1:
        raise ConfigError("threads", f"must be >= 1, got {threads}")
    max_cand = _number(doc, "max_candidates", "", 16, integer=True)
    max_strat = _number(doc, "max_strategies", "", 20_000, integer=True)
    if max_cand < 0 or max_strat < 1:
        raise ConfigError("max_candidates", "candidate and strategy caps must be positive")
    lam = _number(doc, "off_path_likelihood", "", 0.5)
    if not (0.0 <= lam <= 1.0):
        raise ConfigError("off_path_likelihood", f"must lie in [0, 1], got {lam}")

    choices = {
        "policy": (POLICIES, "stackelberg"),
        "type_space": (TYPE_SPACES, "skill"),
        "attacker_mode": (ATTACKER_MODES, "persistent"),
        "initial_defense": (("none", "policy"), "none"),
    }
    picked = {}
    for key, (allowed, default) in choices.items():
        v = doc.get(key, default)
        if v not in allowed:
            raise ConfigError(key, f"must be one of {list(allowed)}, got {v!r}")
        picked[key] = v

    roster = doc.get("attackers")
    if not isinstance(roster, list) or not roster:
        raise ConfigError("attackers", "must be a non-empty list")
    attackers = []
    for i, a in enumerate(roster):
        where = f"attackers[{i}]"
        if not isinstance(a, Mapping) or set(a) - {"skill", "target"}:
            raise ConfigError(where, "expected an object with 'skill' and 'target'")
        if a.get("skill") not in SKILLS:
            raise ConfigError(f"{where}.skill", f"must be one of {list(SKILLS)}, got {a.get('skill')!r}")
        try:
            target = net.resolve_node(a.get("target"))
        except (NetworkError, KeyError, TypeError, ValueError):
            raise ConfigError(f"{where}.target", f"unknown node {a.get('target')!r}") from None
        if target not in net.targets:
            raise ConfigError(f"{where}.target", f"node {a.get('target')!r} is not a target")
        attackers.append(AttackerSpec(a["skill"], target))

    prior = doc.get("prior")
    if prior is not None:
        n_types = {"known": 1, "skill": len(SKILLS), "skill-target": len(SKILLS) * len({a.target for a in attackers})}
        want = n_types[picked["type_space"]]
        if not isinstance(prior, list) or len(prior) != len(attackers):
            raise ConfigError("prior", "needs one probability vector per attacker")
        for i, vec in enumerate(prior):
            if not isinstance(vec, list) or len(vec) != want or not all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in vec):
                raise ConfigError(f"prior[{i}]", f"expected {want} numbers")
            if any(p < 0 for p in vec) or abs(sum(vec) - 1.0) > 1e-9:
                raise ConfigError(f"prior[{i}]", "must be non-negative and sum to 1")
        prior = tuple(tuple(float(p) for p in vec) for vec in prior)

    return ScenarioConfig(
        network=net,
        attackers=tuple(attackers),
        budget=budget,
        honeypot_cost=float(cost),
        k_paths=k,
        max_rounds=rounds,
        policy=picked["policy"],
        seed=seed,
        type_space=picked["type_space"],
        prior=prior,
        attacker_mode=picked["attacker_mode"],
        initial_defense=picked["initial_defense"],
        off_path_likelihood=float(lam),
        max_candidates=max_cand,
        max_strategies=max_strat,
        threads=threads,
    )


def load_scenario(path, overrides: Mapping | None = None) -> ScenarioConfig:
    path = Path(path)
    return parse_scenario(read_json(path), base=path.parent, overrides=overrides)


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    """Resolved scenario with the network inlined; stable for hashing."""
    net = cfg.network
    return {
        "network": net.to_dict(),
        "attackers": [{"skill": a.skill, "target": a.target} for a in cfg.attackers],
        "honeypot_cost": cfg.honeypot_cost,
        "budget": cfg.budget,
        "k_paths": cfg.k_paths,
        "max_rounds": cfg.max_rounds,
        "policy": cfg.policy,
        "seed": cfg.seed,
        "type_space": cfg.type_space,
        "prior": None if cfg.prior is None else [list(v) for v in cfg.prior],
        "attacker_mode": cfg.attacker_mode,
        "initial_defense": cfg.initial_defense,
        "off_path_likelihood": cfg.off_path_likelihood,
        "max_candidates": cfg.max_candidates,
        "max_strategies": cfg.max_strategies,
    }


def config_hash(doc: Any) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
