"""Scenario configuration: JSON loading, defaults, validation.

A scenario file looks like::

    {
      "name": "example2_fast45",
      "q": 2147483647, "z": 1, "m": 2, "k": 1, "r": 4, "s": 3, "l": 2,
      "workers": [{"count": 3, "model": "fixed", "latency": 1.0},
                  {"count": 2, "model": "fixed", "latency": 1.5}],
      "delta": 0.5,
      "initial_clusters": "groups",
      "seed": 7
    }

Worker ids are assigned 1..n in the order the groups are listed.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from rpm3.errors import ConfigurationError
from rpm3.fountain import CoefVector, SolitonParams
from rpm3.gf import DEFAULT_Q, is_prime
from rpm3.simnet import WorkerModel

_KNOWN_KEYS = {
    "name", "q", "n", "z", "m", "k", "r", "s", "l", "workers", "delta", "soliton", "seed",
    "systematic_first_round", "systematic_rounds", "initial_clusters", "recluster", "max_d",
    "coefficients", "improved", "matrices", "max_events", "checks", "description",
}


@dataclass
class Scenario:
    name: str
    q: int
    n: int
    z: int
    m: int
    k: int
    r: int
    s: int
    l: int
    workers: list[WorkerModel]
    delta: float = 1.0
    soliton: SolitonParams = field(default_factory=SolitonParams)
    seed: int = 0
    systematic_rounds: int = 1
    initial_clusters: list[list[int]] | None = None
    recluster: bool = True
    max_d: int | None = None
    coefficients: dict[tuple[int, int], list[tuple[CoefVector, CoefVector]]] = field(default_factory=dict)
    m_I: int | None = None
    k_I: int | None = None
    matrix_a: Path | None = None
    matrix_b: Path | None = None
    max_events: int = 200_000
    checks: bool = True

    def d_bound(self) -> int:
        """Largest d any cluster can get (one cluster of all n workers)."""
        d = (self.n - 2 * self.z + 1) // 2
        return min(d, self.max_d) if self.max_d else d

    def validate(self) -> "Scenario":
        if not is_prime(self.q):
            raise ConfigurationError(f"q={self.q} is not prime")
        if self.z < 1:
            raise ConfigurationError("z must be at least 1")
        if self.n < 2 * self.z + 1:
            raise ConfigurationError(f"n={self.n} workers cannot support z={self.z}: need n >= 2z+1")
        if len(self.workers) != self.n:
            raise ConfigurationError(f"{len(self.workers)} worker models for n={self.n}")
        if self.q < self.n + self.d_bound() + self.z + 1:
            raise ConfigurationError(f"field F_{self.q} too small for n={self.n}, z={self.z}")
        if not 1 <= self.m <= self.r or not 1 <= self.k <= self.l or self.s < 1:
            raise ConfigurationError(f"bad split m={self.m}, k={self.k} for r={self.r}, s={self.s}, l={self.l}")
        if not self.delta > 0:
            raise ConfigurationError("clustering window delta must be positive")
        if self.max_d is not None and self.max_d < 1:
            raise ConfigurationError("max_d must be at least 1")
        if self.initial_clusters is not None:
            ids = sorted(w for c in self.initial_clusters for w in c)
            if ids != list(range(1, self.n + 1)):
                raise ConfigurationError("initial_clusters must partition worker ids 1..n")
        for (t, u), pairs in self.coefficients.items():
            for a, b in pairs:
                if len(a) != self.m or len(b) != self.k:
                    raise ConfigurationError(f"coefficients for round {t}, cluster {u} have wrong length")
        return self

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "q": self.q, "n": self.n, "z": self.z, "m": self.m, "k": self.k,
                "r": self.r, "s": self.s, "l": self.l}


def _workers_from_config(spec: list[dict]) -> tuple[list[WorkerModel], list[list[int]]]:
    models, groups = [], []
    wid = 1
    for entry in spec:
        entry = dict(entry)
        count = int(entry.pop("count", 1))
        kind = entry.pop("model", "fixed")
        schedule = tuple((float(a), float(b)) for a, b in entry.pop("schedule", ()))
        kwargs = {key: float(entry.pop(key)) for key in ("latency", "shift", "rate") if key in entry}
        if entry:
            raise ConfigurationError(f"unknown worker fields {sorted(entry)}")
        group = []
        for _ in range(count):
            models.append(WorkerModel(wid, kind, schedule=schedule, **kwargs))
            group.append(wid)
            wid += 1
        groups.append(group)
    return models, groups


def scenario_from_dict(cfg: dict, base_dir: Path | None = None) -> Scenario:
    cfg = copy.deepcopy(cfg)
    unknown = set(cfg) - _KNOWN_KEYS
    if unknown:
        raise ConfigurationError(f"unknown scenario keys {sorted(unknown)}")
    try:
        z = int(cfg["z"])
        m, k = int(cfg["m"]), int(cfg["k"])
        r, s, l = int(cfg.get("r", m)), int(cfg.get("s", 1)), int(cfg.get("l", k))
    except KeyError as exc:
        raise ConfigurationError(f"scenario is missing {exc.args[0]!r}") from None
    workers_cfg = cfg.get("workers")
    if workers_cfg is None:
        if "n" not in cfg:
            raise ConfigurationError("scenario needs 'n' or 'workers'")
        workers_cfg = [{"count": int(cfg["n"]), "model": "shifted_exp", "shift": 1.0, "rate": 1.0}]
    models, groups = _workers_from_config(workers_cfg)
    n = int(cfg.get("n", len(models)))

    init = cfg.get("initial_clusters")
    if init == "groups":
        init = groups
    elif init is not None:
        init = [[int(w) for w in c] for c in init]

    if "systematic_rounds" in cfg:
        sys_rounds = int(cfg["systematic_rounds"])
    else:
        sys_rounds = 1 if cfg.get("systematic_first_round", True) else 0

    coefs: dict[tuple[int, int], list[tuple[CoefVector, CoefVector]]] = {}
    for t, per_u in cfg.get("coefficients", {}).items():
        for u, pairs in per_u.items():
            coefs[int(t), int(u)] = [(CoefVector(tuple(a)), CoefVector(tuple(b))) for a, b in pairs]

    improved = cfg.get("improved") or {}
    sol = cfg.get("soliton") or {}
    mats = cfg.get("matrices") or {}
    base = base_dir or Path(".")

    def _path(key):
        return (base / mats[key]) if key in mats else None

    sc = Scenario(
        name=str(cfg.get("name", "scenario")),
        q=int(cfg.get("q", DEFAULT_Q)),
        n=n, z=z, m=m, k=k, r=r, s=s, l=l,
        workers=models,
        delta=float(cfg.get("delta", 1.0)),
        soliton=SolitonParams(float(sol.get("c", 0.03)), float(sol.get("delta", 0.5))),
        seed=int(cfg.get("seed", 0)),
        systematic_rounds=sys_rounds,
        initial_clusters=init,
        recluster=bool(cfg.get("recluster", True)),
        max_d=cfg.get("max_d"),
        coefficients=coefs,
        m_I=improved.get("m_I"),
        k_I=improved.get("k_I"),
        matrix_a=_path("A"),
        matrix_b=_path("B"),
        max_events=int(cfg.get("max_events", 200_000)),
        checks=bool(cfg.get("checks", True)),
    )
    return sc.validate()


def bundled_names() -> list[str]:
    root = resources.files("rpm3") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_config_path(name_or_path: str) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    candidate = Path(str(resources.files("rpm3") / "scenarios" / f"{stem}.json"))
    if candidate.exists():
        return candidate
    raise ConfigurationError(f"no config file {name_or_path!r} (bundled: {', '.join(bundled_names())})")


def read_config(name_or_path: str) -> tuple[dict, Path]:
    path = resolve_config_path(name_or_path)
    try:
        return json.loads(path.read_text()), path.parent
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None


def load_scenario(name_or_path: str) -> Scenario:
    cfg, base = read_config(name_or_path)
    return scenario_from_dict(cfg, base)
