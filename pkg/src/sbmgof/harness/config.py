"""Model and experiment configuration documents.

Both are plain JSON objects. Unknown keys are rejected so that typos do not
silently fall back to defaults.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..errors import ParameterError
from ..netgen import (
    AdjacencyGraph,
    BlockMatrix,
    DcbmParams,
    Membership,
    MmbmParams,
    balanced_membership,
    generate_dcbm,
    generate_mmbm,
    generate_sbm,
    planted_blocks,
    random_membership,
    sample_dirichlet_rows,
)
from ..rng import GRAPH, MEMBERSHIP, PARAMS, SeededRng

MODELS = ("sbm", "dcbm", "mmbm")
MEMBERSHIP_SCHEMES = ("iid", "balanced")
EXPERIMENT_KINDS = ("null-dist", "error-table", "select-k", "single-test", "estimate-k")
ERROR_TABLE_MODELS = ("null", "finer", "dcbm", "mmbm")
TEST_MODES = ("plain", "bootstrap")
DESIGNS = ("r-sweep", "random-B")


def _from_dict(cls, doc: dict):
    if not isinstance(doc, dict):
        raise ParameterError(f"{cls.__name__} config must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ParameterError(f"unknown {cls.__name__} fields: {', '.join(unknown)}")
    return cls(**doc)


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: invalid JSON ({exc})") from None


@dataclass
class ModelConfig:
    """A random-graph model.

    ``B`` gives the block matrix explicitly; otherwise ``r`` selects
    ``B[k, l] = r (1 + 2 * 1(k == l))`` and ``within``/``between`` a planted
    partition. ``psi_dist`` ("uniform" or "ones") drives degree correction and
    ``alpha`` is the Dirichlet parameter of mixed membership rows.
    """

    model: str = "sbm"
    n: int = 1000
    K: int = 2
    B: list | None = None
    r: float | None = None
    within: float | None = None
    between: float | None = None
    membership: str = "iid"
    psi_dist: str = "uniform"
    alpha: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ParameterError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.membership not in MEMBERSHIP_SCHEMES:
            raise ParameterError(f"membership must be one of {MEMBERSHIP_SCHEMES}")
        if self.psi_dist not in ("uniform", "ones"):
            raise ParameterError(f"psi_dist must be 'uniform' or 'ones', got {self.psi_dist!r}")
        if int(self.n) < 1 or int(self.K) < 1 or self.K > self.n:
            raise ParameterError(f"need 1 <= K <= n, got n={self.n}, K={self.K}")
        given = [self.B is not None, self.r is not None, self.within is not None or self.between is not None]
        if sum(given) > 1:
            raise ParameterError("give only one of B, r, or within/between")
        self.blocks()

    @classmethod
    def from_dict(cls, doc: dict) -> ModelConfig:
        return _from_dict(cls, doc)

    def blocks(self) -> BlockMatrix:
        K = self.K
        if self.B is not None:
            b = BlockMatrix(np.asarray(self.B, dtype=float))
            if b.K != K:
                raise ParameterError(f"B is {b.K}x{b.K} but K={K}")
            return b
        if self.r is not None:
            return BlockMatrix(self.r * (1 + 2 * np.eye(K)))
        if self.within is not None or self.between is not None:
            if self.within is None or self.between is None:
                raise ParameterError("within and between must be given together")
            return planted_blocks(K, self.within, self.between)
        return level_power_blocks(K)

    def draw_membership(self, rng: SeededRng) -> Membership:
        if self.membership == "balanced":
            return balanced_membership(self.n, self.K)
        return random_membership(self.n, self.K, rng)

    def generate(self, rng: SeededRng) -> tuple[AdjacencyGraph, dict]:
        """Draw a graph; returns it with the ground truth used."""
        b = self.blocks()
        if self.model == "mmbm":
            phi = sample_dirichlet_rows(self.n, self.K, self.alpha, rng.child(PARAMS))
            graph = generate_mmbm(MmbmParams(b, phi), rng.child(GRAPH))
            return graph, {"blocks": b, "mixing": phi}
        g = self.draw_membership(rng.child(MEMBERSHIP))
        if self.model == "sbm":
            return generate_sbm(g, b, rng.child(GRAPH)), {"blocks": b, "membership": g}
        if self.psi_dist == "ones":
            psi = np.ones(self.n)
        else:
            psi = rng.child(PARAMS).generator.uniform(0.0, 1.0, size=self.n)
        graph = generate_dcbm(DcbmParams(g, b, psi), rng.child(GRAPH))
        return graph, {"blocks": b, "membership": g, "activeness": psi}


def level_power_blocks(K: int) -> BlockMatrix:
    """``B[k, l] = 0.2 + 0.4 * 1(k == l)``."""
    return planted_blocks(K, 0.6, 0.2)


# Replicate counts and sizes of the two presets, per experiment kind.
PRESETS = {
    "paper": {
        "null-dist": {"n": 200, "reps": 1000},
        "error-table": {"n": 1000, "reps": 200},
        "select-k": {"n": 1000, "reps": 200},
        "single-test": {"n": 1000, "reps": 1},
        "estimate-k": {"n": 1000, "reps": 1},
    },
    "smoke": {
        "null-dist": {"n": 200, "reps": 20},
        "error-table": {"n": 500, "reps": 50},
        "select-k": {"n": 500, "reps": 20},
        "single-test": {"n": 200, "reps": 1},
        "estimate-k": {"n": 200, "reps": 1},
    },
}


@dataclass
class ExperimentSpec:
    """Parameters of one harness experiment.

    Fields unused by ``kind`` are ignored. Per-kind meaning:

    * ``null-dist``: ``model`` (K, B, membership) under the null with
      ``K0 = [K]``; bootstrap correction when "bootstrap" is in ``modes``.
    * ``error-table``: every ``K0`` crossed with ``models`` (null, finer,
      dcbm, mmbm), block matrix ``0.2 + 0.4 * 1(k == l)``, iid memberships.
    * ``select-k``: ``design`` "r-sweep" (``r_values`` x ``K``, balanced
      communities) or "random-B" (``n_values`` x ``K``, iid memberships,
      block entries Unif(0, 0.5) redrawn until the smallest singular value is
      at least ``min_singular``; ``model.B`` fixes the matrix instead when
      ``resample_blocks`` is false).
    * ``single-test`` / ``estimate-k``: one graph from ``model``.
    """

    kind: str
    n: int | None = None
    reps: int | None = None
    seed: int = 0
    preset: str = "paper"
    model: dict = field(default_factory=dict)
    K: list = field(default_factory=lambda: [2])
    K0: list = field(default_factory=lambda: [2, 3, 4])
    models: list = field(default_factory=lambda: list(ERROR_TABLE_MODELS))
    modes: list = field(default_factory=lambda: list(TEST_MODES))
    M: int = 50
    alpha: float | None = None
    k_max: int | None = None
    design: str = "r-sweep"
    r_values: list = field(default_factory=lambda: [0.01, 0.02, 0.05, 0.1, 0.2])
    n_values: list = field(default_factory=lambda: [500, 1000])
    resample_blocks: bool = True
    min_singular: float = 0.1
    max_block_draws: int = 1000
    use_true_membership: bool = False
    workers: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ParameterError(f"kind must be one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        if self.preset not in PRESETS:
            raise ParameterError(f"preset must be one of {tuple(PRESETS)}, got {self.preset!r}")
        defaults = PRESETS[self.preset][self.kind]
        if self.n is None:
            self.n = defaults["n"]
        if self.reps is None:
            self.reps = defaults["reps"]
        if self.alpha is None:
            self.alpha = 1e-4 if self.kind in ("select-k", "estimate-k") else 0.05
        self.n, self.reps, self.M, self.workers = int(self.n), int(self.reps), int(self.M), int(self.workers)
        if self.reps < 1:
            raise ParameterError(f"reps must be at least 1, got {self.reps}")
        if self.n < 2:
            raise ParameterError(f"n must be at least 2, got {self.n}")
        if not 0 < self.alpha < 1:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if "bootstrap" in self.modes and self.M < 2:
            raise ParameterError(f"bootstrap needs M >= 2, got {self.M}")
        if self.workers < 1:
            raise ParameterError("workers must be positive")
        bad = [m for m in self.modes if m not in TEST_MODES]
        if bad or not self.modes:
            raise ParameterError(f"modes must be a non-empty subset of {TEST_MODES}, got {self.modes}")
        bad = [m for m in self.models if m not in ERROR_TABLE_MODELS]
        if bad:
            raise ParameterError(f"models must be drawn from {ERROR_TABLE_MODELS}, got {bad}")
        if self.design not in DESIGNS:
            raise ParameterError(f"design must be one of {DESIGNS}, got {self.design!r}")
        if any(int(k) < 1 for k in list(self.K) + list(self.K0)):
            raise ParameterError("community counts must be positive")
        if max(list(self.K) + list(self.K0)) > self.n:
            raise ParameterError("community counts cannot exceed n")
        if self.kind == "select-k" and self.design == "random-B" and not self.resample_blocks:
            b = np.asarray(self.model.get("B"), dtype=float) if self.model.get("B") is not None else None
            if b is None or any(b.shape != (k, k) for k in self.K):
                raise ParameterError("random-B design without resampling needs model.B matching every K")
        self.model_config()

    @classmethod
    def from_dict(cls, doc: dict) -> ExperimentSpec:
        return _from_dict(cls, doc)

    def to_dict(self) -> dict:
        return asdict(self)

    def model_config(self, **overrides) -> ModelConfig:
        doc = {"n": self.n, "K": int(self.K[0]), "seed": self.seed}
        doc.update(self.model)
        doc.update(overrides)
        return ModelConfig.from_dict(doc)
