"""Synthetic exchangeable classifier scores, and the Monte Carlo coverage harness.

Generative model, per sample of domain d:

1. A ground-truth class distribution pi is drawn from the symmetric
   Dirichlet with the domain's concentration (small concentration =>
   peaked pi => easy samples).
2. The label is drawn from pi.
3. Each expert model m emits the row f * pi + (1 - f) * eps, where eps is
   an independent flat-Dirichlet noise row and f is model m's fidelity.
   The combination is already a probability row, so no renormalization
   can distort it.

One expert is emitted per domain. By default expert m applies its own
fidelity everywhere (fidelity 1 everywhere reproduces pi exactly on every
row). Setting ``off_domain_fidelity`` caps every expert's fidelity outside
its home domain, which is how complementary domain specialists are
modelled: expert m stays sharp on domain m and degrades to near-noise
elsewhere.

Within one draw, per-domain samples are i.i.d., so any seeded random
partition of them into calibration and test is exchangeable: exactly the
premise of the finite-sample coverage interval that coverage_trial checks.

All randomness flows from numpy's PCG64 generator seeded explicitly;
trial t of a Monte Carlo run re-seeds with (seed + t), so parallel or
reordered trial execution cannot change results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from .conformal import calibrate, coverage_bounds
from .core import INTERNAL_ROW_SUM_TOL, LabeledScores, ScoreMatrix
from .ensemble import average_scores
from .errors import InvalidConfig
from .splits import largest_remainder

_CONFIG_FIELDS = {
    "num_classes",
    "num_domains",
    "per_domain_concentration",
    "per_domain_fidelity",
    "samples_per_domain",
    "seed",
    "off_domain_fidelity",
}


@dataclass(frozen=True)
class SimulatorConfig:
    num_classes: int
    num_domains: int
    per_domain_concentration: tuple[float, ...]
    per_domain_fidelity: tuple[float, ...]
    samples_per_domain: tuple[int, ...]
    seed: int
    off_domain_fidelity: float | None = None

    def __post_init__(self) -> None:
        if int(self.num_classes) < 2:
            raise InvalidConfig(f"num_classes must be >= 2, got {self.num_classes}")
        if int(self.num_domains) < 1:
            raise InvalidConfig(f"num_domains must be >= 1, got {self.num_domains}")
        conc = tuple(float(c) for c in self.per_domain_concentration)
        fid = tuple(float(f) for f in self.per_domain_fidelity)
        counts = tuple(int(c) for c in self.samples_per_domain)
        for name, values in (
            ("per_domain_concentration", conc),
            ("per_domain_fidelity", fid),
            ("samples_per_domain", counts),
        ):
            if len(values) != int(self.num_domains):
                raise InvalidConfig(
                    f"{name} must have {self.num_domains} entries, got {len(values)}"
                )
        if any(c <= 0.0 for c in conc):
            raise InvalidConfig(f"concentrations must be > 0, got {conc}")
        if any(f < 0.0 or f > 1.0 for f in fid):
            raise InvalidConfig(f"fidelities must lie in [0, 1], got {fid}")
        if any(c < 0 for c in counts):
            raise InvalidConfig(f"sample counts must be >= 0, got {counts}")
        if self.off_domain_fidelity is not None:
            off = float(self.off_domain_fidelity)
            if off < 0.0 or off > 1.0:
                raise InvalidConfig(f"off_domain_fidelity must lie in [0, 1], got {off}")
            object.__setattr__(self, "off_domain_fidelity", off)
        if int(self.seed) < 0:
            raise InvalidConfig(f"seed must be a non-negative integer, got {self.seed}")
        object.__setattr__(self, "num_classes", int(self.num_classes))
        object.__setattr__(self, "num_domains", int(self.num_domains))
        object.__setattr__(self, "per_domain_concentration", conc)
        object.__setattr__(self, "per_domain_fidelity", fid)
        object.__setattr__(self, "samples_per_domain", counts)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def num_models(self) -> int:
        return self.num_domains

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "num_domains": self.num_domains,
            "per_domain_concentration": list(self.per_domain_concentration),
            "per_domain_fidelity": list(self.per_domain_fidelity),
            "samples_per_domain": list(self.samples_per_domain),
            "seed": self.seed,
            "off_domain_fidelity": self.off_domain_fidelity,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SimulatorConfig":
        if not isinstance(raw, dict):
            raise InvalidConfig("simulator config must be a JSON object")
        unknown = set(raw) - _CONFIG_FIELDS
        if unknown:
            raise InvalidConfig(f"unknown simulator config fields: {sorted(unknown)}")
        missing = _CONFIG_FIELDS - {"off_domain_fidelity"} - set(raw)
        if missing:
            raise InvalidConfig(f"missing simulator config fields: {sorted(missing)}")
        return cls(
            num_classes=raw["num_classes"],
            num_domains=raw["num_domains"],
            per_domain_concentration=tuple(raw["per_domain_concentration"]),
            per_domain_fidelity=tuple(raw["per_domain_fidelity"]),
            samples_per_domain=tuple(raw["samples_per_domain"]),
            seed=raw["seed"],
            off_domain_fidelity=raw.get("off_domain_fidelity"),
        )


def default_config() -> SimulatorConfig:
    """Three domains of seven-class data with one moderately noisy expert each."""
    return SimulatorConfig(
        num_classes=7,
        num_domains=3,
        per_domain_concentration=(0.4, 0.7, 1.0),
        per_domain_fidelity=(0.9, 0.8, 0.65),
        samples_per_domain=(400, 400, 400),
        seed=20250801,
    )


def load_config(path) -> SimulatorConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"config is not valid JSON: {exc}") from None
    return SimulatorConfig.from_dict(raw)


def save_config(config: SimulatorConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _model_fidelity(config: SimulatorConfig, model: int, domain: int) -> float:
    if config.off_domain_fidelity is None or model == domain:
        return config.per_domain_fidelity[model]
    return min(config.off_domain_fidelity, config.per_domain_fidelity[model])


def _categorical_rows(pis: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One label draw per row of pis via inverse-CDF on a single uniform."""
    u = rng.random(pis.shape[0])
    y = (pis.cumsum(axis=1) < u[:, None]).sum(axis=1)
    return np.minimum(y, pis.shape[1] - 1).astype(np.int64)


def simulate(
    config: SimulatorConfig, rng: np.random.Generator | None = None
) -> list[LabeledScores]:
    """Draw one population and every expert's score rows for it.

    Returns one LabeledScores per expert model; all share ids (namespaced
    as 'd<domain>/<index>') and labels, in domain-major order. Draw order
    is fixed (per domain: pi block, labels, then per-model noise blocks)
    so outputs are reproducible bit-for-bit given (config, seed).
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    k = config.num_classes
    ids: list[str] = []
    labels_parts: list[np.ndarray] = []
    rows_per_model: list[list[np.ndarray]] = [[] for _ in range(config.num_models)]

    for d in range(config.num_domains):
        n_d = config.samples_per_domain[d]
        pis = rng.dirichlet(np.full(k, config.per_domain_concentration[d]), size=n_d)
        labels_parts.append(_categorical_rows(pis, rng))
        ids.extend(f"d{d}/{i:06d}" for i in range(n_d))
        for m in range(config.num_models):
            f = _model_fidelity(config, m, d)
            noise = rng.dirichlet(np.ones(k), size=n_d)
            rows_per_model[m].append(f * pis + (1.0 - f) * noise)

    labels = (
        np.concatenate(labels_parts) if labels_parts else np.zeros(0, dtype=np.int64)
    )
    out = []
    for m in range(config.num_models):
        values = (
            np.concatenate(rows_per_model[m], axis=0)
            if rows_per_model[m]
            else np.zeros((0, k))
        )
        out.append(
            LabeledScores(
                ids=tuple(ids),
                labels=labels,
                scores=ScoreMatrix.validate(values, INTERNAL_ROW_SUM_TOL),
            )
        )
    return out


def _fuse(models: Sequence[LabeledScores]) -> LabeledScores:
    return models[0] if len(models) == 1 else average_scores(models)


class CoverageTrialResult(NamedTuple):
    mean_coverage: float
    per_trial: list[float]
    lower_bound: float
    upper_bound: float


def coverage_trial(
    config: SimulatorConfig,
    alpha: float,
    n_calib: int,
    n_test: int,
    trials: int,
) -> CoverageTrialResult:
    """Monte Carlo check of the finite-sample coverage interval.

    Each trial re-seeds the generator with (config.seed + trial), draws a
    fresh population of n_calib + n_test samples (spread over domains in
    the config's proportions), randomly partitions it into calibration and
    test halves (which makes the two exchangeable by construction),
    calibrates the fused expert ensemble at the given alpha and records
    the test coverage.
    """
    if n_calib < 1 or n_test < 1:
        raise InvalidConfig(f"n_calib and n_test must be >= 1, got {n_calib}, {n_test}")
    if trials < 1:
        raise InvalidConfig(f"trials must be >= 1, got {trials}")
    total = int(n_calib) + int(n_test)
    proportions = np.asarray(config.samples_per_domain, dtype=np.float64)
    if proportions.sum() <= 0:
        raise InvalidConfig("samples_per_domain must contain at least one sample")
    counts = largest_remainder(total, tuple(proportions / proportions.sum()))

    per_trial: list[float] = []
    for t in range(int(trials)):
        cfg_t = replace(config, seed=config.seed + t, samples_per_domain=counts)
        rng = np.random.default_rng(cfg_t.seed)
        fused = _fuse(simulate(cfg_t, rng=rng))
        perm = rng.permutation(total)
        calib = fused.subset(perm[:n_calib])
        test = fused.subset(perm[n_calib:])
        artifact = calibrate(calib, alpha)
        hits = _kernels.count_covered(test.scores.values, test.labels, artifact.q_hat)
        per_trial.append(hits / n_test)

    lower, upper = coverage_bounds(alpha, n_calib)
    return CoverageTrialResult(
        mean_coverage=float(np.mean(per_trial)),
        per_trial=per_trial,
        lower_bound=lower,
        upper_bound=upper,
    )
