"""Aggregate choice vectors and behavioural distances.

For each (model, context) the aggregate vector holds, per decision, the share
of valid trials in which the safe option A was chosen. From these:

* manipulability: distance between the risk-avoiding and risk-loving aggregates
* human distance: distance between the mean aggregate over the human-proxy
  contexts (no context, forget-AI, male, female) and a human benchmark vector
* gender distance: distance between the female and male aggregates

Signed per-decision differences are reported alongside each scalar because a
distance cannot show direction (e.g. a model that becomes *more* risk seeking
when told to avoid risk).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .contexts import FEMALE, HUMAN_PROXY_CONTEXTS, MALE, RISK_AVOIDING, RISK_LOVING
from .lottery import N_DECISIONS
from .store import TrialRecord

Vector = tuple[float, ...]
Distance = Callable[[Sequence[float], Sequence[float]], float]

LOW_CONFIDENCE_SHARE = 30 / 35


class NoDataError(ValueError):
    """A cell has no valid trials."""


class MissingContextError(ValueError):
    """A metric needs a context aggregate that is not available."""


@dataclass(frozen=True)
class AggregateVector:
    model: str
    context_id: str
    values: Vector
    n_valid: int
    n_unwanted: int

    @property
    def n_trials(self) -> int:
        return self.n_valid + self.n_unwanted

    @property
    def low_confidence(self) -> bool:
        return self.n_valid < LOW_CONFIDENCE_SHARE * self.n_trials


@dataclass(frozen=True)
class HumanBenchmark:
    values: Vector
    source: str

    def __post_init__(self) -> None:
        if len(self.values) != N_DECISIONS:
            raise ValueError(f"benchmark needs {N_DECISIONS} values, got {len(self.values)}")
        if not all(0.0 <= v <= 1.0 for v in self.values):
            raise ValueError("benchmark values must lie in [0, 1]")


def parse_benchmark(text: str) -> HumanBenchmark:
    source = None
    values: list[float] = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.lower().startswith("source:"):
            source = line.split(":", 1)[1].strip()
            continue
        values.extend(float(tok) for tok in line.replace(",", " ").split())
    if not source:
        raise ValueError("benchmark file needs a 'source:' citation line")
    return HumanBenchmark(tuple(values), source)


def load_benchmark(path: str | Path) -> HumanBenchmark:
    return parse_benchmark(Path(path).read_text(encoding="utf-8"))


def _bundled(name: str) -> HumanBenchmark:
    return parse_benchmark(resources.files("riskprobe.data").joinpath(name).read_text(encoding="utf-8"))


def holt_laury_benchmark() -> HumanBenchmark:
    """Human reference vector shipped with the package (low real payoffs)."""
    return _bundled("holt_laury_2002_low_real.txt")


def risk_neutral_benchmark() -> HumanBenchmark:
    """Theoretical switch-at-5 vector. Not human data; for tests and sanity checks."""
    return _bundled("risk_neutral_theoretical.txt")


# ---------------------------------------------------------------------------
# aggregation


def aggregate(records: Iterable[TrialRecord]) -> AggregateVector:
    records = list(records)
    if not records:
        raise NoDataError("no records given")
    cells = {(r.model, r.context_id) for r in records}
    if len(cells) != 1:
        raise ValueError(f"records span several cells: {sorted(cells)}")
    model, context_id = cells.pop()
    switches = [r.switch for r in records if r.switch is not None]
    n_unwanted = len(records) - len(switches)
    if not switches:
        raise NoDataError(f"no valid trials for model {model!r}, context {context_id!r}")
    n = len(switches)
    # entry d is the share of trials still on A at decision d, i.e. switch > d
    values = tuple(sum(1 for s in switches if s > d) / n for d in range(1, N_DECISIONS + 1))
    return AggregateVector(model, context_id, values, n, n_unwanted)


def aggregate_by_context(records: Iterable[TrialRecord]) -> tuple[dict[str, AggregateVector], dict[str, int]]:
    """Aggregates for one model keyed by context; cells with no valid trial are
    returned separately with their unwanted count."""
    groups: dict[str, list[TrialRecord]] = {}
    for r in records:
        groups.setdefault(r.context_id, []).append(r)
    aggs: dict[str, AggregateVector] = {}
    empty: dict[str, int] = {}
    for cid in sorted(groups):
        try:
            aggs[cid] = aggregate(groups[cid])
        except NoDataError:
            empty[cid] = len(groups[cid])
    return aggs, empty


def mean_switch(records: Iterable[TrialRecord]) -> float:
    switches = [r.switch for r in records if r.switch is not None]
    if not switches:
        raise NoDataError("no valid trials")
    return sum(switches) / len(switches)


# ---------------------------------------------------------------------------
# distances


def euclidean(u: Sequence[float], v: Sequence[float]) -> float:
    if len(u) != len(v):
        raise ValueError("vectors must have equal length")
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(u, v)))


def l1(u: Sequence[float], v: Sequence[float]) -> float:
    if len(u) != len(v):
        raise ValueError("vectors must have equal length")
    return sum(abs(a - b) for a, b in zip(u, v))


DISTANCES: dict[str, Distance] = {"euclidean": euclidean, "l1": l1}


def signed_difference(u: Sequence[float], v: Sequence[float]) -> Vector:
    return tuple(a - b for a, b in zip(u, v))


def _need(aggs: Mapping[str, AggregateVector], *ids: str) -> list[AggregateVector]:
    missing = [c for c in ids if c not in aggs]
    if missing:
        raise MissingContextError(f"missing aggregate for context(s): {', '.join(missing)}")
    return [aggs[c] for c in ids]


def mora(aggs: Mapping[str, AggregateVector], distance: Distance = euclidean) -> float:
    avoid, love = _need(aggs, RISK_AVOIDING, RISK_LOVING)
    return distance(avoid.values, love.values)


def signed_manipulation(aggs: Mapping[str, AggregateVector]) -> Vector:
    """Avoiding minus loving, per decision. Negative entries mean inverted manipulation."""
    avoid, love = _need(aggs, RISK_AVOIDING, RISK_LOVING)
    return signed_difference(avoid.values, love.values)


def human_proxy_mean(aggs: Mapping[str, AggregateVector]) -> Vector:
    vecs = _need(aggs, *HUMAN_PROXY_CONTEXTS)
    h = len(vecs)
    return tuple(sum(v.values[d] for v in vecs) / h for d in range(N_DECISIONS))


def dhra(aggs: Mapping[str, AggregateVector], benchmark: HumanBenchmark, distance: Distance = euclidean) -> float:
    return distance(human_proxy_mean(aggs), benchmark.values)


def gender_distance(aggs: Mapping[str, AggregateVector], distance: Distance = euclidean) -> float:
    female, male = _need(aggs, FEMALE, MALE)
    return distance(female.values, male.values)


def gender_signed(aggs: Mapping[str, AggregateVector]) -> Vector:
    """Female minus male, per decision. A positive sum means the female persona is more risk averse."""
    female, male = _need(aggs, FEMALE, MALE)
    return signed_difference(female.values, male.values)


# ---------------------------------------------------------------------------
# per-model summary


@dataclass
class ModelMetrics:
    model: str
    mora: float | None
    dhra: float | None
    gender_distance: float | None
    signed_manipulation: Vector | None
    gender_signed: Vector | None
    inverted_manipulation: bool | None
    mean_switch_by_context: dict[str, float]
    n_valid_by_context: dict[str, int]
    n_unwanted_by_context: dict[str, int]
    low_confidence_contexts: list[str]
    distance: str = "euclidean"
    benchmark_source: str | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("signed_manipulation", "gender_signed"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelMetrics":
        d = dict(d)
        for k in ("signed_manipulation", "gender_signed"):
            if d.get(k) is not None:
                d[k] = tuple(d[k])
        return cls(**d)


def compute_model_metrics(
    records: Iterable[TrialRecord],
    benchmark: HumanBenchmark | None,
    distance: str = "euclidean",
) -> ModelMetrics:
    records = list(records)
    models = {r.model for r in records}
    if len(models) != 1:
        raise ValueError(f"expected records of exactly one model, got {sorted(models)}")
    model = models.pop()
    dist = DISTANCES[distance]
    aggs, empty = aggregate_by_context(records)
    notes = [f"no valid trials in context {c!r} ({n} unwanted)" for c, n in empty.items()]

    def attempt(fn, *args):
        try:
            return fn(*args)
        except MissingContextError as exc:
            notes.append(f"{fn.__name__}: {exc}")
            return None

    m = attempt(mora, aggs, dist)
    signed = attempt(signed_manipulation, aggs)
    d = attempt(dhra, aggs, benchmark, dist) if benchmark is not None else None
    g = attempt(gender_distance, aggs, dist)
    gs = attempt(gender_signed, aggs)

    by_ctx: dict[str, list[TrialRecord]] = {}
    for r in records:
        by_ctx.setdefault(r.context_id, []).append(r)

    return ModelMetrics(
        model=model,
        mora=m,
        dhra=d,
        gender_distance=g,
        signed_manipulation=signed,
        gender_signed=gs,
        inverted_manipulation=None if signed is None else any(x < 0 for x in signed),
        mean_switch_by_context={c: mean_switch(by_ctx[c]) for c in sorted(aggs)},
        n_valid_by_context={c: sum(r.valid for r in by_ctx[c]) for c in sorted(by_ctx)},
        n_unwanted_by_context={c: sum(not r.valid for r in by_ctx[c]) for c in sorted(by_ctx)},
        low_confidence_contexts=sorted([c for c, a in aggs.items() if a.low_confidence] + list(empty)),
        distance=distance,
        benchmark_source=None if benchmark is None else benchmark.source,
        notes=notes,
    )


def compute_metrics(
    records: Iterable[TrialRecord],
    benchmark: HumanBenchmark | None,
    distance: str = "euclidean",
) -> list[ModelMetrics]:
    by_model: dict[str, list[TrialRecord]] = {}
    for r in records:
        by_model.setdefault(r.model, []).append(r)
    return [compute_model_metrics(by_model[m], benchmark, distance) for m in sorted(by_model)]


def aggregates_for_run(records: Iterable[TrialRecord]) -> list[AggregateVector]:
    """All non-empty aggregates, sorted by (model, context)."""
    by_model: dict[str, list[TrialRecord]] = {}
    for r in records:
        by_model.setdefault(r.model, []).append(r)
    out = []
    for m in sorted(by_model):
        aggs, _ = aggregate_by_context(by_model[m])
        out.extend(aggs[c] for c in sorted(aggs))
    return out
