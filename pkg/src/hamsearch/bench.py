"""Benchmark harness: latency distributions per strategy and radius.

Queries are sampled from the dataset itself, each (strategy, radius)
cell gets a few warmup queries before timing starts, and every enabled
strategy is checked against the others on every query — a disagreement
aborts the run, because the strategies are only allowed to differ in
speed. Latencies are in-process wall times around the search call, so
only relative comparisons are meaningful.
"""

from __future__ import annotations

import json
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone

import numpy as np

from .core import SubCodeLayout, pack_rows, word_count
from .engine import ALL_STRATEGIES, SearchEngine, SearchStrategy
from .errors import StrategyDisagreementError
from .permutation import estimate_correlations, kernighan_lin
from .store import CodeDataset, format_code_hex, read_codes

SCHEMA_VERSION = 1
LATENCY_NOTE = (
    "in-process wall-clock latencies measured around the search call only; "
    "absolute values depend on this host, compare strategies relatively"
)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a generated dataset.

    ``uniform`` draws every bit independently. ``clustered`` plants
    groups of ``block_size`` near-duplicate bit columns (each member is
    the group's base column with bits flipped at ``flip_prob``) scattered
    over random positions, giving the permutation optimizer something
    real to unscramble.
    """

    count: int
    nbits: int
    model: str = "uniform"
    block_size: int = 4
    flip_prob: float = 0.05
    seed: int = 0


@dataclass
class BenchConfig:
    dataset_path: str | None = None
    synthetic: SyntheticSpec | None = None
    filter_width: int = 16
    query_count: int = 200
    radii: list = field(default_factory=lambda: [5, 10, 15, 20])
    strategies: list = field(default_factory=lambda: [s.value for s in ALL_STRATEGIES])
    seed: int = 0
    warmup: int = 3
    output_path: str | None = None
    csv_path: str | None = None
    threads: int = 0

    def __post_init__(self):
        if (self.dataset_path is None) == (self.synthetic is None):
            raise ValueError("give exactly one of dataset_path or synthetic")
        if self.query_count <= 0:
            raise ValueError("query_count must be positive")
        if self.warmup < 0:
            raise ValueError("warmup cannot be negative")
        seen = set()
        for name in self.strategies:
            SearchStrategy(name)
            if name in seen:
                raise ValueError(f"strategy {name} listed twice")
            seen.add(name)

    @classmethod
    def from_json(cls, text: str) -> "BenchConfig":
        doc = json.loads(text)
        synth = doc.pop("synthetic", None)
        if synth is not None:
            synth = SyntheticSpec(**synth)
        return cls(synthetic=synth, **doc)

    def to_json(self) -> str:
        doc = asdict(self)
        return json.dumps(doc, indent=2)


def generate_synthetic(count: int, nbits: int, model: str = "uniform", seed: int = 0,
                       *, block_size: int = 4, flip_prob: float = 0.05) -> CodeDataset:
    """Deterministic synthetic dataset; see :class:`SyntheticSpec`."""
    if count <= 0 or nbits <= 0:
        raise ValueError("count and nbits must be positive")
    rng = np.random.default_rng(seed)
    if model == "uniform":
        words = rng.integers(0, 1 << 64, size=(count, word_count(nbits)),
                             dtype=np.uint64)
        spare = nbits % 64
        if spare:
            words[:, -1] &= np.uint64((1 << spare) - 1)
        return CodeDataset(words, nbits)
    if model != "clustered":
        raise ValueError(f"unknown synthetic model {model!r}")
    if not 1 <= block_size <= nbits:
        raise ValueError("block_size must be in [1, nbits]")
    if not 0.0 <= flip_prob <= 0.5:
        raise ValueError("flip_prob must be in [0, 0.5]")
    bits = np.empty((count, nbits), dtype=np.uint8)
    positions = rng.permutation(nbits)
    full_groups = nbits // block_size
    for g in range(full_groups):
        base = rng.integers(0, 2, size=count, dtype=np.uint8)
        for k in range(block_size):
            flips = (rng.random(count) < flip_prob).astype(np.uint8)
            bits[:, positions[g * block_size + k]] = base ^ flips
    for p in positions[full_groups * block_size:]:
        bits[:, p] = rng.integers(0, 2, size=count, dtype=np.uint8)
    return CodeDataset(pack_rows(bits, nbits), nbits)


def dataset_from_spec(spec: SyntheticSpec) -> CodeDataset:
    return generate_synthetic(spec.count, spec.nbits, spec.model, spec.seed,
                              block_size=spec.block_size, flip_prob=spec.flip_prob)


def sample_queries(ds: CodeDataset, count: int, seed: int) -> list:
    """Draw query codes from the dataset without replacement."""
    if count > len(ds):
        raise ValueError(f"cannot sample {count} queries from {len(ds)} codes")
    rng = np.random.default_rng(seed)
    ids = rng.choice(len(ds), size=count, replace=False)
    return [ds.code(int(i)) for i in ids]


def default_engine_factory(dataset: CodeDataset, cfg: BenchConfig) -> SearchEngine:
    """Build whatever the configured strategies need, including the permutation."""
    strategies = [SearchStrategy(s) for s in cfg.strategies]
    layout = SubCodeLayout.with_width(dataset.nbits, cfg.filter_width)
    permutation = None
    if SearchStrategy.FILTERED_PERMUTED in strategies:
        corr = estimate_correlations(dataset, seed=cfg.seed)
        permutation = kernighan_lin(corr, layout)
    return SearchEngine.build(dataset, filter_layout=layout,
                              permutation=permutation, strategies=strategies)


@dataclass
class CellStats:
    """One (strategy, radius) measurement cell with its raw samples."""

    strategy: str
    radius: int
    samples_us: list
    candidate_fractions: list
    mean_us: float
    std_us: float
    median_us: float
    p95_us: float
    mean_candidate_fraction: float

    @classmethod
    def from_samples(cls, strategy: str, radius: int, samples, fractions):
        arr = np.asarray(samples, dtype=np.float64)
        return cls(
            strategy=strategy,
            radius=radius,
            samples_us=[float(x) for x in samples],
            candidate_fractions=[float(x) for x in fractions],
            mean_us=float(arr.mean()),
            std_us=float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
            median_us=float(np.median(arr)),
            p95_us=float(np.percentile(arr, 95)),
            mean_candidate_fraction=float(np.mean(fractions)),
        )


@dataclass
class BenchReport:
    schema_version: int
    created_utc: str
    environment: dict
    config: dict
    note: str
    cells: list
    qps: dict | None = None

    def cell(self, strategy, radius: int) -> CellStats:
        name = SearchStrategy(strategy).value
        for c in self.cells:
            if c.strategy == name and c.radius == radius:
                return c
        raise KeyError(f"no cell for {name} at radius {radius}")

    def to_json(self) -> str:
        doc = asdict(self)
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "BenchReport":
        doc = json.loads(text)
        doc["cells"] = [CellStats(**c) for c in doc["cells"]]
        return cls(**doc)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("strategy,radius,query_index,latency_us,candidate_fraction\n")
            for c in self.cells:
                for i, (us, frac) in enumerate(zip(c.samples_us,
                                                   c.candidate_fractions)):
                    fh.write(f"{c.strategy},{c.radius},{i},{us:.3f},{frac:.8f}\n")


def _environment() -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
        "machine": platform.machine(),
    }


def run_bench(cfg: BenchConfig, engine_factory=default_engine_factory) -> BenchReport:
    """Measure every configured (strategy, radius) cell and build a report.

    Warmup queries are excluded from the samples. Strategies are verified
    against each other on every timed query; a mismatch raises
    :class:`StrategyDisagreementError` with the offending query and radius.
    """
    if cfg.dataset_path is not None:
        dataset = read_codes(cfg.dataset_path)
    else:
        dataset = dataset_from_spec(cfg.synthetic)
    for r in cfg.radii:
        if not 0 <= r <= dataset.nbits:
            raise ValueError(f"radius {r} outside [0, {dataset.nbits}]")
    engine = engine_factory(dataset, cfg)
    queries = sample_queries(dataset, cfg.query_count, cfg.seed)
    strategies = [SearchStrategy(s) for s in cfg.strategies]
    n = len(dataset)

    cells = []
    reference: dict = {}
    for strategy in strategies:
        for radius in cfg.radii:
            for q in queries[: cfg.warmup]:
                engine.r_neighbor_search(strategy, q, radius)
            samples, fractions = [], []
            for qi, q in enumerate(queries):
                begin = time.perf_counter_ns()
                result = engine.r_neighbor_search(strategy, q, radius)
                samples.append((time.perf_counter_ns() - begin) / 1000.0)
                fractions.append(result.candidate_count / n)
                key = (radius, qi)
                if key not in reference:
                    reference[key] = (strategy.value, result.neighbors)
                elif reference[key][1] != result.neighbors:
                    raise StrategyDisagreementError(
                        f"{strategy.value} disagrees with {reference[key][0]} "
                        f"on query {qi} at radius {radius}",
                        query_hex=format_code_hex(q),
                        radius=radius,
                        strategy_a=reference[key][0],
                        strategy_b=strategy.value,
                    )
            cells.append(CellStats.from_samples(strategy.value, radius,
                                                samples, fractions))

    qps = None
    if cfg.threads > 0:
        qps = _measure_throughput(engine, strategies, cfg.radii, queries,
                                  cfg.threads)

    report = BenchReport(
        schema_version=SCHEMA_VERSION,
        created_utc=datetime.now(timezone.utc).isoformat(),
        environment=_environment(),
        config=json.loads(cfg.to_json()),
        note=LATENCY_NOTE,
        cells=cells,
        qps=qps,
    )
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="ascii") as fh:
            fh.write(report.to_json())
    if cfg.csv_path:
        report.write_csv(cfg.csv_path)
    return report


def _measure_throughput(engine, strategies, radii, queries, threads) -> dict:
    out: dict = {}
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for strategy in strategies:
            per_radius = {}
            for radius in radii:
                begin = time.perf_counter_ns()
                jobs = [pool.submit(engine.r_neighbor_search, strategy, q, radius)
                        for q in queries]
                for j in jobs:
                    j.result()
                wall_s = (time.perf_counter_ns() - begin) / 1e9
                per_radius[str(radius)] = len(queries) / wall_s
            out[strategy.value] = per_radius
    return out


def render_latency_figure(report: BenchReport, path) -> None:
    """Latency-vs-radius chart (log scale), one line per strategy, to SVG."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    strategies = sorted({c.strategy for c in report.cells})
    radii = sorted({c.radius for c in report.cells})
    for strategy in strategies:
        means = [report.cell(strategy, r).mean_us / 1000.0 for r in radii]
        ax.plot(radii, means, marker="o", label=strategy)
    ax.set_yscale("log")
    ax.set_xlabel("search radius")
    ax.set_ylabel("mean latency (ms)")
    ax.set_xticks(radii)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
