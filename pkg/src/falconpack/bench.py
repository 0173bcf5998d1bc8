"""Benchmark configurations and communication-level comparison reports."""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import yaml

from .exceptions import ConfigError, InfeasibleError
from .tensor import ConvDims, HeParams
from .tiling import FRAMEWORKS, CostReport, comm_cost, reports_to_csv

# Published communication figures in MB, keyed by (table, row, framework).
# Reference values only; they are never produced by the model.
PUBLISHED_MB: dict[tuple[str, str, str], float] = {}


def _fill(table: str, rows: dict[str, tuple[float, ...]], names: tuple[str, ...]) -> None:
    for row, values in rows.items():
        for name, value in zip(names, values):
            PUBLISHED_MB[(table, row, name)] = value


_fill("n_sweep", {
    "4096": (9.00, 51.70, 18.94, 10.77, 8.98),
    "8192": (18.00, 102.69, 35.77, 19.12, 13.21),
    "16384": (36.00, 204.14, 70.10, 34.47, 17.45),
    "32768": (72.00, 409.35, 140.16, 71.26, 26.04),
}, ("cryptflow2", "iron", "cheetah", "falcon", "falcon_tiled"))
_fill("dims", {
    "28,192,3": (12.01, 23.50, 8.71, 6.45, 6.45),
    "14,384,3": (6.00, 34.46, 12.66, 7.22, 5.99),
    "14,576,3": (9.00, 51.70, 18.94, 10.77, 8.98),
    "7,960,3": (4.00, 85.29, 28.66, 14.76, 7.23),
}, ("cryptflow2", "iron", "cheetah", "falcon", "falcon_tiled"))
_fill("group", {
    "1": (9.00, 51.70, 18.94, 8.98),
    "2": (9.00, 51.70, 18.94, 8.98),
    "4": (9.00, 68.44, 18.94, 8.98),
    "8": (9.00, 102.73, 18.94, 8.98),
}, ("cryptflow2", "iron", "cheetah", "falcon_tiled"))

TABLE_DIMS = ((28, 192, 3), (14, 384, 3), (14, 576, 3), (7, 960, 3))
N_SWEEP = (4096, 8192, 16384, 32768)
GROUP_SWEEP = (1, 2, 4, 8)


def published_ratio(table: str, row: str, num: str = "cheetah", den: str = "falcon_tiled") -> float:
    return PUBLISHED_MB[(table, row, num)] / PUBLISHED_MB[(table, row, den)]


@dataclass(frozen=True)
class BenchEntry:
    size: int
    channels: int
    kernel: int
    n: int
    group: int = 1
    stride: int = 1
    padding: str = "same"
    schemes: tuple[str, ...] = FRAMEWORKS
    expect_reject: tuple[str, ...] = ()
    ref: tuple[str, str] | None = None  # (table, row) of the published figures

    @property
    def dims(self) -> ConvDims:
        return ConvDims.square(self.size, self.channels, self.kernel, group=self.group,
                               stride=self.stride, padding=self.padding)

    @property
    def label(self) -> str:
        return f"({self.size},{self.channels},{self.kernel})"


@dataclass(frozen=True)
class BenchConfig:
    entries: tuple[BenchEntry, ...]
    seed: int = 0
    format: str = "table"


@dataclass(frozen=True)
class CompareRow:
    entry: BenchEntry
    scheme: str
    report: CostReport | None  # None when the entry is an expected reject
    published_mb: float | None

    def as_dict(self) -> dict:
        base = {"entry": self.entry.label, "G": self.entry.group, "N": self.entry.n,
                "scheme": self.scheme, "status": "ok" if self.report else "rejected",
                "published_MB": self.published_mb}
        if self.report is not None:
            r = self.report.row()
            base.update({k: r[k] for k in ("C_x", "C_w", "input_polys", "output_polys",
                                           "poly_mults", "input_bits", "output_bits",
                                           "input_MB", "output_MB", "total_MB")})
        return base


def preset(name: str) -> BenchConfig:
    if name == "n_sweep":
        entries = [BenchEntry(14, 576, 3, n, ref=("n_sweep", str(n))) for n in N_SWEEP]
    elif name == "dims":
        entries = [BenchEntry(h, c, r, 4096, ref=("dims", f"{h},{c},{r}")) for h, c, r in TABLE_DIMS]
    elif name == "group":
        entries = [BenchEntry(14, 576, 3, 4096, group=g, ref=("group", str(g)),
                              expect_reject=("falcon", "falcon_tiled") if g == 8 else ())
                   for g in GROUP_SWEEP]
        # smallest ring in which a whole G=8 group fits one packing unit
        entries.append(BenchEntry(14, 576, 3, 16384, group=8))
    elif name == "all":
        entries = [e for part in ("n_sweep", "dims", "group") for e in preset(part).entries]
    else:
        raise ConfigError(f"unknown preset {name!r}; expected n_sweep, dims, group or all")
    return BenchConfig(tuple(entries))


def _entry_from_obj(obj: dict) -> BenchEntry:
    try:
        dims = obj["dims"]
        if isinstance(dims, str):
            dims = [int(v) for v in dims.split(",")]
        size, channels, kernel = (int(v) for v in dims)
        ref = obj.get("ref")
        entry = BenchEntry(
            size, channels, kernel, int(obj.get("n", 4096)), group=int(obj.get("group", 1)),
            stride=int(obj.get("stride", 1)), padding=str(obj.get("padding", "same")),
            schemes=tuple(obj.get("schemes", FRAMEWORKS)),
            expect_reject=tuple(obj.get("expect_reject", ())),
            ref=tuple(ref) if ref else None)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad config entry {obj!r}: {exc}") from exc
    unknown = set(entry.schemes) - set(FRAMEWORKS)
    if unknown:
        raise ConfigError(f"unknown schemes {sorted(unknown)}")
    try:
        entry.dims
        HeParams(n=entry.n)
    except ValueError as exc:
        raise ConfigError(f"entry {obj!r}: {exc}") from exc
    return entry


def load_config(path: str) -> BenchConfig:
    """YAML or JSON with keys ``entries`` (list), ``seed`` and ``format``."""
    try:
        with open(path, encoding="utf-8") as fh:
            obj = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(obj, dict) or not isinstance(obj.get("entries"), list):
        raise ConfigError("config needs an 'entries' list")
    fmt = obj.get("format", "table")
    if fmt not in ("table", "csv", "json"):
        raise ConfigError(f"unknown format {fmt!r}")
    entries = tuple(_entry_from_obj(e) for e in obj["entries"])
    return BenchConfig(entries, seed=int(obj.get("seed", 0)), format=fmt)


def _threads() -> int:
    raw = os.environ.get("FALCONPACK_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"FALCONPACK_THREADS must be an integer, got {raw!r}") from None


def _run_entry(entry: BenchEntry) -> list[CompareRow]:
    dims, params = entry.dims, HeParams(n=entry.n)
    rows = []
    for scheme in entry.schemes:
        ref = PUBLISHED_MB.get((*entry.ref, scheme)) if entry.ref else None
        try:
            report = comm_cost(scheme, dims, params)
        except InfeasibleError:
            if scheme not in entry.expect_reject:
                raise
            report = None
        else:
            if scheme in entry.expect_reject:
                raise ConfigError(f"{entry.label} N={entry.n} G={entry.group} was expected to "
                                  f"reject {scheme} but is feasible")
        rows.append(CompareRow(entry, scheme, report, ref))
    return rows


def run_compare(config: BenchConfig) -> list[CompareRow]:
    """Model communication for every (entry, scheme); rows follow config order."""
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        parts = list(pool.map(_run_entry, config.entries))
    return [row for part in parts for row in part]


def render(rows: list[CompareRow], fmt: str) -> str:
    if fmt == "json":
        return json.dumps([r.as_dict() for r in rows], indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        return reports_to_csv([r.report for r in rows if r.report is not None])
    if fmt != "table":
        raise ConfigError(f"unknown format {fmt!r}")
    head = f"{'entry':<12}{'G':>3}{'N':>7}  {'scheme':<13}{'tile':>8}{'in MB':>10}{'out MB':>10}" \
           f"{'total MB':>10}{'mults':>7}{'ref MB':>10}"
    lines = [head, "-" * len(head)]
    for r in rows:
        ref = f"{r.published_mb:.2f}" if r.published_mb is not None else "-"
        e = r.entry
        if r.report is None:
            lines.append(f"{e.label:<12}{e.group:>3}{e.n:>7}  {r.scheme:<13}{'rejected':>8}"
                         f"{'-':>10}{'-':>10}{'-':>10}{'-':>7}{ref:>10}")
            continue
        rep = r.report
        tile = f"{rep.c_x}x{rep.c_w}" if rep.c_x else "-"
        lines.append(f"{e.label:<12}{e.group:>3}{e.n:>7}  {r.scheme:<13}{tile:>8}"
                     f"{rep.input_bytes / 1e6:>10.2f}{rep.output_bytes / 1e6:>10.2f}"
                     f"{rep.total_mb:>10.2f}{rep.poly_mult_count:>7}{ref:>10}")
    return "\n".join(lines) + "\n"

