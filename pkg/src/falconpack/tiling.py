"""Communication cost model and the (C_x, C_w) tiling solver.

Byte counts follow the usual ciphertext model: every input ciphertext is
N coefficients of ``q_bits`` each, every output ciphertext ``N + n`` of them
where ``n`` is the number of extracted coefficients it carries.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction

from .exceptions import CapacityError, GeometryError, InfeasibleError
from .packing.layout import tile_is_feasible
from .packing.plan import CheetahPlan, FalconPlan, IronPlan
from .tensor import ConvDims, HeParams

FRAMEWORKS = ("iron", "cheetah", "falcon", "falcon_tiled")
MB = 1_000_000


@dataclass(frozen=True)
class TileChoice:
    c_x: int
    c_w: int

    @property
    def k(self) -> int:
        return self.c_x // self.c_w

    @property
    def objective(self) -> Fraction:
        return Fraction(1, self.c_x) + Fraction(1, self.c_w)

    def to_dict(self) -> dict:
        return {"C_x": self.c_x, "C_w": self.c_w, "k": self.k, "objective": float(self.objective)}


@dataclass(frozen=True)
class CostReport:
    framework: str
    dims: ConvDims
    n: int
    q_bits: int
    input_poly_count: int
    output_poly_count: int
    poly_mult_count: int
    input_bits: int
    output_bits: int
    c_x: int = 0
    c_w: int = 0

    @property
    def input_bytes(self) -> float:
        return self.input_bits / 8

    @property
    def output_bytes(self) -> float:
        return self.output_bits / 8

    @property
    def total_bytes(self) -> float:
        return (self.input_bits + self.output_bits) / 8

    @property
    def total_mb(self) -> float:
        return self.total_bytes / MB

    def row(self) -> dict:
        d = self.dims
        return {
            "framework": self.framework, "H": d.H, "W": d.W, "C": d.C, "R": d.R, "K": d.K,
            "G": d.G, "stride": d.stride, "N": self.n, "q_bits": self.q_bits,
            "C_x": self.c_x, "C_w": self.c_w,
            "input_polys": self.input_poly_count, "output_polys": self.output_poly_count,
            "poly_mults": self.poly_mult_count,
            "input_bits": self.input_bits, "output_bits": self.output_bits,
            "input_MB": round(self.input_bytes / MB, 6),
            "output_MB": round(self.output_bytes / MB, 6),
            "total_MB": round(self.total_mb, 6),
        }

    @classmethod
    def from_row(cls, row: dict) -> "CostReport":
        i = lambda key: int(row[key])  # noqa: E731
        dims = ConvDims(H=i("H"), W=i("W"), C=i("C"), R=i("R"), K=i("K"), G=i("G"),
                        stride=i("stride"))
        return cls(framework=str(row["framework"]), dims=dims, n=i("N"), q_bits=i("q_bits"),
                   input_poly_count=i("input_polys"), output_poly_count=i("output_polys"),
                   poly_mult_count=i("poly_mults"), input_bits=i("input_bits"),
                   output_bits=i("output_bits"), c_x=i("C_x"), c_w=i("C_w"))

    def to_json(self) -> str:
        return json.dumps(self.row(), sort_keys=True)


CSV_FIELDS = list(CostReport(  # column order of the emitted CSV
    "iron", ConvDims(1, 1, 1, 1), 2048, 59, 0, 0, 0, 0, 0).row())


def reports_to_csv(reports: list[CostReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow(r.row())
    return buf.getvalue()


def reports_from_csv(text: str) -> list[CostReport]:
    return [CostReport.from_row(row) for row in csv.DictReader(io.StringIO(text))]


def _unit_coeffs(dims: ConvDims) -> int:
    return dims.hw * dims.G ** 2


def _check_hw(dims: ConvDims, params: HeParams) -> None:
    if dims.hw > params.n:
        raise InfeasibleError(f"HW={dims.hw} exceeds N={params.n}; spatial tiling unsupported")


def feasible_tiles(dims: ConvDims, params: HeParams) -> list[TileChoice]:
    """All tiles with ``C_w`` in {1, even}, ``C_x`` a multiple, meeting capacity."""
    _check_hw(dims, params)
    unit, n = _unit_coeffs(dims), params.n
    bound = 2 * n // dims.hw + 2  # generous box; tile_is_feasible is the real test
    out = []
    for c_w in [1] + list(range(2, bound + 1, 2)):
        for c_x in range(c_w, bound + 1, c_w):
            if tile_is_feasible(unit, n, c_x, c_w):
                out.append(TileChoice(c_x, c_w))
    return out


def solve_tiling(dims: ConvDims, params: HeParams) -> TileChoice:
    """Minimize 1/C_x + 1/C_w; ties go to larger C_w, then larger C_x."""
    tiles = feasible_tiles(dims, params)
    if not tiles:
        raise InfeasibleError(
            f"no tile fits: one packing unit needs {_unit_coeffs(dims)} of N={params.n} coefficients")
    return min(tiles, key=lambda t: (t.objective, -t.c_w, -t.c_x))


def gp_tile(dims: ConvDims, params: HeParams) -> TileChoice:
    """Untiled greedy packing: as many input units per polynomial as an even C_w allows."""
    tiles = feasible_tiles(dims, params)
    even = [t for t in tiles if t.c_w % 2 == 0]
    if even:
        return max(even, key=lambda t: (t.c_x, t.c_w))
    if tiles:
        return max(tiles, key=lambda t: (t.c_x, t.c_w))
    raise InfeasibleError(
        f"no tile fits: one packing unit needs {_unit_coeffs(dims)} of N={params.n} coefficients")


def _falcon_report(framework: str, dims: ConvDims, params: HeParams, tile: TileChoice) -> CostReport:
    if dims.K != dims.C:
        raise GeometryError("zero-aware packing needs K == C")
    try:
        plan = FalconPlan(dims, params, tile.c_x, tile.c_w)
    except CapacityError as exc:
        raise InfeasibleError(str(exc)) from exc
    return CostReport(framework, dims, params.n, params.q_bits,
                      input_poly_count=plan.n_inputs, output_poly_count=len(plan.products),
                      poly_mult_count=plan.poly_mult_count, input_bits=plan.input_bits(),
                      output_bits=plan.output_bits(), c_x=tile.c_x, c_w=tile.c_w)


def comm_cost(framework: str, dims: ConvDims, params: HeParams,
              tile: TileChoice | None = None) -> CostReport:
    """Model communication of one convolution layer under ``framework``."""
    _check_hw(dims, params)
    n, q = params.n, params.q_bits
    outputs = dims.K * dims.out_h * dims.out_w
    if framework == "iron":
        per_group = math.ceil(dims.out_h * dims.out_w * dims.G * dims.R ** 2 / n)
        inputs = dims.groups * per_group
        out_polys = dims.K * per_group
        mults = IronPlan(dims, params).poly_mult_count
        return CostReport(framework, dims, n, q, inputs, out_polys, mults,
                          inputs * n * q, (out_polys * n + outputs) * q)
    if framework == "cheetah":
        inputs = math.ceil(dims.C * dims.hw / n)
        out_polys = math.ceil(dims.K / math.ceil(n / (dims.hw * dims.C)))
        mults = CheetahPlan(dims, params).poly_mult_count
        return CostReport(framework, dims, n, q, inputs, out_polys, mults,
                          inputs * n * q, (out_polys * n + outputs) * q)
    if framework == "falcon":
        return _falcon_report(framework, dims, params, tile or gp_tile(dims, params))
    if framework == "falcon_tiled":
        return _falcon_report(framework, dims, params, tile or solve_tiling(dims, params))
    raise GeometryError(f"unknown framework {framework!r}; expected one of {FRAMEWORKS}")


def falcon_closed_form_bits(dims: ConvDims, params: HeParams, tile: TileChoice) -> int:
    """Closed-form count with ceil(units/C_x) inputs and ceil(units/C_w) outputs."""
    units, n, q = dims.groups, params.n, params.q_bits
    per_unit = dims.G * dims.out_h * dims.out_w
    return (math.ceil(units / tile.c_x) * n
            + math.ceil(units / tile.c_w) * (n + per_unit * tile.c_w)) * q
