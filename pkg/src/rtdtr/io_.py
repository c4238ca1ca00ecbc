"""Cohort serialization: line-delimited JSON, one unit per line.

The latent value is redacted on write by default and its presence in a file
read for inference is treated as a violation, mirroring the rule that
downstream estimation never sees it.
"""

from __future__ import annotations

import json
from typing import Optional

import numpy as np

from .core import TimeGrid, UnitRecord
from .errors import DataError
from .simgen import Cohort


def _unit_to_obj(unit: UnitRecord, include_latent: bool) -> dict:
    obj = {
        "z1": unit.z1.tolist(),
        "z2": unit.z2.tolist(),
        "z3_path": unit.z3_path.tolist(),
        "switch_times": unit.switch_times.tolist(),
        "a0": int(unit.a0),
        "t_max": unit.t_max,
        "y": unit.y,
    }
    if include_latent and unit.u is not None:
        obj["u"] = unit.u
    return obj


def write_cohort(cohort: Cohort, path, include_latent: bool = False) -> None:
    header = {
        "kind": "cohort",
        "case_id": cohort.case_id,
        "seed": cohort.seed,
        "n": cohort.n,
    }
    if cohort.grid is not None:
        header["grid"] = {
            "t_end": cohort.grid.t_end,
            "dt": cohort.grid.dt,
            "covariate_dt": cohort.grid.covariate_dt,
        }
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for unit in cohort.units:
            fh.write(json.dumps(_unit_to_obj(unit, include_latent)) + "\n")


def read_cohort(path, expect_redacted: bool = True) -> Cohort:
    """Parse a cohort file; raises DataError naming the offending line."""
    units = []
    header: Optional[dict] = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: not valid JSON ({exc.msg})") from exc
            if lineno == 1:
                if not isinstance(obj, dict) or obj.get("kind") != "cohort":
                    raise DataError("line 1: missing cohort header")
                header = obj
                continue
            if "u" in obj and expect_redacted:
                raise DataError(
                    f"line {lineno}: latent field 'u' present in an inference-bound file"
                )
            try:
                unit = UnitRecord(
                    z1=np.asarray(obj["z1"], dtype=float),
                    z2=np.asarray(obj["z2"], dtype=float),
                    z3_path=np.asarray(obj["z3_path"], dtype=float),
                    switch_times=np.asarray(obj["switch_times"], dtype=float),
                    a0=int(obj["a0"]),
                    t_max=float(obj["t_max"]),
                    y=float(obj["y"]),
                    u=obj.get("u"),
                )
            except KeyError as exc:
                raise DataError(f"line {lineno}: missing field {exc}") from exc
            except DataError as exc:
                raise DataError(f"line {lineno}: {exc}") from exc
            units.append(unit)
    if header is None:
        raise DataError("empty cohort file")
    grid = None
    if "grid" in header:
        g = header["grid"]
        grid = TimeGrid(t_end=g["t_end"], dt=g["dt"], covariate_dt=g["covariate_dt"])
    return Cohort(
        units=units,
        case_id=header.get("case_id", "unknown"),
        seed=int(header.get("seed", 0)),
        n=len(units),
        grid=grid,
    )
