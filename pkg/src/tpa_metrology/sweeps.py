"""Parameter sweeps over probe families, emitting deterministic CSV artifacts.

A sweep is described by a small config (file or object): state family,
observable, sweep axis and values, fixed parameters.  Each output row holds
the numeric Fisher information, the inverse analytic sensitivity, the cutoff
used and any warnings; rows are ordered by axis index regardless of whether
points were computed serially or in parallel.
"""

from __future__ import annotations

import configparser
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__ as _pkg_version
from .channels import LossSpec
from .distributions import pmf_pair_from_state, quad_pdf_pair_from_state
from .fock import ProbeSpec, make_probe_state
from .metrology import (
    OBSERVABLES,
    amplitude_for_mean_n,
    fisher_continuous,
    fisher_discrete,
    sensitivity_analytic,
)

STATE_FAMILIES = ("sv", "coherent", "squeezed_coherent")
SWEEP_AXES = ("nbar", "eta", "phi", "n_r")
CSV_COLUMNS = (
    "axis_value",
    "mean_n_incident",
    "fi_numeric",
    "sens_analytic_inverse",
    "cutoff_used",
    "warnings",
)


@dataclass
class SweepConfig:
    state_family: str
    observable: str
    sweep_axis: str
    axis_values: tuple[float, ...]
    fixed_params: dict[str, float] = field(default_factory=dict)
    output_path: str = "sweep.csv"
    tail_tol: float = 1e-10

    def __post_init__(self):
        if self.state_family not in STATE_FAMILIES:
            raise ValueError(f"state_family must be one of {STATE_FAMILIES}")
        if self.observable not in OBSERVABLES:
            raise ValueError(f"observable must be one of {OBSERVABLES}")
        if self.sweep_axis not in SWEEP_AXES:
            raise ValueError(f"sweep_axis must be one of {SWEEP_AXES}")
        self.axis_values = tuple(float(v) for v in self.axis_values)
        if not self.axis_values:
            raise ValueError("axis_values must be nonempty")
        if any(b <= a for a, b in zip(self.axis_values, self.axis_values[1:])):
            raise ValueError("axis_values must be strictly increasing")
        if self.sweep_axis in self.fixed_params:
            raise ValueError(f"fixed_params must not include the sweep axis {self.sweep_axis!r}")


def resolve_point(
    family: str, axis: str, value: float, fixed: dict[str, float]
) -> tuple[ProbeSpec, LossSpec]:
    """Probe and loss for one sweep point; nbar-style axes hold the incident <n>."""
    params = dict(fixed)
    params[axis] = value
    eta = float(params.pop("eta", 1.0))
    phi = float(params.pop("phi", 0.0))

    def pick_r() -> float:
        if "r" in params:
            return float(params["r"])
        if "n_r" in params:
            return math.asinh(math.sqrt(float(params["n_r"])))
        raise ValueError("squeezed family needs 'r' or 'n_r'")

    if family == "sv":
        r = pick_r() if ("r" in params or "n_r" in params) else math.asinh(
            math.sqrt(float(params["nbar"]))
        )
        return ProbeSpec.squeezed_vacuum(r), LossSpec(eta)
    if family == "coherent":
        alpha = (
            float(params["alpha"])
            if "alpha" in params
            else math.sqrt(float(params["nbar"]))
        )
        return ProbeSpec.coherent(alpha, phi), LossSpec(eta)
    # squeezed_coherent: amplitude either given or adjusted to hold <n> fixed
    r = pick_r()
    if "alpha" in params:
        alpha = float(params["alpha"])
    elif "nbar" in params:
        alpha = amplitude_for_mean_n(float(params["nbar"]), math.sinh(r) ** 2, phi)
    else:
        raise ValueError("squeezed_coherent needs 'alpha' or 'nbar'")
    return ProbeSpec(r=r, alpha_abs=alpha, phi=phi), LossSpec(eta)


def _fmt(x: float) -> str:
    return "%.12g" % x


def _sweep_point(config: SweepConfig, value: float) -> dict[str, str]:
    spec, loss = resolve_point(config.state_family, config.sweep_axis, value, config.fixed_params)
    notes: list[str] = []
    state = make_probe_state(spec, tail_tol=config.tail_tol)
    guess = max(int(math.ceil(4.0 * spec.mean_photon_number())) + 50, 64)
    if state.n_max > 2 * guess:
        notes.append(f"cutoff grew to {state.n_max}")
    if config.observable == "photon_number":
        pmf, dpmf = pmf_pair_from_state(state, loss)
        fi = fisher_discrete(pmf, dpmf)
    else:
        pdf, dpdf = quad_pdf_pair_from_state(state, loss, config.observable[-1])
        fi = fisher_continuous(pdf, dpdf, observable=config.observable)
    if fi.ill_bins:
        notes.append(f"{fi.ill_bins} ill-conditioned bins")
    sens = sensitivity_analytic(spec, loss, config.observable)
    sens_inv = "divergent" if sens.diverges else _fmt(1.0 / sens.delta_eps_sq)
    return {
        "axis_value": _fmt(value),
        "mean_n_incident": _fmt(spec.mean_photon_number()),
        "fi_numeric": _fmt(fi.fi),
        "sens_analytic_inverse": sens_inv,
        "cutoff_used": str(state.n_max),
        "warnings": ";".join(notes),
    }


def run_sweep(config: SweepConfig, parallel: bool = False) -> Path:
    """Execute the sweep and write the CSV; returns the output path."""
    if parallel:
        with ThreadPoolExecutor() as pool:
            rows = list(pool.map(lambda v: _sweep_point(config, v), config.axis_values))
    else:
        rows = [_sweep_point(config, v) for v in config.axis_values]

    out = Path(config.output_path)
    fixed = " ".join(f"{k}={_fmt(float(v))}" for k, v in sorted(config.fixed_params.items()))
    lines = [
        f"# tpa-metrology {_pkg_version}",
        f"# state_family={config.state_family} observable={config.observable} "
        f"axis={config.sweep_axis} tail_tol={_fmt(config.tail_tol)}",
        f"# fixed: {fixed}" if fixed else "# fixed:",
        ",".join(CSV_COLUMNS),
    ]
    for row in rows:
        lines.append(",".join(row[c] for c in CSV_COLUMNS))
        if row["warnings"]:
            print(f"warning: axis={row['axis_value']}: {row['warnings']}", file=sys.stderr)
    out.write_text("\n".join(lines) + "\n")
    return out


def load_sweep_config(
    path: str | Path,
    overrides: dict[str, str] | None = None,
    output: str | None = None,
) -> SweepConfig:
    """Read a sweep config file: [sweep] section plus optional [fixed] section.

    Overrides use dotted keys ("sweep.axis", "fixed.eta"); bare keys address
    the [sweep] section.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ValueError(f"cannot read sweep config {path!r}")
    if "sweep" not in parser:
        raise ValueError("config must contain a [sweep] section")
    sweep = dict(parser["sweep"])
    fixed = {k: float(v) for k, v in parser["fixed"].items()} if "fixed" in parser else {}
    for key, val in (overrides or {}).items():
        section, _, name = key.rpartition(".")
        if section in ("", "sweep"):
            sweep[name] = val
        elif section == "fixed":
            fixed[name] = float(val)
        else:
            raise ValueError(f"unknown override section {section!r}")

    if "values" in sweep:
        values = tuple(float(tok) for tok in sweep["values"].replace(",", " ").split())
    else:
        try:
            start, stop, num = float(sweep["start"]), float(sweep["stop"]), int(sweep["num"])
        except KeyError as exc:
            raise ValueError("config needs 'values' or start/stop/num") from exc
        if sweep.get("spacing", "linear") == "log":
            values = tuple(np.geomspace(start, stop, num))
        else:
            values = tuple(np.linspace(start, stop, num))

    return SweepConfig(
        state_family=sweep.get("state_family", "sv"),
        observable=sweep.get("observable", "photon_number"),
        sweep_axis=sweep.get("axis", "nbar"),
        axis_values=values,
        fixed_params=fixed,
        output_path=output or sweep.get("output", "sweep.csv"),
        tail_tol=float(sweep.get("tail_tol", 1e-10)),
    )
