"""Single runs, seeded sweeps and hypothesis checks."""

from __future__ import annotations

import json
import logging
import math
import os
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .. import asymptotics as asy
from ..canonical import closed_form, integrate_canonical, trajectory_csv_text
from ..engine import (Bump, H1Warning, ModelParams, SimState, advance, dt_stable,
                      symmetry_defect)
from ..errors import SingularityError, StabilityError, StateError
from ..grid import argmax, field_csv_text, fmt17
from ..selector import SelectionFn, bind, parse_selection, to_source
from .config import SCHEMA_VERSION, RunConfig
from .rng import SplitMix64

log = logging.getLogger(__name__)

NUMERICAL_ERRORS = (StabilityError, StateError, SingularityError)

_KNOWN = {
    to_source(parse_selection("x^2+y^2")): "sum_sq",
    to_source(parse_selection("(x+y)^2")): "squared_sum",
}


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header, rows) -> str:
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(v if isinstance(v, str) else
                            (str(v) if isinstance(v, (int, np.integer)) else fmt17(v))
                            for v in row))
    return "\n".join(out) + "\n"


def setup(cfg: RunConfig) -> tuple[SelectionFn, ModelParams, SimState]:
    """Bind the selection, derive parameters and build the initial state."""
    grid = cfg.grid
    m = bind(cfg.m, grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", H1Warning)
        p = ModelParams.for_selection(cfg.r, cfg.kappa, cfg.epsilon, m, mode=cfg.mode)
    state = cfg.initial_condition.state(grid, p)
    return m, p, state


def dominant_bump(cfg: RunConfig):
    return max(cfg.ic, key=lambda b: b.weight)  # first on ties


# --------------------------------------------------------------------------
# hypotheses
# --------------------------------------------------------------------------

def hypotheses_report(m: SelectionFn, p: ModelParams, state: SimState) -> dict:
    grid = state.grid
    rep = {}
    rep["H1"] = {
        "pass": p.h1 and m.min_m_on_grid >= 0,
        "four_sup_m": 4 * m.sup_m_on_grid, "r": p.r,
        "min_m_on_grid": m.min_m_on_grid,
    }
    view = asy.hopf_cole(state.n, p.epsilon)
    u = np.where(view.clamped, np.nan, view.u.values)
    gx, gy = np.gradient(u, grid.hx, grid.hy)
    w1inf = float(max(np.nanmax(np.abs(u)), np.nanmax(np.abs(gx)), np.nanmax(np.abs(gy))))
    # the Lipschitz constant M is not specified; only the measured norm is reported
    rep["H2"] = {"pass": math.isfinite(w1inf), "w1inf_u0_unclamped": w1inf}
    rho0 = state.rho
    rep["H3"] = {"pass": p.rho_minus < rho0 < p.rho_plus, "rho0": rho0,
                 "rho_minus": p.rho_minus, "rho_plus": p.rho_plus}
    nu = asy.nu_field(state.n)
    h4 = {"nu0_min": nu.observed_min, "nu0_max": nu.observed_max}
    if p.h1:
        h4.update(pass_=p.nu_m <= nu.observed_min and nu.observed_max <= p.nu_M,
                  nu_m=p.nu_m, nu_M=p.nu_M)
    else:
        h4.update(pass_=None, skipped="H1 fails, no admissible nu bounds")
    h4["pass"] = h4.pop("pass_")
    rep["H4"] = h4
    if p.mode == "diploid":
        rep["diploid_symmetry"] = {
            "pass": m.is_symmetric and symmetry_defect(state.n) <= 1e-12,
            "m_symmetric": m.is_symmetric, "n0_defect": symmetry_defect(state.n),
        }
    return rep


def check_hypotheses(cfg: RunConfig) -> dict:
    m, p, state = setup(cfg)
    return hypotheses_report(m, p, state)


# --------------------------------------------------------------------------
# single run
# --------------------------------------------------------------------------

@dataclass
class InvariantTally:
    checked: dict = field(default_factory=dict)

    def add(self, name: str, active: bool, ok: bool = True, reason: str = ""):
        rec = self.checked.setdefault(
            name, {"status": "checked" if active else "skipped", "samples": 0, "violations": 0})
        if not active:
            rec["reason"] = reason
            return
        rec["samples"] += 1
        if not ok:
            rec["violations"] += 1


def _schedule(cfg: RunConfig) -> list[float]:
    k = math.floor(cfg.t_max / cfg.sample_interval + 1e-9)
    times = {round(i * cfg.sample_interval, 12) for i in range(k + 1)}
    times |= set(cfg.snapshot_times) | {cfg.t_max}
    return sorted(t for t in times if 0 <= t <= cfg.t_max)


@dataclass
class RunResult:
    out: Path
    summary: dict
    rows: list
    final: SimState
    m: SelectionFn
    trajectory: object = None


def simulate(cfg: RunConfig, out: Optional[Path] = None, on_step=None) -> RunResult:
    """Run the PDE with diagnostics; writes artifacts when ``out`` is given.

    ``on_step`` is called with every accepted state, not only sampled ones.
    """
    m, p, state = setup(cfg)
    hyp = hypotheses_report(m, p, state)
    grid = state.grid
    dt_max = dt_stable(p, m, cfg.cfl)
    eps = p.epsilon
    tally = InvariantTally()
    rho_tol = 1e-3 * p.rho_plus
    umax_bound = 3 * eps * math.log(1 / eps) if eps < 1 else math.inf
    rho_active = bool(hyp["H1"]["pass"] and hyp["H3"]["pass"])
    nu_active = bool(hyp["H1"]["pass"] and hyp["H4"]["pass"])
    snaps = {round(t, 12) for t in cfg.snapshot_times}
    rows = []
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    def sample(s: SimState):
        snap = asy.snapshot(s, m, p, cfg.mode_threshold)
        rows.append(snap)
        tally.add("rho_bounds", rho_active,
                  p.rho_minus - rho_tol <= snap.rho <= p.rho_plus + rho_tol,
                  "needs H1 and H3")
        tally.add("nu_bounds", nu_active,
                  p.nu_m * (1 - 1e-3) <= snap.nu_min and snap.nu_max <= p.nu_M * (1 + 1e-3)
                  if nu_active else True, "needs H1 and H4")
        tally.add("u_max_bound", p.h1, abs(snap.u_max) <= umax_bound, "needs H1")
        tally.add("positivity", True, bool(np.all(s.n.values > 0)))
        if p.mode == "diploid":
            tally.add("diploid_symmetry", True, symmetry_defect(s.n) <= 1e-12)
        if out is not None and round(s.t, 12) in snaps:
            atomic_write(out / f"field_t{s.t:.6f}.csv", field_csv_text(s.n))

    sample(state)
    for t in _schedule(cfg)[1:]:
        state = advance(state, t, m, p, dt_max=dt_max, on_step=on_step)
        sample(state)

    xa, ya = argmax(state.n)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "preset": cfg.preset,
        "m": cfg.m,
        "mode": cfg.mode,
        "t_final": state.t,
        "steps": state.steps,
        "dt": cfg.t_max / state.steps if state.steps else None,
        "dt_stable": dt_max,
        "final_argmax": [xa, ya],
        "final_rho": state.rho,
        "floor_activations": state.floor_hits,
        "invariants": tally.checked,
        "hypotheses": hyp,
        "params": {"r": p.r, "kappa": p.kappa, "epsilon": p.epsilon, "sup_m": p.sup_m,
                   "rho_minus": p.rho_minus, "rho_plus": p.rho_plus, "nu_m": _num(p.nu_m),
                   "nu_M": _num(p.nu_M), "delta": p.delta},
    }
    traj = None
    if cfg.canonical:
        b = dominant_bump(cfg)
        try:
            traj = integrate_canonical(b.x0, b.y0, m, cfg.t_max, cfg.canonical_dt, mode=cfg.mode)
            summary["canonical"] = {
                "start": [b.x0, b.y0], "final": [traj.xbar, traj.ybar],
                "discrepancy_inf": max(abs(xa - traj.xbar), abs(ya - traj.ybar)),
                "moving_point_approximation": traj.moving_point_approx,
            }
            if out is not None:
                atomic_write(out / "canonical.csv", trajectory_csv_text(traj))
        except SingularityError as exc:
            summary["canonical"] = {"error": str(exc), "t": exc.t}
        key = _KNOWN.get(to_source(m.m))
        if key is not None and (cfg.mode == "haploid" or b.x0 == b.y0):
            cf = closed_form(key, b.x0, b.y0, state.t, cfg.mode)
            summary["closed_form"] = {
                "example": key, "value": list(cf),
                "argmax_error_inf": max(abs(xa - cf[0]), abs(ya - cf[1])),
                "grid_h": max(grid.hx, grid.hy),
            }
    if out is not None:
        atomic_write(out / "resolved.cfg", cfg.to_text())
        atomic_write(out / "diagnostics.csv",
                     _csv(asy.Snapshot.FIELDS, [[getattr(r, k) for k in asy.Snapshot.FIELDS]
                                                for r in rows]))
        atomic_write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return RunResult(out=out, summary=summary, rows=rows, final=state, m=m, trajectory=traj)


def _num(v):
    return None if isinstance(v, float) and math.isnan(v) else v


def run_single(cfg: RunConfig) -> RunResult:
    return simulate(cfg, Path(cfg.out))


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    count: int
    box: tuple = (-2.0, 2.0, -2.0, 2.0)
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be at least 1")

    def starts(self) -> list[tuple[float, float]]:
        rng = SplitMix64(self.seed)
        xl, xh, yl, yh = self.box
        pts = []
        for _ in range(self.count):
            x = rng.uniform(xl, xh)
            y = rng.uniform(yl, yh)
            pts.append((x, y))
        return pts


SWEEP_FIELDS = ("index", "x0", "y0", "status", "pde_x", "pde_y", "ode_x", "ode_y",
                "discrepancy", "ode_t_final", "ode_x_final", "ode_y_final")
TRAJ_FIELDS = ("index", "source", "t", "x", "y")


def _pair(args):
    cfg, index, x0, y0 = args
    if cfg.mode == "diploid":
        y0 = x0
    c = replace(cfg, ic=(Bump(x0, y0),), canonical=False)
    row = {"index": index, "x0": x0, "y0": y0}
    traj_rows = []
    try:
        res = simulate(c)
        pde = res.final
        px, py = argmax(pde.n)
        traj_rows += [(index, "pde", r.t, r.xbar, r.ybar) for r in res.rows]
        t_ode = cfg.ode_t_max or cfg.t_max
        t_ode = max(t_ode, cfg.t_max)
        ode = integrate_canonical(x0, y0, res.m, t_ode, cfg.canonical_dt, mode=cfg.mode)
        ts = np.asarray(ode.ts)
        ox = float(np.interp(cfg.t_max, ts, ode.xs))
        oy = float(np.interp(cfg.t_max, ts, ode.ys))
        for r in res.rows:
            traj_rows.append((index, "ode", r.t, float(np.interp(r.t, ts, ode.xs)),
                              float(np.interp(r.t, ts, ode.ys))))
        row.update(status="ok", pde_x=px, pde_y=py, ode_x=ox, ode_y=oy,
                   discrepancy=max(abs(px - ox), abs(py - oy)),
                   ode_t_final=ode.t, ode_x_final=ode.xbar, ode_y_final=ode.ybar)
    except NUMERICAL_ERRORS as exc:
        row["status"] = f"error:{type(exc).__name__}"
        row["message"] = str(exc)
    return row, traj_rows


def run_sweep(cfg: RunConfig, sweep: Optional[SweepSpec] = None) -> dict:
    """PDE and canonical ODE from the same seeded random starts.

    Results are ordered by index whatever the number of workers, so the
    written CSVs depend only on the resolved configuration.
    """
    sweep = sweep or SweepSpec(cfg.sweep_count, tuple(cfg.sweep_box), cfg.seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    bind(cfg.m, cfg.grid)  # surface expression errors before spawning workers
    tasks = [(cfg, i, x, y) for i, (x, y) in enumerate(sweep.starts())]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_pair, tasks))
    else:
        results = [_pair(t) for t in tasks]
    rows, traj = [], []
    for row, tr in results:
        rows.append(row)
        traj.extend(tr)
    table = []
    for row in rows:
        table.append([row["index"], row["x0"], row["y0"], row["status"]]
                     + [row.get(k, math.nan) for k in SWEEP_FIELDS[4:]])
    failed = [r for r in rows if r["status"] != "ok"]
    summary = {
        "schema_version": SCHEMA_VERSION,
        "preset": cfg.preset, "m": cfg.m, "mode": cfg.mode,
        "count": sweep.count, "seed": sweep.seed, "box": list(sweep.box),
        "failed": len(failed),
        "failures": [{"index": r["index"], "status": r["status"], "message": r.get("message")}
                     for r in failed],
        "max_discrepancy": max((r["discrepancy"] for r in rows if r["status"] == "ok"),
                               default=None),
    }
    atomic_write(out / "resolved.cfg", cfg.to_text())
    atomic_write(out / "sweep.csv", _csv(SWEEP_FIELDS, table))
    atomic_write(out / "trajectories.csv", _csv(TRAJ_FIELDS, traj))
    atomic_write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return {"summary": summary, "rows": rows}
