"""Experiment drivers: sweeps over (N, T), magnetization time series,
ramp-versus-sudden comparisons and bound verification.

Each driver takes an :class:`~finitequench.config.ExperimentConfig` and
returns plain result objects; the ``write_*`` helpers turn them into CSV or
JSON files. Floats in CSV files are written positionally with 12 significant
digits so repeated runs produce identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .dyson_bounds import (BoundSample, default_sample_pairs, interaction_norm_defect,
                           verify_coefficient_bounds, verify_propagator_bound)
from .equilibration import (BOUND_RTOL, EquilibrationReport, average_state_from_limit,
                            expectation_from_coefficients, expectation_series,
                            fluctuation_chain, octave_discrepancy, quench_effective_dimension,
                            running_average, window_average)
from .errors import InvalidArgumentError, NumericalError
from .evolution import evolve, ground_state
from .protocols import ProtocolKind, Quench, verify_certificate
from .spectral import (check_gap_degeneracy, coefficients, diagonalize,
                       rotate_degenerate_blocks)
from .spin_algebra import build_hamiltonian_parts, operator_norm

__all__ = [
    "Cell",
    "CellOutcome",
    "SweepResult",
    "TimeseriesResult",
    "CompareResult",
    "BoundReport",
    "format_float",
    "build_quench",
    "averaging_window",
    "analyze_cell",
    "run_sweep",
    "run_timeseries",
    "quench_compare",
    "run_verify_bounds",
    "write_sweep",
    "write_timeseries",
    "write_compare",
    "write_bound_report",
]

SUMMARY_COLUMNS = ("N", "T", "d_eff", "bound", "fluct_empirical", "fluct_closed",
                   "bound_satisfied", "gap_nondegenerate", "convergence_diag")
SERIES_CHUNK = 256


def format_float(x) -> str:
    """Positional notation with 12 significant digits."""
    x = float(x)
    if not math.isfinite(x):
        return str(x)
    if x == 0:
        return "0"
    return np.format_float_positional(x, precision=12, unique=False, fractional=False, trim="-")


def _cell_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell_value(v) for v in row])
    return buf.getvalue()


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        # mkstemp creates 0600; give results the usual umask permissions.
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _json_text(data) -> str:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return str(v)
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        return v
    return json.dumps(clean(data), indent=2, sort_keys=True, default=_json_default) + "\n"


def build_quench(config: ExperimentConfig, n: int | None = None, T: float | None = None):
    """Quench and observable for chain length ``n`` and ramp duration ``T``."""
    chain = config.chain.spec(n)
    parts = build_hamiltonian_parts(chain)
    quench = Quench(parts, config.protocol.build(T), chain.j1_final, chain.j2_final)
    a = config.observable.operator(chain.n_sites, chain.spin_convention)
    return quench, a


def averaging_window(energies: np.ndarray, config: ExperimentConfig) -> float:
    """Window length W = min(max(min_window, periods * 2 pi / min spacing), max_window)."""
    avg = config.averaging
    spacing = np.diff(np.sort(energies))
    spacing = spacing[spacing > 0]
    w = avg.min_window
    if len(spacing):
        w = max(w, avg.periods * 2 * np.pi / spacing.min())
    return float(min(w, avg.max_window))


def _signal(c, energies, a_eig, t0, w, oversample):
    """<A>(t) on [t0, t0 + 2 w] sampled finely enough for the energy band."""
    band = float(energies.max() - energies.min()) if len(energies) > 1 else 0.0
    h = w / 2000 if band == 0 else min(w / 2000, np.pi / (oversample * band))
    # An odd sample count puts the half-window end on the grid.
    n_samples = 2 * int(np.ceil(w / h)) + 1
    times = t0 + np.linspace(0.0, 2 * w, n_samples)
    return times, expectation_from_coefficients(c, energies, a_eig, times, SERIES_CHUNK)


def _state_at_switch(quench, psi0, config, spec):
    t_switch = quench.settle_time(config.integrator.tail_cutoff)
    if t_switch == 0:
        return psi0, 0.0, 0.0, 0.0, 0
    traj = evolve(quench, psi0, t_switch, config.integrator, [0.0, t_switch], spec)
    return traj.psi[-1], t_switch, traj.tail_error, traj.norm_defect, traj.n_steps


def analyze_cell(config: ExperimentConfig, n: int, T: float) -> EquilibrationReport:
    """Full pipeline for one (N, T): evolve, average, bound and sample the signal."""
    avg = config.averaging
    quench, a = build_quench(config, n, T)
    gs = ground_state(quench.parts.h_static, avg.degeneracy_tol)
    spec = diagonalize(quench.h_final, avg.degeneracy_tol)
    psi_sw, t_switch, tail_error, norm_defect, n_steps = _state_at_switch(quench, gs.vector, config, spec)

    psi_inf = spec.propagate(psi_sw, -t_switch)
    rot = rotate_degenerate_blocks(spec, psi_inf)
    c = coefficients(psi_inf, rot)
    rho = average_state_from_limit(c, rot)
    a_norm = operator_norm(a)
    chain = fluctuation_chain(c, a, rot, a_norm)
    d_eff = rho.d_eff
    bound = a_norm**2 / d_eff
    try:
        gap = check_gap_degeneracy(spec, avg.gap_tol, avg.gap_scan_max_levels)
    except InvalidArgumentError:
        gap = None

    # Post-switch signal from the frozen level amplitudes.
    lead = rot.lead_vectors
    c_lead = c[rot.lead_indices]
    keep = np.abs(c_lead) > avg.amplitude_floor
    energies = rot.distinct_energies[keep]
    vecs = lead[:, keep]
    a_eig = vecs.conj().T @ (a @ vecs)
    a_bar = float(np.trace(rho.rho @ a).real)
    w = averaging_window(energies, config)
    for doublings in range(avg.max_doublings + 1):
        times, signal = _signal(c_lead[keep], energies, a_eig, t_switch, w, avg.oversample)
        win_half, win_full = (t_switch, t_switch + w), (t_switch, t_switch + 2 * w)
        fl_half = float(window_average(times, (signal - a_bar) ** 2, win_half))
        fl_full = float(window_average(times, (signal - a_bar) ** 2, win_full))
        diag = abs(fl_full - fl_half) / max(fl_full, 1e-300) if abs(fl_full - fl_half) > 1e-14 else 0.0
        if diag <= avg.convergence_tol:
            break
        w *= 2
    else:
        w /= 2
    mean_half = float(window_average(times, signal, win_half))
    mean_full = float(window_average(times, signal, win_full))
    running = running_average(times, signal)

    extras = {
        "N": n,
        "T": float(T),
        "protocol": quench.protocol.kind.value,
        "observable": config.observable.kind,
        "d_eff_quench_formula": quench_effective_dimension(gs.vector, spec),
        "a_bar": a_bar,
        "time_average": mean_full,
        "time_average_half_window": mean_half,
        "time_average_distance": abs(mean_full - a_bar),
        "time_average_distance_half_window": abs(mean_half - a_bar),
        "time_average_envelope": octave_discrepancy(times, running, a_bar, 2 * w),
        "time_average_envelope_half_window": octave_discrepancy(times, running, a_bar, w),
        "fluct_empirical_half_window": fl_half,
        "empirical_converged": diag <= avg.convergence_tol,
        "window": [win_full[0], win_full[1]],
        "n_samples": len(times),
        "window_doublings": doublings,
        "levels_kept": int(keep.sum()),
        "bound_chain": list(chain.values),
        "bound_chain_monotone": chain.monotone(),
        "t_switch": t_switch,
        "tail_error": tail_error,
        "norm_defect": norm_defect,
        "n_steps": n_steps,
        "ground_state_degenerate": gs.degenerate,
        "gap_scan_skipped": gap is None,
    }
    return EquilibrationReport(
        d_eff=d_eff, fluct_empirical=fl_full, fluct_closed=chain.closed, bound=bound,
        bound_satisfied=chain.closed <= bound * (1 + BOUND_RTOL), gap_report=gap,
        a_norm=a_norm, convergence_diag=diag, extras=extras)


@dataclass(frozen=True)
class Cell:
    n: int
    T: float

    @property
    def stem(self) -> str:
        return f"cell_N{self.n:02d}_T{format_float(self.T)}"


@dataclass
class CellOutcome:
    cell: Cell
    status: str
    report: EquilibrationReport | None = None
    error: str | None = None

    @property
    def bound_violated(self) -> bool:
        r = self.report
        return r is not None and r.gap_nondegenerate is not False and not r.bound_satisfied

    def to_dict(self) -> dict:
        out = {"N": self.cell.n, "T": self.cell.T, "status": self.status, "error": self.error}
        if self.report is not None:
            out["report"] = self.report.to_dict()
        return out


def _run_cell(args) -> CellOutcome:
    config, cell = args
    try:
        return CellOutcome(cell, "ok", analyze_cell(config, cell.n, cell.T))
    except (NumericalError, np.linalg.LinAlgError) as exc:
        return CellOutcome(cell, "numerical_failure", error=f"{type(exc).__name__}: {exc}")
    except Exception as exc:  # noqa: BLE001 - recorded per cell, sweep continues
        return CellOutcome(cell, "error", error=f"{type(exc).__name__}: {exc}")


@dataclass
class SweepResult:
    outcomes: list[CellOutcome]
    paths: list[Path] = field(default_factory=list)

    def rows(self):
        for o in self.outcomes:
            r = o.report
            if r is None:
                yield (o.cell.n, o.cell.T) + (None,) * (len(SUMMARY_COLUMNS) - 2)
            else:
                yield (o.cell.n, o.cell.T, r.d_eff, r.bound, r.fluct_empirical, r.fluct_closed,
                       r.bound_satisfied, r.gap_nondegenerate, r.convergence_diag)

    def get(self, n: int, T: float) -> CellOutcome:
        for o in self.outcomes:
            if o.cell.n == n and o.cell.T == T:
                return o
        raise KeyError((n, T))

    @property
    def any_failure(self) -> bool:
        return any(o.status != "ok" for o in self.outcomes)

    @property
    def any_violation(self) -> bool:
        return any(o.bound_violated for o in self.outcomes)


def run_sweep(config: ExperimentConfig, jobs: int = 1, out_dir=None, fmt: str | None = None,
              n_values=None, T_values=None) -> SweepResult:
    """Analyze every (N, T) cell; failures are recorded and the sweep goes on."""
    cells = [Cell(int(n), float(T))
             for n in (n_values or config.sweep.n_values)
             for T in (T_values or config.sweep.T_values)]
    work = [(config, c) for c in cells]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_cell, work))
    else:
        outcomes = [_run_cell(w) for w in work]
    result = SweepResult(outcomes)
    if out_dir is not None:
        result.paths = write_sweep(result, out_dir, fmt or config.output.format)
    return result


def write_sweep(result: SweepResult, out_dir, fmt: str = "csv") -> list[Path]:
    out_dir = Path(out_dir)
    paths = []
    for o in result.outcomes:
        p = out_dir / "cells" / f"{o.cell.stem}.json"
        _atomic_write(p, _json_text(o.to_dict()))
        paths.append(p)
    if fmt == "json":
        index = [{"N": o.cell.n, "T": o.cell.T, "status": o.status, "error": o.error,
                  "file": f"cells/{o.cell.stem}.json",
                  **dict(zip(SUMMARY_COLUMNS[2:], row[2:]))}
                 for o, row in zip(result.outcomes, result.rows())]
        summary = out_dir / "summary.json"
        _atomic_write(summary, _json_text(index))
    else:
        summary = out_dir / "summary.csv"
        _atomic_write(summary, _csv_text(SUMMARY_COLUMNS, result.rows()))
    return [summary] + paths


@dataclass
class TimeseriesResult:
    n: int
    T: float
    times: np.ndarray
    values: np.ndarray
    lam: np.ndarray
    in_ramp: np.ndarray
    ramp_end: float
    norm_defect: float

    @property
    def post_ramp(self) -> np.ndarray:
        return self.values[self.times >= self.ramp_end]

    @property
    def post_ramp_std(self) -> float:
        return float(np.std(self.post_ramp))

    @property
    def post_ramp_amplitude(self) -> float:
        v = self.post_ramp
        return float(v.max() - v.min())

    def rows(self):
        return zip(self.times, self.values, self.lam, self.in_ramp.astype(int))


def run_timeseries(config: ExperimentConfig, n: int | None = None, T: float | None = None,
                   out_dir=None, fmt: str | None = None) -> TimeseriesResult:
    """<A>(t) from the ground state of the static part through and after the ramp."""
    quench, a = build_quench(config, n, T)
    gs = ground_state(quench.parts.h_static, config.averaging.degeneracy_tol)
    ramp_end = quench.protocol.ramp_end
    t_end = ramp_end + config.timeseries.post_ramp_time
    times = np.union1d(np.linspace(0.0, t_end, config.timeseries.points), [ramp_end])
    traj = evolve(quench, gs.vector, t_end, config.integrator, times)
    values = expectation_series(traj.psi, a)
    lam = np.array([quench.lam(t) for t in times])
    in_ramp = (times <= ramp_end) & (quench.protocol.kind is not ProtocolKind.SUDDEN)
    result = TimeseriesResult(n or config.chain.n, quench.protocol.ramp_end,
                              times, values, lam, in_ramp, ramp_end, traj.norm_defect)
    if out_dir is not None:
        write_timeseries(result, out_dir, fmt or config.output.format)
    return result


def write_timeseries(result: TimeseriesResult, out_dir, fmt: str = "csv") -> Path:
    stem = f"timeseries_N{result.n:02d}_T{format_float(result.T)}"
    if fmt == "json":
        path = Path(out_dir) / f"{stem}.json"
        _atomic_write(path, _json_text({
            "N": result.n, "T": result.T, "t": result.times, "expectation": result.values,
            "lambda": result.lam, "in_ramp_flag": result.in_ramp.astype(int),
            "post_ramp_std": result.post_ramp_std}))
    else:
        path = Path(out_dir) / f"{stem}.csv"
        _atomic_write(path, _csv_text(("t", "expectation", "lambda", "in_ramp_flag"), result.rows()))
    return path


@dataclass
class CompareResult:
    n: int
    T: float
    times: np.ndarray
    ramp: np.ndarray
    sudden: np.ndarray
    d_eff_ramp: float
    d_eff_quench: float

    @property
    def max_difference(self) -> float:
        return float(np.abs(self.ramp - self.sudden).max())

    @property
    def d_eff_relative_difference(self) -> float:
        return abs(self.d_eff_ramp - self.d_eff_quench) / self.d_eff_quench

    def summary(self) -> dict:
        return {"N": self.n, "T": self.T, "max_pointwise_difference": self.max_difference,
                "d_eff_ramp": self.d_eff_ramp, "d_eff_quench_formula": self.d_eff_quench,
                "d_eff_relative_difference": self.d_eff_relative_difference}


def quench_compare(config: ExperimentConfig, n: int | None = None, T: float | None = None,
                   out_dir=None, fmt: str | None = None) -> CompareResult:
    """Linear ramp of duration T against a sudden quench of the same couplings."""
    ramp_cfg = config.with_overrides(protocol={"kind": "linear_ramp"})
    sudden_cfg = config.with_overrides(protocol={"kind": "sudden"})
    ramp_q, a = build_quench(ramp_cfg, n, T)
    sudden_q, _ = build_quench(sudden_cfg, n, T)
    spec = diagonalize(ramp_q.h_final, config.averaging.degeneracy_tol)
    gs = ground_state(ramp_q.parts.h_static, config.averaging.degeneracy_tol)
    t_end = ramp_q.protocol.ramp_end + config.timeseries.post_ramp_time
    times = np.linspace(0.0, t_end, config.timeseries.points)
    ramp = evolve(ramp_q, gs.vector, t_end, config.integrator, times, spec)
    sudden = evolve(sudden_q, gs.vector, t_end, config.integrator, times, spec)

    T_end = ramp_q.protocol.ramp_end
    psi_T = evolve(ramp_q, gs.vector, T_end, config.integrator, [0.0, T_end], spec).psi[-1]
    psi_inf = spec.propagate(psi_T, -T_end)
    rot = rotate_degenerate_blocks(spec, psi_inf)
    d_eff_ramp = average_state_from_limit(coefficients(psi_inf, rot), rot).d_eff
    result = CompareResult(n or config.chain.n, ramp_q.protocol.ramp_end, times,
                           expectation_series(ramp.psi, a), expectation_series(sudden.psi, a),
                           d_eff_ramp, quench_effective_dimension(gs.vector, spec))
    if out_dir is not None:
        write_compare(result, out_dir, fmt or config.output.format)
    return result


def write_compare(result: CompareResult, out_dir, fmt: str = "csv") -> Path:
    stem = f"compare_N{result.n:02d}_T{format_float(result.T)}"
    if fmt == "json":
        path = Path(out_dir) / f"{stem}.json"
        _atomic_write(path, _json_text({**result.summary(), "t": result.times,
                                        "ramp": result.ramp, "sudden": result.sudden}))
    else:
        path = Path(out_dir) / f"{stem}.csv"
        rows = zip(result.times, result.ramp, result.sudden, result.ramp - result.sudden)
        _atomic_write(path, _csv_text(("t", "ramp", "sudden", "difference"), rows))
        _atomic_write(Path(out_dir) / f"{stem}_summary.json", _json_text(result.summary()))
    return path


@dataclass
class BoundReport:
    n: int
    certificate: dict
    certificate_samples: list[BoundSample]
    propagator: list[BoundSample]
    coefficient_pairs: list[BoundSample]
    coefficient_limit: list[BoundSample]
    interaction_norm_defect: float

    def groups(self):
        return {"certificate": self.certificate_samples, "propagator": self.propagator,
                "coefficient_pair": self.coefficient_pairs,
                "coefficient_limit": self.coefficient_limit}

    @property
    def n_failed(self) -> int:
        return sum(not s.passed for g in self.groups().values() for s in g)

    @property
    def all_passed(self) -> bool:
        return self.n_failed == 0

    def to_dict(self) -> dict:
        return {"N": self.n, "certificate": self.certificate, "all_passed": self.all_passed,
                "n_failed": self.n_failed, "interaction_norm_defect": self.interaction_norm_defect,
                "samples": {k: [s.to_dict() for s in v] for k, v in self.groups().items()}}


def run_verify_bounds(config: ExperimentConfig, n: int | None = None, out_dir=None,
                      fmt: str | None = None) -> BoundReport:
    """Check the certificate and the Dyson bounds along the configured protocol.

    Raises :class:`UncertifiableProtocolError` for protocols without a certificate.
    """
    quench, _ = build_quench(config, n)
    cert = quench.certificate().scaled(config.protocol.certificate_k_scale)
    t_max = config.bounds.t_max_factor * cert.t_star
    pairs = default_sample_pairs(cert.t_star, t_max, config.bounds.samples)
    spec = diagonalize(quench.h_final, config.averaging.degeneracy_tol)
    gs = ground_state(quench.parts.h_static, config.averaging.degeneracy_tol)

    check = verify_certificate(cert, quench.parts, quench.protocol,
                               (quench.j1_final, quench.j2_final))
    cert_samples = [BoundSample(float(t), math.inf, float(l), float(r))
                    for t, l, r in zip(check.times, check.lhs, check.rhs)]
    prop = verify_propagator_bound(quench, cert, config.integrator, pairs, t_max, spectral=spec)
    coef_pairs, coef_limit = verify_coefficient_bounds(quench, gs.vector, cert, config.integrator,
                                                       pairs, t_max, spectral=spec)
    defect = interaction_norm_defect(quench, sorted({t for t, _ in pairs}), spec)
    report = BoundReport(n or config.chain.n,
                         {"K": cert.K, "epsilon": cert.epsilon, "t_star": cert.t_star,
                          "k_scale": config.protocol.certificate_k_scale},
                         cert_samples, prop, coef_pairs, coef_limit, defect)
    if out_dir is not None:
        write_bound_report(report, out_dir, fmt or config.output.format)
    return report


def write_bound_report(report: BoundReport, out_dir, fmt: str = "csv") -> Path:
    stem = f"bounds_N{report.n:02d}"
    if fmt == "json":
        path = Path(out_dir) / f"{stem}.json"
        _atomic_write(path, _json_text(report.to_dict()))
        return path
    path = Path(out_dir) / f"{stem}.csv"
    rows = [(name, s.t, s.tau, s.lhs, s.rhs, s.slack, s.passed)
            for name, group in report.groups().items() for s in group]
    _atomic_write(path, _csv_text(("check", "t", "tau", "lhs", "rhs", "slack", "pass"), rows))
    return path
