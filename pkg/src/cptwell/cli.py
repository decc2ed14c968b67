"""Command-line front end.

Every subcommand writes a CSV whose ``#`` header echoes the effective
configuration and the derived drive parameters, so a trace can be
regenerated from its own file.  Exit codes: 0 success, 2 configuration
error, 3 numerical or tolerance failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import ast
import csv
import dataclasses
import io
import logging
import math
import operator
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import analytic, drive, master, spectrum, tdse
from .errors import ConfigError, LevelNameError, NumericalError

log = logging.getLogger("cptwell")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
MASTER_TAU_END = 5000.0
DEFAULT_RATIOS = "0.1pi,0.2pi,0.35pi,0.5pi"
QUANTITIES = ("pop_0p", "pop_0m", "pop_3p", "doublet_total")

_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}


def parse_number(text) -> float:
    """Float from plain numbers or small expressions such as ``0.35pi`` or ``2*pi/200``."""
    if isinstance(text, (int, float)):
        return float(text)
    src = str(text).strip().replace("π", "pi")
    # "0.35pi" -> "0.35*pi"
    src = re.sub(r"(\d|\))\s*pi\b", r"\1*pi", src)

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError

    try:
        return float(ev(ast.parse(src, mode="eval")))
    except (SyntaxError, ValueError, ZeroDivisionError, TypeError, OverflowError):
        raise ConfigError(f"cannot read a number from {text!r}") from None


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot read a boolean from {text!r}")


@dataclass
class RunConfig:
    alpha: float = 1.735
    n_basis: int = 120
    n_levels: int = 20
    intensity_ratio: float = drive.WORKING_INTENSITY_RATIO
    initial: str = "0+"
    tau_end: float | None = None
    dtau: float = tdse.DEFAULT_DTAU
    stride: int = 20
    gamma: float = 0.01
    margin: float = 0.25
    tolerance: float = 0.02
    compare_on: str = ",".join(QUANTITIES)
    ratios: str = DEFAULT_RATIOS
    nonsecular: bool = True
    printed_rabi: bool = False
    jobs: int = 1
    out: str | None = None

    def validate(self) -> None:
        if self.n_levels < 1 or self.stride < 1 or self.jobs < 1:
            raise ConfigError("n_levels, stride and jobs must be positive")
        for name in ("alpha", "dtau", "margin", "tolerance"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.tau_end is not None and not self.tau_end > 0:
            raise ConfigError("tau_end must be positive")
        if self.intensity_ratio < 0 or self.gamma < 0:
            raise ConfigError("intensity_ratio and gamma must be non-negative")
        bad = set(self.compare_quantities) - set(QUANTITIES)
        if bad:
            raise ConfigError(f"unknown compare quantities {sorted(bad)}")

    @property
    def compare_quantities(self) -> list[str]:
        return [q.strip() for q in self.compare_on.split(",") if q.strip()]

    def grid(self) -> tdse.TimeGrid:
        return tdse.TimeGrid(0.0, self.tau_end, self.dtau)

    def with_window(self, default_end: float = tdse.DEFAULT_TAU_END) -> "RunConfig":
        """Copy with ``tau_end`` resolved to the command default when unset."""
        if self.tau_end is not None:
            return self
        return dataclasses.replace(self, tau_end=default_end)


_CONVERTERS = {
    "alpha": parse_number,
    "n_basis": lambda v: int(parse_number(v)),
    "n_levels": lambda v: int(parse_number(v)),
    "intensity_ratio": parse_number,
    "initial": str,
    "tau_end": parse_number,
    "dtau": parse_number,
    "stride": lambda v: int(parse_number(v)),
    "gamma": parse_number,
    "margin": parse_number,
    "tolerance": parse_number,
    "compare_on": str,
    "ratios": str,
    "nonsecular": parse_bool,
    "printed_rabi": parse_bool,
    "jobs": lambda v: int(parse_number(v)),
    "out": str,
}


def read_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment; dashes equal underscores."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def build_config(file_values: dict, overrides: dict) -> RunConfig:
    cfg = RunConfig()
    for source in (file_values, overrides):
        for key, value in source.items():
            if value is None:
                continue
            if key not in _CONVERTERS:
                raise ConfigError(f"unknown configuration key {key!r}")
            setattr(cfg, key, _CONVERTERS[key](value))
    cfg.validate()
    return cfg


# ---------------------------------------------------------------- helpers


def level_label(k: int) -> str:
    return f"{k // 2}{'+' if k % 2 == 0 else '-'}"


def column_name(k: int) -> str:
    return "pop_" + level_label(k).replace("+", "p").replace("-", "m")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        # shortest repr round-trips exactly
        return repr(float(x))
    return str(x)


class Output:
    """Collects header comments, CSV rows and a human summary."""

    passed = True

    def __init__(self, command: str, cfg: RunConfig):
        self.command = command
        self.cfg = cfg
        self.header: list[str] = [f"cptwell {command}"]
        for f in dataclasses.fields(cfg):
            value = getattr(cfg, f.name)
            if value is not None:
                self.header.append(f"config: {f.name} = {fmt(value)}")
        self.rows: list[list[str]] = []
        self.summary: list[str] = []

    def derived(self, name: str, value) -> None:
        self.header.append(f"derived: {name} = {fmt(value)}")

    def drive_header(self, d: drive.DriveParams, p: analytic.ThreeLevelParams) -> None:
        for name in ("omega_L", "lam", "Omega12", "Omega23", "Delta0", "omega3"):
            self.derived(name, getattr(d, name))
        for name in ("Delta0R", "Omega23R", "deltaR", "OmegaR", "Lambda0", "Lambda2"):
            self.derived(name, getattr(p, name))

    def table(self, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
        self.rows.append(list(columns))
        self.rows.extend([fmt(v) for v in row] for row in rows)

    def render(self) -> str:
        buf = io.StringIO()
        for line in self.header:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerows(self.rows)
        return buf.getvalue()

    def emit(self, stdout, stderr) -> None:
        text = self.render()
        if self.cfg.out:
            with open(self.cfg.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            summary_stream = stdout
        else:
            stdout.write(text)
            summary_stream = stderr
        for line in self.summary:
            summary_stream.write(line + "\n")


def _solution(cfg: RunConfig) -> spectrum.EigenSolution:
    p = spectrum.PotentialParams(cfg.alpha)
    b = spectrum.BasisConfig(cfg.n_basis)
    return spectrum.solve(p, b, max(cfg.n_levels, drive.UPPER + 1))


def _setup(cfg: RunConfig):
    s = _solution(cfg)
    d = drive.calibrate(s, cfg.intensity_ratio)
    return s, d, analytic.renormalize(d)


def _three_level_initial(label: str) -> np.ndarray:
    """Amplitudes on (0+, 0-, 3+) for a label restricted to that subspace."""
    terms = tdse.parse_superposition(label)
    pos = {drive.GROUND: 0, drive.EXCITED: 1, drive.UPPER: 2}
    amps = np.zeros(3, dtype=complex)
    for k, sign in terms:
        if k not in pos:
            raise LevelNameError(f"level {level_label(k)} is outside the three-level model")
        amps[pos[k]] += sign
    n = np.linalg.norm(amps)
    if n == 0:
        raise LevelNameError(f"state {label!r} has zero norm")
    return amps / n


# ---------------------------------------------------------------- commands


def cmd_spectrum(cfg: RunConfig) -> Output:
    s = _solution(cfg)
    out = Output("spectrum", cfg)
    e = s.energies
    omega_L = e[drive.UPPER] - e[drive.EXCITED]
    delta0 = spectrum.doublet_splitting(s, 0)
    ratio_mu = abs(s.dipole[drive.EXCITED, drive.UPPER] / s.dipole[drive.GROUND, drive.EXCITED])
    out.derived("omega_L", omega_L)
    out.derived("Delta0_over_omega_L", delta0 / omega_L)
    out.derived("mu23_over_mu12", ratio_mu)
    out.derived("doublets_below_barrier", spectrum.doublets_below_barrier(s))
    for n in range(s.n_levels // 2):
        out.derived(f"splitting_{n}", spectrum.doublet_splitting(s, n))
    cols = ["index", "label", "energy", "parity"] + [f"x_{j}" for j in range(s.n_levels)]
    out.table(
        cols,
        (
            [k, level_label(k), e[k], int(s.parities[k])] + list(s.dipole[k])
            for k in range(s.n_levels)
        ),
    )
    out.summary.append(
        f"Delta0/omega_L = {delta0 / omega_L:.6e}  mu23/mu12 = {ratio_mu:.6f}  "
        f"omega_L = {omega_L:.10f}  doublets below barrier = {spectrum.doublets_below_barrier(s)}"
    )
    return out


def cmd_calibrate(cfg: RunConfig) -> Output:
    _, d, p = _setup(cfg)
    out = Output("calibrate", cfg)
    rows = [(f"drive.{k}", v) for k, v in dataclasses.asdict(d).items()]
    rows += [(f"renormalized.{k}", v) for k, v in dataclasses.asdict(p).items()]
    rows.append(("renormalized.transfer_period", analytic.transfer_period(p)))
    if d.Omega12 > 0:
        v = drive.validity(d, cfg.margin)
        rows += [(f"validity.{k}", val) for k, val in dataclasses.asdict(v).items()]
        out.summary.append(
            f"Omega12/omega_L = {v.ratio_omega12:.6f}  Omega23/omega_L = {v.ratio_omega23:.6f}  "
            f"Delta0/omega_L = {v.ratio_delta:.6e}  bound = {v.bound:.4f}  satisfied = {fmt(v.satisfied)}"
        )
    out.table(["quantity", "value"], rows)
    return out


def _trace_columns(levels: Sequence[int]) -> list[int]:
    head = [drive.GROUND, drive.EXCITED, drive.UPPER]
    return head + [k for k in levels if k not in head]


def cmd_evolve(cfg: RunConfig) -> Output:
    cfg = cfg.with_window()
    s, d, p = _setup(cfg)
    initial = tdse.prepare_level(s, cfg.initial)
    trace = tdse.evolve(s, d, initial, cfg.grid(), cfg.n_levels, cfg.stride)
    out = Output("evolve", cfg)
    out.drive_header(d, p)
    order = _trace_columns(trace.levels)
    cols = ["tau", "pop_0p", "pop_0m", "pop_3p", "doublet_total"] + [column_name(k) for k in order[3:]]
    pops = np.column_stack([trace.level(k) for k in order])
    dt = trace.doublet_total
    out.table(
        cols,
        ([t, *row[:3], dtot, *row[3:]] for t, row, dtot in zip(trace.taus, pops, dt)),
    )
    out.summary.append(
        f"max pop_3p = {trace.level(drive.UPPER).max():.6f}  min doublet_total = {dt.min():.6f}  "
        f"norm drift = {trace.norm_drift:.2e}"
    )
    return out


def _analytic_pops(p: analytic.ThreeLevelParams, amps0, taus) -> np.ndarray:
    return analytic.propagate_lab(p, amps0, taus).populations.T


def cmd_analytic(cfg: RunConfig) -> Output:
    cfg = cfg.with_window()
    _, d, p = _setup(cfg)
    amps0 = _three_level_initial(cfg.initial)
    g = cfg.grid()
    taus = g.tau_start + g.step * np.arange(0, g.n_steps + 1, cfg.stride)
    if taus[-1] != g.tau_end:
        taus = np.append(taus, g.tau_end)
    pops = _analytic_pops(p, amps0, taus)
    out = Output("analytic", cfg)
    out.drive_header(d, p)
    dt = pops[:, 0] + pops[:, 1]
    out.table(
        ["tau", "pop_0p", "pop_0m", "pop_3p", "doublet_total", "W"],
        ([t, *row, dtot, row[2] - dtot] for t, row, dtot in zip(taus, pops, dt)),
    )
    out.summary.append(
        f"transfer period = {analytic.transfer_period(p):.6f}  "
        f"(deltaR/OmegaR)^2 = {(p.deltaR / p.OmegaR) ** 2 if p.OmegaR else 1.0:.6e}"
    )
    return out


@dataclass(frozen=True)
class CompareReport:
    max_abs_error: dict
    tau_of_max: dict
    tolerance: float
    quantities: tuple = QUANTITIES

    def passed(self, quantities: Iterable[str] | None = None) -> bool:
        qs = self.quantities if quantities is None else tuple(quantities)
        return all(self.max_abs_error[q] <= self.tolerance for q in qs)


def compare_traces(taus, numeric: np.ndarray, exact: np.ndarray, tolerance: float,
                   quantities: Sequence[str] = QUANTITIES) -> CompareReport:
    """Pointwise comparison of ``(n, 3)`` population arrays on (0+, 0-, 3+)."""
    numeric = np.asarray(numeric)
    exact = np.asarray(exact)
    series = {
        "pop_0p": (numeric[:, 0], exact[:, 0]),
        "pop_0m": (numeric[:, 1], exact[:, 1]),
        "pop_3p": (numeric[:, 2], exact[:, 2]),
        "doublet_total": (numeric[:, 0] + numeric[:, 1], exact[:, 0] + exact[:, 1]),
    }
    err, where = {}, {}
    for name, (a, b) in series.items():
        diff = np.abs(a - b)
        i = int(diff.argmax())
        err[name] = float(diff[i])
        where[name] = float(taus[i])
    return CompareReport(err, where, tolerance, tuple(quantities))


def run_compare(cfg: RunConfig) -> tuple[CompareReport, drive.DriveParams, analytic.ThreeLevelParams]:
    cfg = cfg.with_window()
    s, d, p = _setup(cfg)
    amps0 = _three_level_initial(cfg.initial)
    if cfg.n_levels == 3:
        trace = analytic.integrate_three_level(d, amps0, cfg.grid(), cfg.stride)
        numeric = trace.populations
    else:
        full = np.zeros(s.n_levels, dtype=complex)
        full[[drive.GROUND, drive.EXCITED, drive.UPPER]] = amps0
        trace = tdse.evolve(s, d, tdse.StateVector(full), cfg.grid(), cfg.n_levels, cfg.stride)
        numeric = np.column_stack([trace.level(k) for k in (drive.GROUND, drive.EXCITED, drive.UPPER)])
    exact = _analytic_pops(p, amps0, trace.taus)
    report = compare_traces(trace.taus, numeric, exact, cfg.tolerance, cfg.compare_quantities)
    return report, d, p


def cmd_compare(cfg: RunConfig) -> Output:
    cfg = cfg.with_window()
    report, d, p = run_compare(cfg)
    out = Output("compare", cfg)
    out.drive_header(d, p)
    out.table(
        ["quantity", "max_abs_error", "tau_of_max", "within_tolerance"],
        (
            [q, report.max_abs_error[q], report.tau_of_max[q], report.max_abs_error[q] <= report.tolerance]
            for q in QUANTITIES
        ),
    )
    out.derived("passed", report.passed())
    verdict = "PASS" if report.passed() else "FAIL"
    worst = max(report.quantities, key=lambda q: report.max_abs_error[q])
    out.summary.append(
        f"{verdict}: worst {worst} error {report.max_abs_error[worst]:.4g} at tau = "
        f"{report.tau_of_max[worst]:.4f} (tolerance {report.tolerance:g}, n_levels {cfg.n_levels})"
    )
    out.passed = report.passed()
    return out


def _sweep_point(args):
    cfg, s, ratio = args
    d = drive.calibrate(s, ratio)
    initial = tdse.prepare_level(s, cfg.initial)
    trace = tdse.evolve(s, d, initial, cfg.grid(), cfg.n_levels, cfg.stride)
    ok = drive.validity(d, cfg.margin).satisfied if ratio > 0 else True
    return [
        ratio,
        ratio / math.pi,
        d.lam,
        float(trace.level(drive.UPPER).max()),
        float(trace.doublet_total.min()),
        ok,
    ]


def cmd_sweep(cfg: RunConfig) -> Output:
    cfg = cfg.with_window()
    ratios = [parse_number(r) for r in cfg.ratios.split(",") if r.strip()]
    if not ratios:
        raise ConfigError("sweep needs at least one intensity ratio")
    if any(r <= 0 for r in ratios):
        raise ConfigError("sweep ratios must be positive")
    s = _solution(cfg)
    jobs = [(cfg, s, r) for r in ratios]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    out = Output("sweep", cfg)
    out.table(
        ["intensity_ratio", "intensity_ratio_over_pi", "lambda", "max_pop_3p", "min_doublet_total",
         "validity_satisfied"],
        rows,
    )
    for r in rows:
        out.summary.append(
            f"Omega12/omega_L = {r[1]:.4f} pi: max pop_3p = {r[3]:.6f}  min doublet_total = {r[4]:.6f}"
        )
    return out


def cmd_master(cfg: RunConfig) -> Output:
    cfg = cfg.with_window(MASTER_TAU_END)
    _, d, p = _setup(cfg)
    amps0 = _three_level_initial(cfg.initial)
    rho0 = master.DensityMatrixPrimed.from_amplitudes(amps0)
    dec = master.DecayParams.from_params(p, cfg.gamma)
    tr = master.evolve_master(
        rho0, p, dec, cfg.grid(), cfg.stride,
        nonsecular=cfg.nonsecular, printed_rabi=cfg.printed_rabi,
    )
    lab = master.lab_populations_from_primed(tr.rho, p, tr.taus)
    out = Output("master", cfg)
    out.drive_header(d, p)
    out.derived("steady_tau", "not reached" if tr.steady_tau is None else tr.steady_tau)
    out.derived("horizon", tr.horizon)
    out.derived("min_eigenvalue", tr.min_eigenvalue)
    r = tr.rho
    out.table(
        ["tau", "rho11p", "rho22p", "rho33p", "re_rho12p", "im_rho12p", "re_rho13p", "im_rho13p",
         "re_rho23p", "im_rho23p", "pop_0p", "pop_0m", "pop_3p", "fluorescence"],
        (
            [t, r[i, 0, 0].real, r[i, 1, 1].real, r[i, 2, 2].real,
             r[i, 0, 1].real, r[i, 0, 1].imag, r[i, 0, 2].real, r[i, 0, 2].imag,
             r[i, 1, 2].real, r[i, 1, 2].imag, *lab[i], cfg.gamma * lab[i, 2]]
            for i, t in enumerate(tr.taus)
        ),
    )
    f = tr.final.diagonal().real
    steady = "not reached" if tr.steady_tau is None else f"{tr.steady_tau:.4f}"
    out.summary.append(
        f"final rho'11 = {f[0]:.8f}  rho'22 = {f[1]:.3e}  rho'33 = {f[2]:.3e}  "
        f"steady state at tau = {steady} (horizon {tr.horizon:g})  min eigenvalue = {tr.min_eigenvalue:.2e}"
    )
    return out


_HELP = {
    "spectrum": "energies, parities, splittings and dipole table",
    "calibrate": "drive parameters, renormalized parameters and validity report",
    "evolve": "population trace of the driven double well",
    "analytic": "closed-form three-level populations",
    "compare": "numerical versus closed-form populations",
    "master": "dissipative primed-frame dynamics and steady state",
    "sweep": "trapping metrics across Omega12/omega_L",
}

COMMANDS = {
    "spectrum": cmd_spectrum,
    "calibrate": cmd_calibrate,
    "evolve": cmd_evolve,
    "analytic": cmd_analytic,
    "compare": cmd_compare,
    "master": cmd_master,
    "sweep": cmd_sweep,
}

_FLAGS = [
    ("--alpha", "alpha", "barrier parameter"),
    ("--n-basis", "n_basis", "oscillator basis size"),
    ("--n-levels", "n_levels", "retained eigenlevels (3 selects 0+, 0-, 3+)"),
    ("--intensity-ratio", "intensity_ratio", "Omega12/omega_L, e.g. 0.35pi"),
    ("--initial", "initial", "initial level label, e.g. 0+, 0-, 3+ or '(0+ + 0-)/sqrt2'"),
    ("--tau-end", "tau_end", "end of the phase-time window"),
    ("--dtau", "dtau", "integration step in phase time"),
    ("--stride", "stride", "steps between samples"),
    ("--gamma", "gamma", "decay rate in units of omega_L"),
    ("--margin", "margin", "strictness factor of the validity check"),
    ("--tolerance", "tolerance", "compare: pointwise population tolerance"),
    ("--compare-on", "compare_on", "compare: comma-separated quantities that decide pass/fail"),
    ("--ratios", "ratios", "sweep: comma-separated Omega12/omega_L values"),
    ("--nonsecular", "nonsecular", "master: keep Lambda2 cross terms (true/false)"),
    ("--printed-rabi", "printed_rabi", "master: use Omega23R instead of Omega23R/2 in coherent terms"),
    ("--jobs", "jobs", "sweep: worker processes"),
    ("--out", "out", "output CSV path (default stdout)"),
]


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    for flag, dest, helptext in _FLAGS:
        common.add_argument(flag, dest=dest, default=None, help=helptext)
    parser = argparse.ArgumentParser(
        prog="cptwell",
        description="Coherent population trapping in a driven quartic double well.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=_HELP[name])
    return parser


def main(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = make_parser().parse_args(argv)
    overrides = {dest: getattr(args, dest) for _, dest, _ in _FLAGS}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(file_values, overrides)
        out = COMMANDS[args.command](cfg)
        out.emit(stdout, stderr)
    except ConfigError as exc:
        stderr.write(f"cptwell: configuration error: {exc}\n")
        return EXIT_CONFIG
    except NumericalError as exc:
        stderr.write(f"cptwell: numerical error: {exc}\n")
        return EXIT_NUMERIC
    except OSError as exc:
        stderr.write(f"cptwell: I/O error: {exc}\n")
        return EXIT_IO
    if not out.passed:
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
