"""Command-line driver.

Every subcommand reads a flat :class:`RunConfig`. Values come from the
built-in defaults, then an optional ``--config`` file (TOML or JSON), then
explicit flags, with later sources winning. Numbers are written with
``%.17g`` so outputs round-trip and repeat byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from typing import List, Optional

import numpy as np

from . import asymptotic as asy
from . import platforms as plat
from .dynamics import EvolutionConfig, SimulationParams, evolve_master, evolve_unitary
from .errors import ConfigError, SchemaError, SqueezeKerrError, WindowExhausted
from .fock import SqueezeSpec, make_squeezed_vacuum, quadrature_moments, suggest_n_max
from .integrate import IntegrationStats
from .wigner import (
    PhaseSpaceGrid,
    convergence_report,
    field_header,
    field_to_csv,
    max_negativity,
    negativity,
    wigner_of_density,
    write_field_binary,
)

COMMANDS = ("evolve", "wigner", "asymptotic", "sweep", "max-negativity", "platforms", "convergence")
FORMATS = ("csv", "json", "binary-field")


def fmt(x) -> str:
    return "%.17g" % x


def parse_number(text) -> float:
    """Accept plain floats and fractions such as ``1/40``."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    try:
        return float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"cannot parse {text!r} as a number") from None


def parse_axis(text) -> List[float]:
    """``"0,0.5,1"`` or ``"linspace:0:1:6"`` (or a list, from a config file)."""
    if isinstance(text, (list, tuple)):
        return [parse_number(v) for v in text]
    text = str(text).strip()
    if text.startswith("linspace:"):
        parts = text.split(":")[1:]
        if len(parts) != 3:
            raise ConfigError(f"axis spec {text!r} must be linspace:start:stop:count")
        start, stop = parse_number(parts[0]), parse_number(parts[1])
        count = int(parts[2])
        if count < 1:
            raise ConfigError("axis count must be positive")
        return [float(v) for v in np.linspace(start, stop, count)]
    return [parse_number(v) for v in text.split(",") if v.strip()]


@dataclass
class RunConfig:
    command: str = "evolve"
    # state and rates
    s: float = 6.0
    g: float = 1.0
    gd_over_gs2: float = 0.0
    gphi_over_g: float = 0.0
    n_th: float = 1000.0
    unitary: bool = False
    n_max: Optional[int] = None
    tail_tol: float = 1e-10
    # time
    tau_max: float = 4.0
    gt_max: Optional[float] = None
    n_samples: int = 41
    tau: Optional[float] = None
    gt: Optional[float] = None
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    # lab grid
    x_max: float = 10.0
    delta_x: float = 1 / 40
    # rescaled grid
    rx_max: float = 3.0
    ry_max: float = 3.0
    r_delta: float = 1 / 80
    # peak search
    tol: float = 1e-5
    n_coarse: int = 40
    refine: int = 4
    method: str = "master"
    # sweep
    gd_axis: List[float] = field(default_factory=lambda: [0.0, 0.5, 1.0])
    gphi_axis: List[float] = field(default_factory=lambda: [0.0])
    asymptotic_column: bool = True
    # convergence
    relax_delta_x: float = 1 / 20
    relax_x_max: float = 9.0
    relax_n_max: int = 300
    # platforms
    table: Optional[str] = None
    strict_si: bool = False
    # output
    output: str = "-"
    format: str = "csv"
    threads: Optional[int] = None

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise SchemaError(f"unknown configuration key(s): {', '.join(unknown)}")
        cfg = cls()
        for key, value in data.items():
            setattr(cfg, key, value)
        cfg.normalise()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_mapping(json.loads(text))

    def normalise(self) -> None:
        """Coerce types and re-validate every module invariant the command touches."""
        for name in ("s", "g", "gd_over_gs2", "gphi_over_g", "n_th", "tail_tol", "tau_max",
                     "rel_tol", "abs_tol", "x_max", "delta_x", "rx_max", "ry_max", "r_delta",
                     "tol", "relax_delta_x", "relax_x_max"):
            setattr(self, name, parse_number(getattr(self, name)))
        for name in ("gt_max", "tau", "gt"):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, parse_number(value))
        for name in ("n_samples", "n_coarse", "refine", "relax_n_max"):
            setattr(self, name, int(getattr(self, name)))
        if self.n_max is not None:
            self.n_max = int(self.n_max)
        if self.threads is not None:
            self.threads = int(self.threads)
        self.gd_axis = parse_axis(self.gd_axis)
        self.gphi_axis = parse_axis(self.gphi_axis)
        for name in ("unitary", "asymptotic_column", "strict_si"):
            value = getattr(self, name)
            if not isinstance(value, bool):
                raise ConfigError(f"{name} must be a boolean")
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {', '.join(FORMATS)}")
        if self.method not in ("master", "asymptotic"):
            raise ConfigError("method must be 'master' or 'asymptotic'")
        if self.n_samples < 2:
            raise ConfigError("n_samples must be at least 2")
        if self.tau is not None and self.gt is not None:
            raise ConfigError("give either tau or gt, not both")
        if self.command == "platforms":
            return
        SqueezeSpec(self.s)
        if self.unitary and (self.gd_over_gs2 or self.gphi_over_g):
            raise ConfigError("--unitary conflicts with non-zero decoherence ratios")
        self.sim_params()
        self.grid()
        if self.command == "asymptotic":
            self.rescaled_grid()
        if self.command == "convergence":
            PhaseSpaceGrid(self.relax_x_max, self.delta_x)
            PhaseSpaceGrid(self.x_max, self.relax_delta_x)
        if self.time_max() <= 0:
            raise ConfigError("the time window must be positive")

    # -- derived objects ----------------------------------------------------

    def resolved_n_max(self) -> int:
        return self.n_max if self.n_max is not None else suggest_n_max(self.s, self.tail_tol)

    def sim_params(self, gd=None, gphi=None, n_max=None) -> SimulationParams:
        gd = self.gd_over_gs2 if gd is None else gd
        gphi = self.gphi_over_g if gphi is None else gphi
        n_max = self.resolved_n_max() if n_max is None else n_max
        if self.unitary:
            gd, gphi = 0.0, 0.0
        return SimulationParams.from_ratios(
            self.s, g=self.g, gd_over_gs2=gd, gphi_over_g=gphi, n_th=self.n_th, n_max=n_max
        )

    def grid(self) -> PhaseSpaceGrid:
        return PhaseSpaceGrid(self.x_max, self.delta_x)

    def rescaled_grid(self) -> asy.RescaledGrid:
        return asy.RescaledGrid(self.rx_max, self.ry_max, self.r_delta)

    def tau_scale(self) -> float:
        """Multiply a physical time by this to get tau."""
        return self.g * self.s**4

    def time_max(self) -> float:
        """End of the scan window in physical time units."""
        if self.gt_max is not None:
            return self.gt_max / self.g
        return self.tau_max / self.tau_scale()

    def single_time(self) -> float:
        if self.gt is not None:
            return self.gt / self.g
        if self.tau is not None:
            return self.tau / self.tau_scale()
        return 0.0

    def initial_state(self, n_max: Optional[int] = None):
        n_max = self.resolved_n_max() if n_max is None else n_max
        return make_squeezed_vacuum(SqueezeSpec(self.s), n_max, self.tail_tol)

    def evolution(self) -> dict:
        return {"rel_tol": self.rel_tol, "abs_tol": self.abs_tol}


# -- table output ------------------------------------------------------------


def table_text(columns, rows, fmt_name: str) -> str:
    if fmt_name == "json":
        return json.dumps([dict(zip(columns, r)) for r in rows], indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([fmt(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def emit_text(cfg: RunConfig, text: str, stdout) -> None:
    if cfg.output == "-":
        stdout.write(text)
    else:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def emit_field(cfg: RunConfig, field_obj, extra: dict, stdout) -> None:
    if cfg.format == "binary-field":
        if cfg.output == "-":
            buf = stdout.buffer if hasattr(stdout, "buffer") else None
            if buf is None:
                raise ConfigError("binary output needs --output or a binary stdout")
            write_field_binary(field_obj, buf, extra)
        else:
            with open(cfg.output, "wb") as fh:
                write_field_binary(field_obj, fh, extra)
        return
    if cfg.format == "json":
        payload = {"header": field_header(field_obj, extra), "values": field_obj.values.tolist()}
        emit_text(cfg, json.dumps(payload) + "\n", stdout)
        return
    emit_text(cfg, field_to_csv(field_obj), stdout)


# -- subcommands -------------------------------------------------------------


def _evolve_asymptotic(cfg: RunConfig, stdout) -> None:
    gd, gphi = (0.0, 0.0) if cfg.unitary else (cfg.gd_over_gs2, cfg.gphi_over_g)
    base = asy.AsymptoticParams.from_ratios(0.0, gd, gphi, s=cfg.s, g=cfg.g)
    rows = []
    for t in np.linspace(0.0, cfg.time_max(), cfg.n_samples):
        tau = float(t * cfg.tau_scale())
        rows.append((float(t), tau, asy.asymptotic_negativity(base.with_tau(tau), delta=cfg.r_delta)))
    emit_text(cfg, table_text(("t", "tau", "N"), rows, cfg.format), stdout)


def cmd_evolve(cfg: RunConfig, stdout=sys.stdout) -> None:
    if cfg.method == "asymptotic":
        _evolve_asymptotic(cfg, stdout)
        return
    params = cfg.sim_params()
    grid = cfg.grid()
    state0 = cfg.initial_state(params.n_max)
    times = np.linspace(0.0, cfg.time_max(), cfg.n_samples)
    if params.is_unitary:
        states = [evolve_unitary(state0, params.g, t) for t in times]
        trace_err = [abs(float(np.vdot(st.amplitudes, st.amplitudes).real) - 1.0) for st in states]
    else:
        stats = IntegrationStats()
        states = evolve_master(state0, params, EvolutionConfig(list(times), **cfg.evolution()), stats)
        trace_err = stats.trace_errors
    rows = []
    for t, st, err in zip(times, states, trace_err):
        mom = quadrature_moments(st)
        n_val = negativity(wigner_of_density(st, grid))
        rows.append((float(t), float(t * cfg.tau_scale()), n_val, mom["mean_n"], mom["var_x"],
                     mom["var_y"], float(err)))
    columns = ("t", "tau", "N", "mean_n", "var_x", "var_y", "trace_err")
    emit_text(cfg, table_text(columns, rows, cfg.format), stdout)


def cmd_wigner(cfg: RunConfig, stdout=sys.stdout) -> None:
    params = cfg.sim_params()
    t = cfg.single_time()
    state0 = cfg.initial_state(params.n_max)
    if t == 0.0:
        state = state0
    elif params.is_unitary:
        state = evolve_unitary(state0, params.g, t)
    else:
        state = evolve_master(state0, params, EvolutionConfig([0.0, t], **cfg.evolution()))[-1]
    wf = wigner_of_density(state, cfg.grid())
    extra = {"t": t, "tau": t * cfg.tau_scale(), "s": cfg.s, "negativity": negativity(wf)}
    emit_field(cfg, wf, extra, stdout)


def cmd_asymptotic(cfg: RunConfig, stdout=sys.stdout) -> None:
    tau = cfg.single_time() * cfg.tau_scale()
    gd, gphi = (0.0, 0.0) if cfg.unitary else (cfg.gd_over_gs2, cfg.gphi_over_g)
    params = asy.AsymptoticParams.from_ratios(tau, gd, gphi, s=cfg.s, g=cfg.g)
    rf = asy.asymptotic_wigner(params, cfg.rescaled_grid())
    extra = {"tau": tau, "gd_over_gs2": gd, "gphi_over_g": gphi,
             "negativity": asy.asymptotic_negativity(params, delta=cfg.r_delta)}
    emit_field(cfg, rf, extra, stdout)


def _peak(cfg: RunConfig, gd: float, gphi: float, method: str, guard: bool = True) -> dict:
    """One maximum-negativity search.

    A scan that ends while N is still rising reports the window maximum with
    status ``window_exhausted``. With ``guard`` other failures become an
    ``error:<class>`` status instead of propagating.
    """
    out = {"max_N": float("nan"), "t_star": float("nan"), "tau_star": float("nan"),
           "status": "ok", "evaluations": 0, "trace": []}
    try:
        if method == "asymptotic":
            res = asy.asymptotic_max_negativity(
                gd, gphi, tau_max=cfg.time_max() * cfg.tau_scale(), n_coarse=cfg.n_coarse,
                tol=cfg.tol, refine=cfg.refine, s=cfg.s, g=cfg.g, delta=cfg.r_delta,
            )
            out.update(max_N=res.n_star, tau_star=res.t_star, t_star=res.t_star / cfg.tau_scale())
        else:
            params = cfg.sim_params(gd, gphi)
            res = max_negativity(
                cfg.initial_state(params.n_max), params, cfg.grid(), cfg.tol,
                t_max=cfg.time_max(), n_coarse=cfg.n_coarse, refine=cfg.refine,
                evolution=cfg.evolution(),
            )
            out.update(max_N=res.n_star, t_star=res.t_star, tau_star=res.t_star * cfg.tau_scale())
        out["evaluations"] = res.evaluations
        out["trace"] = res.trace
    except WindowExhausted as exc:
        out["status"] = "window_exhausted"
        if exc.t_last is not None:
            scale = cfg.tau_scale()
            t_last = exc.t_last / scale if method == "asymptotic" else exc.t_last
            out.update(max_N=exc.n_last, t_star=t_last, tau_star=t_last * scale)
    except SqueezeKerrError as exc:
        if not guard:
            raise
        out["status"] = f"error:{type(exc).__name__}"
    return out


def cmd_max_negativity(cfg: RunConfig, stdout=sys.stdout) -> None:
    res = _peak(cfg, cfg.gd_over_gs2, cfg.gphi_over_g, cfg.method, guard=False)
    scale = 1.0 if cfg.method == "master" else 1.0 / cfg.tau_scale()
    rows = []
    for stage_no, stage in enumerate(res["trace"]):
        for t, n_val in zip(stage.times, stage.values):
            t_phys = float(t) * scale
            rows.append((stage_no, t_phys, t_phys * cfg.tau_scale(), float(n_val)))
    if cfg.format == "json":
        payload = {k: v for k, v in res.items() if k != "trace"}
        payload["method"] = cfg.method
        payload["refinement"] = [dict(zip(("stage", "t", "tau", "N"), r)) for r in rows]
        emit_text(cfg, json.dumps(payload, indent=1) + "\n", stdout)
        return
    buf = io.StringIO()
    buf.write(f"# method={cfg.method} status={res['status']} max_N={fmt(res['max_N'])} "
              f"t_star={fmt(res['t_star'])} tau_star={fmt(res['tau_star'])}\n")
    buf.write(table_text(("stage", "t", "tau", "N"), rows, "csv"))
    emit_text(cfg, buf.getvalue(), stdout)


def cmd_sweep(cfg: RunConfig, stdout=sys.stdout) -> None:
    rows = []
    for gd in cfg.gd_axis:
        for gphi in cfg.gphi_axis:
            res = _peak(cfg, gd, gphi, cfg.method)
            row = [gd, gphi, res["max_N"], res["t_star"], res["tau_star"], res["status"]]
            if cfg.asymptotic_column:
                ares = _peak(cfg, gd, gphi, "asymptotic")
                row += [ares["max_N"], ares["tau_star"], ares["status"]]
            rows.append(tuple(row))
    columns = ["Gd_over_gs2", "gphi_over_g", "max_N", "t_star", "tau_star", "status"]
    if cfg.asymptotic_column:
        columns += ["asymptotic_max_N", "asymptotic_tau_star", "asymptotic_status"]
    emit_text(cfg, table_text(columns, rows, cfg.format), stdout)


def cmd_platforms(cfg: RunConfig, stdout=sys.stdout) -> None:
    records = plat.ingest_table(cfg.table)
    reports = [plat.required_squeezing_db(r, strict_si=cfg.strict_si) for r in records]
    if cfg.format == "json":
        emit_text(cfg, plat.reports_to_json(reports, cfg.strict_si) + "\n", stdout)
    else:
        emit_text(cfg, plat.reports_to_csv(reports, cfg.strict_si), stdout)


def cmd_convergence(cfg: RunConfig, stdout=sys.stdout) -> None:
    reference = cfg.grid()
    n_ref = cfg.resolved_n_max()

    def rho_source(n):
        # the relaxed cutoff is allowed to violate tail_tol: its error is what is measured
        if n == n_ref:
            return cfg.initial_state(n)
        return make_squeezed_vacuum(SqueezeSpec(cfg.s), n, tail_tol=1.0)

    rows = convergence_report(
        rho_source,
        cfg.sim_params(n_max=cfg.resolved_n_max()),
        [PhaseSpaceGrid(cfg.x_max, cfg.relax_delta_x), PhaseSpaceGrid(cfg.relax_x_max, cfg.delta_x)],
        [cfg.relax_n_max],
        t_max=cfg.time_max(),
        reference_grid=reference,
        reference_n_max=cfg.resolved_n_max(),
        tol=cfg.tol,
        n_coarse=cfg.n_coarse,
        evolution=cfg.evolution(),
    )
    columns = ("knob", "delta_x", "x_max", "n_max", "max_N", "error")
    emit_text(cfg, table_text(columns, [tuple(r[c] for c in columns) for r in rows], cfg.format),
              stdout)


HANDLERS = {
    "evolve": cmd_evolve,
    "wigner": cmd_wigner,
    "asymptotic": cmd_asymptotic,
    "sweep": cmd_sweep,
    "max-negativity": cmd_max_negativity,
    "platforms": cmd_platforms,
    "convergence": cmd_convergence,
}


# -- argument parsing --------------------------------------------------------

# flag -> (RunConfig field, kwargs)
_OPTIONS = {
    "--s": ("s", {}),
    "--g": ("g", {}),
    "--Gd-over-gs2": ("gd_over_gs2", {}),
    "--gphi-over-g": ("gphi_over_g", {}),
    "--nth": ("n_th", {}),
    "--n-max": ("n_max", {"type": int}),
    "--tail-tol": ("tail_tol", {}),
    "--tau-max": ("tau_max", {}),
    "--gt-max": ("gt_max", {}),
    "--n-samples": ("n_samples", {"type": int}),
    "--tau": ("tau", {}),
    "--gt": ("gt", {}),
    "--rel-tol": ("rel_tol", {}),
    "--abs-tol": ("abs_tol", {}),
    "--x-max": ("x_max", {}),
    "--delta-x": ("delta_x", {}),
    "--rx-max": ("rx_max", {}),
    "--ry-max": ("ry_max", {}),
    "--r-delta": ("r_delta", {}),
    "--tol": ("tol", {}),
    "--n-coarse": ("n_coarse", {"type": int}),
    "--refine": ("refine", {"type": int}),
    "--method": ("method", {"choices": ("master", "asymptotic")}),
    "--gd-axis": ("gd_axis", {}),
    "--gphi-axis": ("gphi_axis", {}),
    "--relax-delta-x": ("relax_delta_x", {}),
    "--relax-x-max": ("relax_x_max", {}),
    "--relax-n-max": ("relax_n_max", {"type": int}),
    "--table": ("table", {}),
    "--output": ("output", {}),
    "--format": ("format", {"choices": FORMATS}),
    "--threads": ("threads", {"type": int}),
}
_SWITCHES = {
    "--unitary": ("unitary", True),
    "--strict-si": ("strict_si", True),
    "--no-asymptotic-column": ("asymptotic_column", False),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="squeezekerr",
        description="Negativity generation in a squeezed Kerr oscillator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="TOML or JSON file with RunConfig keys")
        for flag, (dest, kw) in _OPTIONS.items():
            p.add_argument(flag, dest=dest, **kw)
        for flag, (dest, value) in _SWITCHES.items():
            p.add_argument(flag, dest=dest, action="store_const", const=value)
    return parser


def load_config_file(path: str) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".json"):
        data = json.loads(raw.decode("utf-8"))
    else:
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        try:
            data = tomllib.loads(raw.decode("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: top level must be a table/object")
    return data


def config_from_args(argv=None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    merged = {}
    path = ns.pop("config", None)
    if path:
        merged.update(load_config_file(path))
        merged.pop("command", None)
    merged.update(ns)
    merged["command"] = command
    return RunConfig.from_mapping(merged)


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        cfg = config_from_args(argv)
        handler = HANDLERS[cfg.command]
        if cfg.threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=cfg.threads):
                handler(cfg, stdout)
        else:
            handler(cfg, stdout)
    except SqueezeKerrError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
