"""Command-line front end.

Every subcommand writes one or more data files into the output directory
(``--out``, else ``$Z2LAB_OUT``, else the working directory). CSV files start
with ``#`` lines echoing the full configuration; floats use 17 significant
digits. Files are written to a temporary name and renamed, so a failing run
leaves nothing behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .flux import braiding_phase_free, threading_check
from .gauge import pi_flux_background
from .manybody import braiding_l2, ground_space, monopole_gap_interacting, omega_states
from .spectral import (
    BlochCell,
    BlochModel,
    band_formula,
    bloch_bands,
    exp_fit,
    fourier_energy_coefficient,
)
from .thermo import (
    crossover_scan,
    holonomy_splitting,
    monopole_mass_finite,
    monopole_mass_infinite,
    sector_sweep,
    u1_energy_sweep,
)
from .topology import Lattice, cocycle_c1, cocycle_c2

EXHAUSTIVE_MAX_L = 4


@dataclass
class RunConfig:
    command: str
    out: str
    fmt: str = "csv"
    t: float = 1.0
    m: float = 1.0
    L: int | None = None
    beta: float | None = None
    seed: int = 0
    threads: int = 1
    extra: dict = field(default_factory=dict)

    def echo(self) -> list[str]:
        d = asdict(self)
        d.pop("out")
        # the worker count never changes results, so it is not echoed
        d.pop("threads")
        extra = d.pop("extra")
        d.update(extra)
        return [f"{k}={_echo_value(d[k])}" for k in sorted(d) if d[k] is not None]


@dataclass
class Table:
    name: str
    columns: list
    rows: list
    notes: list = field(default_factory=list)


def _fmt_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt_value(x) for x in v)
    return str(v)


def _echo_value(v) -> str:
    # shortest round-trip form keeps the header readable
    if isinstance(v, (list, tuple)):
        return ",".join(_echo_value(x) for x in v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return _fmt_value(v)


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:step`` (inclusive) or a comma list."""
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}; use start:stop:step")
        n = int(np.floor((parts[1] - parts[0]) / parts[2] + 1e-9)) + 1
        return np.round(parts[0] + parts[2] * np.arange(n), 12)
    try:
        return np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".z2lab-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render(table: Table, cfg: RunConfig) -> tuple[str, str]:
    if cfg.fmt == "json":
        body = {
            "config": {k: v for k, v in (line.split("=", 1) for line in cfg.echo())},
            "notes": table.notes,
            "columns": table.columns,
            "rows": [[_json_value(v) for v in r] for r in table.rows],
        }
        return table.name + ".json", json.dumps(body, indent=1) + "\n"
    lines = [f"# z2lab {__version__} {cfg.command}"]
    lines += ["# " + s for s in cfg.echo()]
    lines += ["# " + s for s in table.notes]
    lines.append(",".join(table.columns))
    lines += [",".join(_fmt_value(v) for v in r) for r in table.rows]
    return table.name + ".csv", "\n".join(lines) + "\n"


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def emit(tables: list[Table], cfg: RunConfig) -> list[str]:
    rendered = [render(t, cfg) for t in tables]
    paths = []
    for name, text in rendered:
        p = os.path.join(cfg.out, name)
        _atomic_write(p, text)
        paths.append(p)
    return paths


def cmd_bands(cfg: RunConfig) -> list[Table]:
    nk = cfg.extra["nk"]
    cells = [BlochCell.PI_FLUX_4SITE, BlochCell.CHESSBOARD_8SITE] if cfg.extra["cell"] == "both" \
        else [BlochCell(cfg.extra["cell"])]
    k = 2 * np.pi * np.arange(nk) / nk
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    ks = np.stack([k1.ravel(), k2.ravel()], axis=1)
    tables = []
    for cell in cells:
        model = BlochModel(cell, cfg.m, cfg.t)
        bands = bloch_bands(model, ks)
        dev = float(np.abs(bands - band_formula(model, ks)).max())
        cols = ["k1", "k2", "band_index", "energy"]
        rows = [[ks[i, 0], ks[i, 1], n, bands[i, n]] for i in range(len(ks)) for n in range(cell.size)]
        notes = [f"min_abs_energy={_fmt_value(float(np.abs(bands).min()))}",
                 f"closed_form_deviation={_fmt_value(dev)}"]
        tables.append(Table(f"bands_{cell.value}", cols, rows, notes))
    rows = []
    for mv in cfg.extra["m_grid"]:
        e = bloch_bands(BlochModel(BlochCell.PI_FLUX_4SITE, float(mv), cfg.t), ks)
        rows.append([float(mv), float(np.abs(e).min()), 2 * float(np.abs(e).min())])
    tables.append(Table("gap_vs_m", ["m", "half_gap", "gap"], rows))
    return tables


def cmd_gaps(cfg: RunConfig) -> list[Table]:
    rows = []
    finite = cfg.L % 4 == 0
    for mv in cfg.extra["m_grid"]:
        d_inf = monopole_mass_infinite(float(mv), cfg.t)
        d_fin = monopole_mass_finite(cfg.L, cfg.beta, float(mv), cfg.t) if finite else float("nan")
        rows.append([float(mv), d_inf, d_fin, 2 * d_inf, 2 * float(mv)])
    notes = [] if finite else ["finite-L column is nan: L must be divisible by 4"]
    return [Table("delta_vs_m", ["m", "delta_inf", "delta_beta_L", "monopole_gap", "fermion_gap"],
                  rows, notes)]


def cmd_crossover(cfg: RunConfig) -> list[Table]:
    c = crossover_scan(cfg.extra["m_grid"], cfg.t)
    rows = [[float(a), float(b), float(f)] for a, b, f in zip(c.m, c.monopole_gap, c.fermion_gap)]
    notes = [f"crossings={_fmt_value([float(x) for x in c.crossings])}"]
    return [Table("crossover", ["m", "monopole_gap", "fermion_gap"], rows, notes)]


def cmd_splitting(cfg: RunConfig) -> list[Table]:
    fit = holonomy_splitting(cfg.extra["L_list"], cfg.m, cfg.t)
    rows = [[int(L), *map(float, e), float(s)] for L, e, s in zip(fit.L, fit.energies, fit.splitting)]
    notes = [f"fit_rate={_fmt_value(fit.rate)}", f"fit_intercept={_fmt_value(fit.intercept)}",
             f"fit_r2={_fmt_value(fit.r2)}"]
    tables = [Table("splitting", ["L", "E_pp", "E_pm", "E_mp", "E_mm", "splitting"], rows, notes)]
    n = cfg.extra["u1_grid"]
    if n:
        L = cfg.extra["L_list"][-1]
        grid = u1_energy_sweep(L, cfg.m, cfg.t, n)
        ang = 2 * np.pi * np.arange(n) / n
        rows = [[float(ang[i]), float(ang[j]), float(grid[i, j])] for i in range(n) for j in range(n)]
        tables.append(Table("u1_sweep", ["theta", "phi", "E0"], rows,
                            [f"L={L}", f"ptp={_fmt_value(float(np.ptp(grid)))}"]))
    return tables


def cmd_sectors(cfg: RunConfig) -> list[Table]:
    sample = cfg.extra["sample"]
    if sample is None and cfg.L > EXHAUSTIVE_MAX_L:
        raise ValueError(f"exhaustive sweep infeasible at L={cfg.L}; use --sample N for a randomized sweep")
    sw = sector_sweep(cfg.L, cfg.m, cfg.t, sample=sample, seed=cfg.seed, threads=cfg.threads)
    margin = sw.bound_margin()
    rows = [[k, int(sw.holonomies[k][0]), int(sw.holonomies[k][1]), int(sw.n_monopoles[k]),
             float(sw.energies[k]), float(margin[k])] for k in range(len(sw.energies))]
    notes = [f"reference_E0={_fmt_value(sw.reference)}", f"delta_L={_fmt_value(sw.delta_L)}",
             f"argmin={sw.argmin}", f"min_is_pi_flux={_fmt_value(sw.min_is_pi_flux)}",
             f"min_margin={_fmt_value(float(np.nanmin(margin)))}"]
    return [Table("sectors", ["sector", "a", "b", "n_monopoles", "E0", "bound_margin"], rows, notes)]


def cmd_decay(cfg: RunConfig) -> list[Table]:
    max_dist = cfg.extra["max_dist"]
    xs = np.array([[d, 0] for d in range(0, max_dist + 1)])
    coef = fourier_energy_coefficient(cfg.m, cfg.t, xs)
    rows = [[int(x[0]), float(np.real(c)), float(abs(c))] for x, c in zip(xs, coef)]
    even = xs[:, 0] % 2 == 0
    sel = even & (xs[:, 0] >= cfg.extra["min_dist"])
    fit = exp_fit(xs[sel, 0], np.abs(coef[sel]))
    notes = [f"fit_rate={_fmt_value(fit.rate)}", f"fit_r2={_fmt_value(fit.r2)}",
             f"fit_window={cfg.extra['min_dist']}..{max_dist} even"]
    return [Table("decay", ["x", "coefficient", "abs_coefficient"], rows, notes)]


COCYCLES = {"C1": (cocycle_c1,), "C2": (cocycle_c2,), "C1C2": (cocycle_c1, cocycle_c2)}


def _cocycle(L: int, name: str):
    fns = COCYCLES[name]
    c = fns[0](L)
    for f in fns[1:]:
        c = c + f(L)
    return c


def cmd_thread(cfg: RunConfig) -> list[Table]:
    cs = _cocycle(cfg.L, cfg.extra["cocycle"])
    rows = []
    for a, b in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        r = threading_check(cfg.L, a, b, cs, cfg.extra["steps"], cfg.t, cfg.m)
        rows.append([a, b, r.labels_out[0], r.labels_out[1], r.deviation, r.min_gap, r.unitarity_error])
    return [Table("thread", ["a_in", "b_in", "a_out", "b_out", "deviation", "min_gap", "unitarity_error"],
                  rows)]


def cmd_braid(cfg: RunConfig) -> list[Table]:
    rows = []
    for L in cfg.extra["L_list"]:
        lat = Lattice(L)
        i, j = lat.vertex(0, 0), lat.vertex(L // 2, 0)
        r = braiding_phase_free(i, j, pi_flux_background(L), cfg.t, cfg.m, n_steps=cfg.extra["steps"])
        rows.append([L, r.dist, r.ratio.real, r.ratio.imag, abs(r.ratio + 1), r.factor, r.crossing_parity])
    return [Table("braid", ["L", "dist", "re", "im", "abs_ratio_plus_one", "factor", "crossing_parity"], rows)]


def cmd_ed(cfg: RunConfig) -> list[Table]:
    rows = []
    for U in cfg.extra["U_grid"]:
        U = float(U)
        gs = ground_space(cfg.t, cfg.m, U)
        om = omega_states(cfg.t, cfg.m, U)
        rows.append([U, *map(float, gs.energies[:5]), gs.labels_distinct, *map(float, om.energies),
                     monopole_gap_interacting(U, cfg.t, cfg.m)])
    br = braiding_l2(cfg.t, cfg.m)
    notes = [f"braiding_l2_ratio={_fmt_value(br.ratio.real)}{br.ratio.imag:+.17g}j",
             f"anticommutator_norm={_fmt_value(br.anticommutator)}",
             "omega columns: lowest state of the pi-flux classes (1,1),(1,-1),(-1,1),(-1,-1)"]
    cols = ["U", "E0", "E1", "E2", "E3", "E4", "lowest_four_labels_distinct",
            "omega_pp", "omega_pm", "omega_mp", "omega_mm", "monopole_gap"]
    return [Table("ed", cols, rows, notes)]


COMMANDS = {
    "bands": cmd_bands, "gaps": cmd_gaps, "crossover": cmd_crossover, "splitting": cmd_splitting,
    "sectors": cmd_sectors, "decay": cmd_decay, "thread": cmd_thread, "braid": cmd_braid, "ed": cmd_ed,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="z2lab", description="Z2 gauge field coupled to lattice fermions.",
                                allow_abbrev=False)
    p.add_argument("--version", action="version", version=f"z2lab {__version__}")
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--out", default=None, help="output directory (default: $Z2LAB_OUT or .)")
    common.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    common.add_argument("--t", type=float, default=1.0, help="hopping amplitude")
    common.add_argument("--m", type=float, default=1.0, help="staggered mass")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("bands", parents=[common], allow_abbrev=False, help="Bloch bands and gap versus m")
    s.add_argument("--cell", choices=("pi-flux", "chessboard", "both"), default="both")
    s.add_argument("--nk", type=int, default=64)
    s.add_argument("--m-grid", type=parse_grid, default=parse_grid("0:3:0.25"))

    s = sub.add_parser("gaps", parents=[common], allow_abbrev=False, help="monopole mass versus m")
    s.add_argument("--m-grid", type=parse_grid, default=parse_grid("0:3:0.1"))
    s.add_argument("--L", type=int, default=8)
    s.add_argument("--beta", type=float, default=32.0)

    s = sub.add_parser("crossover", parents=[common], allow_abbrev=False, help="monopole versus fermion gap")
    s.add_argument("--m-grid", type=parse_grid, default=parse_grid("0:0.08:0.004"))

    s = sub.add_parser("splitting", parents=[common], allow_abbrev=False, help="holonomy splitting versus L")
    s.add_argument("--L", dest="L_list", type=parse_int_list, default=[4, 8, 12, 16])
    s.add_argument("--u1-grid", type=int, default=0, help="also sweep U(1) holonomies on an n x n grid")

    s = sub.add_parser("sectors", parents=[common], allow_abbrev=False, help="flux-sector ground energies")
    s.add_argument("--L", type=int, default=4)
    s.add_argument("--sample", type=int, default=None)

    s = sub.add_parser("decay", parents=[common], allow_abbrev=False, help="Fourier decay of the energy density")
    s.add_argument("--max-dist", type=int, default=24)
    s.add_argument("--min-dist", type=int, default=4)

    s = sub.add_parser("thread", parents=[common], allow_abbrev=False, help="flux threading label map")
    s.add_argument("--L", type=int, default=8)
    s.add_argument("--cocycle", choices=tuple(COCYCLES), default="C2")
    s.add_argument("--steps", type=int, default=32)

    s = sub.add_parser("braid", parents=[common], allow_abbrev=False, help="free-fermion braiding ratio")
    s.add_argument("--L", dest="L_list", type=parse_int_list, default=[8, 12])
    s.add_argument("--steps", type=int, default=32)

    s = sub.add_parser("ed", parents=[common], allow_abbrev=False, help="L=2 many-body oracle")
    s.add_argument("--U-grid", type=parse_grid, default=parse_grid("-0.2:0.2:0.02"))
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    out = ns.out or os.environ.get("Z2LAB_OUT") or "."
    skip = {"command", "out", "fmt", "t", "m", "seed", "threads", "L", "beta"}
    extra = {}
    for k, v in vars(ns).items():
        if k in skip:
            continue
        extra[k] = [float(x) for x in v] if isinstance(v, np.ndarray) else v
    if ns.threads < 1:
        raise ValueError("--threads must be positive")
    if ns.t <= 0:
        raise ValueError("--t must be positive")
    return RunConfig(
        command=ns.command, out=out, fmt=ns.fmt, t=ns.t, m=ns.m,
        L=getattr(ns, "L", None), beta=getattr(ns, "beta", None), seed=ns.seed,
        threads=ns.threads, extra=extra,
    )


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        if cfg.L is not None and cfg.L % 2:
            raise ValueError("L must be even")
        paths = emit(COMMANDS[cfg.command](cfg), cfg)
    except (ValueError, RuntimeError) as exc:
        print(f"z2lab {ns.command}: error: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
