"""Command-line front end.

Subcommands: ``w3``, ``floquet``, ``track``, ``convergence``, ``strip``.
Exit status: 0 for an admissible run, 2 for an admissibility failure, 3 for a
gap violation (or untrackable gaps), 4 for I/O and format errors.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__, engine, floquet, io, models, spectral
from .errors import ConsistencyError, GapViolation, GridTooCoarse, InvalidGrid, TrackingAmbiguous

EXIT_OK = 0
EXIT_INADMISSIBLE = 2
EXIT_GAP = 3
EXIT_IO = 4

MAP_MODELS = ("su2-sheet", "su2-ball", "identity")
DRIVEN_MODELS = ("graphene", "qwz", "zero")
# matching that suits each built-in map; see spectral.match_bands
DEFAULT_MATCH = {"su2-sheet": "overlap", "su2-ball": "eigenvalue", "identity": "overlap"}


@dataclass
class RunConfig:
    command: str
    model: str | None
    params: dict
    dims: tuple[int, int, int] | None
    substeps: int | None
    branch_cut: float
    gaps: list[float] | None
    tolerances: dict
    match: str
    offset: float
    outputs: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def echo(self) -> dict:
        return {
            "command": self.command,
            "model": self.model,
            "params": self.params,
            "dims": list(self.dims) if self.dims else None,
            "substeps": self.substeps,
            "branch_cut": self.branch_cut,
            "gaps": self.gaps,
            "tolerances": self.tolerances,
            "match": self.match,
            "offset": self.offset,
            "outputs": self.outputs,
            **self.extra,
        }


class CliError(Exception):
    def __init__(self, message, status):
        super().__init__(message)
        self.status = status


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def parse_grid(text: str) -> tuple[int, int, int]:
    parts = text.lower().split("x")
    try:
        values = [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be N or N1xN2xN3, got {text!r}") from None
    if len(values) == 1:
        values = values * 3
    if len(values) != 3 or min(values) < 2:
        raise argparse.ArgumentTypeError(f"grid needs three sizes >= 2, got {text!r}")
    return tuple(values)


def parse_angles(text: str) -> list[float]:
    """Comma-separated angles; ``pi`` and multiples like ``-pi/2`` or ``0.5pi`` are accepted."""
    out = []
    for item in text.split(","):
        item = item.strip().lower().replace(" ", "")
        if not item:
            continue
        try:
            if "pi" in item:
                num, _, den = item.partition("/")
                text = num.replace("*", "").replace("pi", "")
                coef = -1.0 if text == "-" else 1.0 if text in ("", "+") else float(text)
                value = coef * np.pi / (float(den) if den else 1.0)
            else:
                value = float(item)
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot parse angle {item!r}") from None
        out.append(float(value))
    if not out:
        raise argparse.ArgumentTypeError("empty angle list")
    return out


def parse_sizes(text: str) -> list[int]:
    """``4..20`` (inclusive range), ``4..20:2`` (with step) or ``4,6,8``."""
    try:
        if ".." in text:
            rng, _, step = text.partition(":")
            lo, hi = (int(x) for x in rng.split(".."))
            return list(range(lo, hi + 1, int(step) if step else 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse size list {text!r}") from None


def _positive(kind):
    def conv(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"value must be positive, got {text}")
        return value
    return conv


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="built-in model id")
    common.add_argument("--grid", type=parse_grid, help="N or N1xN2xN3")
    common.add_argument("--w", type=int, default=1, help="winding parameter of the SU(2) maps")
    common.add_argument("--a0", type=float, default=0.7, help="graphene drive amplitude")
    common.add_argument("--omega", type=float, default=3.5, help="graphene drive frequency")
    common.add_argument("--mass", type=float, default=1.0, help="mass of the static two-band model")
    common.add_argument("--period", type=_positive(float), help="period of the static/zero models")
    common.add_argument("--substeps", type=_positive(int), help="integration substeps per time slice")
    common.add_argument("--branch-cut", type=float, default=np.pi, help="branch cut angle of the phase ledger")
    common.add_argument("--offset", type=float, help="sample offset in cells (default sqrt(2)-1 for maps, 0 for Bloch models)")
    common.add_argument("--match", choices=spectral.MATCH_METHODS, help="band matching method")
    common.add_argument("--out", help="report / table output path (default: stdout)")
    common.add_argument("--eps-unitary", type=_positive(float), default=spectral.EPS_UNITARY)
    common.add_argument("--eps-residual", type=_positive(float), default=spectral.EPS_RESIDUAL)
    common.add_argument("--eps-int", type=_positive(float), default=engine.EPS_INT)
    common.add_argument("--tau-match", type=_positive(float), default=spectral.TAU_MATCH)
    common.add_argument("--gap-margin", type=_positive(float), default=floquet.GAP_MARGIN)

    parser = argparse.ArgumentParser(prog="w3inv", description="Lattice W3 invariants of unitary maps.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("w3", parents=[common], help="W3, W1 and Chern numbers of a periodic map")
    p.add_argument("--input", help="UnitaryGridFile (JSON) to analyse instead of a model")
    p.add_argument("--csv", help="also write the charged cubes as CSV")
    p.add_argument("--save-grid", help="write the sampled grid as a UnitaryGridFile")

    p = sub.add_parser("floquet", parents=[common], help="W3[U_xi] per gap of a driven Bloch model")
    p.add_argument("--gaps", type=parse_angles, default=[0.0, np.pi], help="gap angles, e.g. 0,pi")

    p = sub.add_parser("track", parents=[common], help="track the gap invariants slice by slice")
    p.add_argument("--gaps", type=parse_angles, help="initial gap angles (default: detected)")
    p.add_argument("--csv", help="also write the per-slice table as CSV")

    p = sub.add_parser("convergence", parents=[common], help="W3 and central-difference baseline versus N")
    p.add_argument("--sizes", type=parse_sizes, default=parse_sizes("4..20"), help="N values, e.g. 4..20")

    p = sub.add_parser("strip", parents=[common], help="zigzag strip quasienergy spectrum as CSV")
    p.add_argument("--strip-width", type=int, default=24)
    p.add_argument("--k-samples", type=int, default=96)
    p.add_argument("--edge-cells", type=int, default=4, help="cells per edge counted in the edge weight")
    return parser


def make_config(args) -> RunConfig:
    tolerances = {
        "eps_unitary": args.eps_unitary, "eps_residual": args.eps_residual, "eps_int": args.eps_int,
        "tau_match": args.tau_match, "gap_margin": args.gap_margin,
    }
    model = args.model
    if args.command == "w3" and args.input:
        model = None
    elif model is None:
        model = "graphene" if args.command in ("floquet", "track", "strip") else "su2-sheet"
    allowed = {"w3": MAP_MODELS, "convergence": MAP_MODELS, "floquet": DRIVEN_MODELS,
               "track": DRIVEN_MODELS, "strip": ("graphene",)}[args.command]
    if model is not None and model not in allowed:
        raise CliError(f"model {model!r} is not available for {args.command}; choose from {allowed}", EXIT_IO)

    if model in ("su2-sheet", "su2-ball"):
        params = {"w": args.w}
    elif model == "graphene":
        params = {"A0": args.a0, "omega": args.omega}
        if args.command == "strip":
            params.update(strip_width=args.strip_width, k_samples=args.k_samples)
    elif model == "qwz":
        params = {"mass": args.mass}
    else:
        params = {}
    if model in ("qwz", "zero"):
        params["period"] = args.period

    default_dims = {"w3": 6, "convergence": None, "floquet": 6, "track": 6, "strip": None}[args.command]
    dims = args.grid or ((default_dims,) * 3 if default_dims else None)
    if args.offset is not None:
        offset = args.offset
    else:
        offset = models.DEFAULT_OFFSET if model in MAP_MODELS or model is None else 0.0
    match = args.match or (DEFAULT_MATCH.get(model, "overlap") if model in MAP_MODELS or model is None
                           else floquet.MATCH_METHOD)
    extra = {}
    if args.command == "convergence":
        extra["sizes"] = args.sizes
    if args.command == "strip":
        extra["edge_cells"] = args.edge_cells
    if args.command == "w3" and args.input:
        extra["input"] = args.input
    outputs = {k: getattr(args, k, None) for k in ("out", "csv", "save_grid") if getattr(args, k, None)}
    return RunConfig(args.command, model, params, dims, args.substeps, args.branch_cut,
                     getattr(args, "gaps", None), tolerances, match, offset, outputs, extra)


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

def map_function(model: str, params: dict):
    if model == "su2-sheet":
        p = models.Su2SheetParams(params["w"])
        return lambda mu: models.su2_sheet_map(p, mu)
    if model == "su2-ball":
        p = models.Su2BallParams(params["w"])
        return lambda mu: models.su2_ball_map(p, mu)
    if model == "identity":
        return models.identity_map(2)
    raise CliError(f"unknown map model {model!r}", EXIT_IO)


def driven_model(model: str, params: dict) -> floquet.DrivenBlochModel:
    if model == "graphene":
        p = models.GrapheneParams(A0=params["A0"], omega=params["omega"])
        return floquet.DrivenBlochModel(2, lambda a, b, t: models.graphene_bloch_h(p, a, b, t), p.period,
                                        hnorm=3.0, name="graphene")
    if model == "qwz":
        mass = params["mass"]
        hnorm = float(np.sqrt(2.0 + (abs(mass) + 2.0) ** 2))
        # default period keeps every eigenphase inside one turn, so the bands never wrap
        period = params.get("period") or 0.9 * np.pi / hnorm
        return floquet.DrivenBlochModel(2, lambda a, b, t: models.qwz_bloch_h(a, b, mass=mass), period,
                                        hnorm=hnorm, static=True, name="qwz")
    if model == "zero":
        return floquet.zero_model(2, params.get("period") or 1.0)
    raise CliError(f"unknown driven model {model!r}", EXIT_IO)


def sample_map(cfg: RunConfig, dims) -> spectral.UnitaryGrid:
    return models.sample_grid(map_function(cfg.model, cfg.params), dims, offset=cfg.offset,
                              eps_unitary=cfg.tolerances["eps_unitary"])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _spectral(cfg: RunConfig, grid) -> spectral.SpectralGrid:
    return spectral.spectral_grid(grid, eps_residual=cfg.tolerances["eps_residual"],
                                  tau_match=cfg.tolerances["tau_match"], method=cfg.match)


def _envelope(cfg: RunConfig, body: dict) -> dict:
    return {
        **body,
        "config_echo": cfg.echo(),
        "metadata": {
            "program": "w3inv",
            "version": __version__,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        },
    }


def cmd_w3(cfg: RunConfig):
    if cfg.model is None:
        grid = io.load_grid(cfg.extra["input"], cfg.tolerances["eps_unitary"])
        cfg.dims = grid.dims
    else:
        grid = sample_map(cfg, cfg.dims)
    if "save_grid" in cfg.outputs:
        io.save_grid(grid, cfg.outputs["save_grid"])
    spec = _spectral(cfg, grid)
    report = engine.compute_invariants(spec, branch_cut=cfg.branch_cut, eps_int=cfg.tolerances["eps_int"])
    body = report.to_dict()
    if "csv" in cfg.outputs:
        rows = [c["point"] + c["charges"] + c["M"] + [c["contribution"]] for c in report.charged_cubes]
        n = spec.n
        header = ["i1", "i2", "i3"] + [f"C{nu + 1}" for nu in range(n)] + [f"M{nu + 1}" for nu in range(n)] + ["CM"]
        io.write_csv(cfg.outputs["csv"], header, rows)
    status = EXIT_OK if report.diagnostics.admissible else EXIT_INADMISSIBLE
    return _envelope(cfg, body), status


def _gap_label(index: int, count: int) -> str:
    return f"n^{index if index else count}"


def cmd_floquet(cfg: RunConfig):
    model = driven_model(cfg.model, cfg.params)
    prop = floquet.propagate(model, cfg.dims, cfg.substeps, cfg.offset)
    spec = floquet.floquet_spectral(prop, method=cfg.match, eps_residual=cfg.tolerances["eps_residual"],
                                    tau_match=cfg.tolerances["tau_match"])
    result = floquet.floquet_invariants(spec, cfg.gaps, branch_cut=cfg.branch_cut,
                                        gap_margin=cfg.tolerances["gap_margin"], eps_int=cfg.tolerances["eps_int"])
    labelled = len(result.gaps) == spec.n
    gaps = []
    for k, (xi, rep) in enumerate(zip(result.gaps, result.reports)):
        entry = {"xi_angle": xi, "W3": rep.w3, "W3_raw": rep.w3_raw}
        if labelled:
            entry["label"] = _gap_label(k, spec.n)
        gaps.append(entry)
    admissible = all(r.diagnostics.admissible for r in result.reports)
    chern = result.reports[0].chern[0]
    body = {
        "invariants": {
            "gaps": gaps,
            "band_chern_between_gaps": result.band_chern,
            "chern_mu3_1": {"per_band": chern.per_band, "total": chern.total, "warning": chern.warning},
            "gap_relation_ok": result.relation_ok,
        },
        "charged_cubes": result.reports[0].charged_cubes,
        "diagnostics": {
            "substeps": prop.substeps,
            "max_dphi": result.reports[0].diagnostics.max_dphi,
            "admissible": admissible,
            "min_overlap": spec.min_overlap,
            "cube_residual": result.reports[0].diagnostics.cube_residual,
            "sum_residual": max(r.diagnostics.sum_residual for r in result.reports),
        },
    }
    return _envelope(cfg, body), EXIT_OK if admissible else EXIT_INADMISSIBLE


def cmd_track(cfg: RunConfig):
    model = driven_model(cfg.model, cfg.params)
    prop = floquet.propagate(model, cfg.dims, cfg.substeps, cfg.offset)
    track = floquet.track_gaps(model, cfg.dims, cfg.substeps, cfg.gaps,
                               gap_margin=cfg.tolerances["gap_margin"], eps_int=cfg.tolerances["eps_int"],
                               offset=cfg.offset, prop=prop)
    spec = floquet.floquet_spectral(prop)
    checked = floquet.cross_check_track(track, spec, gap_margin=cfg.tolerances["gap_margin"],
                                        eps_int=cfg.tolerances["eps_int"])
    rows = [{"slice": s.index, "mu3": s.mu3, "gaps": s.gaps, "n": s.n_values, "chern": s.chern,
             "chern_running": s.chern_running, "events": len(s.events)} for s in track.slices]
    dphi = engine.max_phase_step(spec, identity_start=True)
    body = {
        "invariants": {"final_n": track.final, "final_chern": track.slices[-1].chern, "slices": rows,
                       "cross_check": [v for _, v in checked]},
        "charged_cubes": track.charged_cubes,
        "diagnostics": {"substeps": track.substeps, "max_dphi": dphi,
                        "admissible": dphi < engine.ADMISSIBLE_DPHI, "min_overlap": spec.min_overlap},
    }
    if "csv" in cfg.outputs:
        n = spec.n
        header = (["slice", "mu3"] + [f"xi{k}" for k in range(n)] + [f"n{nu + 1}" for nu in range(n)]
                  + [f"C{nu + 1}" for nu in range(n)] + ["charged_cubes"])
        io.write_csv(cfg.outputs["csv"], header,
                     [[s.index, s.mu3, *s.gaps, *s.n_values, *s.chern, len(s.events)] for s in track.slices])
    return _envelope(cfg, body), EXIT_OK if dphi < engine.ADMISSIBLE_DPHI else EXIT_INADMISSIBLE


def convergence_rows(cfg: RunConfig, sizes) -> list[list]:
    rows = []
    for n in sizes:
        dims = (n, n, n)
        grid = sample_map(cfg, dims)
        baseline = engine.w3_direct_central_difference(grid)
        try:
            spec = _spectral(cfg, grid)
            report = engine.compute_invariants(spec, branch_cut=cfg.branch_cut, eps_int=cfg.tolerances["eps_int"])
            rows.append([n, report.w3, baseline, report.diagnostics.max_dphi, report.diagnostics.admissible, ""])
        except (GridTooCoarse, ConsistencyError) as exc:
            dphi = getattr(exc, "max_dphi", None)
            rows.append([n, "", baseline, "" if dphi is None else dphi, False, str(exc)])
    return rows


def cmd_convergence(cfg: RunConfig):
    sizes = cfg.extra["sizes"]
    if not sizes or min(sizes) < 2:
        raise CliError("convergence sizes must all be >= 2", EXIT_IO)
    rows = convergence_rows(cfg, sizes)
    text = io.csv_text(["N", "W3", "central_difference", "max_dphi", "admissible", "error"], rows)
    return text, EXIT_OK


def cmd_strip(cfg: RunConfig):
    p = models.GrapheneParams(A0=cfg.params["A0"], omega=cfg.params["omega"],
                              strip_width=cfg.params["strip_width"], k_samples=cfg.params["k_samples"])
    kx, phases, weight = models.strip_quasienergy_spectrum(p, cfg.substeps, edge_cells=cfg.extra["edge_cells"])
    rows = [[float(k), nu, float(e), float(wt)]
            for k, ph, ws in zip(kx, phases, weight) for nu, (e, wt) in enumerate(zip(ph, ws))]
    return io.csv_text(["kx", "band", "epsT", "edge_weight"], rows), EXIT_OK


COMMANDS = {"w3": cmd_w3, "floquet": cmd_floquet, "track": cmd_track,
            "convergence": cmd_convergence, "strip": cmd_strip}


def _emit(payload, cfg: RunConfig, stdout) -> None:
    text = payload if isinstance(payload, str) else io.dumps_report(payload)
    if "out" in cfg.outputs:
        io.atomic_write_text(cfg.outputs["out"], text)
    else:
        stdout.write(text)


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_IO if exc.code else EXIT_OK
    try:
        cfg = make_config(args)
        if cfg.dims is not None and min(cfg.dims) < 2:
            raise CliError("grid dims must be >= 2 per axis", EXIT_IO)
        payload, status = COMMANDS[cfg.command](cfg)
        _emit(payload, cfg, stdout)
        if status == EXIT_INADMISSIBLE:
            stderr.write("warning: discretization is not admissible (max_dphi >= pi/2); refine the grid\n")
        return status
    except CliError as exc:
        stderr.write(f"error: {exc}\n")
        return exc.status
    except GridTooCoarse as exc:
        stderr.write(f"error: {exc}\nadvice: {exc.advice()}\n")
        return EXIT_INADMISSIBLE
    except ConsistencyError as exc:
        stderr.write(f"error: {exc}\nadvice: refine the grid or increase --substeps\n")
        return EXIT_INADMISSIBLE
    except TrackingAmbiguous as exc:
        stderr.write(f"error: {exc}\nadvice: run the 'floquet' subcommand with explicit --gaps\n")
        return EXIT_GAP
    except GapViolation as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_GAP
    except (io.FormatError, InvalidGrid, OSError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_IO
    except ValueError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_IO


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":  # pragma: no cover
    main()
