"""Command line driver: ``geoscale <command> ...``.

Exit status is 0 on success, 2 for input/output problems, 3 for invalid
input or configuration and 4 for numerical failures. Errors are reported
on stderr as one JSON object ``{"kind", "message", "context"}``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .audio import apply_channel_filter, cepstra, load_wav, stft
from .chart import ScaleChart, contour_lattice
from .config import PipelineConfig, load_config
from .exceptions import GeoscaleError, InputError, SelfTestFailed, UnsupportedDimension, ValidationError
from .harness import SyntheticSpec, TransformSpec, apply_transform, build_chart, compare_representations, generate_synthetic
from .pca import PcaModel, fit_pca, project
from .svg import Figure
from .trajectory import FeatureTrajectory, read_trajectory_csv, trajectory_to_csv

logger = logging.getLogger("geoscale")

EXIT_STATUS = {"io": 2, "validation": 3, "numerical": 4}


# file helpers -------------------------------------------------------------
def write_atomic(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}", path=str(path)) from exc
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}", path=str(path)) from exc


def read_json(path) -> dict:
    try:
        return json.loads(read_text(path))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}", path=str(path)) from exc


def dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def sidecar_path(path) -> Path:
    return Path(str(path) + ".meta.json")


def read_sidecar(path) -> dict | None:
    p = sidecar_path(path)
    return read_json(p) if p.exists() else None


def trajectory_figure(traj: FeatureTrajectory, title: str, prefix: str = "x") -> Figure:
    if traj.dim < 2:
        raise ValidationError("plots need at least two dimensions", N=traj.dim)
    fig = Figure(title=title, xlabel=f"{prefix}1", ylabel=f"{prefix}2")
    fig.polyline(traj.points[:, :2], color="#1f77b4", width=0.8)
    return fig


# commands -----------------------------------------------------------------
def cmd_features(args, cfg: PipelineConfig) -> None:
    clip = load_wav(args.wav)
    spec = stft(clip, cfg.cepstra)
    if args.filter:
        spec = apply_channel_filter(spec, cfg.channel_filter)
    ceps = cepstra(spec, cfg.cepstra)
    if args.pca_model:
        model = PcaModel.from_json(read_text(args.pca_model))
    else:
        model = fit_pca(ceps, cfg.pca_k)
    traj = project(ceps, model)
    write_atomic(args.out, trajectory_to_csv(traj))
    write_atomic(args.pca_out or f"{args.out}.pca.json", model.to_json())
    if args.svg:
        label = "filtered" if args.filter else "unfiltered"
        write_atomic(args.svg, trajectory_figure(traj, f"feature trajectory ({label})").render())
    logger.info("wrote %d frames of %d features", len(traj), traj.dim)


def _reference_times(args, cfg: PipelineConfig, traj: FeatureTrajectory):
    times = args.reference_times if args.reference_times is not None else cfg.reference_times
    if times is None:
        raise ValidationError("reference times are required (config 'reference_times' or --reference-times)")
    if times == "auto" or times == ["auto"]:
        return None
    times = tuple(float(t) for t in times)
    if len(times) != traj.dim + 1:
        raise ValidationError("need t0 plus one time per dimension", given=len(times), N=traj.dim)
    return times


def cmd_chart(args, cfg: PipelineConfig) -> None:
    traj = read_trajectory_csv(args.trajectory)
    times = _reference_times(args, cfg, traj)
    chart = build_chart(traj, times, cfg.chart_config())
    result = chart.self_test(n=cfg.solver.self_test_points, seed=cfg.seed, tol=cfg.solver.self_test_tol)
    log = result.to_dict()
    logger.info("self-test: %s", log)
    if not result.passed:
        raise SelfTestFailed("chart round-trip self-test failed", **log)
    doc = chart.to_dict()
    doc["self_test"] = log
    doc["config"] = cfg.to_dict()
    doc["trajectory_samples"] = len(traj)
    write_atomic(args.out, dump_json(doc))


def load_chart(path) -> ScaleChart:
    return ScaleChart.from_json(read_text(path))


def cmd_rescale(args, cfg: PipelineConfig) -> None:
    chart = load_chart(args.chart)
    traj = read_trajectory_csv(args.trajectory)
    if args.start is not None or args.end is not None:
        traj = traj.window(args.start, args.end)
    s_traj, exclusions = chart.rescale_trajectory(traj)
    if s_traj is None:
        text = "t," + ",".join(f"s{k + 1}" for k in range(chart.dim)) + "\n"
    else:
        text = trajectory_to_csv(s_traj, prefix="s")
    write_atomic(args.out, text)
    meta = {
        "chart": str(args.chart),
        "source_times": list(chart.frame.source_times) if chart.frame.source_times is not None else None,
        "n_input": len(traj),
        "n_rescaled": 0 if s_traj is None else len(s_traj),
        "exclusions": [{"index": e.index, "time": e.time, "reason": e.reason} for e in exclusions],
    }
    write_atomic(sidecar_path(args.out), dump_json(meta))
    if args.svg and s_traj is not None:
        write_atomic(args.svg, trajectory_figure(s_traj, "s representation", prefix="s").render())
    if args.svg_x:
        write_atomic(args.svg_x, trajectory_figure(traj, "x representation").render())
    if exclusions:
        logger.warning("%d of %d samples excluded", len(exclusions), len(traj))


def _default_levels(values: np.ndarray) -> list:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return []
    return [float(v) for v in np.arange(np.ceil(finite.min()), np.floor(finite.max()) + 1)]


def cmd_isoclines(args, cfg: PipelineConfig) -> None:
    chart = load_chart(args.chart)
    icfg = cfg.isoclines
    if args.region is not None:
        lo, hi = args.region[:2], args.region[2:]
    elif icfg.region is not None:
        lo, hi = icfg.region
    else:
        # stay a little inside the domain: the last RK4 stages of paths that
        # end exactly on the boundary poke outside it
        inset = 0.1 * chart.field.grid.spacing
        lo, hi = chart.field.lo + inset, chart.field.hi - inset
    res = args.resolution or icfg.resolution
    levels_1 = args.levels_1 if args.levels_1 is not None else icfg.levels_1
    levels_2 = args.levels_2 if args.levels_2 is not None else icfg.levels_2
    if chart.dim != 2:
        raise UnsupportedDimension("isoclines are drawn for N = 2", N=chart.dim)
    axes, lattice = chart.coordinate_lattice((lo, hi), res)
    levels_1 = _default_levels(lattice[..., 0]) if levels_1 is None else levels_1
    levels_2 = _default_levels(lattice[..., 1]) if levels_2 is None else levels_2
    lines = contour_lattice(axes, lattice, levels_1, levels_2)
    rows = ["component,level,vertex_index,x1,x2"]
    for line in lines:
        for i, (a, b) in enumerate(line.vertices):
            rows.append(f"{line.component + 1},{line.level!r},{i},{float(a)!r},{float(b)!r}")
    write_atomic(args.out, "\n".join(rows) + "\n")
    if args.svg:
        fig = Figure(title="s isoclines", xlim=(float(lo[0]), float(hi[0])), ylim=(float(lo[1]), float(hi[1])))
        for line in lines:
            fig.polyline(line.vertices, color="#1f77b4" if line.component == 0 else "#d62728", width=0.9,
                         label=f"s{line.component + 1} = {line.level:g}", dashed=line.component == 1)
        if args.trajectory:
            traj = read_trajectory_csv(args.trajectory)
            fig.polyline(traj.points[:, :2], color="#7f7f7f", width=0.4)
        write_atomic(args.svg, fig.render())
    logger.info("traced %d isocline pieces", len(lines))


def cmd_compare(args, cfg: PipelineConfig) -> None:
    a = read_trajectory_csv(args.a)
    b = read_trajectory_csv(args.b)
    meta_a, meta_b = read_sidecar(args.a), read_sidecar(args.b)
    if meta_a is not None or meta_b is not None:
        ta = None if meta_a is None else meta_a.get("source_times")
        tb = None if meta_b is None else meta_b.get("source_times")
        if ta != tb and not args.force:
            raise ValidationError("charts were built with different reference times; use --force to compare anyway",
                                  source_times_a=ta, source_times_b=tb)
    report = compare_representations(a, b)
    write_atomic(args.out, dump_json(report.to_dict()))


def cmd_synth(args, cfg: PipelineConfig) -> None:
    spec_dict = read_json(args.spec)
    if args.seed is not None:
        spec_dict = dict(spec_dict, seed=args.seed)
    traj = generate_synthetic(SyntheticSpec.from_dict(spec_dict))
    write_atomic(args.out, trajectory_to_csv(traj))


def cmd_transform(args, cfg: PipelineConfig) -> None:
    traj = read_trajectory_csv(args.trajectory)
    t = TransformSpec.from_dict(read_json(args.transform))
    write_atomic(args.out, trajectory_to_csv(apply_transform(traj, t)))


# parser -------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON")
    common.add_argument("--seed", type=int, help="seed override (synthetic data, self-test sampling)")
    common.add_argument("--out", required=True, help="output path")
    common.add_argument("--force", action="store_true", help="compare s trajectories from mismatched charts")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="geoscale", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("features", parents=[common], help="WAV -> cepstral PCA trajectory CSV")
    q.add_argument("wav")
    q.add_argument("--filter", action="store_true", help="apply the band-edge channel filter")
    q.add_argument("--pca-model", help="project with this PCA JSON instead of fitting one")
    q.add_argument("--pca-out", help="where to write the PCA JSON (default: <out>.pca.json)")
    q.add_argument("--svg", help="plot of the trajectory")
    q.set_defaults(func=cmd_features)

    q = sub.add_parser("chart", parents=[common], help="trajectory CSV -> chart JSON")
    q.add_argument("trajectory")
    q.add_argument("--reference-times", nargs="+", metavar="T",
                   type=lambda v: v if v == "auto" else float(v), help='t0 t_1 ... t_N, or "auto"')
    q.set_defaults(func=cmd_chart)

    q = sub.add_parser("rescale", parents=[common], help="map a trajectory into s coordinates")
    q.add_argument("chart")
    q.add_argument("trajectory")
    q.add_argument("--start", type=float, help="first time to keep (s)")
    q.add_argument("--end", type=float, help="last time to keep (s)")
    q.add_argument("--svg", help="plot of the s trajectory")
    q.add_argument("--svg-x", help="plot of the input (x) trajectory")
    q.set_defaults(func=cmd_rescale)

    q = sub.add_parser("isoclines", parents=[common], help="level curves of s over an x region")
    q.add_argument("chart")
    q.add_argument("--region", nargs=4, type=float, metavar=("LO1", "LO2", "HI1", "HI2"))
    q.add_argument("--levels-1", nargs="+", type=float)
    q.add_argument("--levels-2", nargs="+", type=float)
    q.add_argument("--resolution", type=int)
    q.add_argument("--trajectory", help="overlay this trajectory CSV on the plot")
    q.add_argument("--svg", help="plot of the isoclines")
    q.set_defaults(func=cmd_isoclines)

    q = sub.add_parser("compare", parents=[common], help="compare two trajectories over common times")
    q.add_argument("a")
    q.add_argument("b")
    q.set_defaults(func=cmd_compare)

    q = sub.add_parser("synth", parents=[common], help="synthetic trajectory from a spec JSON")
    q.add_argument("spec")
    q.set_defaults(func=cmd_synth)

    q = sub.add_parser("transform", parents=[common], help="apply an invertible transform to a trajectory")
    q.add_argument("trajectory")
    q.add_argument("transform")
    q.set_defaults(func=cmd_transform)
    return p


def report_error(exc: GeoscaleError) -> int:
    context = {k: _jsonable(v) for k, v in exc.context.items()}
    print(json.dumps({"kind": exc.kind, "message": exc.message, "context": context}), file=sys.stderr)
    return EXIT_STATUS.get(exc.kind, 4)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = PipelineConfig.from_dict(dict(cfg.to_dict(), seed=args.seed))
        args.func(args, cfg)
    except GeoscaleError as exc:
        return report_error(exc)
    except OSError as exc:
        return report_error(InputError(str(exc), path=getattr(exc, "filename", None)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
