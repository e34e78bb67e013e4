# pylint: disable=broad-except

"""
Command-line entry point for ldtsp.

    ldtsp generate st70.tsp --seed 1 --gamma 10
    ldtsp solve output/st70_g10_s1.ldtsp --variant core --time-limit 60
    ldtsp evaluate output/st70_g10_s1.ldtsp --sequence 3,1,2
    ldtsp export output/st70_g10_s1.ldtsp --variant minlp --format lp
    ldtsp bench manifest.csv --out-dir output/bench/
    ldtsp verify-energy --profiles 100

Exit codes: 0 success/optimal, 1 I/O or parse failure, 2 limit reached
with an incumbent, 3 no incumbent, 4 usage error.
"""

# System libraries
from concurrent.futures import ThreadPoolExecutor
import math
import os
from pathlib import Path
import sys

import numpy as np
import plac

# Project root added to the sys.path, so that scripts can be run unpackaged as well as packaged.
sys.path.append(str(Path(__file__).resolve().parent.parent))

# Local libraries
from ldtsp.classes.config import Config
from ldtsp.classes.energy import DragMode, DragParams, KinematicState
from ldtsp.classes.exceptions import LdtspError, ModelError
from ldtsp.classes.model import ModelVariant
from ldtsp.classes.solver import SolveConfig, SolveStatus, solve
from ldtsp.helpers.energy import (
    build_power_model,
    energy_identity_residual,
    random_profile,
    simulate,
)
from ldtsp.helpers.export import export_lp, export_mps
from ldtsp.helpers.formulation import build_milp, build_minlp, evaluate_tour
from ldtsp.helpers.general import (
    RESULT_COLUMNS,
    csv_to_df,
    df_to_csv,
    parse_sequence,
    results_frame,
    warm_start_frame,
)
from ldtsp.helpers.heuristics import excess_percent, warm_start_costs
from ldtsp.helpers.oracles import HELD_KARP_MAX_TARGETS
from ldtsp.helpers.plots import bar_chart, line_chart, save_svg
from ldtsp.helpers.search import astar_search
from ldtsp.helpers.tsplib import (
    generate_masses,
    load_tsplib_file,
    make_instance,
    read_instance_file,
    write_instance_file,
)

# Check Python version before proceeding
if sys.version_info < (3, 10):
    print("Python version 3.10 or higher is required,")
    print(
        "but the current version of Python is "
        + str(sys.version_info.major)
        + "."
        + str(sys.version_info.minor)
        + "."
    )
    sys.exit(6)

EXIT_OK = 0
EXIT_IO = 1
EXIT_LIMIT = 2
EXIT_NO_INCUMBENT = 3
EXIT_USAGE = 4

SOLVE_VARIANTS = ("core", "baseline1", "baseline2", "astar")
EXPORT_VARIANTS = ("core", "baseline1", "baseline2", "minlp")
# Residual tolerances relative to total energy.
ENERGY_TOL = 1e-4
STILL_MEDIUM_TOL = 1e-12


def _config(log, log_debug, verbose, output_dir="./output/") -> Config:
    return Config(debug=log_debug, log=log or None, verbose=verbose, output_dir=output_dir)


def _fail(config: Config, code: int, message: str, *args) -> int:
    config.logger.error(message, *args)
    print(message % args if args else message, file=sys.stderr)
    return code


def _status_code(report) -> int:
    if report.status is SolveStatus.OPTIMAL:
        return EXIT_OK
    if report.incumbent is not None:
        return EXIT_LIMIT
    return EXIT_NO_INCUMBENT


def _on_off(value: str):
    value = str(value).strip().lower()
    if value in ("on", "true", "yes", "1"):
        return True
    if value in ("off", "false", "no", "0"):
        return False
    return None


def _run_solver(instance, variant: str, solve_config: SolveConfig, config: Config):
    if variant == "astar":
        return astar_search(instance, solve_config, config)
    return solve(instance, solve_config, config)


@plac.annotations(  # help, kind, abbrev, type, choices, metavar)
    tsplib_path=("Str. Path to a TSPLIB file (EUC_2D or GEO).", "positional", None, str),
    seed=("Int. Seed for the package masses. Default: 1", "option", "s", int),
    gamma=("Float. Unladen mass factor M / sum(m). Default: 10", "option", "g", float),
    alpha=("Float. Energy scale. Default: 0.1", "option", "a", float),
    depot=("Int. Depot node id. Default: the last node", "option", "d", int),
    out=("Str. Output instance path. Default: <output_dir>/<name>_g<gamma>_s<seed>.ldtsp",
         "option", "o", str),
    rounded=("Bool. Use TSPLIB nearest-integer Euclidean distances", "flag", "r"),
    output_dir=("Str. Local directory to save outputs. Default is ./output/ .", "option", None, str),
    log=("Str. Directory to save log files. Default: ./log/", "option", "l", str),
    log_debug=("Bool. Whether to set file logging to 'debug' level", "flag", None),
    verbose=("Bool. Whether to print logs to the terminal ", "flag", "v"),
)
def cmd_generate(
    tsplib_path,
    seed=1,
    gamma=10.0,
    alpha=0.1,
    depot=0,
    out="",
    rounded=False,
    output_dir="./output/",
    log="./log/",
    log_debug=False,
    verbose=False,
):
    """
    Generates a native instance file from a TSPLIB geometry: masses drawn
    from {0.1, ..., 1.0} with `seed`, M = gamma * sum(m), depot last unless
    given.

    Returns:
     - int exit code
    """
    config = _config(log, log_debug, verbose, output_dir)
    try:
        nodes = load_tsplib_file(tsplib_path, rounded=rounded, config=config)
        masses = generate_masses(len(nodes) - 1, seed)
        instance = make_instance(
            nodes, depot=depot or None, masses=masses, gamma=gamma, alpha=alpha
        )
    except OSError as e:
        return _fail(config, EXIT_IO, "Cannot read %s: %s", tsplib_path, e)
    except LdtspError as e:
        return _fail(config, EXIT_IO, "Cannot build an instance from %s: %s", tsplib_path, e)

    if not out:
        out = os.path.join(output_dir, f"{nodes.name}_g{gamma:g}_s{seed}.ldtsp")
    try:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        write_instance_file(instance, out)
    except OSError as e:
        return _fail(config, EXIT_IO, "Cannot write %s: %s", out, e)
    config.logger.info("Instance saved to %s", out)
    print(out)
    return EXIT_OK


@plac.annotations(
    instance_path=("Str. Native instance file.", "positional", None, str),
    variant=("Str. core, baseline1, baseline2 or astar. Default: core", "option", "m", str),
    time_limit=("Float. Seconds. Default: 60", "option", "t", float),
    gap_tol=("Float. Relative gap tolerance. Default: 1e-6", "option", None, float),
    warm_start=("Str. on or off. Default: on", "option", "w", str),
    seed=("Int. Seed recorded in the results and used for tie-breaks. Default: 0",
          "option", "s", int),
    max_nodes=("Int. Node limit. Default: 1000000", "option", None, int),
    workers=("Int. Threads for node LPs. Default: 1", "option", None, int),
    out_csv=("Str. Results CSV to append to. Default: <output_dir>/results.csv",
             "option", "c", str),
    events=("Str. Event log path. Default: <output_dir>/<name>_<variant>.events",
            "option", "e", str),
    output_dir=("Str. Local directory to save outputs. Default is ./output/ .", "option", None, str),
    log=("Str. Directory to save log files. Default: ./log/", "option", "l", str),
    log_debug=("Bool. Whether to set file logging to 'debug' level", "flag", None),
    verbose=("Bool. Whether to print logs to the terminal ", "flag", "v"),
)
def cmd_solve(
    instance_path,
    variant="core",
    time_limit=60.0,
    gap_tol=1e-6,
    warm_start="on",
    seed=0,
    max_nodes=1_000_000,
    workers=1,
    out_csv="",
    events="",
    output_dir="./output/",
    log="./log/",
    log_debug=False,
    verbose=False,
):
    """
    Solves an instance and prints a one-line summary; appends a results CSV
    row and writes the event log (one line per incumbent or bound change).

    Returns:
     - int: 0 optimal, 2 limit with incumbent, 3 no incumbent, 1 unreadable
        input, 4 bad arguments
    """
    config = _config(log, log_debug, verbose, output_dir)
    variant = variant.strip().lower()
    use_warm_start = _on_off(warm_start)
    if variant not in SOLVE_VARIANTS:
        return _fail(config, EXIT_USAGE, "Unknown variant %r; use one of %s", variant, SOLVE_VARIANTS)
    if use_warm_start is None:
        return _fail(config, EXIT_USAGE, "--warm-start must be on or off, got %r", warm_start)
    try:
        solve_config = SolveConfig(
            variant=ModelVariant.CORE_MILP if variant == "astar" else ModelVariant.from_name(variant),
            time_limit=time_limit,
            gap_tolerance=gap_tol,
            warm_start=use_warm_start,
            seed=seed,
            max_nodes=max_nodes,
            workers=workers,
        )
    except ValueError as e:
        return _fail(config, EXIT_USAGE, "Invalid solver settings: %s", e)
    try:
        instance = read_instance_file(instance_path)
    except OSError as e:
        return _fail(config, EXIT_IO, "Cannot read %s: %s", instance_path, e)
    except LdtspError as e:
        return _fail(config, EXIT_IO, "Cannot parse %s: %s", instance_path, e)

    report = _run_solver(instance, variant, solve_config, config)
    print(report.summary())
    if report.incumbent is not None:
        print("tour: " + " ".join(str(node) for node in report.incumbent.sequence))

    out_csv = out_csv or os.path.join(output_dir, "results.csv")
    df_to_csv(results_frame([report.to_row(instance, seed)]), out_csv, append=True, config=config)
    events = events or os.path.join(output_dir, f"{instance.name}_{report.method}.events")
    try:
        Path(events).parent.mkdir(parents=True, exist_ok=True)
        Path(events).write_text("".join(f"{event}\n" for event in report.events), encoding="utf-8")
    except OSError as e:
        config.logger.error("Cannot write event log %s: %s", events, e)
    return _status_code(report)


@plac.annotations(
    instance_path=("Str. Native instance file.", "positional", None, str),
    sequence=("Str. Comma-separated target ids, e.g. 3,1,2", "option", "q", str),
    log=("Str. Directory to save log files. Default: none", "option", "l", str),
    verbose=("Bool. Whether to print logs to the terminal ", "flag", "v"),
)
def cmd_evaluate(instance_path, sequence="", log="", verbose=False):
    """
    Prints the departure mass and energy of every leg of a visiting order,
    and the total cost.

    Returns:
     - int: 0, 1 unreadable instance, 4 malformed sequence
    """
    config = _config(log, False, verbose)
    try:
        instance = read_instance_file(instance_path)
    except OSError as e:
        return _fail(config, EXIT_IO, "Cannot read %s: %s", instance_path, e)
    except LdtspError as e:
        return _fail(config, EXIT_IO, "Cannot parse %s: %s", instance_path, e)
    try:
        tour, cost = evaluate_tour(instance, parse_sequence(sequence))
    except (ValueError, ModelError) as e:
        return _fail(config, EXIT_USAGE, "Bad sequence %r: %s", sequence, e)

    dist = instance.distances
    print("leg\tfrom\tto\tmass\tdistance\tenergy")
    for k, ((a, b), mass) in enumerate(zip(tour.legs, tour.masses), start=1):
        energy = instance.alpha * mass * dist(a, b)
        print(f"{k}\t{a}\t{b}\t{mass:.10g}\t{dist(a, b):.10g}\t{energy:.10g}")
    print(f"total\t{cost:.10g}")
    return EXIT_OK


@plac.annotations(
    instance_path=("Str. Native instance file.", "positional", None, str),
    variant=("Str. core, baseline1, baseline2 or minlp. Default: core", "option", "m", str),
    format=("Str. lp or mps. Default: lp", "option", "f", str),
    out=("Str. Output path. Default: <output_dir>/<name>_<variant>.<format>", "option", "o", str),
    output_dir=("Str. Local directory to save outputs. Default is ./output/ .", "option", None, str),
    log=("Str. Directory to save log files. Default: none", "option", "l", str),
    verbose=("Bool. Whether to print logs to the terminal ", "flag", "v"),
)
def cmd_export(
    instance_path, variant="core", format="lp", out="", output_dir="./output/", log="", verbose=False
):  # pylint: disable=redefined-builtin
    """
    Writes a model in LP or MPS format for an external solver.

    Returns:
     - int: 0, 1 I/O failure, 4 unsupported variant or format
    """
    config = _config(log, False, verbose, output_dir)
    variant = variant.strip().lower()
    fmt = format.strip().lower()
    if variant not in EXPORT_VARIANTS:
        return _fail(config, EXIT_USAGE, "Variant %r has no model to export", variant)
    if fmt not in ("lp", "mps"):
        return _fail(config, EXIT_USAGE, "Unknown format %r; use lp or mps", format)
    try:
        instance = read_instance_file(instance_path)
    except OSError as e:
        return _fail(config, EXIT_IO, "Cannot read %s: %s", instance_path, e)
    except LdtspError as e:
        return _fail(config, EXIT_IO, "Cannot parse %s: %s", instance_path, e)

    if variant == "minlp":
        model = build_minlp(instance)
    else:
        model = build_milp(instance, ModelVariant.from_name(variant))
    try:
        text = export_lp(model) if fmt == "lp" else export_mps(model)
    except ModelError as e:
        return _fail(config, EXIT_USAGE, "Cannot export: %s", e)
    out = out or os.path.join(output_dir, f"{instance.name}_{variant}.{fmt}")
    try:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    except OSError as e:
        return _fail(config, EXIT_IO, "Cannot write %s: %s", out, e)
    config.logger.info("Model saved to %s", out)
    print(out)
    return EXIT_OK


def _bench_cell(cell: dict, base_dir: Path, seed: int, config: Config):
    """Runs one manifest row. Returns (row, events, instance); failures become status=error."""
    path = Path(str(cell["instance"]))
    if not path.is_absolute():
        path = base_dir / path
    variant = str(cell["variant"]).strip().lower()
    row = {column: None for column in RESULT_COLUMNS}
    row.update({"instance": path.stem, "variant": variant, "seed": seed})
    try:
        if variant not in SOLVE_VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        gap_tol = cell.get("gap_tol")
        warm = cell.get("warm_start")
        solve_config = SolveConfig(
            variant=ModelVariant.CORE_MILP if variant == "astar" else ModelVariant.from_name(variant),
            time_limit=float(cell["time_limit"]),
            gap_tolerance=1e-6 if gap_tol is None or _missing(gap_tol) else float(gap_tol),
            warm_start=True if warm is None or _missing(warm) else bool(_on_off(str(warm))),
            seed=seed,
        )
        instance = read_instance_file(path)
        report = _run_solver(instance, variant, solve_config, config)
        row = report.to_row(instance, seed)
        row["variant"] = variant
        return row, report.events, instance
    except Exception as e:
        config.logger.error("Bench cell %s/%s failed: %s", path, variant, e)
        row["status"] = "error"
        return row, [], None


def _missing(value) -> bool:
    return isinstance(value, float) and math.isnan(value)


def _warm_start_rows(outcomes, config: Config) -> list:
    """One warm_start_gap.csv row per distinct instance small enough for Held-Karp."""
    rows = []
    seen = set()
    for row, _, instance in outcomes:
        if instance is None or row["instance"] in seen:
            continue
        seen.add(row["instance"])
        if len(instance.targets) > HELD_KARP_MAX_TARGETS:
            config.logger.debug("No warm start gap for %s: too many targets", row["instance"])
            continue
        warm, optimal = warm_start_costs(instance)
        rows.append(
            {
                "instance": row["instance"],
                "gamma": instance.gamma,
                "targets": len(instance.targets),
                "warm_cost": warm,
                "optimal_cost": optimal,
                "gap_pct": excess_percent(warm, optimal),
            }
        )
    return rows


@plac.annotations(
    manifest_path=("Str. CSV with columns instance, variant, time_limit "
                   "(optional gap_tol, warm_start).", "positional", None, str),
    out_dir=("Str. Output directory. Default: ./output/bench/", "option", "o", str),
    workers=("Int. Cells run concurrently. Default: 1", "option", None, int),
    seed=("Int. Seed recorded with every row. Default: 0", "option", "s", int),
    log=("Str. Directory to save log files. Default: ./log/", "option", "l", str),
    log_debug=("Bool. Whether to set file logging to 'debug' level", "flag", None),
    verbose=("Bool. Whether to print logs to the terminal ", "flag", "v"),
)
def cmd_bench(
    manifest_path,
    out_dir="./output/bench/",
    workers=1,
    seed=0,
    log="./log/",
    log_debug=False,
    verbose=False,
):
    """
    Runs every manifest cell and saves results.csv, warm_start_gap.csv,
    gap_vs_time.svg and time_vs_gamma.svg in `out_dir`. Rows keep manifest order whatever the
    worker count.

    Returns:
     - int: 0, 1 unreadable manifest, 4 malformed manifest
    """
    config = _config(log, log_debug, verbose, out_dir)
    manifest = csv_to_df(manifest_path, config=config)
    if manifest is None:
        return _fail(config, EXIT_IO, "Cannot read manifest %s", manifest_path)
    missing = {"instance", "variant", "time_limit"} - set(manifest.columns)
    if missing:
        return _fail(config, EXIT_USAGE, "Manifest is missing columns %s", sorted(missing))
    if workers < 1:
        return _fail(config, EXIT_USAGE, "--workers must be >= 1")

    base_dir = Path(manifest_path).resolve().parent
    cells = manifest.to_dict(orient="records")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(lambda c: _bench_cell(c, base_dir, seed, config), cells))
    else:
        outcomes = [_bench_cell(cell, base_dir, seed, config) for cell in cells]

    rows = [row for row, _, _ in outcomes]
    os.makedirs(out_dir, exist_ok=True)
    df_to_csv(results_frame(rows), os.path.join(out_dir, "results.csv"), config=config)
    df_to_csv(
        warm_start_frame(_warm_start_rows(outcomes, config)),
        os.path.join(out_dir, "warm_start_gap.csv"),
        config=config,
    )

    series = {}
    for row, events, _ in outcomes:
        label = f"{row['instance']}/{row['variant']}"
        points = [(e.elapsed, e.gap) for e in events if e.gap is not None]
        if points:
            series[label] = points
    save_svg(
        line_chart(series, "Optimality gap over time", "time (s)", "gap (%)"),
        os.path.join(out_dir, "gap_vs_time.svg"),
    )
    labels = [
        f"{row['instance']} g={instance.gamma:g}"
        if instance is not None and instance.gamma is not None
        else f"{row['instance']}"
        for row, _, instance in outcomes
    ]
    times = [row["wall_s"] if row["wall_s"] is not None else 0.0 for row in rows]
    save_svg(
        bar_chart(labels, times, "Computation time by unladen mass factor", "instance", "time (s)"),
        os.path.join(out_dir, "time_vs_gamma.svg"),
    )
    config.logger.info("Bench finished: %s cells", len(rows))
    print(os.path.join(out_dir, "results.csv"))
    return EXIT_OK


@plac.annotations(
    profiles=("Int. Random heading profiles per case. Default: 100", "option", "k", int),
    seed=("Int. Seed for the profiles. Default: 0", "option", "s", int),
    v0=("Float. Speed relative to the medium. Default: 2", "option", None, float),
    vw=("Float. Medium speed for the windy cases. Default: 1", "option", None, float),
    steps=("Int. Integration steps per profile. Default: 10000", "option", None, int),
    log=("Str. Directory to save log files. Default: none", "option", "l", str),
    verbose=("Bool. Whether to print logs to the terminal ", "flag", "v"),
)
def cmd_verify_energy(profiles=100, seed=0, v0=2.0, vw=1.0, steps=10_000, log="", verbose=False):
    """
    Checks the energy/time/displacement identity on random heading profiles
    for every drag law, in a still and a moving medium.

    Returns:
     - int: 0 when every relative residual is within tolerance, 1 otherwise,
        4 for bad arguments
    """
    config = _config(log, False, verbose)
    if profiles < 1 or steps < 10:
        return _fail(config, EXIT_USAGE, "--profiles must be >= 1 and --steps >= 10")
    rng = np.random.default_rng(seed)
    drags = {
        DragMode.AERODYNAMIC: DragParams(mode=DragMode.AERODYNAMIC),
        DragMode.ROLLING: DragParams(mode=DragMode.ROLLING),
        DragMode.AFFINE: DragParams(mode=DragMode.AFFINE, a=0.5, b=2.0),
    }
    start = KinematicState()
    ok = True
    try:
        shapes = [random_profile(rng) for _ in range(profiles)]
        for mode, drag in drags.items():
            for medium in (0.0, vw):
                model = build_power_model(drag, v0, medium)
                worst = 0.0
                for profile in shapes:
                    dt = profile.duration / steps
                    _, _, energy = simulate(model, profile, start, dt)
                    residual = energy_identity_residual(model, profile, start, dt)
                    worst = max(worst, residual / energy)
                limit = STILL_MEDIUM_TOL if medium == 0.0 else ENERGY_TOL
                passed = worst <= limit
                ok = ok and passed
                print(
                    f"{mode.value}\tvw={medium:g}\tmax relative residual={worst:.3e}\t"
                    f"{'ok' if passed else 'FAIL'}"
                )
    except LdtspError as e:
        return _fail(config, EXIT_USAGE, "Invalid energy settings: %s", e)
    return EXIT_OK if ok else EXIT_IO


COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "evaluate": cmd_evaluate,
    "export": cmd_export,
    "bench": cmd_bench,
    "verify-energy": cmd_verify_energy,
}


def main(argv=None):
    """
    Dispatches to a subcommand; each subcommand parses its own options.

    Inputs:
     - argv (list of str or None): command name then its arguments.
        Default: sys.argv[1:]

    Returns:
     - int exit code
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in COMMANDS:
        given = argv[0] if argv else ""
        print(f"Unknown command {given!r}; use one of {', '.join(COMMANDS)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return plac.call(COMMANDS[argv[0]], argv[1:])
    except SystemExit as e:
        # argparse exits 0 after --help and 2 on a usage error
        return EXIT_OK if not e.code else EXIT_USAGE


def pyproject_entry(*args, **kwargs):
    """Entry point for scripts from the [project.scripts] section of pyproject.toml"""
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
