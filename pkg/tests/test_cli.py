import contextlib
import glob
import io
import os
import shutil
import tempfile
import types
import unittest

import pandas as pd

import ldtsp.cli.__main__ as ldcli
from ldtsp.classes.solver import SolveStatus
from ldtsp.helpers.export import export_lp
from ldtsp.helpers.formulation import build_milp, evaluate_tour
from ldtsp.helpers.general import RESULT_COLUMNS, WARM_START_GAP_COLUMNS
from ldtsp.helpers.tsplib import random_instance, read_instance_file, write_instance_file

HEXAGON = """NAME: hex6
TYPE: TSP
DIMENSION: 6
EDGE_WEIGHT_TYPE: EUC_2D
NODE_COORD_SECTION
1 10 0
2 5 9
3 -5 9
4 -10 0
5 -5 -9
6 5 -9
EOF
"""


def run(func, *args, **kwargs):
    """Calls a command, returning (exit code, stdout)."""
    out = io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(io.StringIO()):
        code = func(*args, **kwargs)
    return code, out.getvalue()


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self.output_dir = tempfile.mkdtemp()
        self.instance = random_instance(4, gamma=5, seed=2)
        self.instance_path = os.path.join(self.output_dir, "rand4.ldtsp")
        write_instance_file(self.instance, self.instance_path)

    def tearDown(self):
        shutil.rmtree(self.output_dir)


class TestGenerate(CliTestCase):
    def test_default_path(self):
        tsp = os.path.join(self.output_dir, "hex6.tsp")
        with open(tsp, "w", encoding="utf-8") as f:
            f.write(HEXAGON)
        code, out = run(
            ldcli.cmd_generate, tsp, seed=3, gamma=2.0, output_dir=self.output_dir, log=""
        )
        self.assertEqual(code, 0)
        path = os.path.join(self.output_dir, "hex6_g2_s3.ldtsp")
        self.assertEqual(out.strip(), path)
        instance = read_instance_file(path)
        self.assertEqual(instance.depot, 6)
        self.assertEqual(instance.gamma, 2.0)
        self.assertAlmostEqual(instance.unladen, 2.0 * instance.total_mass, places=12)

    def test_explicit_depot(self):
        tsp = os.path.join(self.output_dir, "hex6.tsp")
        with open(tsp, "w", encoding="utf-8") as f:
            f.write(HEXAGON)
        out = os.path.join(self.output_dir, "custom.ldtsp")
        code, _ = run(ldcli.cmd_generate, tsp, depot=1, out=out, log="")
        self.assertEqual(code, 0)
        self.assertEqual(read_instance_file(out).depot, 1)

    def test_unreadable(self):
        code, _ = run(ldcli.cmd_generate, os.path.join(self.output_dir, "missing.tsp"), log="")
        self.assertEqual(code, ldcli.EXIT_IO)
        bad = os.path.join(self.output_dir, "bad.tsp")
        with open(bad, "w", encoding="utf-8") as f:
            f.write(HEXAGON.replace("EUC_2D", "ATT"))
        code, _ = run(ldcli.cmd_generate, bad, log="")
        self.assertEqual(code, ldcli.EXIT_IO)


class TestSolve(CliTestCase):
    def test_solve_appends_results(self):
        csv = os.path.join(self.output_dir, "results.csv")
        for variant in ("core", "astar"):
            code, out = run(
                ldcli.cmd_solve,
                self.instance_path,
                variant=variant,
                output_dir=self.output_dir,
                log="",
            )
            self.assertEqual(code, ldcli.EXIT_OK)
            self.assertIn("status=optimal", out)
            self.assertIn("tour: ", out)
        df = pd.read_csv(csv)
        self.assertEqual(list(df.columns), RESULT_COLUMNS)
        self.assertEqual(list(df["variant"]), ["core_milp", "astar"])
        self.assertAlmostEqual(df["cost"][0], df["cost"][1], delta=1e-6 * df["cost"][0])
        self.assertTrue(glob.glob(os.path.join(self.output_dir, "*_core_milp.events")))

    def test_explicit_outputs(self):
        csv = os.path.join(self.output_dir, "mine.csv")
        events = os.path.join(self.output_dir, "run.events")
        code, _ = run(
            ldcli.cmd_solve,
            self.instance_path,
            variant="baseline2",
            warm_start="off",
            out_csv=csv,
            events=events,
            log="",
        )
        self.assertEqual(code, 0)
        self.assertEqual(pd.read_csv(csv)["variant"][0], "baseline2_milp_dfj")
        with open(events, encoding="utf-8") as f:
            lines = f.read().splitlines()
        self.assertTrue(lines)
        self.assertTrue(all(line.startswith("t=") for line in lines))

    def test_usage_errors(self):
        for kwargs in (
            {"variant": "minlp"},
            {"variant": "gurobi"},
            {"warm_start": "maybe"},
            {"time_limit": 0.0},
            {"workers": 0},
        ):
            code, _ = run(
                ldcli.cmd_solve, self.instance_path, output_dir=self.output_dir, log="", **kwargs
            )
            self.assertEqual(code, ldcli.EXIT_USAGE, kwargs)

    def test_unreadable_instance(self):
        code, _ = run(
            ldcli.cmd_solve,
            os.path.join(self.output_dir, "missing.ldtsp"),
            output_dir=self.output_dir,
            log="",
        )
        self.assertEqual(code, ldcli.EXIT_IO)

    def test_status_codes(self):
        tour = object()
        self.assertEqual(
            ldcli._status_code(types.SimpleNamespace(status=SolveStatus.OPTIMAL, incumbent=tour)),
            0,
        )
        limited = types.SimpleNamespace(status=SolveStatus.FEASIBLE_TIME_LIMIT, incumbent=tour)
        self.assertEqual(ldcli._status_code(limited), 2)
        empty = types.SimpleNamespace(status=SolveStatus.FEASIBLE_TIME_LIMIT, incumbent=None)
        self.assertEqual(ldcli._status_code(empty), 3)


class TestEvaluate(CliTestCase):
    def test_table(self):
        order = self.instance.targets[::-1]
        sequence = ",".join(str(t) for t in order)
        code, out = run(ldcli.cmd_evaluate, self.instance_path, sequence=sequence)
        self.assertEqual(code, 0)
        lines = out.splitlines()
        self.assertEqual(lines[0], "leg\tfrom\tto\tmass\tdistance\tenergy")
        self.assertEqual(len(lines), 1 + len(order) + 1 + 1)
        _, cost = evaluate_tour(self.instance, order)
        self.assertEqual(lines[-1], f"total\t{cost:.10g}")

    def test_bad_sequences(self):
        for sequence in ("", "1,1,2,3", "1,2", "a,b,c,d", "1,,2"):
            code, _ = run(ldcli.cmd_evaluate, self.instance_path, sequence=sequence)
            self.assertEqual(code, ldcli.EXIT_USAGE, sequence)


class TestExport(CliTestCase):
    def test_lp_file(self):
        code, out = run(ldcli.cmd_export, self.instance_path, output_dir=self.output_dir)
        self.assertEqual(code, 0)
        path = out.strip()
        self.assertTrue(path.endswith("_core.lp"))
        with open(path, encoding="utf-8", newline="") as f:
            text = f.read()
        self.assertEqual(text, export_lp(build_milp(self.instance)))
        self.assertNotIn("\r", text)

    def test_minlp_mps(self):
        out_path = os.path.join(self.output_dir, "model.mps")
        code, _ = run(
            ldcli.cmd_export, self.instance_path, variant="minlp", format="mps", out=out_path
        )
        self.assertEqual(code, 0)
        with open(out_path, encoding="utf-8") as f:
            self.assertIn("QUADOBJ", f.read())

    def test_unsupported(self):
        code, _ = run(ldcli.cmd_export, self.instance_path, variant="astar")
        self.assertEqual(code, ldcli.EXIT_USAGE)
        code, _ = run(ldcli.cmd_export, self.instance_path, format="xml")
        self.assertEqual(code, ldcli.EXIT_USAGE)


class TestBench(CliTestCase):
    def write_manifest(self, text):
        path = os.path.join(self.output_dir, "manifest.csv")
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path

    def test_bench_outputs(self):
        manifest = self.write_manifest(
            "instance,variant,time_limit\n"
            "rand4.ldtsp,core,60\n"
            "rand4.ldtsp,astar,60\n"
            "rand4.ldtsp,simplex,60\n"
            "missing.ldtsp,core,60\n"
        )
        bench_dir = os.path.join(self.output_dir, "bench")
        code, _ = run(ldcli.cmd_bench, manifest, out_dir=bench_dir, workers=2, log="")
        self.assertEqual(code, 0)
        df = pd.read_csv(os.path.join(bench_dir, "results.csv"))
        self.assertEqual(list(df.columns), RESULT_COLUMNS)
        self.assertEqual(list(df["variant"]), ["core", "astar", "simplex", "core"])
        self.assertEqual(list(df["status"]), ["optimal", "optimal", "error", "error"])
        for name in ("gap_vs_time.svg", "time_vs_gamma.svg"):
            with open(os.path.join(bench_dir, name), encoding="utf-8") as f:
                self.assertTrue(f.read().startswith("<svg"))
        warm = pd.read_csv(os.path.join(bench_dir, "warm_start_gap.csv"))
        self.assertEqual(list(warm.columns), WARM_START_GAP_COLUMNS)
        self.assertEqual(list(warm["instance"]), ["rand4"])
        self.assertEqual(int(warm["targets"][0]), 4)
        self.assertGreaterEqual(warm["warm_cost"][0], warm["optimal_cost"][0] - 1e-9)
        self.assertGreaterEqual(warm["gap_pct"][0], -1e-9)

    def test_bad_manifests(self):
        manifest = self.write_manifest("instance,variant\nrand4.ldtsp,core\n")
        code, _ = run(ldcli.cmd_bench, manifest, out_dir=self.output_dir, log="")
        self.assertEqual(code, ldcli.EXIT_USAGE)
        missing = os.path.join(self.output_dir, "none.csv")
        code, _ = run(ldcli.cmd_bench, missing, out_dir=self.output_dir, log="")
        self.assertEqual(code, ldcli.EXIT_IO)


class TestVerifyEnergy(unittest.TestCase):
    def test_passes(self):
        code, out = run(ldcli.cmd_verify_energy, profiles=3)
        self.assertEqual(code, 0)
        lines = out.splitlines()
        self.assertEqual(len(lines), 6)
        self.assertTrue(all(line.endswith("ok") for line in lines))

    def test_bad_arguments(self):
        self.assertEqual(run(ldcli.cmd_verify_energy, profiles=0)[0], ldcli.EXIT_USAGE)
        self.assertEqual(run(ldcli.cmd_verify_energy, vw=5.0)[0], ldcli.EXIT_USAGE)


class TestMain(CliTestCase):
    def test_dispatch(self):
        order = ",".join(str(t) for t in self.instance.targets)
        code, out = run(ldcli.main, ["evaluate", self.instance_path, "-q", order])
        self.assertEqual(code, 0)
        self.assertTrue(out.startswith("leg\t"))

    def test_unknown_command(self):
        self.assertEqual(run(ldcli.main, ["frobnicate"])[0], ldcli.EXIT_USAGE)
        self.assertEqual(run(ldcli.main, [])[0], ldcli.EXIT_USAGE)

    def test_bad_option(self):
        code, _ = run(ldcli.main, ["evaluate", self.instance_path, "--no-such-option"])
        self.assertEqual(code, ldcli.EXIT_USAGE)


def main():
    unittest.main()


if __name__ == "__main__":
    main()
