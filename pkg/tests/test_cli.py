import csv
from pathlib import Path

import numpy as np
import pytest

from linedg.cli import main, run_elliptic, run_parabolic, run_study
from linedg.config import parse_config

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

SMALL_STUDY = """
domain: {lo: [0, 0, 0], hi: [1, 1, 0.25]}
curve:
  kind: line
  start: [0.6666666666666666, 0.3333333333333333, 0.0]
  end: [0.6666666666666666, 0.3333333333333333, 0.25]
degree: 1
levels:
  - [4, 4, 1]
  - [8, 8, 2]
regions:
  boxA: {lo: [0.25, 0.5, 0.0], hi: [0.5, 0.75, 0.25]}
exact: log_line
solver: {rel_tol: 1.0e-10}
mode: elliptic
"""


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_single_solve_outputs(tmp_path):
    cfg = parse_config(SMALL_STUDY)
    out = run_elliptic(cfg, tmp_path, vtk=True)
    rows = read_csv(tmp_path / "errors.csv")
    assert rows[0][:3] == ["k", "h", "n_dof"]
    assert "err_L2_global" in rows[0]
    assert "err_L2_boxA" in rows[0]
    assert (tmp_path / "solution_k1_n4x4x1.vtk").exists()
    assert (tmp_path / "metadata.yaml").exists()
    assert out["errors"]["err_L2_global"] > 0


def test_error_columns_absent_without_exact(tmp_path):
    cfg = parse_config(SMALL_STUDY.replace("exact: log_line", "exact: none"))
    run_elliptic(cfg, tmp_path, vtk=False)
    rows = read_csv(tmp_path / "errors.csv")
    assert rows[0] == ["k", "h", "n_dof"]


def test_zero_source_zero_data_gives_zero_solution(tmp_path):
    text = SMALL_STUDY.replace("exact: log_line", "exact: none") + (
        "source: {kind: constant, value: 0.0}\n"
    )
    cfg = parse_config(text)
    out = run_elliptic(cfg, tmp_path, vtk=False)
    assert np.abs(out["field"].coeffs).max() < 1e-12


def test_study_rates_and_csv(tmp_path):
    cfg = parse_config(SMALL_STUDY)
    result = run_study(cfg, tmp_path)
    assert (tmp_path / "study.csv").exists()
    assert (tmp_path / "study.txt").exists()
    assert 1.5 < result["rates"]["err_L2_boxA"][-1] < 2.4
    assert not result["violations"]


def test_study_needs_two_levels(tmp_path):
    cfg = parse_config(SMALL_STUDY.replace("\n  - [8, 8, 2]", ""))
    with pytest.raises(Exception, match="two refinement levels"):
        run_study(cfg, tmp_path)


def test_study_rejects_non_decreasing_levels(tmp_path):
    cfg = parse_config(SMALL_STUDY.replace("[8, 8, 2]", "[4, 4, 1]"))
    with pytest.raises(Exception, match="strictly decrease"):
        run_study(cfg, tmp_path)


def test_study_rate_assertion_exit_code(tmp_path, capsys):
    bad = SMALL_STUDY + "assert_rates:\n  - {norm: l2, region: boxA, min: 3.5, max: 4.0}\n"
    path = tmp_path / "cfg.yaml"
    path.write_text(bad)
    code = main(["study", str(path), "--out-dir", str(tmp_path / "out")])
    assert code == 2
    err = capsys.readouterr().err
    assert "RATE ASSERTION FAILED" in err


def test_cli_config_error_exit_code(tmp_path, capsys):
    path = tmp_path / "cfg.yaml"
    path.write_text("nonsense: true\n")
    code = main(["solve-elliptic", str(path)])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_deterministic_study_csv(tmp_path):
    cfg = parse_config(SMALL_STUDY)
    run_study(cfg, tmp_path / "a")
    run_study(cfg, tmp_path / "b")
    assert (tmp_path / "a" / "study.csv").read_bytes() == (tmp_path / "b" / "study.csv").read_bytes()


def test_metadata_round_trip(tmp_path):
    import yaml

    from linedg.config import config_to_dict, parse_config as reparse

    cfg = parse_config(SMALL_STUDY)
    run_elliptic(cfg, tmp_path, vtk=False)
    meta = yaml.safe_load((tmp_path / "metadata.yaml").read_text())
    emitted = yaml.safe_dump(meta["config"])
    cfg2 = reparse(emitted)
    assert config_to_dict(cfg2) == config_to_dict(cfg)


def test_shipped_sine_demo_runs(tmp_path):
    code = main([
        "solve-elliptic", str(CONFIG_DIR / "sine_demo.yaml"),
        "--out-dir", str(tmp_path), "--vtk",
    ])
    assert code == 0
    vtks = list(tmp_path.glob("*.vtk"))
    assert vtks
    rows = read_csv(tmp_path / "errors.csv")
    assert rows[0] == ["k", "h", "n_dof"]  # no exact solution, no error columns


def test_parabolic_zero_run_all_zero(tmp_path):
    text = SMALL_STUDY.replace("mode: elliptic", "mode: parabolic") + (
        "time: {final: 0.1, steps: 4}\n"
    )
    text = text.replace("exact: log_line", "exact: none")
    text = text.replace("value: 1.0", "value: 0.0")
    cfg = parse_config(text + "source: {kind: constant, value: 0.0}\n")
    result = run_parabolic(cfg, tmp_path, vtk=False)
    assert np.all(result["series"].snapshots == 0)
    rows = read_csv(tmp_path / "history.csv")
    assert rows[0] == ["n", "t", "l2_norm", "dg_norm", "increment_sq_sum"]
    assert all(float(r[2]) == 0.0 for r in rows[1:])


def test_parabolic_steady_state_vs_elliptic(tmp_path):
    from linedg import basis as fb
    from linedg.assembly import DGSpec, assemble_stiffness
    from linedg.curve import assemble_line_rhs
    from linedg.fields import FieldFunction
    from linedg.mesh import build_box_mesh
    from linedg.norms import l2_error
    from linedg.solver import SolverConfig, solve

    text = SMALL_STUDY.replace("mode: elliptic", "mode: parabolic") + (
        "time: {final: 5.0, steps: 50}\n"
    )
    cfg = parse_config(text.replace("exact: log_line", "exact: none"))
    result = run_parabolic(cfg, tmp_path, vtk=False)
    series = result["series"]

    mesh = build_box_mesh(cfg.domain, cfg.levels[0])
    basis = fb.make_basis(1)
    spec = DGSpec(k=1, epsilon=-1, sigma=5.0, beta=1.0)
    system = assemble_stiffness(mesh, spec, basis)
    b = assemble_line_rhs(cfg.build_curve(), 1.0, mesh, basis)
    x = solve(system, b, SolverConfig(rel_tol=1e-12)).x
    gap = FieldFunction.from_vector(mesh, basis, series.snapshots[-1] - x)
    assert l2_error(gap, 0.0) < 1e-9


def test_snapshot_cadence(tmp_path):
    text = SMALL_STUDY.replace("mode: elliptic", "mode: parabolic") + (
        "time: {final: 0.1, steps: 4}\nsnapshot_every: 2\n"
    )
    cfg = parse_config(text.replace("exact: log_line", "exact: none"))
    run_parabolic(cfg, tmp_path, vtk=True)
    snaps = sorted(p.name for p in tmp_path.glob("snapshot_*.vtk"))
    assert snaps == ["snapshot_00000.vtk", "snapshot_00002.vtk", "snapshot_00004.vtk"]
