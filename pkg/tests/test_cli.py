import os

import numpy as np
import pytest

from bcred.cli import main
from bcred.config import load_config, parse_config_text, resolve_config
from bcred.exceptions import ConfigError
from bcred.io import read_matrix_file, read_pgm, read_vector_csv, write_vector_csv
from bcred.radon import radon_matrix

RIDGE = """
phantom.kind = piecewise-constant-1d
phantom.n = 64
forward.kind = gaussian-random
forward.m = 32
forward.seed = 1
denoiser.kind = gradient-step
denoiser.lam = 0.1
solver.iterations = 2000
solver.stop_tol = 1e-30
partition.blocks = 8
oracle.kind = ridge
output.trace = trace.csv
output.image = x.csv
output.summary = summary.ini
"""

IMAGE = """
phantom.kind = shepp-like
phantom.height = 16
phantom.width = 16
phantom.seed = 3
forward.kind = radon
forward.angles = 6
noise.input_snr_db = 30
noise.seed = 2
denoiser.kind = tv2d
denoiser.lam = 0.05
denoiser.inner_iters = 30
solver.selection = iid
solver.seed = 5
solver.iterations = 15
solver.pad = 2
partition.kind = tile-2d
partition.tile_h = 8
partition.tile_w = 8
certificate.trials = 10
output.trace = img_trace.csv
output.image = img.pgm
output.summary = img_summary.ini
"""


def _write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _summary(path):
    out = {}
    for line in open(path):
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def test_ridge_run_reports_small_distance(tmp_path, capsys):
    assert main(["run", _write(tmp_path, RIDGE)]) == 0
    s = _summary(tmp_path / "summary.ini")
    assert float(s["result.final_distance"]) <= 1e-8
    assert s["result.certificate"] == "pass"
    assert s["result.valid"] == "true"
    assert float(s["result.gamma"]) == pytest.approx(
        1 / (float(s["result.L_max"]) + 2.0))
    x = read_vector_csv(tmp_path / "x.csv")
    assert x.shape == (64,)
    assert "final_snr_db" in capsys.readouterr().out


def test_runs_are_byte_identical_and_summary_reruns(tmp_path):
    cfg = _write(tmp_path, IMAGE)
    assert main(["run", cfg]) == 0
    files = ["img_trace.csv", "img.pgm", "img_summary.ini"]
    first = {f: (tmp_path / f).read_bytes() for f in files}
    assert main(["run", cfg]) == 0
    assert all((tmp_path / f).read_bytes() == first[f] for f in files)
    rerun = tmp_path / "rerun.ini"
    rerun.write_bytes(first["img_summary.ini"])
    assert main(["run", str(rerun)]) == 0
    assert all((tmp_path / f).read_bytes() == first[f] for f in files)
    assert read_pgm(tmp_path / "img.pgm").shape == (16, 16)


def test_summary_embeds_resolved_defaults(tmp_path):
    assert main(["run", _write(tmp_path, RIDGE)]) == 0
    s = _summary(tmp_path / "summary.ini")
    assert s["solver.selection"] == "cyclic"
    assert s["solver.gamma"] == "auto"
    assert os.path.isabs(s["output.trace"])


def test_unsafe_step_exit_code(tmp_path, capsys):
    bad = RIDGE.replace("solver.iterations = 2000", "solver.gamma = 0.5\nsolver.iterations = 5")
    assert main(["run", _write(tmp_path, bad)]) == 3
    assert "invalid step-size" in capsys.readouterr().err
    ok = bad + "solver.allow_unsafe_step = true\n"
    assert main(["run", _write(tmp_path, ok, "ok.ini")]) == 0
    assert _summary(tmp_path / "summary.ini")["result.unsafe_step"] == "true"


@pytest.mark.parametrize("text,key", [
    ("phantom.kind = piecewise-constant-1d\nphantom.nn = 3\n", "phantom.nn"),
    (RIDGE.replace("phantom.n = 64", "phantom.n = sixty"), "phantom.n"),
    (RIDGE.replace("partition.blocks = 8", "partition.blocks = 8\npartition.blocks = 4"),
     "partition.blocks"),
    (RIDGE.replace("denoiser.kind = gradient-step\n", ""), "denoiser.kind"),
    (RIDGE.replace("output.image = x.csv", "output.image = trace.csv"), "output.summary"),
    (RIDGE.replace("solver.stop_tol = 1e-30", "solver.cached_residual = yes"),
     "solver.cached_residual"),
])
def test_config_errors_name_the_key(tmp_path, capsys, text, key):
    assert main(["run", _write(tmp_path, text)]) == 2
    assert key in capsys.readouterr().err


def test_validation_error_exit(tmp_path):
    bad = RIDGE.replace("partition.blocks = 8", "partition.blocks = 100")
    assert main(["run", _write(tmp_path, bad)]) == 3


def test_x0_file(tmp_path):
    write_vector_csv(np.ones(64), tmp_path / "x0.csv")
    text = RIDGE + "solver.x0 = file\nsolver.x0_file = x0.csv\nsolver.iterations = 0\n"
    text = text.replace("solver.iterations = 2000\n", "")
    assert main(["run", _write(tmp_path, text)]) == 0
    assert np.array_equal(read_vector_csv(tmp_path / "x.csv"), np.ones(64))


def test_result_keys_ignored_and_paths_resolved(tmp_path):
    raw = parse_config_text(RIDGE + "result.final_snr_db = 3\n")
    cfg = resolve_config(raw, str(tmp_path))
    assert cfg["output.trace"] == str(tmp_path / "trace.csv")
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.ini"))


def test_denoise_command(tmp_path, capsys):
    text = IMAGE.replace("output.image = img.pgm", "output.image = den.pgm")
    assert main(["denoise", _write(tmp_path, text)]) == 0
    out = capsys.readouterr().out
    assert "input_snr_db = 30.0" in out
    assert read_pgm(tmp_path / "den.pgm").shape == (16, 16)


def test_genmat(tmp_path):
    out = str(tmp_path / "r.bmat")
    assert main(["genmat", "radon:8:4", out]) == 0
    assert np.array_equal(read_matrix_file(out), radon_matrix(8, 4))
    assert main(["genmat", "gaussian:3:5:7", out]) == 0
    assert read_matrix_file(out).shape == (3, 5)
    assert main(["genmat", "identity:4", out]) == 0
    assert main(["genmat", "nope", out]) == 2


def test_matrix_file_experiment(tmp_path):
    assert main(["genmat", "radon:8:6", str(tmp_path / "r.bmat")]) == 0
    text = IMAGE.replace("forward.kind = radon", "forward.kind = matrix-file\nforward.path = r.bmat")
    text = text.replace("phantom.height = 16", "phantom.height = 8")
    text = text.replace("phantom.width = 16", "phantom.width = 8")
    text = text.replace("partition.tile_h = 8", "partition.tile_h = 4")
    text = text.replace("partition.tile_w = 8", "partition.tile_w = 4")
    assert main(["run", _write(tmp_path, text)]) == 0


def test_check_command(capsys):
    assert main(["check", ""]) == 0
    assert "no checks selected" in capsys.readouterr().out
    assert main(["check", "core-blocks,metrics-harness"]) == 0
    assert main(["check", "nonsense"]) == 2


def test_check_with_fixture_reports_one_xfail(capsys):
    assert main(["check", "denoisers", "--include-fixtures"]) == 0
    out = capsys.readouterr().out
    assert out.count(" xfail ") == 1
    assert "FAIL" not in out
