import warnings

import pytest

from fucik_lab.cli_io import RunConfig, main, parse_config, read_curve_csv, run
from fucik_lab.errors import ConfigError

SMALL = """
# coarse config for tests
domain.intervals = [[-1, 1]]
kernel.s = 0.25
mesh.N = 32
task.p = 1.0
task.p_max = 2
task.dp = 0.5
"""


def test_defaults():
    cfg = parse_config("task = spectrum\n")
    assert (cfg.N, cfg.s, cfg.intervals) == (256, 0.25, [[-1.0, 1.0]])


@pytest.mark.parametrize("text,key", [
    ("kernel.s = 0.7", "kernel.s"),
    ("domain.intervals = [[1,0]]", "domain.intervals"),
    ("mesh.N = 8", "mesh.N"),
    ("mesh.N = 12.5", "mesh.N"),
    ("task.tol = -1", "task.tol"),
    ("kernel.sigma = 1", "kernel.sigma"),
    ("task = fly", "task"),
    ("f.kind = cubic", "f.kind"),
    ("kernel.allow_high_order = maybe", "kernel.allow_high_order"),
    ("kernel.s = 0.2\nkernel.s = 0.3", "kernel.s"),
])
def test_rejections_name_the_key(text, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        parse_config(text)


def test_high_order_override_accepted():
    cfg = parse_config("kernel.s = 0.7\nkernel.allow_high_order = true\n")
    assert cfg.kernel().s == 0.7


def test_curve_outputs_deterministic(tmp_path):
    cfg = parse_config(SMALL + f"task = curve\noutput.dir = {tmp_path}\n")
    rep = run(cfg)
    assert rep.passed
    first = (tmp_path / "curve.csv").read_bytes()
    run(cfg)
    assert (tmp_path / "curve.csv").read_bytes() == first
    text = first.decode()
    assert text.startswith("# s=0.25 lambda=1 N=32 domain=(-1,1) version=v")
    assert text.splitlines()[1] == "p,alpha,beta,residual,method"
    rows = read_curve_csv(tmp_path / "curve.csv")
    assert rows[0][0] == 0.0 and any(r[0] < 0 for r in rows)
    svg = (tmp_path / "curve.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 5 and svg.count("<circle") == 2


def test_corrupt_cache_recomputed(tmp_path):
    cfg = parse_config(SMALL + f"task = spectrum\noutput.dir = {tmp_path}\n")
    run(cfg)
    first = (tmp_path / "spectrum.csv").read_bytes()
    (bin_file,) = (tmp_path / "cache").glob("*.bin")
    bin_file.write_bytes(b"FKLB\x00")
    with pytest.warns(RuntimeWarning):
        run(cfg)
    assert (tmp_path / "spectrum.csv").read_bytes() == first
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        run(cfg)


def test_nonres_from_curve_csv(tmp_path):
    run(parse_config(SMALL + f"task = curve\noutput.dir = {tmp_path}\n"))
    cfg = parse_config(SMALL + f"task = nonres\noutput.dir = {tmp_path}\n"
                       "f.kind = piecewise-asymptotic\n"
                       f"f.curve_csv = {tmp_path / 'curve.csv'}\nf.target_p = 1.0\n")
    rep = run(cfg)
    assert rep.passed, rep.checks
    assert (tmp_path / "nonres_u.csv").read_text().splitlines()[1] == "node_x,u"


def test_main_tasks_and_exit_codes(tmp_path, capsys):
    conf = tmp_path / "run.cfg"
    conf.write_text(SMALL)
    for task in ("spectrum", "minimax", "validate"):
        assert main([task, "--config", str(conf), "--out", str(tmp_path / task)]) == 0
    out = capsys.readouterr().out
    assert "checks passed" in out and "[FAIL]" not in out
    assert (tmp_path / "minimax" / "minimax_history.csv").exists()
    assert main(["curve", "--config", str(conf), "--out", str(tmp_path / "nc"), "--no-cache"]) == 0
    assert not (tmp_path / "nc" / "cache").exists()
    bad = tmp_path / "bad.cfg"
    bad.write_text("kernel.s = 0.9\n")
    assert main(["spectrum", "--config", str(bad)]) == 2


def test_failed_validator_gives_nonzero_exit(tmp_path, monkeypatch):
    from fucik_lab import cli_io

    def failing(cfg, gp, out, rep):
        rep.check("forced failure", False, 1.0)

    monkeypatch.setitem(cli_io._RUNNERS, "spectrum", failing)
    conf = tmp_path / "run.cfg"
    conf.write_text(SMALL)
    assert main(["spectrum", "--config", str(conf), "--out", str(tmp_path)]) == 1


def test_module_error_exit_code(tmp_path):
    conf = tmp_path / "run.cfg"
    conf.write_text(SMALL.replace("task.dp = 0.5", "task.dp = 2"))
    # two curve samples are too few for the validators
    assert main(["validate", "--config", str(conf), "--out", str(tmp_path)]) == 3


def test_run_config_direct(tmp_path):
    cfg = RunConfig(task="spectrum", N=16, out=str(tmp_path), cache=False)
    assert run(cfg).summary["lam1"] > 0
