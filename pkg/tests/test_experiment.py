import csv
import io

import pytest

from dcomp.cli import main
from dcomp.errors import ConfigError
from dcomp.experiment import (
    DC_OMP,
    DETECT,
    ExperimentConfig,
    apply_overrides,
    load_config,
    preset,
    replay,
    run_experiment,
    simulate,
)
from dcomp.model import H0

SMALL = dict(n=64, k=4, n_nodes=4, m_values=(16, 32), trials=6, workers=1)


def small(**kw):
    return ExperimentConfig(**{**SMALL, **kw})


def parse(text):
    body = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_default_grid():
    assert ExperimentConfig().grid == [13, 26, 38, 51, 64, 77, 90, 102, 115, 128]


def test_validation_names_field():
    with pytest.raises(ConfigError) as e:
        small(trials=0).validate()
    assert e.value.field == "trials"
    with pytest.raises(ConfigError) as e:
        small(m_values=(2,)).validate()
    assert e.value.field == "m_values"
    with pytest.raises(ConfigError) as e:
        small(topology="mesh").validate()
    assert e.value.field == "topology"


def test_overrides_and_file(tmp_path):
    cfg = apply_overrides(ExperimentConfig(), ["K=5", "grid=0.1,0.2", "algorithms=dc-omp"])
    assert cfg.k == 5 and cfg.ratios == (0.1, 0.2) and cfg.algorithms == (DC_OMP,)
    path = tmp_path / "exp.cfg"
    path.write_text("# comment\nN = 128\ntrials=3  # inline\nsomp_normalize = false\n")
    cfg = load_config(path)
    assert (cfg.n, cfg.trials, cfg.somp_normalize) == (128, 3, False)
    with pytest.raises(ConfigError):
        apply_overrides(ExperimentConfig(), ["bogus=1"])


def test_csv_schema_and_determinism():
    a = run_experiment(small())
    b = run_experiment(small())
    assert a == b
    rows = parse(a)
    assert list(rows[0]) == ["algorithm", "M", "N", "K", "L", "snr_db", "metric", "value",
                             "ci_low", "ci_high", "trials"]
    assert {r["algorithm"] for r in rows} == {"dc-omp", "d-omp", "s-omp"}
    assert a.startswith("# grid_M=16,32")


def test_parallel_matches_serial():
    assert run_experiment(small(workers=2)) == run_experiment(small(workers=1))


def test_detection_preset_metrics():
    rows = parse(run_experiment(small(algorithms=(DETECT,), k0=2, i0=1)))
    assert {r["metric"] for r in rows} >= {"P_D_s", "P_F_s", "P_D_u", "P_F_u"}


def test_replay_reproduces_record():
    cfg = small()
    records, _ = simulate(cfg)
    target = next(r for r in records if r.algorithm == DC_OMP and r.m == 16 and r.trial == 4)
    again, rows = replay(cfg, 4, 16, DC_OMP)
    assert again == target
    assert replay(cfg, 4, 16, DC_OMP)[1] == rows
    other, _ = replay(apply_overrides(cfg, ["seed=1"]), 4, 16, DC_OMP)
    assert other.true_support != target.true_support


def test_replay_bounds():
    with pytest.raises(ConfigError):
        replay(small(), 99)
    with pytest.raises(ConfigError):
        replay(small(), 0, m=17)


def test_presets():
    assert preset("fig4").algorithms == (DETECT,)
    with pytest.raises(ConfigError):
        preset("fig9")


def test_cli_run_and_trace(tmp_path, capsys):
    out, trace = tmp_path / "s.csv", tmp_path / "t.csv"
    code = main(["fig2", "--trials", "3", "--grid", "0.1,0.2", "--set", "N=64", "--set", "K=4",
                 "--set", "L=3", "--workers", "1", "--out", str(out), "--trace", str(trace)])
    assert code == 0
    assert parse(out.read_text())[0]["N"] == "64"
    header = trace.read_text().splitlines()[0]
    assert header.startswith("algorithm,M,hypothesis,trial,round,node,announced_index")


def test_cli_stdout(capsys):
    assert main(["fig3", "--trials", "2", "--grid", "0.25", "--set", "N=64", "--set", "K=4",
                 "--workers", "1"]) == 0
    assert "mean_rounds" in capsys.readouterr().out


def test_cli_config_error(capsys):
    assert main(["run", "--set", "K=0"]) == 2
    assert "k:" in capsys.readouterr().err
    assert main(["run", "--config", "/nonexistent/file"]) == 2


def test_cli_io_failure():
    assert main(["fig2", "--trials", "1", "--grid", "0.25", "--set", "N=64", "--set", "K=4",
                 "--workers", "1", "--out", "/nonexistent/dir/x.csv"]) == 3


def test_cli_replay(capsys):
    code = main(["replay", "--preset", "fig4", "--trial", "1", "--trials", "2", "--grid", "0.25",
                 "--set", "N=64", "--set", "K=4", "--set", "L=4", "--hypothesis", H0])
    assert code == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].endswith("i_index,decision")
