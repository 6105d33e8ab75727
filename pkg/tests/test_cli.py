import subprocess
import sys

import pytest

from beamsim.cli import main
from beamsim.harness import CSV_HEADER, read_csv

SMALL = "n_t = 16\nn_r = 8\nn_rf_t = 4\nn_rf_r = 4\np = 2\nq = 2\nbits = 5\ntrials = 2\nn_vectors = 20\n"


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL + "snr_db = 0,10\n")
    return path


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["se-sweep", "--bogus"])
        assert exc.value.code == 1
        assert "usage" in capsys.readouterr().err

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1

    def test_bad_config(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("colour = blue\n")
        assert main(["se-sweep", "--config", str(path)]) == 1
        assert "usage" in capsys.readouterr().err

    def test_every_cell_failed(self, tmp_path):
        path = tmp_path / "fail.cfg"
        path.write_text(SMALL + "sweep_var = n_rf\nvalues = 1,2\nn_s = 3\nschemes = omp\n")
        assert main(["se-sweep", "--config", str(path), "--out", str(tmp_path / "o.csv")]) == 2


class TestSweeps:
    def test_se_to_file(self, cfg_file, tmp_path):
        out = tmp_path / "se.csv"
        assert main(["se-sweep", "--config", str(cfg_file), "--out", str(out), "--seed", "4", "--trials", "3"]) == 0
        rows = read_csv(out)
        assert len(rows) == 2 * 3 and all(r.seed == 4 and r.trials == 3 for r in rows)

    def test_ber_to_stdout(self, cfg_file, capsys):
        assert main(["ber-sweep", "--config", str(cfg_file), "--workers", "1"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert all(",ber," in line for line in lines[1:])

    def test_env_workers(self, cfg_file, tmp_path, monkeypatch):
        monkeypatch.setenv("BEAMSIM_WORKERS", "2")
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["se-sweep", "--config", str(cfg_file), "--out", str(a)]) == 0
        assert main(["se-sweep", "--config", str(cfg_file), "--out", str(b), "--workers", "1"]) == 0
        assert a.read_text() == b.read_text()


class TestOtherCommands:
    def test_complexity(self, capsys):
        assert main(["complexity"]) == 0
        out = capsys.readouterr().out
        assert "total=1605632" in out and "total=16416" in out
        assert "reduction vs omp: 98.9776%" in out

    def test_complexity_csv(self, tmp_path):
        out = tmp_path / "c.csv"
        assert main(["complexity", "--b", "8", "--out", str(out)]) == 0
        (row,) = read_csv(out)
        assert row.metric == "flops_reduction" and 0 < row.mean < 1

    def test_dumps(self, tmp_path):
        ch, cb = tmp_path / "ch.txt", tmp_path / "cb.csv"
        assert main(["channel-dump", "--nt", "8", "--nr", "4", "--p", "2", "--q", "1", "--out", str(ch)]) == 0
        assert ch.read_text().startswith("# beamsim channel dump")
        assert main(["codebook-dump", "--n", "4", "--b", "3", "--out", str(cb)]) == 0
        assert len(cb.read_text().splitlines()) == 9

    def test_selftest(self, capsys):
        assert main(["selftest", "--seed", "2"]) == 0
        assert capsys.readouterr().out.count(" ok") == 3

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "beamsim", "complexity"], capture_output=True, text=True)
        assert proc.returncode == 0 and "98.9776%" in proc.stdout
