import json

import pytest

from eulermaxwell import scenarios as sc
from eulermaxwell.cli import EXIT_CHECK, EXIT_ERROR, EXIT_OK, load_config, main

SMALL_MAXWELL = """\
[scenario]
name = maxwell-free-decay
seed = 3

[grid]
n = 16      # small grid keeps the test quick

[scheme]
dt = 1e-2
T = 1.0
"""

VALIDITY = """\
[scenario]
name = validity-report

[grid]
n = 8

[params]
gamma = 1.4

[analysis]
s = 6
"""


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def outputs(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


class TestLoadConfig:
    def test_typed_values(self, tmp_path):
        cfg = load_config(write(tmp_path, SMALL_MAXWELL))
        assert cfg.name == "maxwell-free-decay" and cfg.seed == 3
        assert cfg.get("grid", "n") == 16 and cfg.get("scheme", "T") == 1.0

    def test_override(self, tmp_path):
        cfg = load_config(write(tmp_path, SMALL_MAXWELL), ["scheme.T=0.5", "data.mode=1,0,2"])
        assert cfg.get("scheme", "T") == 0.5 and cfg.get("data", "mode") == (1, 0, 2)

    @pytest.mark.parametrize("text, fragment", [
        ("[scenario]\nname = validity-report\n", "missing required section [grid]"),
        ("[scenario]\nname = nope\n[grid]\nn = 8\n", "line 2"),
        ("[scenario]\nname = validity-report\n[grid]\nn = 8\n\nbogus = 1\n", "line 6: unknown key 'bogus'"),
        ("[scenario]\nname = validity-report\n[grid]\nn = eight\n", "line 4: bad value"),
        ("[scenario]\nname = validity-report\n[grid]\nn = 8\n[extra]\n", "unknown section [extra]"),
        ("[scenario]\nseed = 1\n[grid]\nn = 8\n", "needs a name"),
        ("[scenario]\nname = validity-report\n[grid]\nn = 7\n", "n"),
        ("[scenario]\nname = validity-report\n[grid]\nn = 8\n[scheme]\nmargin = 0.7\n", "margin"),
    ])
    def test_errors_name_the_problem(self, tmp_path, text, fragment):
        with pytest.raises(sc.ConfigError, match=fragment.replace("[", r"\[").replace("]", r"\]")):
            load_config(write(tmp_path, text))

    def test_bad_override(self, tmp_path):
        with pytest.raises(sc.ConfigError, match="--override"):
            load_config(write(tmp_path, SMALL_MAXWELL), ["scheme.bogus=1"])
        with pytest.raises(sc.ConfigError, match="section.key=value"):
            load_config(write(tmp_path, SMALL_MAXWELL), ["T=1"])


class TestMain:
    def test_list_scenarios(self, capsys):
        assert main(["--list-scenarios"]) == EXIT_OK
        names = [line.split()[0] for line in capsys.readouterr().out.splitlines()]
        assert names == list(sc.SCENARIOS)

    def test_missing_config(self, tmp_path, capsys):
        assert main([]) == EXIT_ERROR
        assert main(["--config", str(tmp_path / "absent.ini")]) == EXIT_ERROR
        assert "cannot read config" in capsys.readouterr().err

    def test_missing_grid_section_exits_1(self, tmp_path):
        p = write(tmp_path, "[scenario]\nname = validity-report\n")
        assert main(["--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_ERROR
        assert not (tmp_path / "o").exists()

    def test_validity_report_flags_discrepancy(self, tmp_path, capsys):
        out = tmp_path / "o"
        assert main(["--config", str(write(tmp_path, VALIDITY)), "--out", str(out)]) == EXIT_OK
        summary = json.loads((out / "summary.json").read_text())
        assert summary["scenario"] == "validity-report" and summary["passed"] is True
        v = summary["diagnostics"]["validity"]
        assert v["discrepancy"] is True and v["condP_ok"] is False and v["theorem_ok"] is True
        assert summary["diagnostics"]["arithmetic"] == {
            "c_gamma(5/3)": -0.5, "c_gamma(1.4)": -0.9, "theoretical_exponent(1.4, 0)": 0.9}
        assert summary["config"]["params"]["gamma"] == 1.4
        assert "validity-report: passed" in capsys.readouterr().out

    def test_maxwell_scenario_passes_and_writes_csv(self, tmp_path, capsys):
        out = tmp_path / "o"
        assert main(["--config", str(write(tmp_path, SMALL_MAXWELL)), "--out", str(out)]) == EXIT_OK
        assert {"summary.json", "maxwell_free.csv"} <= set(outputs(out))
        text = capsys.readouterr().out
        assert "PASS  energy_ratio" in text and "FAIL" not in text

    def test_failed_check_exits_2(self, tmp_path):
        # a coarse step misses the 1e-6 energy-ratio tolerance
        p = write(tmp_path, SMALL_MAXWELL)
        code = main(["--config", str(p), "--out", str(tmp_path / "o"),
                     "--override", "scheme.dt=0.2", "--override", "scheme.T=4"])
        assert code == EXIT_CHECK

    def test_domain_error_exits_1(self, tmp_path, capsys):
        p = write(tmp_path, SMALL_MAXWELL)
        assert main(["--config", str(p), "--out", str(tmp_path / "o"), "--override", "scheme.dt=10"]) == EXIT_ERROR
        assert "error: maxwell-free-decay" in capsys.readouterr().err


class TestDeterminism:
    @pytest.mark.parametrize("text", [SMALL_MAXWELL, VALIDITY])
    def test_bit_identical_outputs(self, tmp_path, text):
        p = write(tmp_path, text)
        for d in ("a", "b"):
            assert main(["--config", str(p), "--out", str(tmp_path / d)]) == EXIT_OK
        a, b = outputs(tmp_path / "a"), outputs(tmp_path / "b")
        assert a.keys() == b.keys() and a == b
