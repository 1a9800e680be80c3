import filecmp
from pathlib import Path

import pytest

from aplab import cli

ROOT = Path(__file__).resolve().parents[1]


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


FAST = """
[experiment]
name = "quick"
seed = 3

[[check]]
name = "l3count"
[check.params]
n_members = 30
N = 64
"""


def test_list(capsys):
    assert cli.main(["run", "--list"]) == 0
    out = capsys.readouterr().out
    for name in ("l3count", "mass_telescoping", "polar_consistency", "frostman_fit"):
        assert name in out


def test_run_writes_artifacts(tmp_path, capsys):
    cfg = _write(tmp_path, FAST)
    assert cli.main(["run", str(cfg), "--out-dir", str(tmp_path / "o")]) == 0
    files = sorted(p.name for p in (tmp_path / "o").iterdir())
    assert "reports.jsonl" in files
    assert any(f.endswith("-summary.md") for f in files)
    csvs = [f for f in files if f.endswith(".csv")]
    assert csvs
    head = (tmp_path / "o" / csvs[0]).read_text().splitlines()[0]
    assert "config_hash=" in head and "version=" in head
    assert "l3count: pass" in capsys.readouterr().out


def test_rerun_byte_identical(tmp_path):
    cfg = _write(tmp_path, FAST.replace('"l3count"\n[check.params]', '"mass_telescoping"\n[check.params]')
                 .replace("n_members = 30\nN = 64", "n_range = [3, 4, 5]\nN = 729") + '[check.measure]\nkind = "middle_thirds"\n')
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["run", str(cfg), "--out-dir", str(a)])
    cli.main(["run", str(cfg), "--out-dir", str(b)])
    names = sorted(p.name for p in a.iterdir())
    assert any(n.endswith(".svg") for n in names)
    assert names == sorted(p.name for p in b.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert not mismatch and not errors


def test_threads_keep_order(tmp_path):
    text = FAST + '\n[[check]]\nname = "c2_envelope"\n[check.params]\nt = 0.5\n'
    cfg = cli.load_config(_write(tmp_path, text))
    one = [r.to_json() for r in cli.run_checks(cfg, threads=1)]
    four = [r.to_json() for r in cli.run_checks(cfg, threads=4)]
    assert one == four and '"check_name": "c2_envelope"' in one[1]


def test_seed_override_changes_inputs(tmp_path):
    cfg = cli.load_config(_write(tmp_path, FAST))
    a = cli.run_checks(cfg)[0]
    b = cli.run_checks(cfg, seed=99)[0]
    assert a.inputs["seed"] == 3 and b.inputs["seed"] == 99


@pytest.mark.parametrize(
    "body,code",
    [
        ('[[check]]\nname = "c2_envelope"\n[check.params]\nt = 0.5\n', 0),
        ('[[check]]\nname = "frostman_fit"\n[check.measure]\nkind = "point_mass"\nN = 256\n', 1),
        ('[[check]]\nname = "frostman_fit"\n[check.measure]\nkind = "constant"\nN = 16\n', 2),
    ],
)
def test_exit_codes(tmp_path, body, code):
    cfg = _write(tmp_path, '[experiment]\nname = "e"\n' + body)
    assert cli.main(["run", str(cfg), "--out-dir", str(tmp_path / "o")]) == code


@pytest.mark.parametrize(
    "text,needle",
    [
        ('[experiment]\nname = "e"\n[[check]]\nname = "nope"\n', "unknown check"),
        ('[experiment]\nname = "e"\n[[check]]\nname = "l3count"\n[check.params]\nbogus = 1\n', "bogus"),
        ('[experiment]\nname = "e"\n', "at least one"),
        ('[experiment]\nname = "e"\n[[check]]\nname = "mass_telescoping"\n', "needs a [check.measure]"),
        ('[experiment]\nname = "e"\n[[check]]\nname = "l3count"\n[tolerances]\nfoo = 1\n', "foo"),
        ('[experiment\nname = "e"\n', "line"),
        ('[experiment]\nname = "e"\n[[check]]\nname = "frostman_fit"\n[check.measure]\nkind = "blob"\n', "unknown measure kind"),
    ],
)
def test_bad_configs(tmp_path, capsys, text, needle):
    cfg = _write(tmp_path, text)
    assert cli.main(["run", str(cfg)]) == 64
    assert needle in capsys.readouterr().err


def test_nyquist_message(tmp_path, capsys):
    text = ('[experiment]\nname = "e"\n[[check]]\nname = "mass_telescoping"\n[check.params]\n'
            'n_range = [3, 4, 5, 6, 7, 8]\nN = 256\n[check.measure]\nkind = "middle_thirds"\n')
    assert cli.main(["run", str(_write(tmp_path, text))]) == 64
    err = capsys.readouterr().err
    assert "Nyquist" in err and "N >= 1024" in err


def test_missing_config_and_path(tmp_path, capsys):
    assert cli.main(["run"]) == 64
    assert cli.main(["run", str(tmp_path / "missing.toml")]) == 64


def test_sweep(tmp_path):
    cfg = _write(tmp_path, '[experiment]\nname = "s"\n[[check]]\nname = "c2_envelope"\n')
    assert cli.main(["sweep", str(cfg), "--axis", "delta", "--values", "0.3,0.5,0.7", "--out-dir", str(tmp_path / "o")]) == 0
    csvs = list((tmp_path / "o").glob("*.csv"))
    assert len(csvs) == 1 and list((tmp_path / "o").glob("*.svg"))
    lines = csvs[0].read_text().splitlines()
    assert lines[0].startswith("# sweep s axis=delta") and len(lines) == 5


def test_sweep_range_values():
    assert cli._parse_values("3..5,0.5") == [3, 4, 5, 0.5]


@pytest.mark.parametrize("axis,values", [("nonsense", "1,2"), ("t", "")])
def test_sweep_errors(tmp_path, axis, values):
    cfg = _write(tmp_path, '[experiment]\nname = "s"\n[[check]]\nname = "c2_envelope"\n')
    assert cli.main(["sweep", str(cfg), "--axis", axis, "--values", values, "--out-dir", str(tmp_path / "o")]) == 64


@pytest.mark.parametrize("name", sorted(p.name for p in (ROOT / "configs").glob("*.toml")))
def test_shipped_configs_validate(name):
    cli.load_config(ROOT / "configs" / name)
