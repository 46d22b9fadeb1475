import json
import subprocess
import sys

import numpy as np
import pytest

from crystal_spectra import cli
from crystal_spectra import crystal as cr


@pytest.fixture
def catalog_dir(tmp_path):
    assert cli.main(["catalog", "--out", str(tmp_path / "cat")]) == 0
    return tmp_path / "cat"


def _rows(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), lines[1:]


def test_catalog_writes_loadable_descriptors(catalog_dir):
    for name in cr.CATALOG:
        d = cr.CrystalDescriptor.load(catalog_dir / f"{name}.json")
        assert d == cr.standard_lattice(name)


def test_bands_on_z(tmp_path, catalog_dir):
    out = tmp_path / "z"
    assert cli.main(["bands", "--crystal", str(catalog_dir / "z1.json"), "--grid", "256", "--out", str(out)]) == 0
    header, rows = _rows(out / "bands.csv")
    assert header == ["xi_1", "band_1", "band_2"]
    assert len(rows) == 256
    summary = json.loads((out / "bands_summary.json").read_text())
    assert summary["band_union"] == [[-2.0, 2.0]]
    assert summary["provenance"]["config"]["grid"] == 256
    assert (out / "plot_bands.py").exists()


def test_bands_on_hexagonal(tmp_path, catalog_dir):
    out = tmp_path / "hex"
    assert cli.main(["bands", "--crystal", str(catalog_dir / "hexagonal.json"), "--grid", "64",
                     "--out", str(out)]) == 0
    header, rows = _rows(out / "bands.csv")
    assert len(rows) == 4096
    assert sum(h.startswith("band_") for h in header) == 5


def test_bands_json_format(tmp_path, catalog_dir):
    out = tmp_path / "j"
    assert cli.main(["bands", "--crystal", str(catalog_dir / "z1.json"), "--grid", "8", "--format", "json",
                     "--out", str(out)]) == 0
    data = json.loads((out / "bands.json").read_text())
    np.testing.assert_allclose(np.array(data["eigenvalues"])[:, 1], 2 * np.abs(np.sin(np.pi * np.arange(8) / 8)),
                               atol=1e-12)


def test_missing_file_leaves_nothing(tmp_path, capsys):
    out = tmp_path / "never"
    assert cli.main(["bands", "--crystal", str(tmp_path / "nope.json"), "--out", str(out)]) == 2
    assert not out.exists()
    assert "nope.json" in capsys.readouterr().err


def test_bad_descriptor_is_an_input_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dimension": 1, "vertices": [{"name": "x"}],
                               "edges": [{"from": "x", "to": "y", "eta": [1]}]}))
    out = tmp_path / "o"
    assert cli.main(["bands", "--crystal", str(bad), "--out", str(out)]) == 2
    assert not out.exists()


def test_spectrum_needs_three_radii(tmp_path, catalog_dir):
    out = tmp_path / "s"
    code = cli.main(["spectrum", "--crystal", str(catalog_dir / "z1.json"), "--radius", "100", "--out", str(out)])
    assert code == 2
    assert not out.exists()


def test_spectrum_periodic_and_bump(tmp_path, catalog_dir):
    z = str(catalog_dir / "z1.json")
    radii = ["--radius", "30", "--radius", "60", "--radius", "120"]
    assert cli.main(["spectrum", "--crystal", z, *radii, "--out", str(tmp_path / "p")]) == 0
    doc = json.loads((tmp_path / "p" / "spectrum.json").read_text())
    assert doc["scan"]["verdict"] == "stable"
    assert doc["scan"]["gap_counts"] == [0, 0, 0]

    bump = tmp_path / "bump.json"
    bump.write_text(json.dumps({"potential": {"R_S": [{"base": "vertex:x1", "mu": [0], "value": 5.0}]}}))
    out = tmp_path / "b"
    assert cli.main(["spectrum", "--crystal", z, "--perturbation", str(bump), *radii, "--format", "csv",
                     "--out", str(out)]) == 0
    doc = json.loads((out / "spectrum.json").read_text())
    assert doc["scan"]["verdict"] == "stable"
    assert min(doc["scan"]["gap_counts"]) >= 1
    assert doc["provenance"]["input_sha256"]["perturbation"]
    header, rows = _rows(out / "spectrum.csv")
    assert header == ["radius", "eigenvalue", "label"]
    assert any(r.endswith(",gap") for r in rows)


def test_numeric_failure_exits_3(tmp_path, catalog_dir, monkeypatch, capsys):
    from crystal_spectra.errors import NumericError

    def boom(*args, **kwargs):
        raise NumericError("no convergence", {"k": 6})

    monkeypatch.setattr(cli.sp, "gap_stability_scan", boom)
    out = tmp_path / "f"
    code = cli.main(["spectrum", "--crystal", str(catalog_dir / "z1.json"), "--radius", "2", "--radius", "3",
                     "--radius", "4", "--out", str(out)])
    assert code == 3
    assert not out.exists()
    assert '"k": 6' in capsys.readouterr().err


def test_verify_single_suite_is_deterministic(tmp_path, catalog_dir):
    args = ["verify", "--suite", "claim", "--crystal", str(catalog_dir / "hexagonal.json"), "--seed", "7",
            "--out", str(tmp_path / "v")]
    assert cli.main(args) == 0
    first = (tmp_path / "v" / "verify.json").read_bytes()
    assert cli.main(args) == 0
    assert (tmp_path / "v" / "verify.json").read_bytes() == first
    report = json.loads(first)
    assert report["all_passed"] and report["suites"][0]["max_residual"] <= 1e-10
    assert report["seed"] == 7


def test_unknown_suite_exits_2():
    with pytest.raises(SystemExit) as info:
        cli.main(["verify", "--suite", "unknown"])
    assert info.value.code == 2


def test_config_hash_ignores_output_directory(catalog_dir):
    a = cli.RunConfig("bands", crystal=str(catalog_dir / "z1.json"), out="one")
    b = cli.RunConfig("bands", crystal=str(catalog_dir / "z1.json"), out="two")
    c = cli.RunConfig("bands", crystal=str(catalog_dir / "z1.json"), grid=65)
    assert cli.provenance(a)["config_hash"] == cli.provenance(b)["config_hash"]
    assert cli.provenance(a)["config_hash"] != cli.provenance(c)["config_hash"]


def test_help_shows_defaults():
    parser = cli.build_parser()
    sub = parser._subparsers._group_actions[0].choices["spectrum"]
    text = sub.format_help()
    assert "(default: 64)" in text and "(default: 1e-06)" in text


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "crystal_spectra", "catalog"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.split() == list(cr.CATALOG)
