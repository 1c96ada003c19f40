import csv
import json
import subprocess
import sys

import pytest

from tvws_pricing.cli import main
from tvws_pricing.config import ConfigError, fixed_profile, parse_config
from tvws_pricing.experiments import decode_menu, encode_menu
from tvws_pricing.model import CostModel, PlanMenu, PricePoint, do_utility
from tvws_pricing.presets import PRESETS, load_preset

SMALL = """
name          = small
seed          = 7
experiment    = pricing
n_sus         = 10
fee_max       = 60
scenarios     = strategic_complete, strategic_incomplete
schemes       = hybrid, service_only
thetas        = 1, 4, 9
counts        = 3, 3, 4
eps1          = 0.02
sweep_param   = eps0
sweep_values  = 0:1:0.5
"""


def test_named_distributions_parse():
    spec = parse_config("seed = 1\nexperiment = pricing\ndistributions = distr1, distr2\n")
    assert fixed_profile(spec, "distr1", 100).counts == (10,) * 10
    assert fixed_profile(spec, "distr2", 100).counts == tuple(range(1, 20, 2))
    assert fixed_profile(spec, "distr3", 100).counts == tuple(range(19, 0, -2))


def test_range_parsing():
    spec = parse_config("seed = 1\nexperiment = pricing\nsweep_param = eps0\nsweep_values = 0:1:0.2\n")
    assert spec.sweep_values == pytest.approx((0.0, 0.2, 0.4, 0.6, 0.8, 1.0))
    assert spec.sweep_values[3] == 0.6


@pytest.mark.parametrize(
    "text",
    [
        "experiment = pricing\n",  # no seed
        "seed = 1\nexperiment = pricing\nbogus = 3\n",
        "seed = 1\nexperiment = pricing\nthetas = 1, 2\ncounts = 5, 6\n",  # sums to 11
        "seed = 1\nexperiment = pricing\ngamma = 1.5\n",
        "seed = 1\nexperiment = pricing\nsweep_param = eps0\nsweep_values = 0:1:-1\n",
        "seed = 1\nexperiment = pricing\nseed = 2\n",
        "seed = 1\nexperiment = pricing\nfee_min = 10\nfee_max = 5\n",
        "seed = -3\nexperiment = pricing\n",
    ],
)
def test_bad_configs_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_config_hash_ignores_output_only():
    a = parse_config(SMALL)
    b = parse_config(SMALL + "output = elsewhere\n")
    c = parse_config(SMALL.replace("seed          = 7", "seed = 8"))
    assert a.config_hash() == b.config_hash() != c.config_hash()


def test_menu_codec_round_trip():
    menu = PlanMenu.from_plans([(0, 0.0), (100, 1.0 / 3.0), (100, 7.25)])
    assert decode_menu(encode_menu(menu)).plans == menu.plans


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_parse(name):
    assert load_preset(name).name == name


def test_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.cfg"
    good.write_text(SMALL)
    bad = tmp_path / "bad.cfg"
    bad.write_text("experiment = pricing\n")
    assert main(["validate", str(good)]) == 0
    assert main(["validate", str(bad)]) == 1
    assert main(["validate", str(tmp_path / "missing.cfg")]) == 1
    assert main(["run", str(bad)]) == 1
    assert main(["preset", "no_such_preset"]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["list-presets"]) == 0
    assert set(capsys.readouterr().out.split()) >= set(PRESETS)


def test_unwritable_output_is_a_compute_error(tmp_path):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(SMALL)
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", str(cfg), "--out", str(blocker)]) == 2


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_consistent_rows(tmp_path):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(SMALL)
    assert main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 0
    folder = tmp_path / "out" / "small"
    rows = _read(folder / "rows.csv")
    assert len(rows) == 3 * 2 * 2
    for row in rows:
        menu = decode_menu(row["menu"])
        uptake = [float(u) for u in row["uptake"].split("|")] if row["uptake"] else []
        point = PricePoint(float(row["reserved_bandwidth"]), float(row["registration_fee"]))
        cost = CostModel(float(row["eps0"]), float(row["alpha"]), float(row["eps1"]))
        again = do_utility(point, int(row["mu0"]), zip(uptake, menu.plans), cost)
        assert again == pytest.approx(float(row["do_utility"]), abs=1e-9)
        if row["scheme"] == "service_only":
            assert float(row["reserved_bandwidth"]) == 0
    manifest = json.loads((folder / "run_manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["rows"] == len(rows)
    assert set(manifest["files"]) == {"rows.csv", "summary.csv"}


def test_output_dir_from_environment(tmp_path, monkeypatch):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(SMALL)
    monkeypatch.setenv("TVWS_PRICING_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["run", str(cfg)]) == 0
    assert (tmp_path / "env" / "small" / "rows.csv").exists()


def test_reruns_are_byte_identical(tmp_path):
    cfg = tmp_path / "small.cfg"
    seeded = SMALL.replace("thetas        = 1, 4, 9\ncounts        = 3, 3, 4\n", "")
    cfg.write_text(seeded + "distributions = random\nrepetitions = 2\n")
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        proc = subprocess.run(
            [sys.executable, "-m", "tvws_pricing.cli", "run", str(cfg), "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        outputs.append([(out / "small" / f).read_bytes() for f in ("rows.csv", "summary.csv", "run_manifest.json")])
    assert outputs[0] == outputs[1]
