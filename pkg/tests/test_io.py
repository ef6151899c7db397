"""File formats: atomic writes, posterior JSON, dataset CSVs."""
import json
import os

import numpy as np
import pytest

from stumpfungus import io as sfio
from stumpfungus.hmc import HmcConfig, PosteriorSamples


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "out.txt"
    sfio.atomic_write_text(target, "hello\n")
    assert target.read_text() == "hello\n"
    assert os.listdir(tmp_path) == ["out.txt"]


def test_posterior_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    samples = PosteriorSamples(("a", "b"), rng.normal(size=(50, 2)),
                               0.85, 1.23)
    cfg = HmcConfig(seed=7)
    path = tmp_path / "post.json"
    sfio.save_posterior(samples, "demo", cfg, path)
    back, model_id, config = sfio.load_posterior(path)
    assert model_id == "demo"
    assert config["seed"] == 7
    assert back.names == ("a", "b")
    np.testing.assert_array_equal(back.matrix, samples.matrix)
    assert back.accept_rate == 0.85
    # wall time is never serialized: identical reruns must be byte-identical
    doc = json.loads(path.read_text())
    assert doc["wall_time_seconds"] is None


def test_marbles_csv_round_trip(tmp_path):
    draws = [(0, 1), (3, 0), (5, 1)]
    path = tmp_path / "marbles.csv"
    sfio.save_marbles_csv(draws, path)
    assert path.read_text().splitlines()[0] == "box,outcome"
    assert sfio.load_marbles_csv(path) == draws


def test_marbles_csv_validation(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("box,outcome\n7,1\n")
    with pytest.raises(sfio.DataError, match="out of range"):
        sfio.load_marbles_csv(path)
    path.write_text("box,outcome\n0,2\n")
    with pytest.raises(sfio.DataError, match="0 or 1"):
        sfio.load_marbles_csv(path)
    path.write_text("wrong,header\n")
    with pytest.raises(sfio.DataError, match="header"):
        sfio.load_marbles_csv(path)


def test_rats_csv_round_trip_and_validation(tmp_path):
    rows = [(20, 5), (14, 0)]
    path = tmp_path / "rats.csv"
    sfio.save_rats_csv(rows, path)
    assert sfio.load_rats_csv(path) == rows
    path.write_text("n,y\n10,11\n")
    with pytest.raises(sfio.DataError, match="0 <= y <= n"):
        sfio.load_rats_csv(path)
    path.write_text("n,y\n10\n")
    with pytest.raises(sfio.DataError, match="expected 2 fields"):
        sfio.load_rats_csv(path)


def test_attain_csv_round_trip(tmp_path):
    columns = {
        "sid": np.array([0, 1]),
        "sex": np.array([0, 1]),
        "pid": np.array([2, 3]),
        "cc": np.array([0.25, -1.5]),
        "vrq": np.array([1.0, 0.3333333333333333]),
        "attain": np.array([-0.1, 2.0]),
    }
    path = tmp_path / "attain.csv"
    sfio.save_attain_csv(columns, path)
    back = sfio.load_attain_csv(path)
    for key in columns:
        np.testing.assert_array_equal(back[key], columns[key])


def test_attain_csv_validation(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("sid,sex,pid,cc,vrq,attain\n0,2,0,0.0,0.0,0.0\n")
    with pytest.raises(sfio.DataError, match="out of range"):
        sfio.load_attain_csv(path)
    path.write_text("sid,sex,pid,cc,vrq,attain\n0,0,0,nan,0.0,0.0\n")
    with pytest.raises(sfio.DataError, match="non-finite"):
        sfio.load_attain_csv(path)


def test_error_messages_carry_path_and_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("n,y\n20,5\nx,y\n")
    with pytest.raises(sfio.DataError, match=rf"{path}:3"):
        sfio.load_rats_csv(path)


def test_missing_file_raises_data_error(tmp_path):
    with pytest.raises(sfio.DataError):
        sfio.load_rats_csv(tmp_path / "nope.csv")


def test_reals_round_trip_losslessly(tmp_path):
    # repr round-trip: a third is preserved exactly
    columns = {
        "sid": np.array([0]), "sex": np.array([0]), "pid": np.array([0]),
        "cc": np.array([1.0 / 3.0]), "vrq": np.array([0.1]),
        "attain": np.array([-1e-17]),
    }
    path = tmp_path / "a.csv"
    sfio.save_attain_csv(columns, path)
    back = sfio.load_attain_csv(path)
    assert back["cc"][0] == columns["cc"][0]
    assert back["attain"][0] == columns["attain"][0]
