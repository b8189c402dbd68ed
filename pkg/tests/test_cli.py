import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hecg.cli import main
from hecg.pipeline import synthetic_ecg_wave


@pytest.fixture()
def csv_file(tmp_path):
    wave = synthetic_ecg_wave(8.0, 500.0, 72.0, 0.012, seed=55)
    path = tmp_path / "ecg.csv"
    with open(path, "w") as fh:
        fh.write("value\n")
        for v in wave:
            fh.write(f"{v:.17g}\n")
    return path


def test_encrypt_decrypt_roundtrip_csv(tmp_path, csv_file, capsys):
    store = tmp_path / "store"
    assert main(["encrypt", "--input", str(csv_file), "--store", str(store)]) == 0
    out = capsys.readouterr().out
    assert "encrypted 13 segments" in out

    out_csv = tmp_path / "back.csv"
    assert (
        main(
            [
                "decrypt",
                "--store",
                str(store),
                "--output",
                str(out_csv),
                "--report",
                "--input",
                str(csv_file),
            ]
        )
        == 0
    )
    report = capsys.readouterr().out
    mse = float([line for line in report.splitlines() if line.startswith("mse ")][0].split()[1])
    assert mse <= 1e-5

    original = np.loadtxt(csv_file, skiprows=1)
    recovered = np.loadtxt(out_csv, skiprows=1)
    n = len(recovered)
    span = original[:n].max() - original[:n].min()
    assert np.max(np.abs(recovered - original[:n])) <= span / 510 * (1 + 1e-9)


def test_decrypt_missing_key_fails(tmp_path, csv_file, capsys):
    store = tmp_path / "store"
    main(["encrypt", "--input", str(csv_file), "--store", str(store)])
    (store / "stream0" / "keys.txt").unlink()
    rc = main(["decrypt", "--store", str(store), "--output", str(tmp_path / "x.csv")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_encrypt_ml_mode_without_model_errors(tmp_path, csv_file, capsys):
    rc = main(
        ["encrypt", "--input", str(csv_file), "--store", str(tmp_path / "s"), "--mode", "ml"]
    )
    assert rc == 1
    assert "requires --model" in capsys.readouterr().err


def test_analyze_store_and_outputs(tmp_path, capsys):
    store = tmp_path / "store"
    main(["encrypt", "--synthetic", "40", "--store", str(store), "--seed", "5"])
    capsys.readouterr()
    prefix = tmp_path / "out" / "enc"
    assert main(["analyze", "--store", str(store), "--output", str(prefix)]) == 0
    out = capsys.readouterr().out
    report = json.loads(Path(f"{prefix}_report.json").read_text())
    assert 7.6 <= report["shannon_entropy_bits"] <= 8.0
    assert report["segment_count"] == 40
    # flat text parses one metric per line
    flat = Path(f"{prefix}_report.txt").read_text()
    for line in flat.strip().splitlines():
        float(line.rsplit(" ", 1)[1])
    for series in ("histogram", "autocorr", "spectrum"):
        assert Path(f"{prefix}_{series}.tsv").exists()
    assert "monobit_pass_fraction" in out


def test_analyze_plain_corpus_monobit_fails(tmp_path, csv_file, capsys):
    prefix = tmp_path / "plain"
    assert main(["analyze", "--input", str(csv_file), "--output", str(prefix)]) == 0
    capsys.readouterr()
    report = json.loads(Path(f"{prefix}_report.json").read_text())
    assert report["monobit_pass_fraction"] < 0.5
    assert report["shannon_entropy_bits"] < 7.0


def test_analyze_compare_stores(tmp_path, capsys):
    a = tmp_path / "a"
    b = tmp_path / "b"
    main(["encrypt", "--synthetic", "30", "--store", str(a), "--seed", "1"])
    main(["encrypt", "--synthetic", "30", "--store", str(b), "--seed", "2", "--heart-rate", "88"])
    capsys.readouterr()
    rc = main(
        [
            "analyze",
            "--store",
            str(a),
            "--compare",
            str(b),
            "--output",
            str(tmp_path / "cmp"),
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    jsd = float(
        [line for line in out.splitlines() if line.startswith("compare.js_divergence")][0].split()[1]
    )
    assert jsd < 0.32


def test_attack_sweep_deterministic(tmp_path, capsys):
    store = tmp_path / "store"
    main(["encrypt", "--synthetic", "20", "--store", str(store), "--seed", "9"])
    capsys.readouterr()
    args = [
        "attack",
        "--store",
        str(store),
        "--kind",
        "occlusion",
        "--sweep",
        "0.05,0.1,0.25",
        "--seed",
        "4",
    ]
    assert main(args) == 0
    first = capsys.readouterr().out
    assert main(args) == 0
    second = capsys.readouterr().out
    assert first == second
    lines = first.strip().splitlines()
    assert len(lines) == 4  # header + three rows


def test_attack_noise_monotone(tmp_path, capsys):
    store = tmp_path / "store"
    main(["encrypt", "--synthetic", "20", "--store", str(store), "--seed", "11"])
    capsys.readouterr()
    assert (
        main(
            ["attack", "--store", str(store), "--kind", "noise-uniform", "--sweep", "0,1,4,16"]
        )
        == 0
    )
    rows = capsys.readouterr().out.strip().splitlines()[1:]
    maes = [float(r.split("\t")[1]) for r in rows]
    assert maes == sorted(maes)


def test_train_determinism_and_model_file(tmp_path, capsys):
    model_a = tmp_path / "a.hmlp"
    model_b = tmp_path / "b.hmlp"
    args = ["--synthetic", "60", "--epochs", "30", "--seed", "3"]
    assert main(["train", "--output", str(model_a)] + args) == 0
    assert main(["train", "--output", str(model_b)] + args) == 0
    capsys.readouterr()
    assert model_a.read_bytes() == model_b.read_bytes()


def test_train_undersized_dataset(tmp_path, capsys):
    rc = main(["train", "--output", str(tmp_path / "m.hmlp"), "--synthetic", "5"])
    assert rc == 1
    assert "needs >= 10" in capsys.readouterr().err


def test_stream_direct_metrics(tmp_path, capsys):
    rc = main(
        [
            "stream",
            "--store",
            str(tmp_path / "store"),
            "--segments",
            "10",
            "--seed",
            "6",
            "--json",
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "mode=DIRECT segments=10 errors=0" in out
    summary = json.loads(out[out.index("{") :])
    assert summary["segments"] == 10
    assert summary["encrypt_s"]["median"] < 0.01


def test_stream_compare_modes(tmp_path, capsys):
    model = tmp_path / "m.hmlp"
    main(["train", "--output", str(model), "--synthetic", "60", "--epochs", "40", "--seed", "2"])
    capsys.readouterr()
    rc = main(
        [
            "stream",
            "--store",
            str(tmp_path / "store"),
            "--segments",
            "6",
            "--model",
            str(model),
            "--compare-modes",
            "--noise-amplitude",
            "0.03",
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "--- mode direct ---" in out
    assert "--- mode ml ---" in out
    assert out.count("mean ciphertext entropy") == 2


def test_encrypt_mode_tag_bytes_differ(tmp_path, capsys):
    model = tmp_path / "m.hmlp"
    main(["train", "--output", str(model), "--synthetic", "60", "--epochs", "40", "--seed", "2"])
    d_store = tmp_path / "d"
    m_store = tmp_path / "m"
    main(["encrypt", "--synthetic", "5", "--store", str(d_store), "--mode", "direct"])
    main(
        [
            "encrypt",
            "--synthetic",
            "5",
            "--store",
            str(m_store),
            "--mode",
            "ml",
            "--model",
            str(model),
        ]
    )
    capsys.readouterr()
    d_blob = (d_store / "stream0" / "seg_000000.rec").read_bytes()
    m_blob = (m_store / "stream0" / "seg_000000.rec").read_bytes()
    assert d_blob[5] == 0
    assert m_blob[5] == 1


def test_benchmark_runs(capsys):
    assert main(["benchmark"]) == 0
    out = capsys.readouterr().out
    assert "logistic_fill" in out
    assert "encrypt (300-sample segment" in out


def test_console_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "hecg.cli", "--help"], capture_output=True, text=True
    )
    assert out.returncode == 0
    assert "encrypt" in out.stdout and "benchmark" in out.stdout


def test_env_var_default_seed(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("HECG_SEED", "17")
    store_a = tmp_path / "a"
    assert main(["encrypt", "--synthetic", "3", "--store", str(store_a)]) == 0
    monkeypatch.delenv("HECG_SEED")
    store_b = tmp_path / "b"
    assert main(["encrypt", "--synthetic", "3", "--store", str(store_b), "--seed", "17"]) == 0
    capsys.readouterr()
    a = (store_a / "stream0" / "seg_000000.rec").read_bytes()
    b = (store_b / "stream0" / "seg_000000.rec").read_bytes()
    assert a == b
