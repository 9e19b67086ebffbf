import json
import subprocess
import sys

import numpy as np
import pytest

from shoestring import cli
from shoestring.model import load_model
from shoestring.model.config import SAMPLE_RATE_MATRICES
from shoestring.model.synthesis import read_wav
from shoestring.quantizer import is_on_lattice


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert cli.main(["init", "--preset", "P192", "--out", str(d / "float.bin"), "--seed", "4"]) == 0
    assert cli.main(["quantize", "--in", str(d / "float.bin"), "--out", str(d / "q8.bin")]) == 0
    assert cli.main(["features", "--frames", "8", "--out", str(d / "feat.f32"), "--seed", "2"]) == 0
    return d


def synth(files, out, *extra):
    return cli.main(["synth", "--features", str(files / "feat.f32"), "--weights", str(files / "q8.bin"),
                     "--out", str(out), *extra])


def test_synth_writes_wav_and_json(files, capsys):
    capsys.readouterr()
    assert synth(files, files / "a.wav", "--seed", "3") == 0
    out, err = capsys.readouterr()
    stats = json.loads(out.strip())
    assert stats["samples"] == 8 * 160 and stats["frames"] == 8
    assert stats["mode"] == "quantized" and stats["model"] == "P192"
    assert "a.wav" in err
    assert read_wav(files / "a.wav").shape == (1280,)


def test_synth_is_byte_deterministic(files):
    assert synth(files, files / "b1.wav", "--seed", "9", "--xi", "0.02") == 0
    assert synth(files, files / "b2.wav", "--seed", "9", "--xi", "0.02") == 0
    assert (files / "b1.wav").read_bytes() == (files / "b2.wav").read_bytes()


def test_synth_errors_name_the_file(files, capsys):
    code = cli.main(["synth", "--features", str(files / "feat.f32"), "--weights", str(files / "missing.bin"),
                     "--out", str(files / "x.wav")])
    assert code != 0 and "missing.bin" in capsys.readouterr().err
    (files / "short.f32").write_bytes(b"\0" * 10)
    code = cli.main(["synth", "--features", str(files / "short.f32"), "--weights", str(files / "q8.bin"),
                     "--out", str(files / "x.wav")])
    assert code != 0 and "short.f32" in capsys.readouterr().err
    code = synth(files, files / "no_such_dir" / "x.wav")
    assert code != 0 and "x.wav" in capsys.readouterr().err


def test_synth_bad_xi(files, capsys):
    assert synth(files, files / "x.wav", "--xi", "0.7") != 0
    assert "xi" in capsys.readouterr().err


def test_quantize_output_on_lattice(files):
    model = load_model(files / "q8.bin")
    assert model.config.quantized
    for name in SAMPLE_RATE_MATRICES:
        assert np.all(is_on_lattice(model.dense(name)))
    ref = load_model(files / "float.bin")
    assert np.array_equal(model["frame.conv1.weight"], ref["frame.conv1.weight"])


def test_requantize_is_dtype_error(files, capsys):
    assert cli.main(["quantize", "--in", str(files / "q8.bin"), "--out", str(files / "qq.bin")]) != 0
    err = capsys.readouterr().err
    assert "already q8-block-sparse" in err and "gru_a.recurrent" in err


def test_quantize_range_error(files, capsys, tmp_path):
    from shoestring.model.weights import TensorRecord

    model = load_model(files / "float.bin")
    records = dict(model.records)
    w = np.array(records["dual_fc.w1"].value)
    w[3, 3] = 1.25
    records["dual_fc.w1"] = TensorRecord(w, 1.0)
    type(model)(model.config, records).save(tmp_path / "big.bin")
    assert cli.main(["quantize", "--in", str(tmp_path / "big.bin"), "--out", str(tmp_path / "o.bin")]) != 0
    err = capsys.readouterr().err
    assert "dual_fc.w1" in err and "]-1, 1[" in err


def test_bench_reports(files, capsys):
    capsys.readouterr()
    assert cli.main(["bench", "--weights", str(files / "q8.bin"), "--seconds", "0.1"]) == 0
    lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    reports, ratio = lines[:2], lines[2]
    assert [r["mode"] for r in reports] == ["quantized", "float"]
    for r in reports:
        assert set(r) == {"model", "mode", "samples", "wall_clock_s", "real_time_factor", "percent_of_core",
                          "tanh_per_sample", "weights_used_per_sample"}
        assert r["samples"] >= 1600 and r["real_time_factor"] > 0
        assert r["real_time_factor"] * r["percent_of_core"] == pytest.approx(100.0)
        assert r["tanh_per_sample"] == 16
    assert ratio["speedup_quantized_over_float"] == pytest.approx(
        reports[0]["real_time_factor"] / reports[1]["real_time_factor"])


def test_bench_float_weights_and_mode_errors(files, capsys):
    assert cli.main(["bench", "--weights", str(files / "float.bin"), "--seconds", "0.05"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 1 and json.loads(out[0])["mode"] == "float"
    assert cli.main(["bench", "--weights", str(files / "float.bin"), "--seconds", "0.05", "--mode", "quantized"]) != 0
    assert cli.main(["bench", "--weights", str(files / "q8.bin"), "--seconds", "0"]) != 0


def test_threads_env(files, monkeypatch, capsys):
    monkeypatch.setenv("SHOESTRING_THREADS", "zero")
    assert cli.main(["bench", "--weights", str(files / "q8.bin"), "--seconds", "0.05"]) != 0
    assert "SHOESTRING_THREADS" in capsys.readouterr().err


def test_selftest_passes_and_lists_checks(capsys):
    assert cli.main(["selftest"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) >= 5 and all(l.startswith("PASS") for l in lines)
    assert any("tanh_max_error" in l for l in lines) and any("sampler_chi_square" in l for l in lines)


def test_selftest_fails_with_corrupted_coefficients(capsys):
    assert cli.main(["selftest", "--coeffs", "1500,158.3758,1565.3572,679.1774,19.5291"]) != 0
    assert "FAIL  tanh_max_error" in capsys.readouterr().out


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "shoestring.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "shoestring" in proc.stdout


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        cli.main(["synth", "--features", "x"])
    assert exc.value.code == 2
