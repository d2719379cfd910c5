import csv
import json

import numpy as np
import pytest

from bilateral_se.cli import run
from bilateral_se.wavio import read_wav, write_wav


@pytest.fixture
def mics_wav(tmp_path, rng):
    path = tmp_path / "mics.wav"
    write_wav(path, rng.standard_normal((4, 1600)) * 0.1)
    return path


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_info(capsys):
    assert run(["info"]) == 0
    out = capsys.readouterr().out
    assert "lowb" in out and "148310" in out


def test_init_and_info_weights(tmp_path, capsys):
    w = tmp_path / "w.gcfs"
    assert run(["init-weights", str(w), "--mode", "uni", "--seed", "3"]) == 0
    assert run(["info", "--weights", str(w), "--mode", "uni"]) == 0
    assert "113990 params" in capsys.readouterr().out


def test_passthrough_enhance(tmp_path, mics_wav):
    w = tmp_path / "pt.gcfs"
    out = tmp_path / "out.wav"
    assert run(["init-weights", str(w), "--fixture", "passthrough", "--mode", "uni"]) == 0
    assert run(["enhance", str(mics_wav), str(out), "--weights", str(w), "--mics", "1,0,3,2"]) == 0
    _, x = read_wav(mics_wav)
    _, y = read_wav(out)
    assert y.shape == (2, 1600)
    for side, mic in ((0, 1), (1, 3)):
        corr = np.correlate(y[side], x[mic], "full")
        assert np.argmax(corr) - (x.shape[1] - 1) == 32


def test_enhance_lowb_needs_link(tmp_path, mics_wav):
    w = tmp_path / "w.gcfs"
    run(["init-weights", str(w)])
    assert run(["enhance", str(mics_wav), str(tmp_path / "o.wav"), "--weights", str(w)]) == 1
    assert run(["enhance", str(mics_wav), str(tmp_path / "o.wav"), "--weights", str(w),
                "--delay-ms", "4", "--bits", "8"]) == 0


def test_link_sim(tmp_path, mics_wav):
    out = tmp_path / "l.wav"
    assert run(["link-sim", str(mics_wav), str(out), "--delay-ms", "6", "--bits", "16"]) == 0
    _, x = read_wav(mics_wav)
    _, y = read_wav(out)
    assert not np.any(y[:, :96])
    assert np.max(np.abs(y[:, 96:] - x[:, :-96])) <= 2**-16


def test_mix_and_eval(tmp_path, rng):
    n = 3200
    write_wav(tmp_path / "t.wav", rng.standard_normal(n) * 0.1)
    write_wav(tmp_path / "i.wav", rng.standard_normal(n) * 0.1)
    write_wav(tmp_path / "ird.wav", rng.standard_normal((4, 8)) * 0.5)
    write_wav(tmp_path / "ire.wav", rng.standard_normal((4, 32)) * 0.1)
    write_wav(tmp_path / "iri.wav", rng.standard_normal((4, 32)) * 0.3)
    spec = {
        "target": {"signal": "t.wav", "ir_direct": "ird.wav", "ir_early": "ire.wav"},
        "interferers": [{"signal": "i.wav", "ir": "iri.wav", "snr_db": 5.0}],
        "output_level_dbfs": -26.0,
        "seed": 1,
    }
    (tmp_path / "scene.json").write_text(json.dumps(spec))
    outdir = tmp_path / "mix"
    assert run(["mix", str(tmp_path / "scene.json"), str(outdir)]) == 0
    _, mix = read_wav(outdir / "mixture.wav")
    assert mix.shape == (4, n)
    table = dict(rows(outdir / "scene.csv")[1:])
    assert float(table["interferer0"]) == 5.0

    _, direct = read_wav(outdir / "target_direct.wav")
    write_wav(tmp_path / "ref.wav", direct[[0, 2]])
    csv_out = tmp_path / "eval.csv"
    assert run(["eval", "--reference", str(tmp_path / "ref.wav"), "--estimate", str(tmp_path / "ref.wav"),
                "--mixture", str(outdir / "mixture.wav"), "--output", str(csv_out)]) == 0
    table = {r[1]: float(r[2]) for r in rows(csv_out)[1:]}
    assert table["si_sdr"] == 100.0 and table["cmse"] == 0.0 and table["pcm"] == 0.0


def test_sweep(tmp_path, mics_wav, rng):
    w = tmp_path / "pt.gcfs"
    run(["init-weights", str(w), "--fixture", "passthrough"])
    write_wav(tmp_path / "ref.wav", rng.standard_normal((2, 1600)) * 0.1)
    out = tmp_path / "sweep.csv"
    assert run(["sweep", "--input", str(mics_wav), "--reference", str(tmp_path / "ref.wav"), "--weights", str(w),
                "--delays", "4,6,12", "--bits", "4,8,16", "--output", str(out)]) == 0
    table = rows(out)
    assert table[0] == ["delay_ms", "bits", "si_sdr", "cmse", "pcm", "combined"]
    assert [(int(r[0]), int(r[1])) for r in table[1:]] == [(d, b) for d in (4, 6, 12) for b in (4, 8, 16)]


def test_bad_inputs(tmp_path, mics_wav):
    assert run(["enhance"]) == 2
    assert run(["enhance", "missing.wav", "o.wav", "--weights", "nope"]) == 1
    assert run(["info", "--mode", "stereo"]) == 2
    bad = tmp_path / "bad.gcfs"
    bad.write_bytes(b"nonsense")
    assert run(["enhance", str(mics_wav), str(tmp_path / "o.wav"), "--weights", str(bad)]) == 1
    write_wav(tmp_path / "r.wav", np.zeros((4, 10)), rate=8000)
    assert run(["link-sim", str(tmp_path / "r.wav"), str(tmp_path / "o.wav"), "--delay-ms", "1", "--bits", "8"]) == 1
    assert run(["enhance", str(mics_wav), str(tmp_path / "o.wav"), "--weights", str(bad), "--mics", "0,0,1,2"]) == 2
