import json
import struct

import numpy as np
import pytest

from bilateral_se.features import Mode
from bilateral_se.qnn import FormatError, ModelHyperparams, init_random, load_weights, passthrough_weights, save_weights
from bilateral_se.qnn.container import MAGIC, from_bytes, to_bytes


def test_round_trip_bit_exact(lowb_weights, tmp_path):
    path = tmp_path / "w.gcfs"
    save_weights(lowb_weights, path)
    loaded = load_weights(path)
    assert loaded.hp == lowb_weights.hp and loaded.mode is Mode.LOWB
    for side in ("left", "right"):
        a, b = lowb_weights.side(side), loaded.side(side)
        assert a.keys() == b.keys()
        for k in a:
            assert a[k].bits == b[k].bits
            np.testing.assert_array_equal(a[k].values, b[k].values)
    assert to_bytes(loaded) == path.read_bytes()


def test_shared_stored_once(lowb_weights):
    blob = to_bytes(lowb_weights)
    loaded = from_bytes(blob)
    assert loaded.left["gru/layer1/w_hh"] is loaded.right["gru/layer1/w_hh"]
    hlen = struct.unpack_from("<Q", blob, 8)[0]
    header = json.loads(blob[16:16 + hlen])
    names = [e["name"] for e in header["tensors"] if "byte_offset" in e]
    assert "shared/gru/layer1/w_hh" in names and "left/gru/layer1/w_hh" not in names


def test_passthrough_fixture():
    w = from_bytes(to_bytes(passthrough_weights(ModelHyperparams.for_mode(Mode.UNI), Mode.UNI)))
    assert w.kind == "passthrough" and not w.left


def _rewrite(blob, edit):
    hlen = struct.unpack_from("<Q", blob, 8)[0]
    header = json.loads(blob[16:16 + hlen])
    edit(header)
    hb = json.dumps(header).encode()
    return blob[:8] + struct.pack("<Q", len(hb)) + hb + blob[16 + hlen:]


def test_off_grid_rejected(lowb_weights):
    w = init_random(lowb_weights.hp, 1)
    w.left["input_fc/weight"].values[0, 0] = 0.0033
    with pytest.raises(FormatError, match="grid"):
        from_bytes(to_bytes(w))


def test_bad_magic_and_version(lowb_weights):
    blob = to_bytes(lowb_weights)
    with pytest.raises(FormatError):
        from_bytes(b"XXXX" + blob[4:])
    with pytest.raises(FormatError):
        from_bytes(MAGIC + struct.pack("<I", 2) + blob[8:])
    with pytest.raises(FormatError):
        from_bytes(blob[:10])


def test_missing_alias(lowb_weights):
    def drop(header):
        header["tensors"] = [e for e in header["tensors"] if e["name"] != "shared/conv/dw5/weight"]

    with pytest.raises(FormatError, match="missing shared"):
        from_bytes(_rewrite(to_bytes(lowb_weights), drop))


def test_truncated_payload(lowb_weights):
    with pytest.raises(FormatError):
        from_bytes(to_bytes(lowb_weights)[:-4])


def test_init_deterministic_bytes(lowb_hp):
    assert to_bytes(init_random(lowb_hp, 4)) == to_bytes(init_random(lowb_hp, 4))
