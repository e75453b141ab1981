import pytest
import torch

from zonedepth.nn.checkpoint import load_checkpoint, save_checkpoint
from zonedepth.nn.model import FusionConfig, ZoneFusionNet

from toy import toy_input


@pytest.fixture
def model():
    torch.manual_seed(0)
    return ZoneFusionNet(FusionConfig(dims=(8, 8, 8), n_bins=8, n_samples=4, dist_encoding="mean-var"))


def test_round_trip_reproduces_output(model, tmp_path):
    path = tmp_path / "m.dltr"
    save_checkpoint(path, model, {"note": "hello"})
    loaded, extra = load_checkpoint(path)
    assert extra == {"note": "hello"}
    assert loaded.cfg == model.cfg
    model, loaded = model.double(), loaded.double()
    inp = toy_input()
    with torch.no_grad():
        # float32 storage: outputs agree to single precision
        torch.testing.assert_close(loaded(inp), model.float().double()(inp), rtol=0, atol=0)


def test_rejects_foreign_file(tmp_path):
    path = tmp_path / "bad.dltr"
    path.write_bytes(b"NOPE" + bytes(32))
    with pytest.raises(ValueError, match="not a checkpoint"):
        load_checkpoint(path)


def test_rejects_truncated_and_padded(model, tmp_path):
    path = tmp_path / "m.dltr"
    save_checkpoint(path, model)
    raw = path.read_bytes()
    path.write_bytes(raw + b"\0\0\0\0")
    with pytest.raises(ValueError, match="trailing"):
        load_checkpoint(path)
    path.write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        load_checkpoint(path)
