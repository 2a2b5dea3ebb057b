import numpy as np
import pytest

import rrtrack


def tiny_config():
    cfg = rrtrack.NetworkConfig.small()
    cfg.crop_size = 16
    cfg.embed_dim = 8
    cfg.lstm_units = 6
    cfg.seed = 3
    return cfg


def test_iou_and_crop_window():
    a = rrtrack.BoundingBox(0, 0, 2, 1)
    b = rrtrack.BoundingBox(1, 0, 3, 1)
    assert rrtrack.iou(a, b) == pytest.approx(1 / 3)
    w = rrtrack.crop_window_for(rrtrack.BoundingBox(10, 20, 30, 60))
    assert (w.cx, w.cy, w.w, w.h) == (20, 40, 40, 80)


def test_encode_decode_round_trip():
    box = rrtrack.BoundingBox(12.5, 7.0, 40.0, 33.25)
    w = rrtrack.crop_window_for(box)
    back = rrtrack.decode_prediction(w, *rrtrack.encode_target(w, box))
    assert back.as_tuple() == pytest.approx(box.as_tuple(), abs=1e-9)


def test_track_save_and_load(tmp_path):
    params = rrtrack.NetworkParams.initialize(tiny_config())
    frames = [np.full((48, 48, 3), 40 * i, dtype=np.uint8) for i in range(5)]
    init = rrtrack.BoundingBox(10, 10, 30, 30)
    boxes = rrtrack.track(params, frames, init)
    assert len(boxes) == 4

    path = tmp_path / "model.re3"
    params.save(path)
    again = rrtrack.track(rrtrack.NetworkParams.load(path), frames, init)
    assert [b.as_tuple() for b in again] == [b.as_tuple() for b in boxes]


def test_corrupt_checkpoint_is_rejected(tmp_path):
    path = tmp_path / "bad.re3"
    path.write_bytes(b"RE3CKPT1garbage")
    with pytest.raises(rrtrack.FormatError):
        rrtrack.NetworkParams.load(path)


def test_cli_usage_error():
    code, _, err = rrtrack.run_cli(["track"])
    assert code == 2
    assert err
