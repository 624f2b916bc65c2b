import numpy as np
import pytest

from dfmetric.checkpoint import CheckpointError, from_bytes, load_checkpoint, save_checkpoint, to_bytes
from dfmetric.trainer import NumericError, train, write_history_csv
from dfmetric.types import LossConfig, TrainConfig


def quick_config(**kw):
    base = dict(epochs=3, warmup_epochs=1, batch_size=16, base_lr=1e-3, hidden_dims=(8,), embed_dim=4, seed=5)
    base.update(kw)
    return TrainConfig(**base)


def test_zero_lr_keeps_init(small_corpus):
    tr, va, _ = small_corpus
    res = train(tr, va, quick_config(epochs=1, warmup_epochs=0, base_lr=0.0))
    ref = train(tr, va, quick_config(epochs=1, warmup_epochs=0, base_lr=0.0, seed=5))
    init = res.history[0].val_loss
    assert res.checkpoint.epoch == 0 and res.checkpoint.val_loss == init
    for k in res.checkpoint.network.params:
        np.testing.assert_array_equal(res.checkpoint.network.params[k], ref.checkpoint.network.params[k])
    assert res.history[1].val_loss == init


def test_deterministic(small_corpus):
    tr, va, _ = small_corpus
    cfg = quick_config(loss=LossConfig(0.2, 1.0, "BA"), feature_jitter=0.05)
    assert to_bytes(train(tr, va, cfg).checkpoint) == to_bytes(train(tr, va, cfg).checkpoint)


def test_weight_zero_matches_no_triplet(small_corpus):
    tr, va, _ = small_corpus
    a = train(tr, va, quick_config(loss=LossConfig(0.2, 0.0, "HP_HN")))
    b = train(tr, va, quick_config(loss=LossConfig(0.2, 1.0, "none")))
    for k in a.checkpoint.network.params:
        np.testing.assert_array_equal(a.checkpoint.network.params[k], b.checkpoint.network.params[k])
    assert [s.val_loss for s in a.history] == [s.val_loss for s in b.history]


def test_learns(small_corpus):
    tr, va, _ = small_corpus
    res = train(tr, va, quick_config(epochs=10, warmup_epochs=2))
    assert res.checkpoint.val_loss < res.history[0].val_loss
    assert min(s.val_loss for s in res.history) == res.checkpoint.val_loss
    assert res.history[res.checkpoint.epoch].val_loss == res.checkpoint.val_loss


def test_attribution_modes(small_corpus):
    tr, va, _ = small_corpus
    assert train(tr, va, quick_config(label_mode="att_categ")).checkpoint.class_names == ("real", "FS", "RE")
    res = train(tr, va, quick_config(label_mode="att_dataset"))
    assert res.checkpoint.network.num_classes == 1 + len(tr.datasets())


def test_empty_manifest(small_corpus):
    from dfmetric.ingest import Manifest
    with pytest.raises(ValueError):
        train(Manifest([]), small_corpus[1], quick_config())


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported(small_corpus):
    tr, va, _ = small_corpus
    with pytest.raises(NumericError):
        train(tr, va, quick_config(base_lr=1e305, weight_decay=1e5))


def test_history_csv(small_corpus, tmp_path):
    tr, va, _ = small_corpus
    res = train(tr, va, quick_config())
    write_history_csv(res.history, tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "epoch,train_loss,val_loss,lr,active_triplets_mean"
    assert len(lines) == 1 + 1 + 3


class TestCheckpoint:
    def test_round_trip_bytes(self, small_corpus, tmp_path):
        tr, va, _ = small_corpus
        ckpt = train(tr, va, quick_config(loss=LossConfig(0.2, 1.0, "EP_HN"))).checkpoint
        save_checkpoint(ckpt, tmp_path / "a.ckpt")
        loaded = load_checkpoint(tmp_path / "a.ckpt")
        save_checkpoint(loaded, tmp_path / "b.ckpt")
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()
        assert loaded.config == ckpt.config and loaded.epoch == ckpt.epoch
        for k in ckpt.network.params:
            np.testing.assert_array_equal(loaded.network.params[k], ckpt.network.params[k])
            np.testing.assert_array_equal(loaded.moments_v[k], ckpt.moments_v[k])

    def test_header_layout(self, small_corpus):
        import json
        import struct
        ckpt = train(*small_corpus[:2], quick_config()).checkpoint
        blob = to_bytes(ckpt)
        (n,) = struct.unpack_from("<I", blob, 8)
        header = json.loads(blob[12 : 12 + n])
        assert header["format_version"] == 1
        assert header["config"]["base_lr"] == 1e-3
        first = header["arrays"][0]
        w = np.frombuffer(blob, "<f8", count=int(np.prod(first["shape"])), offset=12 + n)
        np.testing.assert_array_equal(w.reshape(first["shape"]), ckpt.network.params["enc0.W"])

    def test_bad_magic(self):
        with pytest.raises(CheckpointError):
            from_bytes(b"garbage" * 4)
