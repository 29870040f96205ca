import numpy as np
import pytest

from gancodec.errors import ConfigurationError, DatasetError, ShapeError
from gancodec.segmentation import (
    FCNSegmenter,
    TrainingStrategy,
    _SampleStream,
    evaluate_confusion,
    evaluate_matrix,
    train_segmentation,
)

from oracles import miou_oracle


def tiny_set(n=4, seed=0):
    r = np.random.default_rng(seed)
    imgs = r.integers(0, 256, (n, 32, 32, 3), dtype=np.uint8)
    labels = (imgs[..., 0] // 86).astype(np.uint8)  # 3 classes from the red channel
    return imgs, labels


class CountingModel:
    """Records every batch it is trained on; predicts from the red channel."""

    num_classes = 3

    def __init__(self):
        self.batches = []

    def train_step(self, images, labels):
        self.batches.append(np.array(images))
        return 0.0

    def predict(self, image):
        return (np.asarray(image)[..., 0] // 86).astype(np.uint8)


class ThresholdModel(CountingModel):
    def __init__(self, t):
        super().__init__()
        self.t = t

    def predict(self, image):
        return np.minimum(np.asarray(image)[..., 0] // self.t, 2).astype(np.uint8)


def test_full_scale_budgets():
    for kind in ("uncoded", "reconstructions", "mixed"):
        assert sum(n for _, n in TrainingStrategy.full_scale(kind).phases()) == 120_000
    assert TrainingStrategy.full_scale("finetune").phases() == [("original", 90_000), ("reconstruction", 30_000)]


def test_desk_finetune_split():
    # default keeps the 3:1 ratio of 90k:30k; an 800/200 split is available explicitly
    assert TrainingStrategy("finetune", 1000, finetune_split=0.8).phases() == [("original", 800), ("reconstruction", 200)]
    assert TrainingStrategy("finetune", 1000).phases() == [("original", 750), ("reconstruction", 250)]


def test_strategy_validation():
    with pytest.raises(ConfigurationError):
        TrainingStrategy("bogus")
    with pytest.raises(ConfigurationError):
        TrainingStrategy("uncoded", 0)
    with pytest.raises(ConfigurationError):
        TrainingStrategy("finetune", finetune_split=1.5)


@pytest.mark.parametrize("kind", ["uncoded", "reconstructions", "mixed", "finetune"])
def test_step_count_equals_budget(kind):
    imgs, labels = tiny_set()
    model = CountingModel()
    train_segmentation(imgs, labels, TrainingStrategy(kind, 37, batch_size=3, flip=False),
                       codec=lambda x: 255 - x, model=model)
    assert len(model.batches) == 37


def test_sources_are_respected():
    imgs, labels = tiny_set()
    inv = lambda x: 255 - x  # noqa: E731
    model = CountingModel()
    train_segmentation(imgs, labels, TrainingStrategy("finetune", 8, finetune_split=0.5, batch_size=1, flip=False),
                       codec=inv, model=model)
    originals = {x.tobytes() for x in imgs}
    recons = {inv(x).tobytes() for x in imgs}
    kinds = ["o" if b[0].tobytes() in originals else "r" if b[0].tobytes() in recons else "?" for b in model.batches]
    assert kinds == ["o"] * 4 + ["r"] * 4


def test_mixed_epoch_is_union_alternating():
    imgs, labels = tiny_set(5)
    recons = 255 - imgs
    stream = _SampleStream("mixed", imgs, recons, labels, np.random.default_rng(0))
    epoch = stream.take(10)
    assert [src is imgs for src, _ in epoch] == [True, False] * 5
    assert sorted(i for src, i in epoch if src is imgs) == list(range(5))
    assert sorted(i for src, i in epoch if src is recons) == list(range(5))


def test_needs_codec_and_labels():
    imgs, labels = tiny_set()
    with pytest.raises(ConfigurationError):
        train_segmentation(imgs, labels, TrainingStrategy("reconstructions", 2), model=CountingModel())
    with pytest.raises(DatasetError):
        train_segmentation(imgs, None, TrainingStrategy("uncoded", 2), model=CountingModel())
    with pytest.raises(DatasetError):
        train_segmentation(imgs[:0], labels[:0], TrainingStrategy("uncoded", 2), model=CountingModel())


def test_fcn_predict_contract():
    imgs, labels = tiny_set()
    model, losses = train_segmentation(imgs, labels, TrainingStrategy("uncoded", 5, seed=1), num_classes=3)
    assert len(losses) == 5
    p = model.predict(imgs[0])
    assert p.shape == (32, 32) and p.max() < 3
    np.testing.assert_array_equal(p, model.predict(imgs[0]))
    with pytest.raises(ShapeError):
        model.predict(imgs[0][:30])


def test_fcn_seeded_training_reproducible(tmp_path):
    imgs, labels = tiny_set()
    a, la = train_segmentation(imgs, labels, TrainingStrategy("uncoded", 4, seed=2), num_classes=3)
    b, lb = train_segmentation(imgs, labels, TrainingStrategy("uncoded", 4, seed=2), num_classes=3)
    assert la == lb
    a.save(tmp_path / "seg.pt")
    c = FCNSegmenter.load(tmp_path / "seg.pt")
    np.testing.assert_array_equal(c.predict(imgs[1]), a.predict(imgs[1]))


def test_matrix_matches_oracle():
    imgs, labels = tiny_set(6, seed=3)
    models = {"t60": ThresholdModel(60), "t100": ThresholdModel(100)}
    codings = {"uncoded": None, "dark": lambda x: (x // 2).astype(np.uint8)}
    table = evaluate_matrix(models, codings, imgs, labels)
    for (mname, cname), value in table.items():
        shown = imgs if codings[cname] is None else np.stack([codings[cname](x) for x in imgs])
        preds = np.stack([models[mname].predict(x) for x in shown])
        # one global matrix over the set: stack everything into a single map
        want = miou_oracle(labels.reshape(-1, 32), preds.reshape(-1, 32), 3)
        assert value == pytest.approx(want, abs=1e-12)


def test_identity_coding_equals_plain():
    imgs, labels = tiny_set()
    m = ThresholdModel(70)
    table = evaluate_matrix({"m": m}, {"id": lambda x: x, "none": None}, imgs, labels)
    assert table[("m", "id")] == table[("m", "none")]


def test_order_invariance():
    imgs, labels = tiny_set(6)
    m = ThresholdModel(70)
    perm = np.random.default_rng(0).permutation(6)
    assert evaluate_confusion(m, imgs, labels) == evaluate_confusion(m, imgs[perm], labels[perm])
