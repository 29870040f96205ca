import hashlib

import numpy as np
import pytest
from PIL import Image

from gancodec.errors import DatasetError
from gancodec.runner.data import (
    DatasetManifest,
    generate_synthetic,
    ingest,
    load_images,
    load_labels,
    synthetic_scene,
)


def digest(paths):
    return [hashlib.sha256(p.read_bytes()).hexdigest() for p in paths]


def test_generate_count_and_classes(tmp_path):
    m = generate_synthetic(tmp_path, 8, (64, 128), K=4, seed=3)
    assert len(m) == 8 and m.has_labels
    imgs, labels = load_images(m), load_labels(m)
    assert imgs.shape == (8, 64, 128, 3) and labels.shape == (8, 64, 128)
    for lab in labels:
        assert set(np.unique(lab)) == {0, 1, 2, 3}


def test_generate_bit_identical(tmp_path):
    a = generate_synthetic(tmp_path / "a", 3, seed=9)
    b = generate_synthetic(tmp_path / "b", 3, seed=9)
    assert digest(a.image_paths) == digest(b.image_paths)
    assert digest(a.label_paths) == digest(b.label_paths)
    c = generate_synthetic(tmp_path / "c", 3, seed=10)
    assert digest(a.image_paths) != digest(c.image_paths)


def test_generate_rejects_bad_dims(tmp_path):
    with pytest.raises(DatasetError):
        generate_synthetic(tmp_path, 1, (60, 128))


@pytest.mark.parametrize("K", [2, 5, 19])
def test_scene_has_all_classes(K):
    img, lab = synthetic_scene(np.random.default_rng(0), 64, 128, K)
    assert np.unique(lab).size == K and img.dtype == np.uint8


def test_cityscapes_layout(tmp_path):
    for city, n in (("aachen", 2), ("bochum", 1)):
        (tmp_path / "leftImg8bit/train" / city).mkdir(parents=True)
        (tmp_path / "gtFine/train" / city).mkdir(parents=True)
        for i in range(n):
            stem = f"{city}_000000_{i:06d}"
            Image.fromarray(np.zeros((32, 64, 3), np.uint8)).save(
                tmp_path / "leftImg8bit/train" / city / f"{stem}_leftImg8bit.png")
            Image.fromarray(np.full((32, 64), 255, np.uint8)).save(
                tmp_path / "gtFine/train" / city / f"{stem}_gtFine_labelTrainIds.png")
    m = ingest(tmp_path)
    assert len(m) == 3
    assert [p.name.replace("_leftImg8bit", "") for p in m.image_paths] == \
        [p.name.replace("_gtFine_labelTrainIds", "") for p in m.label_paths]
    assert ingest(tmp_path).image_paths == m.image_paths
    # a missing label map is reported by name
    m.label_paths[0].unlink()
    with pytest.raises(DatasetError, match="aachen_000000_000000"):
        ingest(tmp_path)


def test_empty_directory(tmp_path):
    with pytest.raises(DatasetError):
        ingest(tmp_path)
    with pytest.raises(DatasetError):
        ingest(tmp_path / "missing")


def test_flat_missing_label(tmp_path):
    m = generate_synthetic(tmp_path, 2)
    m.label_paths[1].unlink()
    with pytest.raises(DatasetError, match="00001.png"):
        ingest(tmp_path)


def test_half_resolution(tmp_path):
    m = generate_synthetic(tmp_path, 1).with_resolution("half")
    assert load_images(m).shape == (1, 32, 64, 3)
    assert load_labels(m).shape == (1, 32, 64)


def test_manifest_alignment():
    with pytest.raises(DatasetError):
        DatasetManifest("train", ["a.png", "b.png"], ["a.png"])
    with pytest.raises(DatasetError):
        DatasetManifest("train", ["a.png"], resolution="quarter")
