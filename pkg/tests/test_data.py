from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teyolof.data import (
    AnnotationSet,
    AugmentationConfig,
    ImageEntry,
    Sample,
    SplitMix64,
    augment,
    class_index,
    coco_dumps,
    decode_ppm,
    encode_ppm,
    epoch_batches,
    from_coco_dict,
    hflip,
    load_samples,
    normalize,
    num_batches,
    parse_voc_xml,
    read_coco_json,
    read_manifest,
    read_ppm,
    resize_to,
    save_samples,
    split_dataset,
    synth_generate,
    to_annotations,
    to_coco_dict,
    vflip,
    voc_to_annotations,
    write_coco_json,
    write_manifest,
    write_ppm,
)
from teyolof.data.synth import PLATELET, RBC, WBC
from teyolof.data.transforms import MEAN, STD, adjust_brightness, adjust_exposure, crop
from teyolof.errors import ConfigError, DataError

FIXTURES = Path(__file__).parent / "fixtures"
VOC_FILES = sorted((FIXTURES / "voc").glob("*.xml"))


def _toy_set():
    return AnnotationSet([
        ImageEntry(1, "a.ppm", 64, 48, [[0, 0, 99, 99], [1.5, 2.25, 10, 20]], [1, 2]),
        ImageEntry(2, "b.ppm", 32, 32, np.zeros((0, 4)), []),
        ImageEntry(7, "c.ppm", 16, 8, [[3, 3, 4, 4]], [0]),
    ])


# -- VOC and COCO ----------------------------------------------------------

def test_voc_one_based_to_zero_based():
    entry = parse_voc_xml(VOC_FILES[0], image_id=1)
    assert entry.width == 640 and entry.height == 480
    lowered = [b for b, lab in zip(entry.boxes, entry.labels) if lab == class_index("RBC")]
    assert any(np.array_equal(b, [0, 0, 99, 99]) for b in lowered)


def test_voc_empty_object_list():
    entry = parse_voc_xml(VOC_FILES[2], image_id=3)
    assert entry.boxes.shape == (0, 4)


def test_class_names_case_insensitive():
    assert class_index("rbc") == class_index("RBC") == 1
    assert class_index(" platelets ") == 0
    with pytest.raises(DataError, match="Neutrophil"):
        class_index("Neutrophil")


@pytest.mark.parametrize("body, word", [
    ("<annotation><size><width>10</width><height>10</height></size><object><name>RBC</name>"
     "<bndbox><xmin>5</xmin><ymin>1</ymin><xmax>5</xmax><ymax>3</ymax></bndbox></object></annotation>", "degenerate"),
    ("<annotation><size><width>10</width><height>10</height></size><object><name>Blob</name>"
     "<bndbox><xmin>1</xmin><ymin>1</ymin><xmax>5</xmax><ymax>3</ymax></bndbox></object></annotation>", "Blob"),
    ("<annotation><size><width>10</width></size></annotation>", "height"),
    ("<annotation><size>", "XML|xml"),
])
def test_voc_errors(tmp_path, body, word):
    path = tmp_path / "bad.xml"
    path.write_text(body)
    with pytest.raises(DataError, match=word):
        parse_voc_xml(path)


def test_voc_to_coco_matches_golden_bytes():
    text = coco_dumps(voc_to_annotations(VOC_FILES))
    assert text.encode("utf-8") == (FIXTURES / "voc_golden.json").read_bytes()


def test_coco_bbox_layout():
    d = to_coco_dict(_toy_set())
    ann = d["annotations"][0]
    assert ann["bbox"] == [0, 0, 99, 99] and ann["area"] == 9801 and ann["iscrowd"] == 0
    assert d["categories"] == [{"id": 1, "name": "Platelets"}, {"id": 2, "name": "RBC"}, {"id": 3, "name": "WBC"}]
    assert ann["category_id"] == 2


def test_coco_roundtrip(tmp_path):
    ds = _toy_set()
    write_coco_json(tmp_path / "a.json", ds)
    assert read_coco_json(tmp_path / "a.json") == ds
    assert from_coco_dict(to_coco_dict(ds)) == ds


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("images"),
    lambda d: d["annotations"][0].update(bbox=[0, 0, -1, 5]),
    lambda d: d["annotations"][0].pop("bbox"),
])
def test_coco_errors(mutate):
    d = to_coco_dict(_toy_set())
    mutate(d)
    with pytest.raises(DataError):
        from_coco_dict(d)


# -- split -----------------------------------------------------------------

@pytest.mark.parametrize("n, sizes", [(10, (7, 2, 1)), (364, (254, 73, 37))])
def test_split_sizes(n, sizes):
    assert split_dataset(range(n), seed=3).sizes() == sizes


def test_split_is_deterministic_disjoint_exhaustive():
    a, b = split_dataset(range(364), seed=5), split_dataset(range(364), seed=5)
    assert a == b
    parts = a.train + a.val + a.test
    assert sorted(parts) == list(range(364))
    assert split_dataset(range(364), seed=6).train != a.train


def test_split_errors():
    with pytest.raises(DataError):
        split_dataset([1, 2])
    with pytest.raises(DataError):
        split_dataset(range(10), ratios=(0.5, 0.5, 0.5))


def test_manifest_roundtrip(tmp_path):
    s = split_dataset(range(20), seed=1)
    write_manifest(tmp_path / "m.tsv", s)
    back = read_manifest(tmp_path / "m.tsv")
    assert back.subsets() == s.subsets()
    assert (tmp_path / "m.tsv").read_text().splitlines()[0] == f"{s.train[0]}\ttrain"


def test_splitmix_reference_values():
    # first outputs of the reference generator seeded with 0
    g = SplitMix64(0)
    assert [g.next_u64() for _ in range(3)] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


# -- geometry and photometry ----------------------------------------------

def _sample(w=100, h=60, seed=0):
    rng = np.random.default_rng(seed)
    image = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
    return Sample(image, [[10, 0, 20, 10], [50, 20, 90, 55]], [1, 2], image_id=4)


def test_hflip_example_and_involution():
    s = _sample()
    f = hflip(s)
    np.testing.assert_array_equal(f.boxes[0], [80, 0, 90, 10])
    back = hflip(f)
    np.testing.assert_array_equal(back.image, s.image)
    np.testing.assert_array_equal(back.boxes, s.boxes)


def test_vflip_involution():
    s = _sample()
    np.testing.assert_array_equal(vflip(s).boxes[0], [10, 50, 20, 60])
    np.testing.assert_array_equal(vflip(vflip(s)).image, s.image)


def test_resize_640x480():
    s = Sample(np.zeros((480, 640, 3), dtype=np.uint8), [[64, 48, 320, 240]], [0])
    r = resize_to(s, 416)
    assert r.image.shape == (416, 416, 3)
    np.testing.assert_allclose(r.boxes, [[64 * 416 / 640, 48 * 416 / 480, 208, 208]])


def test_resize_identity_and_thin_box():
    s = Sample(np.random.default_rng(1).integers(0, 256, (64, 64, 3), dtype=np.uint8), [[63, 0, 64, 64]], [0])
    r = resize_to(s, 64)
    np.testing.assert_array_equal(r.image, s.image)
    thin = resize_to(Sample(np.zeros((50, 70, 3), dtype=np.uint8), [[69, 0, 70, 50]], [0]), 32)
    assert np.all(thin.boxes >= 0) and np.all(thin.boxes <= 32)


def test_resize_requires_multiple_of_32():
    with pytest.raises(ConfigError):
        resize_to(_sample(), 100)


def test_photometric_identity():
    s = _sample()
    np.testing.assert_array_equal(adjust_brightness(s.image, 1.0), s.image)
    np.testing.assert_array_equal(adjust_exposure(s.image, 1.0), s.image)
    assert adjust_brightness(s.image, 1.15).max() == 255


def test_crop_drops_mostly_removed_boxes():
    s = Sample(np.zeros((100, 100, 3), dtype=np.uint8), [[0, 0, 10, 10], [40, 40, 60, 60]], [0, 1])
    c = crop(s, 0.15, 0.0, 0.0, 0.0, 0.25)
    assert c.labels.tolist() == [1]
    assert c.image.shape == s.image.shape


def test_augmentation_config_validation():
    with pytest.raises(ConfigError):
        AugmentationConfig(hflip_p=1.5).validate()
    with pytest.raises(ConfigError):
        AugmentationConfig(crop_max_frac=0.5).validate()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_augment_keeps_boxes_in_bounds(seed):
    s = _sample(seed=seed % 7)
    out = augment(s, AugmentationConfig(), SplitMix64(seed))
    assert out.image.shape == s.image.shape and out.image.dtype == np.uint8
    assert np.all(out.boxes[:, 0::2] >= 0) and np.all(out.boxes[:, 0::2] <= s.width)
    assert np.all(out.boxes[:, 1::2] >= 0) and np.all(out.boxes[:, 1::2] <= s.height)
    assert set(out.labels.tolist()) <= set(s.labels.tolist())
    again = augment(s, AugmentationConfig(), SplitMix64(seed))
    np.testing.assert_array_equal(out.image, again.image)


def test_normalize_values_and_layout():
    img = np.zeros((4, 5, 3), dtype=np.uint8)
    img[0, 0, 0] = 255
    img[3, 4] = [1, 2, 3]
    x = normalize(img)
    assert x.shape == (3, 4, 5)
    assert abs(x[0, 0, 0] - 2.2489) < 1e-4
    np.testing.assert_allclose(x[:, 3, 4], (np.array([1, 2, 3]) / 255 - MEAN) / STD)
    mean_pixel = np.broadcast_to(255 * np.asarray(MEAN), (1, 1, 3))
    np.testing.assert_allclose(((mean_pixel / 255 - MEAN) / STD), 0.0, atol=1e-15)


# -- PPM -------------------------------------------------------------------

def test_ppm_roundtrip(tmp_path):
    img = np.random.default_rng(2).integers(0, 256, (7, 9, 3), dtype=np.uint8)
    write_ppm(tmp_path / "x.ppm", img)
    np.testing.assert_array_equal(read_ppm(tmp_path / "x.ppm"), img)
    assert encode_ppm(img).startswith(b"P6\n9 7\n255\n")


@pytest.mark.parametrize("blob", [b"P6\n2 2\n65535\n" + bytes(24), b"P3\n1 1\n255\n0 0 0", b"P6\n2 2\n255\n\x00"])
def test_ppm_rejects_unsupported(blob):
    with pytest.raises(DataError):
        decode_ppm(blob)


# -- synthetic data --------------------------------------------------------

def test_synth_is_deterministic():
    a, b = synth_generate(4, seed=11, size=64), synth_generate(4, seed=11, size=64)
    for x, y in zip(a, b):
        assert x.image.tobytes() == y.image.tobytes()
        np.testing.assert_array_equal(x.boxes, y.boxes)
    assert synth_generate(1, seed=12, size=64)[0].image.tobytes() != a[0].image.tobytes()


def test_synth_size_bands_and_counts():
    for s in synth_generate(12, seed=0, size=128):
        area = (s.boxes[:, 2] - s.boxes[:, 0]) * (s.boxes[:, 3] - s.boxes[:, 1])
        counts = np.bincount(s.labels, minlength=3)
        assert counts[WBC] <= 2 and 5 <= counts[RBC] <= 15 and counts[PLATELET] <= 4
        if counts[WBC] and counts[PLATELET]:
            assert area[s.labels == PLATELET].max() < area[s.labels == WBC].min()
        assert np.all(s.boxes >= 0) and np.all(s.boxes <= 128)


def test_synth_hundred_images_to_coco():
    d = to_coco_dict(to_annotations(synth_generate(100, seed=1, size=32)))
    assert len(d["images"]) == 100


def test_save_and_load_samples(tmp_path):
    samples = synth_generate(3, seed=2, size=64)
    save_samples(samples, tmp_path)
    back = load_samples(tmp_path / "annotations.json", tmp_path)
    assert [s.image_id for s in back] == [1, 2, 3]
    for a, b in zip(samples, back):
        np.testing.assert_array_equal(a.image, b.image)
        np.testing.assert_array_equal(a.boxes, b.boxes)


def test_load_samples_missing_image(tmp_path):
    samples = synth_generate(2, seed=2, size=32)
    save_samples(samples, tmp_path)
    (tmp_path / samples[1].source_path).unlink()
    with pytest.raises(DataError):
        load_samples(tmp_path / "annotations.json", tmp_path)


# -- batching --------------------------------------------------------------

def test_batches_are_reproducible():
    samples = synth_generate(10, seed=3, size=64)
    aug = AugmentationConfig(seed=1)
    a = list(epoch_batches(samples, 4, seed=0, epoch=2, aug=aug))
    b = list(epoch_batches(samples, 4, seed=0, epoch=2, aug=aug))
    assert [x.image_ids for x in a] == [x.image_ids for x in b]
    assert all(np.array_equal(x.images, y.images) for x, y in zip(a, b))
    assert [len(x.image_ids) for x in a] == [4, 4, 2] and num_batches(10, 4) == 3
    other = list(epoch_batches(samples, 4, seed=0, epoch=3))
    assert [x.image_ids for x in other] != [x.image_ids for x in a]
    assert sorted(i for x in a for i in x.image_ids) == list(range(1, 11))
