import os

import numpy as np
import pytest

from glimssm.patchio import (
    AugmentConfig,
    Canvas,
    CoverageMap,
    DatasetError,
    ScanPolicy,
    augment,
    dataset_hash,
    generate_trajectory,
    grid_coords,
    load_cifar10,
    load_image_folder,
    make_bars_dataset,
    make_eval_canvas,
    make_shapes_dataset,
    make_train_canvas,
)

import _reference as ref


def checker_image(c=3, h=32, w=32, seed=0):
    rng = np.random.default_rng(seed)
    return rng.random((c, h, w)).astype(np.float32)


# ---------------------------------------------------------------------------
# canvas

def test_eval_canvas_aspect_example():
    img = checker_image(h=32, w=64)
    cv = make_eval_canvas(img, 128)
    assert cv.pixels.shape == (3, 128, 128)
    assert cv.image_region == (0, 32, 128, 64)


def test_train_canvas_fixed_side_and_zero_padding():
    img = checker_image(h=16, w=16)
    cv = make_train_canvas(img, 40, 40, np.random.default_rng(0))
    assert cv.pixels.shape == (3, 40, 40)
    x0, y0, w, h = cv.image_region
    assert (w, h) == (16, 16)
    np.testing.assert_array_equal(cv.pixels[:, y0:y0 + h, x0:x0 + w], img)
    mask = np.ones((40, 40), dtype=bool)
    mask[y0:y0 + h, x0:x0 + w] = False
    assert not cv.pixels[:, mask].any()


def test_train_canvas_enlarges_for_oversized_image():
    img = checker_image(h=50, w=20)
    cv = make_train_canvas(img, 32, 32, np.random.default_rng(0))
    assert cv.pixels.shape == (3, 50, 32)


def test_train_canvas_side_distribution():
    img = checker_image(h=8, w=8)
    rng = np.random.default_rng(1)
    sides = {make_train_canvas(img, 16, 20, rng).pixels.shape[1]
             for _ in range(200)}
    assert sides == {16, 17, 18, 19, 20}


def test_eval_canvas_padding_zero():
    cv = make_eval_canvas(checker_image(h=10, w=30), 60)
    x0, y0, w, h = cv.image_region
    assert (w, h) == (60, 20)
    mask = np.ones((60, 60), dtype=bool)
    mask[y0:y0 + h, x0:x0 + w] = False
    assert not cv.pixels[:, mask].any()


# ---------------------------------------------------------------------------
# coverage

def test_coverage_examples():
    cov = CoverageMap((0, 0, 32, 32))
    assert cov.update((0, 0, 16, 16)) == pytest.approx(256 / 1024)
    # same patch again: unchanged (unique area only)
    assert cov.update((0, 0, 16, 16)) == pytest.approx(0.25)
    # half-overlapping second patch: 384/1024
    cov2 = CoverageMap((0, 0, 32, 32))
    cov2.update((0, 0, 16, 16))
    assert cov2.update((8, 0, 16, 16)) == pytest.approx(384 / 1024)


def test_coverage_patch_in_padding_unchanged():
    cov = CoverageMap((10, 10, 16, 16))
    cov.update((10, 10, 8, 8))
    before = cov.ratio
    assert cov.update((0, 0, 8, 8)) == before


def test_coverage_full_tiling_reaches_one():
    cov = CoverageMap((4, 4, 16, 16))
    for j in range(2):
        for i in range(2):
            cov.update((4 + 8 * i, 4 + 8 * j, 8, 8))
    assert cov.ratio == 1.0


def test_coverage_matches_bruteforce_random_instances():
    rng = np.random.default_rng(42)
    for _ in range(100):
        cw, ch = int(rng.integers(8, 24)), int(rng.integers(8, 24))
        x0 = int(rng.integers(0, 5))
        y0 = int(rng.integers(0, 5))
        w = int(rng.integers(3, cw - x0 + 1))
        h = int(rng.integers(3, ch - y0 + 1))
        region = (x0, y0, w, h)
        cov = CoverageMap(region)
        rects, got = [], []
        for _ in range(int(rng.integers(1, 8))):
            pw, ph = int(rng.integers(1, 7)), int(rng.integers(1, 7))
            px = int(rng.integers(0, cw - pw + 1))
            py = int(rng.integers(0, ch - ph + 1))
            rects.append((px, py, pw, ph))
            got.append(cov.update((px, py, pw, ph)))
        want = ref.ref_coverage_bitmap(rects, region, cw, ch)
        assert got == want  # exact equality


# ---------------------------------------------------------------------------
# trajectories

def make_canvas(h=32, w=32, pad=0, seed=0):
    img = checker_image(h=h, w=w, seed=seed)
    px = np.zeros((3, h + 2 * pad, w + 2 * pad), dtype=np.float32)
    px[:, pad:pad + h, pad:pad + w] = img
    return Canvas(px, (pad, pad, w, h))


def test_raster_order_with_cyclic_repeat():
    cv = make_canvas(h=32, w=32)
    steps = generate_trajectory(cv, ScanPolicy("raster-horizontal"), 6, 16)
    coords = [s.coord for s in steps]
    assert coords == [(0, 0), (16, 0), (0, 16), (16, 16), (0, 0), (16, 0)]


def test_zigzag_order():
    cv = make_canvas(h=32, w=32)
    steps = generate_trajectory(cv, ScanPolicy("zigzag-horizontal"), 4, 16)
    assert [s.coord for s in steps] == [(0, 0), (16, 0), (16, 16), (0, 16)]


def test_deterministic_truncation_when_grid_exceeds_length():
    cv = make_canvas(h=64, w=64)
    steps = generate_trajectory(cv, ScanPolicy("raster-horizontal"), 3, 16)
    assert [s.coord for s in steps] == [(0, 0), (16, 0), (32, 0)]


def test_raster_row_wrap_delta():
    cv = make_canvas(h=48, w=64)
    steps = generate_trajectory(cv, ScanPolicy("raster-horizontal"), 5, 16)
    # grid is 4 wide; wrap happens entering step index 4
    assert steps[4].delta == (-(4 - 1) * 16, 16)
    assert abs(steps[4].delta[0]) == (4 - 1) * 16


def test_zigzag_row_transition_delta():
    cv = make_canvas(h=48, w=64)
    steps = generate_trajectory(cv, ScanPolicy("zigzag-horizontal"), 5, 16)
    assert steps[4].delta == (0, 16)


def test_first_step_delta_is_initial():
    cv = make_canvas()
    steps = generate_trajectory(cv, ScanPolicy("random-image", seed=3), 4, 8)
    assert steps[0].delta is None
    assert all(s.delta is not None for s in steps[1:])


def test_random_image_r_after_first_step():
    cv = make_canvas(h=32, w=32)
    steps = generate_trajectory(cv, ScanPolicy("random-image", seed=1), 1, 16)
    assert steps[0].r == pytest.approx(256 / 1024)


def test_random_image_patches_inside_region_property():
    cv = make_canvas(h=24, w=40, pad=12, seed=5)
    x0, y0, w, h = cv.image_region
    rng = np.random.default_rng(7)
    count = 0
    while count < 10_000:
        steps = generate_trajectory(cv, ScanPolicy("random-image"), 50, 8,
                                    rng=rng)
        for s in steps:
            x, y = s.coord
            assert x0 <= x and x + 8 <= x0 + w
            assert y0 <= y and y + 8 <= y0 + h
        count += len(steps)


def test_trajectory_bit_reproducible():
    cv = make_canvas(pad=6)
    a = generate_trajectory(cv, ScanPolicy("random-mixed", seed=11), 30, 8)
    b = generate_trajectory(cv, ScanPolicy("random-mixed", seed=11), 30, 8)
    assert [s.coord for s in a] == [s.coord for s in b]
    assert all((x.v == y.v).all() and x.r == y.r for x, y in zip(a, b))


def test_random_mixed_uses_padding_about_half_the_time():
    cv = make_canvas(h=16, w=16, pad=24, seed=2)
    x0, y0, w, h = cv.image_region
    outside = 0
    trials = 400
    for k in range(trials):
        steps = generate_trajectory(cv, ScanPolicy("random-mixed", seed=k),
                                    20, 8)
        if any(not (x0 <= s.coord[0] and s.coord[0] + 8 <= x0 + w and
                    y0 <= s.coord[1] and s.coord[1] + 8 <= y0 + h)
               for s in steps):
            outside += 1
    assert 0.35 < outside / trials < 0.65


def test_r_monotone_and_bounded_all_policies():
    rng = np.random.default_rng(9)
    for kind in ("random-image", "random-mixed", "raster-horizontal",
                 "zigzag-horizontal"):
        for k in range(25):
            cv = make_canvas(h=int(rng.integers(8, 40)),
                             w=int(rng.integers(8, 40)),
                             pad=int(rng.integers(0, 10)), seed=k)
            steps = generate_trajectory(cv, ScanPolicy(kind, seed=k), 40, 4)
            rs = [s.r for s in steps]
            assert all(0.0 <= r <= 1.0 for r in rs)
            assert all(b >= a for a, b in zip(rs, rs[1:]))


def test_deterministic_policy_rejects_tiny_region():
    cv = make_canvas(h=8, w=8, pad=20)
    with pytest.raises(ValueError, match="grid cell"):
        generate_trajectory(cv, ScanPolicy("raster-horizontal"), 4, 16)


def test_patch_vector_contents_and_length():
    cv = make_canvas(h=16, w=16)
    steps = generate_trajectory(cv, ScanPolicy("raster-horizontal"), 1, 8)
    s = steps[0]
    assert s.v.shape == (3 * 8 * 8,)
    np.testing.assert_array_equal(
        s.v, cv.pixels[:, 0:8, 0:8].reshape(-1))


def test_zigzag_full_grid_reaches_full_coverage():
    cv = make_canvas(h=32, w=32)
    steps = generate_trajectory(cv, ScanPolicy("zigzag-horizontal"), 4, 16)
    assert steps[-1].r == 1.0


# ---------------------------------------------------------------------------
# grid helper

def test_grid_coords_validation():
    with pytest.raises(ValueError):
        grid_coords((0, 0, 10, 10), 16)


# ---------------------------------------------------------------------------
# datasets

def write_fake_cifar(path, n=20, seed=0):
    rng = np.random.default_rng(seed)
    recs = np.zeros((n, 3073), dtype=np.uint8)
    recs[:, 0] = rng.integers(0, 10, n)
    recs[:, 1:] = rng.integers(0, 256, (n, 3072))
    recs.tofile(path)
    return recs


def test_cifar10_roundtrip(tmp_path):
    path = tmp_path / "batch.bin"
    recs = write_fake_cifar(str(path), n=20)
    ds = load_cifar10(str(path))
    assert len(ds) == 20 and ds.n_classes == 10
    assert ds.images[0].shape == (3, 32, 32)
    np.testing.assert_array_equal(ds.labels, recs[:, 0])
    np.testing.assert_allclose(
        ds.images[3], recs[3, 1:].reshape(3, 32, 32) / 255.0, rtol=1e-6)
    assert ds.images[0].min() >= 0.0 and ds.images[0].max() <= 1.0


def test_cifar10_malformed_record_names_offset(tmp_path):
    path = tmp_path / "bad.bin"
    write_fake_cifar(str(path), n=3)
    with open(path, "ab") as fh:
        fh.write(b"\x00" * 100)  # truncated fourth record
    with pytest.raises(DatasetError, match=str(3 * 3073)):
        load_cifar10(str(path))


def test_cifar10_label_out_of_range(tmp_path):
    path = tmp_path / "badlabel.bin"
    recs = np.zeros((2, 3073), dtype=np.uint8)
    recs[1, 0] = 11
    recs.tofile(str(path))
    with pytest.raises(DatasetError, match="out of range"):
        load_cifar10(str(path))


def test_image_folder_with_class_dirs(tmp_path):
    from PIL import Image
    for cname, val in [("apple", 40), ("berry", 200)]:
        d = tmp_path / cname
        d.mkdir()
        for i in range(2):
            Image.fromarray(
                np.full((8, 10, 3), val + i, dtype=np.uint8)).save(
                    d / f"img{i}.png")
    ds = load_image_folder(str(tmp_path))
    assert len(ds) == 4 and ds.n_classes == 2
    assert ds.class_names == ["apple", "berry"]
    assert ds.images[0].shape == (3, 8, 10)
    assert ds.images[0].max() <= 1.0
    np.testing.assert_allclose(ds.images[0], 40 / 255.0, rtol=1e-6)


def test_image_folder_labels_csv(tmp_path):
    from PIL import Image
    Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(
        tmp_path / "a.png")
    Image.fromarray(np.ones((4, 4, 3), dtype=np.uint8) * 255).save(
        tmp_path / "b.png")
    (tmp_path / "labels.csv").write_text(
        "filename,label\na.png,cat\nb.png,dog\n")
    ds = load_image_folder(str(tmp_path))
    assert len(ds) == 2
    assert ds.class_names == ["cat", "dog"]


def test_empty_folder_rejected(tmp_path):
    with pytest.raises(DatasetError, match="no"):
        load_image_folder(str(tmp_path))


def test_dataset_hash_stable_and_sensitive():
    a = make_bars_dataset(10, seed=1)
    b = make_bars_dataset(10, seed=1)
    c = make_bars_dataset(10, seed=2)
    assert dataset_hash(a) == dataset_hash(b)
    assert dataset_hash(a) != dataset_hash(c)


def test_shapes_dataset_properties():
    ds = make_shapes_dataset(60, size=32, seed=0)
    assert len(ds) == 60 and ds.n_classes == 10
    assert all(img.shape == (3, 32, 32) for img in ds.images)
    assert all(0.0 <= img.min() and img.max() <= 1.0 for img in ds.images)
    assert set(np.unique(ds.labels)) <= set(range(10))


# ---------------------------------------------------------------------------
# augmentation

def test_augment_identity_when_disabled():
    img = checker_image()
    out = augment(img, AugmentConfig.none(), np.random.default_rng(0))
    np.testing.assert_array_equal(out, img)


def test_color_jitter_zero_strength_is_identity():
    img = checker_image(seed=3)
    cfg = AugmentConfig(jitter_prob=1.0, jitter_strength=0.0)
    out = augment(img, cfg, np.random.default_rng(1))
    np.testing.assert_array_equal(out, img)


def test_crop_of_constant_image_stays_constant():
    img = np.full((3, 24, 24), 0.7, dtype=np.float32)
    cfg = AugmentConfig(crop_prob=1.0, crop_min_scale=0.5)
    out = augment(img, cfg, np.random.default_rng(2))
    assert out.shape == img.shape
    assert float(np.ptp(out)) <= 1e-6
    assert abs(float(out.mean()) - 0.7) <= 1e-6


def test_augment_clamped_and_shaped():
    img = checker_image(seed=4)
    cfg = AugmentConfig(crop_prob=0.8, perspective_prob=0.8, jitter_prob=0.8)
    rng = np.random.default_rng(5)
    for _ in range(10):
        out = augment(img, cfg, rng)
        assert out.shape == img.shape
        assert out.min() >= 0.0 and out.max() <= 1.0
