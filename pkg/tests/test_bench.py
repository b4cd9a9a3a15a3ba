import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.extra.numpy import arrays
from hypothesis import strategies as st

from mbeseg.bench import (
    Bias, FixtureSpec, dice, export_fixture, fixture_shapes, generate, iou, truth_mask,
)
from mbeseg.errors import FixtureError, MaskError
from mbeseg.images import load_image
from mbeseg.levelset import InitSpec, init_level_set, region_masks

KINDS = ["two_shapes", "ring", "star_corners", "blurred_boundary"]


@pytest.mark.parametrize("kind", ["two_shapes", "ring", "star_corners"])
def test_noiseless_image_takes_two_values(kind):
    image, truth = generate(FixtureSpec(kind=kind))
    assert set(np.unique(image)) == {85.0, 170.0}
    assert np.array_equal(image == 170.0, truth == 1.0)


def test_blurred_boundary_is_smooth():
    image, truth = generate(FixtureSpec(kind="blurred_boundary", blur=3.0))
    assert len(np.unique(image)) > 10
    assert image.min() >= 85.0 - 1e-9 and image.max() <= 170.0 + 1e-9


def test_seed_determinism():
    a, _ = generate(FixtureSpec(kind="ring", noise_std=10.0, seed=7))
    b, _ = generate(FixtureSpec(kind="ring", noise_std=10.0, seed=7))
    c, _ = generate(FixtureSpec(kind="ring", noise_std=10.0, seed=8))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_noise_statistics():
    spec = FixtureSpec(kind="ring", size=(256, 256), inner_radius=36, outer_radius=68,
                       noise_std=10.0, seed=3)
    noisy, _ = generate(spec)
    clean, _ = generate(FixtureSpec(kind="ring", size=(256, 256), inner_radius=36, outer_radius=68))
    assert abs(np.std(noisy - clean) - 10.0) < 0.3
    assert noisy.min() < 85 - 25  # values are not clamped


def test_bias_fields():
    lin, _ = generate(FixtureSpec(kind="two_shapes", bias=Bias("linear", gain=40.0)))
    base, _ = generate(FixtureSpec(kind="two_shapes"))
    assert np.allclose((lin - base)[:, 0], -20.0) and np.allclose((lin - base)[:, -1], 20.0)
    rad, _ = generate(FixtureSpec(kind="ring", bias=Bias("radial_gaussian", sigma_b=30, amplitude=25)))
    d = rad - generate(FixtureSpec(kind="ring"))[0]
    assert np.isclose(d.max(), 25 * np.exp(-0.5 / (2 * 900)), rtol=1e-9)
    with pytest.raises(FixtureError):
        generate(FixtureSpec(bias=Bias("radial_gaussian", sigma_b=0.0)))
    with pytest.raises(FixtureError):
        generate(FixtureSpec(bias=Bias("quadratic")))


def test_invalid_fixtures():
    with pytest.raises(FixtureError):
        generate(FixtureSpec(kind="ring", outer_radius=80))
    with pytest.raises(FixtureError):
        generate(FixtureSpec(kind="ring", inner_radius=30, outer_radius=20))
    with pytest.raises(FixtureError):
        generate(FixtureSpec(kind="spiral"))
    with pytest.raises(FixtureError):
        generate(FixtureSpec(noise_std=-1.0))
    with pytest.raises(FixtureError):
        generate(FixtureSpec(size=(4, 4)))


@pytest.mark.parametrize("kind", KINDS)
def test_truth_matches_binary_init(kind):
    spec = FixtureSpec(kind=kind, size=(96, 80))
    truth = truth_mask(spec)
    union = np.zeros(spec.grid_shape, dtype=bool)
    for shape in fixture_shapes(spec):
        m1, _ = region_masks(init_level_set(spec.grid_shape, InitSpec(shape)))
        union |= m1.astype(bool)
    assert np.array_equal(truth, union)
    assert truth.shape == (80, 96)


def test_dice_iou_values():
    m = np.zeros((8, 8), dtype=bool)
    m[:4] = True
    full = np.ones((8, 8), dtype=bool)
    assert dice(m, m) == 1.0 and iou(m, m) == 1.0
    assert dice(m, ~m) == 0.0
    assert np.isclose(dice(full, m), 2 / 3)
    assert np.isclose(iou(full, m), 0.5)
    empty = np.zeros((3, 3))
    assert dice(empty, empty) == 1.0 and iou(empty, empty) == 1.0


def test_mask_errors():
    with pytest.raises(MaskError):
        dice(np.full((3, 3), 0.5), np.zeros((3, 3)))
    with pytest.raises(MaskError):
        iou(np.zeros((3, 3)), np.zeros((3, 4)))


masks = arrays(np.bool_, (6, 6))


@settings(max_examples=60, deadline=None)
@given(masks, masks)
def test_metric_properties(a, b):
    assert dice(a, b) == dice(b, a)
    assert iou(a, b) == iou(b, a)
    assert iou(a, b) <= dice(a, b) + 1e-15
    assert 0.0 <= iou(a, b) <= 1.0


def test_export(tmp_path):
    spec = FixtureSpec(kind="star_corners", noise_std=5.0, seed=4)
    path = export_fixture(spec, tmp_path)
    side = json.loads((tmp_path / "fixture.json").read_text())
    assert side["spec"]["kind"] == "star_corners" and side["spec"]["seed"] == 4
    lo, hi = side["png16_scale"]["lo"], side["png16_scale"]["hi"]
    png = load_image(path) * 257.0
    image, truth = generate(spec)
    assert np.max(np.abs(lo + (hi - lo) * png / 65535 - image)) <= (hi - lo) / 65535
    assert np.array_equal(load_image(tmp_path / "fixture_truth.png") > 0, truth > 0)
