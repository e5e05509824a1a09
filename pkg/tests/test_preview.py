"""Progressive preview rendering and the adaptive-resolution controller."""

import numpy as np
import pytest

from vdikit.preview import (PiController, PreviewParams, bilinear_upsample,
                            pi_update, render_preview, samples_in_cell)
from vdikit.raycast import render_vdi


# -- per-cell sample budget --


def test_samples_in_cell_zero_count():
    assert samples_in_cell(0.7, 5.0, 0) == 0


def test_samples_in_cell_product():
    assert samples_in_cell(1.0, 2.0, 3) == 6


def test_samples_in_cell_rounds_half_up():
    assert samples_in_cell(0.5, 1.0, 1) == 1   # 0.5 -> 1
    assert samples_in_cell(0.49, 1.0, 1) == 0  # 0.49 -> 0
    assert samples_in_cell(0.5, 1.0, 3) == 2   # 1.5 -> 2


def test_samples_in_cell_linearity_in_d_r():
    base = samples_in_cell(0.25, 8.0, 4)
    assert samples_in_cell(0.5, 8.0, 4) == 2 * base
    assert samples_in_cell(1.0, 8.0, 4) == 4 * base


def test_samples_in_cell_rejects_negative():
    with pytest.raises(ValueError):
        samples_in_cell(-0.1, 1.0, 1)
    with pytest.raises(ValueError):
        samples_in_cell(0.1, -1.0, 1)


# -- bilinear upsampling --


def test_upsample_identity_when_sizes_match():
    rng = np.random.default_rng(0)
    arr = rng.uniform(size=(6, 5, 4))
    assert bilinear_upsample(arr, 5, 6) is arr


def test_upsample_constant_stays_constant():
    arr = np.full((4, 4, 4), 0.37)
    out = bilinear_upsample(arr, 16, 16)
    assert out.shape == (16, 16, 4)
    assert np.allclose(out, 0.37)


def test_upsample_preserves_mean_of_linear_ramp():
    ramp = np.linspace(0, 1, 8)[None, :, None] * np.ones((8, 1, 1))
    out = bilinear_upsample(ramp, 32, 32)
    assert out.min() >= 0 and out.max() <= 1
    assert out.mean() == pytest.approx(ramp.mean(), abs=1e-3)


# -- preview rendering --


def test_preview_full_resolution_close_to_reference(sphere_vdi_small):
    vol, tf, cam, vdi, grid, _ = sphere_vdi_small
    params = PreviewParams(d_i=1.0, d_r=1.0, display=cam.viewport)
    img = render_preview(vdi, grid, cam, params)
    ref = render_vdi(vdi, grid, cam)
    assert np.abs(img.data - ref.data).max() < 0.02


def test_preview_zero_count_cells_get_zero_samples(sphere_vdi_small):
    vol, tf, cam, vdi, grid, _ = sphere_vdi_small
    params = PreviewParams(d_i=0.5, d_r=0.8, display=cam.viewport)
    img, stats = render_preview(vdi, grid, cam, params, with_stats=True)
    assert stats.total_samples > 0
    assert np.all(stats.cell_samples[grid.counts == 0] == 0)


def test_preview_sample_count_scales_with_d_r(sphere_vdi_small):
    vol, tf, cam, vdi, grid, _ = sphere_vdi_small
    totals = []
    for d_r in (0.25, 0.5, 1.0):
        params = PreviewParams(d_i=0.5, d_r=d_r, display=cam.viewport)
        _, stats = render_preview(vdi, grid, cam, params, with_stats=True)
        totals.append(stats.total_samples)
    assert totals[0] < totals[1] < totals[2]
    # round-half-up keeps the totals near proportional
    assert totals[2] / totals[1] == pytest.approx(2.0, rel=0.25)


def test_preview_output_matches_display_size(sphere_vdi_small):
    vol, tf, cam, vdi, grid, _ = sphere_vdi_small
    params = PreviewParams(d_i=0.3, d_r=0.5, display=(96, 64))
    img = render_preview(vdi, grid, cam, params)
    assert (img.width, img.height) == (96, 64)


# -- PI controller --


def test_pi_slow_frame_lowers_resolution():
    ctrl = PiController()
    d0 = ctrl.d_i
    d1 = ctrl.update(200.0, 30)  # 200 ms frame, 33 ms budget
    assert d1 < d0


def test_pi_fast_frame_raises_resolution():
    ctrl = PiController(d_i=0.5)
    d1 = ctrl.update(5.0, 30)
    assert d1 > 0.5


def test_pi_output_clamped():
    ctrl = PiController()
    for _ in range(50):
        ctrl.update(10000.0, 60)
    assert ctrl.d_i == ctrl.bounds[0]
    for _ in range(200):
        ctrl.update(0.01, 10)
    assert ctrl.d_i == ctrl.bounds[1]


def test_pi_rejects_nonpositive_measurement():
    with pytest.raises(ValueError):
        pi_update(PiController(), 0.0, 30)


@pytest.mark.parametrize("target_fps", [20, 30, 60])
def test_pi_settles_on_quadratic_cost_model(target_fps):
    # plant: frame time grows with the square of the resolution scale
    c = 50.0
    ctrl = PiController()
    frame_ms = c * ctrl.d_i ** 2
    for _ in range(60):
        d = ctrl.update(frame_ms, target_fps)
        frame_ms = c * d * d
    target_ms = 1000.0 / target_fps
    lo, hi = ctrl.bounds
    if c * hi * hi <= target_ms:
        assert ctrl.d_i == hi  # already cheap enough at full resolution
    else:
        assert frame_ms == pytest.approx(target_ms, rel=0.05)


def test_pi_settles_regardless_of_start_point():
    ctrl = PiController(d_i=0.1)
    frame_ms = 80.0 * ctrl.d_i ** 2
    for _ in range(60):
        d = ctrl.update(frame_ms, 30)
        frame_ms = 80.0 * d * d
    assert frame_ms == pytest.approx(1000.0 / 30.0, rel=0.05)
