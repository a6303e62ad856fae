"""Capture orchestration tests over simulated channels, cameras, and scenes."""

import numpy as np
import pytest
from PIL import Image

from luv.capture import (
    CameraError,
    FileReplayCamera,
    LightRig,
    SessionError,
    SimulatedCamera,
    SimulatedChannel,
    capture_pair,
    collect_session,
    sweep_exposures,
)
from luv.plugnet import TransportError
from luv.synthscene import (
    default_profile,
    make_scene,
    randomize,
    render_standard,
    render_uv,
    strip_paint,
)


def sim_setup(kind="cable", seed=7, noise_sigma=0.0, **scene_kw):
    scene = make_scene(kind, seed=seed, noise_sigma=noise_sigma, **scene_kw)
    rig = LightRig(uv=SimulatedChannel("uv"), ambient=SimulatedChannel("ambient", on=True),
                   settle_delay_ms=0)
    camera = SimulatedCamera(scene, rig)
    profile = default_profile(scene)
    return scene, rig, camera, profile


class ListSink:
    def __init__(self):
        self.samples = []

    def write_sample(self, sample, profile):
        self.samples.append((sample, profile))


class TestCapturePair:
    def test_images_match_scene_renders(self):
        scene, rig, camera, profile = sim_setup()
        sample = capture_pair(camera, rig, profile)
        assert sample.std_image == render_standard(scene, profile.std_exposure)
        assert len(sample.uv_images) == 1
        exposure, uv = sample.uv_images[0]
        assert exposure == profile.uv_exposure
        assert uv == render_uv(scene, profile.uv_exposure)

    def test_bracket_ascending(self):
        scene, rig, camera, profile = sim_setup()
        sample = capture_pair(camera, rig, profile, bracket=[1.2, 0.3, 0.6])
        assert [e for e, _ in sample.uv_images] == [0.3, 0.6, 1.2]

    def test_rest_state_after_success(self):
        scene, rig, camera, profile = sim_setup()
        capture_pair(camera, rig, profile)
        assert rig.ambient.is_on()
        assert not rig.uv.is_on()

    def test_plug_failure_mid_sequence_restores_ambient(self):
        scene, rig, camera, profile = sim_setup()
        # first switch (uv off for the standard frame) succeeds, the switch
        # to uv-on fails
        rig.uv.fail_after = 1
        rig.ambient.set_state(False)
        rig.ambient.switch_count = 0
        with pytest.raises(TransportError):
            capture_pair(camera, rig, profile)
        assert rig.ambient.is_on()

    def test_camera_failure_restores_rest(self):
        scene, rig, camera, profile = sim_setup()

        class BrokenCamera(SimulatedCamera):
            def grab(self):
                raise CameraError("sensor fault")

        broken = BrokenCamera(scene, rig)
        with pytest.raises(CameraError):
            capture_pair(broken, rig, profile)
        assert rig.ambient.is_on()
        assert not rig.uv.is_on()

    def test_static_scene_std_identical_across_captures(self):
        scene, rig, camera, profile = sim_setup(noise_sigma=0.02)
        a = capture_pair(camera, rig, profile)
        b = capture_pair(camera, rig, profile)
        assert a.std_image == b.std_image
        assert a.uv_images[0][1] == b.uv_images[0][1]

    def test_timing_recorded(self):
        scene, rig, camera, profile = sim_setup()
        sample = capture_pair(camera, rig, profile)
        assert sample.timing.capture_seconds > 0
        assert [k for k, _ in sample.timing.phases] == ["standard", "uv"]

    def test_empty_bracket_rejected(self):
        scene, rig, camera, profile = sim_setup()
        with pytest.raises(ValueError):
            capture_pair(camera, rig, profile, bracket=[])


class TestSweepExposures:
    def test_mid_exposure_wins(self):
        scene, rig, camera, profile = sim_setup()
        best, scores = sweep_exposures(camera, rig, profile, [0.15, 0.6, 1.8])
        assert best == 0.6
        assert scores[0.6] > 0
        assert scores[0.15] == 0
        assert scores[1.8] == 0

    def test_single_candidate(self):
        scene, rig, camera, profile = sim_setup()
        best, scores = sweep_exposures(camera, rig, profile, [0.45])
        assert best == 0.45
        assert set(scores) == {0.45}

    def test_all_zero_scores_lowest_wins(self):
        scene, rig, camera, profile = sim_setup()
        camera.scene = strip_paint(scene)
        best, scores = sweep_exposures(camera, rig, profile, [0.3, 0.6, 0.9])
        assert best == 0.3
        assert all(v == 0 for v in scores.values())

    def test_rest_state_restored(self):
        scene, rig, camera, profile = sim_setup()
        sweep_exposures(camera, rig, profile, [0.6])
        assert rig.ambient.is_on()
        assert not rig.uv.is_on()

    def test_no_candidates_rejected(self):
        scene, rig, camera, profile = sim_setup()
        with pytest.raises(ValueError):
            sweep_exposures(camera, rig, profile, [])


class TestCollectSession:
    def test_session_with_randomizer(self):
        scene, rig, camera, profile = sim_setup()

        def shake(i):
            camera.scene = randomize(scene, 1000 + i)

        sink = ListSink()
        summary = collect_session(camera, rig, profile, n=10, randomizer=shake, sink=sink)
        assert summary.completed == 10
        assert summary.failed == 0
        assert len(sink.samples) == 10
        assert len(set(summary.sample_ids)) == 10
        for sample, _ in sink.samples:
            assert sample.labels is not None
            mask, _ = sample.labels
            assert mask.classes.any()
        assert summary.mean_label_seconds > 0
        assert summary.mean_capture_seconds > 0

    def test_single_sample_no_randomizer(self):
        scene, rig, camera, profile = sim_setup()
        sink = ListSink()
        summary = collect_session(camera, rig, profile, n=1, sink=sink)
        assert summary.completed == 1
        assert len(sink.samples) == 1

    def test_minority_failures_skipped(self):
        scene, rig, camera, profile = sim_setup()

        def flaky(i):
            if i < 4:
                raise RuntimeError("gripper jam")

        summary = collect_session(camera, rig, profile, n=10, randomizer=flaky)
        assert summary.completed == 6
        assert summary.failed == 4
        assert len(summary.errors) == 4

    def test_majority_failures_abort(self):
        scene, rig, camera, profile = sim_setup()

        def mostly_broken(i):
            if i < 6:
                raise RuntimeError("gripper jam")

        with pytest.raises(SessionError):
            collect_session(camera, rig, profile, n=10, randomizer=mostly_broken)

    def test_n_zero_rejected(self):
        scene, rig, camera, profile = sim_setup()
        with pytest.raises(ValueError):
            collect_session(camera, rig, profile, n=0)


class TestFileReplayCamera:
    def test_replays_in_order_then_exhausts(self, tmp_path):
        rng = np.random.default_rng(3)
        paths = []
        arrays = []
        for i in range(2):
            arr = rng.integers(0, 256, size=(12, 16, 3), dtype=np.uint8)
            path = tmp_path / f"frame{i}.png"
            Image.fromarray(arr).save(path)
            paths.append(path)
            arrays.append(arr)
        camera = FileReplayCamera(paths)
        for arr in arrays:
            assert np.array_equal(camera.grab().pixels, arr)
        with pytest.raises(CameraError):
            camera.grab()

    def test_empty_sequence_rejected(self):
        with pytest.raises(ValueError):
            FileReplayCamera([])

    def test_missing_file_camera_error(self, tmp_path):
        camera = FileReplayCamera([tmp_path / "nope.png"])
        with pytest.raises(CameraError):
            camera.grab()


class TestSimulatedCamera:
    def test_uv_state_selects_render(self):
        scene, rig, camera, profile = sim_setup()
        rig.set_uv()
        camera.set_exposure(0.6)
        assert camera.grab() == render_uv(scene, 0.6)
        rig.set_standard()
        camera.set_exposure(1.0)
        assert camera.grab() == render_standard(scene, 1.0)

    def test_ambient_off_dims_standard(self):
        scene, rig, camera, profile = sim_setup()
        rig.ambient.set_state(False)
        rig.uv.set_state(False)
        camera.set_exposure(1.0)
        dim = camera.grab()
        rig.ambient.set_state(True)
        lit = camera.grab()
        assert dim.to_float().mean() < lit.to_float().mean()

    def test_nonpositive_exposure_rejected(self):
        scene, rig, camera, profile = sim_setup()
        with pytest.raises(CameraError):
            camera.set_exposure(0.0)
