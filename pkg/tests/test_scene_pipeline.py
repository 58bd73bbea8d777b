from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from footprint_ibvs.errors import PipelineError, SchemaError
from footprint_ibvs.io import read_csv, read_pgm_mask, read_ppm, write_csv
from footprint_ibvs.mesh import RobotPose
from footprint_ibvs.pipeline import (ABLATION_HEADER, ExperimentConfig, emit_plots, holdout_split,
                                     load_poses, render_dataset, rerender, robot_poses,
                                     run_ablation, run_full_pipeline, spin_centers)
from footprint_ibvs.pose_opt import Mode
from footprint_ibvs.render import robot_silhouette
from footprint_ibvs.scene import SceneSpec, gen_scene, load_scene, scenes_equal


def _tree_bytes(root: Path):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


# --------------------------------------------------------------------------
# scene

def test_gen_scene_round_trip(tmp_path, scene):
    s = gen_scene(tmp_path)
    back = load_scene(tmp_path / "scene.json")
    assert scenes_equal(s, back)
    assert scenes_equal(back, load_scene(tmp_path))
    assert len(back.cameras) == 3 and all(c.height == 2.5 for c in back.cameras)


def test_scene_mesh_base_on_ground(scene):
    assert scene.load_mesh().vertices[:, 2].min() == 0.0


def test_cameras_see_robot_at_spin_center(scene, mesh):
    pose = RobotPose(*scene.spin_center, 0.0)
    for c in scene.cameras:
        assert robot_silhouette(mesh, pose, c.camera).any()


def test_cameras_pitched_down_thirty_degrees(scene):
    for c in scene.cameras:
        forward = c.camera.pose.R.T @ np.array([0, 0, 1.0])
        assert math.degrees(math.asin(-forward[2])) == pytest.approx(30.0, abs=1e-9)


def test_regions_exclude_wall_band(scene):
    for c in scene.cameras:
        v = scene.regions[c.id].polygon.vertices
        # the top of the image shows the far wall, not floor
        assert v[:, 1].min() > 60
        assert v[:, 1].max() == pytest.approx(c.camera.intrinsics.height)


def test_scene_invariants(scene):
    d = scene.to_dict()
    with pytest.raises(ValueError):
        SceneSpec.from_dict({**d, "cameras": []})
    bad = {**d, "cameras": [{**d["cameras"][0], "mount_height": 0.0}]}
    with pytest.raises(ValueError):
        SceneSpec.from_dict(bad)


# --------------------------------------------------------------------------
# dataset

def test_dataset_count_on_disk(tmp_path, scene):
    render_dataset(scene, 1, 10, 7, tmp_path)
    assert len(list((tmp_path / "frames").glob("*.ppm"))) == 30
    assert len(list((tmp_path / "masks").glob("*.pgm"))) == 30
    assert len(load_poses(tmp_path / "poses.json")) == 30


def test_dataset_deterministic(tmp_path, scene):
    render_dataset(scene, 2, 3, 11, tmp_path / "a")
    render_dataset(scene, 2, 3, 11, tmp_path / "b")
    assert _tree_bytes(tmp_path / "a") == _tree_bytes(tmp_path / "b")


def test_dataset_round_trip(tmp_path, scene_dir):
    scene = load_scene(scene_dir)
    render_dataset(scene, 2, 4, 5, tmp_path)
    records = load_poses(tmp_path / "poses.json")
    again = rerender(load_scene(scene_dir), records)
    for r, f in zip(records, again):
        np.testing.assert_array_equal(read_ppm(tmp_path / "frames" / f"{r.frame_id}.ppm"), f.image)
        np.testing.assert_array_equal(read_pgm_mask(tmp_path / "masks" / f"{r.frame_id}.pgm"), f.mask)


def test_densest_table_row_yaws(scene, mesh):
    data = render_dataset(scene, 6, 50, 7, mesh=mesh)
    assert len(data.frames) == 900
    for r in data.records:
        expect = 2 * math.pi * r.index / 50
        assert math.cos(r.robot_pose.yaw) == pytest.approx(math.cos(expect), abs=1e-12)
        assert math.sin(r.robot_pose.yaw) == pytest.approx(math.sin(expect), abs=1e-12)
    assert data.records[1].robot_pose.yaw == 0.0    # camera loop is innermost


def test_spin_centers_distinct_and_in_view(scene, mesh):
    centers = spin_centers(scene, mesh, 6, 7)
    assert centers[0] == scene.spin_center
    assert len(set(centers)) == 6
    e = scene.spin_half_extent
    for x, y in centers:
        assert abs(x - scene.spin_center[0]) <= e and abs(y - scene.spin_center[1]) <= e
    assert spin_centers(scene, mesh, 6, 7) == centers
    assert spin_centers(scene, mesh, 6, 8) != centers


def test_zero_frames_fail_at_dataset_stage(tmp_path, scene):
    with pytest.raises(PipelineError) as exc:
        render_dataset(scene, 0, 10, 7, tmp_path)
    assert exc.value.stage == "dataset"
    with pytest.raises(PipelineError) as exc:
        run_full_pipeline(scene, ExperimentConfig(spins=0), tmp_path)
    assert exc.value.stage == "dataset"


def test_experiment_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(error_cm=-1)
    with pytest.raises(ValueError):
        ExperimentConfig(trials=-2)


def test_holdout_split():
    tr, ev = holdout_split(30, 7)
    assert len(ev) == 6 and not set(tr) & set(ev) and sorted(tr + ev) == list(range(30))
    assert holdout_split(30, 7) == (tr, ev)


# --------------------------------------------------------------------------
# ablation and plots

def test_ablation_zero_error_baseline(scene, mesh):
    r = run_ablation(scene, [0.0], [Mode.DEFAULT], 2, spins=1, frames_per_spin=5, mesh=mesh)
    for t in r.trials:
        assert t.psnr_db == 99.0 and t.ssim == 1.0
        assert t.pos_err_before_m == 0.0 and t.pos_err_after_m == 0.0


def test_ablation_csv_layout(tmp_path, scene, mesh):
    path = tmp_path / "abl.csv"
    run_ablation(scene, [1.0, 2.0], [Mode.DEFAULT, Mode.PLANE], 2, spins=1, frames_per_spin=4,
                 mesh=mesh, camera_ids=["cam0"], out_csv=path)
    assert path.read_text().splitlines()[0] == ",".join(ABLATION_HEADER)
    rows = read_csv(path)
    means = [r for r in rows if r["trial"] == "mean"]
    assert len(rows) == 8 + 4 and len(means) == 4
    for m in means:
        cell = [float(r["pos_err_after_m"]) for r in rows
                if r["trial"] != "mean" and r["mode"] == m["mode"] and r["error_cm"] == m["error_cm"]]
        assert float(m["pos_err_after_m"]) == pytest.approx(np.mean(cell), abs=1e-15)


def _toy_csv(path):
    rows = []
    for mode in ("DEFAULT", "PLANE"):
        for e in (1, 2, 5, 10):
            rows.append([mode, float(e), "mean", 40.0 - e, 0.99, e / 100, e / 200])
    write_csv(path, ABLATION_HEADER, rows)


def test_emit_plots(tmp_path):
    _toy_csv(tmp_path / "a.csv")
    paths = emit_plots(tmp_path / "a.csv", tmp_path / "out")
    assert len(paths) == 2
    for p in paths:
        root = ET.parse(p).getroot()
        assert root.tag.endswith("svg")
    again = emit_plots(tmp_path / "a.csv", tmp_path / "out2")
    assert [p.read_bytes() for p in paths] == [p.read_bytes() for p in again]


def test_emit_plots_schema_errors(tmp_path):
    (tmp_path / "empty.csv").write_text("")
    with pytest.raises(SchemaError):
        emit_plots(tmp_path / "empty.csv", tmp_path)
    write_csv(tmp_path / "hdr.csv", ABLATION_HEADER, [])
    with pytest.raises(SchemaError):
        emit_plots(tmp_path / "hdr.csv", tmp_path)
    write_csv(tmp_path / "bad.csv", ["a", "b"], [[1, 2]])
    with pytest.raises(SchemaError):
        emit_plots(tmp_path / "bad.csv", tmp_path)


# --------------------------------------------------------------------------
# full pipeline

def test_full_pipeline_small(tmp_path, scene):
    cfg = ExperimentConfig(spins=1, frames_per_spin=4, seed=3)
    a = run_full_pipeline(scene, cfg, tmp_path / "a", grid_spacing=0.5, yaw_samples=2)
    b = run_full_pipeline(scene, cfg, tmp_path / "b", grid_spacing=0.5, yaw_samples=2)
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()
    assert _tree_bytes(tmp_path / "a") == _tree_bytes(tmp_path / "b")
    head = (tmp_path / "a" / "summary.csv").read_text().splitlines()[0]
    assert head == "stage,key,value"
    assert (tmp_path / "a" / "labels.csv").read_text().splitlines()[0] == "frame_id,ccr,iou"
    assert len(a.ccr) == 12 and a.empty_labels == 0
    assert min(a.ccr) > 0.9
    assert set(a.area_gains) == {"cam0", "cam1", "cam2"}
