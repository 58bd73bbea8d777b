"""Command-line entry point.

Every verb writes under ``--out``. Exit status is 0 on success, 1 on a
usage error and 2 when a pipeline stage fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .errors import FootprintError
from .footprint import (LabelError, footprint_oracle_from_mesh, generate_labels,
                        polygon_to_mask, project_footprint)
from .io import read_pgm_mask, read_ppm, write_csv, write_json, write_pgm
from .mesh import RobotPose
from .metrics import ccr, mask_iou, psnr, ssim
from .pipeline import (LABELS_HEADER, ExperimentConfig, emit_plots,
                       estimate_footprint, footprint_json, load_footprint, load_poses,
                       render_dataset, run_ablation, run_full_pipeline)
from .pose_opt import Mode, RefineConfig, perturb_pose, refine
from .render import RenderedFrame
from .rng import Xoshiro256
from .safety import Trajectory, area_gain, check_trajectory
from .scene import SceneSpec, gen_scene, load_scene

log = logging.getLogger("footprint_ibvs")

EXIT_OK, EXIT_USAGE, EXIT_PIPELINE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _float_list(text: str) -> List[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not vals or any(v < 0 or not math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("errors must be finite and non-negative")
    return vals


def _mode_list(text: str) -> List[Mode]:
    if text.lower() == "both":
        return [Mode.DEFAULT, Mode.PLANE]
    try:
        return [Mode(v.strip().upper()) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"mode must be DEFAULT, PLANE or both, got {text!r}")


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="footprint-ibvs", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def verb(name, help, scene=True):
        s = sub.add_parser(name, help=help)
        if scene:
            s.add_argument("--scene", type=Path, required=True,
                           help="scene.json or the directory containing it")
        s.add_argument("--out", type=Path, required=True)
        return s

    def dataset_flags(s, spins=2, fps=50):
        s.add_argument("--seed", type=int, default=7)
        s.add_argument("--spins", type=_positive_int, default=spins)
        s.add_argument("--frames-per-spin", type=_positive_int, default=fps)

    def grid_flags(s):
        s.add_argument("--grid-spacing", type=_positive_float, default=0.05)
        s.add_argument("--yaw-samples", type=_positive_int, default=8)

    verb("gen-scene", "write the demo scene and robot mesh", scene=False)
    dataset_flags(verb("render-dataset", "render frames and masks for every camera"))
    verb("estimate-footprint", "recover the footprint from an overhead render")
    verb("gen-labels", "footprint labels for a dataset rendered into --out")

    s = verb("refine-poses", "perturb and refine every camera against a dataset in --out")
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--errors", type=_float_list, default=[5.0],
                   help="perturbation magnitude in cm (first value is used)")
    s.add_argument("--mode", type=_mode_list, default=[Mode.PLANE])

    s = verb("ablate", "pose-error ablation grid, CSV and plots")
    dataset_flags(s, spins=3, fps=10)
    s.add_argument("--errors", type=_float_list, default=[1.0, 2.0, 5.0, 10.0])
    s.add_argument("--mode", type=_mode_list, default=[Mode.DEFAULT, Mode.PLANE])
    s.add_argument("--trials", type=_positive_int, default=20)

    s = sub.add_parser("metrics", help="compare two images (PPM) or two masks (PGM)")
    s.add_argument("pred", type=Path)
    s.add_argument("gt", type=Path)
    s.add_argument("--out", type=Path, default=None, help="also write the result as JSON")

    s = verb("safety", "check a trajectory under both safety modes")
    s.add_argument("trajectory", type=Path, nargs="?", default=None,
                   help="JSON list of [x, y, yaw]; defaults to a drive toward each camera's far wall")

    grid_flags(verb("area-gain", "footprint-safe over bbox-safe pose counts per camera"))

    s = verb("full-pipeline", "dataset, footprint, labels, evaluation and safety")
    dataset_flags(s)
    grid_flags(s)
    return p


# --------------------------------------------------------------------------
# verbs

def _scene(args) -> SceneSpec:
    return load_scene(args.scene)


def _load_dataset_frames(out: Path):
    records = load_poses(out / "poses.json")
    frames = [RenderedFrame(read_ppm(out / "frames" / f"{r.frame_id}.ppm"),
                            read_pgm_mask(out / "masks" / f"{r.frame_id}.pgm"),
                            np.empty((0, 0)), r.robot_pose, r.camera_id) for r in records]
    return records, frames


def cmd_gen_scene(args) -> None:
    gen_scene(args.out)
    print(args.out / "scene.json")


def cmd_render_dataset(args) -> None:
    data = render_dataset(_scene(args), args.spins, args.frames_per_spin, args.seed, args.out)
    print(f"{len(data.records)} frames -> {args.out}")


def cmd_estimate_footprint(args) -> None:
    scene = _scene(args)
    fp, _ = estimate_footprint(scene, scene.load_mesh(), out_dir=args.out)
    print(json.dumps(footprint_json(fp)))


def cmd_gen_labels(args) -> None:
    scene = _scene(args)
    mesh = scene.load_mesh()
    fp_path = args.out / "footprint.json"
    if fp_path.exists():
        fp = load_footprint(fp_path)
    else:
        fp = estimate_footprint(scene, mesh, out_dir=args.out)[0]
    records, frames = _load_dataset_frames(args.out)
    cams = scene.camera_map
    labels = generate_labels(fp, frames, cams, [r.frame_id for r in records])
    oracle = footprint_oracle_from_mesh(mesh)
    rows = []
    (args.out / "labels").mkdir(exist_ok=True)
    for rec, lab in zip(records, labels):
        k = cams[rec.camera_id].intrinsics
        gt = polygon_to_mask(project_footprint(oracle, rec.robot_pose, cams[rec.camera_id]),
                             k.width, k.height)
        rows.append([rec.frame_id, ccr(lab.footprint_mask, gt), mask_iou(lab.footprint_mask, gt)])
        write_pgm(args.out / "labels" / f"{rec.frame_id}.pgm", lab.footprint_mask)
    write_csv(args.out / "labels.csv", LABELS_HEADER, rows)
    print(f"{len(rows)} labels, mean CCR {np.mean([r[1] for r in rows]):.4f}")


def cmd_refine_poses(args) -> None:
    scene = _scene(args)
    mesh = scene.load_mesh()
    records, frames = _load_dataset_frames(args.out)
    mode = args.mode[0]
    err = args.errors[0]
    out = {}
    for ci, c in enumerate(scene.cameras):
        obs = [(f.mask, r.robot_pose) for r, f in zip(records, frames) if r.camera_id == c.id]
        init = perturb_pose(c.camera.pose, err / 100.0, 0.0, Xoshiro256.stream(args.seed, 0, ci))
        res = refine(init, mode, RefineConfig(), obs, mesh, c.camera.intrinsics,
                     known_height=c.height, true_pose=c.camera.pose)
        out[c.id] = {"mode": mode.value, "error_cm": err,
                     "R": res.refined.R.tolist(), "t": res.refined.t.tolist(),
                     "initial_loss": res.initial_loss, "final_loss": res.final_loss,
                     "iterations": res.iterations,
                     "pos_err_before_m": res.position_error_before,
                     "pos_err_after_m": res.position_error_after}
        print(f"{c.id}: {res.position_error_before:.4f} m -> {res.position_error_after:.4f} m")
    write_json(args.out / "refined_poses.json", out)


def cmd_ablate(args) -> None:
    scene = _scene(args)
    args.out.mkdir(parents=True, exist_ok=True)
    csv_path = args.out / "ablation.csv"
    run_ablation(scene, args.errors, args.mode, args.trials, args.spins, args.frames_per_spin,
                 args.seed, out_csv=csv_path)
    for p in emit_plots(csv_path, args.out):
        print(p)


def cmd_metrics(args) -> None:
    if args.pred.suffix.lower() == ".pgm":
        a, b = read_pgm_mask(args.pred), read_pgm_mask(args.gt)
        res = {"iou": mask_iou(a, b), "ccr": ccr(a, b)}
    else:
        a, b = read_ppm(args.pred), read_ppm(args.gt)
        res = {"psnr_db": psnr(a, b), "ssim": ssim(a, b)}
    if args.out is not None:
        write_json(args.out, res)
    print(json.dumps(res))


def _default_trajectory(scene: SceneSpec, cam_index: int) -> Trajectory:
    """Straight drive from the spin center toward the wall facing a camera."""
    c = scene.cameras[cam_index].camera.pose.center
    x0, y0 = scene.spin_center
    d = np.array([x0 - c[0], y0 - c[1]])
    d /= np.linalg.norm(d)
    reach = min(scene.floor_bounds[2] - 0.3, scene.floor_bounds[3] - 0.3)
    yaw = math.atan2(d[1], d[0])
    return Trajectory([RobotPose(x0 + s * d[0], y0 + s * d[1], yaw)
                       for s in np.linspace(0.0, reach, 11)])


def cmd_safety(args) -> None:
    scene = _scene(args)
    mesh = scene.load_mesh()
    fp, _ = estimate_footprint(scene, mesh)
    given = None
    if args.trajectory is not None:
        given = Trajectory([RobotPose(*p) for p in json.loads(args.trajectory.read_text())])
    out = {}
    for ci, c in enumerate(scene.cameras):
        traj = given or _default_trajectory(scene, ci)
        rep = check_trajectory(traj, fp, mesh, c.camera, scene.regions[c.id])
        out[c.id] = {"poses": [[p.x, p.y, p.yaw] for p in traj.poses],
                     "safe_bbox": rep.safe_bbox, "safe_footprint": rep.safe_footprint,
                     "out_of_view": rep.out_of_view,
                     "trajectory_safe_bbox": rep.trajectory_safe_bbox,
                     "trajectory_safe_footprint": rep.trajectory_safe_footprint}
        print(f"{c.id}: bbox-safe {rep.n_safe_bbox}/{len(traj.poses)}, "
              f"footprint-safe {rep.n_safe_footprint}/{len(traj.poses)}")
    args.out.mkdir(parents=True, exist_ok=True)
    write_json(args.out / "safety.json", out)


def cmd_area_gain(args) -> None:
    scene = _scene(args)
    mesh = scene.load_mesh()
    fp, _ = estimate_footprint(scene, mesh)
    rows = []
    for c in scene.cameras:
        r = area_gain(fp, mesh, c.camera, scene.regions[c.id], scene.floor_bounds,
                      args.grid_spacing, args.yaw_samples)
        rows.append([c.id, r.gain, r.footprint_count, r.bbox_count, r.in_view_count,
                     r.total_poses, len(r.dominance_violations)])
        print(f"{c.id}: gain {r.gain:.4f} ({r.footprint_count} vs {r.bbox_count})")
    args.out.mkdir(parents=True, exist_ok=True)
    write_csv(args.out / "area_gain.csv",
              ["camera_id", "gain", "footprint_safe", "bbox_safe", "in_view", "total",
               "dominance_violations"], rows)


def cmd_full_pipeline(args) -> None:
    cfg = ExperimentConfig(spins=args.spins, frames_per_spin=args.frames_per_spin, seed=args.seed)
    art = run_full_pipeline(_scene(args), cfg, args.out, args.grid_spacing, args.yaw_samples)
    for stage, key, value in art.summary:
        print(f"{stage}.{key} = {value}")


COMMANDS = {
    "gen-scene": cmd_gen_scene,
    "render-dataset": cmd_render_dataset,
    "estimate-footprint": cmd_estimate_footprint,
    "gen-labels": cmd_gen_labels,
    "refine-poses": cmd_refine_poses,
    "ablate": cmd_ablate,
    "metrics": cmd_metrics,
    "safety": cmd_safety,
    "area-gain": cmd_area_gain,
    "full-pipeline": cmd_full_pipeline,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"footprint-ibvs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.verb](args)
    except (FootprintError, LabelError, OSError, KeyError, ValueError) as exc:
        print(f"footprint-ibvs: {args.verb} failed: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
