"""Dataset generation, the pose-error ablation and the end-to-end pipeline."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import PipelineError, SchemaError, FootprintError
from .footprint import (Footprint, FootprintSource, footprint_from_overhead,
                        LabelError, footprint_oracle_from_mesh, generate_labels,
                         polygon_to_mask,
                        project_footprint, synth_overhead_camera)
from .geometry import Camera, Frame, Polygon2D, polygon_area
from .io import read_csv, read_json, write_csv, write_json, write_pgm, write_ppm
from .mesh import RobotPose, TriMesh
from .metrics import ccr, mask_iou, psnr, ssim
from .pose_opt import Mode, RefineConfig, perturb_pose, refine
from .render import RenderedFrame, render_robot, robot_silhouette
from .rng import Xoshiro256
from .safety import area_gain
from .scene import SceneSpec

log = logging.getLogger(__name__)

# stream indices reserved for non-trial draws
STREAM_SPINS = 1 << 40
STREAM_SPLIT = (1 << 40) + 1

ABLATION_HEADER = ["mode", "error_cm", "trial", "psnr_db", "ssim",
                   "pos_err_before_m", "pos_err_after_m"]
LABELS_HEADER = ["frame_id", "ccr", "iou"]
SUMMARY_HEADER = ["stage", "key", "value"]


@dataclass(frozen=True)
class ExperimentConfig:
    spins: int = 2
    frames_per_spin: int = 50
    error_cm: float = 0.0
    mode: Mode = Mode.PLANE
    seed: int = 7
    trials: int = 20

    def __post_init__(self):
        if self.spins < 0 or self.frames_per_spin < 0 or self.trials < 0:
            raise ValueError("counts must be non-negative")
        if self.error_cm < 0:
            raise ValueError("error_cm must be non-negative")


@dataclass(frozen=True)
class FrameRecord:
    frame_id: str
    camera_id: str
    spin: int
    index: int
    robot_pose: RobotPose


@dataclass
class Dataset:
    records: List[FrameRecord]
    frames: List[RenderedFrame] = field(default_factory=list)
    out_dir: Optional[Path] = None


# --------------------------------------------------------------------------
# robot pose sampling

def _fully_visible(mesh: TriMesh, pose: RobotPose, scene: SceneSpec) -> bool:
    for c in scene.cameras:
        m = robot_silhouette(mesh, pose, c.camera)
        if not m.any() or m[0].any() or m[-1].any() or m[:, 0].any() or m[:, -1].any():
            return False
    return True


def spin_centers(scene: SceneSpec, mesh: TriMesh, spins: int, seed: int,
                 max_attempts: int = 1000) -> List[Tuple[float, float]]:
    """First spin at the scene's spin center, the rest sampled around it.

    Candidates are drawn uniformly from the square of half-size
    ``scene.spin_half_extent`` and kept only if the robot stays fully inside
    every camera image at several headings.
    """
    cx, cy = scene.spin_center
    centers = [(cx, cy)] if spins > 0 else []
    rng = Xoshiro256.stream(seed, STREAM_SPINS)
    e = scene.spin_half_extent
    headings = [k * math.pi / 4 for k in range(4)]
    attempts = 0
    while len(centers) < spins:
        attempts += 1
        if attempts > max_attempts:
            raise PipelineError("dataset", "could not place spin centers in view")
        c = (cx + rng.uniform(-e, e), cy + rng.uniform(-e, e))
        if all(_fully_visible(mesh, RobotPose(c[0], c[1], a), scene) for a in headings):
            centers.append(c)
    return centers


def robot_poses(scene: SceneSpec, mesh: TriMesh, spins: int, frames_per_spin: int,
                seed: int) -> List[Tuple[int, int, RobotPose]]:
    """``(spin, k, pose)`` with yaw ``2 pi k / frames_per_spin`` in each spin."""
    out = []
    for s, (x, y) in enumerate(spin_centers(scene, mesh, spins, seed)):
        for k in range(frames_per_spin):
            out.append((s, k, RobotPose(x, y, 2.0 * math.pi * k / frames_per_spin)))
    return out


def frame_id(spin: int, k: int, camera_id: str) -> str:
    return f"s{spin:02d}_k{k:03d}_{camera_id}"


# --------------------------------------------------------------------------
# dataset

def render_dataset(scene: SceneSpec, spins: int, frames_per_spin: int, seed: int,
                   out_dir: Optional[Path] = None, mesh: Optional[TriMesh] = None) -> Dataset:
    """Render every robot pose through every camera.

    With ``out_dir`` the frames go to ``frames/*.ppm``, masks to
    ``masks/*.pgm`` and the robot poses to ``poses.json``.
    """
    if spins <= 0 or frames_per_spin <= 0:
        raise PipelineError("dataset", "spins and frames_per_spin must be positive")
    mesh = mesh if mesh is not None else scene.load_mesh()
    records, frames = [], []
    for s, k, pose in robot_poses(scene, mesh, spins, frames_per_spin, seed):
        for c in scene.cameras:
            fid = frame_id(s, k, c.id)
            records.append(FrameRecord(fid, c.id, s, k, pose))
            frames.append(render_robot(mesh, pose, c.camera, c.id))
    if out_dir is not None:
        out_dir = Path(out_dir)
        try:
            (out_dir / "frames").mkdir(parents=True, exist_ok=True)
            (out_dir / "masks").mkdir(parents=True, exist_ok=True)
            for rec, fr in zip(records, frames):
                write_ppm(out_dir / "frames" / f"{rec.frame_id}.ppm", fr.image)
                write_pgm(out_dir / "masks" / f"{rec.frame_id}.pgm", fr.mask)
            write_json(out_dir / "poses.json", {
                r.frame_id: {"camera_id": r.camera_id, "spin": r.spin, "index": r.index,
                             "x": r.robot_pose.x, "y": r.robot_pose.y, "yaw": r.robot_pose.yaw}
                for r in records})
        except OSError as exc:
            raise PipelineError("dataset", str(exc)) from exc
    return Dataset(records, frames, out_dir)


def load_poses(path: Path) -> List[FrameRecord]:
    d = read_json(path)
    return [FrameRecord(fid, v["camera_id"], int(v["spin"]), int(v["index"]),
                        RobotPose(v["x"], v["y"], v["yaw"])) for fid, v in d.items()]


def rerender(scene: SceneSpec, records: Sequence[FrameRecord],
             mesh: Optional[TriMesh] = None) -> List[RenderedFrame]:
    mesh = mesh if mesh is not None else scene.load_mesh()
    cams = scene.camera_map
    return [render_robot(mesh, r.robot_pose, cams[r.camera_id], r.camera_id) for r in records]


# --------------------------------------------------------------------------
# ablation

@dataclass
class TrialRecord:
    mode: Mode
    error_cm: float
    trial: int
    psnr_db: float
    ssim: float
    pos_err_before_m: float
    pos_err_after_m: float
    initial_loss: float
    final_loss: float


@dataclass
class AblationResult:
    trials: List[TrialRecord]

    def cell(self, mode: Mode, error_cm: float) -> List[TrialRecord]:
        return [t for t in self.trials if t.mode is Mode(mode) and t.error_cm == error_cm]

    def mean(self, mode: Mode, error_cm: float, attr: str) -> float:
        return float(np.mean([getattr(t, attr) for t in self.cell(mode, error_cm)]))

    def rows(self) -> List[list]:
        rows = [[t.mode.value, t.error_cm, t.trial, t.psnr_db, t.ssim,
                 t.pos_err_before_m, t.pos_err_after_m] for t in self.trials]
        cells = []
        for t in self.trials:
            if (t.mode, t.error_cm) not in cells:
                cells.append((t.mode, t.error_cm))
        for mode, err in cells:
            rows.append([mode.value, err, "mean"] + [
                self.mean(mode, err, a) for a in ABLATION_HEADER[3:]])
        return rows


def holdout_split(n: int, seed: int, fraction: float = 0.2) -> Tuple[List[int], List[int]]:
    """Seeded ``(train, eval)`` index split holding out ``fraction``."""
    n_eval = max(1, int(round(fraction * n))) if n > 1 else 0
    perm = Xoshiro256.stream(seed, STREAM_SPLIT, n).permutation(n)
    ev = sorted(perm[:n_eval])
    tr = sorted(perm[n_eval:])
    return tr, ev


def run_ablation(scene: SceneSpec, errors_cm: Sequence[float], modes: Sequence[Mode],
                 trials: int, spins: int = 3, frames_per_spin: int = 10, seed: int = 7,
                 resolution: Optional[int] = 128, refine_cfg: RefineConfig = RefineConfig(),
                 rot_error_rad: float = 0.0, mesh: Optional[TriMesh] = None,
                 camera_ids: Optional[Sequence[str]] = None,
                 out_csv: Optional[Path] = None) -> AblationResult:
    """Perturb, refine and re-render every camera for each grid cell.

    Each trial row averages over cameras. Perturbation streams depend only
    on (seed, trial, camera), so every cell sees the same noise directions.
    """
    mesh = mesh if mesh is not None else scene.load_mesh()
    poses = [p for _, _, p in robot_poses(scene, mesh, spins, frames_per_spin, seed)]
    if not poses:
        raise PipelineError("ablation", "no robot poses")
    train_idx, eval_idx = holdout_split(len(poses), seed)
    cams = [c for c in scene.cameras if camera_ids is None or c.id in camera_ids]

    prepared = []
    for ci, c in enumerate(scene.cameras):
        if c not in cams:
            continue
        intr = c.camera.intrinsics
        if resolution is not None:
            intr = intr.scaled(resolution, resolution)
        cam = Camera(intr, c.camera.pose)
        train = [(robot_silhouette(mesh, poses[i], cam), poses[i]) for i in train_idx]
        gt = [render_robot(mesh, poses[i], cam).image for i in eval_idx]
        prepared.append((ci, c, cam, train, gt))

    out: List[TrialRecord] = []
    for err in errors_cm:
        for mode in modes:
            mode = Mode(mode)
            for trial in range(trials):
                vals = []
                for ci, c, cam, train, gt in prepared:
                    rng = Xoshiro256.stream(seed, trial, ci)
                    init = perturb_pose(cam.pose, err / 100.0, rot_error_rad, rng)
                    try:
                        res = refine(init, mode, refine_cfg, train, mesh, cam.intrinsics,
                                     known_height=c.height, true_pose=cam.pose)
                    except FootprintError as exc:
                        raise PipelineError("ablation", f"{mode.value} {err} cm trial {trial} "
                                                        f"{c.id}: {exc}") from exc
                    rcam = cam.with_pose(res.refined)
                    ims = [render_robot(mesh, poses[i], rcam).image for i in eval_idx]
                    p = np.mean([psnr(a, b) for a, b in zip(ims, gt)]) if gt else math.nan
                    s = np.mean([ssim(a, b) for a, b in zip(ims, gt)]) if gt else math.nan
                    vals.append((p, s, res.position_error_before, res.position_error_after,
                                 res.initial_loss, res.final_loss))
                v = np.mean(np.array(vals, dtype=np.float64), axis=0)
                out.append(TrialRecord(mode, float(err), trial, *map(float, v)))
                log.debug("ablation %s %.1f cm trial %d: %.4f -> %.4f m", mode.value, err,
                          trial, v[2], v[3])
    result = AblationResult(out)
    if out_csv is not None:
        write_csv(out_csv, ABLATION_HEADER, result.rows())
    return result


# --------------------------------------------------------------------------
# plots

def _ablation_means(csv_path: Path) -> Dict[str, List[Tuple[float, float, float]]]:
    try:
        rows = read_csv(csv_path)
    except OSError as exc:
        raise SchemaError(str(exc)) from exc
    if not rows or set(ABLATION_HEADER) - set(rows[0].keys()):
        raise SchemaError(f"{csv_path}: expected columns {','.join(ABLATION_HEADER)}")
    means = [r for r in rows if r["trial"] == "mean"]
    if not means:
        acc: Dict[Tuple[str, float], List[dict]] = {}
        for r in rows:
            acc.setdefault((r["mode"], float(r["error_cm"])), []).append(r)
        means = [{"mode": m, "error_cm": e,
                  "psnr_db": np.mean([float(r["psnr_db"]) for r in rs]),
                  "pos_err_after_m": np.mean([float(r["pos_err_after_m"]) for r in rs])}
                 for (m, e), rs in acc.items()]
    series: Dict[str, List[Tuple[float, float, float]]] = {}
    for r in means:
        series.setdefault(r["mode"], []).append(
            (float(r["error_cm"]), float(r["psnr_db"]), float(r["pos_err_after_m"])))
    return {m: sorted(v) for m, v in series.items()}


def emit_plots(csv_path: Path, out_dir: Path) -> List[Path]:
    """Metric-vs-error line charts, one series per mode, as SVG."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series = _ablation_means(Path(csv_path))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for col, name, ylabel in [(1, "psnr.svg", "PSNR (dB)"),
                              (2, "position_error.svg", "final position error (m)")]:
        with plt.rc_context({"svg.hashsalt": "footprint-ibvs", "svg.fonttype": "none"}):
            fig, ax = plt.subplots(figsize=(5, 3.5))
            for mode, pts in sorted(series.items()):
                ax.plot([p[0] for p in pts], [p[col] for p in pts], marker="o", label=mode)
            ax.set_xlabel("camera position error (cm)")
            ax.set_ylabel(ylabel)
            ax.legend()
            fig.tight_layout()
            path = out_dir / name
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
        paths.append(path)
    return paths


# --------------------------------------------------------------------------
# full pipeline

@dataclass
class PipelineArtifacts:
    out_dir: Path
    footprint: Footprint
    oracle: Footprint
    ccr: List[float]
    iou: List[float]
    empty_labels: int
    area_gains: Dict[str, float]
    summary: List[Tuple[str, str, object]]


def footprint_json(fp: Footprint) -> dict:
    return {"source": fp.source.value, "frame": fp.polygon.frame.value,
            "vertices": fp.polygon.vertices.tolist()}


def load_footprint(path: Path) -> Footprint:
    d = read_json(path)
    return Footprint(Polygon2D(d["vertices"], Frame(d.get("frame", "WORLD_METERS"))),
                     FootprintSource(d["source"]))


def estimate_footprint(scene: SceneSpec, mesh: TriMesh, pose: Optional[RobotPose] = None,
                       out_dir: Optional[Path] = None) -> Tuple[Footprint, RenderedFrame]:
    """Overhead render at ``pose`` (default: spin center) and ray-cast footprint."""
    if pose is None:
        pose = RobotPose(scene.spin_center[0], scene.spin_center[1], 0.0)
    cam = synth_overhead_camera((pose.x, pose.y), robot_height=mesh.height)
    frame = render_robot(mesh, pose, cam, "overhead")
    fp = footprint_from_overhead(frame, cam, scene.ground)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_ppm(out_dir / "overhead.ppm", frame.image)
        write_pgm(out_dir / "overhead_mask.pgm", frame.mask)
        write_json(out_dir / "footprint.json", footprint_json(fp))
    return fp, frame


def overhead_oracle_iou(fp: Footprint, oracle: Footprint, resolution: int = 512,
                        half_extent: float = 0.512) -> float:
    """IoU of two body-frame footprints rasterised in a fresh overhead view."""
    cam = synth_overhead_camera((0.0, 0.0), resolution=resolution, half_extent=half_extent)
    origin = RobotPose(0.0, 0.0, 0.0)
    a = polygon_to_mask(project_footprint(fp, origin, cam), resolution, resolution)
    b = polygon_to_mask(project_footprint(oracle, origin, cam), resolution, resolution)
    return mask_iou(a, b)


def run_full_pipeline(scene: SceneSpec, cfg: ExperimentConfig, out_dir: Path,
                      grid_spacing: float = 0.05, yaw_samples: int = 8,
                      write_label_masks: bool = True) -> PipelineArtifacts:
    """Dataset, footprint, labels, label evaluation and safety gain.

    Everything lands in ``out_dir``; ``summary.csv`` collects the headline
    numbers as ``stage,key,value`` rows.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mesh = scene.load_mesh()
    summary: List[Tuple[str, str, object]] = []

    data = render_dataset(scene, cfg.spins, cfg.frames_per_spin, cfg.seed,
                          out_dir / "dataset", mesh)
    summary.append(("dataset", "frames", len(data.records)))
    summary.append(("dataset", "cameras", len(scene.cameras)))

    try:
        fp, _ = estimate_footprint(scene, mesh, data.records[0].robot_pose, out_dir / "footprint")
    except FootprintError as exc:
        raise PipelineError("footprint", str(exc)) from exc
    oracle = footprint_oracle_from_mesh(mesh)
    summary += [("footprint", "vertices", len(fp.polygon)),
                ("footprint", "area_m2", polygon_area(fp.polygon)),
                ("footprint", "oracle_area_m2", polygon_area(oracle.polygon)),
                ("footprint", "oracle_iou", overhead_oracle_iou(fp, oracle))]

    cams = scene.camera_map
    ids = [r.frame_id for r in data.records]
    try:
        labels = generate_labels(fp, data.frames, cams, ids)
    except LabelError as exc:
        raise PipelineError("labels", str(exc)) from exc

    ccrs, ious, rows, empty = [], [], [], 0
    label_json = {}
    if write_label_masks:
        (out_dir / "labels").mkdir(exist_ok=True)
    for rec, lab in zip(data.records, labels):
        cam = cams[rec.camera_id]
        k = cam.intrinsics
        gt = polygon_to_mask(project_footprint(oracle, rec.robot_pose, cam), k.width, k.height)
        if not lab.footprint_mask.any():
            empty += 1
        c, i = ccr(lab.footprint_mask, gt), mask_iou(lab.footprint_mask, gt)
        ccrs.append(c)
        ious.append(i)
        rows.append([rec.frame_id, c, i])
        label_json[rec.frame_id] = {
            "footprint": lab.footprint_poly.vertices.tolist(),
            "bbox": [lab.bbox.min_u, lab.bbox.min_v, lab.bbox.max_u, lab.bbox.max_v]}
        if write_label_masks:
            write_pgm(out_dir / "labels" / f"{rec.frame_id}.pgm", lab.footprint_mask)
    write_csv(out_dir / "labels.csv", LABELS_HEADER, rows)
    write_json(out_dir / "labels.json", label_json)
    summary += [("labels", "count", len(labels)),
                ("labels", "empty_masks", empty),
                ("labels", "mean_ccr", float(np.mean(ccrs))),
                ("labels", "mean_iou", float(np.mean(ious)))]

    gains = {}
    for c in scene.cameras:
        res = area_gain(fp, mesh, c.camera, scene.regions[c.id], scene.floor_bounds,
                        grid_spacing, yaw_samples)
        gains[c.id] = res.gain
        summary += [("safety", f"{c.id}_bbox_safe", res.bbox_count),
                    ("safety", f"{c.id}_footprint_safe", res.footprint_count),
                    ("safety", f"{c.id}_area_gain", res.gain),
                    ("safety", f"{c.id}_premise_violations", len(res.premise_violations)),
                    ("safety", f"{c.id}_dominance_violations", len(res.dominance_violations))]
    write_csv(out_dir / "summary.csv", SUMMARY_HEADER, summary)
    return PipelineArtifacts(out_dir, fp, oracle, ccrs, ious, empty, gains, summary)
