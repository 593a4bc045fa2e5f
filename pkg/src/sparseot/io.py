"""Point-cloud CSV files and self-describing map artifacts."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from sparseot.costs import CostModel
from sparseot.exceptions import ArtifactError
from sparseot.maps import Direction, FittedMap
from sparseot.sinkhorn import DualPotentials, PointCloud

ARTIFACT_FORMAT = "sparseot-map"
ARTIFACT_VERSION = 1


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_points(path) -> np.ndarray:
    """Read a CSV with one point per row; a non-numeric first row is a header."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise OSError(f"cannot read point cloud {path}: {exc.strerror or exc}") from exc
    if rows and not all(_is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: rows have differing column counts {sorted(widths)}")
    try:
        pts = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{path}: non-finite coordinates")
    return pts


def write_points(path, points, prefix: str = "x") -> None:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    header = [f"{prefix}{i}" for i in range(points.shape[1])]
    write_rows(path, header, points.tolist())


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def cloud_digest(points) -> str:
    arr = np.ascontiguousarray(np.asarray(points, dtype="<f8"))
    h = hashlib.sha256()
    h.update(str(arr.shape).encode())
    h.update(arr.tobytes())
    return h.hexdigest()


def _checksum(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def map_to_payload(fmap: FittedMap, source: PointCloud) -> dict:
    pots = fmap.potentials
    target = fmap.target if fmap.direction is Direction.FORWARD else source
    src = source if fmap.direction is Direction.FORWARD else fmap.target
    return {
        "cost": fmap.cost.to_dict(),
        "direction": fmap.direction.value,
        "epsilon": pots.epsilon,
        "iterations": pots.iterations,
        "marginal_error": pots.marginal_error,
        "tolerance": pots.tolerance,
        "f": pots.f.tolist(),
        "g": pots.g.tolist(),
        "source_points": src.points.tolist(),
        "source_weights": src.weights.tolist(),
        "target_points": target.points.tolist(),
        "target_weights": target.weights.tolist(),
        "source_digest": cloud_digest(src.points),
        "target_digest": cloud_digest(target.points),
    }


def save_map(path, fmap: FittedMap, source: PointCloud) -> dict:
    """Write ``fmap`` (and the source cloud it was fitted from) as JSON."""
    payload = map_to_payload(fmap, source)
    doc = {
        "format": ARTIFACT_FORMAT,
        "version": ARTIFACT_VERSION,
        "checksum": _checksum(payload),
        "payload": payload,
    }
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1))
    return doc


def load_map(path, direction: str = None) -> FittedMap:
    """Read an artifact, verify its checksum and rebuild the map.

    ``direction`` overrides the stored direction (``"reverse"`` maps target
    points back onto the source cloud).
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read artifact {path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
        payload = doc["payload"]
        stored = doc["checksum"]
    except (ValueError, KeyError, TypeError) as exc:
        raise ArtifactError(f"{path}: malformed artifact ({exc})") from exc
    if doc.get("format") != ARTIFACT_FORMAT:
        raise ArtifactError(f"{path}: not a {ARTIFACT_FORMAT} artifact")
    if _checksum(payload) != stored:
        raise ArtifactError(f"{path}: checksum mismatch, artifact is corrupted")

    try:
        source = PointCloud(np.array(payload["source_points"]), np.array(payload["source_weights"]))
        target = PointCloud(np.array(payload["target_points"]), np.array(payload["target_weights"]))
        if cloud_digest(target.points) != payload["target_digest"]:
            raise ArtifactError(f"{path}: target cloud digest mismatch")
        pots = DualPotentials(
            f=np.array(payload["f"], dtype=float),
            g=np.array(payload["g"], dtype=float),
            epsilon=float(payload["epsilon"]),
            iterations=int(payload["iterations"]),
            marginal_error=float(payload["marginal_error"]),
            tolerance=float(payload["tolerance"]),
        )
        cost = CostModel.from_dict(payload["cost"])
        stored_dir = Direction(payload["direction"])
    except (KeyError, TypeError) as exc:
        raise ArtifactError(f"{path}: missing or invalid field ({exc})") from exc

    fmap = FittedMap(cost, target, pots, Direction.FORWARD)
    want = Direction(direction) if direction else stored_dir
    if want is Direction.REVERSE:
        fmap = fmap.reversed(source)
    return fmap
