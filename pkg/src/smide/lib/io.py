"""Reading and writing run artifacts: trajectory CSVs and JSON records."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import pandas as pd
from pydantic import BaseModel

from smide.lib.models import CheckReport, Trajectory

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def write_trajectory(traj: Trajectory, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    traj.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f'wrote {path}')
    return path


def read_trajectory(path: Path) -> Trajectory:
    return Trajectory.from_frame(pd.read_csv(path))


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f'wrote {path}')
    return path


def write_model(model: BaseModel, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.model_dump_json(indent=2))
    logger.info(f'wrote {path}')
    return path


def write_json(data: dict, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True))
    return path


def read_json(path: Path) -> dict:
    return json.loads(Path(path).read_text())


def write_report(report: CheckReport, directory: Path) -> tuple[Path, Path]:
    """report.txt (human-readable) and report.json (machine record)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    text = directory / 'report.txt'
    text.write_text(report.to_text())
    record = write_model(report, directory / 'report.json')
    return text, record
