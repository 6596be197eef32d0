"""
Output directory writer for fields, reports, tables and episode logs.
"""
import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from lattice.field_io import write_field_csv, write_pgm, write_points_csv
from lattice.fields import ScalarField
from models.schema import RunConfig

logger = logging.getLogger(__name__)


def _jsonable(value: Any) -> Any:
    """numpy scalars and arrays to plain Python for json."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


class ArtifactStore:
    """Writes one run's artifacts under an output directory.

    Reports embed the resolved run config under "config". Nothing
    time-dependent is written, so reruns produce identical files.
    """

    def __init__(self, output_dir: Union[str, Path], config: Optional[RunConfig] = None,
                 command: str = ''):
        """
        Initialize the store.

        Args:
            output_dir: Directory for every artifact (created on enter).
            config: Resolved run configuration embedded in reports.
            command: Subcommand name recorded in reports.
        """
        self.output_dir = Path(output_dir)
        self.config = config
        self.command = command
        self.written: List[Path] = []

    def __enter__(self) -> 'ArtifactStore':
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if exc_type is None:
            logger.info(f"{self.command or 'run'}: wrote {len(self.written)} artifact(s) to {self.output_dir}")
        else:
            logger.warning(f"{self.command or 'run'} aborted after {len(self.written)} artifact(s)")
        return False

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def _record(self, path: Path) -> Path:
        self.written.append(path)
        logger.debug(f"artifact: {path}")
        return path

    def write_field(self, name: str, field: ScalarField, pgm: bool = True) -> List[Path]:
        """`<name>.csv`, plus `<name>.pgm` for 2D fields when `pgm` is set."""
        paths = [self._record(write_field_csv(field, self.path(f"{name}.csv")))]
        if pgm and field.grid.dim == 2:
            paths.append(self._record(write_pgm(field, self.path(f"{name}.pgm"))))
        return paths

    def write_points(self, name: str, points: np.ndarray, dim: int) -> Path:
        return self._record(write_points_csv(points, self.path(f"{name}.csv"), dim))

    def write_report(self, name: str, payload: Dict[str, Any]) -> Path:
        """JSON report with sorted keys and the run config under "config"."""
        document = dict(_jsonable(payload))
        document['command'] = self.command
        if self.config is not None:
            document['config'] = self.config.model_dump(mode='json')
        text = json.dumps(document, sort_keys=True, indent=2, allow_nan=False)
        path = self.path(name)
        path.write_text(text + '\n', encoding='utf-8')
        return self._record(path)

    def write_jsonl(self, name: str, records: Iterable[Dict[str, Any]]) -> Path:
        """One compact JSON object per line."""
        path = self.path(name)
        count = 0
        with open(path, 'w', encoding='utf-8', newline='\n') as handle:
            for record in records:
                handle.write(json.dumps(_jsonable(record), sort_keys=True, allow_nan=False) + '\n')
                count += 1
        logger.info(f"logged {count} record(s) to {path}")
        return self._record(path)

    def write_table(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        """CSV table; floats use repr so they survive a round trip."""
        path = self.path(name)
        with open(path, 'w', encoding='utf-8', newline='') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow(['' if v is None else repr(float(v)) if isinstance(v, (float, np.floating))
                                 else v for v in row])
        return self._record(path)
