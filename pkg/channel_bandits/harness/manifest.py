import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Optional

from channel_bandits import __version__

logger = logging.getLogger(__name__)

MANIFEST_FILE_NAME = 'manifest.json'


@dataclass
class ExperimentManifest:
    """
    Provenance for one harness command, written next to its CSVs.

    Timing and host fields change between executions, so the manifest sits outside the
    byte-identical CSV contract.
    """

    command: str
    master_seed: Optional[int]
    workers: int
    config: Optional[dict] = None
    # label -> stream ordinal
    policies: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    host: dict = field(default_factory=dict)
    wall_clock_seconds: Optional[float] = None
    version: str = field(init=False)
    date: datetime = field(init=False)

    def __post_init__(self):
        self.version = __version__
        self.date = datetime.now(timezone.utc)

    @staticmethod
    def _serialize_manifest(value):
        if isinstance(value, datetime):
            return value.isoformat()
        elif isinstance(value, Enum):
            return value.value
        else:
            return str(value)

    def get_unique_key(self) -> str:
        return f'{self.command}_{self.master_seed}_{self.date.strftime("%Y%m%dT%H:%M:%S")}'

    def to_json_str(self) -> str:
        return json.dumps(self.__dict__, indent=2, default=self._serialize_manifest)

    def to_local_file(self, outdir: str, file_name: str = MANIFEST_FILE_NAME) -> str:
        path = os.path.join(outdir, file_name)
        logger.debug(f'Writing manifest {self.get_unique_key()} to {path}')
        with open(path, 'w') as f:
            f.write(self.to_json_str())
            f.write('\n')
        return path
