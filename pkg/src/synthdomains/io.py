"""
Dataset file format

``dataset.jsonl``: a header record followed by one record per segment. Each
record names its split: ``train`` for source and target training segments,
``test`` for the held-out target split.
Feature arrays are either base-10 JSON numbers (``encoding: text``) or
base64-packed little-endian doubles (``encoding: binary``). Both round-trip
float64 values exactly.
"""
import base64
import binascii
import json
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np
import yaml
from pydantic import ValidationError

from config import DATASET_FILE, DATASET_FORMAT_VERSION
from errors import ConfigError
from synthdomains.quarantine import hidden_label
from synthdomains.schemas import Domain, DomainDataset, DomainSpec, Segment
from utils.logger import get_logger

logger = get_logger()

ENCODINGS = ("text", "binary")
FORMAT_NAME = "mmir-dataset"
TRAIN_SPLIT = "train"
TEST_SPLIT = "test"


def _encode(array: np.ndarray, encoding: str) -> Any:
    if encoding == "text":
        return [float(x) for x in array]
    return base64.b64encode(np.asarray(array, dtype="<f8").tobytes()).decode("ascii")


def _decode(value: Any, encoding: str) -> np.ndarray:
    if encoding == "text":
        return np.asarray(value, dtype=np.float64)
    return np.frombuffer(base64.b64decode(value), dtype="<f8").astype(np.float64)


def _segment_record(segment: Segment, encoding: str, split: str) -> Dict[str, Any]:
    source = segment.domain == Domain.SOURCE
    return {
        "id": segment.id,
        "domain": segment.domain.value,
        "split": split,
        "class_label": segment.class_label,
        # target ground truth, read back only through synthdomains.quarantine
        "eval_label": None if source else hidden_label(segment),
        "is_negative": segment.is_negative,
        "features": [_encode(f, encoding) for f in segment.features],
    }


def save_dataset(dataset: DomainDataset, out_dir: Union[str, Path], encoding: str = "text") -> Path:
    """
    Write ``dataset`` to ``out_dir/dataset.jsonl``
    
    Returns:
        Path of the written file
    """
    if encoding not in ENCODINGS:
        raise ConfigError(f"unknown feature encoding '{encoding}', expected one of {ENCODINGS}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / DATASET_FILE
    
    header = {
        "format": FORMAT_NAME,
        "version": DATASET_FORMAT_VERSION,
        "encoding": encoding,
        "spec": dataset.spec.model_dump(),
        "num_source": len(dataset.source),
        "num_target": len(dataset.target),
        "num_target_test": len(dataset.target_test),
    }
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(header) + "\n")
        for segment in dataset.source + dataset.target:
            f.write(json.dumps(_segment_record(segment, encoding, TRAIN_SPLIT)) + "\n")
        for segment in dataset.target_test:
            f.write(json.dumps(_segment_record(segment, encoding, TEST_SPLIT)) + "\n")
    
    logger.info(f"Dataset written: {path} ({encoding} encoding)")
    return path


def _parse_segment(line: str, encoding: str) -> Tuple[Segment, str]:
    record = json.loads(line)
    domain = Domain(record["domain"])
    split = record["split"]
    if split not in (TRAIN_SPLIT, TEST_SPLIT) or (split == TEST_SPLIT and domain == Domain.SOURCE):
        raise ValueError(f"bad split '{split}' for a {domain.value} segment")
    label = record["class_label"] if domain == Domain.SOURCE else record["eval_label"]
    segment = Segment(
        id=int(record["id"]),
        features=tuple(_decode(f, encoding) for f in record["features"]),
        domain=domain,
        is_negative=bool(record["is_negative"]),
        _label=int(label),
    )
    return segment, split


def load_dataset(path: Union[str, Path]) -> DomainDataset:
    """
    Read a dataset written by ``save_dataset``
    
    Args:
        path: The ``dataset.jsonl`` file or the directory holding it
        
    Raises:
        ConfigError: missing, truncated or malformed file
    """
    path = Path(path)
    if path.is_dir():
        path = path / DATASET_FILE
    if not path.exists():
        raise ConfigError(f"dataset file not found: {path}")
    
    with open(path, "r", encoding="utf-8") as f:
        lines = [line for line in f if line.strip()]
    if not lines:
        raise ConfigError(f"dataset file is empty: {path}")
    
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed dataset header in {path}: {e}") from e
    if not isinstance(header, dict):
        raise ConfigError(f"malformed dataset header in {path}")
    if header.get("format") != FORMAT_NAME or header.get("version") != DATASET_FORMAT_VERSION:
        raise ConfigError(f"unsupported dataset header in {path}: {header.get('format')} v{header.get('version')}")
    encoding = header.get("encoding")
    if encoding not in ENCODINGS:
        raise ConfigError(f"unknown feature encoding '{encoding}' in {path}")
    try:
        spec = DomainSpec.model_validate(header["spec"])
    except KeyError as e:
        raise ConfigError(f"dataset header in {path} has no spec") from e
    except ValidationError as e:
        raise ConfigError(f"invalid spec in dataset header: {e}") from e
    
    source: List[Segment] = []
    target: List[Segment] = []
    target_test: List[Segment] = []
    for number, line in enumerate(lines[1:], start=2):
        try:
            segment, split = _parse_segment(line, encoding)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, binascii.Error) as e:
            raise ConfigError(f"malformed segment record at {path}:{number}: {e!r}") from e
        if segment.domain == Domain.SOURCE:
            source.append(segment)
        else:
            (target if split == TRAIN_SPLIT else target_test).append(segment)
    
    expected = (header.get("num_source"), header.get("num_target"), header.get("num_target_test"))
    if (len(source), len(target), len(target_test)) != expected:
        raise ConfigError(f"dataset {path} is truncated")
    logger.debug(f"Dataset loaded: {path}")
    return DomainDataset(spec=spec, source=source, target=target, target_test=target_test)


def load_spec(path: Union[str, Path]) -> DomainSpec:
    """
    Read a DomainSpec from a YAML or JSON mapping
    
    Raises:
        ConfigError: missing file, unparsable text, or a mapping DomainSpec
            rejects (unknown keys included)
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"spec file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold key-value pairs")
    try:
        return DomainSpec.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid domain spec in {path}: {e}") from e
