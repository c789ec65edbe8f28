"""
Versioned checkpoints: parameters, optimizer state and a JSON meta record
"""
import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from config import CHECKPOINT_FORMAT_VERSION
from diffcore import Adam
from errors import CheckpointError, InputError
from modelcore.model import TwoStreamModel
from utils.logger import get_logger

logger = get_logger()

META_KEY = "__meta__"


def save_checkpoint(
    path: Union[str, Path],
    model: TwoStreamModel,
    optimizers: Optional[Dict[str, Adam]] = None,
    config_hash: str = "",
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Write model parameters and optimizer state to an .npz file
    
    Args:
        path: Destination (``.npz`` is appended by numpy if missing)
        model: Model whose parameters are stored
        optimizers: Named optimizers whose moments are stored
        config_hash: Hash of the training config that produced the state
        extra: Additional JSON-serializable meta fields (stage, step)
    """
    path = Path(path)
    if path.suffix != ".npz":
        path = path.with_suffix(".npz")
    path.parent.mkdir(parents=True, exist_ok=True)
    
    arrays: Dict[str, np.ndarray] = {}
    for name, value in model.state_dict().items():
        arrays[f"param.{name}"] = value
    for opt_name, optimizer in (optimizers or {}).items():
        for key, value in optimizer.state_dict().items():
            arrays[f"optim.{opt_name}.{key}"] = value
    meta = {"format_version": CHECKPOINT_FORMAT_VERSION, "config_hash": config_hash, **(extra or {})}
    arrays[META_KEY] = np.array(json.dumps(meta, sort_keys=True))
    
    np.savez(path, **arrays)
    logger.info(f"Checkpoint written: {path}")
    return path


def load_checkpoint(
    path: Union[str, Path],
    model: TwoStreamModel,
    optimizers: Optional[Dict[str, Adam]] = None,
    expected_hash: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Restore a checkpoint into ``model`` (and ``optimizers``)
    
    Returns:
        The meta record
        
    Raises:
        CheckpointError: missing file, unknown version or config hash mismatch
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    
    with np.load(path, allow_pickle=False) as archive:
        arrays = {key: archive[key] for key in archive.files}
    if META_KEY not in arrays:
        raise CheckpointError(f"{path} has no meta record")
    meta = json.loads(str(arrays.pop(META_KEY)))
    if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {meta.get('format_version')}")
    if expected_hash is not None and meta.get("config_hash") != expected_hash:
        raise CheckpointError("checkpoint was written for a different config")
    
    params = {key[len("param."):]: value for key, value in arrays.items() if key.startswith("param.")}
    try:
        model.load_state_dict(params)
    except InputError as e:
        raise CheckpointError(f"checkpoint does not fit the model: {e}") from e
    
    for opt_name, optimizer in (optimizers or {}).items():
        prefix = f"optim.{opt_name}."
        state = {key[len(prefix):]: value for key, value in arrays.items() if key.startswith(prefix)}
        if not state:
            raise CheckpointError(f"checkpoint has no state for optimizer '{opt_name}'")
        optimizer.load_state_dict(state)
    
    logger.debug(f"Checkpoint loaded: {path}")
    return meta
