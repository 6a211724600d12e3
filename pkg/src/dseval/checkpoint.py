"""Named-parameter checkpoints: float32 arrays + a JSON metadata block.

The on-disk format is a numpy .npz archive. Every parameter array is stored
under ``param/<name>`` and the metadata (config echo, training metrics and a
shape annotation per parameter) under ``__meta__`` as a JSON string. Loading
verifies the annotated shapes against the stored arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import torch


class CheckpointError(RuntimeError):
    pass


@dataclass
class ModelCheckpoint:
    parameters: dict[str, np.ndarray]
    config: dict
    metrics: dict = field(default_factory=dict)

    def state_dict(self) -> dict[str, torch.Tensor]:
        return {k: torch.from_numpy(v.copy()) for k, v in self.parameters.items()}

    @classmethod
    def from_module(cls, module: torch.nn.Module, config: dict, metrics=None):
        params = {
            k: v.detach().cpu().numpy().astype(np.float32)
            for k, v in module.state_dict().items()
        }
        return cls(parameters=params, config=dict(config), metrics=dict(metrics or {}))


def save_checkpoint(ckpt: ModelCheckpoint, path) -> None:
    meta = {
        "config": ckpt.config,
        "metrics": ckpt.metrics,
        "shapes": {k: list(v.shape) for k, v in ckpt.parameters.items()},
    }
    arrays = {f"param/{k}": v.astype(np.float32) for k, v in ckpt.parameters.items()}
    arrays["__meta__"] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> ModelCheckpoint:
    with np.load(path, allow_pickle=False) as data:
        if "__meta__" not in data:
            raise CheckpointError(f"{path}: missing metadata block")
        meta = json.loads(str(data["__meta__"]))
        params = {}
        for key in data.files:
            if not key.startswith("param/"):
                continue
            name = key[len("param/"):]
            arr = data[key]
            annotated = meta["shapes"].get(name)
            if annotated is None or list(arr.shape) != annotated:
                raise CheckpointError(
                    f"{path}: shape annotation mismatch for {name!r}: "
                    f"stored {list(arr.shape)}, annotated {annotated}"
                )
            params[name] = arr
    if set(params) != set(meta["shapes"]):
        raise CheckpointError(f"{path}: parameter set does not match annotations")
    return ModelCheckpoint(parameters=params, config=meta["config"], metrics=meta["metrics"])
