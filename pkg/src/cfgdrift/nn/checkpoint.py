"""JSON checkpoints: layer path -> shape + values."""
import json

import numpy as np

FORMAT_VERSION = 1


def state_to_json(state, meta=None):
    layers = {
        name: {"shape": list(np.shape(arr)), "values": np.asarray(arr, dtype=np.float64).ravel().tolist()}
        for name, arr in sorted(state.items())
    }
    return json.dumps({"version": FORMAT_VERSION, "meta": meta or {}, "layers": layers})


def state_from_json(text):
    obj = json.loads(text)
    if obj.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {obj.get('version')!r}")
    state = {
        name: np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in obj["layers"].items()
    }
    return state, obj.get("meta", {})


def save_state(path, state, meta=None):
    with open(path, "w") as fh:
        fh.write(state_to_json(state, meta))


def load_state(path):
    with open(path) as fh:
        return state_from_json(fh.read())
