"""Policy bundle: architecture, parameters, frozen normalizer and resolved configs in one file.

Stored as a NumPy ``.npz`` archive; the ``meta`` entry holds JSON metadata.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from racelab.learning.networks import ActorCritic
from racelab.learning.normalize import Normalizer

FORMAT_VERSION = 1


class BundleError(ValueError):
    pass


class PolicyBundle:
    def __init__(self, net: ActorCritic, normalizer: Normalizer, train_config: dict | None = None,
                 env_config: dict | None = None, extra: dict | None = None):
        self.net = net
        self.normalizer = normalizer
        self.train_config = dict(train_config or {})
        self.env_config = dict(env_config or {})
        self.extra = dict(extra or {})

    def act(self, obs) -> float:
        """Deterministic raw action in [-1, 1] for one observation."""
        o = self.normalizer.obs(obs, update=False)
        return float(self.net.act(o)[0])

    def act_batch(self, obs) -> np.ndarray:
        return self.net.act(self.normalizer.obs(np.atleast_2d(obs), update=False))

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        arrays = {f"p.{k}": v for k, v in self.net.named_params().items()}
        arrays.update({f"n.{k}": v for k, v in self.normalizer.state_dict().items()})
        meta = {
            "format": "racelab-policy", "version": FORMAT_VERSION,
            "architecture": {"obs_dim": self.net.actor.sizes[0], "hidden": self.net.actor.sizes[1],
                             "activation": "tanh", "policy": "gaussian-tanh"},
            "train_config": self.train_config, "env_config": self.env_config, "extra": self.extra,
        }
        arrays["meta"] = np.array(json.dumps(meta, default=_jsonable))
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)
        return path

    @classmethod
    def load(cls, path) -> "PolicyBundle":
        path = Path(path)
        if not path.exists():
            raise BundleError(f"policy bundle not found: {path}")
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.get("format") != "racelab-policy" or meta.get("version") != FORMAT_VERSION:
                raise BundleError(f"unsupported bundle format in {path}")
            arch = meta["architecture"]
            net = ActorCritic(arch["obs_dim"], arch["hidden"])
            params = net.named_params()
            for k in params:
                params[k][...] = z[f"p.{k}"]
            norm = Normalizer.from_state({k[2:]: z[k] for k in z.files if k.startswith("n.")})
        norm.frozen = True
        return cls(net, norm, meta["train_config"], meta["env_config"], meta.get("extra"))


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")
