"""Small tanh MLPs with hand-written backpropagation, and the squashed Gaussian policy."""

from __future__ import annotations

import math

import numpy as np

LOG_2PI = math.log(2 * math.pi)


class TrainingFault(RuntimeError):
    pass


def orthogonal(shape, gain: float, rng: np.random.Generator) -> np.ndarray:
    rows, cols = shape
    a = rng.normal(size=(max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


class MLP:
    """``in -> hidden -> hidden -> out`` with tanh hidden units and a linear head.

    Parameters live in ``self.params`` (name -> array) so optimizers and
    checkpoints can treat actor, critic and log-std uniformly.
    """

    def __init__(self, sizes=(5, 64, 64, 1), rng: np.random.Generator | None = None,
                 out_gain: float = 1.0, zero: bool = False):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.sizes = tuple(sizes)
        self.params: dict[str, np.ndarray] = {}
        n = len(sizes) - 1
        for k in range(n):
            gain = out_gain if k == n - 1 else math.sqrt(2.0)
            w = np.zeros((sizes[k], sizes[k + 1])) if zero else orthogonal((sizes[k], sizes[k + 1]), gain, rng)
            self.params[f"W{k}"] = w
            self.params[f"b{k}"] = np.zeros(sizes[k + 1])

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def forward(self, x: np.ndarray):
        """Returns the output and the activation cache for :meth:`backward`."""
        acts = [x]
        h = x
        for k in range(self.n_layers):
            z = h @ self.params[f"W{k}"] + self.params[f"b{k}"]
            h = np.tanh(z) if k < self.n_layers - 1 else z
            acts.append(h)
        return h, acts

    def backward(self, acts, dout: np.ndarray) -> dict[str, np.ndarray]:
        grads = {}
        g = dout
        for k in reversed(range(self.n_layers)):
            grads[f"W{k}"] = acts[k].T @ g
            grads[f"b{k}"] = g.sum(axis=0)
            if k > 0:
                g = (g @ self.params[f"W{k}"].T) * (1.0 - acts[k] ** 2)
        return grads

    def __call__(self, x):
        return self.forward(x)[0]


class ActorCritic:
    """Gaussian policy over one pre-squash action ``u`` with a state-independent log-std,
    plus a separate value network. The environment action is ``tanh(u)``."""

    def __init__(self, obs_dim: int = 5, hidden: int = 64, rng: np.random.Generator | None = None,
                 log_std_init: float = 0.0, zero: bool = False):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.actor = MLP((obs_dim, hidden, hidden, 1), rng, out_gain=0.01, zero=zero)
        self.critic = MLP((obs_dim, hidden, hidden, 1), rng, out_gain=1.0, zero=zero)
        self.log_std = np.array([log_std_init])

    # flat parameter view ------------------------------------------------
    def named_params(self) -> dict[str, np.ndarray]:
        out = {f"actor.{k}": v for k, v in self.actor.params.items()}
        out.update({f"critic.{k}": v for k, v in self.critic.params.items()})
        out["log_std"] = self.log_std
        return out

    def get_flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.named_params().values()])

    def set_flat(self, flat: np.ndarray) -> None:
        i = 0
        for v in self.named_params().values():
            v[...] = flat[i:i + v.size].reshape(v.shape)
            i += v.size

    def flatten_grads(self, grads: dict[str, np.ndarray]) -> np.ndarray:
        return np.concatenate([grads[k].ravel() for k in self.named_params()])

    # policy ---------------------------------------------------------------
    def mean(self, obs) -> np.ndarray:
        mu = self.actor(np.atleast_2d(obs))[:, 0]
        if not np.all(np.isfinite(mu)):
            raise TrainingFault("non-finite policy output")
        return mu

    def value(self, obs) -> np.ndarray:
        return self.critic(np.atleast_2d(obs))[:, 0]

    def sample(self, obs, rng: np.random.Generator):
        """Returns ``(u, log_prob(u), value)``; ``tanh(u)`` is the action."""
        mu = self.mean(obs)
        std = math.exp(self.log_std[0])
        u = mu + std * rng.normal(size=mu.shape)
        return u, gaussian_log_prob(u, mu, self.log_std[0]), self.value(obs)

    def act(self, obs) -> np.ndarray:
        """Deterministic action in [-1, 1]."""
        return np.tanh(self.mean(obs))


def gaussian_log_prob(u, mu, log_std) -> np.ndarray:
    return -0.5 * ((u - mu) / np.exp(log_std)) ** 2 - log_std - 0.5 * LOG_2PI


def squashed_log_prob(u, mu, log_std: float) -> np.ndarray:
    """log-density of ``a = tanh(u)``. The Jacobian term depends only on ``u``
    and cancels in probability ratios, so training works with the Gaussian part."""
    return gaussian_log_prob(u, mu, log_std) - np.log(1.0 - np.tanh(u) ** 2 + 1e-12)


def gaussian_entropy(log_std):
    return log_std + 0.5 * (LOG_2PI + 1.0)
