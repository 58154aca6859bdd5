"""Clipped-surrogate policy optimization with GAE, written against plain NumPy."""

from __future__ import annotations

import copy
import logging
from dataclasses import asdict, dataclass

import numpy as np

from racelab.learning.networks import ActorCritic, gaussian_entropy, gaussian_log_prob

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PpoConfig:
    n_steps: int = 10000
    batch: int = 256
    epochs: int = 5
    gamma: float = 0.99
    lam: float = 0.98
    clip: float = 0.2
    target_kl: float | None = 0.015
    c_s: float = 0.02
    c_v: float = 0.6
    lr0: float = 2.3927e-4
    total_steps: int = 800_000
    max_grad_norm: float = 0.5
    eval_every: int = 10_000
    eval_episodes: int = 1
    adam_eps: float = 1e-5
    log_std_init: float = 0.0

    def __post_init__(self):
        positive = (self.n_steps, self.batch, self.epochs, self.lr0, self.total_steps,
                    self.max_grad_norm, self.eval_every, self.clip)
        if min(positive) <= 0:
            raise ValueError("PPO sizes and rates must be positive")
        if not (0 < self.gamma <= 1 and 0 < self.lam <= 1):
            raise ValueError("gamma and lambda must lie in (0, 1]")
        if self.c_s < 0 or self.c_v < 0:
            raise ValueError("loss coefficients must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def learning_rate(cfg: PpoConfig, f: float) -> float:
    """Linear decay: ``lr0 * f`` with ``f`` the remaining-progress fraction."""
    return cfg.lr0 * f


def compute_gae(rewards, values, dones, last_value: float, gamma: float, lam: float):
    """Advantages and return targets. ``dones[t]`` marks that step t ended an episode."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    notdone = 1.0 - np.asarray(dones, dtype=np.float64)
    n = len(rewards)
    adv = np.zeros(n)
    nxt_v = np.append(values[1:], last_value)
    acc = 0.0
    for t in range(n - 1, -1, -1):
        delta = rewards[t] + gamma * nxt_v[t] * notdone[t] - values[t]
        acc = delta + gamma * lam * notdone[t] * acc
        adv[t] = acc
    return adv, adv + values


class RolloutBuffer:
    def __init__(self, n: int, obs_dim: int):
        self.obs = np.zeros((n, obs_dim))
        self.u = np.zeros(n)
        self.logp = np.zeros(n)
        self.values = np.zeros(n)
        self.rewards = np.zeros(n)
        self.dones = np.zeros(n)
        self.adv = np.zeros(n)
        self.returns = np.zeros(n)
        self.n = n
        self.pos = 0

    @property
    def full(self) -> bool:
        return self.pos >= self.n

    def add(self, obs, u, logp, value, reward, done) -> None:
        i = self.pos
        self.obs[i], self.u[i], self.logp[i] = obs, u, logp
        self.values[i], self.rewards[i], self.dones[i] = value, reward, done
        self.pos += 1

    def finish(self, last_value: float, gamma: float, lam: float) -> None:
        self.adv, self.returns = compute_gae(self.rewards, self.values, self.dones, last_value,
                                             gamma, lam)


def clipped_surrogate(ratio, adv, eps: float) -> np.ndarray:
    """Per-sample ``min(r A, clip(r, 1-eps, 1+eps) A)``."""
    return np.minimum(ratio * adv, np.clip(ratio, 1 - eps, 1 + eps) * adv)


def ppo_loss(net: ActorCritic, obs, u, old_logp, adv, returns, cfg: PpoConfig,
             need_grad: bool = True):
    """Total loss ``-L_clip + c_v MSE - c_s H`` with analytic gradients.

    Returns ``(loss, grads or None, stats)``; grads are keyed like
    :meth:`ActorCritic.named_params`.
    """
    b = len(u)
    mu, a_cache = net.actor.forward(obs)
    mu = mu[:, 0]
    v, c_cache = net.critic.forward(obs)
    v = v[:, 0]
    ls = net.log_std[0]
    sigma = np.exp(ls)
    logp = gaussian_log_prob(u, mu, ls)
    logratio = logp - old_logp
    ratio = np.exp(logratio)
    s1 = ratio * adv
    s2 = np.clip(ratio, 1 - cfg.clip, 1 + cfg.clip) * adv
    # kept as NumPy scalars so an extended-precision network stays extended
    policy_loss = -np.mean(np.minimum(s1, s2))
    value_loss = np.mean((v - returns) ** 2)
    entropy = gaussian_entropy(ls)
    loss = policy_loss + cfg.c_v * value_loss - cfg.c_s * entropy
    stats = {
        "policy_loss": float(policy_loss), "value_loss": float(value_loss),
        "entropy": float(entropy),
        "approx_kl": float(np.mean(np.expm1(logratio) - logratio)),
        "clip_frac": float(np.mean(np.abs(ratio - 1) > cfg.clip)),
    }
    if not need_grad:
        return loss, None, stats

    d_ratio = -(adv * (s1 <= s2)) / b
    d_logp = d_ratio * ratio
    z = (u - mu) / sigma
    d_mu = d_logp * z / sigma
    d_ls = float(np.sum(d_logp * (z * z - 1.0))) - cfg.c_s
    d_v = 2.0 * cfg.c_v * (v - returns) / b
    grads = {f"actor.{k}": g for k, g in net.actor.backward(a_cache, d_mu[:, None]).items()}
    grads.update({f"critic.{k}": g for k, g in net.critic.backward(c_cache, d_v[:, None]).items()})
    grads["log_std"] = np.array([d_ls])
    return loss, grads, stats


class Adam:
    def __init__(self, n_params: int, lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-5):
        self.lr, self.betas, self.eps = lr, betas, eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        b1, b2 = self.betas
        self.t += 1
        self.m = b1 * self.m + (1 - b1) * grad
        self.v = b2 * self.v + (1 - b2) * grad * grad
        m_hat = self.m / (1 - b1 ** self.t)
        v_hat = self.v / (1 - b2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state(self):
        return self.m.copy(), self.v.copy(), self.t

    def restore(self, st) -> None:
        self.m, self.v, self.t = st[0].copy(), st[1].copy(), st[2]


def clip_grad_norm(g: np.ndarray, max_norm: float) -> tuple[np.ndarray, float]:
    norm = float(np.linalg.norm(g))
    if norm > max_norm:
        g = g * (max_norm / (norm + 1e-6))
    return g, norm


def explained_variance(pred, target) -> float:
    var = np.var(target)
    return float("nan") if var == 0 else float(1 - np.var(target - pred) / var)


def ppo_update(net: ActorCritic, opt: Adam, buf: RolloutBuffer, cfg: PpoConfig, f: float,
               rng: np.random.Generator) -> dict:
    """Several epochs of minibatch gradient steps on one rollout.

    Advantages are normalized once over the whole buffer. Stops early when a
    minibatch's approximate KL exceeds 1.5 x ``target_kl``; a non-finite loss
    restores the pre-update parameters and optimizer state.
    """
    if not 0.0 <= f <= 1.0:
        raise ValueError("progress fraction must lie in [0, 1]")
    n = buf.pos
    adv = buf.adv[:n]
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    opt.lr = learning_rate(cfg, f)
    backup, opt_backup = net.get_flat().copy(), opt.state()
    hist = {k: [] for k in ("policy_loss", "value_loss", "entropy", "approx_kl", "clip_frac")}
    early = False
    steps = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch):
            idx = perm[start:start + cfg.batch]
            loss, grads, st = ppo_loss(net, buf.obs[idx], buf.u[idx], buf.logp[idx], adv[idx],
                                       buf.returns[idx], cfg)
            if not np.isfinite(loss):
                log.error("non-finite PPO loss; restoring pre-update parameters")
                net.set_flat(backup)
                opt.restore(opt_backup)
                return {"aborted": True, "lr": opt.lr, "n_updates": steps}
            for k, v in st.items():
                hist[k].append(v)
            if cfg.target_kl is not None and st["approx_kl"] > 1.5 * cfg.target_kl:
                early = True
                break
            g, _ = clip_grad_norm(net.flatten_grads(grads), cfg.max_grad_norm)
            net.set_flat(opt.step(net.get_flat(), g))
            steps += 1
        if early:
            break
    out = {k: float(np.mean(v)) if v else float("nan") for k, v in hist.items()}
    out.update({"explained_variance": explained_variance(buf.values[:n], buf.returns[:n]),
                "lr": opt.lr, "n_updates": steps, "early_stop": early, "aborted": False})
    return out


def gradient_check(net: ActorCritic, batch: dict, cfg: PpoConfig | None = None,
                   eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients of the full loss."""
    cfg = cfg or PpoConfig()
    args = (batch["obs"], batch["u"], batch["old_logp"], batch["adv"], batch["returns"], cfg)
    _, grads, _ = ppo_loss(net, *args)
    analytic = net.flatten_grads(grads)
    # The difference quotient is evaluated in extended precision: with float64
    # the loss roundoff divided by 2 eps is ~1e-11, as large as the smallest
    # true gradients of the low-gain policy head.
    ext = copy.deepcopy(net)
    for mlp in (ext.actor, ext.critic):
        mlp.params = {k: v.astype(np.longdouble) for k, v in mlp.params.items()}
    ext.log_std = ext.log_std.astype(np.longdouble)
    ext_args = tuple(np.asarray(a, dtype=np.longdouble) for a in args[:5]) + (cfg,)
    flat = ext.get_flat().copy()
    numeric = np.zeros(flat.size)
    h = np.longdouble(eps)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        ext.set_flat(flat)
        lp = ppo_loss(ext, *ext_args, need_grad=False)[0]
        flat[i] = orig - h
        ext.set_flat(flat)
        lm = ppo_loss(ext, *ext_args, need_grad=False)[0]
        flat[i] = orig
        numeric[i] = float((lp - lm) / (2 * h))
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
