"""Goal-conditioned trajectory autoencoder with mixed latents.

The encoder maps a flattened trajectory to a Gaussian posterior over a
continuous code z, categorical logits over a discrete code c, and a guess of
the end-effector goal. The decoder regenerates the trajectory from
(z, c, goal); its final tanh is scaled by pi so outputs always respect the
joint range. Training drives both posterior KL terms toward ramped capacity
targets instead of straight to zero, which is what lets a small number of
latent units stay informative while the rest shut off.
"""

import copy
import hashlib
import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import ContractViolation, ModelIOError, TrainingDiverged
from .kinematics import KinematicChain
from .neuralnet import DenseNet, adam_step, init_adam, init_dense_net, net_backward, net_forward
from .validation import as_float_array

MODEL_FORMAT = "atp-model-v1"


@dataclass
class TrainingConfig:
    epochs: int = 250
    batch_size: int = 100
    learning_rate: float = 5e-4
    gamma: float = 30.0
    cz_max: float = 5.0
    cc_max: float | None = None  # None -> ln(k_c)
    capacity_ramp: float = 0.6  # fraction of steps spent ramping capacities up
    tau: float = 0.67
    recon_weight: float | None = None  # None -> (T+1) * d (sum-style MSE)
    goal_weight: float = 100.0
    seed: int = 0

    def validate(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ContractViolation("epochs and batch_size must be >= 1")
        if self.gamma < 0 or self.tau <= 0:
            raise ContractViolation("gamma must be >= 0 and tau > 0")
        if not (0 < self.capacity_ramp <= 1):
            raise ContractViolation("capacity_ramp must lie in (0, 1]")
        return self

    def fingerprint(self):
        blob = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class LatentCode:
    """Continuous code z plus a discrete class as a probability vector."""

    z: np.ndarray
    c: np.ndarray

    @property
    def class_index(self):
        return int(np.argmax(self.c))

    def to_json(self):
        return {"z": self.z.tolist(), "c": self.c.tolist()}


@dataclass
class AtpModel:
    """Encoder/decoder pair plus the geometry they were trained against."""

    encoder: DenseNet
    decoder: DenseNet
    chain: KinematicChain
    n_steps: int  # T; trajectories have T+1 rows
    k_z: int
    k_c: int

    @property
    def dof(self):
        return self.chain.dof

    @property
    def workspace_dim(self):
        return self.chain.workspace_dim

    @property
    def traj_dim(self):
        return (self.n_steps + 1) * self.dof

    def flatten(self, points):
        """(T+1, d) -> (traj_dim,), or a batch thereof."""
        arr = as_float_array(points, "trajectory")
        if arr.ndim == 2 and arr.shape == (self.n_steps + 1, self.dof):
            return arr.reshape(-1)
        if arr.ndim == 3 and arr.shape[1:] == (self.n_steps + 1, self.dof):
            return arr.reshape(arr.shape[0], -1)
        if arr.ndim in (1, 2) and arr.shape[-1] == self.traj_dim:
            return arr
        raise ContractViolation(
            f"trajectory shape {arr.shape} does not match model "
            f"({self.n_steps + 1} rows x {self.dof} joints)"
        )

    def unflatten(self, flat):
        flat = np.asarray(flat, dtype=float)
        if flat.ndim == 1:
            return flat.reshape(self.n_steps + 1, self.dof)
        return flat.reshape(flat.shape[0], self.n_steps + 1, self.dof)


def build_model(
    chain,
    n_steps,
    k_z=5,
    k_c=4,
    encoder_hidden=(300, 200),
    decoder_hidden=(200, 300),
    seed=0,
):
    """Fresh Glorot-initialized model for the given chain and horizon."""
    if n_steps < 2 or k_z < 1 or k_c < 2:
        raise ContractViolation("need n_steps >= 2, k_z >= 1, k_c >= 2")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(101,)))
    traj_dim = (n_steps + 1) * chain.dof
    head_dim = 2 * k_z + k_c + chain.workspace_dim
    encoder = init_dense_net(
        [traj_dim, *encoder_hidden, head_dim],
        ["relu"] * len(encoder_hidden) + ["identity"],
        rng,
    )
    decoder = init_dense_net(
        [k_z + k_c + chain.workspace_dim, *decoder_hidden, traj_dim],
        ["relu"] * len(decoder_hidden) + ["tanh"],
        rng,
    )
    return AtpModel(
        encoder=encoder, decoder=decoder, chain=chain, n_steps=n_steps, k_z=k_z, k_c=k_c
    )


def _split_encoder_output(model, out):
    k_z, k_c = model.k_z, model.k_c
    mu = out[..., :k_z]
    log_sigma = out[..., k_z : 2 * k_z]
    logits = out[..., 2 * k_z : 2 * k_z + k_c]
    goal = out[..., 2 * k_z + k_c :]
    return mu, log_sigma, logits, goal


def encode(model, points):
    """Posterior parameters for one trajectory or a batch.

    Returns (mu_z, sigma_z, logits_c, goal_estimate); sigma_z is strictly
    positive by exponential parametrization.
    """
    flat = model.flatten(points)
    out, _ = net_forward(model.encoder, flat)
    mu, log_sigma, logits, goal = _split_encoder_output(model, out)
    return mu, np.exp(log_sigma), logits, goal


def decode(model, z, c, x_g):
    """Trajectory for latent code (z, c) and goal x_g; entries in [-pi, pi]."""
    z = as_float_array(z, "z")
    c = as_float_array(c, "c")
    x_g = as_float_array(x_g, "x_g")
    single = z.ndim == 1
    z2, c2, g2 = np.atleast_2d(z), np.atleast_2d(c), np.atleast_2d(x_g)
    if z2.shape[1] != model.k_z:
        raise ContractViolation(f"z must have {model.k_z} entries, got {z2.shape[1]}")
    if c2.shape[1] != model.k_c:
        raise ContractViolation(f"c must have {model.k_c} entries, got {c2.shape[1]}")
    if g2.shape[1] != model.workspace_dim:
        raise ContractViolation(
            f"x_g must have {model.workspace_dim} entries, got {g2.shape[1]}"
        )
    if np.any(c2 < -1e-9) or np.any(np.abs(c2.sum(axis=1) - 1.0) > 1e-6):
        raise ContractViolation("c must be a probability vector (entries >= 0, sum 1)")
    out, _ = net_forward(model.decoder, np.hstack([z2, c2, g2]))
    flat = np.pi * out
    return model.unflatten(flat[0] if single else flat)


def reparameterize_gaussian(mu, sigma, rng=None, noise=None):
    """z = mu + sigma * eps with eps ~ N(0, I) (or caller-frozen noise)."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ContractViolation("sigma must be strictly positive")
    if noise is None:
        noise = rng.standard_normal(mu.shape)
    return mu + sigma * noise


def reparameterize_gumbel(logits, tau, rng=None, noise=None, hard=False):
    """Gumbel-softmax sample: softmax((logits + g)/tau).

    With hard=True the returned vector is the exact one-hot of the argmax
    (straight-through style; the soft sample is what carries gradients during
    training).
    """
    if tau <= 0:
        raise ContractViolation("tau must be > 0")
    logits = np.asarray(logits, dtype=float)
    if noise is None:
        noise = rng.gumbel(size=logits.shape)
    soft = softmax((logits + noise) / tau)
    if not hard:
        return soft
    hard_code = np.zeros_like(soft)
    idx = np.argmax(soft, axis=-1)
    if soft.ndim == 1:
        hard_code[idx] = 1.0
    else:
        hard_code[np.arange(soft.shape[0]), idx] = 1.0
    return hard_code


def one_hot(index, k):
    if not (0 <= index < k):
        raise ContractViolation(f"class index {index} out of range [0, {k})")
    vec = np.zeros(k)
    vec[index] = 1.0
    return vec


def softmax(logits):
    logits = np.asarray(logits, dtype=float)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def kl_gaussian(mu, sigma):
    """KL(N(mu, sigma^2) || N(0, I)) per unit and total.

    Returns (total, per_unit): total sums the last axis; both are >= 0 and
    vanish exactly at mu=0, sigma=1.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ContractViolation("sigma must be strictly positive")
    per_unit = 0.5 * (mu ** 2 + sigma ** 2 - 1.0 - 2.0 * np.log(sigma))
    return per_unit.sum(axis=-1), per_unit


def kl_categorical(probs):
    """KL(Categorical(probs) || uniform) = ln k + sum p ln p, with 0 ln 0 = 0."""
    p = np.asarray(probs, dtype=float)
    if np.any(p < -1e-12) or np.any(np.abs(p.sum(axis=-1) - 1.0) > 1e-9):
        raise ContractViolation("probs must be nonnegative and sum to 1")
    k = p.shape[-1]
    plogp = np.where(p > 0, p * np.log(np.maximum(p, 1e-300)), 0.0)
    return np.log(k) + plogp.sum(axis=-1)


def _as_batch_arrays(model, batch):
    """Accept a list of LabeledSample or a (points, goals) pair of arrays."""
    if isinstance(batch, tuple):
        points, goals = batch
    else:
        points = np.stack([s.points for s in batch])
        goals = np.stack([s.goal for s in batch])
    flat = model.flatten(points)
    goals = as_float_array(goals, "goals")
    if flat.ndim == 1:
        flat = flat[None, :]
        goals = goals[None, :]
    if goals.shape != (flat.shape[0], model.workspace_dim):
        raise ContractViolation("goals shape does not match the batch")
    return flat, goals


def draw_noise(model, n, rng):
    """Reparametrization noise for a batch: (gaussian eps, gumbel g)."""
    return rng.standard_normal((n, model.k_z)), rng.gumbel(size=(n, model.k_c))


def resolved_capacities(cfg, k_c, step=None, total_steps=None):
    """Capacity targets (C_z, C_c) at a training step; final values if None."""
    cz_max = cfg.cz_max
    cc_max = math.log(k_c) if cfg.cc_max is None else cfg.cc_max
    if step is None or total_steps is None:
        return cz_max, cc_max
    ramp_steps = max(1.0, cfg.capacity_ramp * total_steps)
    frac = min(1.0, step / ramp_steps)
    return cz_max * frac, cc_max * frac


def atp_loss(model, batch, cfg, noise=None, rng=None, capacities=None):
    """Objective value and per-term breakdown for one batch.

    loss = recon_weight * MSE(xi_hat, xi)
         + gamma * |KL_z - C_z| + gamma * |KL_c - C_c|
         + goal_weight * MSE(goal_estimate, goal)
    """
    loss, breakdown, _, _ = _loss_impl(model, batch, cfg, noise, rng, capacities, want_grads=False)
    return loss, breakdown


def atp_loss_and_grads(model, batch, cfg, noise=None, rng=None, capacities=None):
    """Like atp_loss but also returns gradients aligned to
    encoder.params() + decoder.params()."""
    loss, breakdown, ge, gd = _loss_impl(model, batch, cfg, noise, rng, capacities, want_grads=True)
    return loss, breakdown, ge + gd


def _loss_impl(model, batch, cfg, noise, rng, capacities, want_grads):
    X, G = _as_batch_arrays(model, batch)
    B = X.shape[0]
    k_z, k_c, w = model.k_z, model.k_c, model.workspace_dim
    if noise is None:
        noise = draw_noise(model, B, rng)
    eps, gum = noise
    cz, cc = capacities if capacities is not None else resolved_capacities(cfg, k_c)
    recon_weight = cfg.recon_weight if cfg.recon_weight is not None else model.traj_dim

    enc_out, enc_cache = net_forward(model.encoder, X)
    mu, log_sigma, logits, goal_hat = _split_encoder_output(model, enc_out)
    sigma = np.exp(log_sigma)
    if not (np.all(np.isfinite(enc_out)) and np.all(np.isfinite(sigma)) and np.all(sigma > 0)):
        raise TrainingDiverged("encoder outputs left the finite range")
    z = mu + sigma * eps
    soft = softmax((logits + gum) / cfg.tau)
    dec_in = np.hstack([z, soft, G])
    dec_out, dec_cache = net_forward(model.decoder, dec_in)
    xi_hat = np.pi * dec_out

    resid = xi_hat - X
    recon_mse = float(np.mean(resid ** 2))
    goal_resid = goal_hat - G
    goal_mse = float(np.mean(goal_resid ** 2))

    kl_z_total, kl_z_units = kl_gaussian(mu, sigma)
    kl_z = float(np.mean(kl_z_total))
    kl_z_per_unit = kl_z_units.mean(axis=0)
    probs = softmax(logits)
    kl_c_rows = kl_categorical(probs)
    kl_c = float(np.mean(kl_c_rows))

    recon_term = recon_weight * recon_mse
    goal_term = cfg.goal_weight * goal_mse
    cap_z_term = cfg.gamma * abs(kl_z - cz)
    cap_c_term = cfg.gamma * abs(kl_c - cc)
    loss = recon_term + goal_term + cap_z_term + cap_c_term

    breakdown = {
        "loss": float(loss),
        "recon": recon_term,
        "recon_mse": recon_mse,
        "goal": goal_term,
        "goal_mse": goal_mse,
        "kl_z": kl_z,
        "kl_c": kl_c,
        "kl_z_per_unit": np.asarray(kl_z_per_unit),
        "capacity_z": cap_z_term,
        "capacity_c": cap_c_term,
        "cz": float(cz),
        "cc": float(cc),
    }
    if not want_grads:
        return float(loss), breakdown, None, None

    # Reconstruction path back through the decoder.
    d_xi_hat = recon_weight * 2.0 * resid / resid.size
    dec_grads, d_dec_in = net_backward(model.decoder, dec_cache, np.pi * d_xi_hat)
    d_z = d_dec_in[:, :k_z]
    d_soft = d_dec_in[:, k_z : k_z + k_c]  # gradient w.r.t. the goal input is unused

    # Reparametrizations.
    d_mu = d_z.copy()
    d_sigma = d_z * eps
    inner = d_soft - (d_soft * soft).sum(axis=1, keepdims=True)
    d_logits = soft * inner / cfg.tau

    # Capacity terms (batch-mean KLs inside absolute values).
    sign_z = np.sign(kl_z - cz)
    d_mu += cfg.gamma * sign_z * mu / B
    d_sigma += cfg.gamma * sign_z * (sigma - 1.0 / sigma) / B
    sign_c = np.sign(kl_c - cc)
    log_p = np.log(np.maximum(probs, 1e-300))
    f_rows = (np.where(probs > 0, probs * log_p, 0.0)).sum(axis=1, keepdims=True)
    d_logits += cfg.gamma * sign_c * np.where(probs > 0, probs * (log_p - f_rows), 0.0) / B

    d_goal_hat = cfg.goal_weight * 2.0 * goal_resid / goal_resid.size
    d_enc_out = np.hstack([d_mu, d_sigma * sigma, d_logits, d_goal_hat])
    enc_grads, _ = net_backward(model.encoder, enc_cache, d_enc_out)
    return float(loss), breakdown, enc_grads, dec_grads


def dataset_kl_profile(model, batch):
    """Noise-free posterior KL diagnostics over a dataset.

    Returns (kl_z_per_unit, kl_z_total, kl_c) averaged over samples; used to
    spot which continuous units carry information after training.
    """
    X, _ = _as_batch_arrays(model, batch)
    mu, sigma, logits, _ = encode(model, X)
    total, per_unit = kl_gaussian(mu, sigma)
    kl_c = kl_categorical(softmax(logits))
    return per_unit.mean(axis=0), float(np.mean(total)), float(np.mean(kl_c))


def train(model, samples, cfg, log=None):
    """Minibatch Adam training; returns (model, per-epoch metrics).

    Deterministic for a fixed cfg.seed. Raises TrainingDiverged (carrying the
    last finite-loss snapshot) if the loss leaves the reals.
    """
    cfg.validate()
    if not samples:
        raise ContractViolation("dataset must be non-empty")
    X, G = _as_batch_arrays(model, samples)
    n = X.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(7,)))
    params = model.encoder.params() + model.decoder.params()
    opt = init_adam(params, lr=cfg.learning_rate)
    n_batches = (n + cfg.batch_size - 1) // cfg.batch_size
    total_steps = cfg.epochs * n_batches
    step = 0
    metrics = []
    last_good = None
    keys = ("loss", "recon_mse", "goal_mse", "kl_z", "kl_c")
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        sums = {k: 0.0 for k in keys}
        unit_sum = np.zeros(model.k_z)
        for b in range(n_batches):
            idx = perm[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            noise = draw_noise(model, len(idx), rng)
            caps = resolved_capacities(cfg, model.k_c, step, total_steps)
            try:
                loss, bd, grads = atp_loss_and_grads(
                    model, (X[idx], G[idx]), cfg, noise=noise, capacities=caps
                )
            except TrainingDiverged as exc:
                raise TrainingDiverged(
                    f"{exc} (epoch {epoch} step {step})", last_good_model=last_good
                ) from exc
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"loss became non-finite at epoch {epoch} step {step}",
                    last_good_model=last_good,
                    breakdown=bd,
                )
            adam_step(opt, params, grads)
            for k in keys:
                sums[k] += bd[k]
            unit_sum += bd["kl_z_per_unit"]
            step += 1
        row = {"epoch": epoch}
        row.update({k: sums[k] / n_batches for k in keys})
        row["cz"], row["cc"] = resolved_capacities(cfg, model.k_c, step, total_steps)
        row["kl_z_per_unit"] = (unit_sum / n_batches).tolist()
        metrics.append(row)
        last_good = copy.deepcopy(model)
        if log is not None:
            log(row)
    return model, metrics


def save_model(model, path, config=None, extra_meta=None):
    meta = {
        "dof": model.dof,
        "n_steps": model.n_steps,
        "k_z": model.k_z,
        "k_c": model.k_c,
        "workspace_dim": model.workspace_dim,
        "chain": model.chain.to_json(),
        "config_fingerprint": config.fingerprint() if config is not None else None,
    }
    if extra_meta:
        meta.update(extra_meta)
    doc = {
        "format": MODEL_FORMAT,
        "meta": meta,
        "encoder": model.encoder.to_json(),
        "decoder": model.decoder.to_json(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path, chain=None):
    """Load a model file; verify against `chain` when provided.

    Returns (model, meta). Truncated or inconsistent files raise ModelIOError
    without producing a partial model.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelIOError(f"cannot read model file {path}: {exc}") from exc
    if doc.get("format") != MODEL_FORMAT:
        raise ModelIOError(f"unsupported model format {doc.get('format')!r}")
    try:
        meta = doc["meta"]
        file_chain = KinematicChain.from_json(meta["chain"])
        model = AtpModel(
            encoder=DenseNet.from_json(doc["encoder"]),
            decoder=DenseNet.from_json(doc["decoder"]),
            chain=file_chain,
            n_steps=int(meta["n_steps"]),
            k_z=int(meta["k_z"]),
            k_c=int(meta["k_c"]),
        )
    except (KeyError, TypeError, ValueError, ContractViolation) as exc:
        raise ModelIOError(f"model file {path} is malformed: {exc}") from exc
    if model.encoder.input_dim != model.traj_dim or model.decoder.output_dim != model.traj_dim:
        raise ModelIOError("model layer shapes disagree with recorded dimensions")
    if chain is not None:
        if (
            chain.dof != file_chain.dof
            or chain.workspace_dim != file_chain.workspace_dim
            or not np.allclose(chain.link_lengths, file_chain.link_lengths)
        ):
            raise ModelIOError(
                f"model was trained for a {file_chain.dof}-DoF chain; "
                f"requested chain has {chain.dof} DoF"
            )
    return model, meta
