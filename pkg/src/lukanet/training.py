"""Levenberg-Marquardt training with soft crystallization, and OBS pruning.

Every LM update is followed by one application of the crystallization map
``upsilon`` to all weights and biases, which drives parameters toward
integers while the data term keeps the fit.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .network import Layer, Network, psi

log = logging.getLogger(__name__)

MU_MIN, MU_MAX = 1e-12, 1e12
STALL_MU = 1e8
STALL_ITERS = 25
RIDGE = 1e-8


@dataclass
class TrainConfig:
    mu_init: float = 0.01
    mu_factor: float = 10.0
    max_iters: int = 500
    mse_target: float = 0.002
    crystallization_exponent: int = 2
    retries_per_topology: int | None = None  # None: 5 + number of inputs
    seed: int = 0
    finite_diff_eps: float = 1e-6
    # when the crystallized candidate is worse, fall back to the plain LM candidate
    raw_fallback: bool = True

    def __post_init__(self):
        if self.mse_target <= 0:
            raise ValueError("mse_target must be positive")
        if self.crystallization_exponent < 1:
            raise ValueError("crystallization_exponent must be >= 1")
        if self.mu_init <= 0 or self.mu_factor <= 1:
            raise ValueError("need mu_init > 0 and mu_factor > 1")

    def retries(self, n_inputs: int) -> int:
        if self.retries_per_topology is None:
            return 5 + n_inputs
        return self.retries_per_topology


@dataclass
class TrainResult:
    network: Network
    mse: float
    iterations: int
    converged: bool
    stalled: bool = False
    # rows: (iteration, mse, delta, mu, accepted)
    history: list[tuple[int, float, float, float, bool]] = field(default_factory=list)

    def history_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("iteration,mse,delta,mu,accepted\n")
            for it, e, d, mu, acc in self.history:
                fh.write(f"{it},{e!r},{d!r},{mu!r},{int(acc)}\n")


# ------------------------------------------------------------ crystallization


def upsilon(w, n: int = 2):
    """Smooth crystallization map.

    ``sign(w) * (cos((1 - frac|w|) * pi/2) ** n + floor|w|)``; integers are
    fixed points and sign and integer part are preserved.
    """
    w = np.asarray(w, dtype=float)
    a = np.abs(w)
    whole = np.floor(a)
    frac = a - whole
    out = np.sign(w) * (np.cos((1.0 - frac) * np.pi / 2) ** n + whole)
    out = np.where(frac == 0, w, out)
    return float(out) if out.ndim == 0 else out


def smooth_crystallize(net: Network, n: int = 2) -> Network:
    return net.with_params(upsilon(net.get_params(), n))


def _distance_to_integer(theta: np.ndarray) -> np.ndarray:
    return np.abs(theta - np.round(theta))


def representation_error(net: Network) -> float:
    """Summed distance of every weight and bias to its nearest integer."""
    return float(_distance_to_integer(net.get_params()).sum())


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5) + 0.0  # + 0.0 turns -0.0 into 0.0


def crisp_crystallize(net: Network) -> Network:
    """Round weights into {-1, 0, 1} and biases to integers."""
    layers = [
        Layer(np.clip(_round_half_away(l.weights), -1, 1), _round_half_away(l.biases))
        for l in net.layers
    ]
    return Network(net.input_names, layers, crystallized=True, grain=net.grain)


# ------------------------------------------------------------------ training


def mse(net: Network, data: Dataset) -> float:
    if len(data) == 0:
        raise ValueError("mse of an empty dataset")
    r = data.targets - net(data.inputs)
    return float(np.mean(r * r))


def network_jacobian(
    net: Network, data: Dataset, mask: np.ndarray | None = None
) -> np.ndarray:
    """d(target - output)/d(params), one row per case.

    Parameter order follows :meth:`Network.get_params`; ``mask`` selects
    columns.  The activation derivative is 1 on the closed interval [0, 1].
    """
    acts = [np.atleast_2d(data.inputs)]
    pre = []
    for layer in net.layers:
        z = acts[-1] @ layer.weights.T + layer.biases
        pre.append(z)
        acts.append(psi(z))
    blocks = []
    delta = ((pre[-1] >= 0) & (pre[-1] <= 1)).astype(float)  # d out / d z_L
    for li in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[li]
        dw = delta[:, :, None] * acts[li][:, None, :]
        blocks.append(np.hstack([dw.reshape(len(delta), -1), delta]))
        if li:
            z = pre[li - 1]
            delta = (delta @ layer.weights) * ((z >= 0) & (z <= 1))
    J = -np.hstack(blocks[::-1])
    return J if mask is None else J[:, mask]


def _solve_damped(J: np.ndarray, e: np.ndarray, mu: float) -> np.ndarray | None:
    H = J.T @ J
    d = np.diag(H)
    # dead parameters have zero curvature and zero gradient; the ridge keeps A regular
    A = H + np.diag(mu * d + np.where(d == 0, RIDGE, 0.0))
    try:
        return np.linalg.solve(A, J.T @ e)
    except np.linalg.LinAlgError:
        return None


@dataclass
class StepOutcome:
    network: Network
    mu: float
    mse: float
    accepted: bool
    delta_before: float = 0.0  # representation error of the raw LM candidate
    delta_after: float = 0.0  # ... after soft crystallization


def lm_step(
    net: Network,
    data: Dataset,
    mu: float,
    n_exponent: int = 2,
    mu_factor: float = 10.0,
    mask: np.ndarray | None = None,
    current_mse: float | None = None,
    raw_fallback: bool = False,
) -> StepOutcome:
    """One damped Gauss-Newton update followed by soft crystallization.

    The candidate is kept only if it lowers the mse; mu shrinks by
    ``mu_factor`` on acceptance and grows by it on rejection.  With
    ``raw_fallback`` a crystallized candidate that fails is replaced by the
    uncrystallized LM candidate before giving up on the step.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    theta = net.get_params()
    if mask is None:
        mask = np.ones(theta.size, dtype=bool)
    cur = mse(net, data) if current_mse is None else current_mse
    e = data.targets - net(data.inputs)
    J = network_jacobian(net, data, mask)
    step = _solve_damped(J, e, mu)
    if step is None or not np.all(np.isfinite(step)):
        return StepOutcome(net, min(mu * mu_factor, MU_MAX), cur, False)
    raw = theta.copy()
    raw[mask] -= step
    cand_theta = upsilon(raw, n_exponent)
    cand_theta[~mask] = theta[~mask]
    cand = net.with_params(cand_theta)
    new = mse(cand, data)
    outcome = StepOutcome(
        net, mu, cur, False,
        float(_distance_to_integer(raw).sum()),
        float(_distance_to_integer(cand_theta).sum()),
    )
    if not new < cur and raw_fallback:
        raw_net = net.with_params(raw)
        raw_mse = mse(raw_net, data)
        if raw_mse < cur:
            cand, new = raw_net, raw_mse
            outcome.delta_after = outcome.delta_before
    if new < cur:
        outcome.network, outcome.mse, outcome.accepted = cand, new, True
        outcome.mu = max(mu / mu_factor, MU_MIN)
    else:
        outcome.mu = min(mu * mu_factor, MU_MAX)
    return outcome


def init_network(
    input_names: Sequence[str], hidden: Sequence[int], rng: np.random.Generator
) -> Network:
    """Random network with the given hidden widths and one output unit.

    Weights and biases are drawn uniformly from [-1, 1].
    """
    layers, prev = [], len(input_names)
    for width in [*hidden, 1]:
        layers.append(Layer(rng.uniform(-1, 1, (width, prev)), rng.uniform(-1, 1, width)))
        prev = width
    return Network(tuple(input_names), layers)


def lm_train(
    net: Network,
    data: Dataset,
    cfg: TrainConfig,
    mask: np.ndarray | None = None,
) -> TrainResult:
    """Iterate :func:`lm_step` until the mse target, ``max_iters`` or a stall.

    A stall is ``STALL_ITERS`` consecutive rejected steps with mu above
    ``STALL_MU``.  Non-convergence is reported, not raised.
    """
    mu = cfg.mu_init
    cur = mse(net, data)
    history = [(0, cur, representation_error(net), mu, True)]
    rejected = 0
    it = 0
    stalled = False
    while cur > cfg.mse_target and it < cfg.max_iters:
        it += 1
        out = lm_step(
            net, data, mu, cfg.crystallization_exponent, cfg.mu_factor, mask, cur,
            raw_fallback=cfg.raw_fallback,
        )
        net, mu, cur = out.network, out.mu, out.mse
        history.append((it, cur, out.delta_after if out.accepted else representation_error(net), mu, out.accepted))
        if out.accepted:
            rejected = 0
        elif mu > STALL_MU:
            rejected += 1
            if rejected >= STALL_ITERS:
                stalled = True
                break
    return TrainResult(net, cur, it, cur <= cfg.mse_target, stalled, history)


# -------------------------------------------------------------------- pruning


def saliencies(net: Network, data: Dataset, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """OBS saliency ``w_q^2 / (2 [H^-1]_qq)`` of each free parameter, and H^-1."""
    J = network_jacobian(net, data, mask)
    H = J.T @ J + RIDGE * np.eye(J.shape[1])
    Hinv = np.linalg.inv(H)
    w = net.get_params()[mask]
    return w * w / (2.0 * np.diag(Hinv)), Hinv


def obs_prune(
    net: Network,
    data: Dataset,
    cfg: TrainConfig,
    mask: np.ndarray | None = None,
    prune_biases: bool = False,
) -> tuple[Network, np.ndarray]:
    """Optimal Brain Surgeon: repeatedly delete the least salient weight.

    Each deletion applies the compensating update
    ``dw = -(w_q / [H^-1]_qq) H^-1 e_q`` to the surviving weights; deleted
    weights stay frozen at 0.  Stops before the first deletion that would
    push the mse above ``cfg.mse_target``.  Returns the pruned network and
    the mask of surviving free parameters.
    """
    theta = net.get_params()
    if mask is None:
        mask = np.ones(theta.size, dtype=bool)
    mask = mask.copy()
    if not prune_biases:
        candidates = _weight_positions(net)
    else:
        candidates = np.ones(theta.size, dtype=bool)
    while True:
        # zero weights have zero saliency and a zero compensating update
        theta = net.get_params()
        mask &= ~(candidates & (theta == 0.0))
        free = np.flatnonzero(mask)
        deletable = candidates[free]
        if not deletable.any():
            break
        sal, Hinv = saliencies(net, data, mask)
        sal = np.where(deletable, sal, np.inf)
        q = int(np.argmin(sal))
        new_theta = theta.copy()
        new_theta[free] -= (theta[free][q] / Hinv[q, q]) * Hinv[:, q]
        new_theta[free[q]] = 0.0
        cand = net.with_params(new_theta)
        if mse(cand, data) > cfg.mse_target:
            break
        net = cand
        mask[free[q]] = False
    return net, mask


def _weight_positions(net: Network) -> np.ndarray:
    flags = []
    for l in net.layers:
        flags.append(np.ones(l.weights.size, dtype=bool))
        flags.append(np.zeros(l.biases.size, dtype=bool))
    return np.concatenate(flags)
