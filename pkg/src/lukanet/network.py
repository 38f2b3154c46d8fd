"""Layered feed-forward networks with the truncated identity activation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .logic import (
    BINARY,
    Const,
    Formula,
    Fusion,
    Iff,
    Implies,
    Not,
    StrongDisj,
    Var,
    variables,
)


def psi(z):
    """Identity truncated to [0, 1]."""
    return np.clip(z, 0.0, 1.0)


@dataclass
class Layer:
    weights: np.ndarray  # units x inputs
    biases: np.ndarray  # units

    def __post_init__(self):
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=float))
        self.biases = np.asarray(self.biases, dtype=float).reshape(-1)
        if self.weights.shape[0] != self.biases.shape[0]:
            raise ValueError(
                f"{self.weights.shape[0]} weight rows but {self.biases.shape[0]} biases"
            )

    @property
    def units(self) -> int:
        return self.weights.shape[0]

    @property
    def fan_in(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "Layer":
        return Layer(self.weights.copy(), self.biases.copy())


class NetworkError(ValueError):
    pass


@dataclass
class Network:
    input_names: tuple[str, ...]
    layers: list[Layer]
    crystallized: bool = False
    grain: int | None = None

    def __post_init__(self):
        self.input_names = tuple(self.input_names)
        self.layers = [l if isinstance(l, Layer) else Layer(*l) for l in self.layers]
        self.validate()

    def validate(self) -> None:
        if not self.layers:
            raise NetworkError("network has no layers")
        width = len(self.input_names)
        for i, layer in enumerate(self.layers):
            if layer.fan_in != width:
                raise NetworkError(
                    f"layer {i} expects {layer.fan_in} inputs but receives {width}"
                )
            width = layer.units
        if width != 1:
            raise NetworkError(f"output layer must have 1 unit, has {width}")
        if self.crystallized and not is_castro(self):
            raise NetworkError(
                "crystallized network needs weights in {-1, 0, 1} and integer biases"
            )

    @property
    def n_inputs(self) -> int:
        return len(self.input_names)

    @property
    def shapes(self) -> list[tuple[int, int]]:
        return [l.weights.shape for l in self.layers]

    @property
    def n_params(self) -> int:
        return sum(l.weights.size + l.biases.size for l in self.layers)

    def copy(self, **changes) -> "Network":
        net = replace(self, layers=[l.copy() for l in self.layers])
        for k, v in changes.items():
            setattr(net, k, v)
        return net

    # flat parameter vector: per layer, weights row-major then biases
    def get_params(self) -> np.ndarray:
        return np.concatenate([np.r_[l.weights.ravel(), l.biases] for l in self.layers])

    def with_params(self, theta: np.ndarray, crystallized: bool = False) -> "Network":
        layers, k = [], 0
        for l in self.layers:
            nw, nb = l.weights.size, l.biases.size
            layers.append(
                Layer(theta[k : k + nw].reshape(l.weights.shape).copy(), theta[k + nw : k + nw + nb].copy())
            )
            k += nw + nb
        return Network(self.input_names, layers, crystallized, self.grain)

    def activations(self, x: np.ndarray) -> list[np.ndarray]:
        """Outputs of every layer (index 0 is the input itself)."""
        a = np.atleast_2d(np.asarray(x, dtype=float))
        if a.shape[1] != self.n_inputs:
            raise NetworkError(f"expected {self.n_inputs} inputs, got {a.shape[1]}")
        acts = [a]
        for layer in self.layers:
            a = psi(a @ layer.weights.T + layer.biases)
            acts.append(a)
        return acts

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.activations(x)[-1][:, 0]


def is_castro(net: Network) -> bool:
    for l in net.layers:
        if not np.all(np.isin(l.weights, (-1.0, 0.0, 1.0))):
            return False
        if not np.all(l.biases == np.round(l.biases)):
            return False
    return True


def forward(net: Network, inputs: Sequence[float]) -> float:
    """Evaluate on a single input vector."""
    x = np.asarray(inputs, dtype=float)
    if x.ndim != 1:
        raise NetworkError("forward takes one input vector; call the network for batches")
    return float(net(x[None, :])[0])


# ------------------------------------------------------------- compilation


@dataclass(eq=False)
class _Unit:
    layer: int
    index: int
    literals: list = field(default_factory=list)  # (sign, source) pairs
    bias: float = 0.0


def _expand_iff(f: Formula) -> Formula:
    if isinstance(f, Not):
        return Not(_expand_iff(f.child))
    if isinstance(f, Iff):
        a, b = _expand_iff(f.left), _expand_iff(f.right)
        return Fusion(Implies(a, b), Implies(b, a))
    if isinstance(f, BINARY):
        return type(f)(_expand_iff(f.left), _expand_iff(f.right))
    return f


def _literal(f: Formula) -> tuple[int, Formula]:
    sign = 1
    while isinstance(f, Not):
        sign, f = -sign, f.child
    return sign, f


def _connective(f: Formula) -> tuple[tuple[int, Formula], tuple[int, Formula], float]:
    """Reduce a binary node to (literal, literal, base bias) of a fusion/disjunction neuron."""
    left, right = _literal(f.left), _literal(f.right)
    if isinstance(f, Fusion):
        return left, right, -1.0
    if isinstance(f, StrongDisj):
        return left, right, 0.0
    if isinstance(f, Implies):
        return (-left[0], left[1]), right, 0.0
    raise TypeError(f"cannot compile node {type(f).__name__}")


class _Compiler:
    def __init__(self, names: Sequence[str]):
        self.names = list(names)
        self.layers: list[list[_Unit]] = []
        self.depth: dict[int, int] = {}
        self.pads: dict[tuple, _Unit] = {}

    def new_unit(self, layer: int) -> _Unit:
        while len(self.layers) < layer:
            self.layers.append([])
        unit = _Unit(layer, len(self.layers[layer - 1]))
        self.layers[layer - 1].append(unit)
        return unit

    def node_depth(self, f: Formula) -> int:
        key = id(f)
        if key not in self.depth:
            if isinstance(f, Var):
                d = 0
            elif isinstance(f, Const):
                d = 1
            elif isinstance(f, Not):
                d = self.node_depth(f.child)
            else:
                d = 1 + max(self.node_depth(f.left), self.node_depth(f.right))
                if self._same_var(f):
                    d = 2
            self.depth[key] = d
        return self.depth[key]

    @staticmethod
    def _same_var(f: Formula) -> bool:
        # x & x would need weight 2; route one copy through its own identity unit
        (s1, a), (s2, b), _ = _connective(f)
        return isinstance(a, Var) and a == b and s1 == s2

    def build(self, f: Formula):
        """Allocate units for ``f`` (no top-level negation); returns its signal source."""
        if isinstance(f, Var):
            return ("var", self.names.index(f.name)), 0
        if isinstance(f, Const):
            unit = self.new_unit(1)
            unit.bias = float(f.value)
            return unit, 1
        layer = self.node_depth(f)
        (s1, a), (s2, b), bias = _connective(f)
        sources = []
        for sign, child in ((s1, a), (s2, b)):
            src, depth = self.build(child)
            if sources and self._same_var(f):
                unit = self.new_unit(1)
                unit.literals.append((1, src))
                src, depth = unit, 1
            sources.append((sign, self.pad(src, depth, layer - 1)))
        unit = self.new_unit(layer)
        for sign, src in sources:
            unit.literals.append((sign, src))
            if sign < 0:
                bias += 1.0
        unit.bias = bias
        return unit, layer

    def pad(self, src, depth: int, target: int):
        while depth < target:
            key = (src if isinstance(src, tuple) else id(src), depth + 1)
            if key not in self.pads:
                unit = self.new_unit(depth + 1)
                unit.literals.append((1, src))
                self.pads[key] = unit
            src, depth = self.pads[key], depth + 1
        return src


def compile_formula(f: Formula, input_names: Sequence[str] | None = None) -> Network:
    """Encode ``f`` as a crystallized layered network computing its truth function.

    One neuron per binary connective; negations fold into weight signs and
    biases; identity units (weight 1, bias 0) carry signals across layers.
    """
    f = _expand_iff(f)
    names = list(input_names) if input_names is not None else list(variables(f))
    missing = set(variables(f)) - set(names)
    if missing:
        raise ValueError(f"input_names lacks variables {sorted(missing)}")
    comp = _Compiler(names)
    sign, core = _literal(f)
    if isinstance(core, Var):
        top = comp.new_unit(1)
        top.literals.append((1, ("var", names.index(core.name))))
    else:
        top, _ = comp.build(core)
    if sign < 0:
        # 1 - psi(w.x + b) == psi(-w.x + 1 - b)
        top.literals = [(-s, src) for s, src in top.literals]
        top.bias = 1.0 - top.bias

    layers = []
    prev = len(names)
    for units in comp.layers:
        w = np.zeros((len(units), prev))
        b = np.zeros(len(units))
        for unit in units:
            b[unit.index] = unit.bias
            for s, src in unit.literals:
                col = src[1] if isinstance(src, tuple) else src.index
                w[unit.index, col] += s
        layers.append(Layer(w, b))
        prev = len(units)
    return Network(tuple(names), layers, crystallized=True)


# ------------------------------------------------------------- file format


def network_to_dict(net: Network) -> dict:
    def num(v):
        v = float(v)
        return int(v) if net.crystallized and v == int(v) else v

    return {
        "inputs": list(net.input_names),
        "grain": net.grain,
        "layers": [
            {
                "weights": [[num(v) for v in row] for row in l.weights],
                "biases": [num(v) for v in l.biases],
            }
            for l in net.layers
        ],
        "crystallized": bool(net.crystallized),
    }


def network_from_dict(data: dict) -> Network:
    try:
        layers = [Layer(l["weights"], l["biases"]) for l in data["layers"]]
        return Network(
            tuple(data["inputs"]),
            layers,
            crystallized=bool(data.get("crystallized", False)),
            grain=data.get("grain"),
        )
    except (KeyError, TypeError) as exc:
        raise NetworkError(f"malformed network description: {exc}") from exc


def save_network(net: Network, path) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_dict(net), fh, indent=2)
        fh.write("\n")


def load_network(path) -> Network:
    with open(path) as fh:
        return network_from_dict(json.load(fh))
