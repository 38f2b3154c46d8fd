"""Reading a formula back out of a crystallized network.

Each live unit is translated bottom-up.  Representable units become a
conjunction or disjunction of their input formulas, constant units are
folded into the biases of the units that read them, and un-representable
units are replaced by their most similar rule-R decomposition, measured on
the activations the unit actually sees over the case set.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .logic import EQUALITY_TOL, Const, Formula, Var, format_formula, formula_valuation
from .network import Network, NetworkError
from .neuron import (
    NeuronClass,
    NeuronConfig,
    best_approximation,
    classify_neuron,
    neuron_to_formula,
)


@dataclass
class NeuronStatus:
    layer: int  # 1-based
    unit: int
    status: str  # representable | approximated | constant | elided
    config: str = ""
    similarity: float | None = None  # set for approximated units

    def to_dict(self) -> dict:
        d = {"layer": self.layer, "unit": self.unit, "status": self.status}
        if self.config:
            d["config"] = self.config
        if self.similarity is not None:
            d["lambda"] = self.similarity
        return d


@dataclass
class ExtractionReport:
    formula: Formula
    neurons: list[NeuronStatus]
    similarity: float  # λ between network and formula on the case set
    mse: float | None = None  # formula against the targets
    accuracy: float | None = None
    network_mse: float | None = None
    max_deviation: float | None = None  # largest |formula - target|
    input_names: tuple[str, ...] = field(default_factory=tuple)

    @property
    def formula_text(self) -> str:
        return format_formula(self.formula)

    @property
    def exact(self) -> bool:
        """Every neuron translated without approximation."""
        return all(n.status != "approximated" for n in self.neurons)

    @property
    def equivalent(self) -> bool | None:
        """Formula reproduces every target (None without targets)."""
        if self.max_deviation is None:
            return None
        return self.max_deviation <= EQUALITY_TOL

    def to_dict(self) -> dict:
        return {
            "formula": self.formula_text,
            "formula_unicode": format_formula(self.formula, unicode=True),
            "neurons": [n.to_dict() for n in self.neurons],
            "lambda": self.similarity,
            "mse": self.mse,
            "accuracy": self.accuracy,
            "network_mse": self.network_mse,
            "equivalent": self.equivalent,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def live_units(net: Network) -> list[np.ndarray]:
    """Per layer, a mask of units whose value can reach the output."""
    live = [np.ones(1, dtype=bool)]
    for layer in reversed(net.layers[1:]):
        used = (layer.weights[live[0]] != 0).any(axis=0)
        live.insert(0, used)
    return live


def accuracy(pred: np.ndarray, targets: np.ndarray) -> float:
    """Share of cases predicted right.

    Binary targets compare against the prediction thresholded at 1/2;
    many-valued targets need an exact match.
    """
    pred = np.asarray(pred, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if np.isin(targets, (0.0, 1.0)).all():
        hit = (pred >= 0.5) == (targets >= 0.5)
    else:
        hit = np.abs(pred - targets) <= EQUALITY_TOL
    return float(hit.mean())


def extract_formula(
    net: Network,
    cases: np.ndarray,
    targets: np.ndarray | None = None,
) -> ExtractionReport:
    """Translate a crystallized network into a formula over its input names.

    ``cases`` (rows x inputs) is the case set on which un-representable
    units are approximated and on which λ is measured.
    """
    if not net.crystallized:
        raise NetworkError("extraction needs a crystallized network")
    x = np.atleast_2d(np.asarray(cases, dtype=float))
    if len(x) == 0:
        raise ValueError("extraction needs a nonempty case set")
    acts = net.activations(x)
    live = live_units(net)
    formulas: list[Formula] = [Var(name) for name in net.input_names]
    # constant units carry their value instead of a formula
    constants: dict[int, float] = {}
    statuses: list[NeuronStatus] = []

    for li, layer in enumerate(net.layers):
        next_formulas: list[Formula] = []
        next_constants: dict[int, float] = {}
        for u in range(layer.units):
            if not live[li][u]:
                statuses.append(NeuronStatus(li + 1, u, "elided"))
                next_formulas.append(Const(0))
                continue
            w = layer.weights[u].copy()
            b = float(layer.biases[u])
            for j, c in constants.items():
                b += w[j] * c
                w[j] = 0.0
            support = np.flatnonzero(w)
            cfg = NeuronConfig(tuple(int(v) for v in w[support]), int(round(b)))
            inputs = [formulas[j] for j in support]
            kind = classify_neuron(cfg)
            if kind.is_constant:
                value = 1.0 if kind is NeuronClass.CONSTANT_ONE else 0.0
                next_constants[u] = value
                next_formulas.append(Const(int(value)))
                statuses.append(NeuronStatus(li + 1, u, "constant", str(cfg)))
            elif kind is NeuronClass.UNREPRESENTABLE:
                tree, lam = best_approximation(cfg, acts[li][:, support])
                next_formulas.append(tree.to_formula(inputs))
                statuses.append(NeuronStatus(li + 1, u, "approximated", str(cfg), lam))
            else:
                next_formulas.append(neuron_to_formula(cfg, inputs))
                statuses.append(NeuronStatus(li + 1, u, "representable", str(cfg)))
        formulas, constants = next_formulas, next_constants

    formula = formulas[0]
    names = net.input_names
    out_net = acts[-1][:, 0]
    out_formula = formula_valuation(formula, names)(x)
    lam = float(np.exp(-np.abs(out_net - out_formula).mean()))
    report = ExtractionReport(formula, statuses, lam, input_names=tuple(names))
    if targets is not None:
        t = np.asarray(targets, dtype=float).reshape(-1)
        if len(t) != len(x):
            raise ValueError(f"{len(x)} cases but {len(t)} targets")
        report.mse = float(np.mean((t - out_formula) ** 2))
        report.network_mse = float(np.mean((t - out_net) ** 2))
        report.accuracy = accuracy(out_formula, t)
        report.max_deviation = float(np.abs(t - out_formula).max())
    return report
