"""Layered programmable circuits for probe preparation and pre-measurement.

A layer is tunneling, then (emitter ansatz only) a shared detuning phase
on both emitters, then the nonlinearity on both emitter-mode pairs or
both modes.  The same structure serves preparation and pre-measurement;
only the parameter vector differs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (
    LocalGate,
    apply,
    coherent_input_state,
    detune_gate,
    jc_gate,
    kerr_gate,
    tunnel_gate,
)
from .hilbert import CompositeState, LayoutError, SubsystemLayout

_LAYER_WIDTH = {"jc": 3, "kerr": 2}


@dataclass(frozen=True)
class AnsatzParams:
    """Parameters of a layered ansatz.

    ``layers`` holds one record per layer: ``(j, delta, g)`` for the
    emitter ansatz or ``(j, k)`` for the Kerr ansatz, all unbounded
    reals (the gates are periodic, so boxes buy nothing).  Flat vectors
    serialize in layer-major order (j1, delta1, g1, j2, ...).
    """

    kind: str
    layers: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        if self.kind not in _LAYER_WIDTH:
            raise ValueError(f"unknown ansatz kind {self.kind!r}")
        if len(self.layers) < 1:
            raise ValueError("ansatz needs at least one layer")
        width = _LAYER_WIDTH[self.kind]
        for layer in self.layers:
            if len(layer) != width:
                raise ValueError(
                    f"{self.kind} layer has {len(layer)} parameters, needs {width}"
                )

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def n_params(self) -> int:
        return self.n_layers * _LAYER_WIDTH[self.kind]

    def to_vector(self) -> np.ndarray:
        return np.array([p for layer in self.layers for p in layer], dtype=float)

    @classmethod
    def from_vector(cls, kind: str, vector: np.ndarray) -> "AnsatzParams":
        width = _LAYER_WIDTH[kind]
        vec = np.asarray(vector, dtype=float).ravel()
        if vec.size == 0 or vec.size % width:
            raise ValueError(f"vector of {vec.size} values is not a whole number of layers")
        layers = tuple(tuple(vec[i:i + width]) for i in range(0, vec.size, width))
        return cls(kind, layers)

    @classmethod
    def zeros(cls, kind: str, d: int) -> "AnsatzParams":
        return cls(kind, tuple((0.0,) * _LAYER_WIDTH[kind] for _ in range(d)))

    def with_zero_layer(self) -> "AnsatzParams":
        """Append one identity layer (the optimizer's warm-start move)."""
        return AnsatzParams(self.kind, self.layers + ((0.0,) * _LAYER_WIDTH[self.kind],))

    def interactions(self) -> np.ndarray:
        """Per-layer nonlinear interaction parameter (g or k)."""
        return np.array([layer[-1] for layer in self.layers])


@dataclass(frozen=True)
class InteractionBudget:
    """Total accumulated nonlinear interaction time, sum of |g_j| or |k_j|."""

    total: float


def interaction_budget(params: AnsatzParams) -> InteractionBudget:
    return InteractionBudget(float(np.abs(params.interactions()).sum()))


def _check_layout(params: AnsatzParams, layout: SubsystemLayout) -> None:
    n_qubits = len(layout.qubit_indices)
    n_modes = len(layout.mode_indices)
    if n_modes != 2:
        raise LayoutError("ansatz circuits need a layout with exactly two modes")
    if params.kind == "jc" and n_qubits != 2:
        raise LayoutError("emitter ansatz needs a layout with two qubit factors")
    if params.kind == "kerr" and n_qubits != 0:
        raise LayoutError("kerr ansatz runs on the bare two-mode layout")


def build_circuit(params: AnsatzParams, layout: SubsystemLayout,
                  role: str = "prepare") -> list[LocalGate]:
    """Gate list in application order: tunnel, detune (emitter ansatz), nonlinearity."""
    if role not in ("prepare", "premeasure"):
        raise ValueError(f"unknown circuit role {role!r}")
    _check_layout(params, layout)
    cutoff = layout.cutoff
    m0, m1 = layout.mode_indices
    gates: list[LocalGate] = []
    for layer in params.layers:
        gates.append(tunnel_gate(layer[0], cutoff, (m0, m1)))
        if params.kind == "jc":
            j, delta, g = layer
            q0, q1 = layout.qubit_indices
            gates.append(detune_gate(delta, q0))
            gates.append(detune_gate(delta, q1))
            gates.append(jc_gate(g, cutoff, (q0, m0)))
            gates.append(jc_gate(g, cutoff, (q1, m1)))
        else:
            gates.append(kerr_gate(layer[1], cutoff, m0))
            gates.append(kerr_gate(layer[1], cutoff, m1))
    return gates


def run_circuit(params: AnsatzParams, state: CompositeState) -> CompositeState:
    """Apply the ansatz to a state (zero-parameter gates are skipped)."""
    for gate in build_circuit(params, state.layout):
        state = apply(gate, state)
    return state


def prepare_probe(params: AnsatzParams, n_mean: float,
                  cutoff: int | None = None) -> CompositeState:
    """Run the preparation ansatz on the standard coherent input."""
    if cutoff is None:
        cutoff = int(np.ceil(2 * n_mean))
    return run_circuit(params, coherent_input_state(params.kind, n_mean, cutoff))
