"""Mach-Zehnder phase encoding on the two mode factors.

The interferometer is U(phi) = BS . PD(phi) . BS with a symmetric beam
splitter BS = exp(-i (pi/4)(a2†a1 + a1†a2)) and a differential phase
PD(phi) = exp(-i (phi/2)(n2 - n1)).  Emitter factors, when present, ride
along untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import LocalGate, apply, tunnel_gate
from .hilbert import CompositeState, LayoutError

DEFAULT_PHI = np.pi / 3


@dataclass(frozen=True)
class PhaseFamily:
    """Encoded state and its exact phase derivative at one phase point."""

    state: CompositeState
    derivative: CompositeState
    phi: float


def beam_splitter_gate(cutoff: int, modes: tuple[int, int] | None = None) -> LocalGate:
    """Symmetric beam splitter: tunneling at j = pi/4."""
    gate = tunnel_gate(np.pi / 4, cutoff, modes)
    return LocalGate("bs", gate.targets, basis=gate.basis, phases=gate.phases)


def phase_diff_gate(phi: float, cutoff: int,
                    modes: tuple[int, int] | None = None) -> LocalGate:
    """Differential phase exp(-i (phi/2)(n2 - n1)) on the mode pair."""
    n = np.arange(cutoff)
    diag = np.exp(-0.5j * phi * (n[None, :] - n[:, None])).ravel()
    return LocalGate("phase_diff", modes, diag=diag, identity=(phi == 0.0))


def _diff_number_scaled(state: CompositeState) -> CompositeState:
    """(-i/2)(n2 - n1) |state>, the generator insertion for d/dphi."""
    layout = state.layout
    m1, m2 = layout.mode_indices
    n = np.arange(layout.cutoff)
    shape = [1] * len(layout.dims)
    shape[m1], shape[m2] = layout.cutoff, layout.cutoff
    factor = (-0.5j) * (n[None, :] - n[:, None])
    amps = (state.tensor() * factor.reshape(shape)).reshape(-1)
    return CompositeState(layout, amps, check_norm=False)


def _require_two_modes(state: CompositeState) -> int:
    if len(state.layout.mode_indices) != 2:
        raise LayoutError("phase encoding needs a layout with exactly two modes")
    return state.layout.cutoff


def _encode_from_mixed(chi: CompositeState, phi: float) -> CompositeState:
    """Finish the interferometer given chi = BS |psi_P>."""
    cutoff = chi.layout.cutoff
    state = apply(phase_diff_gate(phi, cutoff), chi)
    return apply(beam_splitter_gate(cutoff), state)


def encode(state: CompositeState, phi: float) -> CompositeState:
    """|psi_E(phi)> = BS . PD(phi) . BS |psi_P>."""
    cutoff = _require_two_modes(state)
    return _encode_from_mixed(apply(beam_splitter_gate(cutoff), state), phi)


def encode_derivative(state: CompositeState, phi: float) -> CompositeState:
    """Exact d/dphi of the encoded state (unnormalized tangent vector).

    Equals BS . (-i/2)(n2 - n1) . PD(phi) . BS |psi_P> because only the
    differential phase depends on phi.
    """
    cutoff = _require_two_modes(state)
    chi = apply(beam_splitter_gate(cutoff), state)
    chi = apply(phase_diff_gate(phi, cutoff), chi)
    chi = _diff_number_scaled(chi)
    return apply(beam_splitter_gate(cutoff), chi)


def encoded_family(state: CompositeState, phi: float = DEFAULT_PHI) -> PhaseFamily:
    """Encoded state together with its phase derivative at ``phi``."""
    return PhaseFamily(encode(state, phi), encode_derivative(state, phi), phi)
