"""Gate tallies for one VQP pipeline: state preparation plus S search cycles."""

from __future__ import annotations

from dataclasses import dataclass

from .encoding import synthesize_state_prep
from .mpqc import ParamRef
from .simcore import StateVector
from .vqp import DIFFUSION_TAG, PHASE_TAG, TOFFOLI_TAG, VQPModel, disentangler_gates, oracle_gates, vqp_circuit

TOFFOLI_SINGLES = 10
TOFFOLI_CNOTS = 6


@dataclass
class GateReport:
    state_prep: int
    state_prep_cnot: int
    parameterized: int
    cnot: int
    phase_flip: int
    hadamard: int
    toffoli: int
    toffoli_singles: int
    toffoli_cnots: int
    diffusion_x: int

    @property
    def total(self) -> int:
        """Everything except the X layers of the diffusion."""
        return (self.state_prep + self.parameterized + self.cnot + self.phase_flip + self.hadamard
                + self.toffoli * (self.toffoli_singles + self.toffoli_cnots))

    def rows(self) -> list[tuple[str, int]]:
        return [
            ("state_prep", self.state_prep),
            ("state_prep_cnot", self.state_prep_cnot),
            ("parameterized_single_qubit", self.parameterized),
            ("cnot", self.cnot),
            ("phase_flip", self.phase_flip),
            ("hadamard", self.hadamard),
            ("toffoli", self.toffoli),
            ("toffoli_single_qubit_each", self.toffoli_singles),
            ("toffoli_cnot_each", self.toffoli_cnots),
            ("diffusion_x", self.diffusion_x),
            ("total", self.total),
        ]


def gate_report(model: VQPModel, encoded: StateVector, cycles: int | None = None) -> GateReport:
    """Rotations and MPQC CNOTs are counted once per trainable circuit (the
    disentangler's repeats reuse the same gates); everything in the search
    cycles is counted as executed."""
    trainable = oracle_gates(model) + disentangler_gates(model)
    params = {(g.tag.group, g.tag.index) for g in trainable if isinstance(g.tag, ParamRef)}
    mpqc_cnot = sum(1 for g in trainable if g.kind == "CNOT")
    circuit = vqp_circuit(model, cycles, decompose=True)
    diffusion = [g for g in circuit if g.tag == DIFFUSION_TAG]
    toffoli = [g for g in circuit if g.tag == TOFFOLI_TAG]
    n_toffoli = len(toffoli) // (TOFFOLI_SINGLES + TOFFOLI_CNOTS)
    prep = synthesize_state_prep(encoded)
    return GateReport(
        state_prep=prep.total,
        state_prep_cnot=prep.two_qubit_count,
        parameterized=len(params),
        cnot=mpqc_cnot,
        phase_flip=sum(1 for g in circuit if g.tag == PHASE_TAG),
        hadamard=sum(1 for g in diffusion if g.kind == "H"),
        toffoli=n_toffoli,
        toffoli_singles=sum(1 for g in toffoli if len(g.targets) == 1) // max(n_toffoli, 1),
        toffoli_cnots=sum(1 for g in toffoli if g.kind == "CNOT") // max(n_toffoli, 1),
        diffusion_x=sum(1 for g in diffusion if g.kind == "X"),
    )
