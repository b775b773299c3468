"""Turn a ScenarioConfig into operators, generator and initial state."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .errors import ArgumentError, ConfigError
from .hilbert import DensityMatrix, Operator
from .lindblad import (GeneratorSpec, generator_cascade, generator_indirect, generator_single,
                       indirect_parts)
from .models import (BathSpec, CouplingSpec, FockSpace, InteractionSpec, initial_state,
                     local_hamiltonians, system_hamiltonian, thermal_state,
                     xx_interaction)

SITE_LABELS = "ABCDEFGHIJ"


@dataclass(frozen=True)
class Setup:
    """Everything a run needs; shared by the discrete and continuous engines.

    ``interaction`` acts on the subsystems in ``bath_sites`` (in collision
    order); ``h_ab`` is the intra-system Hamiltonian of indirect scenarios.
    """

    kind: str
    dims: tuple[int, ...]
    bath: BathSpec
    coupling: CouplingSpec
    h_locals: tuple[Operator, ...]
    h_system: Operator
    interaction: InteractionSpec
    bath_sites: tuple[int, ...]
    rho0: DensityMatrix
    generator: GeneratorSpec
    h_ab: Operator | None = None
    fock: FockSpace | None = None

    @property
    def n_sites(self) -> int:
        return len(self.dims)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(SITE_LABELS[k] for k in range(self.n_sites))

    @property
    def rate(self) -> float:
        return self.coupling.gamma_g if self.kind.startswith("indirect") else self.coupling.gamma

    @property
    def gamma_eff(self) -> float:
        """Configured collision rate; sets default steps and tolerances."""
        return self.rate

    def meta(self) -> dict:
        return {"scenario": self.kind, "bath": self.bath, "coupling": self.coupling}


def build_setup(config: ScenarioConfig, coupling: CouplingSpec | None = None) -> Setup:
    """Assemble the model for ``config``; ``coupling`` overrides the continuous one."""
    bath = config.bath()
    coupling = coupling or config.coupling()
    kind = config.scenario
    h_ab = fock = None
    if kind == "single":
        dims = (2,)
        gen = generator_single(bath, coupling)
        inter, sites = xx_interaction(), (0,)
    elif kind == "cascade":
        dims = (2,) * config.n_qubits
        gen = generator_cascade(config.n_qubits, bath, coupling)
        inter, sites = xx_interaction(), tuple(range(config.n_qubits))
    else:
        sub = kind.split("_", 1)[1]
        fock = FockSpace(config.fock_dim) if sub == "oscillator" else None
        dims, h_ab, inter = indirect_parts(sub, bath, coupling, fock)
        gen = generator_indirect(sub, bath, coupling, fock)
        sites = (1,)
    h_locals = tuple(local_hamiltonians(dims, bath.omega))
    h_system = system_hamiltonian(h_locals)
    try:
        rho0 = initial_state(config.default_initial_state, dims, bath, h_locals)
    except ArgumentError as exc:
        raise ConfigError(str(exc), key="state.initial",
                          line=config.lines.get("state.initial")) from None
    return Setup(kind, tuple(dims), bath, coupling, h_locals, h_system, inter, sites, rho0,
                 gen, h_ab, fock)


def reference_state(setup: Setup) -> DensityMatrix:
    """Fixed point exp(-beta H_S)/Z with the literal diagonal state for an inverted bath."""
    mats = []
    for h in setup.h_locals:
        if h.dim == 2:
            mats.append(setup.bath.state().mat)
        else:
            mats.append(thermal_state(h, setup.bath.beta).mat)
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return DensityMatrix(out, setup.dims, check=False)
