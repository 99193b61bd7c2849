"""Qubit Hamiltonians for the benchmark molecules.

The emitted two-qubit H2 form is

    H_fin = f0 + f1 (Z0 + Z1) + f3 Z0 Z1 + f4 X0 X1
    H_ini = g1 (Z0 + Z1)

built so the four eigenvalues reproduce the Sz = 0 full-CI sector exactly:
the even-parity qubit sector {|00>, |11>} carries the closed-shell pair
(Hartree-Fock and doubly-excited determinants, coupled by the exchange
integral) and the odd sector the two open-shell determinants. g1 is chosen
negative so the h_ini ground state is |00>, the Hartree-Fock state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .electronic import FciResult, ScfResult, hydrogen_integrals, run_fci, run_rhf


@dataclass(frozen=True)
class QubitHamiltonian:
    """A reduced qubit Hamiltonian ready for serialization.

    `ini_terms` / `fin_terms` are lists of (coefficient, factor-string)
    pairs, where the factor string is e.g. "Z0 Z1" and "" is the identity.
    """

    n_qubits: int
    ini_terms: list
    fin_terms: list
    metadata: dict
    fci_energy: float
    hf_energy: float


def _term_matrix(factors: str, n_qubits: int) -> np.ndarray:
    paulis = {
        "X": np.array([[0, 1], [1, 0]], dtype=complex),
        "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    }
    ops = {}
    for token in factors.split():
        ops[int(token[1:])] = paulis[token[0]]
    m = np.array([[1.0]], dtype=complex)
    for k in range(n_qubits - 1, -1, -1):
        m = np.kron(m, ops.get(k, np.eye(2)))
    return m


def dense_from_terms(terms, n_qubits: int) -> np.ndarray:
    out = np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
    for coeff, factors in terms:
        out += coeff * _term_matrix(factors, n_qubits)
    return out


def h2_geometry(d: float):
    return [[0.0, 0.0, 0.0], [0.0, 0.0, float(d)]]


def generate_h2(d: float) -> QubitHamiltonian:
    """Two-qubit H2 Hamiltonian at bond length d (Angstrom)."""
    if d <= 0:
        raise ValueError("bond length must be positive")
    integrals = hydrogen_integrals(h2_geometry(d))
    scf = run_rhf(integrals, 2)
    fci = run_fci(integrals, scf.mo_coeffs, 1, 1)

    h = fci.fock_hamiltonian
    e_nuc = integrals.e_nuclear
    # Fock-space modes: 0 = g(alpha), 1 = u(alpha), 2 = g(beta), 3 = u(beta)
    det_g = (1 << 0) | (1 << 2)     # closed-shell ground  g^2
    det_d = (1 << 1) | (1 << 3)     # doubly excited       u^2
    det_o1 = (1 << 0) | (1 << 3)    # open shell           g(a) u(b)
    det_o2 = (1 << 1) | (1 << 2)    # open shell           u(a) g(b)
    e_g = float(h[det_g, det_g].real) + e_nuc
    e_d = float(h[det_d, det_d].real) + e_nuc
    e_open = float(h[det_o1, det_o1].real) + e_nuc
    k_closed = float(h[det_g, det_d].real)
    k_open = float(h[det_o1, det_o2].real)
    if abs(h[det_o1, det_o1] - h[det_o2, det_o2]) > 1e-12:
        raise AssertionError("open-shell determinants are not degenerate")
    if abs(abs(k_closed) - abs(k_open)) > 1e-12:
        raise AssertionError("sector couplings differ in magnitude")

    f0 = 0.25 * (e_g + e_d) + 0.5 * e_open
    f1 = 0.25 * (e_g - e_d)
    f3 = 0.25 * (e_g + e_d) - 0.5 * e_open
    f4 = abs(k_closed)
    g1 = -0.5 * float(scf.mo_energies[1] - scf.mo_energies[0])

    fin_terms = [
        (f0, ""),
        (f1, "Z0"),
        (f1, "Z1"),
        (f3, "Z0 Z1"),
        (f4, "X0 X1"),
    ]
    ini_terms = [(g1, "Z0"), (g1, "Z1")]

    # the 4x4 must reproduce the Sz=0 FCI sector exactly
    model = dense_from_terms(fin_terms, 2)
    model_evals = np.linalg.eigvalsh(model)
    sector = np.sort(fci.sector_energies)
    if not np.allclose(model_evals, sector, atol=1e-10):
        raise AssertionError(
            f"2-qubit model spectrum {model_evals} != FCI sector {sector}"
        )

    metadata = {
        "species": "H2",
        "geometry": f"linear d={d:.4f} A",
        "basis": "STO-3G",
        "mapping": "Sz=0 sector pair encoding; even parity = closed-shell pair",
        "hf_energy": f"{scf.energy:.12f}",
        "fci_energy": f"{fci.energy:.12f}",
    }
    return QubitHamiltonian(
        n_qubits=2,
        ini_terms=ini_terms,
        fin_terms=fin_terms,
        metadata=metadata,
        fci_energy=fci.energy,
        hf_energy=scf.energy,
    )


def write_hamiltonian(qubit_ham: QubitHamiltonian, path) -> None:
    """Serialize in the simulator's .ham format (17 significant digits)."""
    lines = [f"qubits {qubit_ham.n_qubits}"]
    for key, value in qubit_ham.metadata.items():
        lines.append(f"# {key}={value}")
    for section, terms in (("ini", qubit_ham.ini_terms), ("fin", qubit_ham.fin_terms)):
        lines.append(section)
        for coeff, factors in terms:
            lines.append(f"{float(coeff):.17g} {factors}".rstrip())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
