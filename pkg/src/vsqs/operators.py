"""Pauli-string algebra, dense operator construction, and the exact-diagonalization oracle.

Hamiltonians are real-weighted sums of Pauli words. Everything here is
immutable and pure; the dense path (`build_dense`, `exact_ground`) is the
ground-truth oracle, the matrix-free path (`apply_terms`, `expectation`)
is what propagation uses.

Basis convention: computational basis index i encodes qubit k in bit k
(qubit 0 is the least significant bit), so |i> = |b_{n-1}> ... |b_0>.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

AXES = ("X", "Y", "Z")

MAX_DENSE_QUBITS = 14

_PAULI_1Q = {
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}

_EYE_1Q = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class PauliTerm:
    """One real-weighted tensor product of Pauli operators.

    `factors` is kept in index-sorted canonical form; equality and hashing
    are defined on that form. An empty factor list is the identity term
    (a classical energy offset).
    """

    coefficient: float
    factors: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        coeff = float(self.coefficient)
        if not np.isfinite(coeff):
            raise ValueError(f"non-finite coefficient: {self.coefficient!r}")
        factors = tuple((int(q), str(ax)) for q, ax in self.factors)
        for q, ax in factors:
            if q < 0:
                raise ValueError(f"negative qubit index: {q}")
            if ax not in AXES:
                raise ValueError(f"unknown Pauli axis: {ax!r}")
        indices = [q for q, _ in factors]
        if len(set(indices)) != len(indices):
            raise ValueError(f"repeated qubit index in factors: {factors!r}")
        factors = tuple(sorted(factors))
        object.__setattr__(self, "coefficient", coeff)
        object.__setattr__(self, "factors", factors)

    @property
    def is_identity(self) -> bool:
        return not self.factors

    @property
    def max_qubit(self) -> int:
        return self.factors[-1][0] if self.factors else -1

    def scaled(self, factor: float) -> "PauliTerm":
        return PauliTerm(self.coefficient * factor, self.factors)

    def __str__(self) -> str:
        if self.is_identity:
            return f"{self.coefficient:+g} I"
        word = " ".join(f"{ax}{q}" for q, ax in self.factors)
        return f"{self.coefficient:+g} {word}"


@dataclass(frozen=True)
class TermList:
    """A Hamiltonian: `n_qubits` and a list of Pauli terms.

    Terms with identical factor lists are merged (coefficients summed) at
    construction, preserving first-seen order.
    """

    n_qubits: int
    terms: tuple[PauliTerm, ...] = ()

    def __post_init__(self):
        n = int(self.n_qubits)
        if n < 1:
            raise ValueError(f"n_qubits must be positive, got {n}")
        if n > MAX_DENSE_QUBITS:
            raise ValueError(
                f"n_qubits={n} exceeds the desk-scale cap of {MAX_DENSE_QUBITS}"
            )
        merged: dict[tuple, PauliTerm] = {}
        for term in self.terms:
            if not isinstance(term, PauliTerm):
                term = PauliTerm(*term)
            if term.max_qubit >= n:
                raise ValueError(
                    f"term {term} acts on qubit {term.max_qubit} "
                    f"but n_qubits={n}"
                )
            if term.factors in merged:
                old = merged[term.factors]
                merged[term.factors] = PauliTerm(
                    old.coefficient + term.coefficient, term.factors
                )
            else:
                merged[term.factors] = term
        object.__setattr__(self, "n_qubits", n)
        object.__setattr__(self, "terms", tuple(merged.values()))

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    @property
    def identity_offset(self) -> float:
        """Sum of identity-term coefficients (the classical energy offset)."""
        return sum(t.coefficient for t in self.terms if t.is_identity)

    @property
    def non_identity_terms(self) -> tuple[PauliTerm, ...]:
        return tuple(t for t in self.terms if not t.is_identity)

    def scaled(self, factor: float) -> "TermList":
        return TermList(self.n_qubits, tuple(t.scaled(factor) for t in self.terms))

    def __str__(self) -> str:
        body = " ".join(str(t) for t in self.terms) or "0"
        return f"<{self.n_qubits}q: {body}>"


@dataclass(frozen=True)
class SpectrumResult:
    """Ground energy and (possibly degenerate) ground space from the dense oracle."""

    ground_energy: float
    ground_space: np.ndarray  # shape (dim, k), orthonormal columns
    eigenvalues: np.ndarray | None = None

    @property
    def degeneracy(self) -> int:
        return self.ground_space.shape[1]

    @property
    def ground_state(self) -> np.ndarray:
        return self.ground_space[:, 0]


def _check_dense_size(terms: TermList) -> None:
    if terms.n_qubits > MAX_DENSE_QUBITS:
        raise ValueError(
            f"problem too large for dense oracle (n_qubits={terms.n_qubits} > "
            f"{MAX_DENSE_QUBITS})"
        )


def build_dense(terms: TermList) -> np.ndarray:
    """Dense 2^n x 2^n Hermitian matrix of the TermList."""
    _check_dense_size(terms)
    n = terms.n_qubits
    out = np.zeros((terms.dim, terms.dim), dtype=complex)
    for term in terms.terms:
        ops = {q: _PAULI_1Q[ax] for q, ax in term.factors}
        m = np.array([[term.coefficient]], dtype=complex)
        for k in range(n - 1, -1, -1):
            m = np.kron(m, ops.get(k, _EYE_1Q))
        out += m
    return out


def apply_terms(terms: TermList, state: np.ndarray) -> np.ndarray:
    """Matrix-free H @ state.

    Agrees with build_dense(terms) @ state to ~1e-12 per amplitude; this is
    the path used for expectation values, so no dense matrix is ever formed.
    """
    state = np.asarray(state, dtype=complex)
    if state.shape != (terms.dim,):
        raise ValueError(
            f"state has shape {state.shape}, expected ({terms.dim},) "
            f"for n_qubits={terms.n_qubits}"
        )
    idx = np.arange(terms.dim)
    out = np.zeros_like(state)
    scratch = np.empty_like(state)
    for term in terms.terms:
        if term.is_identity:
            out += term.coefficient * state
            continue
        phase = np.full(terms.dim, term.coefficient, dtype=complex)
        flip = 0
        for q, ax in term.factors:
            if ax == "X":
                flip ^= 1 << q
            else:
                sign = 1.0 - 2.0 * ((idx >> q) & 1)
                if ax == "Z":
                    phase *= sign
                else:  # Y: flips the bit and carries i*(-1)^bit
                    phase *= 1.0j * sign
                    flip ^= 1 << q
        if flip:
            scratch[idx ^ flip] = phase * state
            out += scratch
        else:
            out += phase * state
    return out


def expectation(terms: TermList, state: np.ndarray) -> float:
    """<state|H|state> for a normalized state. Returns a real energy."""
    state = np.asarray(state, dtype=complex)
    norm = np.linalg.norm(state)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"state is not normalized: ||state|| = {norm!r}")
    value = np.vdot(state, apply_terms(terms, state))
    if abs(value.imag) > 1e-10:
        raise AssertionError(
            f"expectation of a Hermitian TermList came out complex: {value!r}"
        )
    return float(value.real)


def exact_ground(
    terms: TermList,
    degeneracy_tol: float = 1e-8,
    full_spectrum: bool = False,
) -> SpectrumResult:
    """Dense-diagonalization oracle: ground energy and ground space.

    The ground space spans every eigenvector with eigenvalue within
    `degeneracy_tol` of the minimum.
    """
    _check_dense_size(terms)
    evals, evecs = np.linalg.eigh(build_dense(terms))
    e0 = float(evals[0])
    k = int(np.searchsorted(evals, e0 + degeneracy_tol, side="right"))
    return SpectrumResult(
        ground_energy=e0,
        ground_space=evecs[:, :k].copy(),
        eigenvalues=evals.copy() if full_spectrum else None,
    )


def qubitwise_commutes(a: PauliTerm, b: PauliTerm) -> bool:
    """True if the two words agree (or are identity) on every shared qubit."""
    axes_a = dict(a.factors)
    for q, ax in b.factors:
        if axes_a.get(q, ax) != ax:
            return False
    return True


def qubitwise_commuting_groups(terms: TermList) -> list[list[int]]:
    """Greedy first-fit partition of term indices into qubit-wise commuting groups."""
    groups: list[list[int]] = []
    for i, term in enumerate(terms.terms):
        for group in groups:
            if all(qubitwise_commutes(term, terms.terms[j]) for j in group):
                group.append(i)
                break
        else:
            groups.append([i])
    return groups
