"""Minimal-basis electronic structure for hydrogen clusters.

Everything is s-type STO-3G, for which overlap, kinetic, nuclear-attraction
and two-electron integrals have closed forms in the Boys function F0. RHF
runs over the contracted AO basis; the FCI oracle assembles the second-
quantized Hamiltonian as a dense matrix over the full Fock space via
Jordan-Wigner ladder matrices and diagonalizes the requested particle
sector exactly. Desk scale only (<= 4 orbitals here), where dense Fock
space (256 x 256) is trivial.

Distances are in Angstrom at the API boundary, converted to Bohr inside;
energies are Hartree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

BOHR_PER_ANGSTROM = 1.8897259886

# STO-3G hydrogen 1s: primitive exponents (zeta = 1.24 scaling folded in)
# and contraction coefficients.
H_EXPONENTS = np.array([3.42525091, 0.62391373, 0.16885540])
H_COEFFS = np.array([0.15432897, 0.53532814, 0.44463454])


def _boys_f0(t: np.ndarray | float):
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    mask = t > 1e-12
    tm = t[mask]
    out[mask] = 0.5 * np.sqrt(np.pi / tm) * erf(np.sqrt(tm))
    return out


@dataclass(frozen=True)
class IntegralSet:
    """AO integrals plus nuclear repulsion for a hydrogen cluster."""

    overlap: np.ndarray
    kinetic: np.ndarray
    nuclear: np.ndarray
    eri: np.ndarray  # chemists' notation (pq|rs)
    e_nuclear: float

    @property
    def core(self) -> np.ndarray:
        return self.kinetic + self.nuclear

    @property
    def n_orbitals(self) -> int:
        return self.overlap.shape[0]


def hydrogen_integrals(centers_angstrom) -> IntegralSet:
    """STO-3G integrals for hydrogen atoms at the given 3D positions."""
    centers = np.asarray(centers_angstrom, dtype=float) * BOHR_PER_ANGSTROM
    n_atoms = len(centers)
    # one contracted s function per atom; flatten primitives
    prim_alpha, prim_coeff, prim_center, prim_ao = [], [], [], []
    for atom in range(n_atoms):
        for a, d in zip(H_EXPONENTS, H_COEFFS):
            norm = (2.0 * a / np.pi) ** 0.75
            prim_alpha.append(a)
            prim_coeff.append(d * norm)
            prim_center.append(centers[atom])
            prim_ao.append(atom)
    alpha = np.array(prim_alpha)
    coeff = np.array(prim_coeff)
    pos = np.array(prim_center)
    ao = np.array(prim_ao)
    n_prim = len(alpha)

    s = np.zeros((n_atoms, n_atoms))
    t = np.zeros((n_atoms, n_atoms))
    v = np.zeros((n_atoms, n_atoms))
    for i in range(n_prim):
        for j in range(n_prim):
            a, b = alpha[i], alpha[j]
            p = a + b
            mu = a * b / p
            rab2 = float(np.sum((pos[i] - pos[j]) ** 2))
            pref = coeff[i] * coeff[j] * np.exp(-mu * rab2)
            s_ij = pref * (np.pi / p) ** 1.5
            t_ij = mu * (3.0 - 2.0 * mu * rab2) * s_ij
            centroid = (a * pos[i] + b * pos[j]) / p
            v_ij = 0.0
            for c in centers:
                rpc2 = float(np.sum((centroid - c) ** 2))
                v_ij -= pref * (2.0 * np.pi / p) * float(_boys_f0(p * rpc2))
            s[ao[i], ao[j]] += s_ij
            t[ao[i], ao[j]] += t_ij
            v[ao[i], ao[j]] += v_ij

    eri = np.zeros((n_atoms,) * 4)
    for i in range(n_prim):
        for j in range(n_prim):
            a, b = alpha[i], alpha[j]
            p = a + b
            rab2 = float(np.sum((pos[i] - pos[j]) ** 2))
            kab = np.exp(-a * b / p * rab2)
            pab = (a * pos[i] + b * pos[j]) / p
            cij = coeff[i] * coeff[j]
            for k in range(n_prim):
                for l in range(n_prim):
                    c, d = alpha[k], alpha[l]
                    q = c + d
                    rcd2 = float(np.sum((pos[k] - pos[l]) ** 2))
                    kcd = np.exp(-c * d / q * rcd2)
                    pcd = (c * pos[k] + d * pos[l]) / q
                    rpq2 = float(np.sum((pab - pcd) ** 2))
                    val = (
                        cij * coeff[k] * coeff[l] * kab * kcd
                        * 2.0 * np.pi**2.5
                        / (p * q * np.sqrt(p + q))
                        * float(_boys_f0(p * q / (p + q) * rpq2))
                    )
                    eri[ao[i], ao[j], ao[k], ao[l]] += val

    e_nuc = 0.0
    for i in range(n_atoms):
        for j in range(i + 1, n_atoms):
            e_nuc += 1.0 / float(np.linalg.norm(centers[i] - centers[j]))
    return IntegralSet(overlap=s, kinetic=t, nuclear=v, eri=eri, e_nuclear=e_nuc)


@dataclass(frozen=True)
class ScfResult:
    energy: float  # total RHF energy incl. nuclear repulsion
    mo_coeffs: np.ndarray  # columns are MOs in the AO basis
    mo_energies: np.ndarray
    n_electrons: int

    @property
    def n_occupied(self) -> int:
        return self.n_electrons // 2


def run_rhf(
    integrals: IntegralSet,
    n_electrons: int,
    max_cycles: int = 200,
    conv_tol: float = 1e-12,
    damping: float = 0.35,
) -> ScfResult:
    """Closed-shell RHF with symmetric orthogonalization and density damping."""
    if n_electrons % 2:
        raise ValueError("RHF needs an even electron count")
    n_occ = n_electrons // 2
    s_val, s_vec = np.linalg.eigh(integrals.overlap)
    x = s_vec @ np.diag(s_val**-0.5) @ s_vec.T
    h = integrals.core
    eri = integrals.eri

    def fock(density):
        j = np.einsum("pqrs,rs->pq", eri, density)
        k = np.einsum("prqs,rs->pq", eri, density)
        return h + j - 0.5 * k

    def density_from(f):
        f_ortho = x.T @ f @ x
        e_mo, c_ortho = np.linalg.eigh(f_ortho)
        c = x @ c_ortho
        occ = c[:, :n_occ]
        return 2.0 * occ @ occ.T, e_mo, c

    density, _, _ = density_from(h)
    energy = 0.0
    for cycle in range(max_cycles):
        f = fock(density)
        new_density, e_mo, c = density_from(f)
        if cycle > 0:
            new_density = (1.0 - damping) * new_density + damping * density
        new_energy = 0.5 * np.einsum("pq,pq->", new_density, h + fock(new_density))
        if abs(new_energy - energy) < conv_tol and np.max(
            np.abs(new_density - density)
        ) < 1e-9:
            density = new_density
            energy = new_energy
            break
        density, energy = new_density, new_energy
    # final clean diagonalization without damping
    f = fock(density)
    _, e_mo, c = density_from(f)
    e_elec = 0.5 * np.einsum("pq,pq->", density, h + f)
    return ScfResult(
        energy=float(e_elec + integrals.e_nuclear),
        mo_coeffs=c,
        mo_energies=e_mo,
        n_electrons=n_electrons,
    )


def mo_integrals(integrals: IntegralSet, mo_coeffs: np.ndarray):
    """(h_pq, (pq|rs)) in the MO basis, chemists' notation."""
    c = mo_coeffs
    h_mo = c.T @ integrals.core @ c
    eri_mo = np.einsum(
        "pi,qj,pqrs,rk,sl->ijkl", c, c, integrals.eri, c, c, optimize=True
    )
    return h_mo, eri_mo


def _jw_annihilators(n_modes: int) -> list[np.ndarray]:
    """Dense Jordan-Wigner annihilation matrices; mode k lives in bit k."""
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])
    z = np.diag([1.0, -1.0])
    eye = np.eye(2)
    ops = []
    for k in range(n_modes):
        m = np.array([[1.0]])
        for bit in range(n_modes - 1, -1, -1):
            if bit == k:
                factor = lower
            elif bit < k:
                factor = z
            else:
                factor = eye
            m = np.kron(m, factor)
        ops.append(m)
    return ops


def fock_space_hamiltonian(h_mo: np.ndarray, eri_mo: np.ndarray) -> np.ndarray:
    """Dense electronic Hamiltonian over the full Fock space.

    Spin-orbital ordering is blocked: alpha spins occupy modes 0..K-1 and
    beta spins K..2K-1 for K spatial orbitals. Nuclear repulsion is NOT
    included.
    """
    n_orb = h_mo.shape[0]
    n_modes = 2 * n_orb
    ann = _jw_annihilators(n_modes)
    cre = [a.T for a in ann]  # real matrices

    def mode(p, spin):
        return p + spin * n_orb

    dim = 2**n_modes
    h = np.zeros((dim, dim))
    for p in range(n_orb):
        for q in range(n_orb):
            if abs(h_mo[p, q]) < 1e-14:
                continue
            for spin in (0, 1):
                h += h_mo[p, q] * cre[mode(p, spin)] @ ann[mode(q, spin)]
    for p in range(n_orb):
        for q in range(n_orb):
            for r in range(n_orb):
                for s in range(n_orb):
                    val = eri_mo[p, q, r, s]
                    if abs(val) < 1e-14:
                        continue
                    for sp in (0, 1):
                        for tau in (0, 1):
                            h += (
                                0.5
                                * val
                                * cre[mode(p, sp)]
                                @ cre[mode(r, tau)]
                                @ ann[mode(s, tau)]
                                @ ann[mode(q, sp)]
                            )
    return h


def sector_indices(n_orb: int, n_alpha: int, n_beta: int) -> np.ndarray:
    """Fock-space basis indices with the requested alpha/beta occupation."""
    n_modes = 2 * n_orb
    idx = []
    for state in range(2**n_modes):
        alpha = bin(state & ((1 << n_orb) - 1)).count("1")
        beta = bin(state >> n_orb).count("1")
        if alpha == n_alpha and beta == n_beta:
            idx.append(state)
    return np.array(idx)


@dataclass(frozen=True)
class FciResult:
    energy: float  # total ground energy incl. nuclear repulsion
    sector_energies: np.ndarray  # all eigenvalues in the requested sector
    sector_states: np.ndarray  # eigenvectors (columns) in the sector basis
    sector_basis: np.ndarray  # Fock-space indices of the sector determinants
    fock_hamiltonian: np.ndarray  # electronic part, full Fock space


def run_fci(
    integrals: IntegralSet, mo_coeffs: np.ndarray, n_alpha: int, n_beta: int
) -> FciResult:
    """Exact diagonalization in the (n_alpha, n_beta) determinant sector."""
    h_mo, eri_mo = mo_integrals(integrals, mo_coeffs)
    h_fock = fock_space_hamiltonian(h_mo, eri_mo)
    basis = sector_indices(h_mo.shape[0], n_alpha, n_beta)
    block = h_fock[np.ix_(basis, basis)]
    evals, evecs = np.linalg.eigh(block)
    return FciResult(
        energy=float(evals[0] + integrals.e_nuclear),
        sector_energies=evals + integrals.e_nuclear,
        sector_states=evecs,
        sector_basis=basis,
        fock_hamiltonian=h_fock,
    )
