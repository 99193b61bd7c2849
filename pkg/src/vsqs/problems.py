"""Benchmark problem construction, the Hamiltonian file format, and coupling noise.

File format (UTF-8 text, one term per line):

    qubits <n>
    # key=value            (optional metadata, anywhere)
    ini
    <coefficient> <factor>*
    fin
    <coefficient> <factor>*

where a factor is X<i>, Y<i> or Z<i> and an empty factor list denotes the
identity term, e.g. ``-0.0112 Z0 Z1``. Coefficients are written with 17
significant digits so a write/load round trip is bit-exact.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .operators import AXES, PauliTerm, TermList

_FACTOR_RE = re.compile(r"^([XYZ])(\d+)$")


@dataclass(frozen=True)
class AnnealProblem:
    """Initial/final/navigator Hamiltonians plus the accurate-coefficient reference.

    `accurate_h_fin` carries the reference couplings used for every energy
    estimate; it is identical to `h_fin` unless the problem was perturbed
    by control-error noise.
    """

    h_ini: TermList
    h_fin: TermList
    h_nav: TermList | None = None
    accurate_h_fin: TermList | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.accurate_h_fin is None:
            object.__setattr__(self, "accurate_h_fin", self.h_fin)
        lists = [self.h_ini, self.h_fin, self.accurate_h_fin]
        if self.h_nav is not None:
            lists.append(self.h_nav)
        n = {tl.n_qubits for tl in lists}
        if len(n) != 1:
            raise ValueError(f"all TermLists must share n_qubits, got {sorted(n)}")
        fin_words = [t.factors for t in self.h_fin.terms]
        acc_words = [t.factors for t in self.accurate_h_fin.terms]
        if fin_words != acc_words:
            raise ValueError("accurate_h_fin must have the same factor lists as h_fin")

    @property
    def n_qubits(self) -> int:
        return self.h_ini.n_qubits

    @property
    def name(self) -> str:
        return str(self.metadata.get("problem", "unnamed"))


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian coupling noise: xi_i ~ N(mean, stddev), drawn with `seed`."""

    mean: float
    stddev: float
    seed: int = 0

    def __post_init__(self):
        if self.stddev < 0:
            raise ValueError("stddev must be >= 0")


def _parse_term(line: str, n_qubits: int, path, lineno: int) -> PauliTerm:
    parts = line.split()
    try:
        coeff = float(parts[0])
    except ValueError:
        raise ValueError(f"{path}:{lineno}: malformed coefficient in {line!r}")
    factors = []
    for token in parts[1:]:
        m = _FACTOR_RE.match(token)
        if not m:
            raise ValueError(f"{path}:{lineno}: malformed factor {token!r}")
        axis, qubit = m.group(1), int(m.group(2))
        if qubit >= n_qubits:
            raise ValueError(
                f"{path}:{lineno}: qubit index {qubit} >= declared qubits {n_qubits}"
            )
        factors.append((qubit, axis))
    return PauliTerm(coeff, tuple(factors))


def load_hamiltonian(path) -> tuple[TermList, TermList, dict]:
    """Read a .ham file; returns (h_ini, h_fin, metadata)."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].strip().startswith("qubits"):
        raise ValueError(f"{path}: first line must be 'qubits <n>'")
    try:
        n_qubits = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise ValueError(f"{path}: malformed qubits line {lines[0]!r}")
    metadata: dict = {}
    sections: dict[str, list[PauliTerm]] = {}
    current: str | None = None
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, value = body.split("=", 1)
                metadata[key.strip()] = value.strip()
            continue
        if line in ("ini", "fin"):
            if line in sections:
                raise ValueError(f"{path}:{lineno}: duplicate section {line!r}")
            sections[line] = []
            current = line
            continue
        if current is None:
            raise ValueError(f"{path}:{lineno}: term line before any section: {line!r}")
        sections[current].append(_parse_term(line, n_qubits, path, lineno))
    for required in ("ini", "fin"):
        if required not in sections:
            raise ValueError(f"{path}: missing section {required!r}")
    h_ini = TermList(n_qubits, tuple(sections["ini"]))
    h_fin = TermList(n_qubits, tuple(sections["fin"]))
    return h_ini, h_fin, metadata


def format_coefficient(x: float) -> str:
    return f"{float(x):.17g}"


def save_hamiltonian(path, h_ini: TermList, h_fin: TermList, metadata=None) -> None:
    """Write a .ham file in the canonical serialization (17 significant digits)."""
    path = Path(path)
    lines = [f"qubits {h_ini.n_qubits}"]
    for key, value in (metadata or {}).items():
        lines.append(f"# {key}={value}")
    for name, tl in (("ini", h_ini), ("fin", h_fin)):
        lines.append(name)
        for term in tl.terms:
            word = " ".join(f"{ax}{q}" for q, ax in term.factors)
            lines.append(
                f"{format_coefficient(term.coefficient)} {word}".rstrip()
            )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_problem(path) -> AnnealProblem:
    """Load a .ham file into an AnnealProblem, rebuilding any declared navigator.

    The file format carries only ini/fin sections; navigators are rule-based
    and reconstructed from the metadata key ``navigator``:
      - ``xx-edges``: one sigma^x sigma^x term per ZZ coupling edge of h_fin
      - ``gucc``: every non-identity Pauli word of h_fin (unit coefficients)
    """
    h_ini, h_fin, metadata = load_hamiltonian(path)
    problem = AnnealProblem(h_ini=h_ini, h_fin=h_fin, metadata=metadata)
    nav_rule = metadata.get("navigator")
    if nav_rule == "gucc":
        problem = replace(problem, h_nav=navigator_gucc(problem))
    elif nav_rule == "xx-edges":
        problem = replace(problem, h_nav=navigator_xx_edges(problem))
    elif nav_rule is not None:
        raise ValueError(f"{path}: unknown navigator rule {nav_rule!r}")
    return problem


def triangular_strip_edges(per_layer: int) -> tuple[list, list]:
    """Edge lists (intra-layer, inter-layer) for the two-layer triangular strip.

    Each layer is a strip of consecutive triangles on `per_layer` vertices
    (edges (i, i+1) and (i, i+2)); every vertex connects vertically to its
    twin in the other layer.
    """
    intra = []
    for base in (0, per_layer):
        intra.extend((base + i, base + i + 1) for i in range(per_layer - 1))
        intra.extend((base + i, base + i + 2) for i in range(per_layer - 2))
    inter = [(i, per_layer + i) for i in range(per_layer)]
    return intra, inter


def generate_triangular_ising(per_layer: int, seed: int) -> AnnealProblem:
    """Random two-layer triangular-lattice Ising instance.

    Intra-layer couplings are antiferromagnetic, drawn uniformly from (0, 1];
    inter-layer couplings are ferromagnetic, uniform on [-1, 0). The initial
    Hamiltonian is the uniform transverse field and the navigator puts one
    sigma^x sigma^x term on every coupling edge.
    """
    if per_layer < 3:
        raise ValueError(f"per_layer must be >= 3, got {per_layer}")
    rng = np.random.default_rng(seed)
    n = 2 * per_layer
    intra, inter = triangular_strip_edges(per_layer)
    fin_terms = []
    for i, j in intra:
        j_af = 1.0 - rng.random()  # uniform on (0, 1]
        fin_terms.append(PauliTerm(j_af, ((i, "Z"), (j, "Z"))))
    for i, j in inter:
        j_f = rng.random() - 1.0  # uniform on [-1, 0)
        fin_terms.append(PauliTerm(j_f, ((i, "Z"), (j, "Z"))))
    h_fin = TermList(n, tuple(fin_terms))
    h_ini = TermList(n, tuple(PauliTerm(1.0, ((q, "X"),)) for q in range(n)))
    metadata = {
        "problem": "triangular-ising",
        "per_layer": str(per_layer),
        "seed": str(seed),
        "coupling_distribution": "AF uniform (0,1] intra, F uniform [-1,0) inter",
        "navigator": "xx-edges",
    }
    problem = AnnealProblem(h_ini=h_ini, h_fin=h_fin, metadata=metadata)
    return replace(problem, h_nav=navigator_xx_edges(problem))


def navigator_xx_edges(problem: AnnealProblem) -> TermList:
    """sigma^x sigma^x navigator on every ZZ coupling edge of h_fin."""
    terms = []
    for term in problem.h_fin.non_identity_terms:
        if len(term.factors) == 2 and all(ax == "Z" for _, ax in term.factors):
            qubits = tuple(q for q, _ in term.factors)
            terms.append(PauliTerm(1.0, tuple((q, "X") for q in qubits)))
    return TermList(problem.n_qubits, tuple(terms))


def navigator_gucc(problem: AnnealProblem) -> TermList:
    """GUCC-style navigator: every non-identity Pauli word of h_fin.

    Reference coefficients are unity; the variational schedule carries the
    weight of each word.
    """
    terms = tuple(
        PauliTerm(1.0, term.factors) for term in problem.h_fin.non_identity_terms
    )
    return TermList(problem.n_qubits, terms)


def perturb_couplings(problem: AnnealProblem, noise: NoiseSpec) -> AnnealProblem:
    """Control-error model: h_fin couplings get independent Gaussian offsets.

    The identity term and h_ini are untouched; accurate_h_fin keeps the
    original couplings so energy estimates use the accurate coefficients.
    """
    rng = np.random.default_rng(noise.seed)
    perturbed = []
    for term in problem.h_fin.terms:
        if term.is_identity:
            perturbed.append(term)
        else:
            xi = noise.mean + noise.stddev * rng.standard_normal()
            perturbed.append(PauliTerm(term.coefficient + xi, term.factors))
    metadata = dict(problem.metadata)
    metadata["noise"] = f"N({noise.mean},{noise.stddev}) seed={noise.seed}"
    return replace(
        problem,
        h_fin=TermList(problem.n_qubits, tuple(perturbed)),
        accurate_h_fin=problem.accurate_h_fin,
        metadata=metadata,
    )
