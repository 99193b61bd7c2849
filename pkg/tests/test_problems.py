"""Problem construction, file format, and noise-model tests."""

from pathlib import Path

import numpy as np
import pytest

from vsqs.operators import PauliTerm, TermList, exact_ground
from vsqs.problems import (
    AnnealProblem,
    NoiseSpec,
    generate_triangular_ising,
    load_hamiltonian,
    load_problem,
    navigator_gucc,
    navigator_xx_edges,
    perturb_couplings,
    save_hamiltonian,
    triangular_strip_edges,
)

DATA = Path(__file__).resolve().parent.parent / "data"


class TestFileFormat:
    def test_load_bundled_h2(self):
        h_ini, h_fin, metadata = load_hamiltonian(DATA / "h2_d1.00.ham")
        assert h_ini.n_qubits == 2
        assert len(h_ini.terms) == 2
        assert len(h_fin.non_identity_terms) == 4
        words = {t.factors for t in h_fin.terms}
        assert ((0, "X"), (1, "X")) in words
        assert ((0, "Z"), (1, "Z")) in words
        assert metadata["species"] == "H2"

    def test_identity_only_file(self, tmp_path):
        path = tmp_path / "const.ham"
        path.write_text("qubits 1\nini\n1 Z0\nfin\n-2.5\n")
        h_ini, h_fin, _ = load_hamiltonian(path)
        assert h_fin.identity_offset == -2.5
        assert not h_fin.non_identity_terms

    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(17)
        h_ini = TermList(3, tuple(PauliTerm(rng.normal(), ((q, "X"),)) for q in range(3)))
        terms = [PauliTerm(rng.normal() * 1e-3, ())]
        terms += [
            PauliTerm(rng.normal(), ((0, "Z"), (2, "Z"))),
            PauliTerm(rng.normal() / 3.0, ((1, "Y"),)),
        ]
        h_fin = TermList(3, tuple(terms))
        path = tmp_path / "roundtrip.ham"
        save_hamiltonian(path, h_ini, h_fin, {"seed": "17"})
        r_ini, r_fin, metadata = load_hamiltonian(path)
        assert metadata["seed"] == "17"
        for orig, read in ((h_ini, r_ini), (h_fin, r_fin)):
            assert len(orig.terms) == len(read.terms)
            for a, b in zip(orig.terms, read.terms):
                assert a.factors == b.factors
                assert a.coefficient == b.coefficient  # bit-exact

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "bad.ham"
        path.write_text("qubits 2\nini\n1.0 Q0\nfin\n1.0\n")
        with pytest.raises(ValueError, match="malformed factor"):
            load_hamiltonian(path)

    def test_index_out_of_range_rejected(self, tmp_path):
        path = tmp_path / "bad.ham"
        path.write_text("qubits 2\nini\n1.0 Z5\nfin\n1.0\n")
        with pytest.raises(ValueError, match="declared qubits"):
            load_hamiltonian(path)

    def test_duplicate_section_rejected(self, tmp_path):
        path = tmp_path / "bad.ham"
        path.write_text("qubits 1\nini\n1.0 Z0\nini\n1.0 Z0\nfin\n1.0\n")
        with pytest.raises(ValueError, match="duplicate section"):
            load_hamiltonian(path)

    def test_missing_section_rejected(self, tmp_path):
        path = tmp_path / "bad.ham"
        path.write_text("qubits 1\nini\n1.0 Z0\n")
        with pytest.raises(ValueError, match="missing section"):
            load_hamiltonian(path)


class TestAnnealProblem:
    def test_mismatched_qubit_counts_rejected(self):
        with pytest.raises(ValueError, match="n_qubits"):
            AnnealProblem(
                h_ini=TermList(1, (PauliTerm(1.0, ((0, "X"),)),)),
                h_fin=TermList(2, (PauliTerm(1.0, ((0, "Z"),)),)),
            )

    def test_accurate_defaults_to_h_fin(self):
        tl = TermList(1, (PauliTerm(1.0, ((0, "Z"),)),))
        problem = AnnealProblem(h_ini=tl, h_fin=tl)
        assert problem.accurate_h_fin is problem.h_fin

    def test_accurate_word_mismatch_rejected(self):
        z = TermList(1, (PauliTerm(1.0, ((0, "Z"),)),))
        x = TermList(1, (PauliTerm(1.0, ((0, "X"),)),))
        with pytest.raises(ValueError, match="factor lists"):
            AnnealProblem(h_ini=z, h_fin=z, accurate_h_fin=x)


class TestTriangularIsing:
    def test_paper_instance_size(self):
        problem = generate_triangular_ising(4, seed=1)
        assert problem.n_qubits == 8
        intra, inter = triangular_strip_edges(4)
        assert len(intra) == 10 and len(inter) == 4
        assert len(problem.h_fin.terms) == 14
        assert len(problem.h_ini.terms) == 8
        assert len(problem.h_nav.terms) == 14

    def test_coupling_signs(self):
        problem = generate_triangular_ising(3, seed=7)
        intra, inter = triangular_strip_edges(3)
        intra_set = {tuple(e) for e in intra}
        for term in problem.h_fin.terms:
            edge = tuple(q for q, _ in term.factors)
            if edge in intra_set:
                assert 0.0 < term.coefficient <= 1.0  # antiferromagnetic
            else:
                assert -1.0 <= term.coefficient < 0.0  # ferromagnetic

    def test_determinism(self):
        a = generate_triangular_ising(4, seed=11)
        b = generate_triangular_ising(4, seed=11)
        for t1, t2 in zip(a.h_fin.terms, b.h_fin.terms):
            assert t1.coefficient == t2.coefficient

    def test_frustration_witness(self):
        # every intra-layer triangle is all-AF: no assignment satisfies all bonds
        problem = generate_triangular_ising(4, seed=3)
        couplings = {tuple(q for q, _ in t.factors): t.coefficient
                     for t in problem.h_fin.terms}
        tri = (0, 1, 2)
        assert all(
            couplings[e] > 0 for e in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[0], tri[2]))
        )

    def test_too_small_rejected(self):
        with pytest.raises(ValueError, match="per_layer"):
            generate_triangular_ising(2, seed=0)

    def test_serialization_round_trip(self, tmp_path):
        problem = generate_triangular_ising(4, seed=5)
        path = tmp_path / "ising.ham"
        save_hamiltonian(path, problem.h_ini, problem.h_fin, problem.metadata)
        loaded = load_problem(path)
        assert loaded.metadata["seed"] == "5"
        assert loaded.h_nav is not None
        assert len(loaded.h_nav.terms) == len(problem.h_nav.terms)
        for t1, t2 in zip(problem.h_fin.terms, loaded.h_fin.terms):
            assert t1.coefficient == t2.coefficient

    def test_ground_state_matches_brute_force(self):
        # oracle vs exhaustive enumeration of the classical energy
        problem = generate_triangular_ising(4, seed=2024)
        n = problem.n_qubits
        res = exact_ground(problem.h_fin)
        signs = 1 - 2 * ((np.arange(2**n)[:, None] >> np.arange(n)) & 1)
        energies = np.zeros(2**n)
        for term in problem.h_fin.terms:
            i, j = (q for q, _ in term.factors)
            energies += term.coefficient * signs[:, i] * signs[:, j]
        assert res.ground_energy == pytest.approx(energies.min(), abs=1e-10)
        assert res.degeneracy == int(np.sum(energies < energies.min() + 1e-8))


class TestNavigators:
    def test_gucc_for_h2(self):
        problem = load_problem(DATA / "h2_d1.00.ham")
        nav = navigator_gucc(problem)
        words = [t.factors for t in nav.terms]
        assert words == [t.factors for t in problem.h_fin.non_identity_terms]
        assert all(t.coefficient == 1.0 for t in nav.terms)

    def test_gucc_identity_only_is_empty(self):
        tl = TermList(1, (PauliTerm(2.0, ()),))
        ini = TermList(1, (PauliTerm(1.0, ((0, "X"),)),))
        assert not navigator_gucc(AnnealProblem(h_ini=ini, h_fin=tl)).terms

    def test_xx_edges_duplicates_zz_words(self):
        problem = generate_triangular_ising(4, seed=1)
        nav = navigator_xx_edges(problem)
        zz_edges = [tuple(q for q, _ in t.factors) for t in problem.h_fin.terms]
        xx_edges = [tuple(q for q, _ in t.factors) for t in nav.terms]
        assert xx_edges == zz_edges
        assert all(ax == "X" for t in nav.terms for _, ax in t.factors)


class TestPerturbCouplings:
    def test_zero_noise_identity(self):
        problem = load_problem(DATA / "h2_d1.00.ham")
        noisy = perturb_couplings(problem, NoiseSpec(0.0, 0.0, seed=1))
        for a, b in zip(problem.h_fin.terms, noisy.h_fin.terms):
            assert a.coefficient == b.coefficient

    def test_accurate_reference_preserved(self):
        problem = load_problem(DATA / "h2_d1.00.ham")
        noisy = perturb_couplings(problem, NoiseSpec(0.2, 0.2, seed=9))
        for a, b in zip(problem.h_fin.terms, noisy.accurate_h_fin.terms):
            assert a.coefficient == b.coefficient
        # identity untouched, non-identity moved
        assert noisy.h_fin.identity_offset == problem.h_fin.identity_offset
        moved = [
            abs(a.coefficient - b.coefficient)
            for a, b in zip(problem.h_fin.non_identity_terms, noisy.h_fin.non_identity_terms)
        ]
        assert all(m > 0 for m in moved)
        # h_ini untouched
        for a, b in zip(problem.h_ini.terms, noisy.h_ini.terms):
            assert a.coefficient == b.coefficient

    def test_seed_determinism(self):
        problem = load_problem(DATA / "h2_d1.00.ham")
        a = perturb_couplings(problem, NoiseSpec(0.1, 0.3, seed=77))
        b = perturb_couplings(problem, NoiseSpec(0.1, 0.3, seed=77))
        for t1, t2 in zip(a.h_fin.terms, b.h_fin.terms):
            assert t1.coefficient == t2.coefficient

    def test_noise_statistics(self):
        # 1e4 draws: sample mean/stddev within 3 standard errors of (alpha, beta)
        alpha, beta = 0.2, 0.2
        draws = []
        problem = load_problem(DATA / "h2_d1.00.ham")
        base = np.array([t.coefficient for t in problem.h_fin.non_identity_terms])
        for seed in range(2500):
            noisy = perturb_couplings(problem, NoiseSpec(alpha, beta, seed=seed))
            now = np.array([t.coefficient for t in noisy.h_fin.non_identity_terms])
            draws.extend(now - base)
        draws = np.array(draws)
        n = draws.size
        assert abs(draws.mean() - alpha) <= 3 * beta / np.sqrt(n)
        var_se = beta**2 * np.sqrt(2.0 / (n - 1))
        assert abs(draws.var(ddof=1) - beta**2) <= 3 * var_se

    def test_negative_stddev_rejected(self):
        with pytest.raises(ValueError, match="stddev"):
            NoiseSpec(0.0, -1.0)
