"""Shared test helpers: independent dense oracles and random generators."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from tcspin.pauli import Operator, PauliString, StateVector

FIXTURE_DIR = Path(__file__).parent / "fixtures"

# Independent of the package's mask-based dense builder: explicit 2x2
# matrices combined with np.kron, site 1 on the least significant index.
PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


def kron_dense(op: Operator) -> np.ndarray:
    dim = 1 << op.n_sites
    total = np.zeros((dim, dim), dtype=complex)
    for term in op.terms:
        mat = np.array([[1.0]], dtype=complex)
        for letter in term.letters():
            mat = np.kron(PAULI_MATRICES[letter], mat)
        total += term.coeff * mat
    return total


def kron_string(letters: str, coeff: complex = 1.0) -> np.ndarray:
    return kron_dense(Operator.from_label_terms([(coeff, letters)]))


def random_operator(rng: np.random.Generator, n_sites: int, n_terms: int, hermitian: bool = True) -> Operator:
    terms = []
    for _ in range(n_terms):
        x = int(rng.integers(0, 1 << n_sites))
        z = int(rng.integers(0, 1 << n_sites))
        if hermitian:
            coeff = complex(rng.standard_normal())
        else:
            coeff = complex(rng.standard_normal(), rng.standard_normal())
        terms.append(PauliString(n_sites, x, z, coeff))
    return Operator(n_sites, tuple(terms))


def random_state(rng: np.random.Generator, n_sites: int) -> StateVector:
    dim = 1 << n_sites
    amps = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return StateVector(n_sites, amps / np.linalg.norm(amps))


def load_or_record_fixture(name: str, payload: str) -> tuple[str, bool]:
    """First verified run records the payload; later runs compare bit-exactly.

    Returns (stored_text, already_existed).
    """
    path = FIXTURE_DIR / name
    if path.exists():
        return path.read_text(), True
    FIXTURE_DIR.mkdir(exist_ok=True)
    path.write_text(payload)
    return payload, False
