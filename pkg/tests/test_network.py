import itertools
import math

import numpy as np
import pytest

from qnnres.linalg import SIGMA_Z, embed, expm_unitary
from qnnres.network import (
    QnnTopology,
    ReservoirSpec,
    TargetState,
    build_collision_hamiltonian,
    build_system_hamiltonian,
    build_unit_unit_hamiltonian,
    check_reservoirs,
    mixture_of,
    predict_pointer_steady_state,
    target_density,
)
from qnnres.states import DOWN, PLUS, UP, PureBlochState, bloch_pure


def total_sz(n):
    return sum(embed(SIGMA_Z, s, n) for s in range(n))


def hamiltonian_oracle(omegas, bonds, n):
    """Matrix elements from basis-state action: diagonal Zeeman part plus hopping between bit flips."""
    d = 2**n
    h = np.zeros((d, d), dtype=complex)
    for idx in range(d):
        bits = format(idx, f"0{n}b")
        for s, w in omegas:
            h[idx, idx] += 0.5 * w * (1 if bits[s] == "0" else -1)
        for a, b, j in bonds:
            if bits[a] != bits[b]:
                flipped = list(bits)
                flipped[a], flipped[b] = bits[b], bits[a]
                h[int("".join(flipped), 2), idx] += j
    return h


def test_topology_validation():
    t = QnnTopology(2, [0.05, 0.04])
    assert t.couplings == (0.05, 0.04) and t.output_site == 2 and t.n_sites == 3
    with pytest.raises(ValueError):
        QnnTopology(0, ())
    with pytest.raises(ValueError):
        QnnTopology(2, (0.05,))
    with pytest.raises(ValueError):
        QnnTopology(1, (1.5,))
    with pytest.raises(ValueError):
        QnnTopology(1, (0.1,), omega=-1)
    with pytest.raises(ValueError):
        QnnTopology(1, (math.nan,))


def test_system_hamiltonian_matches_oracle():
    t = QnnTopology(2, (0.05, 0.03), omega=1.0)
    expected = hamiltonian_oracle([(0, 1), (1, 1), (2, 1)], [(0, 2, 0.05), (1, 2, 0.03)], 3)
    assert np.allclose(build_system_hamiltonian(t), expected)
    bare = hamiltonian_oracle([], [(0, 2, 0.05), (1, 2, 0.03)], 3)
    assert np.allclose(build_system_hamiltonian(t, free_term=False), bare)


def test_collision_hamiltonian_matches_oracle():
    t = QnnTopology(2, (0.05, 0.05))
    specs = [ReservoirSpec(0, UP, 0.05), ReservoirSpec(1, DOWN, 0.02)]
    h = build_collision_hamiltonian(t, specs)
    bonds = [(0, 2, 0.05), (1, 2, 0.05), (0, 3, 0.05), (1, 4, 0.02)]
    assert np.allclose(h, hamiltonian_oracle([(0, 1), (1, 1), (2, 1)], bonds, 5))
    h_free = build_collision_hamiltonian(t, specs, unit_free=True)
    assert np.allclose(h_free, hamiltonian_oracle([(s, 1) for s in range(5)], bonds, 5))


def test_hamiltonians_conserve_excitations():
    t = QnnTopology(3, (0.05, 0.04, 0.03))
    specs = [ReservoirSpec(i, UP, 0.05) for i in range(3)]
    for h, n in [(build_system_hamiltonian(t), 4), (build_collision_hamiltonian(t, specs, unit_free=True), 7)]:
        assert np.allclose(h, h.conj().T)
        z = total_sz(n)
        assert np.max(np.abs(h @ z - z @ h)) < 1e-12


def test_unit_unit_hamiltonian_partial_swap():
    h = build_unit_unit_hamiltonian(0.25)
    # quarter-period evolution is a full swap of |01> and |10> (up to phase)
    u = expm_unitary(h, (math.pi / 2) / 0.25)
    assert abs(u[0b10, 0b01]) == pytest.approx(1.0)
    u = expm_unitary(h, (math.pi / 4) / 0.25)
    assert abs(u[0b10, 0b01]) ** 2 == pytest.approx(0.5)
    with pytest.raises(ValueError):
        build_unit_unit_hamiltonian(math.inf)


def test_reservoir_checks():
    t = QnnTopology(2, (0.05, 0.05))
    with pytest.raises(ValueError, match="duplicate"):
        check_reservoirs(t, [ReservoirSpec(0, UP, 0.05), ReservoirSpec(0, DOWN, 0.05)])
    with pytest.raises(ValueError, match="out of range"):
        check_reservoirs(t, [ReservoirSpec(2, UP, 0.05)])
    with pytest.raises(ValueError):
        ReservoirSpec(-1, UP, 0.05)


def test_target_states():
    m = mixture_of([UP, UP, DOWN])
    assert np.allclose(target_density(m), np.diag([2 / 3, 1 / 3]))
    sup = TargetState("superposition", ((UP, 1 / math.sqrt(2)), (DOWN, 1 / math.sqrt(2))))
    assert np.allclose(target_density(sup), bloch_pure(PLUS))
    with pytest.raises(ValueError):
        TargetState("mixture", ((UP, 0.5), (DOWN, 0.4)))
    with pytest.raises(ValueError):
        TargetState("superposition", ((UP, 1.0), (DOWN, 1.0)))
    with pytest.raises(ValueError):
        TargetState("blend", ((UP, 1.0),))
    with pytest.raises(ValueError):
        TargetState("mixture", ())
    cancel = TargetState("superposition", ((PureBlochState(0), 1 / math.sqrt(2)), (PureBlochState(0), -1 / math.sqrt(2))))
    with pytest.raises(ValueError, match="vanishing"):
        target_density(cancel)


@pytest.mark.parametrize("n_up,n_down", [(n, k) for n, k in itertools.product(range(4), repeat=2) if 0 < n + k <= 3])
def test_pointer_prediction(n_up, n_down):
    rho = predict_pointer_steady_state(n_up, n_down)
    assert rho[0, 0] == pytest.approx(n_up / (n_up + n_down))
    assert np.trace(rho) == pytest.approx(1.0)


def test_pointer_prediction_errors():
    with pytest.raises(ValueError):
        predict_pointer_steady_state(0, 0)
    with pytest.raises(ValueError):
        predict_pointer_steady_state(-1, 2)
