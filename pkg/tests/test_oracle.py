import numpy as np
import pytest

from hypercpf.gatecircuit import STAGES, build_circuit, run_stages
from hypercpf.hyperstate import DEFAULT_MODES, HyperBasisLabel as L, ModeSet, Polarization, Slot, SparseState, Spin
from hypercpf.optics import ElementStep
from hypercpf.oracle import (
    DenseBasis,
    DenseState,
    apply_dense,
    compare_states,
    dense_element_matrix,
    run_dense,
)
from hypercpf.qdcavity import EmitterCoeffs
from hypercpf.verification import input_from, random_amplitudes, random_params

BASIS = DenseBasis(DEFAULT_MODES)
IDEAL = EmitterCoeffs(r0=-1, rh=1, c=-1, f=0)
LOSSY = EmitterCoeffs(r0=0.3 + 0.1j, rh=0.9, c=-0.3 + 0.05j, f=0.6 + 0.05j)
C, T = Slot.CONTROL, Slot.TARGET


@pytest.fixture(scope="module")
def eye():
    return np.eye(BASIS.dim)


def test_basis_dimension_and_round_trip():
    assert BASIS.dims == (2, 9, 2, 9, 2, 2)
    assert BASIS.dim == 1296
    for k in range(0, BASIS.dim, 7):
        assert BASIS.index(BASIS.label(k)) == k


def test_measured_spins_have_no_dense_index():
    with pytest.raises(ValueError):
        BASIS.index(L(Polarization.F, "a1", Polarization.F, "b1", None, None))


def test_hwp_matrix_squares_to_identity(eye):
    m = dense_element_matrix(ElementStep("HWP", ("a12",), slot=C), None, BASIS)
    np.testing.assert_array_equal(m @ m, eye)
    assert not np.array_equal(m, eye)


@pytest.mark.parametrize("spin", [1, 2])
@pytest.mark.parametrize("mode, slot", [("a12", C), ("b22", T)])
def test_qd_matrix_unitary_in_ideal_limit(eye, mode, slot, spin):
    m = dense_element_matrix(ElementStep("QDScatter", (mode,), slot=slot, spin=spin), IDEAL, BASIS)
    assert np.max(np.abs(m.conj().T @ m - eye)) < 1e-12


def test_qd_matrix_not_unitary_when_lossy(eye):
    m = dense_element_matrix(ElementStep("QDScatter", ("a12",), slot=C, spin=1), LOSSY, BASIS)
    assert np.max(np.abs(m.conj().T @ m - eye)) > 1e-3


@pytest.mark.parametrize(
    "ports", [(("a1", None), ("a11", "a12")), (("a11", "a12"), ("a1", "aD1")), (("a22", "a21"), ("a2", "aD3"))]
)
def test_pbs_matrix_is_permutation(eye, ports):
    m = dense_element_matrix(ElementStep("PBS", *ports, slot=C), None, BASIS)
    assert set(np.unique(m)) <= {0, 1}
    np.testing.assert_array_equal(m.sum(axis=0), 1)
    np.testing.assert_array_equal(m.sum(axis=1), 1)


def test_detector_matrix_is_diagonal_projector():
    m = dense_element_matrix(ElementStep("Detector", ("aD2",), slot=C), None, BASIS)
    assert np.count_nonzero(m - np.diag(np.diag(m))) == 0
    assert set(np.unique(np.diag(m))) == {0, 1}
    np.testing.assert_array_equal(m @ m, m)


def test_circulator_matrix_is_identity(eye):
    m = dense_element_matrix(ElementStep("Circulator", ("a21",), slot=C), None, BASIS)
    np.testing.assert_array_equal(m, eye)


def test_matrix_action_equals_contraction(rng):
    vec = rng.normal(size=BASIS.dim) + 1j * rng.normal(size=BASIS.dim)
    state = DenseState(BASIS, vec)
    graph = build_circuit(random_params(rng))
    for _, step in graph.steps():
        m = dense_element_matrix(step, graph.coeffs, BASIS)
        np.testing.assert_allclose(m @ vec, apply_dense(state, step, graph.coeffs).vector, atol=1e-13)


def test_dense_needs_coefficients_for_lossy_elements():
    with pytest.raises(ValueError):
        dense_element_matrix(ElementStep("WFC", ("a11",), slot=C), None, BASIS)


def test_compare_identical_states(random_input):
    _, state = random_input
    report = compare_states(state, DenseState.from_sparse(state))
    assert report.max_discrepancy == 0
    assert report.label is None
    assert report.passed


def test_compare_reports_perturbed_label(random_input):
    _, state = random_input
    dense = DenseState.from_sparse(state)
    label = L(Polarization.S, "a2", Polarization.F, "b1", Spin.DOWN, Spin.UP)
    vec = dense.vector.copy()
    vec[BASIS.index(label)] += 1e-6
    report = compare_states(state, DenseState(BASIS, vec))
    assert report.max_discrepancy == pytest.approx(1e-6, rel=1e-9)
    assert report.label == label
    assert not report.passed


def test_compare_dimension_mismatch():
    small = ModeSet(("x1", "x2"), ("y1", "y2"))
    state = SparseState.from_amplitudes({L(Polarization.F, "x1", Polarization.F, "y1", Spin.UP, Spin.UP): 1}, small)
    with pytest.raises(ValueError, match="dimension"):
        compare_states(state, DenseState.from_sparse(SparseState.empty()))


def test_dense_vector_shape_checked():
    with pytest.raises(ValueError):
        DenseState(BASIS, np.zeros(10, dtype=complex))


def test_full_gate_agrees_at_every_stage(rng):
    for _ in range(5):
        params = random_params(rng)
        state = input_from(random_amplitudes(rng))
        graph = build_circuit(params)
        sparse = run_stages(state, graph)
        dense = run_dense(DenseState.from_sparse(state), graph)
        for name in STAGES:
            assert compare_states(sparse[name], dense[name]).max_discrepancy < 1e-12, name


def test_run_dense_stops_at_upto(random_input):
    _, state = random_input
    out = run_dense(DenseState.from_sparse(state), build_circuit(random_params(np.random.default_rng(1))), "control_stage2")
    assert list(out) == ["control_stage1", "control_stage2"]
