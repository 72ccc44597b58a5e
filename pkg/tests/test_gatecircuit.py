from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypercpf import optics
from hypercpf.gatecircuit import (
    CHECKPOINTS,
    STAGES,
    GateInoperativeError,
    ModeGraph,
    build_circuit,
    checkpoint_state,
    closed_form_applies,
    efficiency_closed_form,
    efficiency_from_coeffs,
    efficiency_pipeline,
    ideal_hyper_cpf,
    photon_part,
    reference_checkpoint,
    run_hyper_cpf,
    run_stages,
)
from hypercpf.hyperstate import (
    HyperBasisLabel as L,
    Polarization,
    Slot,
    SparseState,
    make_input_state,
    max_abs_difference,
)
from hypercpf.optics import ElementKind, ElementStep, FeedForwardOp, project_spins
from hypercpf.qdcavity import CavityParams, EmitterCoeffs, emitter_coefficients
from hypercpf.verification import input_from, random_amplitudes, random_params

F, S = Polarization.F, Polarization.S
ETA_G24 = 0.9659462506152195  # 65536 * (5.76 / 23.14)**8

GENERIC = CavityParams(g=0.8, kappa_s=0.4, gamma=0.2, p=0.85, omega_cavity=0.3, omega_exciton=-0.2)
IDEAL = CavityParams(g=1e8, gamma=0.0)


def photon(state, outcome):
    return project_spins(state, outcome)


# ---------------------------------------------------------------------------
# graph
# ---------------------------------------------------------------------------


def test_graph_is_well_formed():
    graph = build_circuit(GENERIC)
    graph.validate()
    assert graph.detectors == ("aD1", "aD2", "aD3", "bD1", "bD2", "bD3")
    assert tuple(graph.stages) == STAGES
    kinds = [s.kind for _, s in graph.steps("control_stage1")]
    assert kinds.count(ElementKind.QD_SCATTER) == 2
    assert [s.name for _, s in graph.steps("target_stage2")][-1] == "PBS5"


def test_target_pass_mirrors_control_pass():
    graph = build_circuit()
    for c_stage, t_stage in (("control_stage1", "target_stage1"), ("control_stage2", "target_stage2")):
        for cs, ts in zip(graph.stages[c_stage], graph.stages[t_stage]):
            assert (cs.kind, cs.spin, cs.name) == (ts.kind, ts.spin, ts.name)
            assert [m and "b" + m[1:] for m in cs.in_modes] == list(ts.in_modes)


def _mutated(graph, stage, steps):
    stages = dict(graph.stages)
    stages[stage] = steps
    return ModeGraph(graph.modes, stages, graph.coeffs)


def test_validate_rejects_undeclared_mode():
    graph = build_circuit()
    bad = graph.stages["control_stage1"] + (ElementStep("HWP", ("a99",), slot=Slot.CONTROL),)
    with pytest.raises(ValueError, match="undeclared"):
        _mutated(graph, "control_stage1", bad).validate()


def test_validate_rejects_detector_with_outgoing_step():
    graph = build_circuit()
    bad = graph.stages["control_stage2"] + (ElementStep("HWP", ("aD1",), slot=Slot.CONTROL),)
    with pytest.raises(ValueError, match="detector"):
        _mutated(graph, "control_stage2", bad).validate()


def test_validate_rejects_unreachable_mode():
    graph = build_circuit()
    bad = tuple(s for s in graph.stages["control_stage2"] if s.name != "PBS4")
    with pytest.raises(ValueError, match="unreachable"):
        _mutated(graph, "control_stage2", bad).validate()


def test_run_stages_needs_coefficients():
    with pytest.raises(ValueError):
        run_stages(make_input_state((1, 0), (1, 0), (1, 0), (1, 0)), build_circuit())


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def test_stage1_basis_input_f_a1():
    state = make_input_state((1, 0), (1, 0), (1, 0), (1, 0))
    c = emitter_coefficients(GENERIC).c
    out = checkpoint_state("after_stage1", state, GENERIC)
    assert photon(out, "++").amplitudes == pytest.approx({L(F, "a11", F, "b1", None, None): c})
    for o in ("+-", "-+", "--"):
        assert photon(out, o).norm_sq() < 1e-30


def test_stage1_basis_input_s_a2():
    state = make_input_state((0, 1), (0, 1), (1, 0), (1, 0))
    co = emitter_coefficients(GENERIC)
    out = checkpoint_state("after_stage1", state, GENERIC)
    assert photon(out, "-+").amplitudes == pytest.approx({L(F, "a21", F, "b1", None, None): co.c})
    assert photon(out, "++").amplitudes == pytest.approx({L(S, "a21", F, "b1", None, None): co.f})


def test_stage1_term_list_has_six_photon_terms(rng):
    amps = random_amplitudes(rng)
    state = input_from(amps)
    out = checkpoint_state("after_stage1", state, GENERIC)
    control = {(lab.pol_c, lab.spat_c) for lab in out.amplitudes}
    assert len(control) == 6


@pytest.mark.parametrize("stage", sorted(CHECKPOINTS))
def test_checkpoints_match_term_lists(stage, rng):
    for _ in range(10):
        params = random_params(rng)
        amps = random_amplitudes(rng)
        got = checkpoint_state(stage, input_from(amps), params)
        want = reference_checkpoint(
            stage, amps["alpha"], amps["beta"], amps["lambda"], amps["varpi"], emitter_coefficients(params)
        )
        dev, where = max_abs_difference(got, want)
        assert dev < 1e-12, (stage, where)


def test_after_stage2_includes_detector_terms():
    state = make_input_state((0, 1), (0, 1), (1, 0), (1, 0))
    out = checkpoint_state("after_stage2", state, GENERIC)
    co = emitter_coefficients(GENERIC)
    on_d3 = {lab: a for lab, a in out.amplitudes.items() if lab.spat_c == "aD3"}
    on_d2 = {lab: a for lab, a in out.amplitudes.items() if lab.spat_c == "aD2"}
    assert sum(abs(a) ** 2 for a in on_d3.values()) == pytest.approx(abs(co.c * co.f) ** 2)
    assert sum(abs(a) ** 2 for a in on_d2.values()) == pytest.approx(abs(co.f) ** 2)


def test_after_target_carries_c4_with_sign_pattern():
    co = emitter_coefficients(GENERIC)
    # alpha_2 beta_2 branch: both spins down, lambda_2 and varpi_2 both flip sign
    state = make_input_state((0, 1), (0, 1), (0, 1), (0, 1))
    out = checkpoint_state("after_target", state, GENERIC)
    assert out.amplitudes == pytest.approx({L(S, "a2", S, "b2", 1, 1): co.c**4})


def test_unknown_checkpoint():
    with pytest.raises(ValueError, match="checkpoint"):
        checkpoint_state("after_everything", make_input_state((1, 0), (1, 0), (1, 0), (1, 0)), GENERIC)


# ---------------------------------------------------------------------------
# ideal gate
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "label, sign",
    [
        (L(F, "a1", F, "b1", None, None), 1),
        (L(S, "a1", S, "b1", None, None), -1),
        (L(F, "a2", S, "b2", None, None), -1),
        (L(S, "a2", S, "b2", None, None), 1),
        (L(S, "a2", F, "b1", None, None), 1),
    ],
)
def test_ideal_gate_signs(label, sign):
    state = SparseState.from_amplitudes({label: 0.7 - 0.1j})
    assert ideal_hyper_cpf(state)[label] == sign * (0.7 - 0.1j)


def test_ideal_gate_is_an_involution(random_input):
    _, state = random_input
    p = photon_part(state)
    assert max_abs_difference(ideal_hyper_cpf(ideal_hyper_cpf(p)), p)[0] == 0


# ---------------------------------------------------------------------------
# end-to-end
# ---------------------------------------------------------------------------


def test_ideal_params_give_unit_success(random_input):
    _, state = random_input
    result = run_hyper_cpf(state, IDEAL)
    assert result.success_probability == pytest.approx(1, abs=1e-12)
    assert result.unheralded_loss == pytest.approx(0, abs=1e-12)
    assert all(v < 1e-12 for v in result.heralded_failure.values())
    assert result.fidelity_vs_ideal == pytest.approx(1, abs=1e-10)


def test_spot_value_g24(random_input):
    _, state = random_input
    params = CavityParams(g=2.4, kappa_s=0.0, gamma=0.1)
    result = run_hyper_cpf(state, params)
    assert result.success_probability == pytest.approx(ETA_G24, abs=1e-12)
    assert round(result.success_probability, 3) == 0.966


def test_every_branch_has_unit_fidelity(rng):
    for _ in range(10):
        params = random_params(rng)
        result = run_hyper_cpf(input_from(random_amplitudes(rng)), params)
        assert len(result.spin_branches) == 4
        for branch in result.spin_branches:
            assert branch.probability == pytest.approx(0.25, abs=1e-12)
            assert branch.fidelity == pytest.approx(1, abs=1e-10)
        assert result.total_probability == pytest.approx(1, abs=1e-12)
        assert 0 <= result.fidelity_vs_ideal <= 1


def test_branch_states_equal_c4_times_ideal(rng):
    params = random_params(rng)
    result = run_hyper_cpf(input_from(random_amplitudes(rng)), params)
    c4 = result.coeffs.c**4
    for branch in result.spin_branches:
        dev, where = max_abs_difference(branch.state, c4 * result.ideal_state)
        assert dev < 1e-12, (branch.outcome, where)


def test_success_is_independent_of_input(rng):
    params = random_params(rng)
    values = [run_hyper_cpf(input_from(random_amplitudes(rng)), params).success_probability for _ in range(10)]
    assert max(values) - min(values) < 1e-12
    assert values[0] == pytest.approx(efficiency_pipeline(params), abs=1e-12)


def test_fixed_outcome_policy(random_input):
    _, state = random_input
    result = run_hyper_cpf(state, GENERIC, outcome_policy="-+")
    chosen = result.spin_branches[2]
    assert chosen.outcome == ("-", "+")
    assert result.output_state is chosen.state
    assert result.fidelity_vs_ideal == chosen.fidelity


def test_gate_inoperative_when_g_vanishes(random_input):
    _, state = random_input
    with pytest.raises(GateInoperativeError):
        run_hyper_cpf(state, CavityParams(g=0.0))


def test_wrong_feed_forward_is_detected(monkeypatch, random_input):
    _, state = random_input
    table = dict(optics.FEED_FORWARD_TABLE)
    table[("+", "-")] = FeedForwardOp.POLARIZED_SIGMA_Z
    monkeypatch.setattr(optics, "FEED_FORWARD_TABLE", table)
    result = run_hyper_cpf(state, GENERIC)
    assert result.fidelity_vs_ideal < 1 - 1e-10


# ---------------------------------------------------------------------------
# efficiency
# ---------------------------------------------------------------------------


def test_efficiency_examples():
    assert efficiency_from_coeffs(EmitterCoeffs(-1, 1, -1, 0)) == 1
    coeffs = EmitterCoeffs.from_reflections(-1, 1, p=0.9)
    assert efficiency_from_coeffs(coeffs) == pytest.approx(0.43046721, abs=1e-15)
    assert efficiency_closed_form(2.4, 0.0, 1.0) == pytest.approx(ETA_G24, abs=1e-14)
    assert efficiency_pipeline(CavityParams(g=2.4, gamma=0.1)) == pytest.approx(ETA_G24, abs=1e-14)


def test_efficiency_is_eighth_power_of_reflection_contrast(rng):
    for _ in range(20):
        params = random_params(rng)
        co = emitter_coefficients(params)
        expected = params.p**8 * abs(co.r0 - co.rh) ** 8 / 256
        assert efficiency_pipeline(params) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 5), st.floats(0, 2), st.floats(0.05, 1), st.floats(0.05, 1))
def test_p_eighth_power_scaling(g, ks, p1, p2):
    base = CavityParams(g=g, kappa_s=ks, gamma=0.1, p=p1)
    ratio = efficiency_pipeline(replace(base, p=p2)) / efficiency_pipeline(base)
    assert ratio == pytest.approx((p2 / p1) ** 8, rel=1e-12)


@pytest.mark.parametrize("p", [0.5, 0.8, 1.0])
def test_closed_form_matches_pipeline_on_grid(p):
    for g in np.linspace(0.1, 5, 25):
        for ks in np.linspace(0, 2, 25):
            params = CavityParams(g=g, kappa_s=ks, gamma=0.1, p=p)
            assert closed_form_applies(params)
            assert abs(efficiency_pipeline(params) - efficiency_closed_form(g, ks, p)) < 1e-12


def test_closed_form_preconditions():
    assert not closed_form_applies(CavityParams(g=1, gamma=0.2))
    assert not closed_form_applies(CavityParams(g=1, gamma=0.1, omega_cavity=0.1))


def test_closed_form_broadcasts():
    g = np.linspace(0.5, 3, 4)
    out = efficiency_closed_form(g[:, None], np.array([0.0, 1.0]), 1.0)
    assert out.shape == (4, 2)
    assert out[2, 1] == efficiency_closed_form(g[2], 1.0, 1.0)


def test_closed_form_monotonicity():
    g = np.linspace(0.1, 3, 60)
    ks = np.linspace(0, 2, 40)
    surf = efficiency_closed_form(g[:, None], ks[None, :], 1.0)
    assert np.all(np.diff(surf, axis=0) > 0)
    assert np.all(np.diff(surf, axis=1) < 0)


@pytest.mark.parametrize("p", [0.3, 0.7, 1.0])
def test_large_g_limit_is_p8(p):
    assert abs(efficiency_closed_form(1e3, 0.0, p) - p**8) < 1e-6
    assert abs(efficiency_pipeline(CavityParams(g=1e3, gamma=0.1, p=p)) - p**8) < 1e-6
