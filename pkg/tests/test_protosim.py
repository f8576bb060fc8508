import numpy as np
import pytest

from securecomp import fixtures
from securecomp.charact import ContractViolation
from securecomp.probcore import entropy, tv_distance
from securecomp.protosim import (
    ProtocolSpec,
    analytic_leakage,
    induced_distribution,
    protocol_rules,
    run_protocol,
)

from conftest import rank_one_instance


def test_exact_correctness_and_privacy(certified):
    spec = ProtocolSpec(certified)
    j = induced_distribution(spec)
    assert tv_distance(j.marginal(("X", "Y", "Z")), certified.joint_xyz()) <= 1e-12
    assert analytic_leakage(spec) <= 1e-12
    assert entropy(j, "U", ("Y", "Z")) <= 1e-12


def test_x_independent_message_is_constant():
    inst = fixtures.load("x_independent")
    j = induced_distribution(ProtocolSpec(inst))
    assert j.axis("U").size == 1
    assert np.allclose(j.mass[:, :, 0, :], inst.p_xy[:, :, None] * inst.p_z_given_xy)


def test_identity_message_is_x():
    j = induced_distribution(ProtocolSpec(fixtures.load("identity")))
    expected = np.zeros((2, 2, 2, 2))
    for x in range(2):
        expected[x, :, x, x] = 0.25
    assert np.array_equal(j.mass, expected)


def test_bsc_induced_channel():
    inst = fixtures.load("bsc")
    j = induced_distribution(ProtocolSpec(inst)).marginal(("X", "Y", "Z")).mass
    bsc = np.array([[0.9, 0.1], [0.1, 0.9]])
    for y in range(2):
        assert np.allclose(j[:, y, :] / j[:, y, :].sum(axis=1, keepdims=True), bsc, atol=1e-12)


@pytest.mark.parametrize("y1", [0, 1])
def test_agreed_y1_does_not_change_rules(y1):
    inst = fixtures.load("rank_one_3x2x3")
    base = protocol_rules(inst, 0)
    rules = protocol_rules(inst, y1)
    assert np.allclose(rules.alice, base.alice, atol=1e-12)
    assert np.array_equal(rules.bob, base.bob)


def test_single_round_record_is_valid(certified, tmp_path):
    transcript, report = run_protocol(ProtocolSpec(certified, rounds=1, seed=3))
    assert len(transcript) == 1
    rules = protocol_rules(certified)
    assert rules.class_of[transcript.y[0], transcript.z[0]] == transcript.u[0]
    out = tmp_path / "t.txt"
    transcript.write(out, certified)
    fields = out.read_text().split()
    assert fields[0] in certified.x.symbols and fields[3] in certified.z.symbols
    assert report.rounds == 1 and report.sample_size == 1


def test_every_record_lies_in_announced_class():
    inst = fixtures.load("rank_one_3x2x3")
    t, _ = run_protocol(ProtocolSpec(inst, rounds=5000, seed=1))
    assert np.all(protocol_rules(inst).class_of[t.y, t.z] == t.u)


def test_bsc_simulation_bounds():
    _, report = run_protocol(ProtocolSpec(fixtures.load("bsc"), rounds=100_000, seed=0))
    assert report.empirical_tv <= 0.02
    assert report.leakage_estimate <= 0.01


def test_tv_shrinks_with_rounds():
    inst = fixtures.load("bsc")
    small = np.mean([run_protocol(ProtocolSpec(inst, rounds=1000, seed=s))[1].empirical_tv for s in range(20)])
    large = np.mean([run_protocol(ProtocolSpec(inst, rounds=100_000, seed=s))[1].empirical_tv for s in range(20)])
    assert large < small


def test_replay_is_identical():
    inst = fixtures.load("rank_one_3x2x3")
    a, ra = run_protocol(ProtocolSpec(inst, rounds=2000, seed=9))
    b, rb = run_protocol(ProtocolSpec(inst, rounds=2000, seed=9))
    assert all(np.array_equal(getattr(a, f), getattr(b, f)) for f in "xyuz")
    assert ra.to_dict() == rb.to_dict()


def test_uncertified_is_contract_violation():
    with pytest.raises(ContractViolation):
        run_protocol(ProtocolSpec(fixtures.load("and")))
    with pytest.raises(ContractViolation):
        analytic_leakage(ProtocolSpec(fixtures.load("and")))


@pytest.mark.parametrize("kwargs", [dict(rounds=0), dict(agreed_y1=2)])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        ProtocolSpec(fixtures.load("bsc"), **kwargs)


@pytest.mark.parametrize("seed", range(10))
def test_random_rank_one_protocol(seed):
    inst, _ = rank_one_instance(np.random.default_rng(seed))
    spec = ProtocolSpec(inst, agreed_y1=inst.y.size - 1)
    j = induced_distribution(spec)
    assert tv_distance(j.marginal(("X", "Y", "Z")), inst.joint_xyz()) <= 1e-12
    assert analytic_leakage(spec) <= 1e-12
