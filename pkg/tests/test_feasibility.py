import json

import numpy as np
import pytest

from ialign.channel import InterferenceChannel, gen_rayleigh
from ialign.feasibility import (RuleFailure, Subspace1D, build_link_graphs, certificate_verify, check_dof,
                                classify_component, eigen_lines, encode, induced_certificate, oracle_grid,
                                preprocess, _components)
from ialign.numerics import crandn
from ialign.twosat import solve_2sat

from instances import oracle_suite, planted_channel, random_dof, rank_one

Z = np.zeros((2, 2), dtype=complex)


def channel(H, M=None, N=None):
    K = len(H)
    M = M or [H[0][j].shape[1] for j in range(K)]
    N = N or [H[k][0].shape[0] for k in range(K)]
    return InterferenceChannel(M, N, H, 1.0, [1.0] * K)


def clauses_with(enc, tag):
    return [c for c, t in zip(enc.inst.clauses, enc.inst.tags) if t == tag]


# -- preprocessing and graphs ---------------------------------------------


def test_preprocess_drops_idle_users():
    ch = gen_rayleigh(2, 2, 2, seed=0)
    red = preprocess(ch, [0, 1])
    assert red.users == [1] and red.d == [1]


def test_preprocess_two_streams_need_full_rank_direct():
    rng = np.random.default_rng(1)
    ch = channel([[rank_one(rng, 2, 2)]])
    with pytest.raises(RuleFailure) as info:
        preprocess(ch, [2])
    assert info.value.tag == "direct-rank"
    assert check_dof(ch, [2]).witness == "direct-rank"


def test_preprocess_pads_single_antenna():
    ch = gen_rayleigh(2, [1, 2], [2, 2], seed=2)
    red = preprocess(ch, [1, 1])
    assert red.H[0][0].shape == (2, 2)
    assert np.all(red.H[0][0][:, 1] == 0)
    assert np.array_equal(red.H[0][0][:, :1], ch.H[0][0])


def test_preprocess_rejects():
    with pytest.raises(ValueError):
        preprocess(gen_rayleigh(1, 3, 2), [1])
    with pytest.raises(ValueError):
        preprocess(gen_rayleigh(1, 2, 2), [3])
    with pytest.raises(ValueError):
        preprocess(gen_rayleigh(2, 2, 2), [1])


def test_link_graphs():
    rng = np.random.default_rng(3)
    d = [crandn(rng, 2, 2) for _ in range(2)]
    ch = channel([[d[0], Z], [Z, d[1]]])
    g = build_link_graphs(preprocess(ch, [1, 1]))
    assert set(g.G) == {(0, 0), (1, 1)} and g.Gp == []
    ch = channel([[d[0], crandn(rng, 2, 2)], [crandn(rng, 2, 2), d[1]]])
    red = preprocess(ch, [1, 1])
    g = build_link_graphs(red)
    assert g.Gp == [(0, 1), (1, 0)]
    assert len(_components(red, g)) == 2
    ch = channel([[d[0], Z], [rank_one(rng, 2, 2), d[1]]])
    g = build_link_graphs(preprocess(ch, [1, 1]))
    assert g.G[(1, 0)] == 1 and g.Gp == []


# -- component classification ---------------------------------------------


def four_user_loop(rng, h41=None):
    """Cross links only around the cycle tx1 -> rx2 <- tx3 -> rx4 <- tx1 (0-based users 0..3)."""
    H = [[crandn(rng, 2, 2) if k == j else Z for j in range(4)] for k in range(4)]
    H[1][0] = crandn(rng, 2, 2)
    H[1][2] = crandn(rng, 2, 2)
    H[3][2] = crandn(rng, 2, 2)
    H[3][0] = crandn(rng, 2, 2) if h41 is None else h41(H)
    return channel(H)


def test_tree_component_is_free():
    rng = np.random.default_rng(4)
    H = [[crandn(rng, 2, 2) if k == j else Z for j in range(3)] for k in range(3)]
    H[1][0] = crandn(rng, 2, 2)
    H[2][0] = crandn(rng, 2, 2)
    red = preprocess(channel(H), [1, 1, 1])
    comps = _components(red, build_link_graphs(red))
    big = max(comps, key=len)
    assert len(big) == 3
    assert classify_component(red, big).kind == "B2"


def test_loop_component_candidates_are_loop_eigenvectors():
    rng = np.random.default_rng(5)
    ch = four_user_loop(rng)
    red = preprocess(ch, [1] * 4)
    comps = _components(red, build_link_graphs(red))
    loop_nodes = [c for c in comps if ("tx", 0) in c][0]
    cls = classify_component(red, loop_nodes)
    assert cls.kind == "B1"
    H = ch.H
    loop = np.linalg.solve(H[3][0], H[3][2] @ np.linalg.solve(H[1][2], H[1][0]))
    expect = eigen_lines(loop)
    got = [cls.value_of(("tx", 0), c) for c in cls.candidates]
    assert len(got) == 2
    assert all(any(g.same(e) for e in expect) for g in got)
    out = check_dof(ch, [1] * 4)
    assert out.achievable
    s0 = Subspace1D.of(out.signal[0][:, 0])
    assert any(s0.same(e) for e in expect)


def test_scalar_loop_is_free():
    rng = np.random.default_rng(6)
    # H_41 = 2 H_43 H_23^{-1} H_21 makes the loop matrix I/2
    ch = four_user_loop(rng, h41=lambda H: 2 * H[3][2] @ np.linalg.solve(H[1][2], H[1][0]))
    red = preprocess(ch, [1] * 4)
    comps = _components(red, build_link_graphs(red))
    cls = classify_component(red, [c for c in comps if ("tx", 0) in c][0])
    assert cls.kind == "B2"
    assert check_dof(ch, [1] * 4).achievable


def test_contradictory_loops():
    ch = gen_rayleigh(4, 2, 2, seed=7)
    out = check_dof(ch, [1] * 4)
    assert out.verdict == "infeasible" and out.witness == "loop-mismatch"
    for res in (200, 500, 2000):
        assert oracle_grid(ch, [1] * 4, res)[0] == "unknown"


# -- clause families ----------------------------------------------------------


def test_two_stream_receiver_rank_one_interferer():
    rng = np.random.default_rng(8)
    H = [[crandn(rng, 2, 2), rank_one(rng, 2, 2)], [Z, crandn(rng, 2, 2)]]
    enc = encode(channel(H), [2, 1])
    eq1 = clauses_with(enc, "eq1")
    x = (("x", 0, 1), True)
    assert set(eq1) == {(x, (("y", 0), True)), (x, (("y", 0), False))}
    out = check_dof(channel(H), [2, 1])
    assert out.achievable and "eq1" in out.tags


def test_two_rank_one_interferers_distinct_ranges():
    rng = np.random.default_rng(9)
    H = [[crandn(rng, 2, 2) if k == j else Z for j in range(3)] for k in range(3)]
    H[0][1] = rank_one(rng, 2, 2)
    H[0][2] = rank_one(rng, 2, 2)
    enc = encode(channel(H), [1, 1, 1])
    eq2 = clauses_with(enc, "eq2")
    assert eq2 == [((("x", 0, 1), True), (("x", 0, 2), True))]
    assert check_dof(channel(H), [1, 1, 1]).achievable


def test_isolated_users_give_empty_instance():
    rng = np.random.default_rng(10)
    H = [[crandn(rng, 2, 2) if k == j else Z for j in range(3)] for k in range(3)]
    enc = encode(channel(H), [1, 2, 1])
    assert len(enc.inst) == 0 and solve_2sat(enc.inst) == {}
    out = check_dof(channel(H), [1, 2, 1])
    assert out.achievable and out.clauses_emitted == 0


def test_rank_one_direct_link_forbids_shared_null():
    rng = np.random.default_rng(11)
    n = crandn(rng, 2)
    H = [[crandn(rng, 2, 2) if k == j else Z for j in range(3)] for k in range(3)]
    H[0][0] = rank_one(rng, 2, 2, right=n)
    H[1][0] = crandn(rng, 2, 2)
    H[2][0] = rank_one(rng, 2, 2, right=n)
    enc = encode(channel(H), [1, 1, 1])
    eq6 = clauses_with(enc, "eq6")
    assert eq6 and all((("x", 2, 0), False) in c for c in eq6)
    out = check_dof(channel(H), [1, 1, 1])
    assert out.achievable


def full_cross(rng, K=3):
    return [[crandn(rng, 2, 2) for _ in range(K)] for _ in range(K)]


def loop_component(H, d):
    red = preprocess(channel(H), d)
    comps = _components(red, build_link_graphs(red))
    nodes = [c for c in comps if ("tx", 0) in c][0]
    return classify_component(red, nodes)


def test_rank_one_direct_range_on_loop_candidate():
    rng = np.random.default_rng(12)
    H = full_cross(rng)
    cls = loop_component(H, [1, 1, 1])
    assert cls.kind == "B1" and len(cls.candidates) == 2
    r = cls.value_of(("rx", 0), cls.candidates[0]).generator
    H[0][0] = rank_one(rng, 2, 2, left=r)
    enc = encode(channel(H), [1, 1, 1])
    assert clauses_with(enc, "eq7")
    out = check_dof(channel(H), [1, 1, 1])
    assert out.achievable
    # the surviving candidate is the other loop eigenvector
    s0 = Subspace1D.of(out.signal[0][:, 0])
    assert s0.same(cls.value_of(("tx", 0), cls.candidates[1]))


def test_direct_link_aligning_signal_with_interference():
    rng = np.random.default_rng(13)
    H = full_cross(rng)
    cls = loop_component(H, [1, 1, 1])
    c0 = cls.candidates[0].generator
    perp = np.array([-np.conj(c0[1]), np.conj(c0[0])])
    a = 2 * np.outer(c0, c0.conj()) + np.outer(perp, perp.conj())
    # signal of candidate 0 lands exactly on receiver 0's interference line
    H[0][0] = cls.maps[("rx", 0)] @ a @ np.linalg.inv(cls.maps[("tx", 0)])
    enc = encode(channel(H), [1, 1, 1])
    assert clauses_with(enc, "eq10")
    out = check_dof(channel(H), [1, 1, 1])
    assert out.achievable
    assert Subspace1D.of(out.signal[0][:, 0]).same(cls.value_of(("tx", 0), cls.candidates[1]))
    # a direct link equal to the interference map up to scale kills every choice
    H[0][0] = 3 * cls.maps[("rx", 0)] @ np.linalg.inv(cls.maps[("tx", 0)])
    out = check_dof(channel(H), [1, 1, 1])
    assert out.verdict == "infeasible" and out.witness == "eq10"


def test_direct_link_across_components():
    rng = np.random.default_rng(14)
    n0, r = crandn(rng, 2), crandn(rng, 2)
    H = [[crandn(rng, 2, 2) if k == j else Z for j in range(3)] for k in range(3)]
    H[1][0] = crandn(rng, 2, 2)  # tx0 - rx1
    H[0][2] = crandn(rng, 2, 2)  # rx0 - tx2
    H[2][0] = rank_one(rng, 2, 2, right=n0)
    H[0][1] = rank_one(rng, 2, 2, left=r)
    # H_00 maps the null line of H_20 onto r
    null0 = np.array([-np.conj(n0[1]), np.conj(n0[0])])
    H[0][0] = np.column_stack([r, crandn(rng, 2)]) @ np.linalg.inv(np.column_stack([null0, crandn(rng, 2)]))
    enc = encode(channel(H), [1, 1, 1])
    eq10 = clauses_with(enc, "eq10")
    pair = {(("x", 2, 0), False), (("x", 0, 1), True)}
    assert any(set(c) == pair for c in eq10)
    out = check_dof(channel(H), [1, 1, 1])
    assert out.achievable


def test_two_stream_conflicts():
    rng = np.random.default_rng(15)
    ch = channel(full_cross(rng, 2))
    out = check_dof(ch, [2, 1])
    assert out.verdict == "infeasible" and out.witness == "two-stream-receiver"
    H = full_cross(rng, 2)
    H[0][1] = Z
    out = check_dof(channel(H), [2, 1])
    assert out.verdict == "infeasible" and out.witness == "two-stream-interferer"


# -- end to end -----------------------------------------------------------------


def test_single_user_two_streams():
    out = check_dof(gen_rayleigh(1, 2, 2, seed=16), [2])
    assert out.achievable and out.signal[0].shape == (2, 2)


def test_three_user_generic():
    ch = gen_rayleigh(3, 2, 2, seed=17)
    out = check_dof(ch, [1, 1, 1])
    assert out.achievable
    assert certificate_verify(ch, [1, 1, 1], out.signal, out.interference)
    assert "loop-mismatch" not in out.tags
    assert oracle_grid(ch, [1, 1, 1], 2000)[0] == "achievable"


def test_not_applicable_above_two_antennas():
    out = check_dof(gen_rayleigh(2, 3, 2, seed=18), [1, 1])
    assert out.verdict == "not_applicable"
    assert out.to_dict()["verdict"] == "not_applicable"


def test_outcome_json():
    out = check_dof(gen_rayleigh(3, 2, 2, seed=19), [1, 1, 1])
    data = json.loads(json.dumps(out.to_dict()))
    assert data["verdict"] == "achievable"
    assert set(data["certificate"]) == {"precoders", "signal", "interference"}
    assert isinstance(data["clauses_emitted"], int) and isinstance(data["tags"], list)


def test_deterministic():
    rng = np.random.default_rng(20)
    for n in range(20):
        K = int(rng.integers(2, 5))
        ch = planted_channel(rng, K, ["full", "rank1", "zero", "mixed"][n % 4])
        d = random_dof(rng, K)
        a, b = check_dof(ch, d), check_dof(ch, d)
        assert a.to_dict() == b.to_dict()


def test_clause_count_bound():
    # constant measured on random and adversarial families, frozen at 2
    c = 2.0
    rng = np.random.default_rng(21)
    for n in range(200):
        K = int(rng.integers(2, 7))
        ch = planted_channel(rng, K, ["full", "rank1", "zero", "mixed"][n % 4])
        out = check_dof(ch, random_dof(rng, K, 0.05, 0.0))
        assert out.clauses_emitted <= c * K ** 4
    for K in range(2, 9):
        left = [crandn(rng, 2) for _ in range(2)]
        right = [crandn(rng, 2) for _ in range(2)]
        H = [[crandn(rng, 2, 2) if k == j else rank_one(rng, 2, 2, left[(k + j) % 2], right[(k * j) % 2])
              for j in range(K)] for k in range(K)]
        assert check_dof(channel(H), [1] * K).clauses_emitted <= c * K ** 4


# -- certificates and oracle ---------------------------------------------


def test_certificate_single_user():
    ch = gen_rayleigh(1, 2, 2, seed=22)
    assert certificate_verify(ch, [1], [np.array([[1.0], [0.0]])], [np.zeros((2, 0))])
    assert certificate_verify(ch, [2], [np.eye(2)], [np.zeros((2, 0))])


def test_certificate_rejects_rotation():
    ch = gen_rayleigh(3, 2, 2, seed=23)
    out = check_dof(ch, [1, 1, 1])
    assert out.achievable
    sig = [s.copy() for s in out.signal]
    t = 1e-2
    rot = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
    sig[1] = rot @ sig[1]
    assert not certificate_verify(ch, [1, 1, 1], sig, out.interference)


def test_certificate_wrong_dimension():
    ch = gen_rayleigh(2, 2, 2, seed=24)
    assert not certificate_verify(ch, [1, 1], [np.eye(2), np.eye(2)[:, :1]], [np.zeros((2, 0))] * 2)


def test_oracle_single_user():
    ch = gen_rayleigh(1, 2, 2, seed=25)
    assert oracle_grid(ch, [1])[0] == "achievable"


def test_oracle_close_to_loop_eigenvector():
    ch = gen_rayleigh(3, 2, 2, seed=26)
    verdict, v = oracle_grid(ch, [1, 1, 1], 500)
    assert verdict == "achievable"
    red = preprocess(ch, [1, 1, 1])
    comps = _components(red, build_link_graphs(red))
    cls = classify_component(red, comps[0])
    lines = [cls.value_of(("tx", 0), c) for c in cls.candidates]
    got = Subspace1D.of(v[0][:, 0])
    angle = min(np.arccos(min(1.0, abs(np.vdot(got.generator, s.generator)))) for s in lines)
    assert angle <= 1e-3


def test_oracle_limits():
    with pytest.raises(ValueError):
        oracle_grid(gen_rayleigh(6, 2, 2), [1] * 6)
    with pytest.raises(ValueError):
        oracle_grid(gen_rayleigh(2, 3, 2), [1, 1])


def test_checker_matches_oracle_small_suite():
    for kind, ch, d in oracle_suite(seed=99, count=24):
        out = check_dof(ch, d)
        if out.achievable:
            assert certificate_verify(ch, d, out.signal, out.interference)
        o, _ = oracle_grid(ch, d, 2000)
        if o == "achievable":
            assert out.achievable
        if out.achievable:
            assert o == "achievable"
