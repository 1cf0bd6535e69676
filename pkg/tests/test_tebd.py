import math

import numpy as np
import pytest

from xychain.ed import dense_ground_state, ed_block_entropy, ed_magnetization_profile
from xychain.model import (SIGMA_X, GaussianRandom, SpinChainModel, Staggered, Uniform,
                           parallel_operator, perpendicular_operator)
from xychain.mps import MatrixProductState, TruncationPolicy
from xychain.tebd import (EvolutionSchedule, Stage, energy, ground_state_search, initial_state,
                          load_checkpoint, save_checkpoint)

POLICY = TruncationPolicy(max_bond=32)


def profile(state, op):
    return np.array([state.expectation_one_site(i, op) for i in range(1, state.n_sites + 1)])


# initial state


def test_initial_state_zero_bias_points_along_perp():
    model = SpinChainModel.from_spec(Uniform(1.0), 6, axis_angle=0.7)
    s = initial_state(model, bias_angle=0.0)
    assert np.allclose(profile(s, perpendicular_operator(0.7)), 1, atol=1e-12)


def test_initial_state_deterministic():
    model = SpinChainModel.from_spec(Uniform(1.0), 8)
    a = initial_state(model, math.pi / 4, seed=3).to_dense()
    b = initial_state(model, math.pi / 4, seed=3).to_dense()
    assert np.array_equal(a, b)


def test_initial_state_mean_perp_is_two_over_pi():
    model = SpinChainModel.from_spec(Uniform(0.0), 1000)
    m = profile(initial_state(model, math.pi / 2, seed=7), perpendicular_operator(0.0)).mean()
    assert m == pytest.approx(2 / math.pi, rel=0.05)


def test_initial_state_directions_are_mirror_images():
    model = SpinChainModel.from_spec(Uniform(0.0), 10, axis_angle=0.4)
    a = initial_state(model, seed=5, direction=1)
    b = initial_state(model, seed=5, direction=-1)
    assert np.allclose(profile(a, perpendicular_operator(0.4)),
                       -profile(b, perpendicular_operator(0.4)), atol=1e-12)
    assert np.allclose(profile(a, parallel_operator(0.4)),
                       profile(b, parallel_operator(0.4)), atol=1e-12)


# energy


def test_energy_all_up_zero_field():
    model = SpinChainModel.from_spec(Uniform(0.0), 6)
    s = MatrixProductState.product_state([np.array([1, 0])] * 6)
    assert energy(s, model) == pytest.approx(0, abs=1e-14)


# ground-state search


def test_two_site_singlet_like_ground_state():
    model = SpinChainModel.from_spec(Uniform(0.0), 2)
    s, d = ground_state_search(model, policy=POLICY)
    assert d.converged
    assert d.final_energy == pytest.approx(-2, abs=1e-8)
    assert s.block_entropy(1) == pytest.approx(1, abs=1e-6)
    target = np.array([0, 1, 1, 0]) / math.sqrt(2)
    assert abs(np.vdot(target, s.to_dense())) == pytest.approx(1, abs=1e-8)


def test_two_sites_strong_field():
    model = SpinChainModel.from_spec(Uniform(100.0), 2)
    s, d = ground_state_search(model, policy=POLICY)
    assert d.final_energy == pytest.approx(dense_ground_state(model).energy, rel=1e-9)
    assert np.all(profile(s, SIGMA_X) > 0.999)


def test_four_site_zero_field():
    s, d = ground_state_search(SpinChainModel.from_spec(Uniform(0.0), 4), policy=POLICY)
    assert d.final_energy == pytest.approx(-2 * math.sqrt(5), rel=1e-6)


@pytest.mark.parametrize("h0", [2.0, 2 * math.sqrt(2)])
def test_ten_site_staggered_matches_ed(h0):
    model = SpinChainModel.from_spec(Staggered(h0), 10)
    s, d = ground_state_search(model, policy=POLICY)
    gs = dense_ground_state(model)
    assert d.converged
    assert abs(d.final_energy - gs.energy) / abs(gs.energy) < 1e-6
    m_par, _ = ed_magnetization_profile(gs, 0.0)
    assert np.max(np.abs(profile(s, SIGMA_X) - m_par)) < 1e-3
    assert max(abs(s.block_entropy(p) - ed_block_entropy(gs, p)) for p in range(1, 10)) < 1e-3


def test_returned_state_canonical_and_normalized():
    model = SpinChainModel.from_spec(GaussianRandom(0.5, 3), 8)
    s, d = ground_state_search(model, policy=POLICY)
    assert np.linalg.norm(s.to_dense()) == pytest.approx(1, abs=1e-12)
    for p in range(1, 8):
        g = s.left_block_gram(p)
        assert np.allclose(g, np.eye(g.shape[0]), atol=1e-10)
    assert d.final_energy == pytest.approx(energy(s, model), abs=1e-12)


def test_energy_monotone_within_stage():
    n = 12
    model = SpinChainModel.from_spec(Staggered(1.5), n)
    schedule = EvolutionSchedule(((0.1, 400, 1e-12), (0.03, 300, 1e-12)), check_every=5)
    _, d = ground_state_search(model, schedule, POLICY)
    e = np.array(d.energy_history)
    stage = np.array(d.history_stage)
    sweeps = np.diff([0] + d.history_sweeps)
    for k in range(1, e.size):
        if stage[k] == stage[k - 1]:
            tol = schedule.stages[stage[k]].tol
            assert e[k] - e[k - 1] <= 10 * tol * n * sweeps[k]


def test_non_convergence_returns_best_state_flagged():
    model = SpinChainModel.from_spec(Staggered(1.0), 10)
    schedule = EvolutionSchedule(((0.1, 3, 1e-15),), check_every=1)
    s, d = ground_state_search(model, schedule, POLICY)
    assert not d.converged and d.stage_converged == [False]
    assert d.sweeps_used == 3
    assert d.final_energy == pytest.approx(min(d.energy_history), abs=1e-10)
    assert np.linalg.norm(s.to_dense()) == pytest.approx(1, abs=1e-12)


def test_truncation_alarm_flags_without_abort():
    model = SpinChainModel.from_spec(Uniform(0.0), 12)
    schedule = EvolutionSchedule(((0.1, 50, 1e-8),))
    s, d = ground_state_search(model, schedule, TruncationPolicy(max_bond=2), alarm_threshold=1e-8)
    assert d.truncation_alarm
    assert d.total_discarded_weight > 1e-8
    assert max(s.bond_dims) <= 2


def test_init_size_mismatch():
    model = SpinChainModel.from_spec(Uniform(0.0), 6)
    other = initial_state(SpinChainModel.from_spec(Uniform(0.0), 5))
    with pytest.raises(ValueError):
        ground_state_search(model, init=other)


@pytest.mark.parametrize("stages", [((0.1, 10, 1e-8), (0.1, 10, 1e-8)), ((0.1, 10, 0.0),), ()])
def test_schedule_invariants(stages):
    with pytest.raises(ValueError):
        EvolutionSchedule(stages)


def test_default_schedule_strictly_decreasing():
    s = EvolutionSchedule()
    dts = [st.dt for st in s.stages]
    assert dts == sorted(dts, reverse=True) and len(set(dts)) == len(dts)
    assert all(isinstance(st, Stage) and st.tol > 0 for st in s.stages)


# symmetry and stability properties


def test_sign_symmetry_partner():
    """Starting toward -perp gives the mirrored profile at equal energy."""
    model = SpinChainModel.from_spec(Staggered(2.0), 32)
    schedule = EvolutionSchedule(((0.1, 300, 1e-9),))
    op = perpendicular_operator(0.0)
    a, da = ground_state_search(model, schedule, TruncationPolicy(max_bond=16),
                                initial_state(model, seed=3, direction=1))
    b, db = ground_state_search(model, schedule, TruncationPolicy(max_bond=16),
                                initial_state(model, seed=3, direction=-1))
    pa, pb = profile(a, op), profile(b, op)
    assert pa[3:-3].mean() > 0.1
    assert np.max(np.abs(pa + pb)) < 1e-6
    assert da.final_energy == pytest.approx(db.final_energy, abs=1e-8)


def test_chi_doubling_stability():
    n = 20
    model = SpinChainModel.from_spec(Staggered(4.0), n)
    schedule = EvolutionSchedule()
    _, d1 = ground_state_search(model, schedule, TruncationPolicy(max_bond=16))
    _, d2 = ground_state_search(model, schedule, TruncationPolicy(max_bond=32))
    assert d1.converged and d2.converged
    assert abs(d1.final_energy - d2.final_energy) / n < schedule.stages[-1].tol


def _trotter_errors(dts=(0.1, 0.05, 0.025)):
    model = SpinChainModel.from_spec(Staggered(1.0), 8)
    gs = dense_ground_state(model)
    m_exact, _ = ed_magnetization_profile(gs, 0.0)
    de, dm = [], []
    for dt in dts:
        s, d = ground_state_search(model, EvolutionSchedule(((dt, 20000, 1e-15),)), POLICY)
        assert d.converged
        de.append(abs(d.final_energy - gs.energy))
        dm.append(np.max(np.abs(profile(s, SIGMA_X) - m_exact)))
    x = np.log(dts)
    return np.polyfit(x, np.log(de), 1)[0], np.polyfit(x, np.log(dm), 1)[0]


@pytest.fixture(scope="module")
def trotter_slopes():
    return _trotter_errors()


def test_trotter_energy_error_slope_two(trotter_slopes):
    """Literal property: energy error against dt with log-log slope 2.0 +- 0.2."""
    energy_slope, _ = trotter_slopes
    assert energy_slope == pytest.approx(2.0, abs=0.2)


def test_trotter_observable_error_slope_two(trotter_slopes):
    """The converged state carries an O(dt^2) error, visible in local observables."""
    _, m_slope = trotter_slopes
    assert m_slope == pytest.approx(2.0, abs=0.2)


def test_trotter_energy_error_slope_four(trotter_slopes):
    """Energy is quadratic in the state error, so its error is O(dt^4)."""
    energy_slope, _ = trotter_slopes
    assert energy_slope == pytest.approx(4.0, abs=0.4)


# checkpoints


def test_checkpoint_round_trip(tmp_path):
    model = SpinChainModel.from_spec(Staggered(1.0), 6)
    s, d = ground_state_search(model, EvolutionSchedule(((0.1, 50, 1e-8),)), POLICY)
    path = tmp_path / "run.npz"
    save_checkpoint(path, s, d, model)
    s2, d2 = load_checkpoint(path, model)
    assert np.array_equal(s.to_dense(), s2.to_dense())
    assert d2 == d
    with pytest.raises(ValueError):
        load_checkpoint(path, SpinChainModel.from_spec(Staggered(1.1), 6))
