import numpy as np
import pytest

from mslab.core import as_state, bounding_box, is_critical, mean_shift_op, objective
from mslab.engine import (
    EngineInvariantError,
    RunConfig,
    convergence_check,
    run,
    run_bms,
    run_dsms,
    run_ms,
    run_sms,
)
from mslab.kernels import Profile
from mslab.synthdata import GmmComponent, GmmSpec, generate, paper_spec

P2 = Profile(2)


def cfg_for(algo, **kw):
    base = dict(
        algorithm=algo,
        seed=5,
        max_iterations=300_000,
        convergence_threshold=1e-6,
    )
    base.update(kw)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def small_data():
    points, _ = generate(paper_spec(8), 91)
    return points


class TestDeterminism:
    @pytest.mark.parametrize("algo", ["ms", "bms", "sms", "dsms"])
    def test_bit_identical_reruns(self, algo, small_data):
        t1 = run(small_data, cfg_for(algo, trace_level="full"))
        t2 = run(small_data, cfg_for(algo, trace_level="full"))
        np.testing.assert_array_equal(t1.final_state, t2.final_state)
        assert t1.iterations_used == t2.iterations_used
        assert t1.stop_reason == t2.stop_reason
        for name in ("chosen_index", "bandwidth", "shift_norm", "objective"):
            a, b = getattr(t1, name), getattr(t2, name)
            if a is not None:
                np.testing.assert_array_equal(a, b)

    def test_different_seeds_differ(self, small_data):
        t1 = run_sms(small_data, cfg_for("sms", seed=1, trace_level="shifts"))
        t2 = run_sms(small_data, cfg_for("sms", seed=2, trace_level="shifts"))
        assert not np.array_equal(t1.chosen_index, t2.chosen_index)


class TestSmsBasics:
    def test_single_point_stops_after_first_window(self):
        trace = run_sms(as_state([[0.3, -0.7]]), cfg_for("sms"))
        assert trace.stop_reason == "converged"
        assert trace.iterations_used == 1

    def test_two_far_points_unmoved(self):
        data = as_state([[0.0, 0.0], [5.0, 0.0]])
        trace = run_sms(data, cfg_for("sms", bandwidth=0.6))
        np.testing.assert_array_equal(trace.final_state, data)
        assert trace.stop_reason == "converged"

    def test_converges_at_window_boundary(self, small_data):
        n = small_data.shape[0]
        trace = run_sms(small_data, cfg_for("sms", convergence_threshold=1e9))
        assert trace.stop_reason == "converged"
        assert trace.iterations_used % n == 0

    def test_recorded_objective_non_decreasing(self, small_data):
        trace = run_sms(small_data, cfg_for("sms", trace_level="full"))
        assert np.all(np.diff(trace.objective) >= -1e-9)

    def test_bandwidth_constant(self, small_data):
        trace = run_sms(small_data, cfg_for("sms", trace_level="shifts"))
        assert np.all(trace.bandwidth == 0.6)

    def test_max_iter_budget(self, small_data):
        trace = run_sms(small_data, cfg_for("sms", max_iterations=7))
        assert trace.stop_reason == "max_iter"
        assert trace.iterations_used == 7


class TestSmsReplay:
    """Replay the traced decisions through the numpy operator as an oracle."""

    @pytest.mark.parametrize("algo", ["sms", "dsms"])
    def test_trace_matches_numpy_replay(self, algo, small_data):
        trace = run(small_data, cfg_for(algo, trace_level="full"))
        state = small_data.copy()
        for s in range(trace.iterations_used):
            i = int(trace.chosen_index[s])
            h = float(trace.bandwidth[s])
            before = objective(state, h, P2)
            out = mean_shift_op(state, state[i], h, P2)
            np.testing.assert_allclose(
                out.shift_norm, trace.shift_norm[s], rtol=1e-9, atol=1e-12
            )
            state[i] = out.new_point
            after = objective(state, h, P2)
            assert trace.objective_delta[s] == pytest.approx(
                after - before, rel=1e-7, abs=1e-9
            )
            assert trace.objective[s] == pytest.approx(after, rel=1e-9)
        np.testing.assert_allclose(trace.final_state, state, rtol=1e-9, atol=1e-12)

    def test_gradient_norm_matches_identity(self, small_data):
        # norm of the partial gradient = (2/h^2) * weight_sum * shift
        trace = run_dsms(small_data, cfg_for("dsms", trace_level="full"))
        state = small_data.copy()
        for s in range(min(trace.iterations_used, 400)):
            i = int(trace.chosen_index[s])
            h = float(trace.bandwidth[s])
            out = mean_shift_op(state, state[i], h, P2)
            expected = 2.0 / (h * h) * out.weight_sum * out.shift_norm
            assert trace.gradient_norm[s] == pytest.approx(
                expected, rel=1e-8, abs=1e-12
            )
            state[i] = out.new_point


class TestDsms:
    def test_degenerate_schedule_equals_sms(self, small_data):
        sms = run_sms(small_data, cfg_for("sms", bandwidth=0.6, trace_level="full"))
        dsms = run_dsms(
            small_data,
            cfg_for("dsms", h_min=0.6, h_max=0.6, h_init=0.6, trace_level="full"),
        )
        np.testing.assert_array_equal(sms.final_state, dsms.final_state)
        np.testing.assert_array_equal(sms.chosen_index, dsms.chosen_index)
        np.testing.assert_array_equal(sms.shift_norm, dsms.shift_norm)
        np.testing.assert_array_equal(dsms.bandwidth, 0.6)

    def test_all_coincident_converges_immediately(self):
        # every shift is zero; the run stops at the first diagnosis window
        # in which every point has been drawn at least once
        data = as_state(np.tile([1.0, 2.0], (6, 1)))
        trace = run_dsms(data, cfg_for("dsms"))
        assert trace.stop_reason == "converged"
        assert trace.iterations_used % 6 == 0
        assert trace.iterations_used <= 60
        np.testing.assert_array_equal(trace.final_state, data)

    def test_bandwidths_stay_in_range(self, small_data):
        trace = run_dsms(small_data, cfg_for("dsms", trace_level="shifts"))
        assert trace.bandwidth.min() >= 0.2
        assert trace.bandwidth.max() <= 1.6

    def test_per_step_ascent_and_bound_hold(self, small_data):
        # the engine itself raises EngineInvariantError when these fail,
        # so a clean full-trace run is already evidence; re-check here
        trace = run_dsms(small_data, cfg_for("dsms", trace_level="full"))
        floor = 2.0 * 2 / trace.bandwidth**2 * trace.shift_norm**2
        assert np.all(trace.objective_delta >= floor - 1e-9)
        n = small_data.shape[0]
        cap = 2.0 * n * 2 / trace.bandwidth**2 * trace.shift_norm
        assert np.all(trace.gradient_norm <= cap + 1e-9)

    def test_final_state_is_near_critical_for_small_h(self, small_data):
        trace = run_dsms(small_data, cfg_for("dsms"))
        assert trace.stop_reason == "converged"
        assert is_critical(trace.final_state, 0.2, tol=1e-3 * 0.2)

    def test_bbox_confinement(self, small_data):
        lo, hi = bounding_box(small_data)
        trace = run_dsms(small_data, cfg_for("dsms", trace_level="full"))
        assert np.all(trace.final_state >= lo - 1e-9)
        assert np.all(trace.final_state <= hi + 1e-9)


class TestTamperedEngineFailsAscent:
    def test_stale_state_updates_violate_ascent(self, small_data):
        # deliberately broken variant: shift against the ORIGINAL data while
        # the state evolves; the fixed-bandwidth climb guarantee must break
        rng = np.random.default_rng(12)
        h = 0.6
        state = small_data.copy()
        frozen = small_data.copy()
        violated = False
        for _ in range(600):
            i = int(rng.integers(0, state.shape[0]))
            out = mean_shift_op(frozen, state[i], h, P2)
            before = objective(state, h, P2)
            old = state[i].copy()
            state[i] = out.new_point
            after = objective(state, h, P2)
            shift = float(np.linalg.norm(state[i] - old))
            if after - before < 2.0 * 2 / (h * h) * shift**2 - 1e-9:
                violated = True
                break
        assert violated


class TestBms:
    def test_critical_state_noop_first_sweep(self):
        data = as_state([[0.0, 0.0], [0.0, 0.0], [5.0, 5.0]])
        trace = run_bms(data, cfg_for("bms", bandwidth=1.0))
        assert trace.stop_reason == "converged"
        assert trace.iterations_used == 1
        np.testing.assert_array_equal(trace.final_state, data)

    def test_symmetric_pair_midpoint_invariant(self):
        data = as_state([[-0.15, 0.0], [0.15, 0.0]])
        trace = run_bms(data, cfg_for("bms", bandwidth=0.6, trace_level="shifts"))
        assert trace.stop_reason == "converged"
        mid = trace.final_state.mean(axis=0)
        np.testing.assert_allclose(mid, [0.0, 0.0], atol=1e-12)
        # points contracted onto each other
        assert np.linalg.norm(trace.final_state[0] - trace.final_state[1]) < 1e-6

    def test_one_sweep_equals_frozen_operator_calls(self, small_data):
        expected = np.vstack(
            [
                mean_shift_op(small_data, small_data[i], 0.6, P2).new_point
                for i in range(small_data.shape[0])
            ]
        )
        np.testing.assert_allclose(
            _first_sweep_state(small_data), expected, rtol=1e-12
        )

    def test_objective_non_decreasing(self, small_data):
        trace = run_bms(small_data, cfg_for("bms", trace_level="full"))
        assert np.all(np.diff(trace.objective) >= -1e-9)


def _first_sweep_state(data):
    trace = run_bms(
        data,
        RunConfig(
            algorithm="bms",
            max_iterations=data.shape[0],  # exactly one sweep
            convergence_threshold=1e-30,
        ),
    )
    return trace.final_state


class TestMs:
    def test_coincident_points_one_iteration(self):
        data = as_state(np.tile([0.5, 0.5], (4, 1)))
        trace = run_ms(data, cfg_for("ms"))
        assert trace.stop_reason == "converged"
        np.testing.assert_array_equal(trace.final_state, data)

    def test_far_points_unmoved(self):
        data = as_state([[0.0, 0.0], [5.0, 0.0]])
        trace = run_ms(data, cfg_for("ms", bandwidth=0.6))
        np.testing.assert_array_equal(trace.final_state, data)
        assert not trace.isolated.any()

    def test_trajectories_against_fixed_state(self):
        # iterating the operator by hand must reproduce each endpoint
        data, _ = generate(paper_spec(5), 17)
        cfg = cfg_for("ms", bandwidth=0.6)
        trace = run_ms(data, cfg)
        for i in range(data.shape[0]):
            y = data[i].copy()
            for _ in range(cfg.max_iterations // data.shape[0]):
                out = mean_shift_op(data, y, 0.6, P2)
                y = out.new_point
                if out.shift_norm < cfg.convergence_threshold:
                    break
            np.testing.assert_allclose(trace.final_state[i], y, rtol=1e-10)

    def test_endpoints_inside_bbox(self):
        data, _ = generate(paper_spec(30), 3)
        lo, hi = bounding_box(data)
        trace = run_ms(data, cfg_for("ms"))
        assert np.all(trace.final_state >= lo - 1e-9)
        assert np.all(trace.final_state <= hi + 1e-9)


class TestConvergenceCheck:
    def test_all_small_after_all_drawn(self):
        assert convergence_check([0.0, 0.0, 0.0], 1e-6)

    def test_undrawn_point_blocks(self):
        assert not convergence_check([0.0, np.inf, 0.0], 1e-6)

    def test_max_rule(self):
        shifts = [1e-7, 1e-7, 1e-5, 1e-7]
        assert not convergence_check(shifts, 1e-6)
        assert convergence_check(shifts, 1e-4)

    def test_fraction_relaxation(self):
        shifts = [0.0, 0.0, 0.0, np.inf]
        assert not convergence_check(shifts, 1e-6, fraction=1.0)
        assert convergence_check(shifts, 1e-6, fraction=0.75)

    def test_fraction_respected_by_engine(self, small_data):
        strict = run_sms(small_data, cfg_for("sms"))
        relaxed = run_sms(small_data, cfg_for("sms", convergence_fraction=0.5))
        assert relaxed.iterations_used <= strict.iterations_used


class TestMsVsBmsOnSingleCloud:
    def test_counts_recorded_for_both(self):
        from mslab.clusters import extract_clusters

        spec = GmmSpec((GmmComponent((0.0, 0.0), 0.65, 100),))
        pts, _ = generate(spec, 21)
        ms = run_ms(pts, cfg_for("ms", bandwidth=0.6))
        bms = run_bms(pts, cfg_for("bms", bandwidth=0.6))
        c_ms = extract_clusters(ms.final_state, 0.3).cluster_count
        c_bms = extract_clusters(bms.final_state, 0.3).cluster_count
        # a rough kernel on one cloud resolves one or more modes; both
        # extractions must produce a sane count on the same data
        assert c_ms >= 1 and c_bms >= 1
        assert ms.stop_reason == "converged"
        assert bms.stop_reason == "converged"


class TestValidation:
    def test_bad_algorithm(self):
        with pytest.raises(ValueError):
            RunConfig(algorithm="kmeans").validate()

    def test_bad_trace_level(self):
        with pytest.raises(ValueError):
            RunConfig(algorithm="sms", trace_level="verbose").validate()

    def test_bad_bandwidth(self):
        with pytest.raises(ValueError):
            RunConfig(algorithm="sms", bandwidth=0.0).validate()

    def test_bad_range(self):
        with pytest.raises(ValueError):
            RunConfig(algorithm="dsms", h_min=1.0, h_max=0.5).validate()
        with pytest.raises(ValueError):
            RunConfig(algorithm="dsms", h_init=5.0).validate()

    def test_trace_levels_control_arrays(self, small_data):
        off = run_sms(small_data, cfg_for("sms", trace_level="off"))
        assert off.shift_norm is None and off.objective is None
        shifts = run_sms(small_data, cfg_for("sms", trace_level="shifts"))
        assert shifts.shift_norm is not None and shifts.objective is None
        full = run_sms(small_data, cfg_for("sms", trace_level="full"))
        assert full.objective is not None and full.gradient_norm is not None

    def test_to_dict_roundtrippable(self, small_data):
        trace = run_sms(small_data, cfg_for("sms", trace_level="shifts"))
        d = trace.to_dict()
        assert d["algorithm"] == "sms"
        assert len(d["shift_norm"]) == trace.iterations_used
