import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment

from outctrl.controllability import cross_check, kalman_output_test
from outctrl.errors import DimensionError, FormatError, GenerationError
from outctrl.lti_model import (
    LtiSystem,
    clip_norm,
    deserialize,
    from_dict,
    parallel_connect,
    random_system,
    sample_systems,
    serialize,
    shifted,
    validate,
)
from outctrl.numerics import rank_of, spectrum_of


def scalar(a, b, c):
    return LtiSystem([[a]], [[b]], [[c]])


class TestValidate:
    def test_ok(self):
        sys = LtiSystem(np.eye(2), np.ones((2, 1)), np.ones((1, 2)))
        validate(sys)
        assert sys.dims == (2, 1, 1)

    def test_a_not_square(self):
        with pytest.raises(DimensionError, match="A not square") as info:
            LtiSystem(np.ones((2, 3)), np.ones((2, 1)), np.ones((1, 2)))
        assert info.value.field == "A"

    def test_b_rows(self):
        with pytest.raises(DimensionError, match="B row count") as info:
            LtiSystem(np.eye(2), np.ones((3, 1)), np.ones((1, 2)))
        assert info.value.field == "B"
        assert info.value.actual == (3, 1)

    def test_c_columns(self):
        with pytest.raises(DimensionError, match="C column count"):
            LtiSystem(np.eye(2), np.ones((2, 1)), np.ones((1, 3)))

    def test_empty_input(self):
        with pytest.raises(DimensionError):
            LtiSystem(np.eye(2), np.ones((2, 0)), np.ones((1, 2)))

    def test_non_finite(self):
        with pytest.raises(ValueError):
            LtiSystem([[np.inf]], [[1.0]], [[1.0]])

    def test_read_only(self):
        sys = scalar(1, 1, 1)
        with pytest.raises(ValueError):
            sys.A[0, 0] = 2.0


class TestParallelConnect:
    def test_single_is_identity(self, rng):
        s = random_system(3, 2, 2, 1, "generic")
        assert parallel_connect([s]) == s

    def test_scalars(self):
        c = parallel_connect([scalar(1, 2, 3), scalar(4, 5, 6)])
        np.testing.assert_array_equal(c.A, np.diag([1, 4]))
        np.testing.assert_array_equal(c.B, [[2], [5]])
        np.testing.assert_array_equal(c.C, np.diag([3, 6]))

    def test_block_placement(self):
        s1 = LtiSystem([[1, 2], [3, 4]], [[1], [1]], [[1, 0]])
        s2 = scalar(7, 1, 1)
        c = parallel_connect([s1, s2])
        assert c.A.shape == (3, 3)
        assert c.A[2, 2] == 7
        np.testing.assert_array_equal(c.A[:2, :2], s1.A)
        assert np.all(c.A[:2, 2] == 0) and np.all(c.A[2, :2] == 0)
        np.testing.assert_array_equal(c.C, [[1, 0, 0], [0, 0, 1]])

    def test_width_mismatch(self):
        s1 = LtiSystem([[0]], [[1, 1]], [[1]])
        with pytest.raises(DimensionError, match="common input width"):
            parallel_connect([s1, scalar(0, 1, 1)])

    def test_empty(self):
        with pytest.raises(DimensionError):
            parallel_connect([])

    def test_dims_and_spectrum_union(self, rng):
        for seed in range(30):
            r = np.random.default_rng(seed)
            m = int(r.integers(1, 4))
            members = [
                random_system(int(r.integers(1, 4)), m, int(r.integers(1, 4)), int(r.integers(2**32)), "generic")
                for _ in range(int(r.integers(1, 4)))
            ]
            c = parallel_connect(members)
            validate(c)
            assert c.dims == (sum(s.n for s in members), m, sum(s.p for s in members))
            union = np.concatenate([spectrum_of(s.A).raw for s in members])
            got = spectrum_of(c.A).raw
            cost = np.abs(union[:, None] - got[None, :])
            i, j = linear_sum_assignment(cost)
            assert cost[i, j].max() < 1e-8 * (1 + np.linalg.norm(c.A, 2))

    def test_associative_up_to_permutation(self):
        for seed in range(20):
            r = np.random.default_rng(seed)
            m = int(r.integers(1, 3))
            s1, s2, s3 = (
                random_system(int(r.integers(1, 3)), m, int(r.integers(1, 3)), int(r.integers(2**32)), "jordan")
                for _ in range(3)
            )
            nested = parallel_connect([parallel_connect([s1, s2]), s3])
            flat = parallel_connect([s1, s2, s3])
            # block sizes line up, so the permutation relating the two is the identity
            assert nested == flat
            a, b = cross_check(nested), cross_check(flat)
            assert {c: v.positive for c, v in a.verdicts.items()} == {c: v.positive for c, v in b.verdicts.items()}

    def test_permuted_order_is_similar(self):
        s1 = random_system(2, 2, 1, 11, "generic")
        s2 = random_system(3, 2, 2, 12, "generic")
        c12 = parallel_connect([s1, s2])
        c21 = parallel_connect([s2, s1])
        P = np.zeros((5, 5))
        P[np.arange(5), [2, 3, 4, 0, 1]] = 1  # x21 = P x12
        Q = np.zeros((3, 3))
        Q[np.arange(3), [1, 2, 0]] = 1
        np.testing.assert_array_equal(P @ c12.A @ P.T, c21.A)
        np.testing.assert_array_equal(P @ c12.B, c21.B)
        np.testing.assert_array_equal(Q @ c12.C @ P.T, c21.C)
        assert kalman_output_test(c12).positive == kalman_output_test(c21).positive


class TestSerialization:
    def test_plain_numbers_and_pairs(self):
        doc = {"A": [[0, [1, 2]], [3.5, 0]], "B": [[1], [0]], "C": [[1, 0]], "name": "toy"}
        s = from_dict(doc)
        assert s.A[0, 1] == 1 + 2j
        assert s.A[1, 0] == 3.5
        assert s.name == "toy"

    @pytest.mark.parametrize(
        "doc",
        [
            {"A": [[1]], "B": [[1]]},
            {"A": [[1, 2], [3]], "B": [[1]], "C": [[1]]},
            {"A": [["x"]], "B": [[1]], "C": [[1]]},
            {"A": [[[1, 2, 3]]], "B": [[1]], "C": [[1]]},
            {"A": [[True]], "B": [[1]], "C": [[1]]},
            [1, 2],
        ],
    )
    def test_malformed(self, doc):
        with pytest.raises(FormatError):
            from_dict(doc)

    def test_invalid_json(self):
        with pytest.raises(FormatError):
            deserialize("{not json")

    def test_dimension_errors_surface(self):
        with pytest.raises(DimensionError):
            deserialize(json.dumps({"A": [[1, 0]], "B": [[1]], "C": [[1]]}))

    @settings(max_examples=100, deadline=None)
    @given(
        st.integers(1, 5),
        st.integers(1, 4),
        st.integers(1, 4),
        st.sampled_from(["generic", "rank_deficient_C", "jordan"]),
        st.integers(0, 2**32 - 1),
    )
    def test_round_trip_bit_exact(self, n, m, p, kind, seed):
        s = random_system(n, m, p, seed, kind)
        back = deserialize(serialize(s))
        assert back == s
        for key in "ABC":
            assert getattr(back, key).tobytes() == getattr(s, key).tobytes()


class TestRandomSystem:
    @pytest.mark.parametrize("kind", ["generic", "rank_deficient_C", "forced_output_controllable", "jordan"])
    def test_deterministic(self, kind):
        assert random_system(3, 3, 2, 99, kind) == random_system(3, 3, 2, 99, kind)
        assert random_system(3, 3, 2, 99, kind) != random_system(3, 3, 2, 100, kind)

    def test_rank_deficient(self):
        for seed in range(20):
            s = random_system(4, 2, 2, seed, "rank_deficient_C")
            assert rank_of(s.C).rank == 1

    def test_rank_deficient_single_output(self):
        assert np.all(random_system(3, 2, 1, 0, "rank_deficient_C").C == 0)

    def test_scalar_generic_controllable(self):
        for seed in range(20):
            s = random_system(1, 1, 1, seed, "generic")
            assert s.B[0, 0] != 0 and s.C[0, 0] != 0
            assert kalman_output_test(s).positive

    @pytest.mark.parametrize("dims", [(4, 3, 2), (5, 1, 3), (2, 4, 2), (1, 1, 1)])
    def test_forced(self, dims):
        for seed in range(10):
            assert kalman_output_test(random_system(*dims, seed, "forced_output_controllable")).positive

    def test_forced_impossible(self):
        with pytest.raises(GenerationError):
            random_system(2, 3, 3, 0, "forced_output_controllable")

    def test_jordan_has_repeats(self):
        # Nonderogatory blocks split by about eps**(1/k) in floating point, so
        # count near-coincident computed eigenvalues rather than clusters.
        repeats = 0
        for seed in range(40):
            s = random_system(5, 1, 1, seed, "jordan")
            lam = spectrum_of(s.A).raw
            gaps = np.abs(lam[:, None] - lam[None, :]) + np.eye(5)
            repeats += gaps.min() < 1e-3
        assert repeats > 24

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            random_system(2, 2, 2, 0, "nope")

    def test_bad_dims(self):
        with pytest.raises(DimensionError):
            random_system(0, 1, 1, 0)


def test_sample_stream_reproducible():
    a = [(s.kind, s.seed, s.system) for s in sample_systems(7, 20)]
    b = [(s.kind, s.seed, s.system) for s in sample_systems(7, 20)]
    assert a == b
    for kind, seed, sys in a:
        assert random_system(*sys.dims, seed, kind) == sys


def test_clip_and_shift():
    s = random_system(4, 2, 2, 3, "generic")
    c = clip_norm(s, 1.5)
    assert np.linalg.norm(c.A, 2) == pytest.approx(1.5)
    assert clip_norm(c, 10.0) is c
    z = shifted(s, 2.0)
    np.testing.assert_allclose(np.sort_complex(spectrum_of(z.A).raw), np.sort_complex(spectrum_of(s.A).raw + 2), atol=1e-12)
