import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_rotation
from prs4d.constellation import (
    DEFAULT_ORTHANT_BIT_MAP,
    LabeledConstellation,
    distance_spectrum,
    dumps_constellation,
    extract_generators,
    gray_check,
    is_constant_modulus,
    loads_constellation,
    normalize,
    orthant_expand,
    project_2d,
    standardized_moment,
)
from prs4d.errors import DegenerateInputError, ValidationError
from prs4d.formats import TABLE_NU, table1_reference


def rounded_table_constellation():
    """Reference structure with the coordinates rounded to two decimals."""
    ref = table1_reference()
    nu_rounded = {v: r for v, r in zip(sorted(TABLE_NU), (0.87, 1.0, 2.47))}
    pts = np.sign(ref.points) * np.vectorize(lambda a: nu_rounded[a])(np.abs(ref.points))
    return LabeledConstellation(pts, ref.labels, 6)


def random_constellation(rng, m=4, ndim=4):
    pts = rng.standard_normal((2 ** m, ndim))
    return LabeledConstellation(pts, rng.permutation(2 ** m), m)


class TestValidation:
    def test_labels_must_be_permutation(self):
        pts = np.arange(8.0).reshape(4, 2)
        with pytest.raises(ValidationError, match="permutation"):
            LabeledConstellation(pts, [0, 1, 2, 2], 2)

    def test_point_count_must_match_m(self):
        pts = np.arange(8.0).reshape(4, 2)
        with pytest.raises(ValidationError, match="points"):
            LabeledConstellation(pts, [0, 1, 2, 3], 3)

    def test_duplicate_points_rejected(self):
        pts = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        with pytest.raises(ValidationError, match="duplicate"):
            LabeledConstellation(pts, [0, 1, 2, 3], 2)

    def test_points_are_immutable(self, table1):
        with pytest.raises(ValueError):
            table1.points[0, 0] = 9.9


class TestNormalize:
    def test_rounded_table_scale(self):
        # direct arithmetic: scale^2 = 2 / (nu1^2 + nu3^2 + 2 nu2^2) ~ 0.2258
        c = normalize(rounded_table_constellation(), 2.0)
        scale2 = c.points[0, 0] ** 2 / 0.87 ** 2
        assert scale2 == pytest.approx(2.0 / (0.87 ** 2 + 2.47 ** 2 + 2.0), rel=1e-12)
        assert scale2 == pytest.approx(0.2258, abs=5e-5)
        assert np.allclose(c.energies, 2.0)

    def test_idempotent(self, table1):
        again = normalize(table1, 2.0)
        np.testing.assert_array_equal(again.points, table1.points)

    def test_scale_invariance(self, table1):
        scaled = table1.with_points(table1.points * 7.0)
        back = normalize(scaled, 2.0)
        np.testing.assert_allclose(back.points, table1.points, rtol=1e-12)

    def test_mean_energy_exact_for_random_inputs(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            c = random_constellation(rng)
            es = float(rng.uniform(0.1, 10.0))
            out = normalize(c, es)
            assert abs(out.mean_energy - es) <= 1e-12 * es

    def test_degenerate_input(self):
        tiny = LabeledConstellation(
            np.array([[0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1e-300]]), [0, 1], 1)
        with pytest.raises(DegenerateInputError):
            normalize(tiny, 2.0)


class TestConstantModulus:
    def test_reference_format(self, table1):
        assert is_constant_modulus(table1, 1e-9)

    def test_pm8qam_is_not(self, pm8qam):
        # brute force: two distinct 4D energies exist
        assert len(np.unique(np.round(pm8qam.energies, 9))) > 1
        assert not is_constant_modulus(pm8qam, 1e-9)

    def test_pm8psk_is(self, pm8psk):
        assert is_constant_modulus(pm8psk, 1e-9)


class TestMoments:
    def test_pm8psk_unity(self, pm8psk):
        assert standardized_moment(pm8psk, 4) == pytest.approx(1.0, abs=1e-12)
        assert standardized_moment(pm8psk, 6) == pytest.approx(1.0, abs=1e-12)

    def test_pm16qam_enumeration(self, pm16qam):
        # independent enumeration over the 16 per-polarization points
        levels = np.array([-3.0, -1.0, 1.0, 3.0]) / math.sqrt(10.0)
        mods2 = np.array([x * x + y * y for x in levels for y in levels])
        mu4 = np.mean(mods2 ** 2) / np.mean(mods2) ** 2
        assert mu4 == pytest.approx(1.32, abs=1e-12)
        assert standardized_moment(pm16qam, 4) == pytest.approx(mu4, rel=1e-12)

    def test_gaussian_limit(self):
        # analytic moments of a circular complex Gaussian: E|x|^4 = 2 (E|x|^2)^2
        # and E|x|^6 = 6 (E|x|^2)^3; a large sample must approach them
        rng = np.random.default_rng(3)
        pts = rng.standard_normal((4096, 4))
        c = LabeledConstellation(pts, rng.permutation(4096), 12)
        assert standardized_moment(c, 4) == pytest.approx(2.0, abs=0.15)
        assert standardized_moment(c, 6) == pytest.approx(6.0, abs=1.0)

    @given(scale=st.floats(0.01, 100.0))
    @settings(max_examples=25, deadline=None)
    def test_scale_invariance(self, scale):
        rng = np.random.default_rng(7)
        c = random_constellation(rng)
        mu = standardized_moment(c, 4)
        scaled = c.with_points(c.points * scale)
        assert standardized_moment(scaled, 4) == pytest.approx(mu, rel=1e-12)

    def test_centering_handles_offset_inputs(self):
        rng = np.random.default_rng(11)
        c = random_constellation(rng)
        shifted = c.with_points(c.points + np.array([1.5, -0.5, 2.0, 0.25]))
        assert standardized_moment(shifted, 4) == pytest.approx(
            standardized_moment(c, 4), rel=1e-9)

    def test_odd_order_rejected(self, table1):
        with pytest.raises(ValidationError):
            standardized_moment(table1, 3)


class TestDistanceSpectrum:
    def test_reference_rows(self, table1):
        spec = distance_spectrum(table1)
        assert spec.msed == pytest.approx(0.69, abs=0.005)
        assert spec.msed_count == 32
        hd1 = [(e.d2, e.hd1_count) for e in spec.entries if e.hd1_count > 0]
        expected = [(0.69, 32), (0.90, 64), (0.98, 64), (5.50, 32)]
        assert len(hd1) == len(expected)
        for (d2, n), (d2e, ne) in zip(hd1, expected):
            assert d2 == pytest.approx(d2e, abs=0.01)
            assert n == ne

    def test_total_pair_count(self, table1, pm8qam):
        for c in (table1, pm8qam):
            assert distance_spectrum(c).total_pairs == c.M * (c.M - 1) // 2

    def test_rotation_invariance(self, table1):
        rng = np.random.default_rng(5)
        base = [(e.d2, e.count, e.hd1_count) for e in distance_spectrum(table1).entries]
        for _ in range(5):
            rot = table1.with_points(table1.points @ random_rotation(rng))
            got = [(e.d2, e.count, e.hd1_count) for e in distance_spectrum(rot).entries]
            assert len(got) == len(base)
            for (d2a, na, ha), (d2b, nb, hb) in zip(base, got):
                assert d2a == pytest.approx(d2b, abs=1e-9)
                assert (na, ha) == (nb, hb)

    def test_single_polarization_qpsk(self):
        # brute force over 4 points: adjacent pairs at 2 r^2 (4 of them),
        # antipodal at 4 r^2 (2 of them); the fixed polarization cancels
        r = 1.3
        ang = np.pi / 2 * np.arange(4)
        pts = np.stack([r * np.cos(ang), r * np.sin(ang),
                        np.full(4, 0.7), np.zeros(4)], axis=1)
        c = LabeledConstellation(pts, [0, 1, 3, 2], 2)
        spec = distance_spectrum(c)
        assert [(round(e.d2, 9), e.count) for e in spec.entries] == [
            (round(2 * r * r, 9), 4), (round(4 * r * r, 9), 2)]

    def test_bucket_merge_tolerance(self):
        eps = 1e-12
        pts = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0 + eps], [0.0, -1.0]])
        spec = distance_spectrum(LabeledConstellation(pts, [0, 1, 3, 2], 2))
        # the four near-equal sqrt(2) distances merge into one bucket
        assert spec.entries[0].count == 4


class TestGrayCheck:
    def test_reference_formats(self, table1, pm8qam):
        assert gray_check(table1) is True
        assert gray_check(pm8qam) is False

    def test_two_point_format(self):
        c = LabeledConstellation(np.array([[1.0, 0.0], [-1.0, 0.0]]), [0, 1], 1)
        assert gray_check(c) is True

    def test_agrees_with_spectrum(self, table1):
        rng = np.random.default_rng(9)
        for _ in range(20):
            c = table1.with_labels(rng.permutation(64))
            spec = distance_spectrum(c)
            head = spec.entries[0]
            assert gray_check(c) == (head.hd1_count == head.count)


class TestOrthantExpand:
    def test_single_generator_counts(self):
        c = orthant_expand(np.array([[0.3, 0.7, 1.1, 0.2]]), [0])
        assert c.M == 16 and c.m == 4
        signs = {tuple(np.sign(p).astype(int)) for p in c.points}
        assert len(signs) == 16

    def test_duplicate_generators_rejected(self):
        gens = np.array([[1.0, 2.0, 3.0, 4.0]] * 2)
        with pytest.raises(ValidationError, match="duplicate"):
            orthant_expand(gens, [0, 1])

    def test_zero_coordinate_rejected(self):
        with pytest.raises(ValidationError, match="positive orthant"):
            orthant_expand(np.array([[1.0, 0.0, 1.0, 1.0]]), [0])

    def test_constant_modulus_iff_equal_norms(self):
        equal = orthant_expand(np.array([[1.0, 1.0, 1.0, 1.0],
                                         [0.5, 0.5, 0.5, math.sqrt(3.25)]]), [0, 1])
        assert is_constant_modulus(equal, 1e-9)
        unequal = orthant_expand(np.array([[1.0, 1.0, 1.0, 1.0],
                                           [0.5, 0.5, 0.5, 0.5]]), [0, 1])
        assert not is_constant_modulus(unequal, 1e-9)

    def test_round_trip_extraction(self, table1):
        gens, glabels, bitmap = extract_generators(table1)
        assert bitmap == DEFAULT_ORTHANT_BIT_MAP
        rebuilt = orthant_expand(gens, glabels, bitmap)
        a = sorted((tuple(np.round(p, 12)), int(l))
                   for p, l in zip(rebuilt.points, rebuilt.labels))
        b = sorted((tuple(np.round(p, 12)), int(l))
                   for p, l in zip(table1.points, table1.labels))
        assert a == b


class TestProjection:
    def test_reference_projections(self, table1):
        for pol in (1, 2):
            coords, counts = project_2d(table1, pol)
            assert len(counts) == 12
            assert counts.sum() == 64
        c1, _ = project_2d(table1, 1)
        c2, _ = project_2d(table1, 2)
        assert (sorted(map(tuple, np.round(c1, 9)))
                == sorted(map(tuple, np.round(c2, 9))))

    def test_pm8qam_projection(self, pm8qam):
        coords, counts = project_2d(pm8qam, 1)
        assert len(counts) == 8
        assert set(counts) == {8}

    def test_bad_polarization(self, table1):
        with pytest.raises(ValidationError):
            project_2d(table1, 3)


class TestFileIO:
    def test_round_trip(self, table1, tmp_path):
        text = dumps_constellation(table1)
        back = loads_constellation(text)
        np.testing.assert_array_equal(back.points, table1.points)
        np.testing.assert_array_equal(back.labels, table1.labels)
        assert back.m == table1.m

    def test_seventeen_digit_points(self, table1):
        text = dumps_constellation(table1)
        assert f"{float(table1.points[0, 0]):.17g}" in text

    def test_inconsistent_m_rejected(self, table1):
        obj = json.loads(dumps_constellation(table1))
        obj["m"] = 5
        with pytest.raises(ValidationError, match="inconsistent"):
            loads_constellation(json.dumps(obj))

    def test_duplicate_labels_rejected(self, table1):
        obj = json.loads(dumps_constellation(table1))
        obj["labels"][1] = obj["labels"][0]
        with pytest.raises(ValidationError, match="permutation"):
            loads_constellation(json.dumps(obj))

    def test_malformed_json_rejected(self):
        with pytest.raises(ValidationError, match="malformed"):
            loads_constellation("{not json")
