import math

import numpy as np
import pytest

from beamrl.errors import CompletenessError, DomainError, ShapeError
from beamrl.metrics import (
    BeamAssignment,
    LinkBudget,
    cross_powers,
    inter_stream_interference,
    multi_user_interference,
    rate_report,
    received_power,
    sinr,
    slot_metrics,
    stream_rate,
)
from beamrl.numerics import RngStream, cgauss


def unit(v):
    return v / np.linalg.norm(v)


def random_instance(rng, k, n_s, n, m, power_w=1.0, noise_w=1.0):
    budget = LinkBudget(power_w=power_w, noise_w=noise_w, k=k, n_s=n_s)
    channels = cgauss(rng, (k, n, m))
    precoders = np.stack(
        [[unit(cgauss(rng, m)) for _ in range(n_s)] for _ in range(k)]
    )
    combiners = np.stack(
        [[unit(cgauss(rng, n)) for _ in range(n_s)] for _ in range(k)]
    )
    return BeamAssignment(precoders=precoders, combiners=combiners), channels, budget


def scalar_cross_power(w, h, p):
    """Independent scalar-loop evaluation of |w^H H p|^2."""
    acc = 0.0 + 0.0j
    for r in range(h.shape[0]):
        row = 0.0 + 0.0j
        for c in range(h.shape[1]):
            row += h[r, c] * p[c]
        acc += np.conj(w[r]) * row
    return abs(acc) ** 2


class TestReceivedPower:
    def test_orthogonal_through_identity(self):
        budget = LinkBudget(1.0, 1.0, 1, 1)
        w = np.array([1.0, 0.0], dtype=complex)
        p = np.array([0.0, 1.0], dtype=complex)
        assert received_power(w, np.eye(2), p, budget) == pytest.approx(0.0, abs=1e-30)

    def test_identity_aligned(self):
        budget = LinkBudget(1.0, 1.0, 1, 1)
        e1 = np.array([1.0, 0.0], dtype=complex)
        assert received_power(e1, np.eye(2), e1, budget) == pytest.approx(1.0)

    def test_vs_scalar_loop(self):
        rng = RngStream(1, "rp")
        budget = LinkBudget(2.0, 1.0, 2, 1)  # stream power = 1
        for _ in range(20):
            h = cgauss(rng, (3, 5))
            w = unit(cgauss(rng, 3))
            p = unit(cgauss(rng, 5))
            got = received_power(w, h, p, budget)
            want = budget.stream_power * scalar_cross_power(w, h, p)
            assert got == pytest.approx(want, abs=1e-12 * max(1.0, want))

    def test_shape_error(self):
        budget = LinkBudget(1.0, 1.0, 1, 1)
        with pytest.raises(ShapeError):
            received_power(np.ones(3), np.eye(2), np.ones(2), budget)


class TestInterference:
    def test_single_stream_no_inter(self):
        rng = RngStream(2, "intf")
        a, channels, budget = random_instance(rng, 2, 1, 2, 4)
        assert inter_stream_interference(0, 0, a, channels[0], budget) == 0.0

    def test_single_user_no_multi(self):
        rng = RngStream(3, "intf")
        a, channels, budget = random_instance(rng, 1, 2, 2, 4)
        assert multi_user_interference(0, 0, a, channels[0], budget) == 0.0

    def test_identical_precoders(self):
        rng = RngStream(4, "intf")
        a, channels, budget = random_instance(rng, 1, 2, 2, 4)
        a.precoders[0, 1] = a.precoders[0, 0]
        got = inter_stream_interference(0, 0, a, channels[0], budget)
        want = received_power(a.combiner(0, 0), channels[0], a.precoder(0, 0), budget)
        assert got == pytest.approx(want, rel=1e-12)

    def test_brute_force(self):
        rng = RngStream(5, "intf")
        a, channels, budget = random_instance(rng, 2, 2, 3, 8)
        for k in range(2):
            for n in range(2):
                inter = sum(
                    budget.stream_power
                    * scalar_cross_power(a.combiner(k, n), channels[k], a.precoder(k, i))
                    for i in range(2)
                    if i != n
                )
                multi = sum(
                    budget.stream_power
                    * scalar_cross_power(a.combiner(k, n), channels[k], a.precoder(j, i))
                    for j in range(2)
                    if j != k
                    for i in range(2)
                )
                assert inter_stream_interference(
                    k, n, a, channels[k], budget
                ) == pytest.approx(inter, rel=1e-12)
                assert multi_user_interference(
                    k, n, a, channels[k], budget
                ) == pytest.approx(multi, rel=1e-12)


class TestSinr:
    def test_signal_equals_noise(self):
        budget = LinkBudget(1.0, 1.0, 1, 1)
        e1 = np.array([1.0, 0.0], dtype=complex)
        a = BeamAssignment(
            precoders=e1.reshape(1, 1, 2), combiners=e1.reshape(1, 1, 2)
        )
        assert sinr(0, 0, a, np.eye(2), budget) == pytest.approx(1.0)

    def test_zero_signal(self):
        budget = LinkBudget(1.0, 1.0, 1, 1)
        w = np.array([1.0, 0.0], dtype=complex).reshape(1, 1, 2)
        p = np.array([0.0, 1.0], dtype=complex).reshape(1, 1, 2)
        a = BeamAssignment(precoders=p, combiners=w)
        assert sinr(0, 0, a, np.eye(2), budget) == pytest.approx(0.0, abs=1e-30)

    def test_full_brute_force(self):
        rng = RngStream(6, "sinr")
        a, channels, budget = random_instance(
            rng, 2, 2, 3, 8, power_w=0.1, noise_w=1e-3
        )
        for k in range(2):
            for n in range(2):
                sig = budget.stream_power * scalar_cross_power(
                    a.combiner(k, n), channels[k], a.precoder(k, n)
                )
                inter = inter_stream_interference(k, n, a, channels[k], budget)
                multi = multi_user_interference(k, n, a, channels[k], budget)
                noise = np.vdot(a.combiner(k, n), a.combiner(k, n)).real * budget.noise_w
                want = sig / (inter + multi + noise)
                assert sinr(k, n, a, channels[k], budget) == pytest.approx(
                    want, rel=1e-10
                )


class TestStreamRate:
    def test_values(self):
        assert stream_rate(0.0) == 0.0
        assert stream_rate(1.0) == pytest.approx(1.0)
        assert stream_rate(3.0) == pytest.approx(2.0)

    def test_domain(self):
        with pytest.raises(DomainError):
            stream_rate(-0.1)


class TestRateReport:
    def test_single_stream(self):
        rng = RngStream(7, "rr")
        a, channels, budget = random_instance(rng, 1, 1, 2, 4)
        report = rate_report(a, channels, budget)
        expected = stream_rate(sinr(0, 0, a, channels[0], budget))
        assert report.average == pytest.approx(expected, rel=1e-12)
        assert report.sum == pytest.approx(expected, rel=1e-12)

    def test_zero_channel(self):
        rng = RngStream(8, "rr")
        a, channels, budget = random_instance(rng, 2, 1, 2, 4)
        report = rate_report(a, np.zeros_like(channels), budget)
        assert np.all(report.per_stream == 0.0)
        assert report.average == 0.0

    def test_self_consistency(self):
        rng = RngStream(9, "rr")
        a, channels, budget = random_instance(rng, 3, 2, 3, 8)
        report = rate_report(a, channels, budget)
        recomputed = np.array(
            [
                [
                    stream_rate(sinr(k, n, a, channels[k], budget))
                    for n in range(2)
                ]
                for k in range(3)
            ]
        )
        assert np.allclose(report.per_stream, recomputed, rtol=1e-10)
        assert np.allclose(report.per_user, recomputed.sum(axis=1), rtol=1e-12)
        assert report.average == pytest.approx(report.per_user.mean(), rel=1e-12)
        assert report.sum == pytest.approx(report.per_user.sum(), rel=1e-12)

    def test_completeness(self):
        rng = RngStream(10, "rr")
        a, channels, budget = random_instance(rng, 2, 1, 2, 4)
        with pytest.raises(CompletenessError):
            rate_report(a, channels[:1], budget)


class TestProperties:
    def test_nonnegative_and_finite(self):
        rng = RngStream(11, "prop")
        for _ in range(25):
            a, channels, budget = random_instance(rng, 2, 2, 3, 8)
            x, signal, interference, sinr_t, rates = slot_metrics(a, channels, budget)
            for arr in (x, signal, interference, sinr_t, rates):
                assert np.all(arr >= 0.0)
                assert np.all(np.isfinite(arr))

    def test_combiner_phase_invariance(self):
        rng = RngStream(12, "prop")
        a, channels, budget = random_instance(rng, 2, 2, 3, 8)
        base = rate_report(a, channels, budget)
        phase = np.exp(1j * float(rng.uniform(0, 2 * math.pi)))
        rotated = BeamAssignment(
            precoders=a.precoders.copy(), combiners=a.combiners * phase
        )
        rot = rate_report(rotated, channels, budget)
        assert np.allclose(base.per_stream, rot.per_stream, rtol=1e-10)

    def test_power_monotone_with_frozen_interference(self):
        # raising own-stream power with interference held fixed raises SINR
        rng = RngStream(13, "prop")
        a, channels, _ = random_instance(rng, 2, 1, 2, 4)
        lo = LinkBudget(power_w=1.0, noise_w=1e-2, k=2, n_s=1)
        hi = LinkBudget(power_w=4.0, noise_w=1e-2, k=2, n_s=1)
        sig_lo = received_power(a.combiner(0, 0), channels[0], a.precoder(0, 0), lo)
        sig_hi = received_power(a.combiner(0, 0), channels[0], a.precoder(0, 0), hi)
        frozen = multi_user_interference(0, 0, a, channels[0], lo)
        assert sig_hi / (frozen + lo.noise_w) > sig_lo / (frozen + lo.noise_w)

    def test_cross_powers_table(self):
        rng = RngStream(14, "prop")
        a, channels, _ = random_instance(rng, 2, 2, 3, 8)
        x = cross_powers(a, channels)
        for k in range(2):
            for n in range(2):
                for j in range(2):
                    for i in range(2):
                        want = scalar_cross_power(
                            a.combiner(k, n), channels[k], a.precoder(j, i)
                        )
                        assert x[k, n, j, i] == pytest.approx(
                            want, rel=1e-11, abs=1e-14
                        )
