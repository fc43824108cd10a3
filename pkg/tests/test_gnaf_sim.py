import numpy as np
import pytest

from dstc import matkernel as mk
from dstc.designs import (Design, build_pciod, build_toeplitz, golden_cda,
                          relay_matrix_set)
from dstc.gnaf_sim import (ChannelRealization, NoiseDraw, ProtocolParams,
                           SimConfig, build_effective, draw_noise, make_rng,
                           noise_cov, protocol_params, results_to_csv,
                           run_monte_carlo, sample_channel, simulate_trial,
                           whiten)
from dstc.precoding import default_lattice
from dstc.receivers import lattice_codebook
from dstc.verifier import compute_gamma


def zero_noise(params):
    return NoiseDraw(np.zeros(params.t1, complex),
                     np.zeros(params.t2, complex),
                     np.zeros((params.r, params.t1), complex))


class TestChannel:
    def test_replay_deterministic(self):
        a = sample_channel(3, make_rng(5, 1))
        b = sample_channel(3, make_rng(5, 1))
        assert a.g0 == b.g0
        assert np.array_equal(a.f, b.f) and np.array_equal(a.g, b.g)

    def test_gain_statistics(self):
        n = 10 ** 5
        rng = make_rng(9, 2)
        # same distribution as sample_channel, drawn in bulk
        z = (rng.standard_normal((n, 2)) @ np.array([1.0, 1.0j])) / np.sqrt(2)
        assert abs(np.mean(z.real)) < 3.0 / np.sqrt(2 * n)
        assert abs(np.mean(z.imag)) < 3.0 / np.sqrt(2 * n)
        var = np.mean(np.abs(z) ** 2)
        assert abs(var - 1.0) < 3.0 / np.sqrt(n)

    def test_cross_independence(self):
        n = 10 ** 5
        rng = make_rng(11, 3)
        f = (rng.standard_normal((n, 2)) @ np.array([1.0, 1.0j])) / np.sqrt(2)
        g = (rng.standard_normal((n, 2)) @ np.array([1.0, 1.0j])) / np.sqrt(2)
        cross = np.mean(f * np.conj(g))
        assert abs(cross) < 3.0 / np.sqrt(n)


class TestBuildEffective:
    def unit_relay_design(self):
        # single relay forwarding the received symbol unchanged
        w = np.zeros((2, 1, 1), dtype=complex)
        w[0, 0, 0] = 1.0
        w[1, 0, 0] = 1j
        return Design("custom", 1, 1, 2, w, ("plain",), ((0, 1),))

    def test_hand_computed_gnaf2(self):
        d = self.unit_relay_design()
        params = protocol_params(d, 4.0, "gnaf2")
        ch = ChannelRealization(0.5 + 0.5j, np.array([2.0 + 0j]), np.array([1j]))
        s = np.array([1.0 + 0j])
        smat, h, scale = build_effective(d, params, ch, s)
        c_top = np.sqrt((4.0 + 1.0) / 4.0)
        assert np.allclose(smat, [[c_top], [0], [0], [1.0]][:2] if False else
                           np.array([[c_top * 1.0, 0.0], [0.0, 1.0]]), atol=1e-15)
        assert np.allclose(h, [0.5 + 0.5j, 1j * 2.0], atol=1e-15)
        assert scale == pytest.approx(np.sqrt(16.0 / 5.0))

    def test_zero_symbols_zero_matrix(self):
        d = build_pciod(2)
        params = protocol_params(d, 2.0, "gnaf1")
        ch = sample_channel(2, make_rng(0, 0))
        smat, _, _ = build_effective(d, params, ch, np.zeros(2, complex))
        assert np.all(smat == 0)

    def test_source_block_power_ratio(self):
        # bottom/top source prefactor ratio is sqrt(pi2/pi1)
        d = self.unit_relay_design()
        params = ProtocolParams(p=3.0, pi1=0.5, pi2=2.0, pi3=1.0,
                                t1=1, t2=1, r=1, q=1, variant="gnaf1")
        ch = ChannelRealization(1.0, np.array([1.0 + 0j]), np.array([1.0 + 0j]))
        s = np.array([1.0 + 0j])
        smat, _, _ = build_effective(d, params, ch, s)
        ratio = abs(smat[1, 0]) / abs(smat[0, 0])
        assert ratio == pytest.approx(np.sqrt(params.pi2 / params.pi1))

    @pytest.mark.parametrize("variant", ["gnaf1", "gnaf2", "jh", "direct"])
    def test_effective_matrix_matches_stacked_model(self, variant):
        # the receiver model M must satisfy M @ X = scale * S(X) @ H
        from dstc.gnaf_sim import effective_matrix
        d = None if variant == "direct" else build_pciod(4)
        rng = make_rng(31, 2)
        if variant == "direct":
            params = ProtocolParams(p=3.0, t1=2, t2=1, r=0, q=0, variant=variant)
            ch = ChannelRealization(complex(0.3 - 1.1j), np.zeros(0), np.zeros(0))
            k = 4
            m = effective_matrix(None, params, np.array([ch.g0]),
                                 np.zeros((1, 0), complex), k=k)
        else:
            rs = relay_matrix_set(d)
            params = protocol_params(d, 3.0, variant)
            ch = sample_channel(d.r, rng)
            k = d.k
            h_cols = np.zeros((1, d.r), dtype=complex)
            for i, (cj, col) in enumerate(zip(rs.conj, rs.columns)):
                fi = np.conj(ch.f[i]) if cj else ch.f[i]
                h_cols[0, col] = ch.g[i] * fi
            m = effective_matrix(d, params, np.array([ch.g0]), h_cols)
        for _ in range(10):
            x = rng.standard_normal(k)
            s = x[0::2] + 1j * x[1::2]
            smat, h, scale = build_effective(d, params, ch, s)
            assert np.allclose(m[0] @ x, scale * (smat @ h), atol=1e-12)

    def test_jh_drops_direct_link(self):
        d = build_pciod(2)
        params = protocol_params(d, 2.0, "jh")
        ch = sample_channel(2, make_rng(1, 0))
        s = d.source_vector(np.ones(4))
        smat, h, _ = build_effective(d, params, ch, s)
        assert smat.shape == (2, 2)
        assert h.shape == (2,)


class TestNoiseCov:
    def test_no_relay_gain_identity(self):
        d = build_pciod(4)
        rs = relay_matrix_set(d)
        params = protocol_params(d, 5.0)
        ch = ChannelRealization(1.0, np.ones(4, complex), np.zeros(4, complex))
        assert np.array_equal(noise_cov(params, ch, rs), np.eye(8))

    @pytest.mark.parametrize("d", [build_pciod(2), build_pciod(4),
                                   build_toeplitz(2, 2), golden_cda()],
                             ids=lambda d: d.family + str(d.r))
    def test_diagonal_for_clro(self, d):
        rs = relay_matrix_set(d)
        params = protocol_params(d, 6.0)
        rng = make_rng(3, 7)
        for _ in range(20):
            ch = sample_channel(d.r, rng)
            omega = noise_cov(params, ch, rs)
            off = omega - np.diag(np.diag(omega))
            assert np.linalg.norm(off) < 1e-12

    def test_lower_block_is_identity_plus_gamma(self):
        # pciod relay matrices have unit row energies on their support
        d = build_pciod(4)
        rs = relay_matrix_set(d)
        params = protocol_params(d, 2.5)
        ch = sample_channel(4, make_rng(6, 1))
        omega = noise_cov(params, ch, rs)
        gamma = compute_gamma(rs, ch.g, params)
        assert np.allclose(omega[4:, 4:], np.eye(4) + gamma.matrix, atol=1e-12)

    def test_non_clro_dense_path(self):
        # a relay matrix with non-orthogonal rows gives a dense lower block
        m = np.array([[1.0, 0.0], [1.0, 1.0]], dtype=complex)
        from dstc.designs import RelayMatrixSet
        rs = RelayMatrixSet((m,), (False,), (0,))
        params = ProtocolParams(p=4.0, t1=2, t2=2, r=1, q=1, variant="gnaf2")
        ch = ChannelRealization(1.0, np.ones(1, complex), np.ones(1, complex))
        omega = noise_cov(params, ch, rs)
        assert abs(omega[3, 2]) > 0.1     # lower block starts at row t1
        y = whiten(np.ones(4, complex), omega)
        w = mk.inv_sqrt_pd(omega)
        assert np.allclose(y, w @ np.ones(4), atol=1e-14)


class TestSimulateTrial:
    def test_noiseless_compact_equals_clean_model(self):
        d = build_pciod(2)
        params = protocol_params(d, 4.0, "gnaf1")
        ch = sample_channel(2, make_rng(2, 5))
        x = np.array([1.0, -1.0, 1.0, 1.0])
        s = d.source_vector(x)
        y = simulate_trial(d, params, ch, s, mode="compact", noise=zero_noise(params))
        smat, h, scale = build_effective(d, params, ch, s)
        assert np.allclose(y, scale * (smat @ h), atol=1e-14)

    @pytest.mark.parametrize("variant", ["gnaf1", "gnaf2", "gnaf3", "jh"])
    @pytest.mark.parametrize("maker", [lambda: build_pciod(2),
                                       lambda: build_pciod(4),
                                       lambda: build_toeplitz(2, 2),
                                       golden_cda])
    def test_compact_matches_two_phase(self, variant, maker):
        d = maker()
        params = protocol_params(d, 5.0, variant)
        rng = make_rng(4, 8)
        for _ in range(10):
            ch = sample_channel(d.r, rng)
            x = rng.standard_normal(d.k)
            s = d.source_vector(x)
            noise = draw_noise(params, rng)
            y1 = simulate_trial(d, params, ch, s, mode="compact", noise=noise)
            y2 = simulate_trial(d, params, ch, s, mode="two_phase", noise=noise)
            assert np.max(np.abs(y1 - y2)) < 1e-10

    def test_conjugating_relays_use_conjugated_channel(self):
        # flipping f's imaginary part must not change a conjugating relay's
        # two-phase output in the noiseless case iff the model uses f*
        d = build_pciod(2)
        params = protocol_params(d, 9.0, "jh")
        x = np.array([0.3, -0.7, 1.1, 0.2])
        s = d.source_vector(x)
        f = np.array([1.0 + 0.5j, 0.25 - 1.25j])
        g = np.array([1.0 + 0j, 1.0 + 0j])
        ch = ChannelRealization(0j, f, g)
        y = simulate_trial(d, params, ch, s, mode="two_phase",
                           noise=zero_noise(params))
        _, h, scale = build_effective(d, params, ch, s)
        # effective gain of the conjugating relay is g*conj(f), not g*f
        assert h[1] == g[1] * np.conj(f[1])
        smat, _, _ = build_effective(d, params, ch, s)
        assert np.allclose(y, scale * (smat @ h), atol=1e-12)

    def test_relay_energy_scales_with_pi3(self):
        d = build_pciod(2)
        rng = make_rng(13, 0)
        e = {}
        for pi3 in (1.0, 2.0):
            params = protocol_params(d, 4.0, "jh", pi=(1.0, 1.0, pi3))
            acc = 0.0
            rng2 = make_rng(13, 1)       # same channel/symbol stream for both
            for _ in range(10 ** 4):
                ch = sample_channel(2, rng2)
                x = rng2.standard_normal(4)
                y = simulate_trial(d, params, ch, d.source_vector(x),
                                   mode="compact", noise=zero_noise(params))
                acc += float(np.sum(np.abs(y) ** 2))
            e[pi3] = acc
        assert e[2.0] / e[1.0] == pytest.approx(2.0, rel=1e-12)


class TestWhiten:
    def test_identity(self):
        y = np.array([1.0 + 2j, 3.0])
        assert np.allclose(whiten(y, np.eye(2)), y, atol=1e-14)

    def test_scaled_identity(self):
        y = np.array([2.0 + 2j, 4.0])
        assert np.allclose(whiten(y, 4.0 * np.eye(2)), y / 2.0, atol=1e-14)

    def test_whitened_noise_covariance(self):
        d = build_pciod(2)
        rs = relay_matrix_set(d)
        params = protocol_params(d, 8.0)
        ch = sample_channel(2, make_rng(21, 0))
        omega = noise_cov(params, ch, rs)
        w = mk.inv_sqrt_pd(omega)
        rng = make_rng(21, 1)
        n = 10 ** 5
        rows = params.t1 + params.t2
        acc = np.zeros((rows, rows), dtype=complex)
        from dstc.gnaf_sim import _stack_noise
        samples = np.empty((n, rows), dtype=complex)
        for i in range(n):
            noise = draw_noise(params, rng)
            samples[i] = w @ _stack_noise(params, ch, rs, noise)
        cov = (samples.conj().T @ samples) / n
        assert np.max(np.abs(cov - np.eye(rows))) < 3.0 / np.sqrt(n) * 2.0


class TestMonteCarlo:
    def config(self, trials=4000, receiver="grouped-ml", workers=None):
        d = build_pciod(2)
        book = lattice_codebook(d.partition, default_lattice(1, 2))
        return SimConfig(design=d, codebook=book, receiver=receiver,
                         snr_db=(0.0, 10.0, 20.0, 30.0), trials=trials,
                         seed=7, variant="gnaf2", batch_size=1000,
                         workers=workers)

    def test_zero_trials_empty(self):
        res = run_monte_carlo(self.config(trials=0))
        assert res == []

    def test_same_seed_identical_bytes(self):
        a = results_to_csv(run_monte_carlo(self.config()))
        b = results_to_csv(run_monte_carlo(self.config()))
        assert a == b

    def test_ser_decreasing_within_ci(self):
        res = run_monte_carlo(self.config(trials=20000))
        for lo, hi in zip(res[:-1], res[1:]):
            assert hi.ser <= lo.ser or hi.ci95[0] <= lo.ci95[1]

    def test_worker_count_invariance(self):
        a = results_to_csv(run_monte_carlo(self.config(workers=1)))
        b = results_to_csv(run_monte_carlo(self.config(workers=2)))
        assert a == b

    def test_grouped_needs_partition(self):
        d = build_toeplitz(2, 2)
        from dstc.receivers import qam_codebook
        book = qam_codebook(2, 4)
        cfg = SimConfig(design=d, codebook=book, receiver="grouped-ml",
                        snr_db=(0.0,), trials=10, seed=1)
        with pytest.raises(ValueError, match="partition"):
            run_monte_carlo(cfg)

    def test_unknown_receiver(self):
        cfg = self.config()
        with pytest.raises(ValueError, match="receiver"):
            run_monte_carlo(SimConfig(**{**cfg.__dict__, "receiver": "magic"}))

    def test_env_var_caps_workers(self, monkeypatch):
        cfg = self.config(workers=8)
        monkeypatch.setenv("DSTC_MAX_WORKERS", "2")
        assert cfg.resolved_workers() == 2
        monkeypatch.delenv("DSTC_MAX_WORKERS")
        assert cfg.resolved_workers() == 8
