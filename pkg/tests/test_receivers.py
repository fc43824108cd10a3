import numpy as np
import pytest

from dstc.designs import build_pciod, build_toeplitz
from dstc.gnaf_sim import make_rng, omega_diagonals, protocol_params
from dstc.precoding import default_lattice
from dstc.receivers import (Codebook, ResourceGuardError, group_crossterm,
                            group_metric, lattice_codebook, ml_grouped,
                            ml_joint, ml_joint_metrics, mmse_detect,
                            pam_codebook, qam_codebook, zf_detect)


def pciod_model(d, p=10.0, seed=0, n=1):
    """Whitened model matrices for random channel draws of a grouped design."""
    from dstc.designs import relay_matrix_set
    from dstc.gnaf_sim import crandn, effective_matrix
    rs = relay_matrix_set(d)
    params = protocol_params(d, p, "gnaf2")
    rng = make_rng(seed, 100)
    z = crandn(rng, n, 2 * d.r + 1)
    g0, f, g = z[:, 0], z[:, 1:d.r + 1], z[:, d.r + 1:]
    h_cols = np.zeros((n, d.r), dtype=np.complex128)
    for i, (cj, col) in enumerate(zip(rs.conj, rs.columns)):
        h_cols[:, col] = g[:, i] * (np.conj(f[:, i]) if cj else f[:, i])
    m = effective_matrix(d, params, g0, h_cols)
    diag = omega_diagonals(params, rs, g)
    return m / np.sqrt(diag)[:, :, None], rng


class TestCodebook:
    def test_enumeration_and_flat_indices(self):
        book = pam_codebook(((0, 1), (2,)), 2)
        x = book.enumerate_x()
        assert x.shape == (8, 3)
        idx = book.flat_to_indices(np.arange(8))
        assert np.array_equal(book.assemble(idx), x)

    def test_size_and_groups(self):
        d = build_pciod(4)
        book = lattice_codebook(d.partition, default_lattice(2, 2))
        assert book.size == 4 ** 4
        assert book.group_sizes == (4, 4, 4, 4)

    def test_enumeration_guard(self):
        book = pam_codebook(tuple((i,) for i in range(24)), 2)
        with pytest.raises(ResourceGuardError):
            book.enumerate_x()

    def test_difference_vectors_count(self):
        book = pam_codebook(((0,), (1,)), 2)
        diffs = book.difference_vectors()
        assert diffs.shape == (8, 2)       # 3*3 minus the zero vector


class TestMlJoint:
    def test_noiseless_recovery(self):
        d = build_pciod(2)
        book = lattice_codebook(d.partition, default_lattice(1, 2))
        m, rng = pciod_model(d, n=50)
        tx = rng.integers(0, 2, size=(50, 4))
        y = np.einsum("brk,bk->br", m, book.assemble(tx))
        dec = ml_joint(y, m, book)
        assert np.array_equal(dec, tx)

    def test_matches_bruteforce_loop(self):
        # independent re-implementation: plain python loops over the book
        d = build_pciod(2)
        book = lattice_codebook(d.partition, default_lattice(1, 2))
        x_all = book.enumerate_x()
        m, rng = pciod_model(d, n=100, seed=3)
        tx = rng.integers(0, 2, size=(100, 4))
        y = np.einsum("brk,bk->br", m, book.assemble(tx))
        y += (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
        dec = ml_joint(y, m, book)
        for b in range(100):
            best, besti = np.inf, -1
            for i, x in enumerate(x_all):
                metric = float(np.sum(np.abs(y[b] - m[b] @ x) ** 2))
                if metric < best - 1e-15:
                    best, besti = metric, i
            assert np.array_equal(dec[b], book.flat_to_indices(besti))

    def test_tie_breaks_to_lowest_index(self):
        book = pam_codebook(((0,), (1,)), 2)
        m = np.zeros((2, 2), dtype=complex)     # all metrics equal
        dec = ml_joint(np.ones(2, dtype=complex), m, book)
        assert np.array_equal(dec, [0, 0])

    def test_size_guard(self):
        book = pam_codebook(tuple((i,) for i in range(21)), 2)
        with pytest.raises(ResourceGuardError):
            ml_joint(np.zeros(2, complex), np.zeros((2, 21), complex), book)


class TestMlGrouped:
    def test_single_group_equals_joint(self):
        d = build_toeplitz(2, 2)
        book = qam_codebook(2, 4)
        single = Codebook((tuple(range(4)),),
                          (book.enumerate_x(),))
        rng = make_rng(1, 2)
        m = (rng.standard_normal((5, 5, 4)) + 1j * rng.standard_normal((5, 5, 4)))
        y = (rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5)))
        a = ml_joint(y, m, single)
        b = ml_grouped(y, m, single)
        assert np.array_equal(a, b)

    def test_equals_joint_on_pciod(self):
        for r, pts in ((2, 2), (4, 2)):
            d = build_pciod(r)
            book = lattice_codebook(d.partition, default_lattice(r // 2, pts))
            m, rng = pciod_model(d, n=300, seed=5)
            tx = np.stack([rng.integers(0, s, size=300) for s in book.group_sizes],
                          axis=1)
            y = np.einsum("brk,bk->br", m, book.assemble(tx))
            y += 0.5 * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
            assert np.array_equal(ml_grouped(y, m, book), ml_joint(y, m, book))

    def test_noiseless_recovery(self):
        d = build_pciod(4)
        book = lattice_codebook(d.partition, default_lattice(2, 2))
        m, rng = pciod_model(d, n=20, seed=7)
        tx = rng.integers(0, 4, size=(20, 4))
        y = np.einsum("brk,bk->br", m, book.assemble(tx))
        assert np.array_equal(ml_grouped(y, m, book), tx)

    def test_search_cost_is_sum_not_product(self):
        d = build_pciod(4)
        book = lattice_codebook(d.partition, default_lattice(2, 2))
        assert sum(book.group_sizes) == 16
        assert book.size == 256

    def test_metric_decomposition(self):
        # joint metric = sum of group metrics + (1 - n_groups) * ||y||^2
        d = build_pciod(4)
        book = lattice_codebook(d.partition, default_lattice(2, 2))
        m, rng = pciod_model(d, n=10, seed=11)
        y = (rng.standard_normal((10, m.shape[1])) +
             1j * rng.standard_normal((10, m.shape[1])))
        x_all = book.enumerate_x()
        joint = ml_joint_metrics(y, m, x_all)
        const = (1 - book.n_groups) * np.sum(np.abs(y) ** 2, axis=1)
        for flat in range(0, book.size, 17):
            idx = book.flat_to_indices(np.full(10, flat))
            grouped = group_metric(y, m, book, idx)
            resid = joint[:, flat] - (grouped + const)
            assert np.max(np.abs(resid)) < 1e-9

    def test_full_model_decomposes_for_every_variant(self):
        # the whitened receiver model stays group-decodable even with the
        # direct path and the phase-2 source column in play
        from dstc.designs import build_pciod_rect, relay_matrix_set
        from dstc.gnaf_sim import crandn, effective_matrix
        for variant in ("gnaf1", "gnaf2", "gnaf3", "jh"):
            for d in (build_pciod(4), build_pciod_rect(3)):
                rs = relay_matrix_set(d)
                params = protocol_params(d, 10.0, variant)
                rng = make_rng(77, hash(variant) % 97)
                z = crandn(rng, 50, 2 * d.r + 1)
                g0, f, g = z[:, 0], z[:, 1:d.r + 1], z[:, d.r + 1:]
                h = np.zeros((50, d.r), complex)
                for i, (cj, col) in enumerate(zip(rs.conj, rs.columns)):
                    h[:, col] = g[:, i] * (np.conj(f[:, i]) if cj else f[:, i])
                m = effective_matrix(d, params, g0, h)
                m = m / np.sqrt(omega_diagonals(params, rs, g))[:, :, None]
                worst = max(group_crossterm(m[b], d.partition) for b in range(50))
                assert worst < 1e-12

    def test_crossterm_detects_coupling(self):
        d = build_pciod(4)
        book = lattice_codebook(d.partition, default_lattice(2, 2))
        m, _ = pciod_model(d, n=1, seed=13)
        assert group_crossterm(m[0], book.groups) < 1e-12
        rng = make_rng(14, 0)
        m_bad = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        assert group_crossterm(m_bad, book.groups) > 0.1


class TestLinear:
    def setup_case(self, n=40, seed=2):
        d = build_toeplitz(2, 2)
        book = qam_codebook(2, 4)
        from dstc.designs import relay_matrix_set
        from dstc.gnaf_sim import crandn, effective_matrix
        rs = relay_matrix_set(d)
        params = protocol_params(d, 100.0, "gnaf3")
        rng = make_rng(seed, 4)
        z = crandn(rng, n, 2 * d.r + 1)
        g0, f, g = z[:, 0], z[:, 1:d.r + 1], z[:, d.r + 1:]
        h_cols = g * f
        m = effective_matrix(d, params, g0, h_cols)
        diag = omega_diagonals(params, rs, g)
        return book, m / np.sqrt(diag)[:, :, None], rng

    def test_zf_noiseless_exact(self):
        book, m, rng = self.setup_case()
        tx = rng.integers(0, 4, size=(40, 2))
        y = np.einsum("brk,bk->br", m, book.assemble(tx))
        assert np.array_equal(zf_detect(y, m, book), tx)

    def test_zf_equals_ml_noiseless(self):
        book, m, rng = self.setup_case(seed=5)
        tx = rng.integers(0, 4, size=(40, 2))
        y = np.einsum("brk,bk->br", m, book.assemble(tx))
        assert np.array_equal(zf_detect(y, m, book), ml_joint(y, m, book))

    def test_zf_rank_deficient_erasure(self):
        book = qam_codebook(1, 4)
        m = np.zeros((1, 3, 2), dtype=complex)     # zero model: rank 0
        dec = zf_detect(np.ones((1, 3), complex), m, book)
        assert np.array_equal(dec, [[-1]])

    def test_mmse_noiseless_exact(self):
        book, m, rng = self.setup_case(seed=7)
        tx = rng.integers(0, 4, size=(40, 2))
        y = np.einsum("brk,bk->br", m, book.assemble(tx))
        assert np.array_equal(mmse_detect(y, m, book, noise_var=1e-12), tx)

    def test_mmse_converges_to_zf(self):
        book, m, rng = self.setup_case(seed=9)
        tx = rng.integers(0, 4, size=(40, 2))
        y = np.einsum("brk,bk->br", m, book.assemble(tx))
        y += 0.3 * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
        assert np.array_equal(mmse_detect(y, m, book, noise_var=1e-8),
                              zf_detect(y, m, book))

    def test_mmse_infinite_noise_slices_zero(self):
        book, m, rng = self.setup_case(seed=11)
        y = (rng.standard_normal((40, m.shape[1])) +
             1j * rng.standard_normal((40, m.shape[1])))
        dec = mmse_detect(y, m, book, noise_var=np.inf)
        # estimate collapses to the zero vector: nearest point to 0 per group
        from dstc.receivers import _slice_groups
        want = _slice_groups(np.zeros((40, book.k)), book)
        assert np.array_equal(dec, want)

    def test_lattice_slicing_matches_nearest_row(self):
        d = build_pciod(4)
        lat = default_lattice(2, 2)
        book_lat = lattice_codebook(d.partition, lat)
        book_plain = Codebook(book_lat.groups, book_lat.group_values)
        rng = make_rng(15, 1)
        xhat = rng.standard_normal((200, 8))
        from dstc.receivers import _slice_groups
        assert np.array_equal(_slice_groups(xhat, book_lat),
                              _slice_groups(xhat, book_plain))
