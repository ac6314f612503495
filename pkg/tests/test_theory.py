import math

import numpy as np
import pytest

from mtlasso.datagen import CovarianceModel, CovarianceSet, build_covariance
from mtlasso.errors import DomainError, SingularMatrixError
from mtlasso.theory import (
    condition_report,
    conditional_covariance,
    irrepresentability,
    psi,
    psi_bounds_check,
    psi_single,
    rho_bounds,
    rho_p2,
    thresholds,
)


def random_spd(rng, p, cond=5.0):
    Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    eig = rng.uniform(1.0, cond, p)
    return (Q * eig) @ Q.T


def cov_set(mats):
    mats = np.asarray(mats, dtype=float)
    return CovarianceSet(
        matrices=mats,
        min_eigenvalues=tuple(np.linalg.eigvalsh(m)[0] for m in mats),
        diag_shifts=(0.0,) * len(mats),
    )


class TestConditionalCovariance:
    def test_identity(self):
        out = conditional_covariance(np.eye(6), S=(1, 4))
        assert np.allclose(out, np.eye(4))

    def test_bivariate(self):
        rho = 0.6
        out = conditional_covariance(np.array([[1.0, rho], [rho, 1.0]]), S=(0,))
        assert out.shape == (1, 1)
        assert out[0, 0] == pytest.approx(1 - rho**2, rel=1e-14)

    def test_schur_identity_oracle(self):
        # the conditional covariance equals the inverse of the off-support
        # block of the precision matrix
        rng = np.random.default_rng(2)
        for _ in range(20):
            Sig = random_spd(rng, 6)
            S = [0, 1, 2]
            out = conditional_covariance(Sig, S)
            prec = np.linalg.inv(Sig)
            oracle = np.linalg.inv(prec[np.ix_([3, 4, 5], [3, 4, 5])])
            assert np.allclose(out, oracle, atol=1e-9)

    def test_spd_preserved(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            Sig = random_spd(rng, 8)
            out = conditional_covariance(Sig, S=(0, 2, 5))
            assert np.linalg.eigvalsh(out)[0] > 0

    def test_domain_checks(self):
        with pytest.raises(DomainError):
            conditional_covariance(np.eye(3), S=())
        with pytest.raises(DomainError):
            conditional_covariance(np.eye(3), S=(0, 1, 2))


def identical_columns(p, K, S, rng=None, value=1.0):
    B = np.zeros((p, K))
    col = np.zeros(p)
    if rng is None:
        col[list(S)] = value
    else:
        vals = rng.standard_normal(len(S))
        vals[vals == 0] = 1.0
        col[list(S)] = vals
    for k in range(K):
        B[:, k] = col
    return B


class TestPsi:
    def test_identity_identical_columns(self):
        p, K, s = 32, 4, 16
        S = tuple(range(s))
        B = identical_columns(p, K, S)
        covs = cov_set([np.eye(p)] * K)
        assert psi(B, covs, S) == pytest.approx(s / K, rel=1e-12)

    def test_k1_identity_any_signs(self):
        rng = np.random.default_rng(0)
        p, s = 20, 7
        S = tuple(range(s))
        B = np.zeros((p, 1))
        B[:s, 0] = rng.choice([-1.0, 1.0], s) * rng.uniform(0.5, 2.0, s)
        covs = cov_set([np.eye(p)])
        assert psi(B, covs, S) == pytest.approx(s, rel=1e-12)

    def test_disjoint_identity_takes_max_task_size(self):
        p, K = 16, 2
        s1, s2 = 3, 5
        B = np.zeros((p, K))
        B[:s1, 0] = 1.0
        B[s1 : s1 + s2, 1] = 1.0
        S = tuple(range(s1 + s2))
        covs = cov_set([np.eye(p)] * K)
        assert psi(B, covs, S) == pytest.approx(max(s1, s2), rel=1e-12)

    def test_row_scale_invariance(self):
        rng = np.random.default_rng(5)
        p, K = 12, 3
        S = (0, 2, 5, 7)
        B = np.zeros((p, K))
        B[list(S), :] = rng.standard_normal((len(S), K))
        covs = cov_set([random_spd(rng, p) for _ in range(K)])
        base = psi(B, covs, S)
        B2 = B.copy()
        for j in S:
            B2[j] *= rng.uniform(0.1, 10)
        assert abs(psi(B2, covs, S) - base) < 1e-12 * max(1, base)

    def test_zero_row_in_support_rejected(self):
        B = np.zeros((4, 2))
        B[0] = 1.0
        covs = cov_set([np.eye(4)] * 2)
        with pytest.raises(DomainError):
            psi(B, covs, S=(0, 1))


class TestPsiSingle:
    def test_identity(self):
        beta = np.zeros(10)
        beta[:4] = [1.0, -2.0, 0.5, 3.0]
        assert psi_single(beta, np.eye(10), S=(0, 1, 2, 3)) == pytest.approx(4.0)

    def test_two_by_two_hand_inverse(self):
        Sig = np.eye(3)
        Sig[0, 1] = Sig[1, 0] = 0.5
        beta = np.array([2.0, 1.0, 0.0])
        assert psi_single(beta, Sig, S=(0, 1)) == pytest.approx(4.0 / 3.0, rel=1e-12)

    def test_identity_for_identical_columns(self):
        # identical columns: psi = (1/K) max_k psi_single over the union
        rng = np.random.default_rng(7)
        for _ in range(30):
            p, K = 14, int(rng.integers(2, 5))
            s = int(rng.integers(2, 7))
            S = tuple(sorted(rng.choice(p, s, replace=False)))
            B = identical_columns(p, K, S, rng=rng)
            covs = cov_set([random_spd(rng, p) for _ in range(K)])
            lhs = psi(B, covs, S)
            rhs = max(psi_single(B[:, k], covs.matrices[k], S) for k in range(K)) / K
            assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_identity_for_disjoint_supports_shared_cov(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            p, K = 16, 2
            s1, s2 = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            idx = rng.choice(p, s1 + s2, replace=False)
            B = np.zeros((p, K))
            B[idx[:s1], 0] = rng.choice([-1.0, 1.0], s1) * rng.uniform(0.5, 2, s1)
            B[idx[s1:], 1] = rng.choice([-1.0, 1.0], s2) * rng.uniform(0.5, 2, s2)
            S = tuple(sorted(idx))
            Sig = random_spd(rng, p)
            covs = cov_set([Sig] * K)
            lhs = psi(B, covs, S)
            rhs = max(psi_single(B[:, k], Sig, S) for k in range(K))
            assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_bounded_entry_ratio_bound(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            p, K = 12, int(rng.integers(2, 4))
            s = int(rng.integers(2, 6))
            S = tuple(sorted(rng.choice(p, s, replace=False)))
            bbar = rng.uniform(1.0, 2.0, K)
            delta = rng.uniform(0.05, 0.5, K)
            B = np.zeros((p, K))
            for k in range(K):
                B[list(S), k] = rng.uniform(bbar[k] - delta[k], bbar[k] + delta[k], s)
            covs = cov_set([random_spd(rng, p) for _ in range(K)])
            ratio = psi(B, covs, S) / max(
                psi_single(B[:, k], covs.matrices[k], S) for k in range(K)
            )
            bound = max((bbar + delta) ** 2 / (bbar - delta) ** 2) / K
            assert ratio <= bound + 1e-9


class TestIrrepresentability:
    def test_identity_gives_gamma_one(self):
        covs = cov_set([np.eye(8)] * 3)
        out = irrepresentability(covs, S=(0, 4))
        assert out.a_matrix_inf_norm == 0.0
        assert out.gamma == 1.0

    def test_shared_tridiag_single_support_hand_value(self):
        covs = build_covariance(CovarianceModel("tridiag_shared"), p=3, K=1)
        diag = 0.05 + math.sqrt(2)
        out = irrepresentability(covs, S=(0,))
        # row 1 regresses on column 0 with weight 1/diag; row 2 is uncorrelated
        assert out.a_matrix_inf_norm == pytest.approx(1.0 / diag, rel=1e-12)
        assert out.gamma == pytest.approx(1.0 - 1.0 / diag, rel=1e-12)

    def test_per_task_tridiag_gamma_in_unit_interval(self):
        covs = build_covariance(CovarianceModel("tridiag_per_task"), p=32, K=2)
        S = tuple(range(0, 32, 8))
        out = irrepresentability(covs, S)
        assert 0.0 < out.gamma < 1.0


class TestRhoBounds:
    def test_identity(self):
        covs = cov_set([np.eye(6)] * 2)
        out = rho_bounds(covs, S=(0, 3))
        assert out.rho_u == pytest.approx(1.0)
        assert out.rho_l == pytest.approx(2.0)

    def test_correlated_pair(self):
        Sig = np.eye(3)
        Sig[0, 1] = Sig[1, 0] = 0.3
        covs = cov_set([Sig])
        out = rho_bounds(covs, S=(2,))
        assert out.rho_u == pytest.approx(1.0)
        assert out.rho_l == pytest.approx(1.4, rel=1e-12)

    def test_single_off_support_coordinate(self):
        covs = cov_set([np.eye(3)])
        out = rho_bounds(covs, S=(0, 1))
        assert out.rho_u == pytest.approx(1.0)
        assert out.rho_l is None

    def test_per_task_tridiag_finite(self):
        covs = build_covariance(CovarianceModel("tridiag_per_task"), p=32, K=2)
        out = rho_bounds(covs, S=tuple(range(0, 32, 8)))
        assert np.isfinite(out.rho_u) and out.rho_u > 0
        assert out.rho_l is not None and np.isfinite(out.rho_l) and out.rho_l > 0


class TestThresholds:
    def test_frozen_example(self):
        out = thresholds(8.0, p=128, s=16, rho_u=1.0, rho_l=2.0, gamma=1.0, v=0.1)
        assert out.n_achievability == pytest.approx(83.04558013479367, rel=1e-14)
        assert out.n_converse == pytest.approx(
            2 * 0.9 * 8 * math.log(112) * 2.0, rel=1e-14
        )

    def test_positive_and_finite(self):
        out = thresholds(4.0, p=64, s=8, rho_u=1.0, rho_l=2.0, gamma=1.0, v=0.01)
        assert out.n_achievability > 0 and out.n_converse > 0
        assert np.isfinite(out.n_achievability / out.n_converse)

    def test_linear_in_psi(self):
        a = thresholds(4.0, 64, 8, 1.0, 2.0, 0.7, 0.1)
        b = thresholds(8.0, 64, 8, 1.0, 2.0, 0.7, 0.1)
        assert b.n_achievability == pytest.approx(2 * a.n_achievability, rel=1e-14)
        assert b.n_converse == pytest.approx(2 * a.n_converse, rel=1e-14)

    def test_monotonicity(self):
        base = thresholds(4.0, 64, 8, 1.0, 2.0, 0.7, 0.1).n_achievability
        assert thresholds(5.0, 64, 8, 1.0, 2.0, 0.7, 0.1).n_achievability > base
        assert thresholds(4.0, 64, 8, 1.5, 2.0, 0.7, 0.1).n_achievability > base
        assert thresholds(4.0, 128, 8, 1.0, 2.0, 0.7, 0.1).n_achievability > base
        assert thresholds(4.0, 64, 8, 1.0, 2.0, 0.9, 0.1).n_achievability < base

    def test_gamma_domain(self):
        with pytest.raises(DomainError):
            thresholds(4.0, 64, 8, 1.0, 2.0, 0.0, 0.1)
        with pytest.raises(DomainError):
            thresholds(4.0, 64, 8, 1.0, 2.0, 1.2, 0.1)


class TestPsiBounds:
    def test_identity_equalities(self):
        assert psi_bounds_check(16 / 4, s=16, K=4, c_min=1.0, c_max=1.0)
        assert psi_bounds_check(16.0, s=16, K=1, c_min=1.0, c_max=1.0)

    def test_randomized_instances(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            p = int(rng.integers(4, 21))
            K = int(rng.integers(1, 5))
            s = int(rng.integers(1, p))
            S = tuple(sorted(rng.choice(p, s, replace=False)))
            B = np.zeros((p, K))
            B[list(S), :] = rng.standard_normal((s, K))
            # keep rows nonzero
            for j in S:
                if np.all(B[j] == 0):
                    B[j, 0] = 1.0
            covs = cov_set([random_spd(rng, p) for _ in range(K)])
            c_min = min(np.linalg.eigvalsh(m[np.ix_(S, S)])[0] for m in covs.matrices)
            c_max = max(np.linalg.eigvalsh(m[np.ix_(S, S)])[-1] for m in covs.matrices)
            val = psi(B, covs, S)
            assert psi_bounds_check(val, s=s, K=K, c_min=c_min, c_max=c_max)


class TestRhoP2:
    def test_lambda_zero_leaves_noise_term(self):
        expect = math.sqrt(8 * 0.25 * 16 * math.log(16) / (500 * 1.0))
        assert rho_p2(500, 16, 0.0, 0.5, 1.0, 1.0) == pytest.approx(expect, rel=1e-14)

    def test_vanishes_asymptotically(self):
        assert rho_p2(10**8, 16, 0.0, 0.5, 1.0, 1.0) < rho_p2(10**4, 16, 0.0, 0.5, 1.0, 1.0)

    def test_frozen_example(self):
        val = rho_p2(1000, 16, 0.4, 0.5, 1.0, 1.0)
        assert val == pytest.approx(3.1264930358940384, rel=1e-14)

    def test_domain(self):
        with pytest.raises(DomainError):
            rho_p2(100, 1, 0.1, 0.5, 1.0, 1.0)


class TestConditionReport:
    def test_identity_report(self):
        covs = cov_set([np.eye(10)] * 2)
        S = (0, 1, 2)
        B = identical_columns(10, 2, S)
        rep = condition_report(B, covs, S)
        assert rep.gamma == 1.0 and rep.c1_holds
        assert rep.c_min == pytest.approx(1.0) and rep.c_max == pytest.approx(1.0)
        assert rep.d_max == pytest.approx(1.0)
        assert rep.rho_u == pytest.approx(1.0) and rep.rho_l == pytest.approx(2.0)
        assert rep.psi == pytest.approx(1.5)
        assert rep.c2_holds is None and rep.c3_holds is None

    def test_declared_bounds(self):
        covs = cov_set([np.eye(10)])
        S = (0, 1)
        B = identical_columns(10, 1, S)
        rep = condition_report(B, covs, S, declared_c_min=0.5, declared_c_max=2.0,
                               declared_d_max=1.5)
        assert rep.c2_holds is True and rep.c3_holds is True
        rep2 = condition_report(B, covs, S, declared_d_max=0.5)
        assert rep2.c3_holds is False

    def test_singular_restricted_covariance(self):
        M = np.eye(4)
        M[0, 1] = M[1, 0] = 1.0  # restricted block [[1,1],[1,1]] is singular
        with pytest.raises(SingularMatrixError):
            conditional_covariance(M, S=(0, 1))
