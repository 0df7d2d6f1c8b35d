import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from vbgk.matrices import (
    SIGMA1, SIGMA2, block, build, certify_definiteness, certify_symmetrizer, from_tilde,
    numerical_sigma_inverse, to_tilde,
)
from vbgk.params import (
    ModelParams, ParameterDomainError, StabilityConstants, choose_constants,
    find_stability_constants,
)


def make(a=0.1, lam=30.0, eps=0.1, tau=1.0):
    return build(ModelParams.from_a(a, epsilon=eps, lam=lam, tau=tau))


def test_block_examples():
    m = make(eps=0.5)
    np.testing.assert_allclose(block(m.Sigma, 1, 4), 0.05 * np.eye(3), rtol=1e-15)
    m = make(eps=0.1)
    np.testing.assert_allclose(block(m.B1, 1, 2), 100.0 * np.eye(3), rtol=1e-14)
    np.testing.assert_array_equal(block(m.Lambda1, 1, 1), 300.0 * np.eye(3))


def test_minus_L_Sigma_structure():
    m = make(tau=0.37)
    mls = m.minus_L_Sigma
    assert np.all(mls[:3] == 0.0)
    assert np.abs(mls[:, :3]).max() <= 1e-14 * (np.abs(m.L) @ np.abs(m.Sigma)).max()
    expected = -2.0 * 30.0 ** 2 * 0.1 * np.eye(3) + np.diag([1.0, 1.0, 0.0])
    np.testing.assert_allclose(0.37 * block(mls, 2, 2), expected, rtol=1e-12)
    assert np.all(m.L[:3] == 0.0)


def test_degenerate_lambda_a_rejected():
    with pytest.raises(ParameterDomainError):
        make(a=0.1, lam=5.0)  # 4 lambda^2 a^2 = 1
    with pytest.raises(ParameterDomainError):
        build(ModelParams.from_a(0.3, epsilon=0.1, lam=30.0, tau=1.0))


def test_reference_point_certifies():
    m = make()
    consts = find_stability_constants(0.1, 30.0)
    report = certify_symmetrizer(m).extend(certify_definiteness(m, consts))
    assert report.passed, report.to_text()
    kv = report.to_keyvalue().splitlines()
    assert len(kv) == len(report.checks) and all(line.endswith("pass=true") for line in kv)


def test_brackets_pass_with_hand_constants():
    base = choose_constants(0.1)
    consts = StabilityConstants(delta=16.0, mu=1.5, omega=9.0, eta=base.eta, zeta=base.zeta,
                                beta=base.beta)
    report = certify_definiteness(make(), consts)
    assert all(c.passed for c in report.checks if "bracket" in c.name)


def test_lambda_five_fails_dissipativity_bracket():
    m = build(ModelParams.from_a(0.1, epsilon=0.1, lam=5.5, tau=1.0))
    report = certify_definiteness(m, choose_constants(0.1))
    failed = {c.name for c in report.checks if not c.passed}
    assert "negativity_bracket_m2_xi3" in failed


def test_check_flag_matches_threshold():
    for c in certify_symmetrizer(make()).checks:
        assert c.passed == (c.residual <= c.threshold)


def _sweep(n=20, seed=7):
    rng = np.random.default_rng(seed)
    while n:
        eps, lam, a = 10 ** rng.uniform(-3, 0), 10 ** rng.uniform(np.log10(5), 2), rng.uniform(0.01, 0.24)
        if abs(4 * lam * lam * a * a - 1) > 1e-3:
            n -= 1
            yield eps, lam, a


@pytest.mark.parametrize("eps, lam, a", list(_sweep()))
def test_symmetrizer_sweep(eps, lam, a):
    report = certify_symmetrizer(make(a=a, lam=lam, eps=eps))
    assert report.passed, report.to_text()


@pytest.mark.parametrize("eps", [1.0, 0.1, 1e-2, 1e-3])
def test_sigma_inverse_matches_high_precision_oracle(eps):
    m = make(eps=eps, lam=37.0, a=0.13)
    with mpmath.workdps(60):
        exact = mpmath.matrix(m.Sigma.tolist()) ** -1
        oracle = np.array(exact.tolist(), dtype=float)
    scale = np.abs(oracle).max()
    assert np.abs(m.Sigma_inv - oracle).max() / scale <= 1e-8
    assert np.abs(numerical_sigma_inverse(m.Sigma) - oracle).max() / scale <= 1e-8


@pytest.mark.parametrize("eps", [0.5, 0.05])
def test_tilde_round_trip(eps, rng):
    m = make(eps=eps)
    w = rng.normal(size=(15, 1000))
    back = from_tilde(to_tilde(w, m), m)
    assert np.abs(back - w).max() / np.abs(w).max() <= 1e-10
    assert np.all(to_tilde(np.zeros(15), m) == 0.0)


def test_first_component_reconstruction(rng):
    eps, a = 0.3, 0.1
    m = make(eps=eps, a=a)
    wt = rng.normal(size=15)
    w_, m_, xi_, k_, h_ = wt[0:3], wt[3:6], wt[6:9], wt[9:12], wt[12:15]
    # W~ components carry the eps^2 weight on (m, xi, k, h)
    e2 = eps * eps
    expected = w_ + eps ** 3 * SIGMA1 @ (m_ / e2) + eps ** 3 * SIGMA2 @ (xi_ / e2) \
        + 2 * a * eps ** 4 * (k_ / e2 + h_ / e2)
    np.testing.assert_allclose((m.Sigma @ wt)[:3], expected, rtol=1e-12, atol=1e-14)


def _slopes(weighted, eps_values=(0.2, 0.1, 0.05)):
    eps_values = np.array(eps_values)
    spectra = []
    for eps in eps_values:
        sigma = make(eps=eps).Sigma
        if weighted:
            p = np.diag([1.0] * 3 + [eps * eps] * 12)
            sigma = p @ sigma @ p
        spectra.append(np.sort(np.linalg.eigvalsh(0.5 * (sigma + sigma.T))))
    spectra = np.array(spectra)
    logs = np.log(eps_values)
    low = np.polyfit(logs, np.log(spectra[:, :6].mean(axis=1)), 1)[0]
    mid = np.polyfit(logs, np.log(spectra[:, 6:12].mean(axis=1)), 1)[0]
    return low, mid


def test_eigenvalue_scaling_of_weighted_symmetrizer():
    low, mid = _slopes(weighted=True)
    assert low == pytest.approx(8.0, abs=0.2) and mid == pytest.approx(6.0, abs=0.2)


def test_eigenvalue_scaling_of_raw_symmetrizer():
    # 2 lambda^2 a eps^2 must sit well below the O(1) group for sorted groups to separate
    low, mid = _slopes(weighted=False, eps_values=(0.02, 0.01, 0.005))
    assert low == pytest.approx(4.0, abs=0.2) and mid == pytest.approx(2.0, abs=0.2)


@given(st.floats(1e-3, 1.0), st.floats(5.0, 100.0), st.floats(0.01, 0.24))
def test_symmetrizer_identities_property(eps, lam, a):
    if abs(4 * lam * lam * a * a - 1) <= 1e-3:
        return
    m = make(a=a, lam=lam, eps=eps)
    assert certify_symmetrizer(m).passed
    try:
        consts = find_stability_constants(a, lam)
    except Exception:
        return
    assert certify_definiteness(m, consts).passed
