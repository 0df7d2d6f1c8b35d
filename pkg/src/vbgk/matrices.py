"""Dense 15x15 structural matrices of the kinetic system and their certification.

State ordering inside the 15-vectors is five 3-blocks. In kinetic form the
blocks are f1..f5; in the conservative form they are
(w, eps^2 m, eps^2 xi, eps^2 k, eps^2 h).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ModelParams, ParameterDomainError, StabilityConstants

ID3 = np.eye(3)
SIGMA1 = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
SIGMA2 = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])

IDENTITY_TOL = 1e-10
DEFINITE_MARGIN = 1e-12
ROUNDING_TOL = 1e-14


def _blocks(table) -> np.ndarray:
    """Assemble a 15x15 matrix from a 5x5 table of 3x3 blocks, scalars or None."""
    out = np.zeros((15, 15))
    for i, row in enumerate(table):
        for j, blk in enumerate(row):
            if blk is None:
                continue
            out[3 * i:3 * i + 3, 3 * j:3 * j + 3] = blk * ID3 if np.isscalar(blk) else blk
    return out


def block(matrix: np.ndarray, i: int, j: int) -> np.ndarray:
    """3x3 block (i, j), 1-based to match the block tables."""
    return matrix[3 * (i - 1):3 * i, 3 * (j - 1):3 * j]


@dataclass(frozen=True)
class StructuralMatrices:
    C: np.ndarray
    C_inv: np.ndarray
    Lambda1: np.ndarray
    Lambda2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    L: np.ndarray
    Sigma: np.ndarray
    Sigma_inv: np.ndarray
    params: ModelParams
    b_crosscheck: float

    @property
    def minus_L_Sigma(self) -> np.ndarray:
        return -self.L @ self.Sigma

    @property
    def dissipative_block(self) -> np.ndarray:
        """Lower-right 12x12 block of -L Sigma."""
        return self.minus_L_Sigma[3:, 3:]


def _c_matrix(eps, lam):
    el, e2 = eps * lam, eps * eps
    return _blocks([
        [1.0, 1.0, 1.0, 1.0, 1.0],
        [el, None, -el, None, None],
        [None, el, None, -el, None],
        [e2, None, e2, None, None],
        [None, e2, None, e2, None],
    ])


def _c_inverse(eps, lam):
    # f1 = (K/eps^2 + M/(eps lam))/2, f5 = w - (K + H)/eps^2, etc.
    m, k = 0.5 / (eps * lam), 0.5 / (eps * eps)
    return _blocks([
        [None, m, None, k, None],
        [None, None, m, None, k],
        [None, -m, None, k, None],
        [None, None, -m, None, k],
        [1.0, None, None, -2.0 * k, -2.0 * k],
    ])


def _sigma(a, lam, eps):
    e2, e3, e4 = eps ** 2, eps ** 3, eps ** 4
    mid = 2.0 * lam * lam * a * e2
    return _blocks([
        [1.0, eps * SIGMA1, eps * SIGMA2, 2 * a * e2, 2 * a * e2],
        [eps * SIGMA1, mid, None, e3 * SIGMA1, None],
        [eps * SIGMA2, None, mid, None, e3 * SIGMA2],
        [2 * a * e2, e3 * SIGMA1, None, 2 * a * e4, None],
        [2 * a * e2, None, e3 * SIGMA2, None, 2 * a * e4],
    ])


def _sigma_inverse(a, lam, eps):
    e2, e3, e4 = eps ** 2, eps ** 3, eps ** 4
    g = 4.0 * lam * lam * a * a - 1.0
    d = 2.0 * a / (e2 * g)
    c = 1.0 / (2.0 * lam * lam * a * e2)
    x = (4.0 * lam * lam * a * a - 2.0 * lam * lam * a + 1.0) / (e4 * (4.0 * a - 1.0) * g)
    z = (2.0 * a - 1.0) / (2.0 * a * e4 * (4.0 * a - 1.0))
    h1, h2 = np.diag([d, d, c]), np.diag([d, c, d])
    h3, h4 = np.diag([x, x, z]), np.diag([x, z, x])
    r = -1.0 / (e2 * (1.0 - 4.0 * a))
    s = 1.0 / (e3 * (1.0 - 4.0 * lam * lam * a * a))
    u = 1.0 / (e4 * (1.0 - 4.0 * a))
    return _blocks([
        [1.0 / (1.0 - 4.0 * a), None, None, r, r],
        [None, h1, None, s * SIGMA1, None],
        [None, None, h2, None, s * SIGMA2],
        [r, s * SIGMA1, None, h3, u],
        [r, None, s * SIGMA2, u, h4],
    ])


def build(params: ModelParams) -> StructuralMatrices:
    a, lam, eps, tau = params.a, params.lam, params.epsilon, params.tau
    if not 0.0 < a < 0.25:
        raise ParameterDomainError(f"need 0 < a < 1/4, got a = {a:g}")
    if abs(4.0 * lam * lam * a * a - 1.0) <= 1e-8:
        raise ParameterDomainError(
            f"4 lambda^2 a^2 - 1 = {4.0 * lam * lam * a * a - 1.0:.3g} is too close to 0; "
            "the symmetrizer inverse is undefined there"
        )
    speed = lam / eps
    lambda1 = _blocks([[speed, None, None, None, None], [None, 0.0, None, None, None],
                       [None, None, -speed, None, None], [None, None, None, 0.0, None],
                       [None, None, None, None, 0.0]])
    lambda2 = _blocks([[0.0, None, None, None, None], [None, speed, None, None, None],
                       [None, None, 0.0, None, None], [None, None, None, -speed, None],
                       [None, None, None, None, 0.0]])
    c = _c_matrix(eps, lam)
    c_inv = _c_inverse(eps, lam)
    inv_e2 = 1.0 / (eps * eps)
    lam2_e2 = lam * lam / (eps * eps)
    b1 = _blocks([[None, inv_e2, None, None, None], [None, None, None, lam2_e2, None],
                  [None] * 5, [None, 1.0, None, None, None], [None] * 5])
    b2 = _blocks([[None, None, inv_e2, None, None], [None] * 5,
                  [None, None, None, None, lam2_e2], [None] * 5,
                  [None, None, 1.0, None, None]])
    # linear part of the relaxation source in the conservative variables
    minus_l = _blocks([
        [None] * 5,
        [SIGMA1 / eps, -inv_e2, None, None, None],
        [SIGMA2 / eps, None, -inv_e2, None, None],
        [2.0 * a, None, None, -inv_e2, None],
        [2.0 * a, None, None, None, -inv_e2],
    ]) / tau
    cross = 0.0
    for closed, lam_i in ((b1, lambda1), (b2, lambda2)):
        product = c @ lam_i @ c_inv
        scale = (np.abs(c) @ np.abs(lam_i) @ np.abs(c_inv)).max()
        cross = max(cross, np.abs(product - closed).max() / scale)
    return StructuralMatrices(
        C=c, C_inv=c_inv, Lambda1=lambda1, Lambda2=lambda2, B1=b1, B2=b2,
        L=-minus_l, Sigma=_sigma(a, lam, eps), Sigma_inv=_sigma_inverse(a, lam, eps),
        params=params, b_crosscheck=cross,
    )


@dataclass(frozen=True)
class Check:
    name: str
    residual: float
    threshold: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.threshold)


@dataclass
class CertificationReport:
    checks: list[Check] = field(default_factory=list)
    extremes: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def extend(self, other: "CertificationReport") -> "CertificationReport":
        self.checks.extend(other.checks)
        self.extremes.update(other.extremes)
        return self

    def to_text(self) -> str:
        lines = []
        for c in self.checks:
            flag = "PASS" if c.passed else "FAIL"
            extra = f"  ({c.detail})" if c.detail else ""
            lines.append(f"{flag}  {c.name}: residual {c.residual:.3e} <= {c.threshold:.3e}{extra}")
        for key, value in self.extremes.items():
            lines.append(f"      {key} = {value:.6e}")
        return "\n".join(lines) + "\n"

    def to_keyvalue(self) -> str:
        return "".join(
            f"name={c.name} residual={c.residual!r} threshold={c.threshold!r} "
            f"pass={'true' if c.passed else 'false'}\n"
            for c in self.checks
        )


def identity_residual(a: np.ndarray, b: np.ndarray) -> float:
    """max |AB - I| relative to the largest entry of |A||B|."""
    product = a @ b
    scale = (np.abs(a) @ np.abs(b)).max()
    return float(np.abs(product - np.eye(a.shape[0])).max() / scale)


def symmetry_residual(b: np.ndarray, sigma: np.ndarray) -> float:
    scale = (np.abs(b) @ np.abs(sigma)).max()
    return float(np.abs(b @ sigma - sigma @ b.T).max() / scale)


def certify_symmetrizer(m: StructuralMatrices) -> CertificationReport:
    p = m.params
    report = CertificationReport()
    add = report.checks.append
    add(Check("C_times_C_inv_identity", identity_residual(m.C, m.C_inv), IDENTITY_TOL))
    add(Check("Sigma_times_Sigma_inv_identity", identity_residual(m.Sigma, m.Sigma_inv), IDENTITY_TOL))
    add(Check("Sigma_exactly_symmetric", float(np.abs(m.Sigma - m.Sigma.T).max()), 0.0))
    add(Check("B_closed_form_vs_C_Lambda_C_inv", m.b_crosscheck, IDENTITY_TOL))
    add(Check("B1_Sigma_symmetric", symmetry_residual(m.B1, m.Sigma), IDENTITY_TOL))
    add(Check("B2_Sigma_symmetric", symmetry_residual(m.B2, m.Sigma), IDENTITY_TOL))
    mls = m.minus_L_Sigma
    add(Check("minus_L_Sigma_first_block_row_zero", float(np.abs(mls[:3, :]).max()), 0.0))
    # the first block column is a sum of cancelling O(1/(tau eps)) terms, so it
    # is zero up to rounding of those terms
    terms = (np.abs(m.L) @ np.abs(m.Sigma))[:, :3].max()
    add(Check("minus_L_Sigma_first_block_column_zero",
              float(np.abs(mls[:, :3]).max() / terms), ROUNDING_TOL))
    add(Check("L_first_block_row_zero", float(np.abs(m.L[:3, :]).max()), 0.0))
    expected = -2.0 * p.lam ** 2 * p.a * ID3 + SIGMA1 @ SIGMA1
    got = p.tau * block(mls, 2, 2)
    add(Check("minus_L_Sigma_block_22_entries",
              float(np.abs(got - expected).max() / np.abs(expected).max()), IDENTITY_TOL))
    return report


def _equilibrated(matrix: np.ndarray) -> np.ndarray:
    """Symmetrize and rescale to unit |diagonal|; a congruence, so inertia is kept."""
    sym = 0.5 * (matrix + matrix.T)
    s = 1.0 / np.sqrt(np.abs(np.diag(sym)))
    return sym * s[:, None] * s[None, :]


def positivity_brackets(a: float, lam: float, c: StabilityConstants) -> dict[str, float]:
    return {
        "w1": 1.0 - 2.0 / c.delta - 4.0 * a * c.mu,
        "w23": 1.0 - 1.0 / c.delta - 4.0 * a * c.mu,
        "m12_xi13": 2.0 * lam * lam * a - 2.0 * c.delta,
        "m3_xi2": 2.0 * lam * lam * a,
        "k12_h13": 2.0 * a - 2.0 * a / c.mu - 1.0 / c.delta,
        "k3_h2": 2.0 * a - 2.0 * a / c.mu,
    }


def negativity_brackets(a: float, lam: float, c: StabilityConstants) -> dict[str, float]:
    return {
        "m1_xi1": -2.0 * lam * lam * a + 1.0 + c.omega,
        "m2_xi3": -2.0 * lam * lam * a + 2.0 + c.omega,
        "m3_xi2": -2.0 * lam * lam * a,
        "k1_h1": 2.0 * a * (4.0 * a - 1.0) + 1.0 / c.omega,
        "k2_h3": 2.0 * a * (4.0 * a - 1.0) + (1.0 - 2.0 * a) / c.omega,
        "k3_h2": 2.0 * a * (4.0 * a - 1.0) + 2.0 * a / c.omega,
    }


def certify_definiteness(m: StructuralMatrices, consts: StabilityConstants) -> CertificationReport:
    p = m.params
    report = CertificationReport()
    sigma_eq = np.linalg.eigvalsh(_equilibrated(m.Sigma))
    report.checks.append(Check("Sigma_positive_definite", float(-sigma_eq[0]),
                               -DEFINITE_MARGIN * float(np.abs(sigma_eq).max()),
                               "smallest eigenvalue of the diagonally equilibrated Sigma"))
    diss = m.dissipative_block
    diss_eq = np.linalg.eigvalsh(_equilibrated(diss))
    report.checks.append(Check("dissipative_block_negative_definite", float(diss_eq[-1]),
                               -DEFINITE_MARGIN * float(np.abs(diss_eq).max()),
                               "largest eigenvalue of the equilibrated 12x12 block of -L Sigma"))
    report.extremes["Sigma_min_eigenvalue"] = float(np.linalg.eigvalsh(0.5 * (m.Sigma + m.Sigma.T))[0])
    report.extremes["dissipative_block_max_eigenvalue"] = float(
        np.linalg.eigvalsh(0.5 * (diss + diss.T))[-1])
    for key, value in positivity_brackets(p.a, p.lam, consts).items():
        report.checks.append(Check(f"positivity_bracket_{key}", -value, -DEFINITE_MARGIN))
    for key, value in negativity_brackets(p.a, p.lam, consts).items():
        report.checks.append(Check(f"negativity_bracket_{key}", value, -DEFINITE_MARGIN))
    return report


def to_tilde(w: np.ndarray, m: StructuralMatrices) -> np.ndarray:
    """W -> Sigma^{-1} W for a (15, ...) array."""
    return np.tensordot(m.Sigma_inv, w, axes=1)


def from_tilde(w_tilde: np.ndarray, m: StructuralMatrices) -> np.ndarray:
    return np.tensordot(m.Sigma, w_tilde, axes=1)


def numerical_sigma_inverse(sigma: np.ndarray) -> np.ndarray:
    """Generic inverse of Sigma after diagonal equilibration (used only as a cross-check)."""
    s = 1.0 / np.sqrt(np.diag(sigma))
    return np.linalg.inv(sigma * s[:, None] * s[None, :]) * s[:, None] * s[None, :]
