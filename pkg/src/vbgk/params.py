"""Model constants and the stability inequalities attached to them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class ParameterDomainError(ValueError):
    """A parameter lies outside the domain where the model is defined."""


class InfeasibleConstantsError(ValueError):
    """No admissible stability constants exist for the given speed.

    ``condition`` names the first violated interval, ``required`` is the
    lower bound the speed would have to exceed.
    """

    def __init__(self, condition: str, lam: float, required: float):
        self.condition = condition
        self.lam = lam
        self.required = required
        super().__init__(
            f"{condition}: lambda = {lam:g} must exceed {required:.6g}"
        )


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ParameterDomainError(f"{name} must be positive and finite, got {value!r}")
    return value


def derive_a(nu: float, lam: float, tau: float) -> float:
    """Dissipation parameter a = nu / (2 lambda^2 tau)."""
    nu = _positive("nu", nu)
    lam = _positive("lambda", lam)
    tau = _positive("tau", tau)
    return nu / (2.0 * lam * lam * tau)


@dataclass(frozen=True)
class ModelParams:
    epsilon: float
    tau: float
    lam: float
    nu: float
    rho_bar: float = 1.0

    def __post_init__(self):
        for name in ("epsilon", "tau", "lam", "nu", "rho_bar"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))

    @property
    def a(self) -> float:
        return derive_a(self.nu, self.lam, self.tau)

    @classmethod
    def from_a(cls, a: float, *, epsilon: float, lam: float, tau: float | None = None,
               nu: float | None = None, rho_bar: float = 1.0) -> "ModelParams":
        """Build from a and exactly one of tau or nu; the other follows from a."""
        a = _positive("a", a)
        lam = _positive("lambda", lam)
        if (tau is None) == (nu is None):
            raise ParameterDomainError("give exactly one of tau or nu together with a")
        if tau is None:
            tau = _positive("nu", nu) / (2.0 * lam * lam * a)
        else:
            nu = 2.0 * lam * lam * _positive("tau", tau) * a
        return cls(epsilon=epsilon, tau=tau, lam=lam, nu=nu, rho_bar=rho_bar)


@dataclass(frozen=True)
class StabilityConstants:
    delta: float
    mu: float
    omega: float
    eta: float
    zeta: float
    beta: float

    def gamma_sigma(self, a: float) -> float:
        return 1.0 - 4.0 * a * self.mu - 2.0 / self.delta

    def delta_sigma(self, a: float, lam: float) -> float:
        return 2.0 * (lam * lam * a - self.delta)

    def theta_sigma(self, a: float) -> float:
        return 2.0 * a * (1.0 - 1.0 / self.mu) - 1.0 / self.delta

    def delta_source(self, a: float, lam: float) -> float:
        return 2.0 * (lam * lam * a - 1.0) - self.omega

    def theta_source(self, a: float) -> float:
        return 2.0 * a * (1.0 - 4.0 * a) - 1.0 / self.omega


@dataclass(frozen=True)
class Condition:
    name: str
    passed: bool
    value: float
    bound: float
    relation: str = ">"

    def __str__(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name}: {self.value:.6g} {self.relation} {self.bound:.6g}"


@dataclass(frozen=True)
class ValidationReport:
    conditions: tuple[Condition, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.conditions)

    def failures(self) -> list[Condition]:
        return [c for c in self.conditions if not c.passed]

    def __str__(self):
        return "\n".join(str(c) for c in self.conditions)


def _check_a(a: float):
    if not (0.0 < a < 0.25):
        raise ParameterDomainError(f"need 0 < a < 1/4, got a = {a:g}")


# Interval endpoints, exposed separately so callers can re-derive a choice.

def mu_interval(a: float) -> tuple[float, float]:
    return 1.0, 1.0 / (4.0 * a)


def delta_lower_bound(a: float, mu: float) -> float:
    return max(2.0 / (1.0 - 4.0 * a * mu), 1.0 / (2.0 * a * (1.0 - 1.0 / mu)))


def omega_lower_bound(a: float) -> float:
    return 1.0 / (2.0 * a * (1.0 - 4.0 * a))


def eta_lower_bound(a: float) -> float:
    # eta > 1/a, and eta > 2 so that some zeta satisfies eta > 2 zeta / (zeta - 4a)
    return max(1.0 / a, 2.0)


def zeta_lower_bound(a: float, eta: float) -> float:
    return max(4.0 * a, 4.0 * a * eta / (eta - 2.0))


def beta_upper_bound(a: float, zeta: float, gamma: float, theta: float) -> float:
    """Largest beta keeping zeta below theta / (2 a gamma (1 - 1/beta)); inf if none."""
    ratio = theta / (2.0 * a * gamma * zeta)
    if ratio >= 1.0:
        return math.inf
    return 1.0 / (1.0 - ratio)


def _pick(lower: float, upper: float = math.inf) -> float:
    if math.isinf(upper):
        return 1.1 * lower
    return 0.5 * (lower + upper)


def choose_constants(a: float) -> StabilityConstants:
    """Deterministic admissible constants; none of them depends on lambda."""
    _check_a(a)
    mu = _pick(*mu_interval(a))
    delta = _pick(delta_lower_bound(a, mu))
    omega = _pick(omega_lower_bound(a))
    eta = _pick(eta_lower_bound(a))
    zeta = _pick(zeta_lower_bound(a, eta))
    gamma = 1.0 - 4.0 * a * mu - 2.0 / delta
    theta = 2.0 * a * (1.0 - 1.0 / mu) - 1.0 / delta
    beta = _pick(1.0, beta_upper_bound(a, zeta, gamma, theta))
    return StabilityConstants(delta=delta, mu=mu, omega=omega, eta=eta, zeta=zeta, beta=beta)


def lambda_bounds(a: float, consts: StabilityConstants) -> list[tuple[str, float]]:
    """Lower bounds on lambda, in the order they are checked."""
    gamma = consts.gamma_sigma(a)
    return [
        ("symmetrizer positivity: lambda > sqrt(delta/a)", math.sqrt(consts.delta / a)),
        ("source negativity: lambda > sqrt((2+omega)/(2a))",
         math.sqrt((2.0 + consts.omega) / (2.0 * a))),
        ("energy weights: lambda > sqrt(delta/a + eta*Gamma*(1+2a)/(2a))",
         math.sqrt(consts.delta / a + consts.eta * gamma * (1.0 + 2.0 * a) / (2.0 * a))),
    ]


def find_stability_constants(a: float, lam: float) -> StabilityConstants:
    consts = choose_constants(a)
    lam = _positive("lambda", lam)
    for name, bound in lambda_bounds(a, consts):
        if not lam > bound:
            raise InfeasibleConstantsError(name, lam, bound)
    return consts


def verify_constants(a: float, lam: float, consts: StabilityConstants) -> ValidationReport:
    """Substitute the constants back into every defining inequality."""
    c = consts
    gamma = c.gamma_sigma(a)
    theta = c.theta_sigma(a)
    bracket = 4.0 * a * a - 2.0 * a * c.zeta - 4.0 * a / c.eta
    rows = [
        Condition("mu > 1", c.mu > 1.0, c.mu, 1.0),
        Condition("mu < 1/(4a)", c.mu < 1.0 / (4.0 * a), c.mu, 1.0 / (4.0 * a), "<"),
        Condition("delta > 2/(1-4a mu)", c.delta > 2.0 / (1.0 - 4.0 * a * c.mu),
                  c.delta, 2.0 / (1.0 - 4.0 * a * c.mu)),
        Condition("delta > 1/(2a(1-1/mu))", c.delta > 1.0 / (2.0 * a * (1.0 - 1.0 / c.mu)),
                  c.delta, 1.0 / (2.0 * a * (1.0 - 1.0 / c.mu))),
        Condition("lambda > sqrt(delta/a)", lam > math.sqrt(c.delta / a),
                  lam, math.sqrt(c.delta / a)),
        Condition("omega > 1/(2a(1-4a))", c.omega > omega_lower_bound(a),
                  c.omega, omega_lower_bound(a)),
        Condition("lambda > sqrt((2+omega)/(2a))", lam > math.sqrt((2.0 + c.omega) / (2.0 * a)),
                  lam, math.sqrt((2.0 + c.omega) / (2.0 * a))),
        Condition("zeta > 4a", c.zeta > 4.0 * a, c.zeta, 4.0 * a),
        Condition("eta > 2 zeta/(zeta-4a)", c.eta > 2.0 * c.zeta / (c.zeta - 4.0 * a),
                  c.eta, 2.0 * c.zeta / (c.zeta - 4.0 * a)),
        Condition("eta > 1/a", c.eta > 1.0 / a, c.eta, 1.0 / a),
        Condition("beta > 1", c.beta > 1.0, c.beta, 1.0),
        Condition("zeta < Theta/(2a Gamma (1-1/beta))",
                  c.zeta < theta / (2.0 * a * gamma * (1.0 - 1.0 / c.beta)),
                  c.zeta, theta / (2.0 * a * gamma * (1.0 - 1.0 / c.beta)), "<"),
        Condition("8a^2 Gamma (1-1/beta) < Theta",
                  8.0 * a * a * gamma * (1.0 - 1.0 / c.beta) < theta,
                  8.0 * a * a * gamma * (1.0 - 1.0 / c.beta), theta, "<"),
        Condition("1 - 2/eta - 4a/zeta > 0", 1.0 - 2.0 / c.eta - 4.0 * a / c.zeta > 0.0,
                  1.0 - 2.0 / c.eta - 4.0 * a / c.zeta, 0.0),
        Condition("Delta_Sigma - eta Gamma (1+2a) > 0",
                  c.delta_sigma(a, lam) - c.eta * gamma * (1.0 + 2.0 * a) > 0.0,
                  c.delta_sigma(a, lam) - c.eta * gamma * (1.0 + 2.0 * a), 0.0),
        Condition("Theta + (1-1/beta) Gamma bracket > 0",
                  theta + (1.0 - 1.0 / c.beta) * gamma * bracket > 0.0,
                  theta + (1.0 - 1.0 / c.beta) * gamma * bracket, 0.0),
        Condition("Theta + (1-beta) Gamma bracket > 0",
                  theta + (1.0 - c.beta) * gamma * bracket > 0.0,
                  theta + (1.0 - c.beta) * gamma * bracket, 0.0),
    ]
    return ValidationReport(tuple(rows))


def validate(params: ModelParams, strict: bool = False,
             constants: StabilityConstants | None = None) -> ValidationReport:
    """Check 0 < a < 1/4 and, when strict, every lower bound on lambda.

    ``constants`` overrides the deterministic choice used for the lambda bounds.
    Failures are reported, never raised.
    """
    a = params.a
    lam = params.lam
    rows = [Condition("0 < a < 1/4", 0.0 < a < 0.25, a, 0.25, "<")]
    if strict and rows[0].passed:
        tau = params.tau
        need = math.sqrt((4.0 + 1.0 / tau + 1.0 / (a * (1.0 - 4.0 * a))) / (4.0 * a))
        rows.append(Condition("lambda > sqrt((4+1/tau+1/(a(1-4a)))/(4a))", lam > need, lam, need))
        consts = constants if constants is not None else choose_constants(a)
        combined = max(math.sqrt(consts.delta / a),
                       math.sqrt((4.0 * a * (1.0 - 4.0 * a) + 1.0) / (4.0 * a * a * (1.0 - 4.0 * a))))
        rows.append(Condition("lambda > max(sqrt(delta/a), sqrt((4a(1-4a)+1)/(4a^2(1-4a))))",
                              lam > combined, lam, combined))
        weights = math.sqrt(consts.delta / a
                            + consts.eta * consts.gamma_sigma(a) * (1.0 + 2.0 * a) / (2.0 * a))
        rows.append(Condition("lambda > sqrt(delta/a + eta*Gamma*(1+2a)/(2a))",
                              lam > weights, lam, weights))
    elif strict:
        rows.append(Condition("lambda bounds (need 0 < a < 1/4)", False, lam, math.nan))
    return ValidationReport(tuple(rows))


def existence_time_bound(m0: float, m: float, c: float, c1: float, c2: float,
                         epsilon0: float, rho_bar: float | None = None) -> float:
    """Diagnostic evaluation of the existence-time formula with caller-supplied constants."""
    if rho_bar is not None and not m > m0 * rho_bar > 0.0:
        raise ParameterDomainError("need M > M0 * rho_bar > 0")
    ratio = m * m / (c * m0 * m0)
    if ratio < 1.0:
        raise ParameterDomainError("M^2 <= c M0^2 gives a non-positive logarithm")
    return math.log(ratio) / (c * m * (c1 + c2 * m * epsilon0))
