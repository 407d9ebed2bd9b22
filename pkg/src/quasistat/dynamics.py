"""Evolution maps for ranked configurations and mass-partitions.

Additive picture: every point gets an independent increment h_i and the
configuration is re-ranked.  Multiplicative picture: every mass is reweighted
by W_i = e^{beta*h_i} and renormalized.  Both advance the untracked tail by
its mean factor E[e^{beta*h}].
"""

from dataclasses import dataclass

import numpy as np

from .pointproc import MassPartition, PointConfiguration, mass_partition_from_config

__all__ = [
    "IncrementLaw",
    "Trajectory",
    "evolve_additive",
    "evolve_multiplicative",
    "shift_leader",
    "shift_tail",
    "run_trajectory",
]


@dataclass(frozen=True)
class IncrementLaw:
    """Increment distribution with all exponential moments finite.

    Supported kinds: gaussian(mu, sigma), uniform(a, b) and constant(c).
    ``lognormal_weight`` builds the gaussian h for which W = e^{beta*h} is
    LogNormal(mu, sigma).
    """

    kind: str
    params: tuple

    @classmethod
    def gaussian(cls, mu, sigma):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        return cls("gaussian", (float(mu), float(sigma)))

    @classmethod
    def uniform(cls, a, b):
        if not a < b:
            raise ValueError("uniform requires a < b")
        return cls("uniform", (float(a), float(b)))

    @classmethod
    def constant(cls, c):
        return cls("constant", (float(c),))

    @classmethod
    def lognormal_weight(cls, mu, sigma, beta=1.0):
        return cls.gaussian(mu / beta, sigma / beta)

    def sample(self, size, rng):
        if self.kind == "gaussian":
            mu, sigma = self.params
            return rng.normal(mu, sigma, size=size)
        if self.kind == "uniform":
            a, b = self.params
            return rng.uniform(a, b, size=size)
        if self.kind == "constant":
            return np.full(size, self.params[0])
        raise ValueError(f"unknown increment kind {self.kind!r}")

    def log_mgf(self, lam):
        """log E[e^{lam * h}], finite for every real lam."""
        lam = float(lam)
        if lam == 0.0:
            return 0.0
        if self.kind == "gaussian":
            mu, sigma = self.params
            return lam * mu + 0.5 * lam * lam * sigma * sigma
        if self.kind == "uniform":
            a, b = self.params
            # anchored at the dominating endpoint to avoid overflow
            hi = b if lam > 0 else a
            lo = a if lam > 0 else b
            return lam * hi + np.log1p(-np.exp(lam * (lo - hi))) - np.log(abs(lam) * (b - a))
        if self.kind == "constant":
            return lam * self.params[0]
        raise ValueError(f"unknown increment kind {self.kind!r}")

    def mean(self):
        if self.kind == "gaussian":
            return self.params[0]
        if self.kind == "uniform":
            return 0.5 * (self.params[0] + self.params[1])
        if self.kind == "constant":
            return self.params[0]
        raise ValueError(f"unknown increment kind {self.kind!r}")

    def sum_tail_probability(self, y, tau):
        """P(h_1 + ... + h_tau >= y), vectorized in y.

        Closed form for gaussian and constant kinds; other kinds have no
        implemented tau-fold tail.
        """
        from scipy.special import ndtr

        y = np.asarray(y, dtype=float)
        if tau < 0:
            raise ValueError("tau must be >= 0")
        if tau == 0:
            return (y <= 0).astype(float)
        if self.kind == "gaussian":
            mu, sigma = self.params
            return ndtr((tau * mu - y) / (sigma * np.sqrt(tau)))
        if self.kind == "constant":
            return (y <= tau * self.params[0]).astype(float)
        raise ValueError(f"no closed-form tau-fold tail for kind {self.kind!r}")


@dataclass
class Trajectory:
    """Snapshots of tau evolution steps (length tau + 1, start included)."""

    snapshots: list
    shift_policy: str = "none"

    @property
    def tau(self):
        return len(self.snapshots) - 1


def _sort_desc(values):
    # ties (probability zero for continuous laws) keep original index order
    order = np.argsort(-values, kind="stable")
    return values[order]


def evolve_additive(config: PointConfiguration, law: IncrementLaw, rng) -> PointConfiguration:
    """One step X_i -> X_i + h_i, re-ranked; tail advanced by E[e^{beta h}]."""
    h = law.sample(len(config), rng)
    if not np.all(np.isfinite(h)):
        raise ValueError("increment law produced non-finite draws")
    tail = config.tail_weight_estimate * np.exp(law.log_mgf(config.beta))
    return PointConfiguration(
        _sort_desc(config.points + h), beta=config.beta, tail_weight_estimate=tail
    )


def evolve_multiplicative(
    partition: MassPartition, law: IncrementLaw, beta=1.0, rng=None
) -> MassPartition:
    """One reshuffle xi_i -> xi_i W_i / sum_j xi_j W_j with W_i = e^{beta h_i}.

    Computed in log space; the untracked tail advances by E[W].
    """
    h = law.sample(len(partition), rng)
    if not np.all(np.isfinite(h)):
        raise ValueError("increment law produced non-finite draws")
    logm = np.log(partition.masses) + beta * h
    m = logm.max()
    w = np.exp(logm - m)
    scaled_tail = partition.tail_mass * np.exp(law.log_mgf(beta) - m)
    total = w.sum() + scaled_tail
    if not (np.isfinite(total) and total > 0):
        raise FloatingPointError("all reshuffled weights underflowed; check law and beta")
    masses = _sort_desc(w / total)
    masses = masses[masses > 0]
    return MassPartition(masses, tail_mass=scaled_tail / total)


def shift_leader(config: PointConfiguration) -> PointConfiguration:
    """Re-center so the leading point sits at 0; gaps are untouched."""
    return PointConfiguration(
        config.points - config.points[0],
        beta=config.beta,
        tail_weight_estimate=config.tail_weight_estimate * np.exp(-config.beta * config.points[0]),
    )


def shift_tail(config: PointConfiguration) -> PointConfiguration:
    """Re-center so sum_i e^{beta X_i} plus rescaled tail equals 1."""
    logw = config.beta * config.points
    m = logw[0]
    log_total = m + np.log(np.exp(logw - m).sum() + config.tail_weight_estimate * np.exp(-m))
    return PointConfiguration(
        config.points - log_total / config.beta,
        beta=config.beta,
        tail_weight_estimate=config.tail_weight_estimate * np.exp(-log_total),
    )


_SHIFTS = {
    "leader": shift_leader,
    "tail": shift_tail,
    "none": lambda c: c,
}


def run_trajectory(start, law: IncrementLaw, tau, shift_policy="none", rng=None, beta=1.0):
    """Iterate the evolution tau times, applying the shift policy after each step.

    ``start`` may be a PointConfiguration (additive map, any policy) or a
    MassPartition (multiplicative map; shifts do not apply).
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    additive = isinstance(start, PointConfiguration)
    if not additive and shift_policy != "none":
        raise ValueError("shift policies apply to point configurations only")
    if shift_policy not in _SHIFTS:
        raise ValueError(f"unknown shift policy {shift_policy!r}")
    shift = _SHIFTS[shift_policy]
    snapshots = [start]
    current = start
    for _ in range(tau):
        if additive:
            current = shift(evolve_additive(current, law, rng))
        else:
            current = evolve_multiplicative(current, law, beta=beta, rng=rng)
        snapshots.append(current)
    return Trajectory(snapshots, shift_policy=shift_policy)
