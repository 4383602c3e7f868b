"""
The inhomogeneous (Psi, c)-coalescent.

``Psi`` is a time-ordered list of paintbox atoms. At an atom ``(t, x)``
the current blocks undergo an ``x``-merger; in between, every pair of
blocks merges at rate ``c``. Three samplers are provided:

* :func:`run_flow` composes coagulators chronologically,
* :func:`run_jump_hold` draws the first effective jump from the
  non-coalescence hazard and then its target,
* :func:`run_naive` is the discrete prelimit chain on a pedigree.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import daiquiri
import numpy as np
import numpy.typing as npt
from scipy import integrate, stats

from .cannings_pedigree import (
    GWCouples,
    LargeFamilyCouple,
    LargeFamilyIndividual,
    Pedigree,
    RandomFitness,
    TwoSex,
    WrightFisher,
    build_model,
    generation_paintbox,
)
from .exceptions import ConfigurationError
from .formatting import format_event, format_float, format_weights
from .paintbox import Paintbox, g_nc, merger_groups, non_coalescence_prob, sample_nontrivial_merger
from .partitions import Partition

__all__ = [
    "PsiPath",
    "Kingman",
    "PointMass",
    "TruncatedBeta2",
    "TruncatedBeta4",
    "Empirical",
    "CoalescentRun",
    "sample_psi",
    "epsilon_cut",
    "run_flow",
    "run_jump_hold",
    "run_naive",
    "intensity_for_model",
    "build_intensity",
]

logger = daiquiri.getLogger(__name__)

_chunk = 1024


@dataclass(frozen=True, eq=False)
class PsiPath:
    """
    Realization of the driving point process on ``[0, horizon]``.

    Attributes
    ----------
    times : ndarray
        Strictly increasing atom times (rescaled time).
    atoms : tuple of Paintbox
        Paintbox of each atom.
    horizon : float
        End of the observation window.
    descriptor : str
        Human-readable description of the generating intensity.
    generations : ndarray or None
        Pedigree generation of each atom, for paths read off a pedigree.
    shared : Paintbox or None
        Set when every atom carries the same paintbox.
    """

    times: npt.NDArray[np.float64]
    atoms: tuple
    horizon: float = math.inf
    descriptor: str = ""
    generations: npt.NDArray[np.int64] | None = None
    shared: Paintbox | None = None

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if len(times) != len(self.atoms):
            raise ValueError("one paintbox per atom time is required")
        if len(times) and (np.any(np.diff(times) <= 0) or times[0] < 0):
            raise ValueError("atom times must be nonnegative and strictly increasing")
        if len(times) and times[-1] > self.horizon:
            raise ValueError("atom beyond the horizon")
        if self.shared is None and self.atoms:
            first = self.atoms[0]
            if all(a is first or a == first for a in self.atoms):
                object.__setattr__(self, "shared", first)

    @classmethod
    def empty(cls, horizon: float = math.inf, descriptor: str = "") -> "PsiPath":
        return cls(np.empty(0), (), horizon, descriptor)

    @classmethod
    def regular(cls, times: npt.ArrayLike, x: Paintbox, horizon: float, descriptor: str = "") -> "PsiPath":
        """Path whose atoms all carry the paintbox ``x``."""
        times = np.asarray(times, dtype=float)
        return cls(times, (x,) * len(times), horizon, descriptor, shared=x)

    def __len__(self) -> int:
        return len(self.times)

    def norms(self) -> npt.NDArray[np.float64]:
        return np.array([a.norm for a in self.atoms])

    def epsilon_cut(self, eps: float) -> "PsiPath":
        return epsilon_cut(self, eps)

    def to_text(self) -> str:
        lines = [f"# horizon {format_float(self.horizon)} {self.descriptor}".rstrip()]
        for t, x in zip(self.times, self.atoms):
            lines.append(f"{format_float(t)} {format_weights(x.weights)}".rstrip())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PsiPath":
        horizon = math.inf
        descriptor = ""
        times = []
        atoms = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split(None, 2)
                if len(parts) >= 2 and parts[0] == "horizon":
                    horizon = float(parts[1])
                    descriptor = parts[2] if len(parts) > 2 else ""
                continue
            fields = line.split()
            times.append(float(fields[0]))
            atoms.append(Paintbox(float(w) for w in fields[1:]))
        if math.isinf(horizon) and times:
            horizon = times[-1]
        return cls(np.asarray(times), tuple(atoms), horizon, descriptor)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def read(cls, path: str | Path) -> "PsiPath":
        return cls.from_text(Path(path).read_text())


def epsilon_cut(psi: PsiPath, eps: float) -> PsiPath:
    """Keep the atoms whose l2 norm is at least ``eps``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    keep = np.flatnonzero(psi.norms() >= eps) if len(psi) else np.empty(0, dtype=int)
    generations = psi.generations[keep] if psi.generations is not None else None
    return PsiPath(
        psi.times[keep],
        tuple(psi.atoms[i] for i in keep),
        psi.horizon,
        psi.descriptor,
        generations,
        psi.shared if len(keep) else None,
    )


@dataclass(frozen=True)
class Kingman:
    """No atoms; pairs merge at rate one."""

    c_pair: float = field(default=1.0, init=False)

    @property
    def pair_rate(self) -> float:
        return self.c_pair

    def sample(self, T: float, rng: np.random.Generator | None = None) -> PsiPath:
        _check_horizon(T)
        return PsiPath.empty(T, "kingman")


@dataclass(frozen=True)
class PointMass:
    """Atoms with paintbox ``x`` at Poisson times of the given rate."""

    rate: float
    x: Paintbox
    c_pair: float = 0.0

    def __post_init__(self):
        if self.rate < 0 or self.c_pair < 0:
            raise ConfigurationError("rate and c_pair must be nonnegative")
        if not isinstance(self.x, Paintbox):
            object.__setattr__(self, "x", Paintbox(self.x))

    @property
    def pair_rate(self) -> float:
        return self.c_pair

    def sample(self, T: float, rng: np.random.Generator) -> PsiPath:
        _check_horizon(T)
        count = rng.poisson(self.rate * T)
        times = np.sort(rng.uniform(0.0, T, size=count))
        return PsiPath.regular(times, self.x, T, f"point-mass rate={self.rate:g} x=[{self.x}]")


@dataclass(frozen=True)
class _TruncatedBeta:
    """
    Atoms ``(z/4, ..., z/4)`` with ``copies`` entries, ``z ~ Beta(2-alpha, alpha)``
    weighted by ``1 / <x, x>``, restricted to ``z >= eps``.

    The discarded atoms would merge a fixed pair at total rate
    ``Beta(2-alpha, alpha)([0, eps))``; that mass is added as pair rate.
    """

    alpha: float
    eps: float | None = None
    copies = 2

    def __post_init__(self):
        if not 1 < self.alpha < 2:
            raise ConfigurationError(f"alpha must lie in (1, 2), got {self.alpha}")
        if self.eps is None:
            object.__setattr__(self, "eps", float(self._law.ppf(0.01)))
        elif not 0 < self.eps < 1:
            raise ConfigurationError(f"truncation eps must lie in (0, 1), got {self.eps}")
        logger.info(
            "truncated Beta(%g, %g): eps_B=%.4g, compensating pair rate %.4g, atom rate %.4g",
            2 - self.alpha,
            self.alpha,
            self.eps,
            self.compensating_rate,
            self.atom_rate,
        )

    @property
    def _law(self):
        return stats.beta(2 - self.alpha, self.alpha)

    @property
    def c_pair(self) -> float:
        return 0.0

    @property
    def compensating_rate(self) -> float:
        return float(self._law.cdf(self.eps))

    @property
    def pair_rate(self) -> float:
        return self.c_pair + self.compensating_rate

    @property
    def atom_rate(self) -> float:
        law = self._law
        value, _ = integrate.quad(lambda z: law.pdf(z) / (z * z), self.eps, 1.0, limit=200)
        return 16.0 / self.copies * value

    def _draw_z(self, count: int, rng: np.random.Generator) -> npt.NDArray[np.float64]:
        # envelope z^(-1-alpha) on [eps, 1], accept with (1 - z)^(alpha - 1)
        a = self.alpha
        top = self.eps ** (-a)
        out = np.empty(0)
        while len(out) < count:
            u = rng.random(2 * (count - len(out)) + 8)
            z = (top - u * (top - 1.0)) ** (-1.0 / a)
            keep = rng.random(len(z)) < (1.0 - z) ** (a - 1.0)
            out = np.concatenate([out, z[keep]])
        return out[:count]

    def sample(self, T: float, rng: np.random.Generator) -> PsiPath:
        _check_horizon(T)
        count = rng.poisson(self.atom_rate * T)
        times = np.sort(rng.uniform(0.0, T, size=count))
        z = self._draw_z(count, rng)
        atoms = tuple(Paintbox([zi / 4.0] * self.copies) for zi in z)
        return PsiPath(times, atoms, T, f"beta{self.copies} alpha={self.alpha:g} eps={self.eps:.4g}")


@dataclass(frozen=True)
class TruncatedBeta2(_TruncatedBeta):
    copies = 2


@dataclass(frozen=True)
class TruncatedBeta4(_TruncatedBeta):
    copies = 4


@dataclass(frozen=True)
class Empirical:
    """
    Atoms ``((g + 1) c_N, generation paintbox of generation g)`` read off a
    pedigree, optionally keeping only atoms of norm at least ``eps``.
    """

    pedigree: Pedigree
    c_N: float
    c_pair: float | None = None
    eps: float | None = None

    def __post_init__(self):
        if self.c_pair is None:
            raise ConfigurationError("empirical paths need c_pair from the model catalog")
        if self.c_N <= 0:
            raise ConfigurationError("c_N must be positive")
        if self.eps is not None and self.eps <= 0:
            raise ConfigurationError("eps must be positive")

    @property
    def pair_rate(self) -> float:
        return self.c_pair

    def sample(self, T: float, rng: np.random.Generator | None = None) -> PsiPath:
        _check_horizon(T)
        N = self.pedigree.N
        times, atoms, generations = [], [], []
        for g in range(int(math.floor(T / self.c_N))):
            v = self.pedigree.matrix(g)
            if self.eps is not None:
                totals = v.totals()
                if math.sqrt(float(np.dot(totals, totals)) / (8.0 * N * N)) < self.eps:
                    continue
            times.append((g + 1) * self.c_N)
            atoms.append(generation_paintbox(v))
            generations.append(g)
        eps = "none" if self.eps is None else f"{self.eps:g}"
        return PsiPath(
            np.asarray(times),
            tuple(atoms),
            T,
            f"empirical {self.pedigree.model_id} c_N={self.c_N:.6g} eps={eps}",
            np.asarray(generations, dtype=np.int64),
        )


def _check_horizon(T: float) -> None:
    if not T > 0:
        raise ConfigurationError(f"horizon must be positive, got {T}")


def sample_psi(intensity, T: float, rng: np.random.Generator) -> PsiPath:
    """Draw a path of the driving point process up to time ``T``."""
    return intensity.sample(T, rng)


@dataclass
class CoalescentRun:
    """
    Jump history of one coalescent run.

    ``states[k]`` holds on ``[times[k], times[k+1])``; the first entry is
    the initial state at time 0.
    """

    n: int
    times: list[float]
    states: list[Partition]
    c: float
    psi: PsiPath | None = None
    censored: bool = False
    end_time: float = math.inf
    samples: list[tuple[float, Partition]] = field(default_factory=list)

    @property
    def mrca_time(self) -> float | None:
        if len(self.states[-1]) <= 1:
            return self.times[-1]
        return None

    def state_at(self, t: float) -> Partition:
        return self.states[bisect.bisect_right(self.times, t) - 1]

    def sample_states(self, sample_times: Iterable[float]) -> list[tuple[float, Partition]]:
        return [(float(s), self.state_at(s)) for s in sample_times]

    def to_text(self) -> str:
        return "\n".join(format_event(t, s.blocks) for t, s in zip(self.times, self.states))


def _finish(run: CoalescentRun, horizon: float, sample_times) -> CoalescentRun:
    if len(run.states[-1]) > 1:
        run.censored = True
        run.end_time = horizon
    else:
        run.end_time = run.times[-1]
    run.samples = run.sample_states(sample_times)
    return run


def _random_pair(b: int, rng: np.random.Generator) -> list[int]:
    i, j = rng.choice(b, size=2, replace=False)
    return [int(i), int(j)]


def run_flow(
    psi: PsiPath,
    c: float,
    xi0: Partition,
    sample_times: Sequence[float] = (),
    rng: np.random.Generator | None = None,
    horizon: float | None = None,
) -> CoalescentRun:
    """
    Compose the coagulators of the atoms and of the pair clocks in
    chronological order.

    Each atom applies a fresh merger on the current blocks. Between atoms,
    the ``b(b-1)/2`` pairs compete with exponential clocks of rate ``c``;
    the first to ring merges its pair. An atom wins a tie.
    """
    rng = rng if rng is not None else np.random.default_rng()
    horizon = psi.horizon if horizon is None else horizon
    state = xi0
    t = 0.0
    run = CoalescentRun(xi0.n, [0.0], [xi0], c, psi)
    times = psi.times
    i = 0
    while len(state) > 1:
        b = len(state)
        rate = c * b * (b - 1) / 2.0
        t_pair = t + rng.exponential(1.0 / rate) if rate > 0 else math.inf
        t_atom = times[i] if i < len(times) else math.inf
        if math.isinf(min(t_pair, t_atom)) or min(t_pair, t_atom) > horizon:
            break
        if t_atom <= t_pair:
            groups = merger_groups(psi.atoms[i], b, rng)
            i += 1
            t = float(t_atom)
            if not groups:
                continue
            state = state.merge(groups)
        else:
            t = float(t_pair)
            state = state.merge([_random_pair(b, rng)])
        run.times.append(t)
        run.states.append(state)
    return _finish(run, horizon, sample_times)


def _first_shared_jump(psi, i, b, t, kr, rng, cache):
    # void atoms are i.i.d., so the first effective one is a geometric skip
    x = psi.shared
    if b not in cache:
        cache[b] = 1.0 - non_coalescence_prob(b, x)
    q = cache[b]
    t_atom, index = math.inf, None
    if q > 0 and i < len(psi):
        j = i + int(rng.geometric(q)) - 1
        if j < len(psi):
            t_atom, index = float(psi.times[j]), j
    t_pair = t + rng.exponential(1.0 / kr) if kr > 0 else math.inf
    if t_atom <= t_pair:
        return t_atom, index, q
    return t_pair, None, q


def _first_general_jump(psi, i, b, t, kr, rng):
    # invert the hazard kr (u - t) + sum of g_nc over atoms in (t, u]
    e = rng.exponential()
    before = 0.0
    m = len(psi)
    while i < m:
        stop = min(m, i + _chunk)
        g = np.array([g_nc(b, psi.atoms[k]) for k in range(i, stop)])
        cum = before + np.concatenate([[0.0], np.cumsum(g)])
        continuous = kr * (psi.times[i:stop] - t)
        after = continuous + cum[1:]
        hit = np.flatnonzero(after >= e)
        if hit.size:
            k = int(hit[0])
            if continuous[k] + cum[k] >= e:
                return t + (e - cum[k]) / kr, None, None
            return float(psi.times[i + k]), i + k, -math.expm1(-g[k])
        before = cum[-1]
        i = stop
    if kr > 0:
        return t + (e - before) / kr, None, None
    return math.inf, None, None


def run_jump_hold(
    psi: PsiPath,
    c: float,
    xi0: Partition,
    sample_times: Sequence[float] = (),
    rng: np.random.Generator | None = None,
    horizon: float | None = None,
) -> CoalescentRun:
    """
    Sample jump by jump.

    From state ``xi`` at time ``t`` the probability of no jump up to ``u``
    is ``G^nc(t, u) exp(-c (b choose 2)(u - t))``, where ``G^nc`` is the
    product of ``exp(-g_nc(b, x))`` over atoms in ``(t, u]``. Once the jump
    time is found the target is a pair merger or an atom merger
    conditioned to be effective.
    """
    rng = rng if rng is not None else np.random.default_rng()
    horizon = psi.horizon if horizon is None else horizon
    state = xi0
    t = 0.0
    run = CoalescentRun(xi0.n, [0.0], [xi0], c, psi)
    i = int(np.searchsorted(psi.times, 0.0, side="left"))
    cache: dict[int, float] = {}
    while len(state) > 1:
        b = len(state)
        kr = c * b * (b - 1) / 2.0
        if psi.shared is not None:
            u, index, q = _first_shared_jump(psi, i, b, t, kr, rng, cache)
        else:
            u, index, q = _first_general_jump(psi, i, b, t, kr, rng)
        if math.isinf(u) or u > horizon:
            break
        if index is None:
            state = state.merge([_random_pair(b, rng)])
            i = int(np.searchsorted(psi.times, u, side="right"))
        else:
            state = state.merge(sample_nontrivial_merger(psi.atoms[index], b, rng, q))
            i = index + 1
        t = u
        run.times.append(t)
        run.states.append(state)
    return _finish(run, horizon, sample_times)


def run_naive(
    pedigree: Pedigree,
    eps: float,
    c_pair: float,
    c_N: float,
    xi0: Partition,
    sample_times: Sequence[float] = (),
    rng: np.random.Generator | None = None,
    horizon: float = 50.0,
    path: PsiPath | None = None,
) -> CoalescentRun:
    """
    The epsilon-naive chain on the grid ``c_N * {1, 2, ...}``.

    In generations whose paintbox has norm at least ``eps`` the blocks
    undergo that paintbox's merger. In every other generation one uniformly
    chosen pair merges with probability ``(b choose 2) c_N c_pair``; each
    pair is equally likely. ``path`` may carry the pedigree's precomputed
    epsilon-cut empirical path.
    """
    rng = rng if rng is not None else np.random.default_rng()
    if eps <= 0 or c_N <= 0:
        raise ConfigurationError("eps and c_N must be positive")
    if path is None:
        path = Empirical(pedigree, c_N, c_pair, eps).sample(horizon)
    last = int(math.floor(horizon / c_N))
    steps = (path.generations + 1).tolist() if path.generations is not None else []
    q = c_N * c_pair
    state = xi0
    step_now = 0
    k = 0
    run = CoalescentRun(xi0.n, [0.0], [xi0], c_pair, path)
    while len(state) > 1:
        b = len(state)
        p = min(1.0, q * b * (b - 1) / 2.0)
        step_pair = step_now + int(rng.geometric(p)) if p > 0 else math.inf
        step_glip = steps[k] if k < len(steps) else math.inf
        if min(step_pair, step_glip) > last:
            break
        if step_glip <= step_pair:
            groups = merger_groups(path.atoms[k], b, rng)
            k += 1
            step_now = step_glip
            if not groups:
                continue
            state = state.merge(groups)
        else:
            step_now = step_pair
            state = state.merge([_random_pair(b, rng)])
        run.times.append(step_now * c_N)
        run.states.append(state)
    return _finish(run, last * c_N, sample_times)


def intensity_for_model(model) -> Any:
    """Limit intensity of a catalog model (time in units of ``1 / c_N`` generations)."""
    if isinstance(model, WrightFisher):
        return Kingman()
    if isinstance(model, RandomFitness):
        return Kingman() if model.law == "exponential" else TruncatedBeta2(model.alpha)
    if isinstance(model, GWCouples):
        return Kingman() if model.law == "geometric" else TruncatedBeta4(model.alpha)
    if isinstance(model, (LargeFamilyCouple, LargeFamilyIndividual)):
        copies = 4 if isinstance(model, LargeFamilyCouple) else 2
        x = Paintbox([model.psi / 4.0] * copies)
        if model.gamma > 1:
            return Kingman()
        if model.gamma < 1:
            return PointMass(1.0 / x.l2sq, x, 0.0)
        # a large-family generation merges a pair w.p. <x, x>, any other one w.p. 1 / (2N)
        weight = 2.0 * x.l2sq / (2.0 * x.l2sq + 1.0)
        return PointMass(weight / x.l2sq, x, 1.0 - weight)
    if isinstance(model, TwoSex):
        a = model.inner.lam * model.inner.beta**2 * model.r * (1 - model.r)
        if a == 0:
            return Kingman()
        x = Paintbox([model.inner.beta / 4.0] * 2)
        return PointMass(a / (1 + a) / x.l2sq, x, 1.0 / (1 + a))
    raise ConfigurationError(f"no limit intensity known for {model!r}")


def build_intensity(spec: Mapping[str, Any]):
    """
    Build an intensity from a config mapping.

    Names: ``kingman``; ``point-mass`` (``rate``, ``weights``, ``c_pair``);
    ``beta2`` / ``beta4`` (``alpha``, optional ``eps``); ``model`` (a nested
    ``model`` table handed to the Cannings catalog).
    """
    params = dict(spec)
    name = params.pop("name", None)
    try:
        if name == "kingman":
            return Kingman()
        if name == "point-mass":
            return PointMass(float(params["rate"]), Paintbox(params["weights"]), float(params.get("c_pair", 0.0)))
        if name in ("beta2", "beta4"):
            cls = TruncatedBeta2 if name == "beta2" else TruncatedBeta4
            eps = params.get("eps")
            return cls(float(params["alpha"]), None if eps is None else float(eps))
        if name == "model":
            return intensity_for_model(build_model(params["model"]))
    except KeyError as exc:
        raise ConfigurationError(f"intensity {name!r} is missing parameter {exc}") from None
    raise ConfigurationError(f"unknown intensity {name!r}")
