"""Critical exponents: scaling relations, power-law fits and critical simulations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from . import kernels
from .estimators import choose_bin_size, jackknife, pooled_bins
from .exact import BETA_C, yang_magnetization
from .lattice import Couplings, build_lattice
from .mc import Sampler, run_chains

KINDS = ("beta-magnetization", "spin-decay", "energy-decay", "boundary-pfaffian")


@dataclass(frozen=True)
class ExponentSet:
    alpha: float
    beta: float
    gamma: float
    delta: float
    eta: float
    nu: float
    d: int
    label: str = ""


MEAN_FIELD = ExponentSet(0.0, 0.5, 1.0, 3.0, 0.0, 0.5, 4, "mean-field")


def relation_values(e: ExponentSet):
    """The two chains of quantities the scaling relations declare equal."""
    if e.delta <= 1:
        raise ValueError("scaling relations need delta > 1")
    first = (e.nu * e.d, 2 - e.alpha, 2 * e.beta + e.gamma, e.beta * (e.delta + 1),
             e.gamma * (e.delta + 1) / (e.delta - 1))
    second = (2 - e.eta, e.gamma / e.nu, e.d * (e.delta - 1) / (e.delta + 1))
    return first, second


def scaling_relations_check(e: ExponentSet) -> float:
    """Largest gap over the six adjacent equalities of the two chains.

    ``nu d = 2 - alpha = 2 beta + gamma = beta (delta + 1) = gamma (delta + 1)/(delta - 1)``
    and ``2 - eta = gamma / nu = d (delta - 1)/(delta + 1)``.

    >>> scaling_relations_check(MEAN_FIELD)
    0.0
    """
    out = 0.0
    for chain in relation_values(e):
        for a, b in zip(chain[:-1], chain[1:]):
            out = max(out, abs(a - b))
    return out


def complete_exponents(beta: float, eta: float, d: int) -> ExponentSet:
    """Fill in ``alpha, gamma, delta, nu`` from ``beta``, ``eta`` and the relations."""
    denom = d - 2 + eta
    if denom <= 0:
        raise ValueError("need d - 2 + eta > 0")
    delta = (d + 2 - eta) / denom
    nu = beta * (delta + 1) / d
    return ExponentSet(2 - nu * d, beta, nu * (2 - eta), delta, eta, nu, d, "relation-completed")


@dataclass
class PowerLawFit:
    """Weighted log-log least squares ``ln y = c + exponent ln x``.

    For decay fits ``exponent`` is minus the slope.
    """

    exponent: float
    stderr: float
    r2: float
    window: tuple
    n_points: int
    amplitude: float = float("nan")
    info: dict = field(default_factory=dict)


def fit_power_law(x, y, err=None, window=None, decay: bool = False,
                  correction=None) -> PowerLawFit:
    """Power-law fit on the points with ``window[0] <= x <= window[1]``.

    With errors the fit is weighted by ``(y/err)^2`` and the standard error
    is inflated by the reduced chi-square when that exceeds one; without
    errors the residual scatter sets it.

    ``correction = (L, omega)`` multiplies the power law by
    ``1 + b (x/L)^omega`` with a free amplitude ``b``, the leading
    finite-size correction on a periodic system of size ``L``.

    Examples
    --------
    >>> x = np.arange(1.0, 9.0)
    >>> round(fit_power_law(x, x ** -0.25).exponent, 12)
    -0.25
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    e = None if err is None else np.asarray(err, dtype=np.float64)
    keep = np.ones(len(x), dtype=bool)
    if window is not None:
        lo, hi = window
        if lo > hi:
            raise ValueError("empty window")
        keep &= (x >= lo) & (x <= hi)
    keep &= (x > 0) & (y > 0)
    if e is not None:
        keep &= e > 0
    n = int(keep.sum())
    n_par = 2 if correction is None else 3
    if n < max(4, n_par + 1):
        raise ValueError(f"power-law fit needs >= {max(4, n_par + 1)} usable points, got {n}")
    lx, ly = np.log(x[keep]), np.log(y[keep])
    w = np.ones(n) if e is None else (y[keep] / e[keep]) ** 2
    info = {}
    if correction is None:
        X = np.column_stack([np.ones(n), lx])
        A = X.T @ (X * w[:, None])
        coef = np.linalg.solve(A, X.T @ (w * ly))
        cov = np.linalg.inv(A)
        model = X @ coef
    else:
        size, omega = (float(v) for v in correction)
        u = (x[keep] / size) ** omega

        def f(t, a, k, b):
            return a + k * t + np.log1p(b * u)

        coef, cov = curve_fit(f, lx, ly, p0=(ly[0], (ly[-1] - ly[0]) / (lx[-1] - lx[0]), 0.0),
                              sigma=1 / np.sqrt(w), absolute_sigma=True, maxfev=20000)
        model = f(lx, *coef)
        info["correction_amplitude"] = float(coef[2])
        info["correction"] = (size, omega)
    resid = ly - model
    chi2 = float((w * resid ** 2).sum())
    dof = n - n_par
    scale = chi2 / dof if e is None else max(1.0, chi2 / dof)
    ybar = (w * ly).sum() / w.sum()
    tot = float((w * (ly - ybar) ** 2).sum())
    r2 = 1.0 - chi2 / tot if tot > 0 else 1.0
    slope = float(coef[1])
    win = (float(x[keep].min()), float(x[keep].max()))
    info["chi2"] = chi2
    return PowerLawFit(-slope if decay else slope, float(math.sqrt(cov[1, 1] * scale)), r2,
                       win, n, float(math.exp(coef[0])), info)


def reference_constants() -> dict:
    """Reference values with a note on where each number comes from."""
    return {
        "beta_c_2d": (BETA_C, "closed form (1/2) ln(1 + sqrt 2)"),
        "p_c_fk2": (math.sqrt(2) / (1 + math.sqrt(2)), "closed form sqrt 2 / (1 + sqrt 2)"),
        "delta_sigma_2d": (0.125, "exact planar spin scaling dimension"),
        "delta_epsilon_2d": (1.0, "exact planar energy scaling dimension"),
        "delta_sigma_3d": (0.5181489, "numerical conformal bootstrap, error 1e-7"),
        "delta_epsilon_3d": (1.412625, "numerical conformal bootstrap, error 1e-6"),
    }


# ---------------------------------------------------------------------------
# critical simulations


def _axis_autocorrelation(g, r_max):
    """Translation average of ``g(x) g(x + r e_a)`` for ``r <= r_max``, averaged over axes."""
    f = np.fft.rfft2(g)
    c = np.fft.irfft2(f * np.conj(f), s=g.shape) / g.size
    return 0.5 * (c[: r_max + 1, 0] + c[0, : r_max + 1])


def critical_torus_correlations(L: int, observable: str, sweeps: int, seed: int,
                                burnin: int = 500, chains: int = 1, threads=None,
                                beta: float = BETA_C):
    """Spin or energy two-point function on the ``L x L`` torus, separations ``0..L/4``.

    The energy observable is the horizontal (vertical) bond variable
    ``sigma_x sigma_{x+e}`` correlated along its own axis, connected part.

    Returns
    -------
    r, mean, stderr : ndarray
    """
    if observable not in ("spin", "energy"):
        raise ValueError("observable must be 'spin' or 'energy'")
    r_max = L // 4
    lat = build_lattice(2, (L, L), "torus")
    sampler = Sampler(lat, Couplings(beta), algorithm="sw")

    if observable == "spin":
        def meas(s, _):
            return _axis_autocorrelation(s.reshape(L, L).astype(np.float64), r_max)
    else:
        def meas(s, _):
            g = s.reshape(L, L).astype(np.float64)
            out = np.zeros(r_max + 2)
            for a in (0, 1):
                b = g * np.roll(g, -1, axis=a)
                f = np.fft.rfft2(b)
                c = np.fft.irfft2(f * np.conj(f), s=g.shape) / g.size
                out[1:] += 0.5 * (c[: r_max + 1, 0] if a == 0 else c[0, : r_max + 1])
                out[0] += 0.5 * b.mean()
            return out

    data = run_chains(sampler, chains, sweeps, burnin, seed, meas, threads, init="random")
    bins = pooled_bins(data, choose_bin_size(data))
    r = np.arange(r_max + 1, dtype=np.float64)
    if observable == "spin":
        allx = np.concatenate(data)
        return r, allx.mean(axis=0), bins.std(axis=0, ddof=1) / math.sqrt(len(bins))
    val, err = jackknife(bins, lambda m: m[1:] - m[0] ** 2)
    return r, np.asarray(val), np.asarray(err)


@dataclass
class PfaffianPoint:
    separation: int
    deviation: float
    stderr: float
    four_point: float
    pfaffian: float


def boundary_cycle(lat) -> np.ndarray:
    """Vertices of a 2D box's outer boundary in cyclic order."""
    if lat.topology != "box" or lat.dim != 2 or min(lat.sides) < 2:
        raise ValueError("need a 2D box with both sides >= 2")
    W, H = lat.sides
    pts = ([(i, 0) for i in range(W)] + [(W - 1, j) for j in range(1, H)]
           + [(i, H - 1) for i in range(W - 2, -1, -1)] + [(0, j) for j in range(H - 2, 0, -1)])
    return np.array([lat.index(p) for p in pts], dtype=np.int64)


def pfaffian4(c12, c34, c13, c24, c14, c23):
    """Pfaffian of the antisymmetric 4x4 matrix of two-point functions."""
    return c12 * c34 - c13 * c24 + c14 * c23


def boundary_pfaffian(separations=(16, 32), width: int = 128, height: int = 64,
                      sweeps: int = 20000, seed: int = 0, burnin: int = 500,
                      chains: int = 1, threads=None) -> list:
    """Relative gap between boundary four-point functions and their Pfaffian.

    On a free ``width x height`` box at ``beta_c`` take four points spaced
    by ``s`` along the outer boundary, starting from every boundary vertex.
    For each placement ``<s1 s2 s3 s4>`` is compared with
    ``<12><34> - <13><24> + <14><23>``; the deviation is
    ``|sum (four - Pf)| / sum Pf`` over placements. All correlators use the
    cluster estimators ``1[x <-> y]`` and ``1[every cluster meets
    {1,2,3,4} evenly]`` from Swendsen-Wang bonds; the error is a jackknife
    over bins.
    """
    lat = build_lattice(2, (width, height))
    sampler = Sampler(lat, Couplings(BETA_C), algorithm="sw")
    V = lat.n_vertices
    cyc = boundary_cycle(lat)
    P = len(cyc)
    plans = []
    for s in separations:
        if 3 * s >= P:
            raise ValueError(f"separation {s} too large for the boundary")
        plans.append(cyc[(np.arange(P)[:, None] + s * np.arange(4)[None, :]) % P])
    pairs = ((0, 1), (2, 3), (0, 2), (1, 3), (0, 3), (1, 2))

    def meas(spins, bonds):
        roots = kernels.cluster_roots(V, sampler.eu, sampler.ev, bonds)
        out = []
        for pts in plans:
            r = roots[pts]
            acc = np.empty((len(pts), 7))
            for k, (i, j) in enumerate(pairs):
                acc[:, k] = r[:, i] == r[:, j]
            rs = np.sort(r, axis=1)
            acc[:, 6] = (rs[:, 0] == rs[:, 1]) & (rs[:, 2] == rs[:, 3])
            out.append(acc.ravel())
        return np.concatenate(out)

    data = run_chains(sampler, chains, sweeps, burnin, seed, meas, threads, init="random")
    bins = pooled_bins(data, choose_bin_size(data))
    result, off = [], 0
    for s, pts in zip(separations, plans):
        n = len(pts) * 7

        def parts(m, off=off, n=n):
            a = m[off: off + n].reshape(-1, 7)
            return np.array([a[:, 6].sum(), pfaffian4(*a[:, :6].T).sum()])

        def rel(m):
            four, pf = parts(m)
            return abs(four - pf) / pf

        dev, err = jackknife(bins, rel)
        four, pf = parts(bins.mean(axis=0))
        k = len(pts)
        result.append(PfaffianPoint(int(s), float(dev), float(err), float(four / k),
                                    float(pf / k)))
        off += n
    return result


def exponent_experiment(kind: str, params: dict | None = None, seed: int = 0):
    """Run one exponent experiment.

    Kinds
    -----
    beta-magnetization
        Fit of the closed-form spontaneous magnetisation against
        ``beta - beta_c`` over ``[1e-4, 1e-2]``; returns a PowerLawFit.
    spin-decay, energy-decay
        Swendsen-Wang at ``beta_c`` on an ``L x L`` torus; power-law decay
        fit over separations ``[4, L/4]`` (``params['window']`` overrides);
        returns a PowerLawFit whose exponent is minus the slope. The spin
        fit includes the ``1 + b r/L`` finite-size factor
        (``params['omega']`` changes the power, ``None`` drops it).
    boundary-pfaffian
        List of PfaffianPoint for the requested separations.

    ``params`` keys: ``L``, ``sweeps``, ``burnin``, ``window``, ``beta``,
    ``separations``, ``threads``.
    """
    p = dict(params or {})
    if kind == "beta-magnetization":
        t = np.geomspace(1e-4, 1e-2, int(p.get("points", 25)))
        m = np.array([yang_magnetization(BETA_C + v) for v in t])
        return fit_power_law(t, m, window=p.get("window"))
    if kind in ("spin-decay", "energy-decay", "boundary-pfaffian"):
        if float(p.get("beta", BETA_C)) != BETA_C:
            raise ValueError(f"{kind} runs at beta_c only")
    if kind in ("spin-decay", "energy-decay"):
        L = int(p.get("L", 64))
        r, c, e = critical_torus_correlations(
            L, "spin" if kind == "spin-decay" else "energy", int(p.get("sweeps", 20000)), seed,
            int(p.get("burnin", 500)), int(p.get("chains", 1)), p.get("threads"))
        window = tuple(p.get("window", (4, L // 4)))
        # the spin correlator picks up the energy one-point function on the
        # torus, a (r/L)^1 correction; the energy correlator's is (r/L)^2
        omega = p.get("omega", 1.0 if kind == "spin-decay" else None)
        corr = None if omega is None else (L, float(omega))
        fit = fit_power_law(r, c, e, window=window, decay=True, correction=corr)
        fit.info.update({"L": L, "r": r.tolist(), "mean": c.tolist(), "stderr": e.tolist()})
        return fit
    if kind == "boundary-pfaffian":
        return boundary_pfaffian(tuple(p.get("separations", (16, 32))), int(p.get("width", 128)),
                                 int(p.get("height", 64)), int(p.get("sweeps", 20000)), seed,
                                 int(p.get("burnin", 500)), chains=int(p.get("chains", 1)),
                                 threads=p.get("threads"))
    raise ValueError(f"unknown kind {kind!r}; choose from {KINDS}")
