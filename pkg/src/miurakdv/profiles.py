"""Miura-form initial profiles ``q = r' + r**2`` with ``r`` vanishing on x > 0.

A profile is stored through its Miura datum ``r`` as an ordered tuple of
pieces covering ``(-inf, 0]``.  Three piece kinds exist:

``constant``
    ``r = value`` on the piece.
``rational``
    ``r(x) = 1 / (x - pole)`` with the pole to the right of the piece.  These
    are exactly the solutions of ``r' = -r**2``, so ``q`` vanishes there and
    the normalized antiderivative ``Q`` is constant.
``smooth``
    ``r`` given by adaptive piecewise Chebyshev interpolation of a smooth
    function (analytic formula or a numerically mollified datum).

The antiderivative normalization is ``Q(x) = r(x) - int_x^0 r(s)**2 ds`` for
x < 0 and ``Q = 0`` for x >= 0, so that ``dQ/dx = q`` as distributions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as cheb
from numpy.polynomial.legendre import leggauss

__all__ = [
    "ProfileError",
    "Piece",
    "MiuraProfile",
    "PROFILE_KINDS",
    "catalog",
    "evaluate_Q",
    "mollify",
    "profile_from_config",
]

PROFILE_KINDS = ("zero", "delta", "smooth_bump", "positive_box", "constant_r", "rough_random")

_CHEB_DEG = 24
_CHEB_TOL = 1e-14
# int_{-1}^{1} exp(-1/(1-u^2)) du
_BUMP_MASS = 0.44399381616807943


def _pad(c: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n)
    out[:c.size] = c
    return out


class ProfileError(ValueError):
    """Unknown profile name or inadmissible parameters."""


class ChebPanels:
    """Piecewise Chebyshev representation of a smooth function on [a, b].

    Besides ``r`` itself it keeps the derivative and the antiderivative of
    ``r**2`` on every panel, so ``Q`` can be evaluated without further
    quadrature.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                 deg: int = _CHEB_DEG, tol: float = _CHEB_TOL, min_width: float = 1e-9):
        probe = np.linspace(a, b, 2049)
        scale = float(np.max(np.abs(fn(probe)))) or 1.0
        edges = []
        coefs = []
        stack = [(a, b)]
        while stack:
            lo, hi = stack.pop()
            c = cheb.Chebyshev.interpolate(fn, deg, domain=[lo, hi]).coef
            if np.max(np.abs(c[-4:])) <= tol * scale or hi - lo < min_width:
                edges.append((lo, hi))
                coefs.append(c)
            else:
                mid = 0.5 * (lo + hi)
                stack.append((mid, hi))
                stack.append((lo, mid))
        order = np.argsort([e[0] for e in edges])
        self.edges = np.array([edges[i][0] for i in order] + [b])
        self.coef = np.array([coefs[i] for i in order])
        half = 0.5 * np.diff(self.edges)
        self.dcoef = np.array([cheb.chebder(c) / w for c, w in zip(self.coef, half)])
        # antiderivative of r^2 in x, zero at the panel's left edge; chebmul
        # trims exact zeros, so pad back to a common length
        n2 = 2 * deg + 2
        self.icoef = np.array([
            _pad(cheb.chebint(cheb.chebmul(c, c), lbnd=-1) * w, n2)
            for c, w in zip(self.coef, half)
        ])
        self.panel_integral = np.array([cheb.chebval(1.0, c) for c in self.icoef])

    @property
    def npanels(self) -> int:
        return len(self.coef)

    def locate(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        j = np.clip(np.searchsorted(self.edges, x, side="left") - 1, 0, self.npanels - 1)
        lo = self.edges[j]
        hi = self.edges[j + 1]
        u = np.clip((2.0 * x - lo - hi) / (hi - lo), -1.0, 1.0)
        return j, u

    def _eval(self, table: np.ndarray, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        j, u = self.locate(x)
        out = np.empty_like(x)
        for p in np.unique(j):
            m = j == p
            out[m] = cheb.chebval(u[m], table[p])
        return out

    def value(self, x):
        return self._eval(self.coef, x)

    def deriv(self, x):
        return self._eval(self.dcoef, x)

    def square_integral_to_right(self, x):
        """``int_x^b r^2`` for x inside [a, b]."""
        x = np.asarray(x, dtype=float)
        j, u = self.locate(x)
        right_tail = np.concatenate([np.cumsum(self.panel_integral[::-1])[::-1][1:], [0.0]])
        out = np.empty_like(x)
        for p in np.unique(j):
            m = j == p
            out[m] = self.panel_integral[p] - cheb.chebval(u[m], self.icoef[p]) + right_tail[p]
        return out

    def total_square_integral(self) -> float:
        return float(np.sum(self.panel_integral))


@dataclass(frozen=True, eq=False)
class Piece:
    """One piece of the Miura datum ``r`` on ``[left, right]``."""

    left: float
    right: float
    kind: str
    value: float = 0.0
    panels: ChebPanels | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "rational", "smooth"):
            raise ProfileError(f"unknown piece kind {self.kind!r}")
        if not self.left < self.right:
            raise ProfileError("empty piece")
        if self.kind == "rational" and not self.value > self.right:
            raise ProfileError("rational piece needs its pole to the right of the piece")
        if self.kind == "smooth" and self.panels is None:
            raise ProfileError("smooth piece without panels")

    @property
    def q_vanishes(self) -> bool:
        """True when ``Q`` is constant on the piece."""
        return self.kind == "rational" or (self.kind == "constant" and self.value == 0.0)

    def r(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.value)
        if self.kind == "rational":
            return 1.0 / (x - self.value)
        return self.panels.value(x)

    def dr(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.zeros_like(x)
        if self.kind == "rational":
            return -1.0 / (x - self.value) ** 2
        return self.panels.deriv(x)

    def square_integral_to_right(self, x):
        """``int_x^right r(s)^2 ds``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return self.value**2 * (self.right - x)
        if self.kind == "rational":
            return 1.0 / (x - self.value) - 1.0 / (self.right - self.value)
        return self.panels.square_integral_to_right(x)

    def square_integral(self) -> float:
        if math.isinf(self.left):
            if self.kind == "rational":
                return -1.0 / (self.right - self.value)
            return 0.0 if self.value == 0.0 else math.inf
        return float(self.square_integral_to_right(np.array(self.left)))


@dataclass(frozen=True, eq=False)
class MiuraProfile:
    """Admissible singular initial datum represented through ``r``.

    Parameters
    ----------
    name : str
        Catalog name (``"mollify"`` for mollified profiles).
    params : tuple of (str, value) pairs
        Parameters the profile was built from.
    pieces : tuple of Piece
        Ordered pieces covering ``(-inf, 0]``; the first one is unbounded.
    closed_forms : dict, optional
        Known formulas, keys ``"m"`` (function of z) and ``"R"`` (function of k).
    """

    name: str
    params: tuple
    pieces: tuple
    closed_forms: dict = field(default_factory=dict)
    base: "MiuraProfile | None" = None

    def __post_init__(self):
        if not self.pieces or not math.isinf(self.pieces[0].left):
            raise ProfileError("the first piece must extend to -inf")
        if self.pieces[-1].right != 0.0:
            raise ProfileError("pieces must end at x = 0")
        for a, b in zip(self.pieces[:-1], self.pieces[1:]):
            if a.right != b.left:
                raise ProfileError("pieces must be contiguous")
        # int_{piece.right}^0 r^2 for each piece
        acc = 0.0
        right_int = []
        for p in reversed(self.pieces):
            right_int.append(acc)
            if not math.isinf(p.left):
                acc += p.square_integral()
        object.__setattr__(self, "_right_int", tuple(reversed(right_int)))
        object.__setattr__(self, "_breaks", np.array([p.right for p in self.pieces]))

    # -- descriptors ---------------------------------------------------
    @property
    def key(self) -> str:
        if self.name == "mollify":
            return f"mollify({self.base.key},n={dict(self.params)['n']})"
        body = ",".join(f"{k}={v!r}" for k, v in self.params)
        return f"{self.name}({body})"

    @property
    def support_left(self) -> float:
        """Left edge beyond which ``r`` is constant (``-inf`` if never)."""
        first = self.pieces[0]
        return first.right if first.kind == "constant" else -math.inf

    @property
    def tail_constant(self) -> float:
        first = self.pieces[0]
        return first.value if first.kind == "constant" else 0.0

    @property
    def is_zero(self) -> bool:
        return all(p.kind == "constant" and p.value == 0.0 for p in self.pieces)

    @property
    def exact_tail(self) -> bool:
        """True when ``Q`` is constant on a left half-line."""
        return self.pieces[0].q_vanishes

    @property
    def q_free_left(self) -> float:
        """Right end of the left half-line on which ``Q`` is constant (or -inf)."""
        return self.pieces[0].right if self.exact_tail else -math.inf

    @property
    def tail_Q(self) -> float:
        """Value of ``Q`` on ``(-inf, q_free_left)`` (exact-tail profiles only)."""
        if not self.exact_tail:
            raise ProfileError("Q is not eventually constant for this profile")
        return float(self._piece_Q(0, np.array(self.pieces[0].right)))

    def _piece_index(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.searchsorted(self._breaks, x, side="left"), 0, len(self.pieces) - 1)

    def _piece_Q(self, i: int, x: np.ndarray) -> np.ndarray:
        p = self.pieces[i]
        if p.kind == "rational":
            rr = 1.0 / (p.right - p.value)
            return np.full_like(np.asarray(x, dtype=float), rr - self._right_int[i])
        return p.r(x) - p.square_integral_to_right(x) - self._right_int[i]

    def _dispatch(self, x, fn):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        neg = x <= 0.0
        if np.any(neg):
            xn = x[neg]
            idx = self._piece_index(xn)
            vals = np.empty_like(xn)
            for i in np.unique(idx):
                m = idx == i
                vals[m] = fn(i, xn[m])
            out[neg] = vals
        return out

    # -- evaluation ----------------------------------------------------
    def r(self, x):
        """Miura datum, left-continuous at the piece breaks, zero for x > 0."""
        return self._dispatch(x, lambda i, xx: self.pieces[i].r(xx))

    def dr(self, x):
        """Derivative of ``r`` away from its jumps."""
        return self._dispatch(x, lambda i, xx: self.pieces[i].dr(xx))

    def Q(self, x):
        """Normalized antiderivative of ``q``; identically zero on x >= 0."""
        x = np.asarray(x, dtype=float)
        out = self._dispatch(x, self._piece_Q)
        return np.where(x >= 0.0, 0.0, out)

    def q_smooth(self, x):
        """Pointwise ``r' + r**2`` (the absolutely continuous part of ``q``)."""
        r = self.r(x)
        return self.dr(x) + r * r

    @property
    def jumps(self) -> list[tuple[float, float]]:
        """Jumps of ``r`` (location, size); each contributes ``size * delta`` to ``q``."""
        out = []
        for a, b in zip(self.pieces[:-1], self.pieces[1:]):
            left = float(a.r(np.array(a.right)))
            right = float(b.r(np.array(b.left)))
            if left != right:
                out.append((a.right, right - left))
        last = float(self.pieces[-1].r(np.array(0.0)))
        if last != 0.0:
            out.append((0.0, -last))
        return out

    @property
    def is_smooth(self) -> bool:
        return all(abs(s) < 1e-12 for _, s in self.jumps) and all(
            p.kind != "rational" for p in self.pieces
        )

    def to_config(self) -> dict:
        if self.name == "mollify":
            cfg = self.base.to_config()
            cfg["mollify"] = dict(self.params)["n"]
            return cfg
        params = dict(self.params)
        cfg = {"kind": self.name, "params": {k: v for k, v in params.items() if k != "seed"}}
        if "seed" in params:
            cfg["seed"] = params["seed"]
        return cfg


def evaluate_Q(profile: MiuraProfile, x):
    """Normalized antiderivative ``Q`` of the profile's ``q`` at ``x``."""
    out = profile.Q(x)
    return float(out) if np.ndim(out) == 0 else out


# -- catalog -------------------------------------------------------------

def _root_plus(z):
    """Square root of z lying in the closed upper half-plane."""
    return 1j * np.sqrt(-np.asarray(z, dtype=complex))


def _zero(name="zero", params=()):
    return MiuraProfile(name, tuple(params), (Piece(-math.inf, 0.0, "constant", 0.0),),
                        {"m": lambda z: 1j * _root_plus(z), "R": lambda k: 0.0 * np.asarray(k)})


def _delta(c: float) -> MiuraProfile:
    if not c > 0:
        raise ProfileError("delta profile needs c > 0")
    return MiuraProfile(
        "delta", (("c", float(c)),),
        (Piece(-math.inf, 0.0, "rational", 1.0 / c),),
        {
            "m": lambda z: 1j * _root_plus(z) - c,
            "R": lambda k: c / (2j * np.asarray(k) - c),
        },
    )


def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = np.abs(s) < 1.0
    out[m] = np.exp(1.0 - 1.0 / (1.0 - s[m] ** 2))
    return out


def _smooth_bump(a: float, amplitude: float) -> MiuraProfile:
    if a < 0 or not np.isfinite(amplitude):
        raise ProfileError("smooth_bump needs a >= 0 and finite amplitude")
    params = (("a", float(a)), ("amplitude", float(amplitude)))
    if a == 0 or amplitude == 0:
        return _zero("smooth_bump", params)

    def fn(x):
        return amplitude * _bump((np.asarray(x) + a) / a)

    panels = ChebPanels(fn, -2 * a, 0.0)
    return MiuraProfile("smooth_bump", params, (
        Piece(-math.inf, -2 * a, "constant", 0.0),
        Piece(-2 * a, 0.0, "smooth", panels=panels),
    ))


def _positive_box(b: float, a: float) -> MiuraProfile:
    """``q = a`` on ``[-b, 0]`` and zero elsewhere."""
    if not b > 0 or a < 0:
        raise ProfileError("positive_box needs b > 0 and a >= 0")
    params = (("b", float(b)), ("a", float(a)))

    def m_closed(z):
        lam = _root_plus(z)
        nu2 = np.asarray(z, dtype=complex) - a
        nu = np.sqrt(nu2)
        cs = np.cos(nu * b)
        sn = np.where(nu == 0, b, np.sin(nu * b) / np.where(nu == 0, 1, nu))
        return (nu2 * sn + 1j * lam * cs) / (cs - 1j * lam * sn)

    def r_closed(k):
        m = m_closed(np.asarray(k, dtype=complex) ** 2)
        return (1j * k - m) / (1j * k + m)

    if a == 0:
        prof = _zero("positive_box", params)
        return MiuraProfile(prof.name, params, prof.pieces, {"m": m_closed, "R": r_closed})
    sa = math.sqrt(a)
    rho = sa * math.tanh(sa * b)
    panels = ChebPanels(lambda x: sa * np.tanh(sa * np.asarray(x)), -b, 0.0)
    return MiuraProfile("positive_box", params, (
        Piece(-math.inf, -b, "rational", -b + 1.0 / rho),
        Piece(-b, 0.0, "smooth", panels=panels),
    ), {"m": m_closed, "R": r_closed})


def _constant_r(kappa: float) -> MiuraProfile:
    if not np.isfinite(kappa):
        raise ProfileError("constant_r needs a finite kappa")
    params = (("kappa", float(kappa)),)
    if kappa == 0:
        return _zero("constant_r", params)

    def m_closed(z):
        return kappa - np.sqrt(kappa**2 - np.asarray(z, dtype=complex))

    def r_closed(k):
        k = np.asarray(k, dtype=complex)
        m = m_closed(k**2)
        return (1j * k - m) / (1j * k + m)

    return MiuraProfile("constant_r", params, (Piece(-math.inf, 0.0, "constant", float(kappa)),),
                        {"m": m_closed, "R": r_closed})


def _rough_random(seed: int, L: int, amplitude: float = 1.0) -> MiuraProfile:
    if int(L) != L or L < 1 or amplitude < 0:
        raise ProfileError("rough_random needs an integer L >= 1 and amplitude >= 0")
    L = int(L)
    params = (("seed", int(seed)), ("L", L), ("amplitude", float(amplitude)))
    values = np.random.default_rng(int(seed)).uniform(-amplitude, amplitude, L)
    pieces = [Piece(-math.inf, float(-L), "constant", 0.0)]
    for j, v in enumerate(values):
        pieces.append(Piece(float(-L + j), float(-L + j + 1), "constant", float(v)))
    return MiuraProfile("rough_random", params, tuple(pieces))


_BUILDERS = {
    "zero": (lambda: _zero(), ()),
    "delta": (_delta, ("c",)),
    "smooth_bump": (_smooth_bump, ("a", "amplitude")),
    "positive_box": (_positive_box, ("b", "a")),
    "constant_r": (_constant_r, ("kappa",)),
    "rough_random": (_rough_random, ("seed", "L", "amplitude")),
}


def catalog(name: str, *args, **kwargs) -> MiuraProfile:
    """Build a named test profile.

    Examples
    --------
    >>> catalog("delta", c=1.0).closed_forms["R"](1j)
    (-0.3333333333333333+0j)
    """
    try:
        builder, names = _BUILDERS[name]
    except KeyError:
        raise ProfileError(f"unknown profile {name!r}; known: {', '.join(PROFILE_KINDS)}") from None
    if len(args) > len(names):
        raise ProfileError(f"{name} takes at most {len(names)} parameters")
    params = dict(zip(names, args))
    for k, v in kwargs.items():
        if k not in names:
            raise ProfileError(f"unknown parameter {k!r} for profile {name}")
        params[k] = v
    try:
        return builder(**params)
    except TypeError as exc:
        raise ProfileError(f"bad parameters for {name}: {exc}") from None


def profile_from_config(cfg: dict) -> MiuraProfile:
    """Inverse of :meth:`MiuraProfile.to_config`.

    Recognized keys are ``kind``, ``params``, ``seed`` and ``mollify``.
    """
    allowed = {"kind", "params", "seed", "mollify"}
    for key in cfg:
        if key not in allowed:
            raise ProfileError(f"unknown profile key {key!r}")
    if "kind" not in cfg:
        raise ProfileError("profile needs a 'kind'")
    params = dict(cfg.get("params") or {})
    if cfg.get("seed") is not None:
        params["seed"] = cfg["seed"]
    prof = catalog(cfg["kind"], **params)
    if cfg.get("mollify") is not None:
        prof = mollify(prof, int(cfg["mollify"]))
    return prof


# -- mollification --------------------------------------------------------

def mollify(profile: MiuraProfile, n: int) -> MiuraProfile:
    """Smooth compactly supported approximation of a profile.

    ``r`` is truncated to ``[-n, 0]`` and averaged against a C-infinity bump
    of width ``1/n`` supported on the right of each point,
    ``r_n(x) = int_0^{1/n} r(x + s) rho_n(s) ds``, which keeps ``r_n = 0`` on
    x >= 0 so the restricted-support condition survives.
    """
    if int(n) != n or n < 1:
        raise ProfileError("mollify needs an integer n >= 1")
    n = int(n)
    params = (("n", n),)
    cut = -float(n)
    width = 1.0 / n
    if profile.is_zero:
        return MiuraProfile("mollify", params, (Piece(-math.inf, 0.0, "constant", 0.0),),
                            {}, base=profile)
    breaks = sorted({cut, 0.0} | {p.right for p in profile.pieces if cut < p.right < 0.0})
    gl_u, gl_w = leggauss(96)

    def r_cut(x):
        x = np.asarray(x, dtype=float)
        inside = (x >= cut) & (x < 0.0)
        return np.where(inside, profile.r(np.clip(x, cut, 0.0)), 0.0)

    def rho(s):
        return _bump(2.0 * n * s - 1.0) / math.e * (2.0 * n / _BUMP_MASS)

    def rn(xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        out = np.zeros_like(xs)
        for i, x in enumerate(xs):
            cuts = [0.0] + [b - x for b in breaks if 0.0 < b - x < width] + [width]
            total = 0.0
            for s0, s1 in zip(cuts[:-1], cuts[1:]):
                s = 0.5 * (s1 - s0) * gl_u + 0.5 * (s0 + s1)
                # evaluate r at the open subinterval to stay on one side of jumps
                total += 0.5 * (s1 - s0) * np.dot(gl_w, r_cut(x + s) * rho(s))
            out[i] = total
        return out

    left = cut - width
    panels = ChebPanels(rn, left, 0.0)
    return MiuraProfile("mollify", params, (
        Piece(-math.inf, left, "constant", 0.0),
        Piece(left, 0.0, "smooth", panels=panels),
    ), {}, base=profile)
