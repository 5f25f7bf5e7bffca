"""Constitutive models: Johnson-Cook target plates, bilinear projectile steel.

Sign convention: sigma = -p*I + S with p positive in compression and S
deviatoric (tension positive).  All updates are vectorized over point
sets; a "point" is either an SPH particle or an FE integration point.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

_EYE3 = np.eye(3)


class MaterialError(ValueError):
    pass


@dataclass(frozen=True)
class JCCard:
    """Johnson-Cook flow/damage card with elastic and EOS constants."""

    name: str
    rho0: float            # kg/m^3
    E: float               # Pa
    nu: float
    G: float               # Pa
    A: float               # Pa
    B: float               # Pa
    a: float               # strain-hardening exponent
    C: float               # rate coefficient
    b: float               # thermal-softening exponent
    Cp: float              # J/(kg K)
    T_melt: float          # K
    T_room: float          # K
    D1: float = 0.0
    D2: float = 0.0
    D3: float = 0.0
    D4: float = 0.0
    D5: float = 0.0
    epsdot0: float = 1.0   # reference strain rate, 1/s
    # optional Mie-Gruneisen constants; linear bulk EOS used when absent
    eos_c0: float | None = None
    eos_s: float | None = None
    eos_gamma0: float | None = None

    def __post_init__(self):
        if min(self.rho0, self.E, self.G, self.A) <= 0.0:
            raise MaterialError(f"{self.name}: moduli and A must be positive")
        if self.T_melt <= self.T_room:
            raise MaterialError(f"{self.name}: T_melt must exceed T_room")
        g_iso = self.E / (2.0 * (1.0 + self.nu))
        if abs(self.G - g_iso) > 0.02 * g_iso:
            # published cards (e.g. Weldox 460E) list G about 5% off the
            # isotropic value; accept but flag
            warnings.warn(
                f"{self.name}: G={self.G:.3e} deviates "
                f"{abs(self.G - g_iso) / g_iso:.1%} from E/(2(1+nu))={g_iso:.3e}",
                stacklevel=2,
            )

    @property
    def bulk_modulus(self) -> float:
        return self.E / (3.0 * (1.0 - 2.0 * self.nu))

    @property
    def sound_speed(self) -> float:
        return float(np.sqrt(self.E / self.rho0))

    @property
    def has_damage(self) -> bool:
        return any((self.D1, self.D2, self.D3, self.D4, self.D5))


@dataclass(frozen=True)
class BilinearCard:
    """Elastic-plastic card with linear isotropic hardening."""

    name: str
    sigma_y: float         # Pa
    rho0: float            # kg/m^3
    E: float               # Pa
    nu: float
    Et: float              # tangent modulus, Pa
    fail_strain: float = 0.0

    def __post_init__(self):
        if self.sigma_y <= 0.0:
            raise MaterialError(f"{self.name}: sigma_y must be positive")
        if not 0.0 <= self.Et < self.E:
            raise MaterialError(f"{self.name}: need 0 <= Et < E")

    @property
    def G(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def bulk_modulus(self) -> float:
        return self.E / (3.0 * (1.0 - 2.0 * self.nu))

    @property
    def sound_speed(self) -> float:
        return float(np.sqrt(self.E / self.rho0))

    @property
    def hardening_modulus(self) -> float:
        """Plastic hardening slope H = E*Et/(E - Et)."""
        if self.Et == 0.0:
            return 0.0
        return self.E * self.Et / (self.E - self.Et)

    @property
    def has_damage(self) -> bool:
        return False


# bundled cards reproducing the published tables exactly; the Weldox G
# is knowingly ~5% off the isotropic value, so skip the advisory warning
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    BUILTIN_CARDS = {
        "weldox-460e": JCCard(
            name="weldox-460e", rho0=7850.0, E=210e9, nu=0.33, G=75e9,
            A=499e6, B=382e6, a=0.458, C=0.0079, b=0.893,
            Cp=452.0, T_melt=1800.0, T_room=293.0,
            D1=0.636, D2=1.936, D3=-2.969, D4=-0.014, D5=1.014,
        ),
        "aa5083-h116": JCCard(
            name="aa5083-h116", rho0=2700.0, E=70e9, nu=0.3, G=27e9,
            A=167e6, B=596e6, a=0.551, C=0.001, b=0.859,
            Cp=910.0, T_melt=893.0, T_room=293.0,
        ),
        "arne": BilinearCard(
            name="arne", sigma_y=1.9e9, rho0=7850.0, E=204e9, nu=0.33,
            Et=15e9, fail_strain=0.0215,
        ),
    }


def jc_flow_stress(card: JCCard, eps_p, epsdot_p, T):
    """Flow stress [A + B*eps^a][1 + C ln(rate)][1 - T*^b]."""
    eps_p = np.asarray(eps_p, dtype=float)
    if np.any(eps_p < 0.0):
        raise MaterialError("plastic strain must be nonnegative")
    rate = np.maximum(np.asarray(epsdot_p, dtype=float) / card.epsdot0, 1.0)
    tstar = np.clip(
        (np.asarray(T, dtype=float) - card.T_room) / (card.T_melt - card.T_room),
        0.0, 1.0,
    )
    hard = card.A + card.B * eps_p**card.a
    return hard * (1.0 + card.C * np.log(rate)) * (1.0 - tstar**card.b)


def jc_hardening_slope(card: JCCard, eps_p, epsdot_p, T):
    """d(sigma_y)/d(eps_p) with rate/temperature brackets frozen."""
    eps_p = np.maximum(np.asarray(eps_p, dtype=float), 1e-8)
    rate = np.maximum(np.asarray(epsdot_p, dtype=float) / card.epsdot0, 1.0)
    tstar = np.clip(
        (np.asarray(T, dtype=float) - card.T_room) / (card.T_melt - card.T_room),
        0.0, 1.0,
    )
    return (
        card.B * card.a * eps_p ** (card.a - 1.0)
        * (1.0 + card.C * np.log(rate))
        * (1.0 - tstar**card.b)
    )


def jc_fracture_strain(card: JCCard, triaxiality, epsdot_p, tstar):
    """Fracture strain from the five damage parameters, floored at 1e-6."""
    rate = np.maximum(np.asarray(epsdot_p, dtype=float) / card.epsdot0, 1.0)
    eps_f = (
        (card.D1 + card.D2 * np.exp(card.D3 * np.asarray(triaxiality, dtype=float)))
        * (1.0 + card.D4 * np.log(rate))
        * (1.0 + card.D5 * np.asarray(tstar, dtype=float))
    )
    return np.maximum(eps_f, 1e-6)


def accumulate_damage(D, deps_p, eps_f):
    """D += deps_p/eps_f, capped at 1.  Returns (D_new, failed).

    The failure comparison carries a 1e-12 tolerance so a sum of
    increments that reaches 1 in exact arithmetic also fails in floats.
    """
    deps_p = np.asarray(deps_p, dtype=float)
    if np.any(deps_p < 0.0):
        raise MaterialError("plastic strain increment must be nonnegative")
    D_new = np.asarray(D, dtype=float) + deps_p / eps_f
    failed = D_new >= 1.0 - 1e-12
    return np.minimum(np.where(failed, 1.0, D_new), 1.0), failed


def bilinear_flow_stress(card: BilinearCard, eps_p):
    eps_p = np.asarray(eps_p, dtype=float)
    if np.any(eps_p < 0.0):
        raise MaterialError("plastic strain must be nonnegative")
    return card.sigma_y + card.hardening_modulus * eps_p


def eos_pressure(card, rho, e, rho_ref=None, compression_floor: float = 0.5,
                 tension_cutoff: float = np.inf):
    """Pressure from density and specific internal energy.

    Uses the Gruneisen form when the card supplies (c0, s, gamma0),
    otherwise the linear bulk-modulus fallback p = K*(rho/rho_ref - 1).
    `tension_cutoff` caps tensile pressure at -tension_cutoff (a spall-type
    floor; infinite by default so tension is unlimited unless configured).
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0):
        raise MaterialError("density must be positive")
    ref = np.asarray(card.rho0 if rho_ref is None else rho_ref, dtype=float)
    mu = rho / ref - 1.0
    if np.any(mu < compression_floor - 1.0):
        worst = float(np.min(mu)) + 1.0
        raise MaterialError(
            f"density ratio {worst:.3f} below floor {compression_floor} "
            "(state blow-up)"
        )
    c0 = getattr(card, "eos_c0", None)
    if c0 is None:
        K = card.bulk_modulus
        p = K * mu
    else:
        s = card.eos_s
        g0 = card.eos_gamma0
        e = np.asarray(e, dtype=float)
        comp = ref * c0**2 * mu * (1.0 + (1.0 - 0.5 * g0) * mu) \
            / (1.0 - (s - 1.0) * mu) ** 2
        tens = ref * c0**2 * mu
        p = np.where(mu >= 0.0, comp, tens) + g0 * ref * e
    if np.isfinite(tension_cutoff):
        if tension_cutoff < 0.0:
            raise MaterialError("tension cutoff must be nonnegative")
        p = np.maximum(p, -tension_cutoff)
    return p


def update_temperature(T, card, sigma_eq, deps_p, rho, chi: float = 0.9):
    """Adiabatic heating dT = chi * sigma_eq * deps_p / (rho * Cp)."""
    deps_p = np.asarray(deps_p, dtype=float)
    if np.any(deps_p < 0.0):
        raise MaterialError("plastic strain increment must be nonnegative")
    cp = getattr(card, "Cp", None)
    if cp is None or chi == 0.0:
        return np.asarray(T, dtype=float) + 0.0 * deps_p
    return np.asarray(T, dtype=float) + chi * np.asarray(sigma_eq) * deps_p / (
        np.asarray(rho, dtype=float) * cp
    )


@dataclass
class StressStateArray:
    """Per-point stress state, structure-of-arrays."""

    S: np.ndarray          # (N,3,3) deviatoric stress, Pa
    p: np.ndarray          # (N,) pressure, positive in compression
    eps_p: np.ndarray      # (N,) equivalent plastic strain
    epsdot_p: np.ndarray   # (N,) plastic strain rate
    T: np.ndarray          # (N,) temperature, K
    D: np.ndarray          # (N,) damage
    failed: np.ndarray = field(default=None)  # (N,) bool

    def __post_init__(self):
        if self.failed is None:
            self.failed = np.zeros(len(self.p), dtype=bool)

    @classmethod
    def zeros(cls, n: int, T_room: float = 293.0) -> "StressStateArray":
        return cls(
            S=np.zeros((n, 3, 3)),
            p=np.zeros(n),
            eps_p=np.zeros(n),
            epsdot_p=np.zeros(n),
            T=np.full(n, T_room),
            D=np.zeros(n),
        )

    def full_stress(self) -> np.ndarray:
        """Cauchy stress sigma = -p*I + S, tension positive."""
        return self.S - self.p[:, None, None] * _EYE3

    def von_mises(self) -> np.ndarray:
        return np.sqrt(1.5 * np.einsum("nij,nij->n", self.S, self.S))


def _spin_rotation(W, dt):
    """Orthogonal increment exp(W*dt) via Rodrigues, vectorized."""
    w = np.stack([W[:, 2, 1], W[:, 0, 2], W[:, 1, 0]], axis=-1) * dt
    theta = np.linalg.norm(w, axis=-1)
    small = theta < 1e-12
    tsafe = np.where(small, 1.0, theta)
    k = w / tsafe[:, None]
    K = np.zeros_like(W)
    K[:, 2, 1], K[:, 1, 2] = k[:, 0], -k[:, 0]
    K[:, 0, 2], K[:, 2, 0] = k[:, 1], -k[:, 1]
    K[:, 1, 0], K[:, 0, 1] = k[:, 2], -k[:, 2]
    st = np.sin(theta)[:, None, None]
    ct = (1.0 - np.cos(theta))[:, None, None]
    R = _EYE3 + st * K + ct * (K @ K)
    R[small] = _EYE3 + W[small] * dt
    return R


def flow_stress(card, eps_p, epsdot_p, T):
    if isinstance(card, BilinearCard):
        return bilinear_flow_stress(card, eps_p)
    return jc_flow_stress(card, eps_p, epsdot_p, T)


def update_stress(
    state: StressStateArray,
    card,
    L: np.ndarray,
    dt: float,
    rho: np.ndarray,
    e=None,
    rho_ref=None,
    chi: float = 0.9,
    damage_active: bool = False,
    newton_tol: float = 1e-8,
    tension_cutoff: float = np.inf,
    ids=None,
) -> StressStateArray:
    """Objective elastic-plastic stress update for one explicit step.

    Splits L into stretching and spin, rotates S through the spin
    increment (Jaumann), adds the elastic deviatoric trial increment,
    and returns radially to the yield surface where the trial von Mises
    stress exceeds the flow stress.  Pressure comes from the EOS and
    temperature from adiabatic plastic heating.  Mutates `state` in
    place and returns it.
    """
    if dt <= 0.0:
        raise MaterialError("dt must be positive")
    L = np.asarray(L, dtype=float)
    if not np.all(np.isfinite(L)):
        bad = np.nonzero(~np.isfinite(L.reshape(len(L), -1)).all(axis=1))[0]
        label = bad[0] if ids is None else ids[bad[0]]
        raise MaterialError(f"non-finite velocity gradient at point {label}")

    eps_rate = 0.5 * (L + np.transpose(L, (0, 2, 1)))
    spin = 0.5 * (L - np.transpose(L, (0, 2, 1)))
    tr = np.trace(eps_rate, axis1=1, axis2=2)
    dev_rate = eps_rate - (tr / 3.0)[:, None, None] * _EYE3

    R = _spin_rotation(spin, dt)
    S = R @ state.S @ np.transpose(R, (0, 2, 1))
    S_tr = S + 2.0 * card.G * dev_rate * dt

    sig_tr = np.sqrt(1.5 * np.einsum("nij,nij->n", S_tr, S_tr))
    # Rate term from the total equivalent deviatoric strain rate.  Using
    # the per-step plastic increment over dt instead makes the yield
    # stress jump whenever a step lands elastic, so the update would not
    # converge under timestep refinement.
    rate_eq = np.sqrt((2.0 / 3.0) * np.einsum("nij,nij->n", dev_rate, dev_rate))
    sig_y = np.asarray(
        flow_stress(card, state.eps_p, rate_eq, state.T), dtype=float
    )
    # Coupled damage softening: the load-bearing yield stress degrades as
    # damage grows, which lets deformation localize into a band instead
    # of spreading plastic work over the whole plate.
    softening = damage_active and getattr(card, "has_damage", False)
    if softening:
        sig_y *= 1.0 - state.D
    plastic = (sig_tr > sig_y) & ~state.failed

    if np.any(plastic):
        G3 = 3.0 * card.G
        stp = sig_tr[plastic]
        ep0 = state.eps_p[plastic]
        rate0 = rate_eq[plastic]
        T0 = state.T[plastic]
        soft = (1.0 - state.D[plastic]) if softening else 1.0
        if isinstance(card, BilinearCard):
            d = (stp - bilinear_flow_stress(card, ep0)) / (G3 + card.hardening_modulus)
        else:
            # Newton on g(d) = sig_tr - 3G d - sigy(ep0 + d), brackets frozen
            d = (stp - soft * jc_flow_stress(card, ep0, rate0, T0)) / G3
            for _ in range(30):
                sy = soft * jc_flow_stress(card, ep0 + d, rate0, T0)
                g = stp - G3 * d - sy
                if np.all(np.abs(g) <= newton_tol * np.maximum(sy, card.A)):
                    break
                slope = G3 + soft * jc_hardening_slope(card, ep0 + d, rate0, T0)
                d = np.maximum(d + g / slope, 0.0)
        d = np.maximum(d, 0.0)
        sig_new = soft * flow_stress(card, ep0 + d, rate0, T0)
        scale = np.where(stp > 0.0, sig_new / np.maximum(stp, 1e-300), 1.0)
        S_tr[plastic] *= scale[:, None, None]
        state.eps_p[plastic] = ep0 + d
        state.T[plastic] = update_temperature(
            T0, card, sig_new, d, rho[plastic], chi=chi
        )
        if damage_active and card.has_damage:
            sig_eq = np.maximum(sig_new, 1e-6)
            triax = -state.p[plastic] / sig_eq
            tstar = np.clip(
                (T0 - card.T_room) / (card.T_melt - card.T_room), 0.0, 1.0
            )
            eps_f = jc_fracture_strain(card, triax, rate0, tstar)
            state.D[plastic], fail = accumulate_damage(state.D[plastic], d, eps_f)
            state.failed[plastic] |= fail

    state.epsdot_p = np.where(plastic, rate_eq, 0.0)
    state.S = S_tr
    state.p = np.asarray(
        eos_pressure(card, rho, 0.0 if e is None else e, rho_ref=rho_ref,
                     tension_cutoff=tension_cutoff),
        dtype=float,
    )
    if np.any(state.failed):
        # fully damaged material: no deviatoric strength, no tension
        state.S[state.failed] = 0.0
        state.p[state.failed] = np.maximum(state.p[state.failed], 0.0)
    return state
