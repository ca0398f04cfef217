"""
Uniform linear array processing: steering vectors, Capon AoA spectra,
the FDD uplink-to-downlink steering transform and beam rotation.

Phase convention: element k of a steering vector at angle theta carries
exp(-j 2 pi spacing (f_link / F_0) k sin(theta)), spacing in wavelengths of
the reference frequency F_0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

Link = Literal["UL", "DL"]


class SingularCovarianceError(np.linalg.LinAlgError):
    pass


class RankDeficientError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class ArrayConfig:
    m: int = 4
    spacing: float = 0.5
    f_ul: float = 1747.5e6
    f_dl: float = 1842.5e6
    f_0: float = 1842.5e6

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("a ULA needs at least 2 elements")
        if self.spacing <= 0:
            raise ValueError("element spacing must be positive")
        if self.f_ul <= 0 or self.f_dl <= 0 or self.f_0 <= 0:
            raise ValueError("carrier frequencies must be positive")

    def freq(self, link: Link) -> float:
        if link == "UL":
            return self.f_ul
        if link == "DL":
            return self.f_dl
        raise ValueError(f"unknown link {link!r}")


def _phase_step(theta_deg, cfg: ArrayConfig, f_ratio: float):
    return 2.0 * math.pi * cfg.spacing * f_ratio * np.sin(np.deg2rad(theta_deg))


def steering_vector(theta_deg: float, cfg: ArrayConfig, link: Link = "DL") -> np.ndarray:
    k = np.arange(cfg.m)
    return np.exp(-1j * _phase_step(theta_deg, cfg, cfg.freq(link) / cfg.f_0) * k)


def steering_matrix(thetas_deg, cfg: ArrayConfig, link: Link = "DL") -> np.ndarray:
    """Steering vectors as columns, shape (M, len(thetas))."""
    thetas = np.atleast_1d(np.asarray(thetas_deg, dtype=float))
    k = np.arange(cfg.m)[:, None]
    return np.exp(-1j * k * _phase_step(thetas, cfg, cfg.freq(link) / cfg.f_0)[None, :])


@dataclass(frozen=True)
class SnapshotSet:
    x: np.ndarray  # (M, N)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=complex)
        if x.ndim != 2 or x.shape[1] < 1:
            raise ValueError("snapshots must be an (M, N) array with N >= 1")
        object.__setattr__(self, "x", x)

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def covariance(self) -> np.ndarray:
        r = self.x @ self.x.conj().T / self.n
        return 0.5 * (r + r.conj().T)


@dataclass(frozen=True)
class SpatialSpectrum:
    angles_deg: np.ndarray
    power: np.ndarray
    argmax_deg: float


def angle_grid(step_deg: float = 0.5, limit_deg: float = 90.0) -> np.ndarray:
    n = int(round(2 * limit_deg / step_deg))
    return np.linspace(-limit_deg, limit_deg, n + 1)


def peak_angle(angles: np.ndarray, power: np.ndarray) -> float:
    """Grid argmax; exact ties go to the smallest |angle|, then the negative side."""
    best = np.flatnonzero(power == power.max())
    order = sorted(best, key=lambda i: (abs(angles[i]), angles[i]))
    return float(angles[order[0]])


def default_loading(r: np.ndarray) -> float:
    return 1e-6 * float(np.real(np.trace(r))) / r.shape[0]


def capon_spectrum(r: np.ndarray, cfg: ArrayConfig, step_deg: float = 0.5,
                   loading: float | None = None, link: Link = "UL") -> SpatialSpectrum:
    m = r.shape[0]
    if loading is None:
        loading = default_loading(r)
    rl = r + loading * np.eye(m)
    if not np.all(np.isfinite(rl)) or np.linalg.cond(rl) > 1e12:
        raise SingularCovarianceError("covariance not invertible even with diagonal loading")
    angles = angle_grid(step_deg)
    a = steering_matrix(angles, cfg, link)
    try:
        ria = np.linalg.solve(rl, a)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError(str(exc)) from exc
    denom = np.real(np.einsum("ij,ij->j", a.conj(), ria))
    power = 1.0 / denom
    return SpatialSpectrum(angles, power, peak_angle(angles, power))


def capon_estimate(snapshots: SnapshotSet, cfg: ArrayConfig, step_deg: float = 0.5,
                   loading: float | None = None) -> SpatialSpectrum:
    """Capon (MVDR) spectrum 1 / (a^H (R + loading I)^-1 a) over a uniform grid."""
    return capon_spectrum(snapshots.covariance, cfg, step_deg, loading, link="UL")


def fdd_transform_diag(theta_deg: float, cfg: ArrayConfig) -> np.ndarray:
    """Diagonal T(theta) with a_DL(theta) = T(theta) a_UL(theta)."""
    k = np.arange(cfg.m)
    step = _phase_step(theta_deg, cfg, (cfg.f_ul - cfg.f_dl) / cfg.f_0)
    return np.diag(np.exp(1j * step * k))


def estimate_phi(a_dl: np.ndarray, a_ul: np.ndarray, max_cond: float = 1e12) -> np.ndarray:
    """Least-squares linear map taking UL signatures onto DL ones.

    Phi = A_dl A_ul^H (A_ul A_ul^H)^-1, minimising ||Phi A_ul - A_dl||_F.
    """
    a_dl = np.asarray(a_dl, dtype=complex)
    a_ul = np.asarray(a_ul, dtype=complex)
    gram = a_ul @ a_ul.conj().T
    if np.linalg.cond(gram) > max_cond:
        raise RankDeficientError("A_ul A_ul^H is singular; A_ul lacks full row rank")
    cross = a_dl @ a_ul.conj().T
    # gram is Hermitian, so Phi^H = gram^-1 cross^H
    return np.linalg.solve(gram, cross.conj().T).conj().T


def calibrate_phi(cfg: ArrayConfig, angles_deg=None, phase_bits: int | None = None) -> np.ndarray:
    """Phi fitted on UL/DL signature pairs at calibration angles.

    ``phase_bits`` quantizes the DL signatures' phases, mimicking codebook
    feedback of the downlink channel.
    """
    if angles_deg is None:
        angles_deg = np.linspace(-60.0, 60.0, 4 * cfg.m + 1)
    a_ul = steering_matrix(angles_deg, cfg, "UL")
    a_dl = steering_matrix(angles_deg, cfg, "DL")
    if phase_bits:
        q = 2.0 * math.pi / 2 ** phase_bits
        a_dl = np.exp(1j * np.round(np.angle(a_dl) / q) * q)
    return estimate_phi(a_dl, a_ul)


def ul_to_dl_angle(aoa_deg: float, cfg: ArrayConfig, phi: np.ndarray | None = None,
                   step_deg: float = 0.5) -> float:
    """DL departure angle for a UL arrival angle.

    Without ``phi`` this is the small-gap identity. With ``phi`` the UL
    signature is mapped into the DL domain and matched against the DL grid.
    """
    if phi is None:
        return float(aoa_deg)
    sig = phi @ steering_vector(aoa_deg, cfg, "UL")
    angles = angle_grid(step_deg)
    match = np.abs(steering_matrix(angles, cfg, "DL").conj().T @ sig)
    return peak_angle(angles, np.round(match, 12))


@dataclass(frozen=True)
class RotatedBeam:
    vector: np.ndarray
    angle_deg: float
    clamped: bool


def rotate_beam(phi_dl_deg: float, epsilon_deg: float, cfg: ArrayConfig, sign: int = 1,
                limit_deg: float = 60.0) -> RotatedBeam:
    """DL steering vector pointed at phi_dl + sign * epsilon, clamped to the sector edge."""
    if sign not in (-1, 1):
        raise ValueError("sign must be +1 or -1")
    target = phi_dl_deg + sign * epsilon_deg
    clamped = abs(target) > limit_deg
    if clamped:
        target = math.copysign(limit_deg, target)
    return RotatedBeam(steering_vector(target, cfg, "DL"), float(target), clamped)
