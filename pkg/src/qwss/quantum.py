"""Stationary operator processes on a system-environment split.

The observed algebra consists of operators on a finite-dimensional system
space H; the process lives on H tensor K, where the environment K carries a
fixed density matrix rho. Conditioning onto the system is the partial
expectation E determined by

    tr_H[ T E[Z] ] = tr_HK[ (T tensor rho) Z ]   for all system operators T,

realized as E[Z] = tr_K[ (I tensor rho) Z ].

A model is a finite sum of harmonics

    X_t = sum_k exp(2*pi*i*nu_k*t) M_k tensor D_k

whose environment factors are centered (tr[rho D_k] = 0) and orthogonal
(tr[rho D_j^H D_k] = delta_jk s_k). Those two constraints make the process
mean-zero and wide-sense stationary with

    E[X_t^H X_{t+tau}] = sum_k exp(2*pi*i*nu_k*tau) s_k M_k^H M_k

independent of t; the matching spectral measure is purely atomic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatchError, NotPositiveSemidefiniteError
from .linalg import as_complex_matrix, hermitian_defect, hermitize, validate_psd
from .measure import OperatorSpectralMeasure

__all__ = [
    "Mode",
    "QuantumModel",
    "KolmogorovFactorization",
    "conditional_expectation",
    "partial_trace_environment",
    "orthogonalize_environment_ops",
    "process_operator",
    "model_covariance",
    "model_spectral_measure",
    "xhat_apply",
    "kolmogorov_decompose",
]

MODEL_TOL = 1e-12


def partial_trace_environment(z, dim_system: int, dim_environment: int) -> np.ndarray:
    """Partial trace over the environment factor of H tensor K."""
    dh, dk = int(dim_system), int(dim_environment)
    a = as_complex_matrix(z, name="operator")
    if a.shape != (dh * dk, dh * dk):
        raise DimensionMismatchError(
            f"operator shape {a.shape} does not match dims ({dh}*{dk})"
        )
    return np.einsum("acbc->ab", a.reshape(dh, dk, dh, dk))


def conditional_expectation(z, env_state, dim_system: int | None = None) -> np.ndarray:
    """Partial expectation onto the system algebra.

    ``E[Z] = tr_K[(I tensor rho) Z]``; the system dimension is inferred from
    the shapes unless given. Satisfies ``E[A tensor I] = A``, the module
    property ``E[(A tensor I) Z (B tensor I)] = A E[Z] B``, positivity, and
    the defining trace identity.
    """
    rho = validate_psd(env_state, name="environment state")
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > 1e-9:
        raise ValueError(f"environment state must have unit trace, got {tr}")
    a = as_complex_matrix(z, name="operator")
    dk = rho.shape[0]
    n = a.shape[0]
    dh = n // dk if dim_system is None else int(dim_system)
    if dh * dk != n:
        raise DimensionMismatchError(
            f"operator of size {n} does not factor as system*environment with "
            f"environment dim {dk}"
        )
    return np.einsum("ce,aebc->ab", rho, a.reshape(dh, dk, dh, dk))


@dataclass(frozen=True, eq=False)
class Mode:
    """One harmonic: frequency, system factor, environment factor."""

    nu: float
    system_op: np.ndarray
    environment_op: np.ndarray

    def __post_init__(self):
        m = as_complex_matrix(self.system_op, name="system_op").copy()
        d = as_complex_matrix(self.environment_op, name="environment_op").copy()
        m.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(self, "system_op", m)
        object.__setattr__(self, "environment_op", d)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Mode)
            and self.nu == other.nu
            and np.array_equal(self.system_op, other.system_op)
            and np.array_equal(self.environment_op, other.environment_op)
        )


@dataclass(frozen=True, eq=False)
class QuantumModel:
    """Finite-harmonic stationary process with validated mode structure.

    The constructor enforces: ``env_state`` is a density matrix; mode
    frequencies are pairwise distinct; every environment factor is centered
    and the factors are mutually orthogonal in the ``tr[rho . ]`` inner
    product. Use ``orthogonalize_environment_ops`` to massage raw operators
    into an admissible family first.
    """

    dim_system: int
    dim_environment: int
    env_state: np.ndarray
    modes: tuple[Mode, ...]

    def __post_init__(self):
        dh, dk = int(self.dim_system), int(self.dim_environment)
        if dh < 1 or dk < 1:
            raise ValueError("dimensions must be >= 1")
        rho = validate_psd(self.env_state, name="environment state")
        if rho.shape != (dk, dk):
            raise DimensionMismatchError(
                f"environment state shape {rho.shape} != ({dk}, {dk})"
            )
        tr = float(np.trace(rho).real)
        if abs(tr - 1.0) > 1e-9:
            raise ValueError(f"environment state must have unit trace, got {tr}")
        modes = tuple(self.modes)
        nus = [m.nu for m in modes]
        if len(set(nus)) != len(nus):
            raise ValueError("mode frequencies must be pairwise distinct")
        for i, m in enumerate(modes):
            if m.system_op.shape != (dh, dh):
                raise DimensionMismatchError(
                    f"mode {i} system_op shape {m.system_op.shape} != ({dh}, {dh})"
                )
            if m.environment_op.shape != (dk, dk):
                raise DimensionMismatchError(
                    f"mode {i} environment_op shape {m.environment_op.shape} != ({dk}, {dk})"
                )
            mean = complex(np.trace(rho @ m.environment_op))
            if abs(mean) > MODEL_TOL * max(1.0, float(np.abs(m.environment_op).max())):
                raise ValueError(
                    f"mode {i} environment factor is not centered: tr[rho D] = {mean:.3e}"
                )
        weights = []
        for i, mi in enumerate(modes):
            for j, mj in enumerate(modes):
                g = complex(
                    np.trace(rho @ mi.environment_op.conj().T @ mj.environment_op)
                )
                scale = max(
                    1.0,
                    float(np.abs(mi.environment_op).max())
                    * float(np.abs(mj.environment_op).max()),
                )
                if i == j:
                    if abs(g.imag) > MODEL_TOL * scale or g.real < -MODEL_TOL * scale:
                        raise ValueError(
                            f"mode {i} has invalid second moment tr[rho D^H D] = {g:.3e}"
                        )
                    weights.append(max(g.real, 0.0))
                elif abs(g) > MODEL_TOL * scale:
                    raise ValueError(
                        f"modes {i} and {j} are not orthogonal under rho: "
                        f"tr[rho Di^H Dj] = {g:.3e}"
                    )
        rho = rho.copy()
        rho.setflags(write=False)
        object.__setattr__(self, "dim_system", dh)
        object.__setattr__(self, "dim_environment", dk)
        object.__setattr__(self, "env_state", rho)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "_weights", tuple(weights))

    @property
    def mode_weights(self) -> tuple[float, ...]:
        """``s_k = tr[rho D_k^H D_k]`` per mode."""
        return self._weights

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, QuantumModel)
            and self.dim_system == other.dim_system
            and self.dim_environment == other.dim_environment
            and np.array_equal(self.env_state, other.env_state)
            and self.modes == other.modes
        )


def orthogonalize_environment_ops(
    env_state, ops: Sequence, tol: float = 1e-12
) -> list[np.ndarray]:
    """Center and Gram-Schmidt raw environment operators under ``tr[rho . ]``.

    Each operator first loses its mean (``D - tr[rho D] I``), then the family
    is orthogonalized (not normalized: the residual norms become the mode
    weights). Raises if an operator is linearly dependent on its predecessors
    after centering.
    """
    rho = validate_psd(env_state, name="environment state")
    dk = rho.shape[0]
    out: list[np.ndarray] = []
    for i, op in enumerate(ops):
        d = as_complex_matrix(op, name=f"operator {i}")
        if d.shape != (dk, dk):
            raise DimensionMismatchError(
                f"operator {i} shape {d.shape} != ({dk}, {dk})"
            )
        d = d - complex(np.trace(rho @ d)) * np.eye(dk)
        for prev in out:
            norm2 = complex(np.trace(rho @ prev.conj().T @ prev)).real
            overlap = complex(np.trace(rho @ prev.conj().T @ d))
            d = d - (overlap / norm2) * prev
        norm2 = complex(np.trace(rho @ d.conj().T @ d)).real
        if norm2 <= tol * max(1.0, float(np.abs(d).max()) ** 2):
            raise ValueError(
                f"operator {i} is linearly dependent (within the state metric) "
                "on its predecessors after centering"
            )
        out.append(d)
    return out


def xhat_apply(model: QuantumModel, f: Callable[[float], complex]) -> np.ndarray:
    """Spectral functional calculus: ``sum_k f(nu_k) M_k tensor D_k``."""
    n = model.dim_system * model.dim_environment
    out = np.zeros((n, n), dtype=np.complex128)
    for m in model.modes:
        out += complex(f(m.nu)) * np.kron(m.system_op, m.environment_op)
    return out


def process_operator(model: QuantumModel, t: float) -> np.ndarray:
    """``X_t`` as a dense matrix on the joint space."""
    t = float(t)
    return xhat_apply(model, lambda nu: np.exp(2j * np.pi * nu * t))


def model_covariance(model: QuantumModel, tau: float) -> np.ndarray:
    """``E[X_t^H X_{t+tau}]``, independent of ``t`` by construction."""
    tau = float(tau)
    dh = model.dim_system
    out = np.zeros((dh, dh), dtype=np.complex128)
    for m, s in zip(model.modes, model.mode_weights):
        out += (
            np.exp(2j * np.pi * m.nu * tau)
            * s
            * (m.system_op.conj().T @ m.system_op)
        )
    return out


def model_spectral_measure(model: QuantumModel) -> OperatorSpectralMeasure:
    """Purely atomic measure with one atom ``s_k M_k^H M_k`` per mode."""
    atoms = [
        (m.nu, hermitize(s * (m.system_op.conj().T @ m.system_op)))
        for m, s in zip(model.modes, model.mode_weights)
    ]
    atoms.sort(key=lambda pair: pair[0])
    return OperatorSpectralMeasure(dim=model.dim_system, atoms=tuple(atoms))


@dataclass(frozen=True, eq=False)
class KolmogorovFactorization:
    """Minimal factorization ``K[i,j] = V_i^H V_j`` of a PSD block kernel.

    ``factors[i]`` is the ``rank x d`` block ``V_i``; ``rank`` is the
    numerical rank of the stacked Gram matrix.
    """

    rank: int
    factors: np.ndarray  # (n, rank, d)

    def __post_init__(self):
        f = np.ascontiguousarray(self.factors, dtype=np.complex128).copy()
        if f.ndim != 3 or f.shape[1] != int(self.rank):
            raise DimensionMismatchError(
                f"factors must have shape (n, rank, d), got {f.shape}"
            )
        f.setflags(write=False)
        object.__setattr__(self, "rank", int(self.rank))
        object.__setattr__(self, "factors", f)

    @property
    def points(self) -> int:
        return self.factors.shape[0]

    @property
    def dim(self) -> int:
        return self.factors.shape[2]

    def block(self, i: int, j: int) -> np.ndarray:
        """Reconstructed kernel block ``V_i^H V_j``."""
        return self.factors[i].conj().T @ self.factors[j]

    def reconstruction(self) -> np.ndarray:
        """All reconstructed blocks, shape (n, n, d, d)."""
        n, _, d = self.factors.shape
        out = np.empty((n, n, d, d), dtype=np.complex128)
        for i in range(n):
            for j in range(n):
                out[i, j] = self.block(i, j)
        return out


def kolmogorov_decompose(blocks, tol: float = 1e-9) -> KolmogorovFactorization:
    """Factor an ``n x n`` family of ``d x d`` blocks as ``K[i,j] = V_i^H V_j``.

    The stacked ``nd x nd`` block matrix must be Hermitian PSD at tolerance
    ``tol`` (witness eigenvalue reported otherwise). Eigenvalues above
    ``tol * lambda_max`` are kept, so the rank is minimal at that threshold
    and the factorization is unique up to a unitary on the rank space.
    """
    k = np.ascontiguousarray(blocks, dtype=np.complex128)
    if k.ndim != 4 or k.shape[0] != k.shape[1] or k.shape[2] != k.shape[3]:
        raise DimensionMismatchError(
            f"blocks must have shape (n, n, d, d), got {k.shape}"
        )
    n, _, d, _ = k.shape
    gram = k.transpose(0, 2, 1, 3).reshape(n * d, n * d)
    scale = max(1.0, float(np.abs(gram).max()))
    if hermitian_defect(gram) > tol * scale:
        raise NotPositiveSemidefiniteError(
            "block kernel is not Hermitian-symmetric: K[j,i] != K[i,j]^H"
        )
    w, u = np.linalg.eigh(hermitize(gram))
    lo = float(w.min())
    if lo < -tol * scale:
        raise NotPositiveSemidefiniteError(
            f"block kernel is not PSD: min eigenvalue = {lo:.6e}", witness=lo
        )
    wmax = float(w.max(initial=0.0))
    keep = np.where(w > tol * max(wmax, 0.0))[0][::-1]  # descending
    v = np.sqrt(w[keep])[:, None] * u[:, keep].conj().T  # (rank, n*d)
    factors = v.reshape(len(keep), n, d).transpose(1, 0, 2)
    return KolmogorovFactorization(rank=len(keep), factors=factors)
