"""Spectral measures, the Bochner pair, kernel checks, and measure addition."""

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import frob, random_psd, rel_frob, rng_for
from qwss.errors import (
    DimensionMismatchError,
    NotPositiveSemidefiniteError,
    OffGridLagError,
)
from qwss.linalg import is_psd
from qwss.measure import (
    CovarianceTable,
    DensityGrid,
    OperatorSpectralMeasure,
    add_scaled,
    check_psd_kernel,
    covariance_from_spectrum,
    cumulative,
    integrate_pair,
    spectrum_from_covariance,
    total_mass,
)

B2 = np.array([[2.0, 1.0j], [-1.0j, 1.0]])  # PSD: eigenvalues (3 +- sqrt5)/2 > 0


def atom_measure(*pairs, dim=2):
    return OperatorSpectralMeasure(
        dim=dim, atoms=tuple((nu, w) for nu, w in pairs)
    )


def flat_measure(s, band, bins):
    s = np.asarray(s, dtype=complex)
    vals = np.broadcast_to(s, (bins, *s.shape)).copy()
    return OperatorSpectralMeasure(
        dim=s.shape[0], atoms=(), density=DensityGrid(-band, band, vals)
    )


class TestDensityGrid:
    def test_geometry(self):
        den = DensityGrid(-1.0, 1.0, np.ones((4, 1, 1), dtype=complex))
        assert den.width == pytest.approx(0.5)
        assert np.allclose(den.edges(), [-1.0, -0.5, 0.0, 0.5, 1.0])
        assert np.allclose(den.midpoints(), [-0.75, -0.25, 0.25, 0.75])

    def test_bin_index_closed_right_edge(self):
        den = DensityGrid(-1.0, 1.0, np.ones((4, 1, 1), dtype=complex))
        assert den.bin_index(-1.0) == 0
        assert den.bin_index(-0.5) == 1
        assert den.bin_index(1.0) == 3  # right endpoint belongs to the last bin
        assert den.bin_index(1.0001) is None
        assert den.bin_index(-1.0001) is None

    def test_rejects_non_psd_bin(self):
        vals = np.ones((2, 1, 1), dtype=complex)
        vals[1, 0, 0] = -0.5
        with pytest.raises(NotPositiveSemidefiniteError):
            DensityGrid(0.0, 1.0, vals)

    def test_rejects_empty_or_backwards(self):
        with pytest.raises(ValueError):
            DensityGrid(1.0, 0.0, np.ones((1, 1, 1), dtype=complex))


class TestMeasureConstruction:
    def test_atoms_sorted(self):
        mu = atom_measure((0.7, B2), (-0.2, 2 * B2))
        assert [nu for nu, _ in mu.atoms] == [-0.2, 0.7]

    def test_duplicate_frequency_rejected(self):
        with pytest.raises(ValueError):
            atom_measure((0.1, B2), (0.1, B2))

    def test_non_psd_atom_rejected(self):
        with pytest.raises(NotPositiveSemidefiniteError):
            atom_measure((0.0, np.array([[1.0, 2.0], [2.0, 1.0]])))

    def test_empty(self):
        mu = OperatorSpectralMeasure.empty(3)
        assert mu.dim == 3 and mu.atoms == () and mu.density is None
        assert mu.support_bounds() is None
        assert np.array_equal(total_mass(mu), np.zeros((3, 3)))

    def test_support_bounds(self):
        mu = OperatorSpectralMeasure(
            dim=1,
            atoms=((2.0, np.eye(1, dtype=complex)),),
            density=DensityGrid(-1.0, 0.5, np.ones((2, 1, 1), dtype=complex)),
        )
        assert mu.support_bounds() == (-1.0, 2.0)

    def test_atoms_are_write_locked(self):
        mu = atom_measure((0.0, B2))
        with pytest.raises(ValueError):
            mu.atoms[0][1][0, 0] = 9.0


class TestCovarianceTable:
    def test_negative_lag_is_adjoint(self):
        vals = np.stack([B2, B2 @ B2])
        t = CovarianceTable(dt=0.5, values=vals)
        assert np.array_equal(t.at_index(-1), t.at_index(1).conj().T)

    def test_off_range_lag_raises(self):
        t = CovarianceTable(dt=0.5, values=B2[None])
        with pytest.raises(OffGridLagError):
            t.at_index(1)

    def test_rejects_non_psd_zero_lag(self):
        with pytest.raises(NotPositiveSemidefiniteError):
            CovarianceTable(dt=1.0, values=np.array([[[1.0, 2.0], [2.0, 1.0]]]))

    def test_lags_grid(self):
        t = CovarianceTable(dt=0.25, values=np.stack([B2, B2, B2]))
        assert np.allclose(t.lags(), [0.0, 0.25, 0.5])


class TestCumulative:
    def test_right_continuous_at_atom(self):
        mu = atom_measure((0.3, B2))
        assert np.allclose(cumulative(mu, 0.3), B2)
        assert np.allclose(cumulative(mu, 0.3 - 1e-9), 0.0)

    def test_reaches_total_mass(self):
        mu = OperatorSpectralMeasure(
            dim=2,
            atoms=((0.1, B2),),
            density=DensityGrid(-1.0, 1.0, np.broadcast_to(B2, (8, 2, 2)).copy()),
        )
        assert np.allclose(cumulative(mu, 10.0), total_mass(mu), atol=1e-12)

    def test_partial_bin_linear(self):
        mu = flat_measure(np.eye(1), band=1.0, bins=4)
        # mass of (-inf, 0.25] over a flat unit density on [-1, 1]
        assert cumulative(mu, 0.25)[0, 0] == pytest.approx(1.25)

    @settings(deadline=None, max_examples=20)
    @given(st.integers(0, 10**6))
    def test_increments_are_psd(self, seed):
        rng = rng_for(seed)
        mu = OperatorSpectralMeasure(
            dim=2,
            atoms=((float(rng.uniform(-1, 1)), random_psd(rng, 2)),),
            density=DensityGrid(
                -1.0, 1.0, np.stack([random_psd(rng, 2) for _ in range(3)])
            ),
        )
        a, b = sorted(rng.uniform(-1.5, 1.5, size=2))
        inc = cumulative(mu, b) - cumulative(mu, a)
        assert is_psd(inc, tol=1e-9)


class TestIntegratePair:
    def test_constants_give_total_mass(self):
        mu = flat_measure(B2, band=0.5, bins=3)
        got = integrate_pair(mu, lambda nu: 1.0, lambda nu: 1.0)
        assert np.allclose(got, total_mass(mu), atol=1e-12)

    def test_single_atom_phases(self):
        mu = atom_measure((0.25, B2))
        f = lambda nu: np.exp(2j * np.pi * nu)
        g = lambda nu: 2.0
        got = integrate_pair(mu, f, g)
        want = np.conj(f(0.25)) * 2.0 * B2
        assert np.allclose(got, want, atol=1e-14)

    def test_same_function_gives_psd(self):
        mu = OperatorSpectralMeasure(
            dim=2,
            atoms=((-0.3, B2), (0.4, 2 * B2)),
            density=DensityGrid(-1.0, 1.0, np.broadcast_to(B2, (4, 2, 2)).copy()),
        )
        got = integrate_pair(mu, np.cos, np.cos)
        assert is_psd(got)


class TestBochnerTransform:
    def test_zero_lag_is_total_mass(self):
        mu = OperatorSpectralMeasure(
            dim=2,
            atoms=((0.35, B2),),
            density=DensityGrid(-2.0, 2.0, np.broadcast_to(B2, (16, 2, 2)).copy()),
        )
        table = covariance_from_spectrum(mu, dt=0.1, lags=5)
        assert np.allclose(table.values[0], total_mass(mu), atol=1e-13)

    def test_atom_gives_phasor(self):
        mu = atom_measure((0.3, B2))
        table = covariance_from_spectrum(mu, dt=0.25, lags=8)
        taus = table.lags()
        want = np.exp(2j * np.pi * 0.3 * taus)[:, None, None] * B2
        assert frob(table.values - want) < 1e-13

    def test_flat_band_closed_form(self):
        # flat density S on [-W, W]: C(tau) = S * sin(2 pi W tau) / (pi tau)
        w = 0.8
        mu = flat_measure(B2, band=w, bins=1)
        table = covariance_from_spectrum(mu, dt=0.3, lags=12)
        for m, tau in enumerate(table.lags()):
            scale = 2 * w if m == 0 else np.sin(2 * np.pi * w * tau) / (np.pi * tau)
            assert frob(table.values[m] - scale * B2) < 1e-12

    def test_binning_flat_density_is_exact(self):
        # splitting a flat band into bins must not change the transform
        a = covariance_from_spectrum(flat_measure(B2, 0.7, 1), dt=0.2, lags=9)
        b = covariance_from_spectrum(flat_measure(B2, 0.7, 64), dt=0.2, lags=9)
        assert frob(a.values - b.values) < 1e-12

    def test_quadrature_oracle(self):
        rng = rng_for(11)
        den_vals = np.stack([random_psd(rng, 2), random_psd(rng, 2)])
        mu = OperatorSpectralMeasure(
            dim=2,
            atoms=((-0.4, random_psd(rng, 2)), (0.15, random_psd(rng, 2))),
            density=DensityGrid(-0.6, 0.2, den_vals),
        )
        table = covariance_from_spectrum(mu, dt=0.45, lags=3)
        den = mu.density
        for m, tau in enumerate(table.lags()):
            want = np.zeros((2, 2), dtype=complex)
            for nu_k, wgt in mu.atoms:
                want += np.exp(2j * np.pi * nu_k * tau) * wgt
            for b in range(den.bins):
                lo = den.nu_min + b * den.width
                hi = lo + den.width
                re, _ = scipy.integrate.quad(
                    lambda nu: np.cos(2 * np.pi * tau * nu), lo, hi
                )
                im, _ = scipy.integrate.quad(
                    lambda nu: np.sin(2 * np.pi * tau * nu), lo, hi
                )
                want += (re + 1j * im) * den.values[b]
            assert frob(table.values[m] - want) < 1e-10


class TestSpectrumFromCovariance:
    def test_total_mass_matches_zero_lag(self):
        rng = rng_for(21)
        vals = np.stack([random_psd(rng, 2)] + [random_psd(rng, 2) * 0.1 for _ in range(5)])
        table = CovarianceTable(dt=0.5, values=vals)
        mu = spectrum_from_covariance(table, bins=16)
        assert frob(total_mass(mu) - table.values[0]) < 1e-10 * frob(table.values[0])

    def test_constant_table_concentrates_at_zero(self):
        # C(tau) = B for all lags is the line nu = 0; with bins == lags the
        # Fejer kernel zeros land on the grid and the mass sits in one cell
        m = 7
        table = CovarianceTable(dt=0.5, values=np.broadcast_to(B2, (m + 1, 2, 2)).copy())
        mu = spectrum_from_covariance(table, bins=m + 1)
        den = mu.density
        mass = total_mass(mu)
        cell = den.bin_index(0.0)
        cell_mass = den.values[cell] * den.width
        assert frob(cell_mass - mass) < 1e-12 * frob(mass)
        assert frob(mass - B2) < 1e-12 * frob(B2)

    def test_on_grid_phasor_concentrates(self):
        m, bins, dt = 31, 32, 0.5
        nu0 = 3.0 / (bins * dt)  # exactly on the output grid
        taus = np.arange(m + 1) * dt
        vals = np.exp(2j * np.pi * nu0 * taus)[:, None, None] * B2
        table = CovarianceTable(dt=dt, values=vals)
        mu = spectrum_from_covariance(table, bins=bins)
        den = mu.density
        cell = den.bin_index(nu0)
        ratio = frob(den.values[cell] * den.width) / frob(total_mass(mu))
        assert ratio > 0.98

    def test_bins_must_cover_lags(self):
        table = CovarianceTable(dt=0.5, values=np.broadcast_to(B2, (8, 2, 2)).copy())
        with pytest.raises(ValueError):
            spectrum_from_covariance(table, bins=4)

    def test_needs_two_lags(self):
        table = CovarianceTable(dt=0.5, values=B2[None])
        with pytest.raises(ValueError):
            spectrum_from_covariance(table, bins=8)

    def test_output_is_psd_per_bin(self):
        rng = rng_for(23)
        vals = np.stack([random_psd(rng, 2)] + [0.2 * random_psd(rng, 2) for _ in range(7)])
        mu = spectrum_from_covariance(CovarianceTable(dt=1.0, values=vals), bins=16)
        assert all(is_psd(v) for v in mu.density.values)

    def test_round_trip_mass(self):
        # measure -> covariance -> spectrum keeps C(0) and lands nearby mass
        mu = flat_measure(B2, band=0.5, bins=4)
        table = covariance_from_spectrum(mu, dt=0.25, lags=256)
        back = spectrum_from_covariance(table, bins=512)
        assert rel_frob(total_mass(back), total_mass(mu)) < 0.02


class TestCheckPsdKernel:
    def test_passes_on_genuine_covariance(self):
        mu = OperatorSpectralMeasure(
            dim=2,
            atoms=((0.12, B2),),
            density=DensityGrid(-1.0, 1.0, np.broadcast_to(B2, (8, 2, 2)).copy()),
        )
        table = covariance_from_spectrum(mu, dt=0.25, lags=16)
        verdict = check_psd_kernel(table, times=[0.25 * k for k in range(10)])
        assert verdict.passed
        assert verdict.points == 10 and verdict.dim == 2
        assert verdict.witness > -1e-12

    def test_counterexample_witness(self):
        # C(0)=1, C(dt)=2 cannot be a covariance: Gram [[1,2],[2,1]] has -1
        table = CovarianceTable(dt=1.0, values=np.array([[[1.0]], [[2.0]]]))
        verdict = check_psd_kernel(table, times=[0.0, 1.0])
        assert not verdict.passed
        assert verdict.witness == pytest.approx(-1.0, abs=1e-9)

    def test_off_grid_time_raises(self):
        table = CovarianceTable(dt=1.0, values=np.array([[[1.0]], [[0.5]]]))
        with pytest.raises(OffGridLagError):
            check_psd_kernel(table, times=[0.0, 0.5])

    def test_callable_kernel(self):
        verdict = check_psd_kernel(
            lambda tau: np.array([[np.exp(-abs(tau))]]),
            times=[0.0, 0.3, 1.1, 2.4],
        )
        assert verdict.passed

    def test_hermitian_inconsistency_raises(self):
        # callable with C(-tau) != C(tau)^H is not a stationary kernel
        with pytest.raises(NotPositiveSemidefiniteError):
            check_psd_kernel(
                lambda tau: np.array([[1.0 + (0.5 if tau > 0 else 0.0)]]),
                times=[0.0, 1.0],
            )


class TestAddScaled:
    def test_merges_equal_frequencies(self):
        # weights scale by squared modulus: |2|^2 * B + |1|^2 * 3B = 7B
        mu1 = atom_measure((0.1, B2))
        mu2 = atom_measure((0.1, 3 * B2))
        out = add_scaled(2.0, mu1, 1.0, mu2)
        assert len(out.atoms) == 1
        assert np.allclose(out.atoms[0][1], 7 * B2, atol=1e-12)

    def test_keeps_distinct_frequencies(self):
        out = add_scaled(1.0, atom_measure((0.1, B2)), 1.0, atom_measure((0.2, B2)))
        assert [nu for nu, _ in out.atoms] == [0.1, 0.2]

    def test_beta_zero_keeps_first_measure(self):
        mu = OperatorSpectralMeasure(
            dim=2,
            atoms=((0.3, B2),),
            density=DensityGrid(-1.0, 1.0, np.broadcast_to(B2, (4, 2, 2)).copy()),
        )
        assert add_scaled(1.0, mu, 0.0, OperatorSpectralMeasure.empty(2)) == mu

    def test_unit_split_of_equal_measures(self):
        mu = flat_measure(B2, band=1.0, bins=4)
        out = add_scaled(1 / np.sqrt(2), mu, 1 / np.sqrt(2), mu)
        assert rel_frob(out.density.values, mu.density.values) < 1e-14
        assert rel_frob(total_mass(out), total_mass(mu)) < 1e-14

    def test_modulus_kills_phase_and_sign(self):
        mu = atom_measure((0.1, B2))
        out = add_scaled(-1.0, mu, 1.0j, mu)
        assert np.allclose(out.atoms[0][1], 2 * B2, atol=1e-14)

    def test_density_refinement(self):
        a = flat_measure(np.eye(1), band=1.0, bins=2)
        b = flat_measure(2 * np.eye(1), band=1.0, bins=4)
        out = add_scaled(1.0, a, 1.0, b)
        assert out.density.bins == 4
        assert np.allclose(out.density.values, 3.0, atol=1e-14)

    def test_non_refinement_grids_rejected(self):
        a = flat_measure(np.eye(1), band=1.0, bins=2)
        b = flat_measure(np.eye(1), band=1.0, bins=3)
        with pytest.raises(ValueError):
            add_scaled(1.0, a, 1.0, b)

    def test_mismatched_bands_rejected(self):
        a = flat_measure(np.eye(1), band=1.0, bins=2)
        b = flat_measure(np.eye(1), band=0.5, bins=2)
        with pytest.raises(ValueError):
            add_scaled(1.0, a, 1.0, b)

    def test_dim_mismatch_rejected(self):
        with pytest.raises(DimensionMismatchError):
            add_scaled(
                1.0,
                flat_measure(np.eye(1), 1.0, 2),
                1.0,
                flat_measure(np.eye(2), 1.0, 2),
            )

    @settings(deadline=None, max_examples=20)
    @given(
        st.integers(0, 10**6),
        st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False),
        st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False),
    )
    def test_mass_is_additive(self, seed, alpha, beta):
        rng = rng_for(seed)
        mu1 = OperatorSpectralMeasure(
            dim=2,
            atoms=((0.3, random_psd(rng, 2)),),
            density=DensityGrid(-1.0, 1.0, np.stack([random_psd(rng, 2)] * 2)),
        )
        mu2 = OperatorSpectralMeasure(
            dim=2,
            atoms=((-0.1, random_psd(rng, 2)),),
            density=DensityGrid(-1.0, 1.0, np.stack([random_psd(rng, 2)] * 4)),
        )
        out = add_scaled(alpha, mu1, beta, mu2)
        want = abs(alpha) ** 2 * total_mass(mu1) + abs(beta) ** 2 * total_mass(mu2)
        assert frob(total_mass(out) - want) <= 1e-12 * max(1.0, frob(want))

    def test_transform_is_linear(self):
        rng = rng_for(77)
        mu1 = atom_measure((0.25, random_psd(rng, 2)))
        mu2 = flat_measure(random_psd(rng, 2), band=0.75, bins=3)
        out = add_scaled(1.5, mu1, 0.5, mu2)
        t_out = covariance_from_spectrum(out, dt=0.2, lags=6).values
        t1 = covariance_from_spectrum(mu1, dt=0.2, lags=6).values
        t2 = covariance_from_spectrum(mu2, dt=0.2, lags=6).values
        assert frob(t_out - 1.5**2 * t1 - 0.5**2 * t2) < 1e-12
