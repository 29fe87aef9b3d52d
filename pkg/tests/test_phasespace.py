import csv
import json
import warnings

import numpy as np
import pytest

import anharmonic as ah
from anharmonic import (INF, BoundaryMassWarning, FieldSample, Grid,
                        InvalidSpecError, MixedNormParams, NumericalError,
                        PhaseSpaceField, WeightSpec, WindowSpec, gaussian_stft,
                        mixed_norm, modulation_norm, stft, weight_value,
                        window_values)
from oracles import gaussian_window_transform_abs, mixed_norm_reference

FLAT = WeightSpec("flat", 0.0)


def unit_gaussian(grid):
    x = grid.axis_nodes()
    return FieldSample(grid, 2.0 ** 0.25 * np.exp(-np.pi * x ** 2))


class TestWindow:
    def test_gaussian_is_unit_norm(self, hermite_grid):
        g = window_values(WindowSpec(), hermite_grid)
        norm = np.sqrt(hermite_grid.cell_volume * np.sum(np.abs(g) ** 2))
        assert norm == pytest.approx(1.0, abs=1e-12)

    def test_wrapped_layout_peaks_at_origin(self, hermite_grid):
        g = window_values(WindowSpec(), hermite_grid)
        assert np.argmax(np.abs(g)) == 0

    def test_custom_window_is_normalized(self, hermite_grid, gaussian_field):
        x = hermite_grid.axis_nodes()
        # same gaussian profile as the default, but in node layout and scaled
        prof = FieldSample(hermite_grid, 5.0 * 2.0 ** 0.25 * np.exp(-np.pi * x ** 2))
        g = window_values(WindowSpec("custom", prof), hermite_grid)
        norm = np.sqrt(hermite_grid.cell_volume * np.sum(np.abs(g) ** 2))
        assert norm == pytest.approx(1.0, abs=1e-12)

    def test_spec_validation(self, hermite_grid, gaussian_field):
        with pytest.raises(InvalidSpecError):
            WindowSpec("hann")
        with pytest.raises(InvalidSpecError):
            WindowSpec("custom")
        with pytest.raises(InvalidSpecError):
            WindowSpec("gaussian", gaussian_field)

    def test_zero_custom_window_rejected(self, hermite_grid):
        zero = FieldSample(hermite_grid, np.zeros(hermite_grid.size))
        with pytest.raises(InvalidSpecError):
            window_values(WindowSpec("custom", zero), hermite_grid)


class TestStft:
    def test_gaussian_pair_closed_form(self, hermite_grid):
        """Transforming the unit gaussian against the gaussian window has the
        explicit magnitude exp(-pi (x^2 + xi^2) / 2)."""
        out = stft(unit_gaussian(hermite_grid), WindowSpec())
        x = hermite_grid.nodes()[:, 0]
        xi = hermite_grid.frequency_nodes()[:, 0]
        expected = gaussian_window_transform_abs(x, xi)
        assert np.max(np.abs(np.abs(out.values) - expected)) < 1e-12

    def test_flat_l2_isometry(self, hermite_grid, gaussian_field):
        # discrete orthogonality makes the p=q=2 flat norm the exact L2 norm
        out = stft(gaussian_field, WindowSpec())
        norm = mixed_norm(out, FLAT, None, MixedNormParams(2.0, 2.0))
        assert norm == pytest.approx(gaussian_field.norm_l2(), rel=1e-12)

    def test_modulated_shift_moves_peak(self, hermite_grid):
        x = hermite_grid.axis_nodes()
        f = FieldSample(hermite_grid,
                        2.0 ** 0.25 * np.exp(-np.pi * (x - 2.0) ** 2)
                        * np.exp(2j * np.pi * 1.5 * x))
        out = stft(f, WindowSpec())
        i, n = np.unravel_index(np.argmax(np.abs(out.values)), out.values.shape)
        assert hermite_grid.nodes()[i, 0] == pytest.approx(2.0, abs=hermite_grid.h)
        assert out.xi_lattice()[n, 0] == pytest.approx(1.5, abs=hermite_grid.frequency_cell)

    def test_boundary_mass_warns(self):
        grid = Grid(1, 128, 6.0)
        f = FieldSample(grid, np.ones(grid.size))
        with pytest.warns(BoundaryMassWarning):
            stft(f, WindowSpec())

    def test_interior_field_is_silent(self, hermite_grid, gaussian_field):
        with warnings.catch_warnings():
            warnings.simplefilter("error", BoundaryMassWarning)
            stft(gaussian_field, WindowSpec())

    def test_gaussian_variant_is_plain_stft_of_damped_field(self, hermite_grid,
                                                            gaussian_field):
        half = ah.gaussian_half_density(hermite_grid)
        damped = FieldSample(hermite_grid, gaussian_field.values * half)
        a = gaussian_stft(gaussian_field, WindowSpec())
        b = stft(damped, WindowSpec())
        np.testing.assert_array_equal(a.values, b.values)


class TestPhaseSpaceField:
    def test_shape_validated(self, hermite_grid):
        with pytest.raises(InvalidSpecError):
            PhaseSpaceField(hermite_grid, np.zeros((3, 3)))

    def test_to_csv_layout(self, tmp_path):
        grid = Grid(1, 8, 4.0)
        vals = np.arange(64, dtype=float).reshape(8, 8) * (1 + 1j)
        field = PhaseSpaceField(grid, vals)
        path = tmp_path / "field.csv"
        field.to_csv(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x", "xi", "re", "im", "abs"]
        assert len(rows) == 1 + 64
        x, xi, re, im, mag = (float(v) for v in rows[1])
        assert x == grid.nodes()[0, 0] and xi == grid.frequency_nodes()[0, 0]
        assert re == 0.0 and im == 0.0 and mag == 0.0
        x, xi, re, im, mag = (float(v) for v in rows[2])
        assert re == 1.0 and im == 1.0 and mag == pytest.approx(np.sqrt(2.0))

    def test_metadata_sidecar(self, tmp_path):
        grid = Grid(1, 8, 4.0)
        field = PhaseSpaceField(grid, np.zeros((8, 8)))
        path = tmp_path / "field.meta.json"
        field.metadata_sidecar(path)
        meta = json.loads(path.read_text())
        assert meta["schema"] == 1
        assert meta["x_cell"] == grid.cell_volume
        assert meta["xi_cell"] == grid.frequency_cell


class TestMixedNorm:
    @pytest.mark.parametrize("p,q", [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0),
                                     (0.5, 3.0), ("inf", 2.0), (2.0, "inf"),
                                     ("inf", "inf")])
    def test_against_direct_loops(self, p, q):
        grid = Grid(1, 8, 4.0)
        rng = np.random.default_rng(7)
        vals = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        field = PhaseSpaceField(grid, vals)
        w = WeightSpec("polynomial", 1.5)
        x = grid.nodes()[:, 0]
        xi = grid.frequency_nodes()[:, 0]
        lattice = (1.0 + np.abs(x)[:, None] + np.abs(xi)[None, :]) ** 1.5
        expected = mixed_norm_reference(vals, lattice, p, q,
                                        grid.cell_volume, grid.frequency_cell)
        params = MixedNormParams(INF if p == "inf" else p, INF if q == "inf" else q)
        got = mixed_norm(field, w, None, params)
        assert got == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("p,q", [(1.0, 1.0), (2.0, 1.0), ("inf", 1.0),
                                     (1.0, "inf")])
    @pytest.mark.parametrize("kind,s", [("anharmonic", 1.0), ("polynomial", 2.0)])
    def test_point_mass_value(self, p, q, kind, s, quartic_osc):
        """A single lattice point carries |c| w(x_i, xi_n) h^(1/p) (1/2L)^(1/q);
        the symbol-adapted weight reads the frequency in angular scale."""
        grid = Grid(1, 16, 4.0)
        i, n = 11, 5
        vals = np.zeros((16, 16), dtype=complex)
        vals[i, n] = 2.0 - 1.0j
        field = PhaseSpaceField(grid, vals)
        w = WeightSpec(kind, s)
        osc = quartic_osc if kind == "anharmonic" else None
        x = grid.nodes()[i, 0]
        xi = grid.frequency_nodes()[n, 0]
        wf = weight_value(w, osc, x, 2.0 * np.pi * xi if kind == "anharmonic" else xi)
        expected = abs(2.0 - 1.0j) * wf
        if p != "inf":
            expected *= grid.cell_volume ** (1.0 / p)
        if q != "inf":
            expected *= grid.frequency_cell ** (1.0 / q)
        params = MixedNormParams(INF if p == "inf" else p, INF if q == "inf" else q)
        assert mixed_norm(field, w, osc, params) == pytest.approx(expected, rel=1e-12)

    def test_anharmonic_weight_needs_oscillator(self):
        grid = Grid(1, 8, 4.0)
        field = PhaseSpaceField(grid, np.ones((8, 8)))
        with pytest.raises(InvalidSpecError):
            mixed_norm(field, WeightSpec("anharmonic", 1.0), None,
                       MixedNormParams(1.0, 1.0))

    def test_nonfinite_values_raise(self):
        grid = Grid(1, 8, 4.0)
        vals = np.ones((8, 8), dtype=complex)
        vals[3, 3] = np.inf
        field = PhaseSpaceField(grid, vals)
        with pytest.raises(NumericalError):
            mixed_norm(field, FLAT, None, MixedNormParams(1.0, 1.0))

    def test_zero_order_weight_is_flat(self, hermite_grid, gaussian_field):
        out = stft(gaussian_field, WindowSpec())
        a = mixed_norm(out, WeightSpec("polynomial", 0.0), None, MixedNormParams(1.0, 2.0))
        b = mixed_norm(out, FLAT, None, MixedNormParams(1.0, 2.0))
        assert a == b


class TestModulationNorm:
    def test_unit_gaussian_integral(self, hermite_grid):
        """The flat M^{1,1} norm of the unit gaussian equals the closed-form
        phase-space integral, which is exactly 2."""
        norm = modulation_norm(unit_gaussian(hermite_grid), WindowSpec(), FLAT,
                               None, MixedNormParams(1.0, 1.0))
        assert norm == pytest.approx(2.0, rel=1e-12)

    def test_ground_state_regression(self, hermite_grid):
        x = hermite_grid.axis_nodes()
        phi0 = FieldSample(hermite_grid, np.pi ** -0.25 * np.exp(-x ** 2 / 2))
        norm = modulation_norm(phi0, WindowSpec(), FLAT, None, MixedNormParams(1.0, 1.0))
        assert norm == pytest.approx(2.410630853130538, rel=1e-9)

    def test_ground_state_stable_under_refinement(self, hermite_grid):
        fine = Grid(1, 1024, 12.0)
        vals = []
        for grid in (hermite_grid, fine):
            x = grid.axis_nodes()
            phi0 = FieldSample(grid, np.pi ** -0.25 * np.exp(-x ** 2 / 2))
            vals.append(modulation_norm(phi0, WindowSpec(), FLAT, None,
                                        MixedNormParams(1.0, 1.0)))
        assert vals[1] == pytest.approx(vals[0], rel=1e-2)

    def test_gaussian_route_matches_manual_damping(self, hermite_grid, gaussian_field):
        half = ah.gaussian_half_density(hermite_grid)
        damped = FieldSample(hermite_grid, gaussian_field.values * half)
        params = MixedNormParams(2.0, 1.0)
        w = WeightSpec("polynomial", 1.0)
        via_flag = modulation_norm(gaussian_field, WindowSpec(), w, None, params,
                                   gaussian=True)
        by_hand = modulation_norm(damped, WindowSpec(), w, None, params)
        assert via_flag == by_hand
