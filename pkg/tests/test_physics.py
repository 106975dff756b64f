"""Tests for mhfeflow.physics — constitutive laws, their derivatives and the state container."""

from __future__ import annotations

import numpy as np
import pytest

from mhfeflow.errors import ConstitutiveError, InvalidArgumentError
from mhfeflow.physics import (
    FluidProps,
    Phase,
    RockField,
    RockProps,
    State,
    fractional_flow,
    mobility,
    porosity,
    relperm,
    total_mobility,
)


def central_difference(fn, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    return (fn(x + h)[0] - fn(x - h)[0]) / (2.0 * h)


class TestPorosity:
    def test_linear_law(self) -> None:
        rock = RockProps.uniform(3, 1e-12, 0.2, 1e-4, 100.0)
        phi, dphi = porosity(rock, np.array([100.0, 110.0, 90.0]))
        np.testing.assert_allclose(phi, 0.2 * (1 + 1e-4 * np.array([0.0, 10.0, -10.0])))
        np.testing.assert_allclose(dphi, 0.2 * 1e-4)

    def test_subset_of_cells(self) -> None:
        rock = RockProps(
            perm=np.full((3, 3), 1e-12),
            phi0=np.array([0.1, 0.2, 0.3]),
            cr=0.0,
            p0=np.zeros(3),
        )
        phi, _ = porosity(rock, np.array([5.0]), cells=np.array([2]))
        assert phi[0] == pytest.approx(0.3)

    def test_non_positive_porosity_raises(self) -> None:
        rock = RockProps.uniform(2, 1e-12, 0.2, 1e-2, 100.0)
        with pytest.raises(ConstitutiveError, match="cell 1"):
            porosity(rock, np.array([100.0, -100.0]))


class TestRelativePermeability:
    def test_corey_values(self) -> None:
        fluid = FluidProps(swr=0.1, sor=0.1)
        krw, dkrw = relperm(fluid, np.array([0.5]), Phase.WATER)
        kro, dkro = relperm(fluid, np.array([0.5]), Phase.OIL)
        assert krw[0] == pytest.approx(0.25)
        assert dkrw[0] == pytest.approx(1.25)
        assert kro[0] == pytest.approx(0.25)
        assert dkro[0] == pytest.approx(-1.25)

    def test_clamped_outside_mobile_range(self) -> None:
        fluid = FluidProps(swr=0.1, sor=0.1)
        krw, dkrw = relperm(fluid, np.array([0.05, 0.95]), Phase.WATER)
        np.testing.assert_allclose(krw, [0.0, 1.0])
        np.testing.assert_allclose(dkrw, [0.0, 0.0])

    def test_end_points(self, fluid) -> None:
        kro, _ = relperm(fluid, np.array([0.0, 1.0]), Phase.OIL)
        np.testing.assert_allclose(kro, [1.0, 0.0])


class TestDerivatives:
    """Analytical derivatives against central differences over a randomized sweep."""

    SW = np.random.default_rng(3).uniform(0.15, 0.85, 50)

    @pytest.mark.parametrize("phase", [Phase.OIL, Phase.WATER])
    def test_mobility(self, phase) -> None:
        fluid = FluidProps(swr=0.05, sor=0.1, corey_exp=3.0)
        _, d = mobility(fluid, self.SW, phase)
        fd = central_difference(lambda s: mobility(fluid, s, phase), self.SW)
        np.testing.assert_allclose(d, fd, rtol=1e-6)

    def test_total_mobility(self, fluid) -> None:
        _, d = total_mobility(fluid, self.SW)
        fd = central_difference(lambda s: total_mobility(fluid, s), self.SW)
        np.testing.assert_allclose(d, fd, rtol=1e-6)

    def test_fractional_flow(self) -> None:
        fluid = FluidProps(corey_exp=2.5)
        _, d = fractional_flow(fluid, self.SW)
        fd = central_difference(lambda s: fractional_flow(fluid, s), self.SW)
        np.testing.assert_allclose(d, fd, rtol=1e-6)

    def test_porosity(self) -> None:
        rock = RockProps.uniform(1, 1e-12, 0.25, 5e-7, 500.0)
        p = np.array([512.3])
        _, d = porosity(rock, p)
        fd = central_difference(lambda x: porosity(rock, x), p, h=1e-2)
        np.testing.assert_allclose(d, fd, rtol=1e-6)


class TestFluidProps:
    def test_defaults(self, fluid) -> None:
        assert fluid.mu_o == pytest.approx(2.3148e-11)
        assert fluid.mu_w == pytest.approx(1.1574e-11)
        assert fluid.gamma_o == pytest.approx(8.0)
        assert fluid.gamma_w == pytest.approx(9.81)

    def test_reference_mobility(self, fluid) -> None:
        assert fluid.reference_mobility == pytest.approx(1 / fluid.mu_o + 1 / fluid.mu_w)

    def test_residuals_must_leave_mobile_range(self) -> None:
        with pytest.raises(ValueError):
            FluidProps(swr=0.6, sor=0.4)

    def test_is_frozen(self, fluid) -> None:
        with pytest.raises(ValueError):
            fluid.mu_o = 1.0


class TestRockProps:
    def test_uniform_anisotropic(self) -> None:
        rock = RockProps.uniform(4, (1e-12, 2e-12, 1e-13), 0.2, 0.0, 0.0)
        assert rock.n_cells == 4
        np.testing.assert_allclose(rock.perm[2], [1e-12, 2e-12, 1e-13])

    def test_rejects_bad_perm_shape(self) -> None:
        with pytest.raises(InvalidArgumentError):
            RockProps(perm=np.ones((3, 2)), phi0=np.ones(3) * 0.2, cr=0.0, p0=np.zeros(3))

    def test_rejects_non_positive_perm(self) -> None:
        perm = np.full((2, 3), 1e-12)
        perm[1, 2] = 0.0
        with pytest.raises(InvalidArgumentError):
            RockProps(perm=perm, phi0=np.full(2, 0.2), cr=0.0, p0=np.zeros(2))

    def test_rejects_negative_compressibility(self) -> None:
        with pytest.raises(InvalidArgumentError):
            RockProps.uniform(2, 1e-12, 0.2, -1e-6, 0.0)

    def test_field_contrast_and_conversion(self) -> None:
        perm = np.array([[1e-15, 1e-15, 1e-16], [1e-12, 1e-12, 1e-13]])
        field = RockField(perm=perm, phi=np.array([0.1, 0.2]), dims=(2, 1, 1))
        assert field.contrast_decades == pytest.approx(3.0)
        rock = field.to_rock(cr=1e-6, p0=300.0)
        np.testing.assert_allclose(rock.p0, 300.0)
        np.testing.assert_allclose(rock.phi0, [0.1, 0.2])


class TestState:
    def make_state(self) -> State:
        return State(
            p_elem=np.array([1.0, 2.0]),
            p_face=np.array([3.0, 4.0, 5.0]),
            p_bh=np.array([6.0]),
            sw=np.array([0.1, 0.2]),
            time=1.5,
        )

    def test_vector_order(self) -> None:
        np.testing.assert_array_equal(
            self.make_state().to_vector(), [3.0, 4.0, 5.0, 1.0, 2.0, 6.0, 0.1, 0.2]
        )

    def test_with_vector_inverts_to_vector(self) -> None:
        state = self.make_state()
        x = state.to_vector() * 2
        other = state.with_vector(x, time=2.0)
        np.testing.assert_array_equal(other.to_vector(), x)
        assert other.time == 2.0
        assert state.time == 1.5

    def test_copy_is_independent(self) -> None:
        state = self.make_state()
        other = state.copy()
        other.sw[0] = 0.9
        assert state.sw[0] == pytest.approx(0.1)

    def test_is_finite(self) -> None:
        state = self.make_state()
        assert state.is_finite()
        state.p_face[1] = np.nan
        assert not state.is_finite()

    def test_saturation_size_mismatch(self) -> None:
        with pytest.raises(InvalidArgumentError):
            State(p_elem=np.zeros(2), p_face=np.zeros(1), p_bh=np.zeros(0), sw=np.zeros(3))
