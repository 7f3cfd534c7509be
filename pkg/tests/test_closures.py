"""Named closure laws and their projection."""

from __future__ import annotations

import numpy as np
import pytest

from sg_traffic.closures import hesitation, project_closure, speed_law, velocity_law


def test_lookup_unknown_name():
    with pytest.raises(ValueError, match="unknown velocity law"):
        velocity_law("underwood")


def test_clamped_speed_law():
    law = speed_law("greenshields")
    assert law.value(np.array([-0.5, 0.25, 2.0])) == pytest.approx([1.0, 0.75, 0.0])


def test_affine_projection_matches_pointwise(haar3):
    rho = np.array([0.5, 0.1, -0.05, 0.02])
    exact = project_closure(velocity_law("greenshields"), rho, haar3.basis)
    assert exact == pytest.approx([0.5, -0.1, 0.05, -0.02])


def test_quadratic_hesitation_is_projected_pointwise(haar1):
    # rho(xi) = 0.5 + 0.1 phi_1: 0.6 on the left half, 0.4 on the right half
    h_hat = project_closure(hesitation("quadratic"), np.array([0.5, 0.1]), haar1.basis)
    assert h_hat == pytest.approx([0.5 * (0.36 + 0.16), 0.5 * (0.36 - 0.16)])
