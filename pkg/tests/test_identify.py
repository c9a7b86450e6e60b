import math

import numpy as np
import pytest

from farscatter.farfield import DirectionGrid, FarFieldError, add_noise, relative_distance
from farscatter.geometry import BoundaryCondition, Obstacle, RigidMotion, ellipse, kite, rounded_triangle
from farscatter.identify import (AmbiguousIdentification, DictionaryEntry, IdentifyConfig,
                                 NotInDictionary, Pose, ShapeDictionary, classify_bc, identify,
                                 misfit, precompute, predict, result_to_text,
                                 separability_check, shipped_catalog)
from farscatter.scatter import IncidentPlaneWave, far_field, solve

N = BoundaryCondition.neumann()


def measure(curve, theta, z, d_angle, bc=N, k=2.0):
    obs = Obstacle(curve, RigidMotion(theta, z), bc)
    return far_field(solve(obs, IncidentPlaneWave(k, d_angle)))


def angle_gap(a, b, period=2 * math.pi):
    return abs(math.remainder(a - b, period))


def test_predict_matches_forward_solve(catalog_k2):
    j = catalog_k2.index("kite")
    pose = Pose(1.3, (0.4, -0.2))
    direct = measure(kite(), 1.3, (0.4, -0.2), 0.6)
    assert relative_distance(predict(catalog_k2, j, pose, 0.6), direct) < 1e-6
    assert misfit(direct, catalog_k2, j, pose) < 1e-6


def test_identify_kite_known_location(catalog_k2):
    meas = measure(kite(), 2.2, (0.3, 0.1), 1.0)
    res = identify(meas, catalog_k2, IdentifyConfig(z=(0.3, 0.1)))
    assert res.best_id == "kite"
    assert angle_gap(res.pose.theta, 2.2) < 1e-6
    assert res.misfit < 1e-6
    assert not any(res.flags.values())


def test_identify_ellipse_modulo_symmetry(catalog_k2):
    meas = measure(ellipse(1.0, 0.5), 0.4, (0.0, 0.0), 2.5)
    res = identify(meas, catalog_k2)
    assert res.best_id == "ellipse"
    assert angle_gap(res.pose.theta, 0.4, math.pi) < 1e-6


def test_identify_disk_flags_flat_theta(catalog_k2):
    from farscatter.geometry import circle
    res = identify(measure(circle(1.0), 0.0, (0.0, 0.0), 0.2), catalog_k2)
    assert res.best_id == "disk"
    assert res.flags["theta_flat"]


def test_identify_search_mode(catalog_k2):
    meas = measure(kite(), 0.9, (0.35, -0.5), 4.0)
    res = identify(meas, catalog_k2, IdentifyConfig(location="search"))
    assert res.best_id == "kite"
    assert angle_gap(res.pose.theta, 0.9) < 1e-4
    np.testing.assert_allclose(res.pose.z, (0.35, -0.5), atol=1e-4)


def test_identify_with_noise(catalog_k2):
    meas = add_noise(measure(kite(), 5.0, (0.0, 0.0), 0.0), 0.01, seed=3)
    res = identify(meas, catalog_k2)
    assert res.best_id == "kite"
    assert angle_gap(res.pose.theta, 5.0) < 1e-2


def test_absent_shape_not_in_dictionary(catalog_k2):
    meas = measure(rounded_triangle(), 0.0, (0.0, 0.0), 0.0)
    with pytest.raises(NotInDictionary) as info:
        identify(meas, catalog_k2)
    assert info.value.result.misfit > 0.1
    res = identify(meas, catalog_k2, IdentifyConfig(strict=False))
    assert res.flags["not_in_dictionary"]


def test_duplicate_entry_is_ambiguous():
    entries = [DictionaryEntry("kite_a", kite(), N), DictionaryEntry("kite_b", kite(), N)]
    dictionary = precompute(entries, 1.0)
    meas = measure(kite(), 1.0, (0.0, 0.0), 0.3, k=1.0)
    with pytest.raises(AmbiguousIdentification) as info:
        identify(meas, dictionary)
    assert [c.id for c in info.value.candidates] == ["kite_a", "kite_b"]
    res = identify(meas, dictionary, IdentifyConfig(strict=False))
    assert res.best_id == "kite_a" and res.flags["ambiguous"]


def test_threads_do_not_change_result(catalog_k2):
    meas = measure(kite(), 3.1, (0.0, 0.0), 1.7)
    one = identify(meas, catalog_k2)
    many = identify(meas, catalog_k2, threads=3)
    assert one.to_json() == many.to_json()


def test_measurement_must_match_dictionary(catalog_k2):
    wrong_k = measure(kite(), 0.0, (0.0, 0.0), 0.0, k=1.0)
    with pytest.raises(FarFieldError):
        identify(wrong_k, catalog_k2)
    zero = wrong_k.__class__(2.0, 0.0, DirectionGrid(128), np.zeros(128))
    with pytest.raises(FarFieldError, match="zero"):
        identify(zero, catalog_k2)


def test_classify_bc_picks_sound_hard():
    hyps = [DictionaryEntry("soft", kite(), BoundaryCondition.dirichlet()),
            DictionaryEntry("hard", kite(), N),
            DictionaryEntry("impedance", kite(), BoundaryCondition.impedance(1 + 1j))]
    dictionary = precompute(hyps, 1.0)
    res = classify_bc(measure(kite(), 0.7, (0.0, 0.0), 0.2, k=1.0), dictionary)
    assert res.best_id == "hard"
    with pytest.raises(ValueError, match="share"):
        classify_bc(measure(kite(), 0.0, (0, 0), 0.0, k=1.0),
                    precompute([hyps[0], DictionaryEntry("e", ellipse(1, 0.5), N)], 1.0))


def test_separability_of_shipped_catalog(catalog_k2):
    report = separability_check(catalog_k2, trials=20)
    assert report.passed and report.min_distance > 1e-3


def test_separability_fails_for_near_duplicates():
    entries = [DictionaryEntry("e1", ellipse(1.0, 0.5), N),
               DictionaryEntry("e2", ellipse(1.0, 0.50001), N)]
    report = separability_check(precompute(entries, 1.0), trials=5)
    assert not report.passed
    assert report.pair == ("e1", "e2")


def test_dictionary_save_load_round_trip(catalog_k2, tmp_path):
    catalog_k2.save(tmp_path / "dict")
    back = ShapeDictionary.load(tmp_path / "dict")
    assert back.ids == catalog_k2.ids
    for a, b in zip(back.matrices, catalog_k2.matrices):
        np.testing.assert_array_equal(a.samples, b.samples)
    assert back.provenance["entries"]["kite"]["n_sources"] == 256


def test_dictionary_validation(catalog_k2):
    with pytest.raises(ValueError, match="unique"):
        ShapeDictionary(catalog_k2.entries[:1] * 2, 2.0, catalog_k2.obs_grid,
                        catalog_k2.inc_grid, catalog_k2.matrices[:1] * 2)


def test_config_validation():
    with pytest.raises(ValueError):
        IdentifyConfig(location="guess")
    with pytest.raises(ValueError):
        IdentifyConfig(theta_steps=0)


def test_result_text_and_json(catalog_k2):
    res = identify(measure(kite(), 0.5, (0.0, 0.0), 0.0), catalog_k2)
    text = result_to_text(res)
    assert "kite" in text.splitlines()[1]
    data = res.to_json()
    assert data["best_id"] == "kite" and len(data["ranking"]) == 3


def test_shipped_catalog_default_bc():
    assert all(e.bc == N for e in shipped_catalog())
