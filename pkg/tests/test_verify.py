import json

import pytest

from bowendim.config import DEFAULT
from bowendim.expfamily import DomainError
from bowendim.randomdriver import ParameterLaw
from bowendim.verify import run_hypothesis_audit

SMALL = DEFAULT.replace(audit_samples=2000, audit_steps=260, decay_steps=120)

# first verified run at defaults, a=0.18, r=0, seed=7
PINNED = {"gamma_hat": 5.011184286391185, "kappa_hat": 0.4931224719901984,
          "A_hat": 0.04156286509059013, "ratio_min": 0.7155400720502756,
          "M_hat": 2.4130406343253576, "a_hat": 0.41441490283050364,
          "decay_slope": -0.1960577130097353, "theta_hat": 0.4039302827614445}


def test_invalid_law_rejected_before_checks():
    with pytest.raises(DomainError):
        run_hypothesis_audit(ParameterLaw(0.4), 7)


def test_reference_audit_pinned():
    rep = run_hypothesis_audit(ParameterLaw(0.18), 7)
    assert rep.passed
    got = rep.constants()
    for k, v in PINNED.items():
        assert got[k] == pytest.approx(v, rel=1e-6), k
    assert got["D_hat"] == 0.0


def test_deterministic_report():
    a = run_hypothesis_audit(ParameterLaw(0.18, 0.01), 3, SMALL).to_json()
    b = run_hypothesis_audit(ParameterLaw(0.18, 0.01), 3, SMALL).to_json()
    assert a == b
    doc = json.loads(a)
    assert [c["name"] for c in doc["checks"]] == [
        "expansion", "pairing", "deformation", "balanced_growth", "operator_bounds",
        "density_decay", "convergence"]


def test_failed_check_does_not_abort():
    rep = run_hypothesis_audit(ParameterLaw(0.18), 3, SMALL.replace(kappa_max=0.1))
    assert not rep.passed
    by_name = {c.name: c for c in rep.checks}
    assert not by_name["pairing"].passed
    assert by_name["convergence"].passed and len(rep.checks) == 7
    assert "FAIL pairing" in rep.summary()
