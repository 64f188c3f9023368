"""
Tests for the built-in invariant suite.
"""
import numpy as np
import pytest

from easyctrl import selftest
from easyctrl.cli import EXIT_FAILURE, EXIT_OK, main
from easyctrl.exceptions import ValidationError


def test_broken_invariant_raises_validation_error(monkeypatch):
    """Test that a check whose invariant does not hold raises ValidationError."""
    monkeypatch.setattr(selftest, "canny_edges", lambda image: np.zeros(image.shape[:2], dtype=bool))
    with pytest.raises(ValidationError, match="step edge"):
        selftest.check_canny()


def test_failed_check_is_reported(monkeypatch):
    """Test that a failing check is marked False and the command exits with status 1."""
    def broken():
        raise ValidationError("broken on purpose")

    monkeypatch.setattr(selftest, "CHECKS", {'archive_roundtrip': selftest.check_archive, 'broken': broken})
    assert selftest.run_selftest() == {'archive_roundtrip': True, 'broken': False}
    assert main(["selftest"]) == EXIT_FAILURE


def test_passing_checks_exit_ok(monkeypatch):
    """Test that the command exits with status 0 when every check passes."""
    monkeypatch.setattr(selftest, "CHECKS", {'canny_step_edge': selftest.check_canny})
    assert main(["selftest"]) == EXIT_OK
