import pytest

from quartfuse.misc.exceptions import ConfigError, RegistryError
from quartfuse.perturb import PerturbationOp
from quartfuse.streams import Scenario

def test_catalogs_hold_their_entries():
    assert Scenario.names() == ["visual-event", "off-camera-speech", "motion-only-event", "audio-visual-event"]
    assert set(PerturbationOp.names()) == {"add-noise", "add-jitter", "reverse", "replace-with-irrelevant",
                                           "no-perturbation", "frame-jitter", "frame-dropout"}

def test_catalogs_are_separate():
    assert "reverse" not in Scenario.names()
    assert "visual-event" not in PerturbationOp.names()

def test_lookup():
    assert Scenario.lookup("motion-only-event").RELEVANT == frozenset({"sensor"})
    with pytest.raises(ConfigError) as error:
        Scenario.lookup("underwater", "scenarios")
    assert error.value.field == "scenarios"

def test_metadata_must_be_explicit():
    with pytest.raises(RegistryError):
        class Unnamed(Scenario):  # pylint: disable=unused-variable
            UNIQUE_NAME = "unnamed-scenario"
            VERSION = "0.1"
    assert "unnamed-scenario" not in Scenario.names()

def test_unique_names_do_not_clash():
    with pytest.raises(RegistryError):
        class Twin(PerturbationOp):  # pylint: disable=unused-variable
            DISPLAY_NAME = "Twin"
            UNIQUE_NAME = "reverse"
            VERSION = "0.1"

def test_to_dict_describes_the_entry():
    assert Scenario.lookup("visual-event")().to_dict() == {"display_name": "Visual event", "unique_name": "visual-event", "version": "0.1"}
