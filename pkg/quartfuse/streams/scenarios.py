"""
The scenario catalog.

Each scenario fixes which modalities carry the answer and how the question is phrased.
Scenarios register themselves through RegistryMeta; look them up by unique name.
"""
from ..base.registry import Registered

class Scenario(Registered):
    """Base class of the scenario catalog."""

    CATALOG_ROOT = True
    DISPLAY_NAME = "Scenario"
    UNIQUE_NAME = "quartfuse.core.scenario-abstract-base-class"
    VERSION = "0.1"

    RELEVANT : frozenset = frozenset()
    QUERY_TEMPLATES : tuple = ()

class VisualEvent(Scenario):
    """The answer is only visible on camera."""

    DISPLAY_NAME = "Visual event"
    UNIQUE_NAME = "visual-event"
    VERSION = "0.1"
    RELEVANT = frozenset({"video"})
    QUERY_TEMPLATES = (("what", "seen", "scene"), ("which", "activity", "seen"))

class OffCameraSpeech(Scenario):
    """The answer is heard but happens off camera."""

    DISPLAY_NAME = "Off-camera speech"
    UNIQUE_NAME = "off-camera-speech"
    VERSION = "0.1"
    RELEVANT = frozenset({"audio"})
    QUERY_TEMPLATES = (("what", "heard", "sound"), ("which", "sound", "heard"))

class MotionOnlyEvent(Scenario):
    """The answer shows up only in body motion; camera and microphone disagree."""

    DISPLAY_NAME = "Motion-only event"
    UNIQUE_NAME = "motion-only-event"
    VERSION = "0.1"
    RELEVANT = frozenset({"sensor"})
    QUERY_TEMPLATES = (("what", "felt", "motion"), ("which", "motion", "felt"))

class AudioVisualEvent(Scenario):
    """Camera and microphone agree; the motion sensor is the distractor."""

    DISPLAY_NAME = "Audio-visual event"
    UNIQUE_NAME = "audio-visual-event"
    VERSION = "0.1"
    RELEVANT = frozenset({"video", "audio"})
    QUERY_TEMPLATES = (("what", "happened", "scene"), ("which", "activity", "happened"))
