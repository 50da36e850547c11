"""Module defines the 'Registered' base class used by the scenario and perturbation catalogs."""
from abc import ABCMeta

from ..misc.exceptions import ConfigError, RegistryError

class RegistryMeta(ABCMeta):
    """
    Use a metaclass to enforce:
    - Class metadata should be set explicitly and not inherited
    - Unique names should not clash within one catalog
    - Every concrete subclass is reachable from its catalog root
    """

    def __new__(mcs, name, bases, namespace, **kwargs):
        cls = super().__new__(mcs, name, bases, namespace, **kwargs)

        if len(bases) > 0 and not namespace.get("CATALOG_ROOT", False):
            ################################################################################
            # Verify that class meta data has been set explicitly
            ################################################################################
            for key in ("DISPLAY_NAME", "UNIQUE_NAME", "VERSION"):
                if key not in cls.__dict__:
                    raise RegistryError(f"{name} must declare {key} explicitly")

            ################################################################################
            # Register with the nearest catalog root, which sees grandchildren too
            ################################################################################
            root = next(base for base in cls.__mro__[1:] if base.__dict__.get("CATALOG_ROOT", False))
            if cls.UNIQUE_NAME in root.CATALOG:
                raise RegistryError(f"{name}: unique name {cls.UNIQUE_NAME!r} already registered by {root.CATALOG[cls.UNIQUE_NAME].__name__}")
            root.CATALOG[cls.UNIQUE_NAME] = cls

        if namespace.get("CATALOG_ROOT", False):
            cls.CATALOG = {}

        return cls

class Registered(metaclass=RegistryMeta):
    """Base class for catalog entries. Subclasses set CATALOG_ROOT = True to open a new catalog."""

    CATALOG_ROOT = True
    DISPLAY_NAME = "Registered base class"
    UNIQUE_NAME = "quartfuse.core.registered-abstract-base-class"
    VERSION = "0.1"

    @classmethod
    def lookup(cls, unique_name: str, field: str = "name") -> type:
        """Resolve a unique name in this catalog; unknown names are a config error."""
        try:
            return cls.CATALOG[unique_name]
        except KeyError:
            known = ", ".join(sorted(cls.CATALOG))
            raise ConfigError(field, f"unknown {cls.DISPLAY_NAME.lower()} {unique_name!r} (known: {known})") from None

    @classmethod
    def names(cls) -> list[str]:
        """Unique names registered in this catalog, in registration order."""
        return list(cls.CATALOG)

    def to_dict(self) -> dict:
        """Describe the entry's type, mirroring what manifests and records store."""
        return {
            "display_name": self.__class__.DISPLAY_NAME,
            "unique_name": self.__class__.UNIQUE_NAME,
            "version": self.__class__.VERSION,
        }
