"""
Registry of named harness components: acquisition curve kinds, phantom kinds
and self-test checks.
"""
import logging
from threading import Lock
from typing import Callable, Dict, Optional, Set

from errors import InvalidInputError
from geometry.curves import coordinate_circles_curve, great_circles_curve, planar_circle_curve

CATEGORIES = ("curve", "phantom", "check")

logger = logging.getLogger(__name__)


class ComponentRegistry:
    """
    Thread-safe registry of factories grouped by category.
    Each entry keeps the factory and a short metadata dict.
    """

    def __init__(self):
        self._entries: Dict[str, Dict[str, dict]] = {category: {} for category in CATEGORIES}
        self._lock = Lock()

    def _category(self, category: str) -> Dict[str, dict]:
        if category not in self._entries:
            raise InvalidInputError(f"Unknown registry category {category!r}; expected one of {CATEGORIES}")
        return self._entries[category]

    def register(self, category: str, name: str, factory: Callable, **metadata) -> None:
        """Register (or replace) a named factory."""
        with self._lock:
            self._category(category)[name] = {"factory": factory, **metadata}
            logger.debug(f"[REGISTRY] Registered {category} '{name}'")

    def get(self, category: str, name: str) -> Optional[dict]:
        with self._lock:
            return self._category(category).get(name)

    def require(self, category: str, name: str) -> Callable:
        """Factory of a registered entry; unknown names are an input error."""
        entry = self.get(category, name)
        if entry is None:
            known = ", ".join(sorted(self.names(category)))
            raise InvalidInputError(f"Unknown {category} kind {name!r}; registered: {known}")
        return entry["factory"]

    def list(self, category: str) -> Dict[str, dict]:
        """Copy of all entries of a category, in registration order."""
        with self._lock:
            return dict(self._category(category))

    def names(self, category: str) -> Set[str]:
        with self._lock:
            return set(self._category(category))


def _register_curves(registry: ComponentRegistry) -> None:
    registry.register("curve", "three-circles",
                      lambda radius, dimension=3, **_: great_circles_curve(radius),
                      guard=True)
    registry.register("curve", "coordinate-circles",
                      lambda radius, dimension=3, **_: coordinate_circles_curve(radius, dimension),
                      guard=True)
    registry.register("curve", "planar-circle",
                      lambda radius, center=None, normal=None, dimension=3, **_: planar_circle_curve(
                          radius,
                          [0.0] * dimension if center is None else center,
                          [0.0] * (dimension - 1) + [1.0] if normal is None else normal,
                      ),
                      guard=False)


# Global singleton instance
_registry = ComponentRegistry()
_register_curves(_registry)


def get_registry() -> ComponentRegistry:
    """Get the global component registry instance."""
    return _registry
