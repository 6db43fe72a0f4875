# Licensed under the MIT License, see LICENSE for details.
# SPDX-License-Identifier: MIT
"""
Built-in superstructures. Each case builds a
:class:`~safmodel.core_model.SuperstructureSpec` and may state values a
correct model and solver must reproduce in :meth:`Case.expects`.
"""


class Case(object):
    """
    Base class of the built-in superstructures. Keyword arguments override the
    class defaults of a case.
    """
    name = None

    def __init__(self, **kwargs):
        for key, value in kwargs.items():
            if not hasattr(self, key):
                raise TypeError("{} has no parameter {}".format(self.__class__.__name__, key))
            setattr(self, key, value)
        self.spec = self.build()

    def build(self):
        raise NotImplementedError

    def network_ids(self):
        """Network ids the surrogate processes of this case need."""
        return sorted(set(p.kind.network_id for p in self.spec.processes if hasattr(p.kind, "network_id")))

    def expects(self) -> dict:
        return {}

    def __repr__(self):
        return "{}({})".format(self.__class__.__name__, self.spec)


def case(name: str):
    """Decorator registering a case under ``name``."""
    def wrapper(wrapped):
        wrapped.name = name
        return wrapped
    return wrapper


def get_cases(cls=None):
    if cls is None:
        cls = Case
    cases = [cls] if cls.name else []
    for subcls in cls.__subclasses__():
        cases += get_cases(subcls)
    return list(dict.fromkeys(cases))


def reverse_lookup(name: str):
    """
    Find the case registered under ``name``.

    :return: case class or None
    """
    for c in get_cases():
        if c.name == name:
            return c
    return None


from .toys import *  # noqa: E402,F401,F403
from .ftsaf import *  # noqa: E402,F401,F403
