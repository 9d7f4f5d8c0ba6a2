"""Multimodal attention-fusion scoring of spoken responses."""

try:
    from speechgrade._core import *  # noqa: F401,F403
    from speechgrade._core import __doc__ as _core_doc
except ImportError:  # in-build layout: _core sits next to the package
    from _core import *  # noqa: F401,F403
    from _core import __doc__ as _core_doc

__doc__ = _core_doc
__version__ = "0.1.0"
