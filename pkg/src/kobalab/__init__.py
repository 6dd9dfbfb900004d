"""Numerical laboratory for the Kobayashi distance on convex domains of finite type.

Submodules: :mod:`~kobalab.domain` (defining functions and boundary geometry),
:mod:`~kobalab.frames` (minimal bases and polydisks), :mod:`~kobalab.pseudo`
(the pseudodistance ``M`` and ``g``), :mod:`~kobalab.kobayashi` (certified
distance bounds), :mod:`~kobalab.hyperbolicity` (Gromov diagnostics) and
:mod:`~kobalab.cli`.
"""

__version__ = "0.1.0"
