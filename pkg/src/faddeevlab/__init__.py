"""Numerical laboratory for the Faddeev model near geodesic wave-map backgrounds."""
from .bumps import Bump, make_bump
from .faddeev import FieldJets, eval_F, eval_G
from .grid import Jet2, ScalarField, UniformGrid
from .waves import BackgroundField, BackgroundSpec, lambda_norms

__all__ = ["Bump", "make_bump", "FieldJets", "eval_F", "eval_G", "Jet2", "ScalarField",
           "UniformGrid", "BackgroundField", "BackgroundSpec", "lambda_norms"]
__version__ = "0.1.0"
