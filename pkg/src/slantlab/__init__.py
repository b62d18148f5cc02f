"""Numerical audits of slant, semi-slant and warped-product structure for
parametric immersions into flat Kaehler space R^{2n}."""

__version__ = "0.1.0"

from .ambient import AmbientSpace, apply_J, canonical_J
from .exprdsl import Jet2, eval_jet2, parse, to_string
from .immersion import Immersion, ImmersionJet, get_example, jet2, load_spec
from .pointgeom import (
    GridSpec,
    PointClass,
    PointFrame,
    SlantSpectrum,
    TFOperators,
    build_frames,
    classify_field,
    classify_point,
    parse_grid,
    slant_spectrum,
    tf_operators,
    wirtinger_angle,
)
from .secondform import SecondForm, adapted_frame, h_invariants, second_form, shape_operator
from .tolerances import Tolerances
from .warped import (
    SplitSpec,
    detect_warped,
    grad_lnf,
    identity_suite,
    inequality_audit,
    integrability_check,
    parse_split,
)
