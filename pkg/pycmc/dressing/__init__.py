from .asymptotics import (
    bridge_check,
    bubbleton_asymptotics_check,
    conjugation_check,
    dressed_positive_factory,
    exp_limit_check,
    simple_factor_limit_check,
)
from .dress import (
    DressedFrame,
    DressingResult,
    dress,
    load_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    special_dressing,
    validate_special_dressing,
)
from .extraction import ExtractionResult, extract_simple_factors
from .simple_factor import (
    Blaschke,
    SimpleFactor,
    blaschke,
    cp1_distance,
    factor_product,
    projector,
    sandwich,
    simple_factor_eval,
)
