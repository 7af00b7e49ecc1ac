"""Orbit fitting directly on long-exposure streak images."""

from ._core import (
    EARTH_RADIUS,
    MU_EARTH,
    FitConfig,
    FitResult,
    InvalidArgument,
    KeplerianElements,
    ObservationSet,
    OrbitState,
    Scenario,
    StreakfitError,
    StreakImage,
    box_blur,
    corner_init,
    degraded_init,
    elements_to_state,
    endpoint_error,
    fit,
    propagate,
    read_observation,
    run_experiment,
    simulate,
    state_to_elements,
    write_observation,
)

__all__ = [name for name in dir() if not name.startswith("_")]
