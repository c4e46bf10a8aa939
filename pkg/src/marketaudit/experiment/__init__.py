"""Account layout, treatment selection and the daily audit protocol."""

from marketaudit.experiment.plan import (
    ACTIVITIES,
    SEARCH_ONLY,
    TREATMENT_NAMES,
    AccountSpec,
    ExperimentPlan,
    Treatment,
    build_plan,
    load_plan,
    save_plan,
    select_treatments,
)
from marketaudit.experiment.protocol import (
    AFTER_ACTION,
    AFTER_SEARCH,
    BEFORE_SEARCH,
    SERP,
    EventRecord,
    PageRecord,
    RunLog,
    VirtualClock,
    check_complete,
    expected_counts,
    run_protocol,
)
from marketaudit.experiment.simulate import plan_for_catalog, simulate_study

__all__ = [
    "ACTIVITIES", "SEARCH_ONLY", "TREATMENT_NAMES", "AccountSpec", "ExperimentPlan", "Treatment",
    "build_plan", "load_plan", "save_plan", "select_treatments",
    "AFTER_ACTION", "AFTER_SEARCH", "BEFORE_SEARCH", "SERP", "EventRecord", "PageRecord", "RunLog",
    "VirtualClock", "check_complete", "expected_counts", "run_protocol",
    "plan_for_catalog", "simulate_study",
]
