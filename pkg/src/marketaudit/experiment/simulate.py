"""One-call simulated study: seeded catalog, treatments, plan and run."""

from __future__ import annotations

from dataclasses import replace
from typing import Mapping, Optional, Sequence

from marketaudit.corpus import AnnotatedQuery, default_queries
from marketaudit.experiment.plan import ExperimentPlan, build_plan, select_treatments
from marketaudit.experiment.protocol import RunLog, run_protocol
from marketaudit.platform.catalog import Catalog, CatalogSpec, generate_catalog
from marketaudit.platform.simulator import PersonalizationConfig, SimulatedMarketplace


def plan_for_catalog(
    catalog: Catalog,
    queries: Optional[Sequence[AnnotatedQuery]] = None,
    config: Optional[PersonalizationConfig] = None,
    seed: int = 0,
    overrides: Optional[Mapping] = None,
) -> ExperimentPlan:
    """Select treatments on a throwaway marketplace and lay out the accounts."""
    queries = list(queries if queries is not None else default_queries())
    probe = SimulatedMarketplace(catalog, config)
    treatments = select_treatments(catalog, queries, probe, seed=seed)
    return build_plan(treatments, queries, overrides)


def simulate_study(
    seed: int,
    config: Optional[PersonalizationConfig] = None,
    *,
    catalog_spec: CatalogSpec = CatalogSpec(),
    queries: Optional[Sequence[AnnotatedQuery]] = None,
    overrides: Optional[Mapping] = None,
) -> tuple[Catalog, RunLog]:
    """Generate a catalog from ``seed`` and run the full protocol on it.

    The seed also drives homepage noise and the mix-treatment shuffle.
    """
    config = replace(config or PersonalizationConfig(), rng_seed=seed)
    catalog = generate_catalog(seed, catalog_spec)
    plan = plan_for_catalog(catalog, queries, config, seed, overrides)
    meta = {"seed": seed, "config": config.to_dict(), "catalog_size": len(catalog)}
    return catalog, run_protocol(plan, SimulatedMarketplace(catalog, config), meta=meta)
