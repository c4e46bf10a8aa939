"""Platform adapter interface and the simulated reference marketplace."""

from marketaudit.platform.base import (
    DEFAULT_ALGORITHM,
    HomepageCapture,
    PlatformAdapter,
    SearchAlgorithm,
    SerpCapture,
)
from marketaudit.platform.catalog import Catalog, CatalogSpec, Item, generate_catalog, load_catalog, save_catalog
from marketaudit.platform.simulator import (
    PersonalizationConfig,
    SimulatedMarketplace,
    UserState,
    add_to_cart,
    add_to_wishlist,
    browse,
    history_similarity,
    homepage,
    load_config,
    rank_featured,
    search,
)

__all__ = [
    "DEFAULT_ALGORITHM", "HomepageCapture", "PlatformAdapter", "SearchAlgorithm", "SerpCapture",
    "Catalog", "CatalogSpec", "Item", "generate_catalog", "load_catalog", "save_catalog",
    "PersonalizationConfig", "SimulatedMarketplace", "UserState", "add_to_cart", "add_to_wishlist",
    "browse", "history_similarity", "homepage", "load_config", "rank_featured", "search",
]
