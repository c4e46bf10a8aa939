from __future__ import annotations

import json
import math
import statistics

import pytest
from hypothesis import given, settings, strategies as st

from marketaudit.errors import ConfigurationError, DataError, DomainError, NotFoundError
from marketaudit.platform import (
    Catalog,
    CatalogSpec,
    Item,
    PersonalizationConfig,
    SearchAlgorithm,
    SimulatedMarketplace,
    UserState,
    add_to_cart,
    add_to_wishlist,
    browse,
    generate_catalog,
    history_similarity,
    homepage,
    load_catalog,
    load_config,
    rank_featured,
    save_catalog,
    search,
)
from marketaudit.scoring import build_federated_page, fserp_ms


def mk(item_id, cls=0, rating=4.0, num=10, price=10.0, day=1, terms=("vaccine",)):
    return Item(item_id, f"title {item_id}", cls, rating, num, price, day, tuple(terms))


@pytest.fixture(scope="module")
def catalog():
    return generate_catalog(11)


# -- items and catalogs --------------------------------------------------------------


def test_item_validation():
    with pytest.raises(DomainError):
        mk("a", cls=7)
    with pytest.raises(DomainError):
        mk("a", rating=0.5, num=3)
    with pytest.raises(DomainError):
        mk("a", num=-1)
    with pytest.raises(DomainError):
        mk("a", price=-1)
    assert mk("a", rating=0.0, num=0).avg_rating == 0.0  # unrated items carry no rating


def test_catalog_lookup_and_duplicates():
    cat = Catalog([mk("b"), mk("a")])
    assert [i.item_id for i in cat] == ["a", "b"]
    with pytest.raises(NotFoundError):
        cat["zzz"]
    with pytest.raises(DataError):
        Catalog([mk("a"), mk("a")])


def test_catalog_roundtrip(tmp_path, catalog):
    path = tmp_path / "cat.jsonl"
    save_catalog(catalog, path)
    again = load_catalog(path)
    assert [i.to_dict() for i in again] == [i.to_dict() for i in catalog]


def test_catalog_bad_record(tmp_path):
    path = tmp_path / "cat.jsonl"
    path.write_text('{"item_id": "a", "stance_class": 9}\n')
    with pytest.raises(DataError, match=":1:"):
        load_catalog(path)
    with pytest.raises(ConfigurationError):
        load_catalog(tmp_path / "missing.jsonl")


def test_generator_is_seeded(catalog):
    assert [i.to_dict() for i in generate_catalog(11)] == [i.to_dict() for i in catalog]
    assert [i.item_id for i in generate_catalog(12)] != [i.item_id for i in catalog]


def test_generator_plants_stance_rating_pattern(catalog):
    by = {c: [i for i in catalog if i.stance_class == c] for c in (-1, 0, 1, 2, 3, 4)}
    spec = CatalogSpec()
    assert [len(by[c]) for c in (1, 0, -1, 2, 3, 4)] == [
        spec.pro, spec.neutral, spec.anti, spec.off_topic, spec.non_english, spec.removed,
    ]
    assert statistics.fmean(i.avg_rating for i in by[1]) > statistics.fmean(i.avg_rating for i in by[-1])
    assert min(i.num_ratings for i in by[2]) > max(i.num_ratings for c in (-1, 0, 1) for i in by[c])


# -- search -----------------------------------------------------------------------


def test_price_and_recency_sorts():
    cat = Catalog([mk("a", price=5, day=10), mk("b", price=3, day=30), mk("c", price=9, day=20)])
    user = UserState("u")
    asc = search(cat, "vaccine", SearchAlgorithm.PRICE_ASCENDING, user)
    assert [cat[i].price for i in asc.item_ids] == [3, 5, 9]
    new = search(cat, "vaccine", "newest_arrivals", user)
    assert [cat[i].arrival_date for i in new.item_ids] == [30, 20, 10]
    assert len(user.search_history) == 2


def test_unknown_algorithm_and_bad_k():
    cat = Catalog([mk("a")])
    with pytest.raises(DomainError):
        search(cat, "vaccine", "bestsellers", UserState("u"))
    with pytest.raises(DomainError):
        search(cat, "vaccine", "featured", UserState("u"), k=0)


def test_search_matches_terms_and_truncates():
    cat = Catalog([mk(f"i{n}", terms=("vaccine", "book")) for n in range(30)] + [mk("x", terms=("toaster",))])
    page = search(cat, "vaccines", "featured", UserState("u"), k=20)
    assert len(page.item_ids) == 20 and "x" not in page.item_ids
    assert search(cat, "unrelated words", "featured", UserState("u")).item_ids == ()


def test_featured_prefers_more_ratings():
    cfg = PersonalizationConfig(rating_weight=1, relevance_weight=0)
    a, b = mk("b-more", rating=5.0, num=1000), mk("a-few", rating=5.0, num=10)
    assert [i.item_id for i in rank_featured([b, a], UserState("u"), cfg)] == ["b-more", "a-few"]


def test_featured_zero_weights_orders_by_id():
    cfg = PersonalizationConfig(rating_weight=0, relevance_weight=0)
    items = [mk(x, rating=r, num=n) for x, r, n in (("c", 5, 900), ("a", 1, 1), ("b", 3, 40))]
    assert [i.item_id for i in rank_featured(items, UserState("u"), cfg)] == ["a", "b", "c"]


def test_featured_rating_dominated_equals_review_sort():
    cat = Catalog([mk(f"i{n}", rating=r, num=50) for n, r in enumerate((3.1, 4.9, 2.2, 4.0, 3.7))])
    cfg = PersonalizationConfig(rating_weight=1, relevance_weight=0)
    user = UserState("u")
    assert search(cat, "vaccine", "featured", user, config=cfg).item_ids == search(
        cat, "vaccine", "avg_customer_review", user, config=cfg
    ).item_ids


def test_rank_featured_matches_direct_scores(catalog):
    cfg = PersonalizationConfig(rating_weight=0.7, relevance_weight=1.3)
    matched = [i for i in catalog if "vaccine" in i.relevance_terms][:40]
    cap = catalog.popularity_cap

    def direct(item):
        overlap = len({"vaccine", "safety"} & item.stems) / 2
        pop = item.avg_rating * math.log1p(item.num_ratings) / (5 * cap) if item.num_ratings else 0.0
        return 1.3 * overlap + 0.7 * pop

    expected = sorted(matched, key=lambda i: (-direct(i), i.item_id))
    got = rank_featured(matched, UserState("u"), cfg, query="vaccine safety", catalog=catalog)
    assert [i.item_id for i in got] == [i.item_id for i in expected]


def test_rank_featured_needs_items():
    with pytest.raises(DomainError):
        rank_featured([], UserState("u"), PersonalizationConfig())


def test_five_algorithms_distinct():
    # price, recency, rating and popularity each induce a different order
    ratings = (4.0, 2.0, 5.0, 3.0, 1.5, 4.5)
    counts = (10, 5000, 3, 800, 20000, 1)
    days = (3, 1, 5, 2, 6, 4)
    cat = Catalog(
        [mk(f"i{n}", rating=ratings[n], num=counts[n], price=n + 1, day=days[n]) for n in range(6)]
    )
    orders = {a: search(cat, "vaccine", a, UserState("u")).item_ids for a in SearchAlgorithm}
    assert len(set(orders.values())) == 5
    assert orders[SearchAlgorithm.FEATURED] == ("i3", "i1", "i4", "i0", "i2", "i5")


@given(st.lists(st.integers(1, 10_000), min_size=1, max_size=25, unique=True))
def test_price_ascending_reverses_descending(prices):
    cat = Catalog([mk(f"i{n}", price=p) for n, p in enumerate(prices)])
    asc = search(cat, "vaccine", "price_ascending", UserState("u"), k=len(prices)).item_ids
    desc = search(cat, "vaccine", "price_descending", UserState("u"), k=len(prices)).item_ids
    assert asc == desc[::-1]


def test_zero_personalization_same_for_all_users(catalog):
    pro = [i.item_id for i in catalog if i.stance_class == 1][:5]
    anti = [i.item_id for i in catalog if i.stance_class == -1][:5]
    u1, u2 = UserState("u1"), UserState("u2")
    for i in pro:
        add_to_cart(u1, i, catalog)
    for i in anti:
        add_to_wishlist(u2, i, catalog)
    for alg in SearchAlgorithm:
        assert search(catalog, "vaccine", alg, u1).item_ids == search(catalog, "vaccine", alg, u2).item_ids


def test_positive_personalization_moves_results(catalog):
    cfg = PersonalizationConfig(search_personalization_weight=5.0)
    pro = [i.item_id for i in catalog if i.stance_class == 1][:12]
    anti = [i.item_id for i in catalog if i.stance_class == -1][:12]
    u1, u2 = UserState("u1"), UserState("u2")
    for i in pro:
        browse(u1, i, catalog)
    for i in anti:
        browse(u2, i, catalog)
    p1 = search(catalog, "vaccine", "featured", u1, config=cfg).item_ids
    p2 = search(catalog, "vaccine", "featured", u2, config=cfg).item_ids
    assert p1 != p2
    ann = catalog.annotations()
    assert sum(ann[i] == 1 for i in p1) > sum(ann[i] == 1 for i in p2)


# -- user actions -------------------------------------------------------------------


def test_action_composition():
    cat = Catalog([mk("x"), mk("y")])
    u = UserState("u")
    add_to_wishlist(u, "x", cat)
    assert u.browsing_history == ["x"] and u.wish_list == ["x"] and u.cart == []
    v = UserState("v")
    browse(v, "x", cat)
    browse(v, "x", cat)
    assert v.browsing_history == ["x", "x"] and v.wish_list == []
    w = UserState("w")
    add_to_cart(w, "y", cat)
    assert w.cart == ["y"] and w.wish_list == [] and w.browsing_history == ["y"]
    with pytest.raises(NotFoundError):
        browse(u, "nope", cat)


# -- homepage -----------------------------------------------------------------------


def score(cat, page):
    return fserp_ms(build_federated_page(page.components, cat.annotations()))


def test_homepage_shape(catalog):
    cfg = PersonalizationConfig()
    page = homepage(catalog, UserState("u"), cfg)
    assert len(page.components) == 3
    assert [h for h, _ in page.components] == [cfg.heading(i) for i in range(3)]
    ids = [i for _, shelf in page.components for i in shelf]
    assert len(ids) == 60 and len(set(ids)) == 60
    with pytest.raises(DomainError):
        homepage(catalog, UserState("u"), cfg, m=0)


def test_homepage_ignores_search_history(catalog):
    u = UserState("u")
    for q in ("vaccine injury", "vaccine safety"):
        search(catalog, q, "featured", u)
    assert homepage(catalog, u, now=5) == homepage(catalog, UserState("fresh"), now=5)


def test_history_free_homepage_is_neutral(catalog):
    assert score(catalog, homepage(catalog, UserState("u"))) == 0.0


def test_zero_bubble_weight_ignores_browsing(catalog):
    cfg = PersonalizationConfig(homepage_bubble_weight=0)
    u = UserState("u")
    for i in [i.item_id for i in catalog if i.stance_class == 1][:12]:
        add_to_cart(u, i, catalog)
    assert homepage(catalog, u, cfg, now=3) == homepage(catalog, UserState("v"), cfg, now=3)


def test_bubble_follows_history_stance(catalog):
    cfg = PersonalizationConfig(homepage_bubble_weight=5.0)
    pro, anti = UserState("p"), UserState("a")
    for i in [i.item_id for i in catalog if i.stance_class == 1][:12]:
        browse(pro, i, catalog)
    for i in [i.item_id for i in catalog if i.stance_class == -1][:12]:
        browse(anti, i, catalog)
    assert score(catalog, homepage(catalog, pro, cfg)) > score(catalog, homepage(catalog, anti, cfg))


def test_history_similarity_bounds(catalog):
    items = list(catalog)[:30]
    for item in items:
        s = history_similarity(item, items[:5])
        assert 0.0 <= s <= 1.0
    assert history_similarity(items[0], []) == 0.0
    assert history_similarity(items[0], [items[0]], 0.5) == 1.0


# -- marketplace -------------------------------------------------------------------


def drive(market, actions):
    for kind, acct, item in actions:
        getattr(market, kind)(acct, item, 0)
    return [market.homepage(a, 7) for a in ("a", "b")] + [
        market.search(a, "vaccine", alg, 20, 9) for a in ("a", "b") for alg in SearchAlgorithm
    ]


@settings(max_examples=15, deadline=None)
@given(st.data())
def test_marketplace_replay_and_search_neutrality(catalog, data):
    ids = [i.item_id for i in catalog][:60]
    actions = data.draw(
        st.lists(st.tuples(st.sampled_from(["browse", "add_to_wishlist", "add_to_cart"]),
                           st.sampled_from(["a", "b"]), st.sampled_from(ids)), max_size=10)
    )
    first = drive(SimulatedMarketplace(catalog), actions)
    again = drive(SimulatedMarketplace(catalog), actions)
    assert first == again
    serps = first[2:]
    n = len(SearchAlgorithm)
    assert [p.item_ids for p in serps[:n]] == [p.item_ids for p in serps[n:]]


def test_marketplace_unknown_item(catalog):
    with pytest.raises(NotFoundError):
        SimulatedMarketplace(catalog).add_to_cart("a", "nope", 0)


def test_session_reset_keeps_history(catalog):
    m = SimulatedMarketplace(catalog)
    item = next(iter(catalog)).item_id
    m.browse("a", item, 0)
    m.reset_session("a", 1440)
    assert m.user("a").browsing_history == [item]
    assert m.sessions["a"] == 1


# -- config ---------------------------------------------------------------------


def test_config_validation(tmp_path):
    with pytest.raises(ConfigurationError):
        PersonalizationConfig(homepage_bubble_weight=-1)
    with pytest.raises(ConfigurationError):
        PersonalizationConfig(rating_weight=float("inf"))
    with pytest.raises(ConfigurationError):
        PersonalizationConfig.from_dict({"bubble": 1})
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"homepage_bubble_weight": 0.5, "components": 2}))
    cfg = load_config(path)
    assert cfg.homepage_bubble_weight == 0.5 and cfg.components == 2
    assert PersonalizationConfig.from_dict(cfg.to_dict()) == cfg
    path.write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_config(path)
