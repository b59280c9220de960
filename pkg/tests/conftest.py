from __future__ import annotations

from pathlib import Path

import pytest

from causalpm.catalog import left_outer_join, load_catalog
from causalpm.ceg import build_ceg_db, case_projection
from causalpm.cpt import parse_cpt

DATA = Path(__file__).parent / "data"
SHOP = DATA / "shop" / "config.json"

RPO, POI, RS, RCP = "Receive Purchase Order", "Pick Order Item", "Register Shipment", "Register Customer Pickup"


@pytest.fixture(scope="session")
def shop_loaded():
    return load_catalog(None, SHOP)


@pytest.fixture(scope="session")
def shop_cpt():
    return parse_cpt(SHOP)


@pytest.fixture(scope="session")
def shop_join(shop_loaded):
    catalog, instances = shop_loaded
    return left_outer_join(catalog, instances)


@pytest.fixture(scope="session")
def shop_db(shop_loaded, shop_join, shop_cpt):
    return build_ceg_db(shop_join, shop_cpt, shop_loaded[1])


@pytest.fixture(scope="session")
def shop_views(shop_db):
    return case_projection(shop_db)


@pytest.fixture(scope="session")
def ceg1(shop_views):
    return shop_views.by_key("purchase_orders:or1")


@pytest.fixture(scope="session")
def ceg2(shop_views):
    return shop_views.by_key("purchase_orders:or2")


@pytest.fixture(scope="session")
def ceg3(shop_views):
    return shop_views.by_key("purchase_orders:or3")
