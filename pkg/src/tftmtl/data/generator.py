"""Synthetic product-day data with coupled demand and (s, S) inventory dynamics.

Per product and day::

    demand    = base * weekly[dow] * (1 + holiday_lift * is_holiday)
                * (price / ref_price) ** elasticity
                * (1 + promotion_lift * discount_rate) * exp(noise * eps)
    sales     = min(round(demand), inventory)
    inventory' = inventory - sales + arrivals

An order of ``S - position`` is placed at the end of a day when the
inventory position (on hand + on order) falls below ``s``; it arrives
``lead_time`` days later. Units are whole numbers, so conservation holds
exactly in floating point.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from ..errors import ValidationError
from .schema import COLUMNS

CATEGORIES = ("Electronics", "Home Appliances", "Office Supplies", "Personal Care")
DEFAULT_WEEKLY = (0.85, 0.9, 0.95, 1.0, 1.1, 1.3, 1.25)  # Monday .. Sunday


@dataclass(frozen=True)
class GeneratorConfig:
    num_products: int = 20
    num_days: int = 540
    seed: int = 0
    start_date: str = "2021-01-01"
    base_demand: tuple[float, float] = (40.0, 160.0)
    price_range: tuple[float, float] = (15.0, 250.0)
    price_elasticity: float = -1.2
    price_change_prob: float = 0.01
    promotion_lift: float = 1.5
    promotion_prob: float = 0.03
    promotion_days: tuple[int, int] = (3, 10)
    discount_range: tuple[float, float] = (0.1, 0.35)
    holiday_lift: float = 0.6
    include_holidays: bool = True
    weekly_amplitudes: tuple[float, ...] = DEFAULT_WEEKLY
    noise_scale: float = 0.08
    lead_time_range: tuple[int, int] = (3, 9)
    reorder_cover_days: float = 1.0
    order_up_to_cover_days: float = 14.0
    reorder_point: tuple[float, ...] | None = None
    order_up_to: tuple[float, ...] | None = None
    brands_per_category: int = 3
    min_days: int = 43

    def __post_init__(self) -> None:
        if self.num_products < 1:
            raise ValidationError(f"num_products must be positive, got {self.num_products}")
        if self.num_days < self.min_days:
            raise ValidationError(
                f"num_days {self.num_days} is shorter than lookback + horizon + 1 = {self.min_days}"
            )
        if len(self.weekly_amplitudes) != 7 or min(self.weekly_amplitudes) <= 0:
            raise ValidationError("weekly_amplitudes needs 7 positive multipliers")
        if self.price_elasticity >= 0:
            raise ValidationError("price_elasticity must be negative")
        if self.promotion_lift <= 0 or self.holiday_lift < 0:
            raise ValidationError("promotion_lift must be positive and holiday_lift nonnegative")
        lo, hi = self.base_demand
        if not 0 < lo <= hi:
            raise ValidationError(f"bad base_demand range {self.base_demand}")
        if not 0 < self.price_range[0] <= self.price_range[1]:
            raise ValidationError(f"bad price_range {self.price_range}")
        if not 0 <= self.discount_range[0] <= self.discount_range[1] <= 1:
            raise ValidationError(f"bad discount_range {self.discount_range}")
        if self.lead_time_range[0] < 1 or self.lead_time_range[1] < self.lead_time_range[0]:
            raise ValidationError(f"bad lead_time_range {self.lead_time_range}")
        if self.noise_scale < 0:
            raise ValidationError("noise_scale must be nonnegative")
        if (self.reorder_point is None) != (self.order_up_to is None):
            raise ValidationError("reorder_point and order_up_to must be given together")
        if self.reorder_point is not None:
            if len(self.reorder_point) != self.num_products or len(self.order_up_to) != self.num_products:
                raise ValidationError("explicit (s, S) lists need one entry per product")
            if any(s >= S for s, S in zip(self.reorder_point, self.order_up_to)):
                raise ValidationError("reorder point s must be below order-up-to level S")
        elif self.reorder_cover_days >= self.order_up_to_cover_days:
            raise ValidationError("reorder_cover_days must be below order_up_to_cover_days")
        try:
            dt.date.fromisoformat(self.start_date)
        except ValueError:
            raise ValidationError(f"start_date {self.start_date!r} is not ISO-8601") from None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> GeneratorConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown generator options: {sorted(unknown)}")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**kw)


@dataclass
class SyntheticData:
    records: pd.DataFrame
    arrivals: np.ndarray  # units arriving at the end of each row's day
    reorder_point: np.ndarray = field(repr=False)
    order_up_to: np.ndarray = field(repr=False)


def _nth_weekday(year: int, month: int, weekday: int, n: int) -> dt.date:
    first = dt.date(year, month, 1)
    offset = (weekday - first.weekday()) % 7
    return first + dt.timedelta(days=offset + 7 * (n - 1))


def _last_weekday(year: int, month: int, weekday: int) -> dt.date:
    nxt = dt.date(year + (month == 12), month % 12 + 1, 1)
    last = nxt - dt.timedelta(days=1)
    return last - dt.timedelta(days=(last.weekday() - weekday) % 7)


def holiday_calendar(years) -> set[dt.date]:
    """US retail holidays plus the two-day July sales event."""
    days: set[dt.date] = set()
    for y in years:
        thanksgiving = _nth_weekday(y, 11, 3, 4)
        prime_day = _nth_weekday(y, 7, 1, 2)
        days |= {
            dt.date(y, 1, 1),
            _last_weekday(y, 5, 0),
            dt.date(y, 7, 4),
            prime_day,
            prime_day + dt.timedelta(days=1),
            _nth_weekday(y, 9, 0, 1),
            thanksgiving,
            thanksgiving + dt.timedelta(days=1),
            thanksgiving + dt.timedelta(days=4),
            dt.date(y, 12, 24),
            dt.date(y, 12, 25),
            dt.date(y, 12, 31),
        }
    return days


def _promotion_track(rng: np.random.Generator, cfg: GeneratorConfig, n: int) -> np.ndarray:
    discount = np.zeros(n)
    t = 0
    while t < n:
        if cfg.promotion_prob > 0 and rng.random() < cfg.promotion_prob:
            length = int(rng.integers(cfg.promotion_days[0], cfg.promotion_days[1] + 1))
            rate = round(float(rng.uniform(*cfg.discount_range)), 2)
            discount[t : t + length] = rate
            t += length
        else:
            t += 1
    return discount


def _price_track(rng: np.random.Generator, cfg: GeneratorConfig, ref: float, n: int) -> np.ndarray:
    price = np.empty(n)
    current = ref
    for t in range(n):
        if cfg.price_change_prob > 0 and rng.random() < cfg.price_change_prob:
            current = float(np.clip(current * rng.uniform(0.92, 1.08), 0.7 * ref, 1.3 * ref))
        price[t] = round(current, 2)
    return price


def simulate_inventory(demand: np.ndarray, s: float, S: float, lead_time: int):
    """Run the (s, S) policy. Returns ``(inventory_start, sales, arrivals)`` per day."""
    n = demand.size
    inventory = np.empty(n)
    sales = np.empty(n)
    arrivals = np.zeros(n)
    pending = np.zeros(n + lead_time + 1)
    on_hand = float(S)
    on_order = 0.0
    for t in range(n):
        inventory[t] = on_hand
        sold = min(float(demand[t]), on_hand)
        sales[t] = sold
        arrivals[t] = pending[t]
        on_order -= pending[t]
        on_hand = on_hand - sold + arrivals[t]
        position = on_hand + on_order
        if position < s:
            qty = float(S - position)
            pending[t + lead_time] += qty
            on_order += qty
    return inventory, sales, arrivals


def generate_synthetic(cfg: GeneratorConfig) -> SyntheticData:
    rng = np.random.default_rng(cfg.seed)
    start = dt.date.fromisoformat(cfg.start_date)
    days = [start + dt.timedelta(days=i) for i in range(cfg.num_days)]
    dow = np.array([d.isoweekday() for d in days])
    holidays = holiday_calendar(range(start.year, days[-1].year + 1)) if cfg.include_holidays else set()
    is_holiday = np.array([int(d in holidays) for d in days])
    date_str = [d.isoformat() for d in days]
    weekly = np.asarray(cfg.weekly_amplitudes)[dow - 1]

    frames, arrivals_all, s_all, S_all = [], [], [], []
    for i in range(cfg.num_products):
        category = CATEGORIES[i % len(CATEGORIES)]
        brand = f"{category.split()[0]}-{int(rng.integers(1, cfg.brands_per_category + 1))}"
        base = float(rng.uniform(*cfg.base_demand))
        ref_price = round(float(rng.uniform(*cfg.price_range)), 2)
        lead = int(rng.integers(cfg.lead_time_range[0], cfg.lead_time_range[1] + 1))
        views_per_unit = float(rng.uniform(8.0, 15.0))
        ad_base = float(rng.uniform(0.05, 0.2)) * ref_price
        if cfg.reorder_point is not None:
            s, S = float(cfg.reorder_point[i]), float(cfg.order_up_to[i])
        else:
            s = round(base * lead * cfg.reorder_cover_days)
            S = round(base * (lead + cfg.order_up_to_cover_days))

        discount = _promotion_track(rng, cfg, cfg.num_days)
        price = _price_track(rng, cfg, ref_price, cfg.num_days)
        noise = rng.standard_normal(cfg.num_days)
        expected = (base * weekly * (1.0 + cfg.holiday_lift * is_holiday)
                    * (price / ref_price) ** cfg.price_elasticity
                    * (1.0 + cfg.promotion_lift * discount))
        demand = np.round(expected * np.exp(cfg.noise_scale * noise))
        inventory, sales, arrivals = simulate_inventory(demand, s, S, lead)

        shared = np.exp(0.5 * cfg.noise_scale * rng.standard_normal((2, cfg.num_days)))
        page_views = np.round(expected * views_per_unit * shared[0])
        ad_spend = np.round(ad_base * (1.0 + 2.0 * discount) * np.sqrt(expected / base) * shared[1], 2)

        frames.append(pd.DataFrame({
            "date": date_str,
            "product_id": f"B0{i:08d}",
            "daily_sales": sales,
            "inventory_level": inventory,
            "price": price,
            "discount_rate": discount,
            "ad_spend": ad_spend,
            "page_views": page_views,
            "category": category,
            "brand": brand,
            "is_holiday": is_holiday,
            "day_of_week": dow,
            "lead_time": float(lead),
        }))
        arrivals_all.append(arrivals)
        s_all.append(s)
        S_all.append(S)

    records = pd.concat(frames, ignore_index=True).loc[:, list(COLUMNS)]
    return SyntheticData(records, np.concatenate(arrivals_all), np.array(s_all), np.array(S_all))
