"""
Facial regions, which AUs belong to them, and the bit coding of per-region
AU combinations.
"""

from collections import OrderedDict

import numpy as np

from mdhr_lib.helpers.errors import ConfigError, DomainError

region_names = ("up", "mid", "low")

# full mapping table; an AU may sit in two neighbouring regions (AU9)
FULL_REGION_MAP = OrderedDict([
    ("up", [1, 2, 4, 7]),
    ("mid", [6, 9]),
    ("low", [9, 10, 12, 14, 15, 17, 23, 24, 25, 26]),
])

BP4D_AUS = [1, 2, 4, 6, 7, 10, 12, 14, 15, 17, 23, 24]
DISFA_AUS = [1, 2, 4, 6, 9, 12, 25, 26]
SYNTHETIC_AUS = [1, 2, 4, 6, 7, 9, 12, 25]


class RegionMap(object):
    """
    Ordered AU lists for the upper, middle and lower face. The order inside a
    region fixes the combination bit encoding. Each AU is *homed* in the
    first region that lists it; the home decides which slice its feature
    extractor sees and which region it belongs to for graph edges. Node order
    (``au_ids``) is AUs grouped by home region, in listing order.
    """

    def __init__(self, regions):
        self.regions = OrderedDict()
        for name in region_names:
            if name not in regions:
                raise ConfigError("model.region_map.{}".format(name), "missing region")
            aus = [int(au) for au in regions[name]]
            if len(set(aus)) != len(aus):
                raise ConfigError("model.region_map.{}".format(name), "duplicate AU in {}".format(aus))
            self.regions[name] = aus
        unknown = sorted(set(regions) - set(region_names))
        if unknown:
            raise ConfigError("model.region_map", "unknown regions {}".format(unknown))
        self.home = OrderedDict()
        for name in region_names:
            for au in self.regions[name]:
                self.home.setdefault(au, name)
        if not self.home:
            raise ConfigError("model.region_map", "no AUs")
        self.au_ids = [au for name in region_names for au in self.regions[name] if self.home[au] == name]

    @classmethod
    def restricted(cls, au_ids, table=FULL_REGION_MAP):
        """The mapping table cut down to the AUs a dataset labels."""
        au_ids = set(au_ids)
        missing = sorted(au_ids - {au for aus in table.values() for au in aus})
        if missing:
            raise ConfigError("model.region_map", "AUs {} aren't in the mapping table".format(missing))
        return cls(OrderedDict((name, [au for au in table[name] if au in au_ids]) for name in region_names))

    @property
    def N(self):
        return len(self.au_ids)

    def index_of(self, au):
        return self.au_ids.index(au)

    def homed_in(self, region):
        return [au for au in self.au_ids if self.home[au] == region]

    def home_indices(self):
        """Region index (0 = up, 1 = mid, 2 = low) of every node."""
        return np.array([region_names.index(self.home[au]) for au in self.au_ids])

    def combination_size(self, region):
        return 2 ** len(self.regions[region])

    def validate_au_ids(self, au_ids, field="au_ids"):
        if [int(a) for a in au_ids] != self.au_ids:
            raise ConfigError(field, "AU list {} doesn't match the region map order {}".format(list(au_ids), self.au_ids))

    def to_dict(self):
        return OrderedDict((name, list(aus)) for name, aus in self.regions.items())

    def __eq__(self, other):
        return isinstance(other, RegionMap) and self.regions == other.regions

    def __repr__(self):
        return "RegionMap({})".format(dict(self.regions))


BP4D_REGION_MAP = RegionMap.restricted(BP4D_AUS)
DISFA_REGION_MAP = RegionMap.restricted(DISFA_AUS)
SYNTHETIC_REGION_MAP = RegionMap.restricted(SYNTHETIC_AUS)


def region_rows(height):
    """
    Row ranges of the three overlapping bands: [0, 3h/7), [2h/7, 5h/7), [4h/7, h).

    >>> region_rows(7)
    OrderedDict([('up', (0, 3)), ('mid', (2, 5)), ('low', (4, 7))])
    """
    if height != 7:
        raise ConfigError("mfd.target_spatial", "region slicing needs height 7, got {}".format(height))
    return OrderedDict([
        ("up", (0, 3 * height // 7)),
        ("mid", (2 * height // 7, 5 * height // 7)),
        ("low", (4 * height // 7, height)),
    ])


def encode_combination(bits):
    """
    Bit i (the region's i-th AU) contributes 2**i.

    >>> encode_combination([1, 0, 0, 1])
    9
    """
    index = 0
    for i, bit in enumerate(bits):
        if bit:
            index |= 1 << i
    return index

def decode_combination(index, n_sub):
    """
    >>> decode_combination(9, 4)
    [True, False, False, True]
    """
    if not 0 <= index < 2 ** n_sub:
        raise DomainError("combination index {} out of range for {} AUs".format(index, n_sub))
    return [bool((index >> i) & 1) for i in range(n_sub)]

def encode_combinations(bits):
    """Vectorized ``encode_combination`` over the last axis of a 0/1 array."""
    bits = np.asarray(bits).astype(np.int64)
    weights = 1 << np.arange(bits.shape[-1], dtype=np.int64)
    return (bits * weights).sum(axis=-1)

def decode_combinations(indices, n_sub):
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= 2 ** n_sub):
        raise DomainError("combination index out of range for {} AUs".format(n_sub))
    return ((indices[..., None] >> np.arange(n_sub)) & 1).astype(bool)
