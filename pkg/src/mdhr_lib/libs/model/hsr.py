"""
Hierarchical spatio-temporal relationships: the fused feature map is cut
into upper, middle and lower bands, every AU gets a local feature from its
home band, each band predicts which AU combination is active, and a graph
attention layer lets AUs look at the active AUs of the other bands.
"""

from collections import OrderedDict, namedtuple

import numpy as np

from mdhr_lib.helpers.errors import ConfigError, DimensionError
from mdhr_lib.helpers.logger import setup_logger
from mdhr_lib.libs.model.module import Module, Parameter, Conv2d, Linear, kaiming_uniform
from mdhr_lib.libs.model.regions import region_names, region_rows, decode_combinations
from mdhr_lib.libs.tensor import ops

logger = setup_logger(__name__, "warning")

HsrOutput = namedtuple("HsrOutput", ["nodes", "local_nodes", "distributions", "active", "adjacency"])


def slice_regions(G):
    """
    Cuts [..., c, 7, 7] along the height axis into the three overlapping
    bands (rows 2 and 4 are shared). Returns an OrderedDict up/mid/low.
    """
    if G.ndim < 3:
        raise DimensionError("slice_regions needs [..., c, h, w], got {}".format(G.shape))
    rows = region_rows(G.shape[-2])
    return OrderedDict((name, G[..., start:stop, :]) for name, (start, stop) in rows.items())


class AuFeatureExtractors(Module):
    """One 1x1 conv + GAP per AU, applied to the AU's home band."""

    def __init__(self, region_map, in_channels, width, rng):
        self.region_map = region_map
        self.convs = OrderedDict()
        for au in region_map.au_ids:
            self.convs[str(au)] = Conv2d(rng, in_channels, width, 1)

    def forward(self, slices):
        """slices: up/mid/low bands [..., c, h_r, 7] -> nodes [..., N, b] in ``au_ids`` order."""
        for name in region_names:
            if name not in slices:
                raise ConfigError("model.region_map.{}".format(name), "no slice for region")
        groups = []
        for name in region_names:
            aus = self.region_map.homed_in(name)
            if not aus:
                continue
            band = slices[name]
            lead = band.shape[:-3]
            flat = ops.reshape(band, (-1,) + band.shape[-3:])
            # the band's per-AU kernels run as one convolution
            convs = [self.convs[str(au)] for au in aus]
            kernel = ops.concat([conv.weight for conv in convs], axis=0)
            bias = ops.concat([conv.bias for conv in convs], axis=0)
            v = ops.global_avg_pool_2d(ops.conv2d(flat, kernel, bias))
            groups.append(ops.reshape(v, lead + (len(aus), -1)))
        # au_ids are grouped by home band, so band order is node order
        return ops.concat(groups, axis=-2)


def afe_extract(extractors, slices):
    return extractors(slices)


class CombinationPredictors(Module):
    """
    Per band: GAP, a fully-connected layer onto the 2**N_sub combinations of
    the band's AUs, softmax. Bands without AUs get no predictor.
    """

    def __init__(self, region_map, in_channels, rng):
        self.region_map = region_map
        self.heads = OrderedDict()
        for name in region_names:
            if region_map.regions[name]:
                self.heads[name] = Linear(rng, in_channels, region_map.combination_size(name))

    def predict(self, band, region):
        if region not in self.heads:
            raise ConfigError("model.region_map.{}".format(region), "region has no AUs to predict")
        return ops.softmax(self.heads[region](ops.global_avg_pool_2d(band)), axis=-1)

    def forward(self, slices):
        return OrderedDict((name, self.predict(slices[name], name)) for name in self.heads)


def aux_predict(predictors, band, region):
    return predictors.predict(band, region)


def decide_activation(distributions, region_map):
    """
    First-stage decision per AU: each band's most likely combination (ties
    go to the lowest index), decoded, and every AU reads the bit of its home
    band. ``distributions`` maps region -> array-like [..., 2**N_sub].
    Returns a boolean array [..., N].
    """
    decoded = {}
    lead = None
    for name, dist in distributions.items():
        probs = dist.data if hasattr(dist, "data") else np.asarray(dist)
        if probs.shape[-1] != region_map.combination_size(name):
            raise DimensionError("{} distribution has {} classes, expected {}".format(name, probs.shape[-1], region_map.combination_size(name)))
        decoded[name] = decode_combinations(np.argmax(probs, axis=-1), len(region_map.regions[name]))
        lead = probs.shape[:-1]
    if lead is None:
        lead = ()
    active = np.zeros(lead + (region_map.N,), dtype=bool)
    for n, au in enumerate(region_map.au_ids):
        home = region_map.home[au]
        if home in decoded:
            active[..., n] = decoded[home][..., region_map.regions[home].index(au)]
    return active


def build_edges(active, home):
    """
    Directed adjacency [..., N, N]: ``adj[..., m, n]`` is True when AU m feeds
    AU n, which is when m is active and the two AUs are homed in different
    bands. Every node also gets a self-loop.

    >>> build_edges(np.array([True, False, False]), np.array([0, 0, 1])).astype(int)
    array([[1, 0, 1],
           [0, 1, 0],
           [0, 0, 1]])
    """
    active = np.asarray(active, dtype=bool)
    home = np.asarray(home)
    if active.shape[-1] != home.shape[0]:
        raise DimensionError("{} activation flags for {} AUs".format(active.shape[-1], home.shape[0]))
    cross = home[:, None] != home[None, :]
    adjacency = active[..., :, None] & cross
    return adjacency | np.eye(home.shape[0], dtype=bool)


def _swap_last(x):
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return ops.transpose(x, axes)


class GraphAttention(Module):
    """
    Single-head graph attention. e[n, m] = LeakyReLU(r . [W v_n || W v_m]) is
    normalized over n's neighbours (the m with an edge m -> n) and the
    attended sum goes through ELU. The output replaces the input node.
    """

    def __init__(self, width, rng, slope=0.2):
        self.width = width
        self.slope = slope
        self.project = Linear(rng, width, width, bias=False)
        self.attention = Parameter(kaiming_uniform(rng, (1, 2 * width), 2 * width))

    def attention_weights(self, projected, adjacency):
        b = self.width
        receiver = ops.matvec_linear(projected, self.attention[:, :b])
        sender = ops.matvec_linear(projected, self.attention[:, b:])
        logits = ops.leaky_relu(ops.add(receiver, _swap_last(sender)), self.slope)
        # softmax runs over row n, so the mask is the transposed adjacency
        mask = np.swapaxes(np.asarray(adjacency, dtype=bool), -1, -2)
        assert mask.any(axis=-1).all(), "graph node without neighbours"
        return ops.softmax(logits, axis=-1, mask=mask)

    def forward(self, nodes, adjacency):
        if nodes.shape[-1] != self.width:
            raise DimensionError("nodes have width {}, attention expects {}".format(nodes.shape[-1], self.width))
        N = nodes.shape[-2]
        if np.shape(adjacency)[-2:] != (N, N):
            raise DimensionError("adjacency {} doesn't fit {} nodes".format(np.shape(adjacency), N))
        projected = self.project(nodes)
        alpha = self.attention_weights(projected, adjacency)
        return ops.elu(ops.matmul(alpha, projected))


def gat_forward(attention, nodes, adjacency):
    return attention(nodes, adjacency)


class HierarchicalRelations(Module):

    def __init__(self, region_map, in_channels, width, rng, aux=True, crm=True, slope=0.2):
        if crm and not aux:
            raise ConfigError("model.crm", "cross-region attention needs the combination predictors (aux)")
        self.region_map = region_map
        self.extractors = AuFeatureExtractors(region_map, in_channels, width, rng)
        self.predictors = CombinationPredictors(region_map, in_channels, rng) if aux else None
        self.attention = GraphAttention(width, rng, slope) if crm else None
        self._home = region_map.home_indices()

    def forward(self, G):
        """G: [B*T, c, 7, 7] -> HsrOutput with nodes [B*T, N, b]."""
        slices = slice_regions(G)
        local = self.extractors(slices)
        distributions = self.predictors(slices) if self.predictors is not None else OrderedDict()
        active = adjacency = None
        nodes = local
        if self.attention is not None:
            active = decide_activation(distributions, self.region_map)
            adjacency = build_edges(active, self._home)
            nodes = self.attention(local, adjacency)
        return HsrOutput(nodes, local, distributions, active, adjacency)
