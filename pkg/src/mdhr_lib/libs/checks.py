"""
Finite-difference checks of the model's building blocks on small random
instances, in 64-bit precision. Each check returns (operation, max relative
error) pairs; ``gradcheck_tolerance`` is the pass mark.
"""

from collections import OrderedDict

import numpy as np

from mdhr_lib.helpers.errors import UsageError
from mdhr_lib.helpers.general import make_rng
from mdhr_lib.helpers.logger import setup_logger
from mdhr_lib.libs import objective
from mdhr_lib.libs.model.head import TemporalHead
from mdhr_lib.libs.model.hsr import HierarchicalRelations, GraphAttention, build_edges, slice_regions, aux_predict, gat_forward
from mdhr_lib.libs.model.mfd import MfdConfig, MultiScaleDynamics
from mdhr_lib.libs.model.regions import RegionMap
from mdhr_lib.libs.tensor import Tensor, ops, precision, gradcheck, parameter_gradcheck

logger = setup_logger(__name__, "info")

gradcheck_tolerance = 1e-4
gradcheck_eps = 1e-5

small_region_map = RegionMap({"up": [1, 2], "mid": [6, 9], "low": [9, 12]})


def _projection(rng, shape):
    """Fixed random weights turning an output into a scalar with a nontrivial gradient."""
    return rng.normal(size=shape)

def check_mfd(seed=0):
    rng = make_rng(seed, "gradcheck", "mfd")
    results = []
    with precision("float64"):
        config = MfdConfig(k=1, target_channels=3, target_spatial=7, resize_strides=[2, 1], in_channels=[2, 3])
        module = MultiScaleDynamics(config, rng)
        T = 2
        shapes = [(1, T + 2, 2, 14, 14), (1, T + 2, 3, 7, 7)]
        sizes = [int(np.prod(s)) for s in shapes]
        point = rng.normal(size=sum(sizes))
        G_proj = _projection(rng, (T, 3, 7, 7))
        W_proj = _projection(rng, (T, 2, 7, 7))

        def split(x):
            return [ops.reshape(x[sum(sizes[:i]):sum(sizes[:i + 1])], s) for i, s in enumerate(shapes)]

        def loss(x):
            G, weights = module(split(x), T)
            return ops.add(ops.sum(ops.mul(G, G_proj)), ops.sum(ops.mul(weights, W_proj)))

        results.append(("mfd.forward (inputs)", gradcheck(loss, point, gradcheck_eps)))
        fixed = Tensor(point)
        for name, p in module.named_parameters():
            results.append(("mfd.{}".format(name), parameter_gradcheck(lambda: loss(fixed), p, gradcheck_eps, 20, rng)))

        concat = MultiScaleDynamics(config, rng, fusion="concat")

        def concat_loss(x):
            return ops.sum(ops.mul(concat(split(x), T)[0], G_proj))

        results.append(("mfd.concat (inputs)", gradcheck(concat_loss, point, gradcheck_eps)))
        results.append(("mfd.concat.project", parameter_gradcheck(lambda: concat_loss(fixed), concat.project.weight, gradcheck_eps, 20, rng)))
    return results

def check_hsr(seed=0):
    rng = make_rng(seed, "gradcheck", "hsr")
    results = []
    with precision("float64"):
        module = HierarchicalRelations(small_region_map, 3, 4, rng)
        G_point = rng.normal(size=(2, 3, 7, 7))
        projections = {name: _projection(rng, (2, small_region_map.combination_size(name))) for name in ("up", "mid", "low")}
        node_proj = _projection(rng, (2, small_region_map.N, 4))

        def aux_loss(G):
            total = None
            slices = slice_regions(G)
            for name in projections:
                dist = aux_predict(module.predictors, slices[name], name)
                term = ops.sum(ops.mul(dist, projections[name]))
                total = term if total is None else ops.add(total, term)
            return total

        def node_loss(G):
            return ops.sum(ops.mul(module(G).nodes, node_proj))

        results.append(("hsr.aux_predict", gradcheck(aux_loss, G_point, gradcheck_eps)))
        results.append(("hsr.afe+gat", gradcheck(node_loss, G_point, gradcheck_eps)))

        attention = GraphAttention(4, rng)
        nodes = rng.normal(size=(2, 5, 4))
        active = rng.random((2, 5)) < 0.5
        adjacency = build_edges(active, np.array([0, 0, 1, 2, 2]))
        out_proj = _projection(rng, (2, 5, 4))

        def gat_loss(x):
            return ops.sum(ops.mul(gat_forward(attention, x, adjacency), out_proj))

        results.append(("hsr.gat_forward", gradcheck(gat_loss, nodes, gradcheck_eps)))
        fixed = Tensor(nodes)
        results.append(("hsr.gat.attention", parameter_gradcheck(lambda: gat_loss(fixed), attention.attention, gradcheck_eps)))
        results.append(("hsr.gat.project", parameter_gradcheck(lambda: gat_loss(fixed), attention.project.weight, gradcheck_eps)))
    return results

def check_head(seed=0):
    rng = make_rng(seed, "gradcheck", "head")
    results = []
    with precision("float64"):
        head = TemporalHead([1, 2], 4, rng)
        nodes = rng.normal(size=(1, 6, 2, 4)) + 0.5
        proj = _projection(rng, (1, 6, 2))

        def loss(x):
            return ops.sum(ops.mul(head(x), proj))

        results.append(("head.tcn+sc", gradcheck(loss, nodes, gradcheck_eps)))
        fixed = Tensor(nodes)
        results.append(("head.anchors", parameter_gradcheck(lambda: loss(fixed), head.anchors, gradcheck_eps)))
    return results

def check_loss(seed=0):
    rng = make_rng(seed, "gradcheck", "loss")
    results = []
    with precision("float64"):
        P = rng.uniform(0.05, 0.95, size=(2, 3, 4))
        Y = rng.random((2, 3, 4)) < 0.4
        weights = rng.uniform(0.5, 2.0, size=4)
        results.append(("objective.au_loss", gradcheck(lambda p: objective.au_loss(p, Y, weights), P, gradcheck_eps)))

        logits = rng.normal(size=(2, 3, 8))
        targets = {"up": rng.integers(0, 8, size=(2, 3))}

        def sub(x):
            return objective.sub_loss(OrderedDict([("up", ops.softmax(x, axis=-1))]), targets)

        results.append(("objective.sub_loss", gradcheck(sub, logits, gradcheck_eps)))
    return results


checks = OrderedDict([
    ("mfd", check_mfd),
    ("hsr", check_hsr),
    ("head", check_head),
    ("loss", check_loss),
])

def run_checks(module="all", seed=0):
    if module == "all":
        names = list(checks)
    elif module in checks:
        names = [module]
    else:
        raise UsageError("unknown gradcheck module {!r}, choose from {}".format(module, list(checks) + ["all"]))
    results = []
    for name in names:
        results.extend(checks[name](seed))
    return results
