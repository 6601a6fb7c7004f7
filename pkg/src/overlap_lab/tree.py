"""Classification tree explaining overlap-region membership.

Units are labeled by whether they fall in the estimated overlap region
(trimming region or SVM margin) and a binary CART-style tree is grown on the
covariates to describe that membership: greedy Gini splits, thresholds at
midpoints between consecutive distinct sorted values, deterministic
tie-breaking (lowest feature index, then lowest threshold), and weakest-link
cost-complexity pruning.

Split selection is exact: candidate scores are compared as integer fractions
(class counts are integers), so ties cannot be scrambled by float rounding.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, SchemaMismatchError, SingleClassError
from .propensity import MarginSet, TrimmingRegion


@dataclass(frozen=True)
class OverlapLabels:
    """Boolean overlap-membership label per unit."""

    ystar: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ystar", np.asarray(self.ystar, dtype=bool))


def overlap_labels(region, n_units: int) -> OverlapLabels:
    """Label units by membership in a trimming region or margin set."""
    if isinstance(region, TrimmingRegion):
        if region.member.size != n_units:
            raise InvalidConfigError("region size does not match the dataset")
        return OverlapLabels(ystar=region.member.copy())
    if isinstance(region, MarginSet):
        return OverlapLabels(ystar=region.member_mask(n_units))
    raise InvalidConfigError("region must be a TrimmingRegion or MarginSet")


@dataclass
class TreeNode:
    n: int
    counts: tuple[int, int]  # (# label False, # label True)
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    @property
    def prediction(self) -> bool:
        return self.counts[1] > self.counts[0]

    @property
    def misclassified(self) -> int:
        return self.n - max(self.counts)


@dataclass
class Tree:
    root: TreeNode
    n_features: int

    def nodes(self) -> list[TreeNode]:
        """Preorder node list."""
        out: list[TreeNode] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            out.append(node)
            if not node.is_leaf:
                stack.extend((node.right, node.left))
        return out

    @property
    def n_nodes(self) -> int:
        return len(self.nodes())

    @property
    def n_internal(self) -> int:
        return sum(not n.is_leaf for n in self.nodes())


def _counts(labels: np.ndarray) -> tuple[int, int]:
    pos = int(labels.sum())
    return (labels.size - pos, pos)


def _best_split(z: np.ndarray, labels: np.ndarray, min_leaf: int):
    """Best (feature, threshold) by Gini, or None when no feasible split.

    Minimizing the weighted child Gini is equivalent to maximizing
    s = (cL0^2 + cL1^2)/nL + (cR0^2 + cR1^2)/nR; a float sweep locates the
    near-optimal candidates and the winner among them is decided by exact
    integer comparison of s as a fraction, first-come on ties (features and
    thresholds are scanned in increasing order).
    """
    n = labels.size
    total1 = int(labels.sum())
    total0 = n - total1
    per_feature = []  # (j, thresholds, n_left, c_left1, s)
    smax = -np.inf
    for j in range(z.shape[1]):
        order = np.argsort(z[:, j], kind="stable")
        v = z[order, j]
        c1 = np.cumsum(labels[order].astype(np.int64))
        cut = np.flatnonzero(v[:-1] < v[1:])  # split between cut and cut+1
        if cut.size == 0:
            continue
        n_left = cut + 1
        keep = (n_left >= min_leaf) & (n - n_left >= min_leaf)
        cut = cut[keep]
        if cut.size == 0:
            continue
        n_left = n_left[keep]
        c_left1 = c1[cut]
        c_left0 = n_left - c_left1
        c_right1 = total1 - c_left1
        c_right0 = total0 - c_left0
        s = (c_left0**2 + c_left1**2) / n_left + (c_right0**2 + c_right1**2) / (
            n - n_left
        )
        per_feature.append((j, 0.5 * (v[cut] + v[cut + 1]), n_left, c_left1, s))
        smax = max(smax, float(s.max()))
    if not per_feature:
        return None

    # exact integer comparison among the float near-ties only
    def exact_score(n_left: int, c_left1: int) -> tuple[int, int]:
        c_left0 = n_left - c_left1
        n_right = n - n_left
        c_right1 = total1 - c_left1
        c_right0 = total0 - c_left0
        num = (c_left0**2 + c_left1**2) * n_right + (c_right0**2 + c_right1**2) * n_left
        return num, n_left * n_right

    tie_cut = smax - 1e-9 * (1.0 + abs(smax))
    best = None  # (num, den, feature, threshold)
    for j, thresholds, n_left, c_left1, s in per_feature:
        for i in np.flatnonzero(s >= tie_cut):
            num, den = exact_score(int(n_left[i]), int(c_left1[i]))
            if best is None or num * best[1] > best[0] * den:
                best = (num, den, j, float(thresholds[i]))
    return best[2], best[3]


def fit_tree(
    z: np.ndarray,
    labels,
    min_leaf: int = 1,
    max_depth: int | None = None,
) -> Tree:
    """Grow the greedy Gini tree; stops at purity, min_leaf or max_depth.

    Zero-gain splits are allowed on impure nodes (they are what solve
    XOR-like membership patterns at depth 2); pruning removes the useless
    ones afterwards.
    """
    if isinstance(labels, OverlapLabels):
        labels = labels.ystar
    labels = np.asarray(labels, dtype=bool)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape[0] == 1 and labels.size > 1:
        z = z.T
    if z.shape[0] != labels.size:
        raise InvalidConfigError("covariate rows and labels must align")
    if min_leaf < 1:
        raise InvalidConfigError("min_leaf must be >= 1")
    if labels.all() or not labels.any():
        raise SingleClassError("labels are single-class; nothing to explain")

    def build(rows: np.ndarray, depth: int) -> TreeNode:
        node_labels = labels[rows]
        counts = _counts(node_labels)
        node = TreeNode(n=rows.size, counts=counts)
        if counts[0] == 0 or counts[1] == 0:
            return node
        if max_depth is not None and depth >= max_depth:
            return node
        if rows.size < 2 * min_leaf:
            return node
        split = _best_split(z[rows], node_labels, min_leaf)
        if split is None:
            return node
        j, threshold = split
        go_left = z[rows, j] <= threshold
        node.feature = j
        node.threshold = threshold
        node.left = build(rows[go_left], depth + 1)
        node.right = build(rows[~go_left], depth + 1)
        return node

    root = build(np.arange(labels.size), 0)
    return Tree(root=root, n_features=z.shape[1])


def _subtree_stats(node: TreeNode) -> tuple[int, int]:
    """(#leaves, #misclassified over the subtree's leaves)."""
    if node.is_leaf:
        return 1, node.misclassified
    ll, lm = _subtree_stats(node.left)
    rl, rm = _subtree_stats(node.right)
    return ll + rl, lm + rm


def _copy(node: TreeNode) -> TreeNode:
    if node.is_leaf:
        return TreeNode(n=node.n, counts=node.counts)
    return TreeNode(
        n=node.n,
        counts=node.counts,
        feature=node.feature,
        threshold=node.threshold,
        left=_copy(node.left),
        right=_copy(node.right),
    )


def prune_tree(tree: Tree, cc: float) -> Tree:
    """Weakest-link cost-complexity pruning.

    Each internal node's link strength is the per-leaf training
    misclassification improvement of keeping its subtree,
    g = (R(collapse) - R(subtree)) / (#leaves - 1), in units of the root
    sample fraction.  While the weakest link is below cc it is collapsed to a
    leaf; cc = 0 is the identity and large cc collapses to the root.
    """
    if cc < 0:
        raise InvalidConfigError("cost-complexity parameter must be >= 0")
    root = _copy(tree.root)
    n_root = root.n

    def weakest(node: TreeNode):
        """(g, node) of the minimum-g internal node, preorder-first on ties."""
        if node.is_leaf:
            return None
        leaves, misclass = _subtree_stats(node)
        g = (node.misclassified - misclass) / ((leaves - 1) * n_root)
        best = (g, node)
        for child in (node.left, node.right):
            cand = weakest(child)
            if cand is not None and cand[0] < best[0]:
                best = cand
        return best

    while True:
        found = weakest(root)
        if found is None or found[0] >= cc:
            break
        _, node = found
        node.feature = None
        node.threshold = None
        node.left = None
        node.right = None
    return Tree(root=root, n_features=tree.n_features)


def predict_tree(tree: Tree, row) -> bool:
    """Route one covariate row to a leaf and return its label."""
    row = np.asarray(row, dtype=float).ravel()
    node = tree.root
    while not node.is_leaf:
        if node.feature >= row.size:
            raise SchemaMismatchError(
                f"tree splits on covariate {node.feature} but the row has {row.size}"
            )
        node = node.left if row[node.feature] <= node.threshold else node.right
    return node.prediction


def _feature_name(j: int, names) -> str:
    return names[j] if names is not None else f"x{j}"


def render_tree(tree: Tree, names=None) -> str:
    """Deterministic indented outline; left child = condition true."""
    lines: list[str] = []

    def walk(node: TreeNode, depth: int) -> None:
        pad = "|  " * depth
        tail = f"[n={node.n}, counts=({node.counts[0]}, {node.counts[1]})]"
        if node.is_leaf:
            lines.append(f"{pad}leaf {node.prediction} {tail}")
        else:
            name = _feature_name(node.feature, names)
            lines.append(f"{pad}split {name} <= {node.threshold!r} {tail}")
            walk(node.left, depth + 1)
            walk(node.right, depth + 1)

    walk(tree.root, 0)
    return "\n".join(lines) + "\n"


_SPLIT_RE = re.compile(
    r"^split (?P<name>.+?) <= (?P<thr>\S+) \[n=(?P<n>\d+), counts=\((?P<c0>\d+), (?P<c1>\d+)\)\]$"
)
_LEAF_RE = re.compile(
    r"^leaf (?P<pred>True|False) \[n=(?P<n>\d+), counts=\((?P<c0>\d+), (?P<c1>\d+)\)\]$"
)


def parse_rendered_tree(text: str, names=None) -> Tree:
    """Inverse of :func:`render_tree` (structure, counts and thresholds)."""
    entries = []
    max_feature = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        depth = 0
        while raw.startswith("|  "):
            depth += 1
            raw = raw[3:]
        m = _SPLIT_RE.match(raw)
        if m:
            name = m.group("name")
            if names is not None:
                try:
                    feature = list(names).index(name)
                except ValueError:
                    raise SchemaMismatchError(f"line {lineno}: unknown covariate {name!r}") from None
            else:
                xm = re.fullmatch(r"x(\d+)", name)
                if not xm:
                    raise SchemaMismatchError(f"line {lineno}: cannot resolve {name!r} without names")
                feature = int(xm.group(1))
            max_feature = max(max_feature, feature)
            node = TreeNode(
                n=int(m.group("n")),
                counts=(int(m.group("c0")), int(m.group("c1"))),
                feature=feature,
                threshold=float(m.group("thr")),
            )
        else:
            m = _LEAF_RE.match(raw)
            if not m:
                raise SchemaMismatchError(f"line {lineno}: unparseable tree line {raw!r}")
            node = TreeNode(
                n=int(m.group("n")), counts=(int(m.group("c0")), int(m.group("c1")))
            )
        entries.append((depth, node))

    pos = 0

    def build(depth: int) -> TreeNode:
        nonlocal pos
        got_depth, node = entries[pos]
        if got_depth != depth:
            raise SchemaMismatchError("inconsistent indentation in rendered tree")
        pos += 1
        if node.feature is not None:
            node.left = build(depth + 1)
            node.right = build(depth + 1)
        return node

    if not entries:
        raise SchemaMismatchError("empty tree text")
    root = build(0)
    if pos != len(entries):
        raise SchemaMismatchError("trailing lines after the tree outline")
    n_features = len(names) if names is not None else max_feature + 1
    return Tree(root=root, n_features=max(n_features, 1))


def tree_to_dict(tree: Tree, names=None) -> dict:
    """Nested JSON form of the tree."""

    def walk(node: TreeNode) -> dict:
        base = {"n": node.n, "counts": list(node.counts)}
        if node.is_leaf:
            return {"kind": "leaf", "prediction": bool(node.prediction), **base}
        return {
            "kind": "split",
            "feature": node.feature,
            "name": _feature_name(node.feature, names),
            "threshold": node.threshold,
            "left": walk(node.left),
            "right": walk(node.right),
            **base,
        }

    return {"n_features": tree.n_features, "root": walk(tree.root)}


def tree_from_dict(payload: dict) -> Tree:
    def walk(d: dict) -> TreeNode:
        counts = (int(d["counts"][0]), int(d["counts"][1]))
        if d["kind"] == "leaf":
            return TreeNode(n=int(d["n"]), counts=counts)
        return TreeNode(
            n=int(d["n"]),
            counts=counts,
            feature=int(d["feature"]),
            threshold=float(d["threshold"]),
            left=walk(d["left"]),
            right=walk(d["right"]),
        )

    return Tree(root=walk(payload["root"]), n_features=int(payload["n_features"]))
