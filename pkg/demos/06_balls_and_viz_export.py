"""
Prefix balls and the nested JSON export
=======================================

Every digit prefix names a ball, and every ball is exactly one subtree.
This demo inspects a few balls of a small taxonomy and then exports the
whole hierarchy as nested JSON with codes attached to the leaves, the
format the command line tool's export-viz subcommand writes.
"""

import json

from hipan import describe_ball, encode_tree, loads_tree, tree_to_nested

TAXONOMY = """\
life\t-
animal\tlife
plant\tlife
bird\tanimal
cat\tanimal
dog\tanimal
fern\tplant
moss\tplant
"""

tree = loads_tree(TAXONOMY)
ds = encode_tree(tree)
for rec in ds.records:
    print(f"  {rec.leaf:>5s} -> {rec.code}")

# The empty prefix is the whole tree; one digit picks a depth-1 subtree;
# a full code pins down a single leaf.
for prefix in ([], [0], [0, 1], [1]):
    ball = describe_ball(ds, tree, prefix)
    print(
        f"prefix {prefix!r:>8}: depth {ball.depth}, "
        f"{ball.member_count} members {list(ball.members)}, "
        f"subtree root {ball.subtree_root!r}"
    )

# Prefixes that no leaf uses are legal queries; they are simply empty.
empty = describe_ball(ds, tree, [2])
print("unused prefix [2]:", empty.member_count, "members")

# Nested export: {name, children} on internal nodes, {name, code} on
# leaves, keys in stable order so exports diff cleanly run to run.
doc = tree_to_nested(tree, ds)
print(json.dumps(doc, indent=2, sort_keys=True))
